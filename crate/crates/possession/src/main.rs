use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use possession::commands;
use possession::parallel::thread_pool;
use possession::pipeline::{write_text, CONFIG_FILE};
use possession::{Error, Result, RunConfig};

#[derive(Parser)]
#[command(name = "possession", version, about = "Possession-path inference from player tracking data")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory (default runs/<config name>); for `synth`, the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (tracking.csv, touches.csv, script.csv).
    Synth,
    /// Insert missed touches, build gold paths and split the data.
    Prepare,
    /// Train the scorer on the training split.
    Train,
    /// Decode the test split with the trained model.
    Decode,
    /// Compare decoded paths and events with gold.
    Evaluate,
    /// Heatmaps, possession timelines and pass networks.
    Report,
    /// prepare, train, decode, evaluate and report.
    Run,
    /// Train and evaluate every baseline on the same split.
    Matrix,
}

fn execute(cli: Cli) -> Result<()> {
    let config_path = cli.config.ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Synth = cli.command {
        let out = match cli.out {
            Some(dir) => dir,
            None => cfg.data.tracking.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        commands::synth(&cfg, &out)?;
        return Ok(());
    }
    let run = cli.out.unwrap_or_else(|| {
        let stem = config_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("runs").join(stem)
    });
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = thread_pool(jobs)?;
    write_text(&run.join(CONFIG_FILE), &cfg.to_toml())?;
    match cli.command {
        Command::Synth => unreachable!(),
        Command::Prepare => {
            let prep = commands::prepare(&cfg, &run)?;
            print!("{}", prep.manifest.to_text());
        }
        Command::Train => {
            let ck = commands::train(&cfg, &run, &pool)?;
            if let Some(last) = ck.train_report.epoch_losses.last() {
                println!("final loss {:.4}", last.total);
            }
        }
        Command::Decode => {
            let pred = commands::decode(&cfg, &run, &pool)?;
            println!("decoded {} episodes", pred.paths.len());
        }
        Command::Evaluate => print!("{}", commands::evaluate_run(&cfg, &run)?.to_text()),
        Command::Report => {
            let index = commands::report(&cfg, &run)?;
            println!("wrote {} files", index.files.len());
        }
        Command::Run => print!("{}", commands::run_all(&cfg, &run, &pool)?.to_text()),
        Command::Matrix => {
            commands::matrix(&cfg, &run, &pool)?;
            print!("{}", std::fs::read_to_string(run.join("matrix.txt")).unwrap_or_default());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
