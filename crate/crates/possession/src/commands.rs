//! One function per CLI subcommand. Each reads what earlier steps left in the
//! run directory and writes its own artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use possession_core::events::extract_events;
use possession_core::TransitionMode;
use rayon::ThreadPool;
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{Decoder, RunConfig};
use crate::dataset::{self, read_rows, touch_rows, tracking_rows, write_rows, LoadedEpisode};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, write_metrics, Metrics, Predictions};
use crate::pipeline::{self, *};
use crate::report::{write_report, ReportIndex};

#[derive(Serialize)]
struct ScriptRow {
    episode_id: String,
    frame: u64,
    kind: String,
    actor_id: String,
    target_id: Option<String>,
}

/// Writes a synthetic dataset: tracking, touches and the generator's action script.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<Vec<LoadedEpisode>> {
    let (episodes, scripts) = synth_dataset(cfg)?;
    write_rows(&out.join("tracking.csv"), episodes.iter().flat_map(tracking_rows))?;
    write_rows(&out.join("touches.csv"), episodes.iter().flat_map(touch_rows))?;
    write_rows(
        &out.join("script.csv"),
        episodes.iter().zip(&scripts).flat_map(|(ep, acts)| {
            acts.iter().map(move |a| ScriptRow {
                episode_id: ep.episode.episode_id.clone(),
                frame: ep.first_frame + a.frame as u64,
                kind: a.kind.name().into(),
                actor_id: ep.node_name(a.actor),
                target_id: a.target.map(|t| ep.node_name(t)),
            })
        }),
    )?;
    log::info!("wrote {} synthetic episodes to {}", episodes.len(), out.display());
    Ok(episodes)
}

pub fn load_input(cfg: &RunConfig) -> Result<Vec<LoadedEpisode>> {
    dataset::load_dataset(&cfg.data.tracking, &cfg.data.touches, cfg.data.rate_hz, cfg.pitch())
}

pub fn prepare(cfg: &RunConfig, run: &Path) -> Result<Prepared> {
    let prep = pipeline::prepare(cfg, load_input(cfg)?)?;
    write_prepared(run, &prep)?;
    log::info!("prepared {} episodes ({} test)", prep.episodes.len(), prep.manifest.test.episodes);
    Ok(prep)
}

pub fn train(cfg: &RunConfig, run: &Path, pool: &ThreadPool) -> Result<Checkpoint> {
    let prep = load_prepared(cfg, run)?;
    let ck = train_model(cfg, &prep, pool)?;
    write_checkpoint(run, &ck)?;
    Ok(ck)
}

pub fn load_checkpoint(run: &Path) -> Result<Checkpoint> {
    Checkpoint::load(&require(run, CHECKPOINT, "train")?)
}

/// Decoded test episodes as in-memory predictions.
pub fn predictions(prep: &Prepared, decodes: &[(usize, EpisodeDecode)]) -> Predictions {
    let mut p = Predictions::default();
    for (i, d) in decodes {
        let ep = &prep.episodes[*i];
        let id = ep.source.episode.episode_id.clone();
        p.events.insert(id.clone(), extract_events(&d.path, &ep.window, &prep.rules));
        p.gold_events.insert(id.clone(), extract_events(&ep.gold, &ep.window, &prep.rules));
        p.paths.insert(id, d.path.clone());
    }
    p
}

pub fn decode(cfg: &RunConfig, run: &Path, pool: &ThreadPool) -> Result<Predictions> {
    let prep = load_prepared(cfg, run)?;
    let ck = load_checkpoint(run)?;
    check_checkpoint(&ck, &prep)?;
    let decodes = decode_all(cfg, &prep, &ck.model, pool)?;
    write_decodes(cfg, run, &prep, &decodes)?;
    Ok(predictions(&prep, &decodes))
}

fn check_checkpoint(ck: &Checkpoint, prep: &Prepared) -> Result<()> {
    if (ck.n_home, ck.n_away) != (prep.roster.n_home, prep.roster.n_away) {
        return Err(Error::Data(format!(
            "checkpoint was trained for {}+{} players, data has {}+{}",
            ck.n_home, ck.n_away, prep.roster.n_home, prep.roster.n_away
        )));
    }
    Ok(())
}

/// Predictions as written by `decode`.
pub fn read_predictions(run: &Path, prep: &Prepared) -> Result<Predictions> {
    let loaded = prep.loaded();
    let paths_file = require(run, PRED_PATHS, "decode")?;
    let pred_file = require(run, PRED_EVENTS, "decode")?;
    let gold_file = require(run, GOLD_EVENTS, "decode")?;
    Ok(Predictions {
        paths: dataset::paths_from_rows(&paths_file, read_rows(&paths_file)?, &loaded, &prep.rules)?,
        events: dataset::events_from_rows(&pred_file, read_rows(&pred_file)?, &loaded)?,
        gold_events: dataset::events_from_rows(&gold_file, read_rows(&gold_file)?, &loaded)?,
    })
}

pub fn evaluate_run(cfg: &RunConfig, run: &Path) -> Result<Metrics> {
    let prep = load_prepared(cfg, run)?;
    let pred = read_predictions(run, &prep)?;
    let m = evaluate(cfg, &prep, &pred)?;
    write_metrics(run, &m)?;
    Ok(m)
}

pub fn report(cfg: &RunConfig, run: &Path) -> Result<ReportIndex> {
    let prep = load_prepared(cfg, run)?;
    let pred = read_predictions(run, &prep)?;
    write_report(cfg, run, &prep, &pred)
}

/// prepare, train, decode, evaluate and report in one process.
pub fn run_all(cfg: &RunConfig, run: &Path, pool: &ThreadPool) -> Result<Metrics> {
    let prep = prepare(cfg, run)?;
    let ck = train_model(cfg, &prep, pool)?;
    write_checkpoint(run, &ck)?;
    let decodes = decode_all(cfg, &prep, &ck.model, pool)?;
    write_decodes(cfg, run, &prep, &decodes)?;
    let pred = predictions(&prep, &decodes);
    let m = evaluate(cfg, &prep, &pred)?;
    write_metrics(run, &m)?;
    write_report(cfg, run, &prep, &pred)?;
    Ok(m)
}

/// The seven model/decoder combinations compared by `matrix`.
pub const BASELINES: [(&str, TransitionMode, bool, bool, Decoder); 7] = [
    ("noncrf", TransitionMode::None, false, false, Decoder::Argmax),
    ("noncrf_gcd", TransitionMode::None, false, false, Decoder::Gcd),
    ("noncrf_vcd", TransitionMode::None, false, false, Decoder::Vcd),
    ("static_dense", TransitionMode::Static, false, true, Decoder::Viterbi),
    ("static_masked", TransitionMode::Static, true, true, Decoder::Viterbi),
    ("dynamic_dense", TransitionMode::Dynamic, false, true, Decoder::Viterbi),
    ("dynamic_masked", TransitionMode::Dynamic, true, true, Decoder::Viterbi),
];

pub fn baseline_config(cfg: &RunConfig, b: &(&str, TransitionMode, bool, bool, Decoder)) -> RunConfig {
    let mut c = cfg.clone();
    c.model.transition = b.1;
    c.model.masked = b.2;
    c.model.crf_loss = b.3;
    c.decode.decoder = b.4;
    c
}

/// Trains and evaluates every baseline on one prepared dataset; the three
/// Non-CRF decoders share a single trained model.
pub fn matrix(cfg: &RunConfig, run: &Path, pool: &ThreadPool) -> Result<Vec<(String, Metrics)>> {
    let prep = prepare(cfg, run)?;
    let mut rows = Vec::new();
    let mut shared: BTreeMap<(u8, bool, bool), Checkpoint> = BTreeMap::new();
    for b in &BASELINES {
        let c = baseline_config(cfg, b);
        let dir = run.join(b.0);
        write_text(&dir.join(CONFIG_FILE), &c.to_toml())?;
        write_prepared(&dir, &prep)?;
        let key = (b.1 as u8, b.2, b.3);
        let ck = match shared.get(&key) {
            Some(ck) => ck.clone(),
            None => {
                log::info!("training {}", b.0);
                let ck = train_model(&c, &prep, pool)?;
                shared.insert(key, ck.clone());
                ck
            }
        };
        write_checkpoint(&dir, &ck)?;
        let decodes = decode_all(&c, &prep, &ck.model, pool)?;
        write_decodes(&c, &dir, &prep, &decodes)?;
        let m = evaluate(&c, &prep, &predictions(&prep, &decodes))?;
        write_metrics(&dir, &m)?;
        rows.push((b.0.to_string(), m));
    }
    let mut csv = String::from("baseline,edge_acc,sender_acc,receiver_acc,violation_rate,precision,recall,f1,share_abs_error\n");
    let mut txt = String::new();
    let _ = writeln!(txt, "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "baseline", "edge", "sender", "recv", "viol", "P", "R", "F1");
    for (name, m) in &rows {
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{}",
            m.edges.edge_acc,
            m.edges.sender_acc,
            m.edges.receiver_acc,
            m.edges.violation_rate,
            m.events.precision,
            m.events.recall,
            m.events.f1,
            m.possession.abs_error
        );
        let _ = writeln!(
            txt,
            "{name:<16} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            m.edges.edge_acc,
            m.edges.sender_acc,
            m.edges.receiver_acc,
            m.edges.violation_rate,
            m.events.precision,
            m.events.recall,
            m.events.f1
        );
    }
    write_text(&run.join("matrix.csv"), &csv)?;
    write_text(&run.join("matrix.txt"), &txt)?;
    Ok(rows)
}
