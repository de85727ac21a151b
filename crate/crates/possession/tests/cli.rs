use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use possession::dataset::{read_rows, write_rows, EventRow, PathRow};
use possession::scorefile::{decode, encode, read_score_file};
use possession_core::crf::viterbi_decode;
use possession_core::{Roster, RuleSet};

const CONFIG: &str = r#"
seed = 3
[data]
tracking = "data/tracking.csv"
touches = "data/touches.csv"
test_fraction = 0.34
[synth]
matches = 3
n_per_team = 4
episodes = 2
episode_s = 30.0
[train]
epochs = 2
batch_size = 4
learning_rate = 0.01
window_subsample = 3
"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new(extra: &str) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cfg.toml"), format!("{CONFIG}{extra}")).unwrap();
        Workspace { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.path("cfg.toml");
        let out = self.path("run");
        Command::new(env!("CARGO_BIN_EXE_possession"))
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .arg("--jobs")
            .arg("2")
            .args(if args[0] == "synth" { vec![] } else { vec!["--out".as_ref(), out.as_os_str()] })
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rules() -> RuleSet {
    Roster::new(4, 4, 4).rules().unwrap()
}

#[test]
fn staged_commands_produce_every_artifact() {
    let ws = Workspace::new("");
    ws.ok(&["synth"]);
    for f in ["tracking.csv", "touches.csv", "script.csv"] {
        assert!(ws.path("data").join(f).exists(), "{f}");
    }
    let manifest = ws.ok(&["prepare"]);
    assert!(manifest.contains("test: 1 matches, 2 episodes"), "{manifest}");
    ws.ok(&["train"]);
    ws.ok(&["decode"]);
    let metrics = ws.ok(&["evaluate"]);
    assert!(metrics.contains("violations: 0 (0.0000)"), "{metrics}");
    ws.ok(&["report"]);

    let index: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ws.path("run/analytics/index.json")).unwrap()).unwrap();
    let files: Vec<&str> = index["files"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(files.iter().any(|f| f.starts_with("timeline_")));
    assert_eq!(files.iter().filter(|f| f.starts_with("pass_network_")).count(), 4);
    for f in &files {
        assert!(ws.path("run/analytics").join(f).exists(), "{f}");
    }
    let echoed = std::fs::read_to_string(ws.path("run/config.toml")).unwrap();
    assert!(echoed.contains("seed = 3"));
}

#[test]
fn score_files_load_and_decode_legally() {
    let ws = Workspace::new("");
    ws.ok(&["synth"]);
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    ws.ok(&["decode"]);
    let rules = rules();
    let dir = ws.path("run/decodes/scores");
    let mut n = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let bytes = std::fs::read(&p).unwrap();
        let table = decode(&bytes, &rules).unwrap();
        assert_eq!(encode(&table, &rules).unwrap(), bytes);
        let vcd = viterbi_decode(&table.clone().without_transitions().with_masked(true), &rules).unwrap();
        assert_eq!(vcd.path.violations(&rules), 0);
        assert_eq!(read_score_file(&p, &rules).unwrap(), table);
        n += 1;
    }
    assert_eq!(n, 2);
}

#[test]
fn per_window_decoding_tiles_episodes() {
    let ws = Workspace::new("[decode]\nper_window = true\n");
    ws.ok(&["synth"]);
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    ws.ok(&["decode"]);
    let mut names: Vec<String> =
        std::fs::read_dir(ws.path("run/decodes/scores")).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert!(names.len() > 2, "{names:?}");
    assert!(names.iter().all(|n| n.ends_with(".pcrf") && n.contains("_0")), "{names:?}");
    let rows: Vec<(u64, PathRow)> = read_rows(&ws.path("run/decodes/paths.csv")).unwrap();
    let steps: usize = std::fs::read_to_string(ws.path("run/prepared/episodes.csv"))
        .unwrap()
        .lines()
        .filter(|l| l.contains(",test,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(rows.len(), steps);
}

#[test]
fn gold_as_prediction_scores_perfectly() {
    let ws = Workspace::new("");
    ws.ok(&["synth"]);
    ws.ok(&["prepare"]);
    ws.ok(&["train"]);
    ws.ok(&["decode"]);
    let test: Vec<String> = std::fs::read_to_string(ws.path("run/prepared/episodes.csv"))
        .unwrap()
        .lines()
        .filter(|l| l.contains(",test,"))
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let gold: Vec<(u64, PathRow)> = read_rows(&ws.path("run/prepared/gold_paths.csv")).unwrap();
    write_rows(&ws.path("run/decodes/paths.csv"), gold.into_iter().map(|(_, r)| r).filter(|r| test.contains(&r.episode_id))).unwrap();
    let events: Vec<(u64, EventRow)> = read_rows(&ws.path("run/events/gold_events.csv")).unwrap();
    write_rows(&ws.path("run/events/pred_events.csv"), events.into_iter().map(|(_, r)| r)).unwrap();
    let text = ws.ok(&["evaluate"]);
    for want in ["edge_acc: 1.0000", "sender_acc: 1.0000", "receiver_acc: 1.0000", "events: P 1.0000 R 1.0000 F1 1.0000", "abs_error 0.0000"] {
        assert!(text.contains(want), "missing `{want}` in\n{text}");
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ws.path("run/metrics/metrics.json")).unwrap()).unwrap();
    for net in m["pass_networks"].as_array().unwrap() {
        for k in ["degree_mae", "weight_mae", "jsd", "spectral"] {
            assert_eq!(net["similarity"][k].as_f64(), Some(0.0), "{net}");
        }
    }
}

#[test]
fn missing_artifacts_name_the_step() {
    let ws = Workspace::new("");
    ws.ok(&["synth"]);
    let o = ws.run(&["decode"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("run `prepare` first"), "{}", stderr(&o));
    ws.ok(&["prepare"]);
    let o = ws.run(&["decode"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("model.json") && stderr(&o).contains("run `train` first"), "{}", stderr(&o));
    let o = ws.run(&["report"]);
    assert!(stderr(&o).contains("run `decode` first"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_2() {
    let ws = Workspace::new("[analytics]\nnot_a_key = 1\n");
    let o = ws.run(&["prepare"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("not_a_key"), "{}", stderr(&o));
    let ws = Workspace::new("");
    std::fs::write(ws.path("cfg.toml"), "[labeling]\nwindow_steps = 0\n").unwrap();
    let o = ws.run(&["prepare"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("labeling.window_steps"), "{}", stderr(&o));
}

fn write(path: &Path, text: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, text).unwrap();
}

#[test]
fn bad_input_files_are_reported() {
    let ws = Workspace::new("");
    write(&ws.path("data/tracking.csv"), "episode_id,frame,time_s,team,player_id,x_m,y_m\n");
    write(&ws.path("data/touches.csv"), "episode_id,frame,time_s,player_id,kind\n");
    let o = ws.run(&["prepare"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("tracking.csv"), "{}", stderr(&o));

    write(
        &ws.path("data/tracking.csv"),
        "episode_id,frame,time_s,team,player_id,x_m,y_m\nm1_e0,0,0.0,home,h1,1.0,2.0\nm1_e0,0,0.0,away,a1,oops,2.0\n",
    );
    let o = ws.run(&["prepare"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn matrix_runs_all_seven_baselines() {
    let ws = Workspace::new("");
    ws.ok(&["synth"]);
    ws.ok(&["matrix"]);
    let csv = std::fs::read_to_string(ws.path("run/matrix.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let names: Vec<&str> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(names, ["noncrf", "noncrf_gcd", "noncrf_vcd", "static_dense", "static_masked", "dynamic_dense", "dynamic_masked"]);
    for r in &rows {
        if ["noncrf_gcd", "noncrf_vcd", "static_masked", "dynamic_masked"].contains(&r[0]) {
            assert_eq!(r[4].parse::<f64>().unwrap(), 0.0, "{r:?}");
        }
        let echoed = std::fs::read_to_string(ws.path(&format!("run/{}/config.toml", r[0]))).unwrap();
        assert!(possession::RunConfig::from_toml(&echoed).is_ok());
    }
    let a = std::fs::read(ws.path("run/noncrf/checkpoints/model.json")).unwrap();
    assert_eq!(a, std::fs::read(ws.path("run/noncrf_vcd/checkpoints/model.json")).unwrap());
}
