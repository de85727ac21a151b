//! Pipeline stages and the run-directory layout.
//!
//! ```text
//! <run>/config.toml             effective config
//! <run>/manifest.json|.txt      dataset counts
//! <run>/prepared/               gold paths and the train/test split
//! <run>/checkpoints/            model.json, train_log.csv
//! <run>/decodes/                paths.csv, scores/*.pcrf
//! <run>/events/                 pred_events.csv, gold_events.csv
//! <run>/metrics/                metrics.txt, metrics.json, relaxed_recall.csv
//! <run>/analytics/              heatmaps, timelines, pass networks, index.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use possession_core::crf::{greedy_decode, viterbi_decode};
use possession_core::events::extract_events;
use possession_core::features::Normalization;
use possession_core::labeling::{build_gold_path, insert_missed_touches, rdp_touch_candidates, resample, window_starts};
use possession_core::synth::generate_match;
use possession_core::train::{train, TrainingExample};
use possession_core::{PossessionPath, Roster, RuleSet, ScoreTable, ScorerModel, TrackingWindow};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::{Decoder, RunConfig};
use crate::dataset::{self, event_row, match_key, path_rows, read_rows, write_rows, EventRow, LoadedEpisode, PathRow};
use crate::error::{Error, Result};
use crate::parallel::Parallel;
use crate::scorefile;

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const MANIFEST_TXT: &str = "manifest.txt";
pub const GOLD_PATHS: &str = "prepared/gold_paths.csv";
pub const SPLIT_FILE: &str = "prepared/episodes.csv";
pub const CHECKPOINT: &str = "checkpoints/model.json";
pub const TRAIN_LOG: &str = "checkpoints/train_log.csv";
pub const PRED_PATHS: &str = "decodes/paths.csv";
pub const SCORES_DIR: &str = "decodes/scores";
pub const PRED_EVENTS: &str = "events/pred_events.csv";
pub const GOLD_EVENTS: &str = "events/gold_events.csv";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    std::fs::write(path, text).map_err(Error::io(path))
}

pub(crate) fn require(run: &Path, rel: &str, step: &'static str) -> Result<PathBuf> {
    let p = run.join(rel);
    if p.exists() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact { path: p, step })
    }
}

/// One episode at the decoding rate.
#[derive(Clone, Debug)]
pub struct PreparedEpisode {
    /// Resampled episode; its touches are the ones the gold path was built from.
    pub source: LoadedEpisode,
    pub window: TrackingWindow,
    pub gold: PossessionPath,
    pub test: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub matches: usize,
    pub episodes: usize,
    pub events: usize,
    pub frames: usize,
    pub steps: usize,
    pub windows: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n_home: usize,
    pub n_away: usize,
    pub n_out: usize,
    pub rate_hz: f64,
    pub step_hz: f64,
    pub window_steps: usize,
    pub window_stride: usize,
    pub train: SplitCounts,
    pub test: SplitCounts,
    /// Training windows after subsampling.
    pub train_windows_used: usize,
    pub touches_inserted: usize,
    pub candidates_dropped: usize,
    pub illegal_gold_steps: usize,
    /// Episodes shorter than one window.
    pub short_episodes: Vec<String>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "players: {} home + {} away, {} outside nodes", self.n_home, self.n_away, self.n_out);
        let _ = writeln!(s, "rates: {} Hz tracking, {} Hz steps", self.rate_hz, self.step_hz);
        let _ = writeln!(s, "windows: {} steps, stride {}", self.window_steps, self.window_stride);
        for (name, c) in [("train", &self.train), ("test", &self.test)] {
            let _ = writeln!(
                s,
                "{name}: {} matches, {} episodes, {} events, {} frames, {} steps, {} windows",
                c.matches, c.episodes, c.events, c.frames, c.steps, c.windows
            );
        }
        let _ = writeln!(s, "train_windows_used: {}", self.train_windows_used);
        let _ = writeln!(s, "touches_inserted: {}", self.touches_inserted);
        let _ = writeln!(s, "candidates_dropped: {}", self.candidates_dropped);
        let _ = writeln!(s, "illegal_gold_steps: {}", self.illegal_gold_steps);
        let _ = writeln!(s, "short_episodes: {}", self.short_episodes.len());
        s
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub roster: Roster,
    pub rules: RuleSet,
    pub episodes: Vec<PreparedEpisode>,
    pub manifest: Manifest,
}

impl Prepared {
    pub fn test_episodes(&self) -> impl Iterator<Item = &PreparedEpisode> {
        self.episodes.iter().filter(|e| e.test)
    }

    pub fn loaded(&self) -> Vec<LoadedEpisode> {
        self.episodes.iter().map(|e| e.source.clone()).collect()
    }
}

/// Synthetic matches as loaded episodes (tracking rate, ball channel and touches).
pub fn synth_dataset(cfg: &RunConfig) -> Result<(Vec<LoadedEpisode>, Vec<Vec<possession_core::synth::ScriptAction>>)> {
    let mut episodes = Vec::new();
    let mut scripts = Vec::new();
    for m in 0..cfg.synth.matches {
        let sc = cfg.synth_config(m);
        let roster = sc.roster();
        let ids: Vec<String> = (0..roster.n_home)
            .map(|i| format!("home_{:02}", i + 1))
            .chain((0..roster.n_away).map(|i| format!("away_{:02}", i + 1)))
            .collect();
        for ep in generate_match(&sc)?.episodes {
            episodes.push(LoadedEpisode { episode: ep.episode, player_ids: ids.clone(), first_frame: 0 });
            scripts.push(ep.actions);
        }
    }
    Ok((episodes, scripts))
}

/// Which units (matches, or episodes when there is a single match) are held out.
fn test_flags(episodes: &[LoadedEpisode], fraction: f64) -> Vec<bool> {
    let groups: BTreeSet<&str> = episodes.iter().map(|e| match_key(&e.episode.episode_id)).collect();
    let pick = |n: usize| -> usize {
        if fraction <= 0.0 || n < 2 {
            0
        } else {
            ((fraction * n as f64).round() as usize).clamp(1, n - 1)
        }
    };
    if groups.len() >= 2 {
        let n_test = pick(groups.len());
        let test: BTreeSet<&str> = groups.iter().rev().take(n_test).copied().collect();
        episodes.iter().map(|e| test.contains(match_key(&e.episode.episode_id))).collect()
    } else {
        let n = episodes.len();
        let n_test = pick(n);
        (0..n).map(|i| i >= n - n_test).collect()
    }
}

fn split_counts<'a>(eps: impl Iterator<Item = (&'a PreparedEpisode, usize)>, cfg: &RunConfig) -> SplitCounts {
    let mut c = SplitCounts::default();
    let mut groups = BTreeSet::new();
    for (e, frames) in eps {
        groups.insert(match_key(&e.source.episode.episode_id).to_string());
        c.episodes += 1;
        c.frames += frames;
        c.steps += e.window.steps();
        c.events += extract_events(&e.gold, &e.window, &e.source.episode.roster.rules().expect("valid roster")).len();
        c.windows += window_starts(e.window.steps(), cfg.labeling.window_steps, cfg.labeling.window_stride).len();
    }
    c.matches = groups.len();
    c
}

/// Touch insertion, resampling, gold paths, the split and the manifest.
pub fn prepare(cfg: &RunConfig, loaded: Vec<LoadedEpisode>) -> Result<Prepared> {
    let first = loaded.first().ok_or_else(|| Error::Data("no episodes".into()))?;
    let roster = first.episode.roster;
    let rules = roster.rules()?;
    let flags = test_flags(&loaded, cfg.data.test_fraction);
    let lab = &cfg.labeling;
    let mut manifest = Manifest {
        n_home: roster.n_home,
        n_away: roster.n_away,
        n_out: roster.n_out,
        rate_hz: cfg.data.rate_hz,
        step_hz: lab.step_hz,
        window_steps: lab.window_steps,
        window_stride: lab.window_stride,
        ..Manifest::default()
    };
    let mut episodes = Vec::with_capacity(loaded.len());
    let mut frames = Vec::with_capacity(loaded.len());
    for (mut ep, test) in loaded.into_iter().zip(flags) {
        let id = ep.episode.episode_id.clone();
        let context = |e: &dyn std::fmt::Display| Error::Data(format!("episode {id}: {e}"));
        if ep.episode.roster != roster {
            return Err(context(&"roster differs from the first episode"));
        }
        if lab.insert_missed_touches {
            if let Some(ball) = &ep.episode.ball {
                let candidates = rdp_touch_candidates(ball, lab.rdp_epsilon_m);
                let outcome = insert_missed_touches(&ep.episode, &candidates, &lab.insertion);
                manifest.touches_inserted += outcome.inserted;
                manifest.candidates_dropped += outcome.dropped.len();
                ep.episode.touches = outcome.touches;
            }
        }
        frames.push(ep.episode.frames());
        let coarse = resample(&ep.episode, lab.step_hz, lab.resample).map_err(|e| context(&e))?;
        let gold = build_gold_path(&coarse.touches, coarse.frames(), &rules).map_err(|e| context(&e))?;
        manifest.illegal_gold_steps += gold.illegal_steps.len();
        let window = coarse.tracking_window()?;
        if window.steps() < lab.window_steps {
            log::info!("episode {id} is shorter than one window; it is not used for training");
            manifest.short_episodes.push(id.clone());
        }
        let source = LoadedEpisode { episode: coarse, player_ids: ep.player_ids, first_frame: ep.first_frame };
        episodes.push(PreparedEpisode { source, window, gold: gold.path, test });
    }
    manifest.train = split_counts(episodes.iter().zip(frames.iter().copied()).filter(|(e, _)| !e.test), cfg);
    manifest.test = split_counts(episodes.iter().zip(frames.iter().copied()).filter(|(e, _)| e.test), cfg);
    let mut prep = Prepared { roster, rules, episodes, manifest };
    prep.manifest.train_windows_used = training_examples(cfg, &prep).len();
    Ok(prep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SplitRow {
    episode_id: String,
    split: String,
    start_time_s: f64,
    steps: usize,
}

pub fn write_prepared(run: &Path, prep: &Prepared) -> Result<()> {
    write_text(&run.join(MANIFEST_JSON), &(serde_json::to_string_pretty(&prep.manifest).expect("manifest serializes") + "\n"))?;
    write_text(&run.join(MANIFEST_TXT), &prep.manifest.to_text())?;
    write_rows(&run.join(GOLD_PATHS), prep.episodes.iter().flat_map(|e| path_rows(&e.source, &e.gold, &prep.rules)))?;
    write_rows(
        &run.join(SPLIT_FILE),
        prep.episodes.iter().map(|e| SplitRow {
            episode_id: e.source.episode.episode_id.clone(),
            split: if e.test { "test" } else { "train" }.into(),
            start_time_s: e.source.episode.start_time_s,
            steps: e.window.steps(),
        }),
    )
}

/// Rebuilds the prepared dataset from the tracking file and the artifacts of `prepare`.
pub fn load_prepared(cfg: &RunConfig, run: &Path) -> Result<Prepared> {
    let manifest_path = require(run, MANIFEST_JSON, "prepare")?;
    let gold_path = require(run, GOLD_PATHS, "prepare")?;
    let split_path = require(run, SPLIT_FILE, "prepare")?;
    let text = std::fs::read_to_string(&manifest_path).map_err(Error::io(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", manifest_path.display())))?;
    let loaded = dataset::read_tracking(&cfg.data.tracking, cfg.data.rate_hz, cfg.pitch())?;
    let roster = loaded[0].episode.roster;
    if (roster.n_home, roster.n_away) != (manifest.n_home, manifest.n_away) {
        return Err(Error::Data(format!("{} does not match the tracking data", manifest_path.display())));
    }
    let rules = roster.rules()?;
    let splits: BTreeMap<String, bool> =
        read_rows::<SplitRow>(&split_path)?.into_iter().map(|(_, r)| (r.episode_id, r.split == "test")).collect();
    let coarse: Vec<LoadedEpisode> = loaded
        .into_iter()
        .filter(|e| splits.contains_key(&e.episode.episode_id))
        .map(|e| {
            let c = resample(&e.episode, cfg.labeling.step_hz, cfg.labeling.resample)?;
            Ok(LoadedEpisode { episode: c, player_ids: e.player_ids, first_frame: e.first_frame })
        })
        .collect::<Result<_>>()?;
    let mut gold = dataset::paths_from_rows(&gold_path, read_rows(&gold_path)?, &coarse, &rules)?;
    let mut episodes = Vec::with_capacity(coarse.len());
    for source in coarse {
        let id = source.episode.episode_id.clone();
        let window = source.episode.tracking_window()?;
        let g = gold.remove(&id).ok_or_else(|| Error::Data(format!("{}: no gold path for episode {id}", gold_path.display())))?;
        if g.len() != window.steps() {
            return Err(Error::Data(format!("episode {id}: gold path has {} steps, tracking has {}", g.len(), window.steps())));
        }
        episodes.push(PreparedEpisode { test: splits[&id], source, window, gold: g });
    }
    if episodes.len() != splits.len() {
        return Err(Error::Data(format!("{}: episodes missing from the tracking data", split_path.display())));
    }
    Ok(Prepared { roster, rules, episodes, manifest })
}

/// Training windows of the train split, every `window_subsample`-th per episode.
pub fn training_examples(cfg: &RunConfig, prep: &Prepared) -> Vec<TrainingExample> {
    let size = cfg.labeling.window_steps;
    let mut out = Vec::new();
    for e in prep.episodes.iter().filter(|e| !e.test) {
        for s in window_starts(e.window.steps(), size, cfg.labeling.window_stride).into_iter().step_by(cfg.train.window_subsample) {
            out.push(TrainingExample { window: e.window.slice(s, size), gold: PossessionPath(e.gold.edges()[s..s + size].to_vec()) });
        }
    }
    out
}

pub fn train_model(cfg: &RunConfig, prep: &Prepared, pool: &ThreadPool) -> Result<Checkpoint> {
    let data = training_examples(cfg, prep);
    if data.is_empty() {
        return Err(Error::Data("no training windows (is every training episode shorter than a window?)".into()));
    }
    log::info!("training on {} windows", data.len());
    let norm = Normalization::fit(data.iter().map(|d| &d.window), &prep.rules)?;
    let mut model = ScorerModel::new(cfg.model.mode(), &prep.rules, norm);
    model.lambda1 = cfg.model.lambda1;
    model.lambda2 = cfg.model.lambda2;
    model.mask_value = cfg.model.mask_value;
    let report = train(&mut model, &prep.rules, &data, &cfg.train_config(), &Parallel { pool })?;
    Ok(Checkpoint::new(model, prep.roster.n_home, prep.roster.n_away, report))
}

pub fn write_checkpoint(run: &Path, ck: &Checkpoint) -> Result<()> {
    ensure_dir(&run.join("checkpoints"))?;
    ck.save(&run.join(CHECKPOINT))?;
    let mut log = String::from("epoch,total,crf,coarse,emit\n");
    for (i, l) in ck.train_report.epoch_losses.iter().enumerate() {
        let _ = writeln!(log, "{},{},{},{},{}", i + 1, l.total, l.crf, l.coarse, l.emit);
    }
    write_text(&run.join(TRAIN_LOG), &log)
}

pub fn decode_table(decoder: Decoder, table: &ScoreTable, rules: &RuleSet) -> Result<PossessionPath> {
    Ok(match decoder {
        Decoder::Argmax => greedy_decode(table, rules, false)?,
        Decoder::Gcd => greedy_decode(table, rules, true)?,
        Decoder::Vcd => viterbi_decode(&table.clone().without_transitions().with_masked(true), rules)?.path,
        Decoder::Viterbi => viterbi_decode(table, rules)?.path,
    })
}

/// Decoded path of one episode plus the score tables it was decoded from.
pub struct EpisodeDecode {
    pub path: PossessionPath,
    /// `(start step, table)` per decoded unit.
    pub tables: Vec<(usize, ScoreTable)>,
}

/// Whole-episode decoding, or consecutive non-overlapping windows when `per_window`.
pub fn decode_episode(cfg: &RunConfig, model: &ScorerModel, rules: &RuleSet, ep: &PreparedEpisode) -> Result<EpisodeDecode> {
    let steps = ep.window.steps();
    let unit = if cfg.decode.per_window { cfg.labeling.window_steps } else { steps };
    let mut edges = Vec::with_capacity(steps);
    let mut tables = Vec::new();
    for start in (0..steps).step_by(unit.max(1)) {
        let len = unit.min(steps - start);
        let w = if len == steps { ep.window.clone() } else { ep.window.slice(start, len) };
        let table = model.score_window(&w, rules)?;
        edges.extend_from_slice(decode_table(cfg.decode.decoder, &table, rules)?.edges());
        tables.push((start, table));
    }
    Ok(EpisodeDecode { path: PossessionPath(edges), tables })
}

pub fn decode_all(cfg: &RunConfig, prep: &Prepared, model: &ScorerModel, pool: &ThreadPool) -> Result<Vec<(usize, EpisodeDecode)>> {
    model.validate(&prep.rules)?;
    let test: Vec<usize> = prep.episodes.iter().enumerate().filter(|(_, e)| e.test).map(|(i, _)| i).collect();
    pool.install(|| {
        test.par_iter().map(|&i| decode_episode(cfg, model, &prep.rules, &prep.episodes[i]).map(|d| (i, d))).collect()
    })
}

pub fn write_decodes(cfg: &RunConfig, run: &Path, prep: &Prepared, decodes: &[(usize, EpisodeDecode)]) -> Result<()> {
    let scores = run.join(SCORES_DIR);
    if scores.exists() {
        std::fs::remove_dir_all(&scores).map_err(Error::io(&scores))?;
    }
    ensure_dir(&scores)?;
    let mut path_out: Vec<PathRow> = Vec::new();
    let mut pred_events: Vec<EventRow> = Vec::new();
    let mut gold_events: Vec<EventRow> = Vec::new();
    for (i, d) in decodes {
        let ep = &prep.episodes[*i];
        let id = &ep.source.episode.episode_id;
        for (start, table) in &d.tables {
            let name = if cfg.decode.per_window { format!("{id}_{start:06}.pcrf") } else { format!("{id}.pcrf") };
            let file = scores.join(name);
            scorefile::write_score_file(&file, table, &prep.rules).map_err(|source| Error::ScoreFile { path: file, source })?;
        }
        path_out.extend(path_rows(&ep.source, &d.path, &prep.rules));
        pred_events.extend(extract_events(&d.path, &ep.window, &prep.rules).iter().map(|e| event_row(&ep.source, e)));
        gold_events.extend(extract_events(&ep.gold, &ep.window, &prep.rules).iter().map(|e| event_row(&ep.source, e)));
    }
    write_rows(&run.join(PRED_PATHS), path_out)?;
    write_rows(&run.join(PRED_EVENTS), pred_events)?;
    write_rows(&run.join(GOLD_EVENTS), gold_events)
}
