//! Run configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid config. Relative
//! paths resolve against the directory holding the config file.
//!
//! ```toml
//! seed = 0                      # training shuffle seed; synth uses seed + match index
//!
//! [data]
//! tracking = "data/tracking.csv"
//! touches = "data/touches.csv"
//! rate_hz = 25.0                # tracking frame rate
//! pitch_length = 105.0
//! pitch_width = 68.0
//! test_fraction = 0.25          # share of matches (or episodes) held out
//!
//! [synth]                       # used by `synth` only
//! matches = 4
//! n_per_team = 11
//! episodes = 2
//! episode_s = 60.0
//! tempo_s = 2.0
//! pass_speed = 15.0
//! noise_sigma = 0.0
//! out_prob = 0.05
//! turnover_prob = 0.15
//! one_touch_prob = 0.1
//! dribble_touch_prob = 0.2
//! max_speed = 8.0
//!
//! [labeling]
//! step_hz = 5.0
//! resample = "decimate"         # or "interpolate"
//! window_steps = 50
//! window_stride = 5
//! insert_missed_touches = true  # needs ball rows in the tracking file
//! rdp_epsilon_m = 0.8
//! [labeling.insertion]
//! match_window_s = 0.4
//! match_score = 1.0
//! mismatch_score = -1.0
//! gap_score = -0.5
//! attribution_radius_m = 3.0
//!
//! [model]
//! transition = "dynamic"        # "dynamic", "static" or "none"
//! masked = true
//! crf_loss = true
//! lambda1 = 1.0                 # sender/receiver cross-entropy weight
//! lambda2 = 1.0                 # emission cross-entropy weight
//! mask_value = -10000.0
//!
//! [train]
//! epochs = 20
//! batch_size = 32
//! learning_rate = 0.001
//! beta1 = 0.9
//! beta2 = 0.999
//! epsilon = 1e-8
//! window_subsample = 1          # train on every k-th window
//!
//! [decode]
//! decoder = "viterbi"           # "argmax", "gcd", "vcd" or "viterbi"
//! per_window = false            # decode whole episodes unless set
//!
//! [evaluation]
//! dt_max_s = 1.0
//! dt_grid_s = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0]
//! dx_grid_m = [0.0, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0]
//!
//! [analytics]
//! attribution = "sender"        # or "exclude_flights"
//! bin_minutes = 5.0
//! kde_bandwidth_m = 4.0
//! kde_scott = false             # Scott's rule instead of the fixed bandwidth
//! kde_cell_m = 1.0
//! image_scale = 4               # pixels per grid cell in heatmap images
//! [analytics.substitutions]     # player_id = player_id it is merged into
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use possession_core::analytics::{Attribution, Bandwidth};
use possession_core::crf::DEFAULT_MASK_VALUE;
use possession_core::labeling::{InsertionConfig, ResampleMode, WINDOW_STEPS, WINDOW_STRIDE};
use possession_core::synth::SynthConfig;
use possession_core::train::TrainConfig;
use possession_core::{ModelMode, Pitch, TransitionMode};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub synth: SynthSection,
    pub labeling: LabelingConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub decode: DecodeConfig,
    pub evaluation: EvaluationConfig,
    pub analytics: AnalyticsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub tracking: PathBuf,
    pub touches: PathBuf,
    pub rate_hz: f64,
    pub pitch_length: f64,
    pub pitch_width: f64,
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            tracking: PathBuf::from("data/tracking.csv"),
            touches: PathBuf::from("data/touches.csv"),
            rate_hz: 25.0,
            pitch_length: 105.0,
            pitch_width: 68.0,
            test_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub matches: usize,
    pub n_per_team: usize,
    pub episodes: usize,
    pub episode_s: f64,
    pub tempo_s: f64,
    pub pass_speed: f64,
    pub noise_sigma: f64,
    pub out_prob: f64,
    pub turnover_prob: f64,
    pub one_touch_prob: f64,
    pub dribble_touch_prob: f64,
    pub max_speed: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SynthSection {
            matches: 4,
            n_per_team: s.n_per_team,
            episodes: 2,
            episode_s: s.episode_s,
            tempo_s: s.tempo_s,
            pass_speed: s.pass_speed,
            noise_sigma: s.noise_sigma,
            out_prob: s.out_prob,
            turnover_prob: s.turnover_prob,
            one_touch_prob: s.one_touch_prob,
            dribble_touch_prob: s.dribble_touch_prob,
            max_speed: s.max_speed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingConfig {
    pub step_hz: f64,
    pub resample: ResampleMode,
    pub window_steps: usize,
    pub window_stride: usize,
    pub insert_missed_touches: bool,
    pub rdp_epsilon_m: f64,
    pub insertion: InsertionConfig,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        LabelingConfig {
            step_hz: 5.0,
            resample: ResampleMode::Decimate,
            window_steps: WINDOW_STEPS,
            window_stride: WINDOW_STRIDE,
            insert_missed_touches: true,
            rdp_epsilon_m: 0.8,
            insertion: InsertionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub transition: TransitionMode,
    pub masked: bool,
    pub crf_loss: bool,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mask_value: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            transition: TransitionMode::Dynamic,
            masked: true,
            crf_loss: true,
            lambda1: 1.0,
            lambda2: 1.0,
            mask_value: DEFAULT_MASK_VALUE,
        }
    }
}

impl ModelConfig {
    pub fn mode(&self) -> ModelMode {
        ModelMode { transition: self.transition, masked: self.masked, crf_loss: self.crf_loss }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub window_subsample: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            window_subsample: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Independent per-step emission argmax.
    Argmax,
    /// Greedy over allowed successors, adding transition scores when the model has them.
    Gcd,
    /// Viterbi over allowed paths on emissions alone.
    Vcd,
    /// Viterbi on the model's full score table.
    #[default]
    Viterbi,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::Argmax => "argmax",
            Decoder::Gcd => "gcd",
            Decoder::Vcd => "vcd",
            Decoder::Viterbi => "viterbi",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub decoder: Decoder,
    pub per_window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub dt_max_s: f64,
    pub dt_grid_s: Vec<f64>,
    pub dx_grid_m: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            dt_max_s: possession_core::evaluation::EVENT_DT_MAX_S,
            dt_grid_s: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0],
            dx_grid_m: vec![0.0, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub attribution: Attribution,
    pub bin_minutes: f64,
    pub kde_bandwidth_m: f64,
    pub kde_scott: bool,
    pub kde_cell_m: f64,
    pub image_scale: u32,
    pub substitutions: BTreeMap<String, String>,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        AnalyticsConfig {
            attribution: Attribution::Sender,
            bin_minutes: 5.0,
            kde_bandwidth_m: 4.0,
            kde_scott: false,
            kde_cell_m: 1.0,
            image_scale: 4,
            substitutions: BTreeMap::new(),
        }
    }
}

impl AnalyticsConfig {
    pub fn bandwidth(&self) -> Bandwidth {
        if self.kde_scott {
            Bandwidth::Scott
        } else {
            Bandwidth::Fixed(self.kde_bandwidth_m)
        }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("invalid value for {what}")))
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative data paths are rebased onto its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.tracking, &mut cfg.data.touches] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        check(positive(d.rate_hz), "data.rate_hz")?;
        check(positive(d.pitch_length) && positive(d.pitch_width), "data.pitch_length/pitch_width")?;
        check((0.0..1.0).contains(&d.test_fraction), "data.test_fraction")?;
        let l = &self.labeling;
        check(positive(l.step_hz) && l.step_hz <= d.rate_hz, "labeling.step_hz")?;
        check(l.window_steps >= 1 && l.window_stride >= 1, "labeling.window_steps/window_stride")?;
        check(positive(l.rdp_epsilon_m), "labeling.rdp_epsilon_m")?;
        check(positive(l.insertion.match_window_s) && positive(l.insertion.attribution_radius_m), "labeling.insertion")?;
        let m = &self.model;
        check(m.lambda1.is_finite() && m.lambda1 >= 0.0, "model.lambda1")?;
        check(m.lambda2.is_finite() && m.lambda2 >= 0.0, "model.lambda2")?;
        check(m.mask_value.is_finite() && m.mask_value < 0.0, "model.mask_value")?;
        check(m.crf_loss || m.lambda1 > 0.0 || m.lambda2 > 0.0, "model (no loss term enabled)")?;
        let t = &self.train;
        check(t.batch_size >= 1 && t.window_subsample >= 1, "train.batch_size/window_subsample")?;
        check(positive(t.learning_rate), "train.learning_rate")?;
        check((0.0..1.0).contains(&t.beta1) && (0.0..1.0).contains(&t.beta2) && positive(t.epsilon), "train.beta1/beta2/epsilon")?;
        let e = &self.evaluation;
        check(e.dt_max_s.is_finite() && e.dt_max_s >= 0.0, "evaluation.dt_max_s")?;
        let grid_ok = |g: &[f64]| !g.is_empty() && g.iter().all(|x| x.is_finite() && *x >= 0.0) && g.windows(2).all(|w| w[0] < w[1]);
        check(grid_ok(&e.dt_grid_s), "evaluation.dt_grid_s")?;
        check(grid_ok(&e.dx_grid_m), "evaluation.dx_grid_m")?;
        let a = &self.analytics;
        check(positive(a.bin_minutes), "analytics.bin_minutes")?;
        check(positive(a.kde_bandwidth_m) && positive(a.kde_cell_m), "analytics.kde_bandwidth_m/kde_cell_m")?;
        check((1..=64).contains(&a.image_scale), "analytics.image_scale")?;
        check(self.synth.matches >= 1, "synth.matches")?;
        self.synth_config(0).validate().map_err(|e| Error::Config(format!("synth: {e}")))?;
        Ok(())
    }

    pub fn pitch(&self) -> Pitch {
        Pitch { length: self.data.pitch_length, width: self.data.pitch_width }
    }

    /// Generator config for match `index`.
    pub fn synth_config(&self, index: usize) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            seed: self.seed.wrapping_add(index as u64),
            n_per_team: s.n_per_team,
            episodes: s.episodes,
            episode_s: s.episode_s,
            tempo_s: s.tempo_s,
            pass_speed: s.pass_speed,
            noise_sigma: s.noise_sigma,
            out_prob: s.out_prob,
            turnover_prob: s.turnover_prob,
            one_touch_prob: s.one_touch_prob,
            dribble_touch_prob: s.dribble_touch_prob,
            max_speed: s.max_speed,
            rate_hz: self.data.rate_hz,
            step_hz: self.labeling.step_hz,
            pitch: self.pitch(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            seed: self.seed,
        }
    }
}
