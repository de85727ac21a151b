//! Model checkpoints as self-describing JSON.

use std::path::Path;

use possession_core::features::{NODE_FEATURES, N_KINDS, PAIR_FEATURES};
use possession_core::train::TrainReport;
use possession_core::ScorerModel;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "possession-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureNames {
    pub node: Vec<String>,
    pub pair: Vec<String>,
    /// Layout of emission weights: pair block, then sender and receiver node blocks.
    pub edge: Vec<String>,
    /// Layout of transition weights.
    pub transition: Vec<String>,
}

impl FeatureNames {
    pub fn current() -> FeatureNames {
        let node: Vec<String> = NODE_FEATURES.iter().map(|s| s.to_string()).collect();
        let pair: Vec<String> = PAIR_FEATURES.iter().map(|s| s.to_string()).collect();
        let edge: Vec<String> = pair
            .iter()
            .cloned()
            .chain(node.iter().map(|n| format!("sender.{n}")))
            .chain(node.iter().map(|n| format!("receiver.{n}")))
            .collect();
        let kinds = ["identity", "kick", "reception", "out_of_play"];
        debug_assert_eq!(kinds.len(), N_KINDS);
        let transition = edge
            .iter()
            .map(|f| format!("prev.{f}"))
            .chain(edge.iter().map(|f| format!("next.{f}")))
            .chain(kinds.iter().map(|k| format!("kind.{k}")))
            .chain(kinds.iter().flat_map(|k| edge.iter().map(move |f| format!("{k}.next.{f}"))))
            .collect();
        FeatureNames { node, pair, edge, transition }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub features: FeatureNames,
    pub n_home: usize,
    pub n_away: usize,
    pub model: ScorerModel,
    pub train_report: TrainReport,
}

impl Checkpoint {
    pub fn new(model: ScorerModel, n_home: usize, n_away: usize, train_report: TrainReport) -> Checkpoint {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            features: FeatureNames::current(),
            n_home,
            n_away,
            model,
            train_report,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, text).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(Error::Data(format!("{}: not a version {VERSION} checkpoint", path.display())));
        }
        if ck.features != FeatureNames::current() {
            return Err(Error::Data(format!("{}: checkpoint was trained on a different feature set", path.display())));
        }
        Ok(ck)
    }
}
