//! Possession-path inference over a fully connected dynamic graph of players.
//!
//! Each time step carries exactly one possession state, an edge over the
//! players plus four outside nodes. A masked conditional random field scores
//! edge sequences, and hard transition constraints keep decoded paths
//! physically consistent. On-ball events, evaluation metrics and match
//! analytics are derived from the decoded paths.
//!
//! The crate is `no_std` (with `alloc`); file formats, the CLI and
//! parallel training live in the companion `possession` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod analytics;
pub mod crf;
pub mod evaluation;
pub mod events;
pub mod features;
pub mod graph;
pub mod labeling;
pub mod scorer;
pub mod synth;
pub mod train;
pub mod window;

pub use error::{AnalyticsError, CrfError, EvalError, GraphError, LabelError, ScorerError, SynthError};
pub use graph::{Boundary, EdgeId, NodeId, NodeRole, Roster, RuleSet, Team, TransitionKind};
pub use crf::{PossessionPath, ScoreTable, TransitionMode, Transitions};
pub use scorer::{ModelMode, ScorerModel};
pub use window::{Pitch, TrackingWindow};
