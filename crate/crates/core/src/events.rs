//! On-ball events read off the change-points of a possession path.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crf::PossessionPath;
use crate::graph::{EdgeId, NodeId, RuleSet};
use crate::window::TrackingWindow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Control,
    Kick,
    OutOfPlay,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Control => "control",
            EventKind::Kick => "kick",
            EventKind::OutOfPlay => "out_of_play",
        }
    }

    pub fn from_name(s: &str) -> Option<EventKind> {
        match s {
            "control" => Some(EventKind::Control),
            "kick" => Some(EventKind::Kick),
            "out_of_play" => Some(EventKind::OutOfPlay),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Step within the episode.
    pub step: usize,
    pub time_s: f64,
    pub kind: EventKind,
    /// Player for controls and kicks, the outside node for out-of-play events.
    pub actor: NodeId,
    /// Intended receiver of a kick.
    pub target: Option<NodeId>,
    pub location: [f64; 2],
}

impl EventRecord {
    /// Nearest frame at another rate, e.g. the 25 Hz tracking grid.
    pub fn frame_at(&self, rate_hz: f64) -> u64 {
        libm::round(self.time_s * rate_hz) as u64
    }
}

/// Class of a single step-to-step change of possession state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionClass {
    Continuation,
    Event(EventKind),
    Violation,
}

/// Event class of entering `edge`, from its topology alone. Edges leaving an
/// outside node toward another node have no class.
pub fn edge_event_kind(edge: EdgeId, rules: &RuleSet) -> Option<EventKind> {
    let (s, r) = rules.endpoints(edge);
    match (rules.is_player(s), s == r) {
        (true, true) => Some(EventKind::Control),
        (true, false) => Some(EventKind::Kick),
        (false, true) => Some(EventKind::OutOfPlay),
        (false, false) => None,
    }
}

pub fn classify_transition(prev: EdgeId, next: EdgeId, rules: &RuleSet) -> TransitionClass {
    if prev == next {
        return TransitionClass::Continuation;
    }
    if !rules.is_allowed(prev, next) {
        return TransitionClass::Violation;
    }
    match edge_event_kind(next, rules) {
        Some(kind) => TransitionClass::Event(kind),
        None => TransitionClass::Violation,
    }
}

/// One event per change-point `t >= 1`, classified by the new edge; the first
/// step is a state, not an event. Change-points into an edge without a class
/// (only possible on disallowed paths) are skipped.
///
/// Step indices are relative to the window; times and locations come from it.
pub fn extract_events(path: &PossessionPath, window: &TrackingWindow, rules: &RuleSet) -> Vec<EventRecord> {
    let edges = path.edges();
    let steps = edges.len().min(window.steps());
    let mut out = Vec::new();
    for t in 1..steps {
        let (prev, next) = (edges[t - 1], edges[t]);
        if prev == next {
            continue;
        }
        let Some(kind) = edge_event_kind(next, rules) else { continue };
        let (sender, receiver) = rules.endpoints(next);
        out.push(EventRecord {
            step: window.start_step + t,
            time_s: window.time_s(t),
            kind,
            actor: sender,
            target: (kind == EventKind::Kick).then_some(receiver),
            location: window.position(t, sender),
        });
    }
    out
}

/// Events sorted by time, then kind, actor and target; the order used for matching.
pub fn sort_canonical(events: &mut [EventRecord]) {
    events.sort_by(|a, b| {
        a.time_s
            .total_cmp(&b.time_s)
            .then(a.kind.cmp(&b.kind))
            .then(a.actor.cmp(&b.actor))
            .then(a.target.cmp(&b.target))
    });
}
