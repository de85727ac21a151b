//! Edge-level accuracies, illegal-transition rate and aligned event matching.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crf::PossessionPath;
use crate::events::{sort_canonical, EventRecord};
use crate::graph::RuleSet;
use crate::labeling::needleman_wunsch;
use crate::EvalError;

pub const EVENT_MATCH_SCORE: f64 = 1.0;
pub const EVENT_GAP_SCORE: f64 = -0.5;
pub const EVENT_DT_MAX_S: f64 = 1.0;

/// Per-step agreement counts; merge across windows or episodes before taking ratios.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub steps: usize,
    pub edge_correct: usize,
    pub sender_correct: usize,
    pub receiver_correct: usize,
    /// Consecutive predicted pairs considered.
    pub transitions: usize,
    pub violations: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EdgeMetrics {
    pub fn edge_acc(&self) -> f64 {
        ratio(self.edge_correct, self.steps)
    }

    pub fn sender_acc(&self) -> f64 {
        ratio(self.sender_correct, self.steps)
    }

    pub fn receiver_acc(&self) -> f64 {
        ratio(self.receiver_correct, self.steps)
    }

    pub fn violation_rate(&self) -> f64 {
        ratio(self.violations, self.transitions)
    }

    pub fn merge(&mut self, o: &EdgeMetrics) {
        self.steps += o.steps;
        self.edge_correct += o.edge_correct;
        self.sender_correct += o.sender_correct;
        self.receiver_correct += o.receiver_correct;
        self.transitions += o.transitions;
        self.violations += o.violations;
    }
}

pub fn edge_metrics(pred: &PossessionPath, gold: &PossessionPath, rules: &RuleSet) -> Result<EdgeMetrics, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gold: gold.len() });
    }
    let mut m = EdgeMetrics { steps: pred.len(), ..Default::default() };
    for (p, g) in pred.edges().iter().zip(gold.edges()) {
        let (ps, pr) = rules.endpoints(*p);
        let (gs, gr) = rules.endpoints(*g);
        m.edge_correct += usize::from(p == g);
        m.sender_correct += usize::from(ps == gs);
        m.receiver_correct += usize::from(pr == gr);
    }
    m.transitions = pred.len().saturating_sub(1);
    m.violations = pred.violations(rules);
    Ok(m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
}

impl EventCounts {
    /// Zero when nothing was detected; see [`EventCounts::no_detections`].
    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.detected)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.truth)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn no_detections(&self) -> bool {
        self.detected == 0
    }

    pub fn merge(&mut self, o: &EventCounts) {
        self.matched += o.matched;
        self.detected += o.detected;
        self.truth += o.truth;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMatch {
    pub pred: EventRecord,
    pub truth: EventRecord,
    /// `pred.time_s - truth.time_s`
    pub dt_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventMatchReport {
    pub counts: EventCounts,
    pub matches: Vec<EventMatch>,
}

fn align_events(
    pred: &[EventRecord],
    truth: &[EventRecord],
    qualifies: impl Fn(&EventRecord, &EventRecord) -> bool,
) -> Vec<(usize, usize)> {
    let aln = needleman_wunsch(
        pred,
        truth,
        |p, t| qualifies(p, t).then_some(EVENT_MATCH_SCORE),
        EVENT_GAP_SCORE,
    );
    aln.pairs().collect()
}

fn sorted(events: &[EventRecord]) -> Vec<EventRecord> {
    let mut v = events.to_vec();
    sort_canonical(&mut v);
    v
}

/// A detection is correct when aligned to a true event of the same kind and
/// actor within `dt_max_s`. Both lists are put in canonical order first, so
/// permuting events that share a time does not change the counts.
pub fn match_events(pred: &[EventRecord], truth: &[EventRecord], dt_max_s: f64) -> EventMatchReport {
    let (p, t) = (sorted(pred), sorted(truth));
    let pairs = align_events(&p, &t, |a, b| a.kind == b.kind && a.actor == b.actor && (a.time_s - b.time_s).abs() <= dt_max_s);
    let matches: Vec<EventMatch> =
        pairs.iter().map(|&(i, j)| EventMatch { pred: p[i], truth: t[j], dt_s: p[i].time_s - t[j].time_s }).collect();
    EventMatchReport { counts: EventCounts { matched: matches.len(), detected: p.len(), truth: t.len() }, matches }
}

/// Recall on a `dt_grid x dx_grid` grid, matching on time and location only.
///
/// Each cell is a maximum order-preserving matching, so recall never decreases
/// as either tolerance grows.
pub fn relaxed_recall_curve(
    pred: &[EventRecord],
    truth: &[EventRecord],
    dt_grid: &[f64],
    dx_grid: &[f64],
) -> Vec<Vec<f64>> {
    let (p, t) = (sorted(pred), sorted(truth));
    dt_grid
        .iter()
        .map(|&dt| {
            dx_grid
                .iter()
                .map(|&dx| {
                    let pairs = align_events(&p, &t, |a, b| {
                        (a.time_s - b.time_s).abs() <= dt
                            && libm::hypot(a.location[0] - b.location[0], a.location[1] - b.location[1]) <= dx
                    });
                    ratio(pairs.len(), t.len())
                })
                .collect()
        })
        .collect()
}
