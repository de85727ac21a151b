//! Training-data construction: resampling, touch-candidate detection,
//! alignment-based touch insertion, gold possession paths and windowing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crf::PossessionPath;
use crate::graph::{EdgeId, NodeId, Roster, RuleSet};
use crate::window::{Pitch, TrackingWindow};
use crate::{LabelError, ScorerError};

pub const WINDOW_STEPS: usize = 50;
pub const WINDOW_STRIDE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchKind {
    Touch,
    OutOfPlay,
}

/// A ball touch by a player, or the ball crossing a boundary (actor is the outside node).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchRecord {
    pub time_s: f64,
    /// Frame index relative to the start of the episode, at the episode's rate.
    pub frame: usize,
    pub actor: NodeId,
    pub kind: TouchKind,
}

/// A continuous in-play segment.
///
/// The ball channel is only used to build labels; nothing on the inference
/// path reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub episode_id: String,
    pub rate_hz: f64,
    pub start_time_s: f64,
    pub roster: Roster,
    pub pitch: Pitch,
    /// `frames x n_players`
    pub players: Vec<[f64; 2]>,
    pub ball: Option<Vec<[f64; 2]>>,
    pub touches: Vec<TouchRecord>,
}

impl Episode {
    pub fn frames(&self) -> usize {
        let n = self.roster.n_players();
        if n == 0 {
            0
        } else {
            self.players.len() / n
        }
    }

    pub fn player_position(&self, frame: usize, player: usize) -> [f64; 2] {
        self.players[frame * self.roster.n_players() + player]
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        self.start_time_s + frame as f64 / self.rate_hz
    }

    /// The whole episode as one tracking window (ball channel excluded).
    pub fn tracking_window(&self) -> Result<TrackingWindow, ScorerError> {
        TrackingWindow::new(self.episode_id.clone(), 0, self.rate_hz, self.roster, self.pitch, &self.players)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Keep every k-th frame; non-integer ratios are rejected.
    #[default]
    Decimate,
    /// Linear interpolation onto the new time grid.
    Interpolate,
}

/// Changes the frame rate of an episode. Touches keep their exact times and are
/// snapped to the nearest retained frame (the earlier one on exact ties).
pub fn resample(episode: &Episode, to_hz: f64, mode: ResampleMode) -> Result<Episode, LabelError> {
    let from_hz = episode.rate_hz;
    if !(from_hz > 0.0) || !(to_hz > 0.0) {
        return Err(LabelError::InvalidRate(if from_hz > 0.0 { to_hz } else { from_hz }));
    }
    let frames = episode.frames();
    if frames == 0 {
        return Err(LabelError::EmptyEpisode(episode.episode_id.clone()));
    }
    let n = episode.roster.n_players();
    let ratio = from_hz / to_hz;
    let int_ratio = libm::round(ratio);
    let integral = (ratio - int_ratio).abs() < 1e-9 && int_ratio >= 1.0;

    let mut out = episode.clone();
    out.rate_hz = to_hz;
    if integral {
        let r = int_ratio as usize;
        let kept = frames.div_ceil(r);
        out.players = (0..kept).flat_map(|k| episode.players[k * r * n..(k * r + 1) * n].iter().copied()).collect();
        out.ball = episode.ball.as_ref().map(|b| (0..kept).map(|k| b[k * r]).collect());
        for t in &mut out.touches {
            t.frame = ((t.frame + (r - 1) / 2) / r).min(kept - 1);
        }
    } else {
        if mode == ResampleMode::Decimate {
            return Err(LabelError::NonIntegerRatio { from_hz, to_hz });
        }
        let duration = (frames - 1) as f64 / from_hz;
        let kept = libm::floor(duration * to_hz + 1e-9) as usize + 1;
        let sample = |k: usize| {
            let x = k as f64 * ratio;
            let i = (libm::floor(x) as usize).min(frames - 1);
            let j = (i + 1).min(frames - 1);
            (i, j, x - i as f64)
        };
        let lerp = |a: [f64; 2], b: [f64; 2], w: f64| [a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w];
        let mut players = Vec::with_capacity(kept * n);
        for k in 0..kept {
            let (i, j, w) = sample(k);
            for v in 0..n {
                players.push(lerp(episode.player_position(i, v), episode.player_position(j, v), w));
            }
        }
        out.players = players;
        out.ball = episode.ball.as_ref().map(|b| {
            (0..kept)
                .map(|k| {
                    let (i, j, w) = sample(k);
                    lerp(b[i], b[j], w)
                })
                .collect()
        });
        for t in &mut out.touches {
            t.frame = (libm::round(t.frame as f64 / ratio) as usize).min(kept - 1);
        }
    }
    Ok(out)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    libm::hypot(ap[0] - s * ab[0], ap[1] - s * ab[1])
}

/// Indices of the vertices kept by Ramer-Douglas-Peucker simplification,
/// ascending, always including both endpoints.
pub fn rdp_indices(points: &[[f64; 2]], epsilon: f64) -> Vec<usize> {
    if points.len() <= 2 {
        return (0..points.len()).collect();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0usize, points.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let mut best = lo;
        let mut best_d = -1.0;
        for i in lo + 1..hi {
            let d = point_segment_distance(points[i], points[lo], points[hi]);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        if best_d > epsilon {
            keep[best] = true;
            stack.push((lo, best));
            stack.push((best, hi));
        }
    }
    keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect()
}

/// Interior vertices retained by RDP: indices into `ball_track` where the ball changes direction.
pub fn rdp_touch_candidates(ball_track: &[[f64; 2]], epsilon_m: f64) -> Vec<usize> {
    let kept = rdp_indices(ball_track, epsilon_m);
    if kept.len() <= 2 {
        return Vec::new();
    }
    kept[1..kept.len() - 1].to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignOp {
    /// `a[i]` paired with `b[j]` (the pair may still score negatively).
    Pair(usize, usize),
    /// `b[j]` against a gap in `a`.
    OnlyB(usize),
    /// `a[i]` against a gap in `b`.
    OnlyA(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub score: f64,
    pub ops: Vec<AlignOp>,
}

impl Alignment {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.ops.iter().filter_map(|op| match op {
            AlignOp::Pair(i, j) => Some((*i, *j)),
            _ => None,
        })
    }
}

/// Global alignment with linear gap score `gap` (normally negative).
///
/// `pair_score` returns `None` for pairs that may never be aligned. Ties in the
/// traceback prefer a pair, then a gap in `a`, then a gap in `b`.
pub fn needleman_wunsch<A, B>(
    a: &[A],
    b: &[B],
    pair_score: impl Fn(&A, &B) -> Option<f64>,
    gap: f64,
) -> Alignment {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut h = vec![0.0f64; (n + 1) * w];
    let mut s = vec![None; n * m];
    for i in 0..n {
        for j in 0..m {
            s[i * m + j] = pair_score(&a[i], &b[j]);
        }
    }
    for i in 1..=n {
        h[i * w] = gap * i as f64;
    }
    for j in 1..=m {
        h[j] = gap * j as f64;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = s[(i - 1) * m + j - 1].map_or(f64::NEG_INFINITY, |x| h[(i - 1) * w + j - 1] + x);
            let left = h[i * w + j - 1] + gap;
            let up = h[(i - 1) * w + j] + gap;
            h[i * w + j] = diag.max(left).max(up);
        }
    }
    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let cur = h[i * w + j];
        if i > 0 && j > 0 {
            if let Some(x) = s[(i - 1) * m + j - 1] {
                if h[(i - 1) * w + j - 1] + x == cur {
                    ops.push(AlignOp::Pair(i - 1, j - 1));
                    i -= 1;
                    j -= 1;
                    continue;
                }
            }
        }
        if j > 0 && (i == 0 || h[i * w + j - 1] + gap == cur) {
            ops.push(AlignOp::OnlyB(j - 1));
            j -= 1;
        } else {
            ops.push(AlignOp::OnlyA(i - 1));
            i -= 1;
        }
    }
    ops.reverse();
    Alignment { score: h[n * w + m], ops }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InsertionConfig {
    pub match_window_s: f64,
    pub match_score: f64,
    pub mismatch_score: f64,
    pub gap_score: f64,
    pub attribution_radius_m: f64,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        InsertionConfig {
            match_window_s: 0.4,
            match_score: 1.0,
            mismatch_score: -1.0,
            gap_score: -0.5,
            attribution_radius_m: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InsertionOutcome {
    pub touches: Vec<TouchRecord>,
    pub inserted: usize,
    /// Candidate frames with no player inside the attribution radius.
    pub dropped: Vec<usize>,
}

/// Adds RDP candidates (episode frames) that no existing touch accounts for.
///
/// Candidates and touches are aligned by time; a candidate paired with a touch
/// within the match window is considered explained. The rest become touches by
/// the player nearest the ball at that frame, or are dropped when nobody is
/// within the attribution radius.
pub fn insert_missed_touches(episode: &Episode, candidates: &[usize], config: &InsertionConfig) -> InsertionOutcome {
    let touches = &episode.touches;
    let times: Vec<f64> = candidates.iter().map(|&f| episode.time_of(f)).collect();
    let within = |t: &TouchRecord, c: &f64| (t.time_s - c).abs() <= config.match_window_s;
    let aln = needleman_wunsch(
        touches,
        &times,
        |t, c| Some(if within(t, c) { config.match_score } else { config.mismatch_score }),
        config.gap_score,
    );
    let mut explained = vec![false; candidates.len()];
    for (i, j) in aln.pairs() {
        if within(&touches[i], &times[j]) {
            explained[j] = true;
        }
    }
    let out_frame = touches.iter().find(|t| t.kind == TouchKind::OutOfPlay).map(|t| t.frame);
    let mut result = touches.clone();
    let mut inserted = 0;
    let mut dropped = Vec::new();
    for (j, &frame) in candidates.iter().enumerate() {
        if explained[j] {
            continue;
        }
        let Some(ball) = episode.ball.as_ref().and_then(|b| b.get(frame)) else {
            dropped.push(frame);
            continue;
        };
        let nearest = (0..episode.roster.n_players())
            .map(|v| {
                let p = episode.player_position(frame, v);
                (v, libm::hypot(p[0] - ball[0], p[1] - ball[1]))
            })
            .fold(None, |best: Option<(usize, f64)>, x| match best {
                Some(b) if b.1 <= x.1 => Some(b),
                _ => Some(x),
            });
        let clash = result.iter().any(|t| t.frame == frame) || out_frame.is_some_and(|f| frame >= f);
        match nearest {
            Some((v, d)) if d <= config.attribution_radius_m && !clash => {
                result.push(TouchRecord { time_s: times[j], frame, actor: NodeId(v as u32), kind: TouchKind::Touch });
                inserted += 1;
            }
            _ => {
                log::warn!("{}: dropping touch candidate at frame {}", episode.episode_id, frame);
                dropped.push(frame);
            }
        }
    }
    result.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.time_s.total_cmp(&b.time_s)));
    InsertionOutcome { touches: result, inserted, dropped }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoldPath {
    pub path: PossessionPath,
    /// Steps whose incoming transition is not allowed; empty for consistent touch lists.
    pub illegal_steps: Vec<usize>,
}

/// Possession state per step from a touch list whose frames are at the path's rate.
///
/// Between consecutive touches by `u` (at `f_k`) and `v` (at `f_{k+1}`), steps
/// `[f_k, f_{k+1})` are `(u, u)` if `v == u` and `(u, v)` otherwise. After the
/// last touch the holder keeps the ball; an out-of-play record through `o`
/// makes every remaining step `(o, o)`.
pub fn build_gold_path(touches: &[TouchRecord], steps: usize, rules: &RuleSet) -> Result<GoldPath, LabelError> {
    if touches.is_empty() {
        return Err(LabelError::NoTouches);
    }
    for (i, w) in touches.windows(2).enumerate() {
        if !(w[1].time_s > w[0].time_s) || w[1].frame < w[0].frame {
            return Err(LabelError::TouchOrder { index: i + 1 });
        }
    }
    for (i, t) in touches.iter().enumerate() {
        let ok = match t.kind {
            TouchKind::Touch => rules.is_player(t.actor),
            TouchKind::OutOfPlay => !rules.is_player(t.actor) && t.actor.index() < rules.n_total(),
        };
        if !ok {
            return Err(LabelError::BadActor { index: i, node: t.actor.0 });
        }
        if t.frame >= steps {
            return Err(LabelError::TouchBeyondEpisode { index: i, step: t.frame, len: steps });
        }
        if t.kind == TouchKind::OutOfPlay && i + 1 < touches.len() {
            return Err(LabelError::TouchAfterOut { index: i + 1 });
        }
    }
    if touches[0].frame != 0 {
        return Err(LabelError::LateFirstTouch { step: touches[0].frame });
    }

    let mut edges = vec![EdgeId(0); steps];
    for (k, touch) in touches.iter().enumerate() {
        let u = touch.actor;
        let (edge, end) = match touches.get(k + 1) {
            Some(next) => (rules.edge(u, next.actor), next.frame),
            None => (rules.self_loop(u), steps),
        };
        edges[touch.frame..end].fill(edge);
    }
    let path = PossessionPath(edges);
    let illegal_steps = path.violation_steps(rules);
    if !illegal_steps.is_empty() {
        log::warn!("gold path has {} disallowed transitions", illegal_steps.len());
    }
    Ok(GoldPath { path, illegal_steps })
}

/// Start offsets of full windows of `size` steps taken every `stride` steps.
pub fn window_starts(len: usize, size: usize, stride: usize) -> Vec<usize> {
    if len < size || size == 0 {
        return Vec::new();
    }
    (0..=(len - size)).step_by(stride.max(1)).collect()
}
