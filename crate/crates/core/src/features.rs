//! Hand-crafted node, edge and transition features.
//!
//! The edge feature vector of `(u, v)` at step `t` is the pair features of
//! `(u, v)` followed by the node features of `u` and of `v`. The transition
//! feature vector of `(e', e)` into step `t` is
//! `[edge(e', t-1); edge(e, t); kind one-hot; kind-gated copies of edge(e, t)]`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, NodeId, RuleSet, Team, TransitionKind};
use crate::window::TrackingWindow;
use crate::ScorerError;

pub const NODE_FEATURES: [&str; 7] = [
    "speed",
    "acceleration",
    "dist_nearest_opponent",
    "dist_nearest_teammate",
    "dist_own_goal_line",
    "dist_opponent_goal_line",
    "is_outside",
];

pub const PAIR_FEATURES: [&str; 8] = [
    "distance",
    "distance_rate",
    "receiver_approach_cos",
    "sender_speed",
    "same_team",
    "self_loop",
    "receiver_outside",
    "forward_component",
];

pub const N_NODE: usize = NODE_FEATURES.len();
pub const N_PAIR: usize = PAIR_FEATURES.len();
/// Edge feature dimension: pair features, sender node features, receiver node features.
pub const N_EDGE: usize = N_PAIR + 2 * N_NODE;
pub const N_KINDS: usize = 4;
/// Transition feature dimension.
pub const N_TRANS: usize = 2 * N_EDGE + N_KINDS + N_KINDS * N_EDGE;

/// Offsets of the blocks inside a transition feature vector.
pub const TRANS_PREV: usize = 0;
pub const TRANS_NEXT: usize = N_EDGE;
pub const TRANS_KIND: usize = 2 * N_EDGE;
pub const TRANS_GATED: usize = 2 * N_EDGE + N_KINDS;

/// Feature tables for every node and edge of a window.
///
/// Edge vectors are not stored: the node blocks of `edge(e, t)` are read from
/// the node table, so only the pair block is kept per edge.
#[derive(Clone, Debug)]
pub struct FeatureTables {
    steps: usize,
    n_nodes: usize,
    n_edges: usize,
    /// `steps x n_nodes x N_NODE`
    node: Vec<f64>,
    /// `steps x n_edges x N_PAIR`
    pair: Vec<f64>,
}

impl FeatureTables {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    #[inline]
    pub fn node(&self, t: usize, v: usize) -> &[f64] {
        let i = (t * self.n_nodes + v) * N_NODE;
        &self.node[i..i + N_NODE]
    }

    #[inline]
    pub fn pair(&self, t: usize, e: usize) -> &[f64] {
        let i = (t * self.n_edges + e) * N_PAIR;
        &self.pair[i..i + N_PAIR]
    }

    /// Full edge feature vector `[pair; node(u); node(v)]`.
    pub fn edge(&self, t: usize, e: usize) -> [f64; N_EDGE] {
        let (u, v) = (e / self.n_nodes, e % self.n_nodes);
        let mut out = [0.0; N_EDGE];
        out[..N_PAIR].copy_from_slice(self.pair(t, e));
        out[N_PAIR..N_PAIR + N_NODE].copy_from_slice(self.node(t, u));
        out[N_PAIR + N_NODE..].copy_from_slice(self.node(t, v));
        out
    }

    /// `<w, edge(e, t)>` for every step and edge, row-major `steps x n_edges`.
    pub fn edge_dots(&self, w: &[f64]) -> Vec<f64> {
        let [out] = self.edge_dots_many([w]);
        out
    }

    /// [`FeatureTables::edge_dots`] for several weight vectors in one pass.
    pub fn edge_dots_many<const K: usize>(&self, ws: [&[f64]; K]) -> [Vec<f64>; K] {
        let n = self.n_nodes;
        let len = self.steps * self.n_edges;
        let mut out: [Vec<f64>; K] = core::array::from_fn(|_| vec![0.0; len]);
        let mut wp = [[0.0; N_PAIR]; K];
        for (dst, w) in wp.iter_mut().zip(&ws) {
            dst.copy_from_slice(&w[..N_PAIR]);
        }
        let mut ds = vec![[0.0; K]; n];
        let mut dr = vec![[0.0; K]; n];
        for t in 0..self.steps {
            for v in 0..n {
                let x = self.node(t, v);
                for (k, w) in ws.iter().enumerate() {
                    ds[v][k] = dot(&w[N_PAIR..N_PAIR + N_NODE], x);
                    dr[v][k] = dot(&w[N_PAIR + N_NODE..], x);
                }
            }
            let base = t * self.n_edges;
            let rows = self.pair[base * N_PAIR..(base + self.n_edges) * N_PAIR].chunks_exact(N_PAIR);
            for (e, x) in rows.enumerate() {
                let (u, v) = (e / n, e % n);
                for k in 0..K {
                    out[k][base + e] = dot(&wp[k], x) + ds[u][k] + dr[v][k];
                }
            }
        }
        out
    }

    /// Adds `sum_{t, e} g[t, e] * edge(e, t)` to `out` (length `N_EDGE`).
    pub fn accumulate_edges(&self, g: &[f64], out: &mut [f64]) {
        let n = self.n_nodes;
        let mut gs = vec![0.0; n];
        let mut gr = vec![0.0; n];
        for t in 0..self.steps {
            gs.fill(0.0);
            gr.fill(0.0);
            let gt = &g[t * self.n_edges..(t + 1) * self.n_edges];
            for (e, &gv) in gt.iter().enumerate() {
                if gv == 0.0 {
                    continue;
                }
                axpy(&mut out[..N_PAIR], gv, self.pair(t, e));
                gs[e / n] += gv;
                gr[e % n] += gv;
            }
            for v in 0..n {
                let x = self.node(t, v);
                axpy(&mut out[N_PAIR..N_PAIR + N_NODE], gs[v], x);
                axpy(&mut out[N_PAIR + N_NODE..], gr[v], x);
            }
        }
    }

    /// Explicit transition feature vector into step `t` (`t >= 1`).
    pub fn transition(&self, t: usize, prev: EdgeId, next: EdgeId, kind: TransitionKind) -> Vec<f64> {
        let mut out = vec![0.0; N_TRANS];
        out[TRANS_PREV..TRANS_PREV + N_EDGE].copy_from_slice(&self.edge(t - 1, prev.index()));
        let cur = self.edge(t, next.index());
        out[TRANS_NEXT..TRANS_NEXT + N_EDGE].copy_from_slice(&cur);
        out[TRANS_KIND + kind.index()] = 1.0;
        let g = TRANS_GATED + kind.index() * N_EDGE;
        out[g..g + N_EDGE].copy_from_slice(&cur);
        out
    }

    pub fn standardize(&mut self, norm: &Normalization) {
        for row in self.node.chunks_exact_mut(N_NODE) {
            for (x, (m, s)) in row.iter_mut().zip(norm.node_mean.iter().zip(&norm.node_std)) {
                *x = (*x - m) / s;
            }
        }
        for row in self.pair.chunks_exact_mut(N_PAIR) {
            for (x, (m, s)) in row.iter_mut().zip(norm.pair_mean.iter().zip(&norm.pair_std)) {
                *x = (*x - m) / s;
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(out: &mut [f64], g: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += g * v;
    }
}

#[inline]
fn norm2(v: [f64; 2]) -> f64 {
    libm::hypot(v[0], v[1])
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm2([b[0] - a[0], b[1] - a[1]])
}

fn node_features(w: &TrackingWindow, d: &[f64], t: usize, v: usize, out: &mut [f64]) {
    let node = NodeId(v as u32);
    let team = w.team_of(node);
    if team == Team::Outside {
        out.fill(0.0);
        out[6] = 1.0;
        return;
    }
    let pos = w.position(t, node);
    let vel = w.velocity(t, node);
    let accel = if w.steps() < 2 {
        0.0
    } else {
        let (a, b) = if t == 0 { (0, 1) } else { (t - 1, t) };
        let va = w.velocity(a, node);
        let vb = w.velocity(b, node);
        dist(va, vb) * w.rate_hz
    };
    let cap = w.pitch.diagonal();
    let mut d_opp = cap;
    let mut d_team = cap;
    for other in 0..w.roster.n_players() {
        if other == v {
            continue;
        }
        let x = d[v * w.n_nodes() + other];
        if w.team_of(NodeId(other as u32)) == team {
            d_team = d_team.min(x);
        } else {
            d_opp = d_opp.min(x);
        }
    }
    let (own, opp) = match team {
        Team::Home => (pos[0], w.pitch.length - pos[0]),
        _ => (w.pitch.length - pos[0], pos[0]),
    };
    out.copy_from_slice(&[norm2(vel), accel, d_opp, d_team, own, opp, 0.0]);
}

/// Pairwise distances at every step, `steps x n x n`.
fn distances(w: &TrackingWindow) -> Vec<f64> {
    let n = w.n_nodes();
    let mut out = vec![0.0; w.steps() * n * n];
    for t in 0..w.steps() {
        let d = &mut out[t * n * n..(t + 1) * n * n];
        for u in 0..n {
            let pu = w.position(t, NodeId(u as u32));
            for v in u + 1..n {
                let x = dist(pu, w.position(t, NodeId(v as u32)));
                d[u * n + v] = x;
                d[v * n + u] = x;
            }
        }
    }
    out
}

/// Raw (unstandardized) features of every node and edge at every step.
pub fn extract_features(w: &TrackingWindow, rules: &RuleSet) -> Result<FeatureTables, ScorerError> {
    let n = w.n_nodes();
    if n != rules.n_total() || w.roster.n_players() != rules.n_players() {
        return Err(ScorerError::NodeCount { window: n, rules: rules.n_total() });
    }
    let steps = w.steps();
    let n_edges = n * n;
    let d = distances(w);
    let mut node = vec![0.0; steps * n * N_NODE];
    for t in 0..steps {
        for v in 0..n {
            let i = (t * n + v) * N_NODE;
            node_features(w, &d[t * n * n..(t + 1) * n * n], t, v, &mut node[i..i + N_NODE]);
        }
    }
    let teams: Vec<Team> = (0..n).map(|v| w.team_of(NodeId(v as u32))).collect();
    let mut speed = vec![0.0; n];
    let mut pair = vec![0.0; steps * n_edges * N_PAIR];
    for t in 0..steps {
        let (a, b) = if t == 0 { (0, 1.min(steps - 1)) } else { (t - 1, t) };
        let dt = &d[t * n_edges..(t + 1) * n_edges];
        let (da, db) = (&d[a * n_edges..(a + 1) * n_edges], &d[b * n_edges..(b + 1) * n_edges]);
        for (v, s) in speed.iter_mut().enumerate() {
            *s = norm2(w.velocity(t, NodeId(v as u32)));
        }
        for u in 0..n {
            let pu = w.position(t, NodeId(u as u32));
            let speed_u = speed[u];
            let sign = match teams[u] {
                Team::Home => 1.0,
                Team::Away => -1.0,
                Team::Outside => 0.0,
            };
            for v in 0..n {
                let nv = NodeId(v as u32);
                let e = u * n + v;
                let dist_uv = dt[e];
                let pv = w.position(t, nv);
                let dir = [pv[0] - pu[0], pv[1] - pu[1]];
                let vel = w.velocity(t, nv);
                let speed_v = speed[v];
                let approach = if dist_uv > 1e-9 && speed_v > 1e-9 {
                    (vel[0] * dir[0] + vel[1] * dir[1]) / (dist_uv * speed_v)
                } else {
                    0.0
                };
                let forward = if dist_uv > 1e-9 { sign * dir[0] / dist_uv } else { 0.0 };
                let i = (t * n_edges + e) * N_PAIR;
                pair[i..i + N_PAIR].copy_from_slice(&[
                    dist_uv,
                    (db[e] - da[e]) * w.rate_hz,
                    approach,
                    speed_u,
                    (teams[u] == teams[v]) as u8 as f64,
                    (u == v) as u8 as f64,
                    (teams[v] == Team::Outside) as u8 as f64,
                    forward,
                ]);
            }
        }
    }
    Ok(FeatureTables { steps, n_nodes: n, n_edges, node, pair })
}

/// Z-score statistics of node and pair features. The node blocks of an edge
/// vector have exactly the node statistics, so they are not stored separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub node_mean: Vec<f64>,
    pub node_std: Vec<f64>,
    pub pair_mean: Vec<f64>,
    pub pair_std: Vec<f64>,
}

impl Normalization {
    pub fn identity() -> Normalization {
        Normalization {
            node_mean: vec![0.0; N_NODE],
            node_std: vec![1.0; N_NODE],
            pair_mean: vec![0.0; N_PAIR],
            pair_std: vec![1.0; N_PAIR],
        }
    }

    /// Statistics over every (step, node) and (step, edge) of the given windows.
    pub fn fit<'a>(
        windows: impl IntoIterator<Item = &'a TrackingWindow>,
        rules: &RuleSet,
    ) -> Result<Normalization, ScorerError> {
        let mut node_acc = Moments::new(N_NODE);
        let mut pair_acc = Moments::new(N_PAIR);
        for w in windows {
            let f = extract_features(w, rules)?;
            node_acc.add_rows(&f.node, N_NODE);
            pair_acc.add_rows(&f.pair, N_PAIR);
        }
        let (node_mean, node_std) = node_acc.finish();
        let (pair_mean, pair_std) = pair_acc.finish();
        Ok(Normalization { node_mean, node_std, pair_mean, pair_std })
    }
}

struct Moments {
    count: f64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments { count: 0.0, sum: vec![0.0; dim], sum_sq: vec![0.0; dim] }
    }

    fn add_rows(&mut self, data: &[f64], dim: usize) {
        for row in data.chunks_exact(dim) {
            self.count += 1.0;
            for (i, x) in row.iter().enumerate() {
                self.sum[i] += x;
                self.sum_sq[i] += x * x;
            }
        }
    }

    fn finish(self) -> (Vec<f64>, Vec<f64>) {
        if self.count == 0.0 {
            let d = self.sum.len();
            return (vec![0.0; d], vec![1.0; d]);
        }
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count).collect();
        let std = self
            .sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / self.count - m * m).max(0.0);
                let s = libm::sqrt(var);
                if s < 1e-9 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        (mean, std)
    }
}
