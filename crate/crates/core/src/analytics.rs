//! Possession shares, event heatmaps and pass networks.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::events::{EventKind, EventRecord};
use crate::graph::{EdgeId, NodeId, Roster, RuleSet, Team};
use crate::window::Pitch;
use crate::AnalyticsError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Steps count for the sender's team, including while the ball is in flight.
    #[default]
    Sender,
    /// Only player self-loops count.
    ExcludeFlights,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineBin {
    pub start_min: f64,
    pub home_steps: usize,
    pub away_steps: usize,
}

impl TimelineBin {
    pub fn home_share(&self) -> Option<f64> {
        let n = self.home_steps + self.away_steps;
        (n > 0).then(|| self.home_steps as f64 / n as f64)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PossessionStats {
    pub home_steps: usize,
    pub away_steps: usize,
    pub timeline: Vec<TimelineBin>,
}

impl PossessionStats {
    /// Home share of attributed steps; zero if nothing was attributed.
    pub fn home_share(&self) -> f64 {
        let n = self.home_steps + self.away_steps;
        if n == 0 {
            0.0
        } else {
            self.home_steps as f64 / n as f64
        }
    }
}

/// Team shares over `(time_s, edge)` samples; steps owned by an outside node are skipped.
pub fn possession_stats(
    samples: &[(f64, EdgeId)],
    rules: &RuleSet,
    roster: &Roster,
    bin_minutes: f64,
    attribution: Attribution,
) -> PossessionStats {
    let bin_s = bin_minutes * 60.0;
    let mut stats = PossessionStats::default();
    let mut bins: BTreeMap<i64, TimelineBin> = BTreeMap::new();
    for &(time_s, edge) in samples {
        let (s, r) = rules.endpoints(edge);
        if attribution == Attribution::ExcludeFlights && s != r {
            continue;
        }
        let team = roster.team_of(s);
        if team == Team::Outside {
            continue;
        }
        let k = if bin_s > 0.0 { libm::floor(time_s / bin_s) as i64 } else { 0 };
        let bin = bins.entry(k).or_insert(TimelineBin { start_min: k as f64 * bin_minutes, ..Default::default() });
        if team == Team::Home {
            stats.home_steps += 1;
            bin.home_steps += 1;
        } else {
            stats.away_steps += 1;
            bin.away_steps += 1;
        }
    }
    stats.timeline = bins.into_values().collect();
    stats
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Scott's rule on the pooled coordinate spread; falls back to 4 m for degenerate inputs.
    Scott,
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Fixed(4.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatGrid {
    pub nx: usize,
    pub ny: usize,
    pub cell_m: f64,
    pub bandwidth_m: f64,
    /// Row-major densities, `values[iy * nx + ix]`, cell centers at `(ix + 0.5) * cell_m`.
    pub values: Vec<f64>,
}

impl HeatGrid {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_m * self.cell_m
    }

    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.nx, best / self.nx)
    }
}

fn scott_bandwidth(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 4.0;
    }
    let mean = [points.iter().map(|p| p[0]).sum::<f64>() / n, points.iter().map(|p| p[1]).sum::<f64>() / n];
    let var = points.iter().map(|p| (p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sum::<f64>() / (2.0 * (n - 1.0));
    let h = libm::sqrt(var) * libm::pow(n, -1.0 / 6.0);
    if h > 1e-9 {
        h
    } else {
        4.0
    }
}

/// Normalized 1-D Gaussian weights over cell centers, stable for points far off the grid.
fn axis_kernel(x: f64, cells: usize, cell_m: f64, h: f64) -> Vec<f64> {
    let z: Vec<f64> = (0..cells)
        .map(|i| {
            let d = ((i as f64 + 0.5) * cell_m - x) / h;
            -0.5 * d * d
        })
        .collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = z.iter().map(|v| libm::exp(v - max)).collect();
    let s: f64 = w.iter().sum();
    for v in &mut w {
        *v /= s;
    }
    w
}

/// Isotropic Gaussian KDE on a pitch grid.
///
/// Each kernel is truncated to the pitch and renormalized, so every event
/// contributes exactly `1/n` of the mass and the grid integrates to one.
pub fn kde_heatmap(
    points: &[[f64; 2]],
    bandwidth: Bandwidth,
    pitch: &Pitch,
    cell_m: f64,
) -> Result<HeatGrid, AnalyticsError> {
    if points.is_empty() {
        return Err(AnalyticsError::NoEvents);
    }
    let h = match bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Scott => scott_bandwidth(points),
    };
    if !(cell_m > 0.0) || !(h > 0.0) || points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(AnalyticsError::InvalidGrid);
    }
    let nx = libm::ceil(pitch.length / cell_m - 1e-9) as usize;
    let ny = libm::ceil(pitch.width / cell_m - 1e-9) as usize;
    if nx == 0 || ny == 0 {
        return Err(AnalyticsError::InvalidGrid);
    }
    let mut values = vec![0.0; nx * ny];
    let scale = 1.0 / (points.len() as f64 * cell_m * cell_m);
    for p in points {
        let gx = axis_kernel(p[0], nx, cell_m, h);
        let gy = axis_kernel(p[1], ny, cell_m, h);
        for (iy, wy) in gy.iter().enumerate() {
            if *wy == 0.0 {
                continue;
            }
            for (ix, wx) in gx.iter().enumerate() {
                values[iy * nx + ix] += wx * wy * scale;
            }
        }
    }
    Ok(HeatGrid { nx, ny, cell_m, bandwidth_m: h, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub player: NodeId,
    /// Mean location of the player's events.
    pub position: [f64; 2],
    pub events: usize,
    pub passes_out: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub passes: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PassNetwork {
    pub nodes: Vec<NetworkNode>,
    pub edges: Vec<NetworkEdge>,
}

/// Pass network of one team from a time-ordered event stream.
///
/// A kick from `u` to `v` is a completed pass when the next control or kick
/// is by `v` and `v` is on `u`'s team. `merge` maps substitutes onto the
/// player they share a node with.
pub fn build_pass_network(
    events: &[EventRecord],
    roster: &Roster,
    team: Team,
    merge: &BTreeMap<NodeId, NodeId>,
) -> PassNetwork {
    let id = |v: NodeId| *merge.get(&v).unwrap_or(&v);
    let mut positions: BTreeMap<NodeId, ([f64; 2], usize)> = BTreeMap::new();
    let mut edges: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        if e.kind == EventKind::OutOfPlay || roster.team_of(e.actor) != team {
            continue;
        }
        let entry = positions.entry(id(e.actor)).or_insert(([0.0, 0.0], 0));
        entry.0[0] += e.location[0];
        entry.0[1] += e.location[1];
        entry.1 += 1;
        if e.kind != EventKind::Kick {
            continue;
        }
        let (Some(target), Some(next)) = (e.target, events.get(i + 1)) else { continue };
        let completed = next.kind != EventKind::OutOfPlay && next.actor == target && roster.team_of(target) == team;
        if completed {
            *edges.entry((id(e.actor), id(target))).or_insert(0) += 1;
        }
    }
    let nodes = positions
        .iter()
        .map(|(&player, &(sum, n))| NetworkNode {
            player,
            position: [sum[0] / n as f64, sum[1] / n as f64],
            events: n,
            passes_out: edges.iter().filter(|((f, _), _)| *f == player).map(|(_, c)| *c).sum(),
        })
        .collect();
    let edges = edges.into_iter().map(|((from, to), passes)| NetworkEdge { from, to, passes }).collect();
    PassNetwork { nodes, edges }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSimilarity {
    pub degree_mae: f64,
    pub weight_mae: f64,
    pub jsd: f64,
    pub spectral: f64,
}

/// Weighted adjacency over the union of both networks' nodes.
fn adjacency(net: &PassNetwork, index: &BTreeMap<NodeId, usize>) -> Vec<f64> {
    let n = index.len();
    let mut w = vec![0.0; n * n];
    for e in &net.edges {
        w[index[&e.from] * n + index[&e.to]] += e.passes as f64;
    }
    w
}

fn entropy_term(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * libm::log2(p / m)
    } else {
        0.0
    }
}

/// Base-2 Jensen-Shannon divergence of two non-negative weight vectors.
/// Two all-zero vectors are at distance 0, one all-zero vector at distance 1.
pub fn jensen_shannon(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    match (sa > 0.0, sb > 0.0) {
        (false, false) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let mut d = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x / sa, y / sb);
        let m = 0.5 * (p + q);
        d += 0.5 * entropy_term(p, m) + 0.5 * entropy_term(q, m);
    }
    d.clamp(0.0, 1.0)
}

/// Symmetric normalized Laplacian of `w + w^T`; isolated nodes get a zero row.
fn normalized_laplacian(w: &[f64], n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = w[i * n + j] + w[j * n + i];
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| a[i * n..(i + 1) * n].iter().sum()).collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j && deg[i] > 0.0 { 1.0 } else { 0.0 };
            let off = if deg[i] > 0.0 && deg[j] > 0.0 { a[i * n + j] / libm::sqrt(deg[i] * deg[j]) } else { 0.0 };
            l[i * n + j] = id - off;
        }
    }
    l
}

/// Eigenvalues of a symmetric row-major `n x n` matrix, ascending.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(n, n, matrix);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Degree and edge-weight MAE, JSD of the edge-weight distributions and the
/// spectral distance between two pass networks over the union of their nodes.
pub fn network_similarity(a: &PassNetwork, b: &PassNetwork) -> Result<NetworkSimilarity, AnalyticsError> {
    let mut index = BTreeMap::new();
    for v in a.nodes.iter().map(|n| n.player).chain(b.nodes.iter().map(|n| n.player)) {
        index.entry(v).or_insert(0);
    }
    for e in a.edges.iter().chain(&b.edges) {
        index.entry(e.from).or_insert(0);
        index.entry(e.to).or_insert(0);
    }
    if index.is_empty() {
        return Err(AnalyticsError::EmptyNetwork);
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let n = index.len();
    let (wa, wb) = (adjacency(a, &index), adjacency(b, &index));

    let degree = |w: &[f64], i: usize| w[i * n..(i + 1) * n].iter().sum::<f64>();
    let degree_mae = (0..n).map(|i| (degree(&wa, i) - degree(&wb, i)).abs()).sum::<f64>() / n as f64;

    let union: Vec<usize> = (0..n * n).filter(|&k| wa[k] > 0.0 || wb[k] > 0.0).collect();
    let weight_mae = if union.is_empty() {
        0.0
    } else {
        union.iter().map(|&k| (wa[k] - wb[k]).abs()).sum::<f64>() / union.len() as f64
    };

    let jsd = jensen_shannon(&wa, &wb);

    let la = symmetric_eigenvalues(&normalized_laplacian(&wa, n), n);
    let lb = symmetric_eigenvalues(&normalized_laplacian(&wb, n), n);
    let spectral = libm::sqrt(la.iter().zip(&lb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()) / n as f64;

    Ok(NetworkSimilarity { degree_mae, weight_mae, jsd, spectral })
}
