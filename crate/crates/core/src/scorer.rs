//! Linear feature scorer producing [`ScoreTable`]s, plus its training loss.
//!
//! Emission: `f_t(e) = <w_emit, edge(e, t)>`. Dynamic transitions:
//! `psi_t(e', e) = <w_trans, trans(e', e, t)>`, evaluated blockwise so the
//! cost per allowed pair is constant. Auxiliary sender/receiver heads score
//! nodes with `<w_sender, node(v, t)>` and `<w_receiver, node(v, t)>`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::crf::{self, PossessionPath, ScoreTable, TransitionMode, Transitions, DEFAULT_MASK_VALUE};
use crate::features::{
    axpy, dot, extract_features, FeatureTables, Normalization, N_EDGE, N_KINDS, N_NODE, N_PAIR, N_TRANS, TRANS_GATED, TRANS_KIND,
    TRANS_NEXT, TRANS_PREV,
};
use crate::graph::RuleSet;
use crate::window::TrackingWindow;
use crate::ScorerError;

/// Which scores the model produces and which objective it trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMode {
    pub transition: TransitionMode,
    pub masked: bool,
    /// Include the sequence NLL in the loss; off for the cross-entropy-only baseline.
    pub crf_loss: bool,
}

impl Default for ModelMode {
    fn default() -> Self {
        ModelMode { transition: TransitionMode::Dynamic, masked: true, crf_loss: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub mode: ModelMode,
    pub lambda1: f64,
    pub lambda2: f64,
    pub mask_value: f64,
    pub n_players: usize,
    pub n_out: usize,
    pub w_emit: Vec<f64>,
    pub w_trans: Vec<f64>,
    /// `|E| x |E|`, empty unless the transition mode is static.
    pub static_trans: Vec<f64>,
    pub w_sender: Vec<f64>,
    pub w_receiver: Vec<f64>,
    pub norm: Normalization,
}

impl ScorerModel {
    /// Zero-initialized model.
    pub fn new(mode: ModelMode, rules: &RuleSet, norm: Normalization) -> ScorerModel {
        let static_len = if mode.transition == TransitionMode::Static { rules.n_edges() * rules.n_edges() } else { 0 };
        ScorerModel {
            mode,
            lambda1: 1.0,
            lambda2: 1.0,
            mask_value: DEFAULT_MASK_VALUE,
            n_players: rules.n_players(),
            n_out: rules.n_out(),
            w_emit: vec![0.0; N_EDGE],
            w_trans: vec![0.0; N_TRANS],
            static_trans: vec![0.0; static_len],
            w_sender: vec![0.0; N_NODE],
            w_receiver: vec![0.0; N_NODE],
            norm,
        }
    }

    pub fn n_params(&self) -> usize {
        self.w_emit.len() + self.w_trans.len() + self.static_trans.len() + self.w_sender.len() + self.w_receiver.len()
    }

    /// Parameters flattened as `[w_emit, w_trans, static_trans, w_sender, w_receiver]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for part in [&self.w_emit, &self.w_trans, &self.static_trans, &self.w_sender, &self.w_receiver] {
            out.extend_from_slice(part);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter vector length");
        let mut rest = flat;
        for part in [&mut self.w_emit, &mut self.w_trans, &mut self.static_trans, &mut self.w_sender, &mut self.w_receiver]
        {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn scale(&mut self, c: f64) {
        let p: Vec<f64> = self.params().iter().map(|x| x * c).collect();
        self.set_params(&p);
    }

    pub fn validate(&self, rules: &RuleSet) -> Result<(), ScorerError> {
        let static_len = if self.mode.transition == TransitionMode::Static { rules.n_edges() * rules.n_edges() } else { 0 };
        let checks = [
            ("w_emit", N_EDGE, self.w_emit.len()),
            ("w_trans", N_TRANS, self.w_trans.len()),
            ("static_trans", static_len, self.static_trans.len()),
            ("w_sender", N_NODE, self.w_sender.len()),
            ("w_receiver", N_NODE, self.w_receiver.len()),
            ("norm.pair_mean", N_PAIR, self.norm.pair_mean.len()),
            ("norm.pair_std", N_PAIR, self.norm.pair_std.len()),
            ("norm.node_mean", N_NODE, self.norm.node_mean.len()),
            ("norm.node_std", N_NODE, self.norm.node_std.len()),
        ];
        for (what, expected, actual) in checks {
            if expected != actual {
                return Err(ScorerError::Dimension { what, expected, actual });
            }
        }
        Ok(())
    }

    /// Standardized features of a window.
    pub fn features(&self, window: &TrackingWindow, rules: &RuleSet) -> Result<FeatureTables, ScorerError> {
        let mut f = extract_features(window, rules)?;
        f.standardize(&self.norm);
        Ok(f)
    }

    pub fn score_window(&self, window: &TrackingWindow, rules: &RuleSet) -> Result<ScoreTable, ScorerError> {
        self.validate(rules)?;
        let f = self.features(window, rules)?;
        Ok(self.score_features(&f, rules)?)
    }

    pub fn score_features(&self, f: &FeatureTables, rules: &RuleSet) -> Result<ScoreTable, crate::CrfError> {
        let steps = f.steps();
        let n = f.n_edges();
        let emission = edge_dots(f, &self.w_emit);
        let transitions = match self.mode.transition {
            TransitionMode::None => Transitions::None,
            TransitionMode::Static => Transitions::StaticDense(self.static_trans.clone()),
            TransitionMode::Dynamic => {
                let blocks = DynamicBlocks::new(f, &self.w_trans);
                let a = rules.n_allowed();
                let mut psi = vec![0.0; steps.saturating_sub(1) * a];
                for t in 1..steps {
                    let row = &mut psi[(t - 1) * a..t * a];
                    for (slot, tr) in row.iter_mut().zip(rules.allowed_list()) {
                        *slot = blocks.score(t, n, tr.prev.index(), tr.next.index(), tr.kind.index());
                    }
                }
                Transitions::DynamicSparse(psi)
            }
        };
        Ok(ScoreTable::new(rules, steps, emission, transitions, self.mode.masked)?.with_mask_value(self.mask_value))
    }
}

fn edge_dots(f: &FeatureTables, w: &[f64]) -> Vec<f64> {
    f.edge_dots(w)
}

/// Per-edge partial dot products of the dynamic transition weights.
struct DynamicBlocks {
    prev: Vec<f64>,
    next: Vec<f64>,
    kind_bias: [f64; N_KINDS],
    gated: [Vec<f64>; N_KINDS],
}

impl DynamicBlocks {
    fn new(f: &FeatureTables, w: &[f64]) -> Self {
        let mut kind_bias = [0.0; N_KINDS];
        kind_bias.copy_from_slice(&w[TRANS_KIND..TRANS_KIND + N_KINDS]);
        let block = |o: usize| &w[o..o + N_EDGE];
        let [prev, next, g0, g1, g2, g3] = f.edge_dots_many([
            block(TRANS_PREV),
            block(TRANS_NEXT),
            block(TRANS_GATED),
            block(TRANS_GATED + N_EDGE),
            block(TRANS_GATED + 2 * N_EDGE),
            block(TRANS_GATED + 3 * N_EDGE),
        ]);
        DynamicBlocks { prev, next, kind_bias, gated: [g0, g1, g2, g3] }
    }

    #[inline]
    fn score(&self, t: usize, n: usize, prev: usize, next: usize, kind: usize) -> f64 {
        self.prev[(t - 1) * n + prev] + self.next[t * n + next] + self.kind_bias[kind] + self.gated[kind][t * n + next]
    }
}

/// Loss components of one window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub crf: f64,
    pub coarse: f64,
    pub emit: f64,
}

impl core::ops::AddAssign for LossParts {
    fn add_assign(&mut self, o: LossParts) {
        self.total += o.total;
        self.crf += o.crf;
        self.coarse += o.coarse;
        self.emit += o.emit;
    }
}

impl LossParts {
    pub fn scaled(self, c: f64) -> LossParts {
        LossParts { total: self.total * c, crf: self.crf * c, coarse: self.coarse * c, emit: self.emit * c }
    }
}

/// Softmax cross-entropy of `logits` against `target`; `grad` receives `weight * (softmax - onehot)`.
fn softmax_ce(logits: &[f64], target: usize, weight: f64, grad: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|x| libm::exp(x - max)).sum();
    let lse = max + libm::log(sum);
    for (g, x) in grad.iter_mut().zip(logits) {
        *g += weight * libm::exp(x - lse);
    }
    grad[target] -= weight;
    lse - logits[target]
}

/// Loss `L_crf + lambda1 * L_coarse + lambda2 * L_emit` of one window and its
/// gradient with respect to the flattened model parameters.
///
/// The auxiliary cross-entropies are summed over time steps, matching the
/// scale of the sequence NLL.
pub fn window_loss_and_grad(
    model: &ScorerModel,
    window: &TrackingWindow,
    rules: &RuleSet,
    gold: &PossessionPath,
) -> Result<(LossParts, Vec<f64>), ScorerError> {
    model.validate(rules)?;
    let f = model.features(window, rules)?;
    let steps = f.steps();
    if gold.len() != steps {
        return Err(ScorerError::GoldLength { window: 0, gold: gold.len(), steps });
    }
    let n = f.n_edges();
    let n_nodes = f.n_nodes();
    let table = model.score_features(&f, rules)?;

    let mut parts = LossParts::default();
    let mut g_emit = vec![0.0; steps * n];
    let mut g_trans = Transitions::None;
    if model.mode.crf_loss {
        let out = crf::nll_and_gradients(&table, rules, gold)?;
        parts.crf = out.nll;
        g_emit.copy_from_slice(&out.gradient.emission);
        g_trans = out.gradient.transitions;
    }

    let ge = gold.edges();
    if model.lambda2 != 0.0 {
        for t in 0..steps {
            parts.emit +=
                softmax_ce(table.emission_row(t), ge[t].index(), model.lambda2, &mut g_emit[t * n..(t + 1) * n]);
        }
    }

    let mut grad_sender = vec![0.0; N_NODE];
    let mut grad_receiver = vec![0.0; N_NODE];
    if model.lambda1 != 0.0 {
        let mut logits = vec![0.0; n_nodes];
        let mut gl = vec![0.0; n_nodes];
        for t in 0..steps {
            let (s, r) = rules.endpoints(ge[t]);
            for (w, target, acc) in
                [(&model.w_sender, s.index(), &mut grad_sender), (&model.w_receiver, r.index(), &mut grad_receiver)]
            {
                for (v, l) in logits.iter_mut().enumerate() {
                    *l = dot(w, f.node(t, v));
                }
                gl.fill(0.0);
                parts.coarse += softmax_ce(&logits, target, model.lambda1, &mut gl);
                for (v, g) in gl.iter().enumerate() {
                    axpy(acc, *g, f.node(t, v));
                }
            }
        }
    }
    parts.total = parts.crf + model.lambda1 * parts.coarse + model.lambda2 * parts.emit;

    let mut grad_emit = vec![0.0; N_EDGE];
    f.accumulate_edges(&g_emit, &mut grad_emit);

    let mut grad_trans = vec![0.0; N_TRANS];
    let mut grad_static = vec![0.0; model.static_trans.len()];
    match g_trans {
        Transitions::DynamicSparse(g) => {
            let a = rules.n_allowed();
            let mut g_prev = vec![0.0; steps * n];
            let mut g_next = vec![0.0; steps * n];
            let mut g_gated = vec![vec![0.0; steps * n]; N_KINDS];
            for t in 1..steps {
                for (gv, tr) in g[(t - 1) * a..t * a].iter().zip(rules.allowed_list()) {
                    let k = tr.kind.index();
                    g_prev[(t - 1) * n + tr.prev.index()] += gv;
                    g_next[t * n + tr.next.index()] += gv;
                    grad_trans[TRANS_KIND + k] += gv;
                    g_gated[k][t * n + tr.next.index()] += gv;
                }
            }
            f.accumulate_edges(&g_prev, &mut grad_trans[TRANS_PREV..TRANS_PREV + N_EDGE]);
            f.accumulate_edges(&g_next, &mut grad_trans[TRANS_NEXT..TRANS_NEXT + N_EDGE]);
            for (k, gk) in g_gated.iter().enumerate() {
                let o = TRANS_GATED + k * N_EDGE;
                f.accumulate_edges(gk, &mut grad_trans[o..o + N_EDGE]);
            }
        }
        Transitions::StaticDense(g) => grad_static.copy_from_slice(&g),
        Transitions::None => {}
    }

    let mut grad = Vec::with_capacity(model.n_params());
    grad.extend_from_slice(&grad_emit);
    grad.extend_from_slice(&grad_trans);
    grad.extend_from_slice(&grad_static);
    grad.extend_from_slice(&grad_sender);
    grad.extend_from_slice(&grad_receiver);
    Ok((parts, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, Roster};
    use crate::window::Pitch;

    fn tiny_window() -> (TrackingWindow, RuleSet) {
        let roster = Roster::new(1, 1, 1);
        let mut players = Vec::new();
        for t in 0..4 {
            let t = t as f64;
            players.push([30.0 + t, 20.0 + 0.5 * t]);
            players.push([45.0 - 0.3 * t, 25.0 + t * t * 0.1]);
        }
        let w = TrackingWindow::new("e", 0, 5.0, roster, Pitch::default(), &players).unwrap();
        (w, roster.rules().unwrap())
    }

    #[test]
    fn zero_model_zero_table() {
        let (w, rules) = tiny_window();
        let m = ScorerModel::new(ModelMode::default(), &rules, Normalization::identity());
        let table = m.score_window(&w, &rules).unwrap();
        assert!(table.emission().iter().all(|x| *x == 0.0));
        assert!(table.transitions().values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn dynamic_scores_match_explicit_dot_products() {
        let (w, rules) = tiny_window();
        let mut m = ScorerModel::new(ModelMode::default(), &rules, Normalization::identity());
        let p: Vec<f64> = (0..m.n_params()).map(|i| libm::sin(i as f64 * 1.3) * 0.1).collect();
        m.set_params(&p);
        let table = m.score_window(&w, &rules).unwrap();
        let f = m.features(&w, &rules).unwrap();
        for t in 1..f.steps() {
            for tr in rules.allowed_list() {
                let x = f.transition(t, tr.prev, tr.next, tr.kind);
                let expected = dot(&m.w_trans, &x);
                let got = table.psi(&rules, t, tr.prev, tr.next);
                assert!((expected - got).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (w, rules) = tiny_window();
        let mut m = ScorerModel::new(ModelMode::default(), &rules, Normalization::identity());
        m.w_emit.pop();
        assert!(matches!(m.score_window(&w, &rules), Err(ScorerError::Dimension { what: "w_emit", .. })));
    }

    #[test]
    fn zero_lambdas_leave_crf_loss() {
        let (w, rules) = tiny_window();
        let mut m = ScorerModel::new(ModelMode::default(), &rules, Normalization::identity());
        let p: Vec<f64> = (0..m.n_params()).map(|i| libm::cos(i as f64) * 0.05).collect();
        m.set_params(&p);
        m.lambda1 = 0.0;
        m.lambda2 = 0.0;
        let gold = PossessionPath(vec![rules.edge(NodeId(0), NodeId(0)); 4]);
        let (parts, _) = window_loss_and_grad(&m, &w, &rules, &gold).unwrap();
        let table = m.score_window(&w, &rules).unwrap();
        let nll = crf::nll_and_gradients(&table, &rules, &gold).unwrap().nll;
        assert_eq!(parts.total, nll);
        assert_eq!(parts.coarse, 0.0);
        assert_eq!(parts.emit, 0.0);
    }
}
