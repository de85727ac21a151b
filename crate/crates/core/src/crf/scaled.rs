//! Forward-backward in the probability domain with per-step rescaling.
//!
//! Each transition score is exponentiated once (shifted by its step maximum)
//! and reused by both passes and the pair marginals. Without masking, a
//! dynamic table gives every pair outside the rule set the same score, so
//! those pairs fold into one shared term and the cost stays `O(|allowed|)`.

use alloc::vec;
use alloc::vec::Vec;

use super::{ScoreTable, Transitions};
use crate::graph::{EdgeId, RuleSet};

enum Weights {
    /// `exp(psi - shift_t)` per allowed pair, one row per step unless `shared`;
    /// `off[t]` is the common weight of pairs outside the rule set, when they count.
    Sparse { w: Vec<f64>, shared: bool, off: Option<Vec<f64>> },
    /// `exp(psi - shift)` for every pair, identical at every step.
    Dense(Vec<f64>),
}

pub(super) struct Scaled {
    n: usize,
    a: usize,
    weights: Weights,
    /// `exp(f_t(e) - max_e f_t(e))`
    ef: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Per-step normalizers of the forward pass.
    c: Vec<f64>,
    pub log_z: f64,
}

#[inline]
fn sparse_weight(weights: &Weights, a: usize, t: usize, i: usize) -> f64 {
    match weights {
        Weights::Sparse { w, shared: true, .. } => w[i],
        Weights::Sparse { w, .. } => w[(t - 1) * a + i],
        Weights::Dense(_) => unreachable!("dense weights are indexed by pair"),
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::NEG_INFINITY, f64::max)
}

impl Scaled {
    /// `None` when the scaled recursion underflows; callers fall back to the log domain.
    pub(super) fn new(scores: &ScoreTable, rules: &RuleSet, with_backward: bool) -> Option<Scaled> {
        let n = scores.n_edges;
        let a = scores.n_allowed;
        let steps = scores.steps;
        let list = rules.allowed_list();

        let mut shift = vec![0.0; steps];
        let weights = match (&scores.transitions, scores.masked) {
            (Transitions::None, masked) => {
                Weights::Sparse { w: vec![1.0; a], shared: true, off: (!masked).then(|| vec![1.0; steps]) }
            }
            (Transitions::DynamicSparse(v), masked) => {
                let mut w = vec![0.0; v.len()];
                let mut off = (!masked).then(|| vec![0.0; steps]);
                for t in 1..steps {
                    let row = &v[(t - 1) * a..t * a];
                    let mut m = max_of(row.iter().copied());
                    if !masked {
                        m = m.max(0.0);
                    }
                    shift[t] = m;
                    for (dst, x) in w[(t - 1) * a..t * a].iter_mut().zip(row) {
                        *dst = libm::exp(x - m);
                    }
                    if let Some(off) = off.as_mut() {
                        off[t] = libm::exp(-m);
                    }
                }
                Weights::Sparse { w, shared: false, off }
            }
            (Transitions::StaticDense(m), true) => {
                let s = max_of(list.iter().map(|tr| m[tr.prev.index() * n + tr.next.index()]));
                shift.iter_mut().skip(1).for_each(|x| *x = s);
                let w = list.iter().map(|tr| libm::exp(m[tr.prev.index() * n + tr.next.index()] - s)).collect();
                Weights::Sparse { w, shared: true, off: None }
            }
            (Transitions::StaticDense(m), false) => {
                let s = max_of(m.iter().copied());
                shift.iter_mut().skip(1).for_each(|x| *x = s);
                Weights::Dense(m.iter().map(|x| libm::exp(x - s)).collect())
            }
        };

        let mut ef = vec![0.0; steps * n];
        let mut log_z = 0.0;
        let mut emax = vec![0.0; steps];
        for t in 0..steps {
            let row = scores.emission_row(t);
            let m = max_of(row.iter().copied());
            emax[t] = m;
            for (dst, x) in ef[t * n..(t + 1) * n].iter_mut().zip(row) {
                *dst = libm::exp(x - m);
            }
        }

        let mut lat = Scaled { n, a, weights, ef, alpha: vec![0.0; steps * n], beta: Vec::new(), c: vec![0.0; steps], log_z: 0.0 };
        lat.alpha[..n].copy_from_slice(&lat.ef[..n]);
        for t in 0..steps {
            if t > 0 {
                lat.forward_step(rules, t);
            }
            let row = &mut lat.alpha[t * n..(t + 1) * n];
            let c: f64 = row.iter().sum();
            if !(c > 0.0) || !c.is_finite() {
                return None;
            }
            row.iter_mut().for_each(|x| *x /= c);
            lat.c[t] = c;
            log_z += shift[t] + emax[t] + libm::log(c);
        }
        lat.log_z = log_z;
        if with_backward {
            lat.backward(rules, steps);
        }
        Some(lat)
    }

    #[inline]
    fn w(&self, t: usize, i: usize) -> f64 {
        sparse_weight(&self.weights, self.a, t, i)
    }

    fn forward_step(&mut self, rules: &RuleSet, t: usize) {
        let n = self.n;
        let (done, rest) = self.alpha.split_at_mut(t * n);
        let prev = &done[(t - 1) * n..];
        let cur = &mut rest[..n];
        let ef = &self.ef[t * n..(t + 1) * n];
        match &self.weights {
            Weights::Sparse { off, .. } => {
                let off_t = off.as_ref().map_or(0.0, |o| o[t]);
                let base = off_t * prev.iter().sum::<f64>();
                for e in 0..n {
                    let mut s = base;
                    for &(p, i) in rules.predecessors(EdgeId(e as u32)) {
                        s += prev[p as usize] * (sparse_weight(&self.weights, self.a, t, i as usize) - off_t);
                    }
                    cur[e] = s.max(0.0) * ef[e];
                }
            }
            Weights::Dense(m) => {
                cur.fill(0.0);
                for (p, &ap) in prev.iter().enumerate() {
                    if ap == 0.0 {
                        continue;
                    }
                    for (c, w) in cur.iter_mut().zip(&m[p * n..(p + 1) * n]) {
                        *c += ap * w;
                    }
                }
                for (c, f) in cur.iter_mut().zip(ef) {
                    *c *= f;
                }
            }
        }
    }

    fn backward(&mut self, rules: &RuleSet, steps: usize) {
        let n = self.n;
        let mut beta = vec![0.0; steps * n];
        beta[(steps - 1) * n..].fill(1.0);
        let mut x = vec![0.0; n];
        let list = rules.allowed_list();
        for t in (1..steps).rev() {
            for e in 0..n {
                x[e] = self.ef[t * n + e] * beta[t * n + e];
            }
            let c = self.c[t];
            let (head, _) = beta.split_at_mut(t * n);
            let cur = &mut head[(t - 1) * n..];
            match &self.weights {
                Weights::Sparse { off, .. } => {
                    let off_t = off.as_ref().map_or(0.0, |o| o[t]);
                    let base = off_t * x.iter().sum::<f64>();
                    for (p, slot) in cur.iter_mut().enumerate() {
                        let mut s = base;
                        let range = rules.successor_range(EdgeId(p as u32));
                        for i in range {
                            s += (self.w(t, i) - off_t) * x[list[i].next.index()];
                        }
                        *slot = s.max(0.0) / c;
                    }
                }
                Weights::Dense(m) => {
                    for (p, slot) in cur.iter_mut().enumerate() {
                        let row = &m[p * n..(p + 1) * n];
                        *slot = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() / c;
                    }
                }
            }
        }
        self.beta = beta;
    }

    pub(super) fn emission_marginals(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a * b).collect()
    }

    #[inline]
    fn pair(&self, t: usize, p: usize, e: usize, w: f64) -> f64 {
        let n = self.n;
        self.alpha[(t - 1) * n + p] * w * self.ef[t * n + e] * self.beta[t * n + e] / self.c[t]
    }

    fn pair_weight(&self, t: usize, i: usize, p: usize, e: usize) -> f64 {
        match &self.weights {
            Weights::Dense(m) => m[p * self.n + e],
            _ => self.w(t, i),
        }
    }

    pub(super) fn allowed_marginals(&self, rules: &RuleSet, steps: usize) -> Vec<f64> {
        let a = self.a;
        let mut out = vec![0.0; (steps - 1) * a];
        for t in 1..steps {
            for (i, tr) in rules.allowed_list().iter().enumerate() {
                let (p, e) = (tr.prev.index(), tr.next.index());
                out[(t - 1) * a + i] = self.pair(t, p, e, self.pair_weight(t, i, p, e));
            }
        }
        out
    }

    /// Pair marginals summed over steps, for every pair the lattice considers.
    pub(super) fn summed_pair_marginals(&self, rules: &RuleSet, steps: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        match &self.weights {
            Weights::Dense(m) => {
                let mut x = vec![0.0; n];
                for t in 1..steps {
                    let c = self.c[t];
                    for e in 0..n {
                        x[e] = self.ef[t * n + e] * self.beta[t * n + e] / c;
                    }
                    for p in 0..n {
                        let ap = self.alpha[(t - 1) * n + p];
                        if ap == 0.0 {
                            continue;
                        }
                        let row = &mut out[p * n..(p + 1) * n];
                        for ((o, w), xv) in row.iter_mut().zip(&m[p * n..(p + 1) * n]).zip(&x) {
                            *o += ap * w * xv;
                        }
                    }
                }
            }
            Weights::Sparse { .. } => {
                for t in 1..steps {
                    for (i, tr) in rules.allowed_list().iter().enumerate() {
                        let (p, e) = (tr.prev.index(), tr.next.index());
                        out[p * n + e] += self.pair(t, p, e, self.w(t, i));
                    }
                }
            }
        }
        out
    }
}
