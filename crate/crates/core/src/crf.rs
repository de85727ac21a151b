//! Lattice engine over possession states.
//!
//! Viterbi runs in the log domain; forward-backward runs scaled in the
//! probability domain and falls back to the log domain on underflow. With
//! masking enabled the recursions only visit allowed predecessors, so the
//! cost per step is `O(|allowed|)` rather than `O(|E|^2)`; pairs outside the
//! allowed set contribute the mask value only when a caller scores an
//! explicit path.

mod scaled;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, RuleSet};
use crate::CrfError;

pub const DEFAULT_MASK_VALUE: f64 = -1.0e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionMode {
    None,
    Dynamic,
    Static,
}

/// Transition scores of a [`ScoreTable`] (and the matching gradient layout).
#[derive(Clone, Debug, PartialEq)]
pub enum Transitions {
    /// No transition scores; every pair scores zero.
    None,
    /// `(steps - 1) x |allowed|`, row `t - 1` holds transitions into step `t`,
    /// columns follow `RuleSet::allowed_list`.
    DynamicSparse(Vec<f64>),
    /// `|E| x |E|` row-major `[prev * |E| + next]`, shared by all steps.
    StaticDense(Vec<f64>),
}

impl Transitions {
    pub fn mode(&self) -> TransitionMode {
        match self {
            Transitions::None => TransitionMode::None,
            Transitions::DynamicSparse(_) => TransitionMode::Dynamic,
            Transitions::StaticDense(_) => TransitionMode::Static,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Transitions::None => &[],
            Transitions::DynamicSparse(v) | Transitions::StaticDense(v) => v,
        }
    }
}

/// Emission and transition log-scores for one window or episode.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    steps: usize,
    n_edges: usize,
    n_allowed: usize,
    emission: Vec<f64>,
    transitions: Transitions,
    masked: bool,
    mask_value: f64,
}

impl ScoreTable {
    pub fn new(
        rules: &RuleSet,
        steps: usize,
        emission: Vec<f64>,
        transitions: Transitions,
        masked: bool,
    ) -> Result<ScoreTable, CrfError> {
        if steps == 0 {
            return Err(CrfError::Empty);
        }
        let n_edges = rules.n_edges();
        let n_allowed = rules.n_allowed();
        check_shape("emission", steps * n_edges, emission.len())?;
        check_finite("emission", &emission)?;
        match &transitions {
            Transitions::None => {}
            Transitions::DynamicSparse(v) => {
                check_shape("dynamic transitions", (steps - 1) * n_allowed, v.len())?;
                check_finite("dynamic transitions", v)?;
            }
            Transitions::StaticDense(v) => {
                check_shape("static transitions", n_edges * n_edges, v.len())?;
                check_finite("static transitions", v)?;
            }
        }
        Ok(ScoreTable { steps, n_edges, n_allowed, emission, transitions, masked, mask_value: DEFAULT_MASK_VALUE })
    }

    /// All-zero table.
    pub fn zeros(rules: &RuleSet, steps: usize, mode: TransitionMode, masked: bool) -> Result<ScoreTable, CrfError> {
        let transitions = match mode {
            TransitionMode::None => Transitions::None,
            TransitionMode::Dynamic => Transitions::DynamicSparse(vec![0.0; steps.saturating_sub(1) * rules.n_allowed()]),
            TransitionMode::Static => Transitions::StaticDense(vec![0.0; rules.n_edges() * rules.n_edges()]),
        };
        ScoreTable::new(rules, steps, vec![0.0; steps * rules.n_edges()], transitions, masked)
    }

    pub fn with_mask_value(mut self, mask_value: f64) -> ScoreTable {
        self.mask_value = mask_value;
        self
    }

    pub fn with_masked(mut self, masked: bool) -> ScoreTable {
        self.masked = masked;
        self
    }

    /// Drops the transition scores, keeping emissions and the mask flag.
    pub fn without_transitions(mut self) -> ScoreTable {
        self.transitions = Transitions::None;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn masked(&self) -> bool {
        self.masked
    }

    pub fn mask_value(&self) -> f64 {
        self.mask_value
    }

    pub fn emission(&self) -> &[f64] {
        &self.emission
    }

    pub fn emission_row(&self, t: usize) -> &[f64] {
        &self.emission[t * self.n_edges..(t + 1) * self.n_edges]
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    /// Score of an allowed pair given its allowed-list index.
    #[inline]
    fn allowed_score(&self, t: usize, prev: usize, next: usize, idx: usize) -> f64 {
        match &self.transitions {
            Transitions::None => 0.0,
            Transitions::DynamicSparse(v) => v[(t - 1) * self.n_allowed + idx],
            Transitions::StaticDense(m) => m[prev * self.n_edges + next],
        }
    }

    /// Transition score into step `t` (`1 <= t < steps`).
    #[inline]
    fn pair_score(&self, t: usize, prev: usize, next: usize, idx: Option<usize>) -> f64 {
        match idx {
            Some(i) => self.allowed_score(t, prev, next, i),
            None if self.masked => self.mask_value,
            None => match &self.transitions {
                Transitions::StaticDense(m) => m[prev * self.n_edges + next],
                _ => 0.0,
            },
        }
    }

    /// `psi_t(prev, next)`, including the mask value for disallowed pairs when masked.
    pub fn psi(&self, rules: &RuleSet, t: usize, prev: EdgeId, next: EdgeId) -> f64 {
        let idx = rules.transition_index(prev, next);
        self.pair_score(t, prev.index(), next.index(), idx)
    }

    /// Calls `f(prev, score, allowed_index)` for every predecessor the lattice considers.
    #[inline]
    fn for_each_pred(&self, rules: &RuleSet, t: usize, e: usize, mut f: impl FnMut(usize, f64, Option<usize>)) {
        if self.masked {
            for &(p, i) in rules.predecessors(EdgeId(e as u32)) {
                let (p, i) = (p as usize, i as usize);
                f(p, self.allowed_score(t, p, e, i), Some(i));
            }
        } else {
            for p in 0..self.n_edges {
                let idx = rules.transition_index(EdgeId(p as u32), EdgeId(e as u32));
                f(p, self.pair_score(t, p, e, idx), idx);
            }
        }
    }

    fn check_rules(&self, rules: &RuleSet) -> Result<(), CrfError> {
        check_shape("rule set edges", self.n_edges, rules.n_edges())?;
        check_shape("rule set transitions", self.n_allowed, rules.n_allowed())
    }
}

fn check_shape(what: &'static str, expected: usize, actual: usize) -> Result<(), CrfError> {
    if expected != actual {
        return Err(CrfError::Shape { what, expected, actual });
    }
    Ok(())
}

fn check_finite(what: &'static str, values: &[f64]) -> Result<(), CrfError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(CrfError::NonFinite { what, index }),
        None => Ok(()),
    }
}

/// One edge per time step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PossessionPath(pub Vec<EdgeId>);

impl PossessionPath {
    pub fn new(edges: Vec<EdgeId>) -> Self {
        PossessionPath(edges)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.0
    }

    /// Steps `t` whose transition `(t - 1) -> t` is not allowed.
    pub fn violation_steps(&self, rules: &RuleSet) -> Vec<usize> {
        self.0
            .windows(2)
            .enumerate()
            .filter(|(_, w)| !rules.is_allowed(w[0], w[1]))
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn violations(&self, rules: &RuleSet) -> usize {
        self.0.windows(2).filter(|w| !rules.is_allowed(w[0], w[1])).count()
    }

    /// Fraction of consecutive pairs outside the allowed set (0 for paths shorter than 2).
    pub fn violation_rate(&self, rules: &RuleSet) -> f64 {
        if self.0.len() < 2 {
            return 0.0;
        }
        self.violations(rules) as f64 / (self.0.len() - 1) as f64
    }
}

impl From<Vec<EdgeId>> for PossessionPath {
    fn from(v: Vec<EdgeId>) -> Self {
        PossessionPath(v)
    }
}

/// Numerically stable streaming log-sum-exp.
#[derive(Clone, Copy, Debug)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    const EMPTY: LogSumExp = LogSumExp { max: f64::NEG_INFINITY, sum: 0.0 };

    #[inline]
    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.sum = self.sum * libm::exp(self.max - x) + 1.0;
            self.max = x;
        } else {
            self.sum += libm::exp(x - self.max);
        }
    }

    #[inline]
    fn value(self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + libm::log(self.sum)
        }
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSumExp::EMPTY;
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

fn check_path(scores: &ScoreTable, rules: &RuleSet, path: &PossessionPath) -> Result<(), CrfError> {
    if path.len() != scores.steps {
        return Err(CrfError::LengthMismatch { path: path.len(), table: scores.steps });
    }
    match path.0.iter().find(|e| e.index() >= rules.n_edges()) {
        Some(e) => Err(CrfError::EdgeOutOfRange(e.0)),
        None => Ok(()),
    }
}

/// `f_1(e_1) + sum_{t>=2} (f_t(e_t) + psi_t(e_{t-1}, e_t))`.
pub fn score_sequence(scores: &ScoreTable, rules: &RuleSet, path: &PossessionPath) -> Result<f64, CrfError> {
    scores.check_rules(rules)?;
    check_path(scores, rules, path)?;
    let e = path.edges();
    let mut total = scores.emission_row(0)[e[0].index()];
    for t in 1..e.len() {
        total += scores.emission_row(t)[e[t].index()] + scores.psi(rules, t, e[t - 1], e[t]);
    }
    Ok(total)
}

fn forward(scores: &ScoreTable, rules: &RuleSet) -> Vec<f64> {
    let n = scores.n_edges;
    let mut alpha = vec![0.0; scores.steps * n];
    alpha[..n].copy_from_slice(scores.emission_row(0));
    for t in 1..scores.steps {
        let (done, rest) = alpha.split_at_mut(t * n);
        let prev = &done[(t - 1) * n..];
        let emit = scores.emission_row(t);
        for (e, slot) in rest[..n].iter_mut().enumerate() {
            let mut acc = LogSumExp::EMPTY;
            scores.for_each_pred(rules, t, e, |p, psi, _| acc.push(prev[p] + psi));
            *slot = emit[e] + acc.value();
        }
    }
    alpha
}

fn backward(scores: &ScoreTable, rules: &RuleSet) -> Vec<f64> {
    let n = scores.n_edges;
    let mut beta = vec![0.0; scores.steps * n];
    for t in (1..scores.steps).rev() {
        let (head, tail) = beta.split_at_mut(t * n);
        let next = &tail[..n];
        let emit = scores.emission_row(t);
        let cur = &mut head[(t - 1) * n..];
        for (p, slot) in cur.iter_mut().enumerate() {
            let mut acc = LogSumExp::EMPTY;
            if scores.masked {
                let range = rules.successor_range(EdgeId(p as u32));
                for (i, tr) in rules.allowed_list()[range.clone()].iter().enumerate() {
                    let e = tr.next.index();
                    acc.push(scores.allowed_score(t, p, e, range.start + i) + emit[e] + next[e]);
                }
            } else {
                for e in 0..n {
                    let idx = rules.transition_index(EdgeId(p as u32), EdgeId(e as u32));
                    acc.push(scores.pair_score(t, p, e, idx) + emit[e] + next[e]);
                }
            }
            *slot = acc.value();
        }
    }
    beta
}

/// Log partition function `log Z` by the forward recursion.
pub fn log_partition(scores: &ScoreTable, rules: &RuleSet) -> Result<f64, CrfError> {
    scores.check_rules(rules)?;
    if let Some(lat) = scaled::Scaled::new(scores, rules, false) {
        return Ok(lat.log_z);
    }
    let n = scores.n_edges;
    let alpha = forward(scores, rules);
    Ok(log_sum_exp(&alpha[(scores.steps - 1) * n..]))
}

/// Output of the forward-backward pass.
#[derive(Clone, Debug)]
pub struct LatticeResult {
    pub log_z: f64,
    /// `steps x |E|` posterior edge marginals.
    pub emission_marginals: Vec<f64>,
    /// `(steps - 1) x |allowed|` posterior marginals of allowed transitions.
    /// Under masking each row sums to one; without masking the mass on
    /// disallowed pairs is not represented here.
    pub transition_marginals: Vec<f64>,
}

impl LatticeResult {
    pub fn emission_row(&self, t: usize, n_edges: usize) -> &[f64] {
        &self.emission_marginals[t * n_edges..(t + 1) * n_edges]
    }
}

struct Lattice {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    log_z: f64,
}

fn lattice(scores: &ScoreTable, rules: &RuleSet) -> Lattice {
    let n = scores.n_edges;
    let alpha = forward(scores, rules);
    let beta = backward(scores, rules);
    let log_z = log_sum_exp(&alpha[(scores.steps - 1) * n..]);
    Lattice { alpha, beta, log_z }
}

/// Forward-backward results from whichever recursion succeeded.
enum Posterior {
    Scaled(scaled::Scaled),
    Log(Lattice),
}

fn posterior(scores: &ScoreTable, rules: &RuleSet) -> Posterior {
    match scaled::Scaled::new(scores, rules, true) {
        Some(lat) => Posterior::Scaled(lat),
        None => {
            log::debug!("scaled forward-backward underflowed; using the log domain");
            Posterior::Log(lattice(scores, rules))
        }
    }
}

impl Posterior {
    fn log_z(&self) -> f64 {
        match self {
            Posterior::Scaled(l) => l.log_z,
            Posterior::Log(l) => l.log_z,
        }
    }

    fn emission_marginals(&self) -> Vec<f64> {
        match self {
            Posterior::Scaled(l) => l.emission_marginals(),
            Posterior::Log(l) => l.emission_marginals(),
        }
    }

    fn allowed_marginals(&self, scores: &ScoreTable, rules: &RuleSet) -> Vec<f64> {
        match self {
            Posterior::Scaled(l) => l.allowed_marginals(rules, scores.steps),
            Posterior::Log(l) => l.allowed_marginals(scores, rules),
        }
    }

    /// Pair marginals summed over steps, `|E| x |E|`; only meaningful for static tables.
    fn summed_pair_marginals(&self, scores: &ScoreTable, rules: &RuleSet) -> Vec<f64> {
        match self {
            Posterior::Scaled(l) => l.summed_pair_marginals(rules, scores.steps),
            Posterior::Log(l) => {
                let n = scores.n_edges;
                let mut out = vec![0.0; n * n];
                for t in 1..scores.steps {
                    for e in 0..n {
                        scores.for_each_pred(rules, t, e, |p, psi, _| {
                            out[p * n + e] += l.pair_marginal(scores, t, p, e, psi);
                        });
                    }
                }
                out
            }
        }
    }
}

impl Lattice {
    fn emission_marginals(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| libm::exp(a + b - self.log_z)).collect()
    }

    #[inline]
    fn pair_marginal(&self, scores: &ScoreTable, t: usize, p: usize, e: usize, psi: f64) -> f64 {
        let n = scores.n_edges;
        libm::exp(self.alpha[(t - 1) * n + p] + psi + scores.emission_row(t)[e] + self.beta[t * n + e] - self.log_z)
    }

    fn allowed_marginals(&self, scores: &ScoreTable, rules: &RuleSet) -> Vec<f64> {
        let a = rules.n_allowed();
        let mut out = vec![0.0; (scores.steps - 1) * a];
        for t in 1..scores.steps {
            let row = &mut out[(t - 1) * a..t * a];
            for (i, tr) in rules.allowed_list().iter().enumerate() {
                let (p, e) = (tr.prev.index(), tr.next.index());
                row[i] = self.pair_marginal(scores, t, p, e, scores.allowed_score(t, p, e, i));
            }
        }
        out
    }
}

/// Forward-backward: `log Z` plus edge and transition marginals.
pub fn marginals(scores: &ScoreTable, rules: &RuleSet) -> Result<LatticeResult, CrfError> {
    scores.check_rules(rules)?;
    let lat = posterior(scores, rules);
    Ok(LatticeResult {
        log_z: lat.log_z(),
        emission_marginals: lat.emission_marginals(),
        transition_marginals: lat.allowed_marginals(scores, rules),
    })
}

/// Gradient of a loss with respect to every stored score of a table.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreGradient {
    pub emission: Vec<f64>,
    pub transitions: Transitions,
}

#[derive(Clone, Debug)]
pub struct NllOutput {
    /// `log Z - S(gold)`
    pub nll: f64,
    pub log_z: f64,
    pub gold_score: f64,
    pub gradient: ScoreGradient,
    /// Set when masking is on and the gold path uses a disallowed transition.
    pub gold_illegal: bool,
}

/// Negative log-likelihood of `gold` and its gradient with respect to the scores.
///
/// Masked pairs are constants and receive no gradient. A gold path with a
/// disallowed transition under masking is scored with the mask value, which
/// yields a very large but finite loss and sets `gold_illegal`.
pub fn nll_and_gradients(scores: &ScoreTable, rules: &RuleSet, gold: &PossessionPath) -> Result<NllOutput, CrfError> {
    scores.check_rules(rules)?;
    check_path(scores, rules, gold)?;
    let n = scores.n_edges;
    let steps = scores.steps;
    let lat = posterior(scores, rules);
    let gold_score = score_sequence(scores, rules, gold)?;
    let g = gold.edges();

    let mut emission = lat.emission_marginals();
    for (t, e) in g.iter().enumerate() {
        emission[t * n + e.index()] -= 1.0;
    }

    let gold_illegal = scores.masked && gold.violations(rules) > 0;
    if gold_illegal {
        log::warn!("gold path contains {} disallowed transitions under masking", gold.violations(rules));
    }

    let transitions = match &scores.transitions {
        Transitions::None => Transitions::None,
        Transitions::DynamicSparse(_) => {
            let a = rules.n_allowed();
            let mut grad = lat.allowed_marginals(scores, rules);
            for t in 1..steps {
                if let Some(i) = rules.transition_index(g[t - 1], g[t]) {
                    grad[(t - 1) * a + i] -= 1.0;
                }
            }
            Transitions::DynamicSparse(grad)
        }
        Transitions::StaticDense(_) => {
            let mut grad = lat.summed_pair_marginals(scores, rules);
            for t in 1..steps {
                let (p, e) = (g[t - 1].index(), g[t].index());
                if !scores.masked || rules.is_allowed(g[t - 1], g[t]) {
                    grad[p * n + e] -= 1.0;
                }
            }
            Transitions::StaticDense(grad)
        }
    };

    Ok(NllOutput {
        nll: lat.log_z() - gold_score,
        log_z: lat.log_z(),
        gold_score,
        gradient: ScoreGradient { emission, transitions },
        gold_illegal,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub path: PossessionPath,
    pub score: f64,
}

/// Highest-scoring path (legal paths only when masked). Ties go to the smallest edge id.
pub fn viterbi_decode(scores: &ScoreTable, rules: &RuleSet) -> Result<Decoded, CrfError> {
    scores.check_rules(rules)?;
    let n = scores.n_edges;
    let steps = scores.steps;
    let mut delta = vec![0.0; steps * n];
    let mut back = vec![0u32; steps * n];
    let mut order: Vec<u32> = Vec::new();
    delta[..n].copy_from_slice(scores.emission_row(0));
    for t in 1..steps {
        let (done, rest) = delta.split_at_mut(t * n);
        let prev = &done[(t - 1) * n..];
        let emit = scores.emission_row(t);
        let ptr = &mut back[t * n..(t + 1) * n];
        if !scores.masked && !matches!(scores.transitions, Transitions::StaticDense(_)) {
            viterbi_step_off_rules(scores, rules, t, prev, emit, rest, ptr, &mut order);
            continue;
        }
        for e in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0usize;
            // predecessors are visited in ascending order, strict > keeps the smallest id on ties
            scores.for_each_pred(rules, t, e, |p, psi, _| {
                let v = prev[p] + psi;
                if v > best {
                    best = v;
                    arg = p;
                }
            });
            rest[e] = emit[e] + best;
            ptr[e] = arg as u32;
        }
    }
    let last = &delta[(steps - 1) * n..];
    let mut cur = argmax(last);
    let mut edges = vec![EdgeId(0); steps];
    for t in (0..steps).rev() {
        edges[t] = EdgeId(cur as u32);
        if t > 0 {
            cur = back[t * n + cur] as usize;
        }
    }
    let path = PossessionPath(edges);
    let score = score_sequence(scores, rules, &path)?;
    Ok(Decoded { path, score })
}

/// One Viterbi step when every pair outside the rule set scores zero.
///
/// The best such predecessor of `e` is the first entry of `prev`, ordered by
/// value then id, that is not a rule predecessor of `e`; at most
/// `|predecessors(e)| + 1` entries are inspected. Ties resolve to the smallest
/// id exactly as in the dense scan.
#[allow(clippy::too_many_arguments)]
fn viterbi_step_off_rules(
    scores: &ScoreTable,
    rules: &RuleSet,
    t: usize,
    prev: &[f64],
    emit: &[f64],
    out: &mut [f64],
    ptr: &mut [u32],
    order: &mut Vec<u32>,
) {
    let n = prev.len();
    order.clear();
    order.extend(0..n as u32);
    order.sort_unstable_by(|&a, &b| {
        prev[b as usize].partial_cmp(&prev[a as usize]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for e in 0..n {
        let next = EdgeId(e as u32);
        let mut best = f64::NEG_INFINITY;
        let mut arg = usize::MAX;
        if let Some(&p) = order.iter().find(|&&p| !rules.is_allowed(EdgeId(p), next)) {
            best = prev[p as usize];
            arg = p as usize;
        }
        for &(p, i) in rules.predecessors(next) {
            let (p, i) = (p as usize, i as usize);
            let v = prev[p] + scores.allowed_score(t, p, e, i);
            if v > best || (v == best && p < arg) {
                best = v;
                arg = p;
            }
        }
        out[e] = emit[e] + best;
        ptr[e] = arg as u32;
    }
}

/// First index of the maximum; NaN-free input assumed.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding.
///
/// Unconstrained: independent per-step emission argmax. Constrained: the first
/// step takes the emission argmax, each later step the best
/// `f_t(e) + psi_t(prev, e)` among allowed successors of the previous choice.
pub fn greedy_decode(scores: &ScoreTable, rules: &RuleSet, constrained: bool) -> Result<PossessionPath, CrfError> {
    scores.check_rules(rules)?;
    let mut edges = Vec::with_capacity(scores.steps);
    edges.push(EdgeId(argmax(scores.emission_row(0)) as u32));
    for t in 1..scores.steps {
        let emit = scores.emission_row(t);
        if !constrained {
            edges.push(EdgeId(argmax(emit) as u32));
            continue;
        }
        let prev = edges[t - 1];
        let range = rules.successor_range(prev);
        let mut best = f64::NEG_INFINITY;
        let mut arg = prev;
        for (i, tr) in rules.allowed_list()[range.clone()].iter().enumerate() {
            let e = tr.next.index();
            let v = emit[e] + scores.allowed_score(t, prev.index(), e, range.start + i);
            if v > best {
                best = v;
                arg = tr.next;
            }
        }
        edges.push(arg);
    }
    Ok(PossessionPath(edges))
}
