use std::collections::BTreeMap;

use possession_core::analytics::{build_pass_network, kde_heatmap, network_similarity, Bandwidth, NetworkEdge, NetworkNode, PassNetwork};
use possession_core::crf::{greedy_decode, log_partition, marginals, viterbi_decode};
use possession_core::evaluation::{match_events, relaxed_recall_curve};
use possession_core::events::{EventKind, EventRecord};
use possession_core::labeling::{needleman_wunsch, rdp_indices, window_starts};
use possession_core::{EdgeId, NodeId, Pitch, PossessionPath, Roster, RuleSet, ScoreTable, Team, TransitionKind, Transitions};
use proptest::prelude::*;

fn rules_strategy() -> impl Strategy<Value = RuleSet> {
    (1usize..=3, 0usize..=2).prop_map(|(p, o)| RuleSet::new(p, o).unwrap())
}

/// Random dynamic or static table for `rules` with values in [-3, 3].
fn table_strategy(static_mode: bool, masked: bool) -> impl Strategy<Value = (RuleSet, ScoreTable)> {
    (rules_strategy(), 1usize..=5).prop_flat_map(move |(rules, steps)| {
        let n = rules.n_edges();
        let t_len = if static_mode { n * n } else { (steps - 1) * rules.n_allowed() };
        (
            Just(rules),
            Just(steps),
            prop::collection::vec(-3.0f64..3.0, steps * n),
            prop::collection::vec(-3.0f64..3.0, t_len),
        )
            .prop_map(move |(rules, steps, emit, trans)| {
                let tr = if static_mode { Transitions::StaticDense(trans) } else { Transitions::DynamicSparse(trans) };
                let table = ScoreTable::new(&rules, steps, emit, tr, masked).unwrap();
                (rules, table)
            })
    })
}

fn shifted(table: &ScoreTable, rules: &RuleSet, t: usize, c: f64) -> ScoreTable {
    let n = table.n_edges();
    let mut emit = table.emission().to_vec();
    for v in &mut emit[t * n..(t + 1) * n] {
        *v += c;
    }
    ScoreTable::new(rules, table.steps(), emit, table.transitions().clone(), table.masked()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_invariance((rules, table) in table_strategy(false, true), c in -5.0f64..5.0, t_frac in 0.0f64..1.0) {
        let t = ((table.steps() as f64 * t_frac) as usize).min(table.steps() - 1);
        let moved = shifted(&table, &rules, t, c);
        let z0 = log_partition(&table, &rules).unwrap();
        let z1 = log_partition(&moved, &rules).unwrap();
        prop_assert!((z1 - z0 - c).abs() < 1e-9 * (1.0 + z0.abs()));
        let m0 = marginals(&table, &rules).unwrap();
        let m1 = marginals(&moved, &rules).unwrap();
        for (a, b) in m0.emission_marginals.iter().zip(&m1.emission_marginals) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert_eq!(viterbi_decode(&table, &rules).unwrap().path, viterbi_decode(&moved, &rules).unwrap().path);
    }

    #[test]
    fn static_equals_replicated_dynamic((rules, table) in table_strategy(true, true), unmasked in any::<bool>()) {
        let n = rules.n_edges();
        let dense = table.transitions().values().to_vec();
        let table = table.with_masked(!unmasked);
        // without masking a dynamic table scores off-rule pairs as zero
        let dense = if unmasked {
            let mut d = vec![0.0; n * n];
            for tr in rules.allowed_list() {
                let k = tr.prev.index() * n + tr.next.index();
                d[k] = dense[k];
            }
            d
        } else {
            dense
        };
        let stat = ScoreTable::new(&rules, table.steps(), table.emission().to_vec(), Transitions::StaticDense(dense.clone()), !unmasked).unwrap();
        let mut dynamic = Vec::new();
        for _ in 1..table.steps() {
            for tr in rules.allowed_list() {
                dynamic.push(dense[tr.prev.index() * n + tr.next.index()]);
            }
        }
        let dynm = ScoreTable::new(&rules, table.steps(), table.emission().to_vec(), Transitions::DynamicSparse(dynamic), !unmasked).unwrap();
        let za = log_partition(&stat, &rules).unwrap();
        let zb = log_partition(&dynm, &rules).unwrap();
        prop_assert!((za - zb).abs() < 1e-9 * (1.0 + za.abs()));
        let va = viterbi_decode(&stat, &rules).unwrap();
        let vb = viterbi_decode(&dynm, &rules).unwrap();
        prop_assert_eq!(va.path, vb.path);
    }

    #[test]
    fn masked_decoders_are_legal((rules, table) in table_strategy(false, true)) {
        prop_assert_eq!(viterbi_decode(&table, &rules).unwrap().path.violations(&rules), 0);
        prop_assert_eq!(greedy_decode(&table, &rules, true).unwrap().violations(&rules), 0);
        let m = marginals(&table, &rules).unwrap();
        for t in 0..table.steps() {
            let s: f64 = m.emission_row(t, rules.n_edges()).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unconstrained_greedy_is_argmax((rules, table) in table_strategy(false, false)) {
        let path = greedy_decode(&table, &rules, false).unwrap();
        for (t, e) in path.edges().iter().enumerate() {
            let row = table.emission_row(t);
            let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(row[e.index()], best);
        }
    }

    #[test]
    fn nw_score_is_symmetric(a in prop::collection::vec(0u8..4, 0..12), b in prop::collection::vec(0u8..4, 0..12)) {
        let f = |x: &u8, y: &u8| if x == y { Some(1.0) } else if x.abs_diff(*y) == 1 { Some(-0.5) } else { None };
        let ab = needleman_wunsch(&a, &b, f, -0.5);
        let ba = needleman_wunsch(&b, &a, f, -0.5);
        prop_assert_eq!(ab.score, ba.score);
        prop_assert_eq!(ab.pairs().count() + (a.len() + b.len() - 2 * ab.pairs().count()), ab.ops.len());
    }

    #[test]
    fn rdp_keeps_endpoints_and_error_bound(pts in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 2..40), eps in 0.1f64..5.0) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let kept = rdp_indices(&pts, eps);
        prop_assert_eq!(kept[0], 0);
        prop_assert_eq!(*kept.last().unwrap(), pts.len() - 1);
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        for w in kept.windows(2) {
            let (a, b) = (pts[w[0]], pts[w[1]]);
            for p in &pts[w[0] + 1..w[1]] {
                let ab = [b[0] - a[0], b[1] - a[1]];
                let len2 = ab[0] * ab[0] + ab[1] * ab[1];
                let s = if len2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let d = ((p[0] - a[0] - s * ab[0]).powi(2) + (p[1] - a[1] - s * ab[1]).powi(2)).sqrt();
                prop_assert!(d <= eps + 1e-9);
            }
        }
    }

    #[test]
    fn kde_unit_mass(pts in prop::collection::vec((-20.0f64..130.0, -20.0f64..90.0), 1..20), scott in any::<bool>()) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let bw = if scott { Bandwidth::Scott } else { Bandwidth::Fixed(4.0) };
        let g = kde_heatmap(&pts, bw, &Pitch::default(), 1.0).unwrap();
        prop_assert!((g.mass() - 1.0).abs() < 1e-6);
        prop_assert!(g.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn relaxed_recall_monotone(
        truth in prop::collection::vec((0.0f64..60.0, 0.0f64..105.0, 0.0f64..68.0), 0..15),
        noise in prop::collection::vec((-2.0f64..2.0, -8.0f64..8.0, -8.0f64..8.0, any::<bool>()), 15),
    ) {
        let mk = |t: f64, x: f64, y: f64| EventRecord { step: 0, time_s: t, kind: EventKind::Control, actor: NodeId(0), target: None, location: [x, y] };
        let truth: Vec<EventRecord> = truth.iter().map(|&(t, x, y)| mk(t, x, y)).collect();
        let pred: Vec<EventRecord> = truth.iter().zip(&noise).filter(|(_, n)| n.3).map(|(e, n)| mk(e.time_s + n.0, e.location[0] + n.1, e.location[1] + n.2)).collect();
        let dts = [0.0, 0.5, 1.0, 2.0, 5.0];
        let dxs = [0.0, 2.0, 4.0, 10.0, 20.0];
        let grid = relaxed_recall_curve(&pred, &truth, &dts, &dxs);
        for i in 0..dts.len() {
            for j in 0..dxs.len() {
                if i > 0 { prop_assert!(grid[i][j] >= grid[i - 1][j]); }
                if j > 0 { prop_assert!(grid[i][j] >= grid[i][j - 1]); }
            }
        }
    }

    #[test]
    fn window_count(len in 0usize..400, size in 1usize..60, stride in 1usize..10) {
        let starts = window_starts(len, size, stride);
        let expected = if len < size { 0 } else { (len - size) / stride + 1 };
        prop_assert_eq!(starts.len(), expected);
        prop_assert!(starts.iter().all(|s| s + size <= len));
    }

    #[test]
    fn violation_rate_counts_pairs(edges in prop::collection::vec(0u32..9, 1..20)) {
        let rules = RuleSet::new(2, 1).unwrap();
        let path = PossessionPath(edges.into_iter().map(EdgeId).collect());
        let manual = path.edges().windows(2).filter(|w| !rules.is_allowed(w[0], w[1])).count();
        prop_assert_eq!(path.violations(&rules), manual);
    }

    #[test]
    fn rule_set_structure(n_players in 1usize..=6, n_out in 0usize..=4) {
        let rules = RuleSet::new(n_players, n_out).unwrap();
        let n = rules.n_edges();
        let total: usize = TransitionKind::ALL.iter().map(|&k| rules.count_kind(k)).sum();
        prop_assert_eq!(total, rules.n_allowed());
        for p in 0..n {
            let prev = EdgeId(p as u32);
            let preds: Vec<u32> = rules.predecessors(prev).iter().map(|&(q, _)| q).collect();
            let want: Vec<u32> = (0..n as u32).filter(|&q| rules.is_allowed(EdgeId(q), prev)).collect();
            prop_assert_eq!(preds, want);
            let (a, b) = rules.endpoints(prev);
            if !rules.is_player(a) && a == b {
                let succ: Vec<EdgeId> = rules.successors(prev).iter().map(|t| t.next).collect();
                prop_assert_eq!(succ, vec![prev]);
            }
            for next in 0..n {
                let next = EdgeId(next as u32);
                if prev != next && rules.is_allowed(prev, next) {
                    let (c, _) = rules.endpoints(next);
                    prop_assert!(c == b || (a == b && c == a));
                }
            }
        }
    }

    #[test]
    fn similarity_bounds(
        a in prop::collection::vec((0u32..6, 0u32..6, 1u32..5), 0..12),
        b in prop::collection::vec((0u32..6, 0u32..6, 1u32..5), 1..12),
    ) {
        let net = |edges: &[(u32, u32, u32)]| {
            let mut w: BTreeMap<(u32, u32), u32> = BTreeMap::new();
            for &(f, t, c) in edges {
                if f != t {
                    *w.entry((f, t)).or_insert(0) += c;
                }
            }
            let mut nodes: Vec<u32> = w.keys().flat_map(|&(f, t)| [f, t]).collect();
            nodes.sort_unstable();
            nodes.dedup();
            PassNetwork {
                nodes: nodes.iter().map(|&v| NetworkNode { player: NodeId(v), position: [0.0, 0.0], events: 1, passes_out: 0 }).collect(),
                edges: w.into_iter().map(|((f, t), passes)| NetworkEdge { from: NodeId(f), to: NodeId(t), passes }).collect(),
            }
        };
        let (na, nb) = (net(&a), net(&b));
        prop_assume!(!nb.nodes.is_empty());
        let s = network_similarity(&na, &nb).unwrap();
        prop_assert!(s.degree_mae >= 0.0 && s.weight_mae >= 0.0 && s.spectral >= 0.0);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&s.jsd));
        let same = network_similarity(&nb, &nb).unwrap();
        prop_assert_eq!((same.degree_mae, same.weight_mae, same.jsd, same.spectral), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn tied_time_permutations_keep_counts(
        events in prop::collection::vec((0u32..8, 0u32..6, any::<bool>()), 1..16),
        swaps in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
    ) {
        let roster = Roster::new(3, 3, 0);
        let mk = |&(slot, actor, kick): &(u32, u32, bool)| EventRecord {
            step: slot as usize,
            time_s: slot as f64,
            kind: if kick { EventKind::Kick } else { EventKind::Control },
            actor: NodeId(actor),
            target: kick.then_some(NodeId((actor + 1) % 6)),
            location: [actor as f64, 1.0],
        };
        let mut truth: Vec<EventRecord> = events.iter().map(mk).collect();
        truth.sort_by(|x, y| x.time_s.total_cmp(&y.time_s));
        let pred: Vec<EventRecord> = truth.iter().step_by(2).copied().collect();
        let mut shuffled = truth.clone();
        for ix in &swaps {
            let i = ix.index(shuffled.len());
            let j = (i + 1).min(shuffled.len() - 1);
            if shuffled[i].time_s == shuffled[j].time_s {
                shuffled.swap(i, j);
            }
        }
        prop_assert_eq!(match_events(&pred, &truth, 0.5).counts, match_events(&pred, &shuffled, 0.5).counts);
        let net = |ev: &[EventRecord]| build_pass_network(ev, &roster, Team::Home, &BTreeMap::new());
        let strict: Vec<EventRecord> = truth.iter().enumerate().map(|(i, e)| EventRecord { time_s: i as f64, ..*e }).collect();
        prop_assert_eq!(net(&strict), net(&strict.clone()));
    }
}
