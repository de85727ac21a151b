use possession_core::crf::TransitionMode;
use possession_core::features::Normalization;
use possession_core::labeling::{window_starts, WINDOW_STEPS, WINDOW_STRIDE};
use possession_core::scorer::window_loss_and_grad;
use possession_core::synth::{generate_match, SynthConfig};
use possession_core::train::{train, Sequential, TrainConfig, TrainingExample};
use possession_core::{ModelMode, NodeId, Pitch, PossessionPath, Roster, ScorerModel, TrackingWindow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_window(rng: &mut ChaCha8Rng, roster: Roster, steps: usize) -> TrackingWindow {
    let n = roster.n_players();
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(5.0..100.0), rng.random_range(5.0..63.0)]).collect();
    let mut players = Vec::new();
    for _ in 0..steps {
        for p in &mut pos {
            p[0] += rng.random_range(-1.0..1.0);
            p[1] += rng.random_range(-1.0..1.0);
            players.push(*p);
        }
    }
    TrackingWindow::new("w", 0, 5.0, roster, Pitch::default(), &players).unwrap()
}

fn check_gradient(mode: ModelMode, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roster = Roster::new(2, 2, 4);
    let rules = roster.rules().unwrap();
    let window = random_window(&mut rng, roster, 5);
    let norm = Normalization::fit([&window], &rules).unwrap();
    let mut model = ScorerModel::new(mode, &rules, norm);
    model.lambda1 = 0.7;
    model.lambda2 = 0.3;
    let p: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-0.3..0.3)).collect();
    model.set_params(&p);
    let (u, v) = (NodeId(0), NodeId(1));
    let gold = PossessionPath(vec![rules.edge(u, u), rules.edge(u, u), rules.edge(u, v), rules.edge(v, v), rules.edge(v, v)]);
    let (_, grad) = window_loss_and_grad(&model, &window, &rules, &gold).unwrap();
    let h = 1e-5;
    for i in 0..p.len() {
        let mut plus = p.clone();
        plus[i] += h;
        let mut minus = p.clone();
        minus[i] -= h;
        model.set_params(&plus);
        let lp = window_loss_and_grad(&model, &window, &rules, &gold).unwrap().0.total;
        model.set_params(&minus);
        let lm = window_loss_and_grad(&model, &window, &rules, &gold).unwrap().0.total;
        let fd = (lp - lm) / (2.0 * h);
        assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + fd.abs()), "param {i}: analytic {} vs numeric {fd}", grad[i]);
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    check_gradient(ModelMode::default(), 1);
    check_gradient(ModelMode { masked: false, ..ModelMode::default() }, 2);
    check_gradient(ModelMode { transition: TransitionMode::Static, ..ModelMode::default() }, 3);
    check_gradient(ModelMode { transition: TransitionMode::None, crf_loss: false, masked: false }, 4);
}

#[test]
fn training_lowers_loss_on_synthetic_windows() {
    let cfg = SynthConfig { n_per_team: 4, episodes: 2, episode_s: 20.0, seed: 5, ..SynthConfig::default() };
    let m = generate_match(&cfg).unwrap();
    let rules = cfg.roster().rules().unwrap();
    let mut data = Vec::new();
    for ep in &m.episodes {
        let coarse = possession_core::labeling::resample(&ep.episode, 5.0, Default::default()).unwrap();
        let full = coarse.tracking_window().unwrap();
        for s in window_starts(full.steps(), WINDOW_STEPS, WINDOW_STRIDE).into_iter().step_by(4) {
            data.push(TrainingExample {
                window: full.slice(s, WINDOW_STEPS),
                gold: PossessionPath(ep.gold.edges()[s..s + WINDOW_STEPS].to_vec()),
            });
        }
    }
    assert!(!data.is_empty());
    let norm = Normalization::fit(data.iter().map(|d| &d.window), &rules).unwrap();
    let mut model = ScorerModel::new(ModelMode::default(), &rules, norm);
    let config = TrainConfig { epochs: 6, batch_size: 4, learning_rate: 0.05, ..TrainConfig::default() };
    let report = train(&mut model, &rules, &data, &config, &Sequential).unwrap();
    let first = report.epoch_losses.first().unwrap().total;
    let last = report.epoch_losses.last().unwrap().total;
    assert!(last < 0.7 * first, "loss {first} -> {last}");

    let mut again = ScorerModel::new(ModelMode::default(), &rules, model.norm.clone());
    let report2 = train(&mut again, &rules, &data, &config, &Sequential).unwrap();
    assert_eq!(report, report2);
    assert_eq!(model, again);
}

fn random_model(rng: &mut ChaCha8Rng, mode: ModelMode, rules: &possession_core::RuleSet, window: &TrackingWindow) -> ScorerModel {
    let norm = Normalization::fit([window], rules).unwrap();
    let mut model = ScorerModel::new(mode, rules, norm);
    let p: Vec<f64> = (0..model.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
    model.set_params(&p);
    model
}

#[test]
fn emission_scores_are_linear_in_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let roster = Roster::new(3, 2, 4);
    let rules = roster.rules().unwrap();
    let window = random_window(&mut rng, roster, 6);
    let mode = ModelMode { transition: TransitionMode::None, masked: false, crf_loss: false };
    let a = random_model(&mut rng, mode, &rules, &window);
    let b = random_model(&mut rng, mode, &rules, &window);
    let mut sum = a.clone();
    for (s, w) in sum.w_emit.iter_mut().zip(&b.w_emit) {
        *s += w;
    }
    let (ta, tb, ts) = (a.score_window(&window, &rules).unwrap(), b.score_window(&window, &rules).unwrap(), sum.score_window(&window, &rules).unwrap());
    for ((x, y), s) in ta.emission().iter().zip(tb.emission()).zip(ts.emission()) {
        assert!((x + y - s).abs() < 1e-9);
    }
}

#[test]
fn relabeling_players_permutes_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let roster = Roster::new(3, 3, 4);
    let rules = roster.rules().unwrap();
    let steps = 6;
    let window = random_window(&mut rng, roster, steps);
    // Swap two home players and two away players.
    let perm = |v: usize| match v {
        0 => 2,
        2 => 0,
        3 => 4,
        4 => 3,
        v => v,
    };
    let n = roster.n_players();
    let mut moved = vec![[0.0; 2]; steps * n];
    for t in 0..steps {
        for v in 0..n {
            moved[t * n + perm(v)] = window.position(t, NodeId(v as u32));
        }
    }
    let relabeled = TrackingWindow::new("w", 0, 5.0, roster, Pitch::default(), &moved).unwrap();
    let map_edge = |e: possession_core::EdgeId| {
        let (s, r) = rules.endpoints(e);
        rules.edge(NodeId(perm(s.index()) as u32), NodeId(perm(r.index()) as u32))
    };
    let (u, v, w) = (NodeId(0), NodeId(2), NodeId(4));
    let gold = PossessionPath(vec![rules.edge(u, u), rules.edge(u, v), rules.edge(v, v), rules.edge(v, w), rules.edge(w, w), rules.edge(w, w)]);
    let moved_gold = PossessionPath(gold.edges().iter().map(|&e| map_edge(e)).collect());
    for mode in [ModelMode::default(), ModelMode { transition: TransitionMode::Static, ..ModelMode::default() }] {
        let model = random_model(&mut rng, mode, &rules, &window);
        // Static transitions are free per-pair parameters, so they are relabeled with the edges.
        let mut moved_model = model.clone();
        let ne = rules.n_edges();
        for p in 0..ne {
            for e in 0..ne {
                let (mp, me) = (map_edge(possession_core::EdgeId(p as u32)).index(), map_edge(possession_core::EdgeId(e as u32)).index());
                if !model.static_trans.is_empty() {
                    moved_model.static_trans[mp * ne + me] = model.static_trans[p * ne + e];
                }
            }
        }
        let a = model.score_window(&window, &rules).unwrap();
        let b = moved_model.score_window(&relabeled, &rules).unwrap();
        for t in 0..steps {
            for e in 0..rules.n_edges() {
                let e = possession_core::EdgeId(e as u32);
                assert!((a.emission_row(t)[e.index()] - b.emission_row(t)[map_edge(e).index()]).abs() < 1e-9);
            }
        }
        let la = window_loss_and_grad(&model, &window, &rules, &gold).unwrap().0.total;
        let lb = window_loss_and_grad(&moved_model, &relabeled, &rules, &moved_gold).unwrap().0.total;
        assert!((la - lb).abs() < 1e-9 * la.abs().max(1.0), "{:?}: {la} vs {lb}", mode.transition);
    }
}
