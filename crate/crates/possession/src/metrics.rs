//! Evaluation of decoded paths and events against gold.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use possession_core::analytics::{build_pass_network, network_similarity, possession_stats, NetworkSimilarity, PassNetwork, PossessionStats};
use possession_core::evaluation::{edge_metrics, match_events, relaxed_recall_curve, EdgeMetrics, EventCounts};
use possession_core::events::{EventKind, EventRecord};
use possession_core::{NodeId, PossessionPath, Roster, Team};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{match_key, LoadedEpisode, N_OUT};
use crate::error::{Error, Result};
use crate::pipeline::{write_text, Prepared, PreparedEpisode};

pub const METRICS_JSON: &str = "metrics/metrics.json";
pub const METRICS_TXT: &str = "metrics/metrics.txt";
pub const RELAXED_RECALL: &str = "metrics/relaxed_recall.csv";

/// Decoder output of the test episodes, keyed by episode id.
#[derive(Clone, Debug, Default)]
pub struct Predictions {
    pub paths: BTreeMap<String, PossessionPath>,
    pub events: BTreeMap<String, Vec<EventRecord>>,
    pub gold_events: BTreeMap<String, Vec<EventRecord>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventScores {
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub no_detections: bool,
}

impl From<EventCounts> for EventScores {
    fn from(c: EventCounts) -> Self {
        EventScores {
            matched: c.matched,
            detected: c.detected,
            truth: c.truth,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            no_detections: c.no_detections(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeScores {
    pub steps: usize,
    pub edge_acc: f64,
    pub sender_acc: f64,
    pub receiver_acc: f64,
    pub violations: usize,
    pub violation_rate: f64,
}

impl From<EdgeMetrics> for EdgeScores {
    fn from(m: EdgeMetrics) -> Self {
        EdgeScores {
            steps: m.steps,
            edge_acc: m.edge_acc(),
            sender_acc: m.sender_acc(),
            receiver_acc: m.receiver_acc(),
            violations: m.violations,
            violation_rate: m.violation_rate(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShareScores {
    pub pred_home_share: f64,
    pub gold_home_share: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkScores {
    pub group: String,
    pub team: String,
    /// `None` when neither network has a node.
    pub similarity: Option<NetworkSimilarity>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub decoder: String,
    pub episodes: usize,
    pub edges: EdgeScores,
    pub events: EventScores,
    pub events_by_kind: BTreeMap<String, EventScores>,
    pub possession: ShareScores,
    pub pass_networks: Vec<NetworkScores>,
    pub dt_grid_s: Vec<f64>,
    pub dx_grid_m: Vec<f64>,
    /// `relaxed_recall[i][j]` at `dt_grid_s[i]`, `dx_grid_m[j]`.
    pub relaxed_recall: Vec<Vec<f64>>,
}

impl Metrics {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let e = &self.edges;
        let _ = writeln!(s, "decoder: {}", self.decoder);
        let _ = writeln!(s, "episodes: {}  steps: {}", self.episodes, e.steps);
        let _ = writeln!(s, "edge_acc: {:.4}", e.edge_acc);
        let _ = writeln!(s, "sender_acc: {:.4}", e.sender_acc);
        let _ = writeln!(s, "receiver_acc: {:.4}", e.receiver_acc);
        let _ = writeln!(s, "violations: {} ({:.4})", e.violations, e.violation_rate);
        let mut line = |name: &str, c: &EventScores| {
            let _ = writeln!(
                s,
                "{name}: P {:.4} R {:.4} F1 {:.4} (matched {}, detected {}, truth {}){}",
                c.precision,
                c.recall,
                c.f1,
                c.matched,
                c.detected,
                c.truth,
                if c.no_detections { " no_detections" } else { "" }
            );
        };
        line("events", &self.events);
        for (k, c) in &self.events_by_kind {
            line(&format!("events.{k}"), c);
        }
        let p = &self.possession;
        let _ = writeln!(
            s,
            "home_share: pred {:.4} gold {:.4} abs_error {:.4}",
            p.pred_home_share, p.gold_home_share, p.abs_error
        );
        for n in &self.pass_networks {
            match &n.similarity {
                Some(x) => {
                    let _ = writeln!(
                        s,
                        "pass_network {} {}: degree_mae {:.4} weight_mae {:.4} jsd {:.4} spectral {:.4}",
                        n.group, n.team, x.degree_mae, x.weight_mae, x.jsd, x.spectral
                    );
                }
                None => {
                    let _ = writeln!(s, "pass_network {} {}: empty", n.group, n.team);
                }
            }
        }
        s
    }
}

/// `(time_s, edge)` samples of a path, on the absolute clock of its episode.
pub fn path_samples(ep: &LoadedEpisode, path: &PossessionPath, step_hz: f64) -> Vec<(f64, possession_core::EdgeId)> {
    path.edges().iter().enumerate().map(|(t, &e)| (ep.episode.start_time_s + t as f64 / step_hz, e)).collect()
}

pub(crate) fn team_name(team: Team) -> &'static str {
    match team {
        Team::Home => "home",
        Team::Away => "away",
        Team::Outside => "outside",
    }
}

/// Player names of one match, after substitutions, in a shared node order.
pub struct GroupRoster {
    pub roster: Roster,
    pub names: Vec<String>,
}

impl GroupRoster {
    pub fn new(episodes: &[&LoadedEpisode], substitutions: &BTreeMap<String, String>) -> GroupRoster {
        let mut home = BTreeSet::new();
        let mut away = BTreeSet::new();
        for ep in episodes {
            for (v, id) in ep.player_ids.iter().enumerate() {
                let name = substitutions.get(id).unwrap_or(id).clone();
                if v < ep.episode.roster.n_home {
                    home.insert(name);
                } else {
                    away.insert(name);
                }
            }
        }
        let roster = Roster::new(home.len(), away.len(), N_OUT);
        GroupRoster { roster, names: home.into_iter().chain(away).collect() }
    }

    fn node(&self, ep: &LoadedEpisode, v: NodeId, substitutions: &BTreeMap<String, String>) -> NodeId {
        match ep.episode.roster.boundary_of(v) {
            Some(b) => self.roster.outside_node(b).expect("outside node"),
            None => {
                let id = &ep.player_ids[v.index()];
                let name = substitutions.get(id).unwrap_or(id);
                NodeId(self.names.iter().position(|n| n == name).expect("player in group") as u32)
            }
        }
    }

    /// Events with actors and targets renamed into the group's node order.
    pub fn remap(&self, ep: &LoadedEpisode, events: &[EventRecord], substitutions: &BTreeMap<String, String>) -> Vec<EventRecord> {
        events
            .iter()
            .map(|e| EventRecord {
                actor: self.node(ep, e.actor, substitutions),
                target: e.target.map(|t| self.node(ep, t, substitutions)),
                ..*e
            })
            .collect()
    }

    pub fn name(&self, v: NodeId) -> String {
        match self.names.get(v.index()) {
            Some(n) => n.clone(),
            None => self.roster.boundary_of(v).map_or_else(|| format!("node{}", v.0), |b| b.name().to_string()),
        }
    }
}

/// Sum of per-episode networks; node positions are event-weighted means.
fn merge_networks(parts: Vec<PassNetwork>) -> PassNetwork {
    let mut nodes: BTreeMap<NodeId, ([f64; 2], usize, u32)> = BTreeMap::new();
    let mut edges: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    for net in parts {
        for n in net.nodes {
            let e = nodes.entry(n.player).or_insert(([0.0; 2], 0, 0));
            e.0[0] += n.position[0] * n.events as f64;
            e.0[1] += n.position[1] * n.events as f64;
            e.1 += n.events;
            e.2 += n.passes_out;
        }
        for e in net.edges {
            *edges.entry((e.from, e.to)).or_insert(0) += e.passes;
        }
    }
    PassNetwork {
        nodes: nodes
            .into_iter()
            .map(|(player, (sum, events, passes_out))| possession_core::analytics::NetworkNode {
                player,
                position: [sum[0] / events as f64, sum[1] / events as f64],
                events,
                passes_out,
            })
            .collect(),
        edges: edges
            .into_iter()
            .map(|((from, to), passes)| possession_core::analytics::NetworkEdge { from, to, passes })
            .collect(),
    }
}

/// Test episodes grouped by match, in id order.
pub fn test_groups(prep: &Prepared) -> BTreeMap<String, Vec<&PreparedEpisode>> {
    let mut groups: BTreeMap<String, Vec<&PreparedEpisode>> = BTreeMap::new();
    for e in prep.test_episodes() {
        groups.entry(match_key(&e.source.episode.episode_id).to_string()).or_default().push(e);
    }
    groups
}

/// Pass network of `team` over one group's episodes.
pub fn group_network(
    group: &GroupRoster,
    episodes: &[&PreparedEpisode],
    events: &BTreeMap<String, Vec<EventRecord>>,
    team: Team,
    substitutions: &BTreeMap<String, String>,
) -> PassNetwork {
    let parts = episodes
        .iter()
        .map(|e| {
            let evs = events.get(&e.source.episode.episode_id).map_or(&[][..], Vec::as_slice);
            let mapped = group.remap(&e.source, evs, substitutions);
            build_pass_network(&mapped, &group.roster, team, &BTreeMap::new())
        })
        .collect();
    merge_networks(parts)
}

pub fn possession(prep: &Prepared, episodes: &[&PreparedEpisode], paths: &BTreeMap<String, PossessionPath>, cfg: &RunConfig) -> PossessionStats {
    let samples: Vec<_> = episodes
        .iter()
        .filter_map(|e| paths.get(&e.source.episode.episode_id).map(|p| path_samples(&e.source, p, cfg.labeling.step_hz)))
        .flatten()
        .collect();
    possession_stats(&samples, &prep.rules, &prep.roster, cfg.analytics.bin_minutes, cfg.analytics.attribution)
}

pub fn evaluate(cfg: &RunConfig, prep: &Prepared, pred: &Predictions) -> Result<Metrics> {
    let ev = &cfg.evaluation;
    let mut edges = EdgeMetrics::default();
    let mut counts = EventCounts::default();
    let mut by_kind: BTreeMap<String, EventCounts> = BTreeMap::new();
    let mut recall_num = vec![vec![0.0; ev.dx_grid_m.len()]; ev.dt_grid_s.len()];
    let mut truth_total = 0usize;
    let mut gold_paths = BTreeMap::new();
    let empty = Vec::new();
    let mut episodes = 0;
    for e in prep.test_episodes() {
        let id = &e.source.episode.episode_id;
        let path = pred.paths.get(id).ok_or_else(|| Error::Data(format!("no decoded path for test episode {id}")))?;
        edges.merge(&edge_metrics(path, &e.gold, &prep.rules).map_err(|err| Error::Data(format!("episode {id}: {err}")))?);
        gold_paths.insert(id.clone(), e.gold.clone());
        let p = pred.events.get(id).unwrap_or(&empty);
        let t = pred.gold_events.get(id).unwrap_or(&empty);
        counts.merge(&match_events(p, t, ev.dt_max_s).counts);
        for kind in [EventKind::Control, EventKind::Kick, EventKind::OutOfPlay] {
            let pk: Vec<_> = p.iter().filter(|x| x.kind == kind).copied().collect();
            let tk: Vec<_> = t.iter().filter(|x| x.kind == kind).copied().collect();
            by_kind.entry(kind.name().to_string()).or_default().merge(&match_events(&pk, &tk, ev.dt_max_s).counts);
        }
        let curve = relaxed_recall_curve(p, t, &ev.dt_grid_s, &ev.dx_grid_m);
        for (row, crow) in recall_num.iter_mut().zip(&curve) {
            for (x, r) in row.iter_mut().zip(crow) {
                *x += r * t.len() as f64;
            }
        }
        truth_total += t.len();
        episodes += 1;
    }
    let relaxed_recall = recall_num
        .into_iter()
        .map(|row| row.into_iter().map(|x| if truth_total == 0 { 0.0 } else { x / truth_total as f64 }).collect())
        .collect();
    let all: Vec<&PreparedEpisode> = prep.test_episodes().collect();
    let pred_share = possession(prep, &all, &pred.paths, cfg).home_share();
    let gold_share = possession(prep, &all, &gold_paths, cfg).home_share();
    let subs = &cfg.analytics.substitutions;
    let mut pass_networks = Vec::new();
    for (group, eps) in test_groups(prep) {
        let loaded: Vec<&LoadedEpisode> = eps.iter().map(|e| &e.source).collect();
        let gr = GroupRoster::new(&loaded, subs);
        for team in [Team::Home, Team::Away] {
            let a = group_network(&gr, &eps, &pred.events, team, subs);
            let b = group_network(&gr, &eps, &pred.gold_events, team, subs);
            let similarity = network_similarity(&a, &b).ok();
            pass_networks.push(NetworkScores { group: group.clone(), team: team_name(team).into(), similarity });
        }
    }
    Ok(Metrics {
        decoder: cfg.decode.decoder.name().to_string(),
        episodes,
        edges: edges.into(),
        events: counts.into(),
        events_by_kind: by_kind.into_iter().map(|(k, c)| (k, c.into())).collect(),
        possession: ShareScores { pred_home_share: pred_share, gold_home_share: gold_share, abs_error: (pred_share - gold_share).abs() },
        pass_networks,
        dt_grid_s: ev.dt_grid_s.clone(),
        dx_grid_m: ev.dx_grid_m.clone(),
        relaxed_recall,
    })
}

pub fn write_metrics(run: &Path, m: &Metrics) -> Result<()> {
    write_text(&run.join(METRICS_JSON), &(serde_json::to_string_pretty(m).expect("metrics serialize") + "\n"))?;
    write_text(&run.join(METRICS_TXT), &m.to_text())?;
    let mut csv = String::from("dt_s,dx_m,recall\n");
    for (dt, row) in m.dt_grid_s.iter().zip(&m.relaxed_recall) {
        for (dx, r) in m.dx_grid_m.iter().zip(row) {
            let _ = writeln!(csv, "{dt},{dx},{r}");
        }
    }
    write_text(&run.join(RELAXED_RECALL), &csv)
}
