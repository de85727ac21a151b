//! Analytics bundle: heatmaps, possession timelines and pass networks per test match.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};
use possession_core::analytics::{kde_heatmap, HeatGrid, PassNetwork};
use possession_core::events::{EventKind, EventRecord};
use possession_core::Team;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::LoadedEpisode;
use crate::error::{Error, Result};
use crate::metrics::{group_network, possession, team_name, test_groups, GroupRoster, Predictions};
use crate::pipeline::{ensure_dir, write_text, Prepared};

pub const ANALYTICS_DIR: &str = "analytics";
pub const INDEX: &str = "analytics/index.json";

#[derive(Serialize)]
struct NodeOut {
    player_id: String,
    x_m: f64,
    y_m: f64,
    events: usize,
    passes_out: u32,
}

#[derive(Serialize)]
struct EdgeOut {
    from: String,
    to: String,
    passes: u32,
}

#[derive(Serialize)]
struct NetworkOut {
    group: String,
    team: String,
    source: String,
    nodes: Vec<NodeOut>,
    edges: Vec<EdgeOut>,
}

#[derive(Debug, Default, Serialize)]
pub struct ReportIndex {
    pub files: Vec<String>,
    /// Heatmaps not drawn because the team had no events.
    pub skipped: Vec<String>,
}

fn network_json(group: &str, team: Team, source: &str, net: &PassNetwork, names: &GroupRoster) -> String {
    let out = NetworkOut {
        group: group.into(),
        team: team_name(team).into(),
        source: source.into(),
        nodes: net
            .nodes
            .iter()
            .map(|n| NodeOut {
                player_id: names.name(n.player),
                x_m: n.position[0],
                y_m: n.position[1],
                events: n.events,
                passes_out: n.passes_out,
            })
            .collect(),
        edges: net.edges.iter().map(|e| EdgeOut { from: names.name(e.from), to: names.name(e.to), passes: e.passes }).collect(),
    };
    serde_json::to_string_pretty(&out).expect("network serializes") + "\n"
}

/// Locations of a team's controls and kicks.
fn team_points(episodes: &[&LoadedEpisode], events: &BTreeMap<String, Vec<EventRecord>>, team: Team) -> Vec<[f64; 2]> {
    episodes
        .iter()
        .flat_map(|ep| {
            events
                .get(&ep.episode.episode_id)
                .into_iter()
                .flatten()
                .filter(move |e| e.kind != EventKind::OutOfPlay && ep.episode.roster.team_of(e.actor) == team)
                .map(|e| e.location)
        })
        .collect()
}

fn grid_csv(grid: &HeatGrid) -> String {
    let mut s = String::from("x_m,y_m,density\n");
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let _ = writeln!(s, "{},{},{:e}", (ix as f64 + 0.5) * grid.cell_m, (iy as f64 + 0.5) * grid.cell_m, grid.at(ix, iy));
        }
    }
    s
}

/// Dark blue through green to yellow.
fn colormap(v: f64) -> Rgb<u8> {
    const STOPS: [[f64; 3]; 4] = [[68.0, 1.0, 84.0], [49.0, 104.0, 142.0], [53.0, 183.0, 121.0], [253.0, 231.0, 37.0]];
    let x = v.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let c = |k: usize| (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Heatmap image with the pitch's positive y axis pointing up.
pub fn heat_image(grid: &HeatGrid, scale: u32) -> RgbImage {
    let max = grid.values.iter().copied().fold(0.0, f64::max);
    let (w, h) = (grid.nx as u32 * scale, grid.ny as u32 * scale);
    RgbImage::from_fn(w, h, |px, py| {
        let ix = (px / scale) as usize;
        let iy = grid.ny - 1 - (py / scale) as usize;
        colormap(if max > 0.0 { grid.at(ix, iy) / max } else { 0.0 })
    })
}

pub fn write_report(cfg: &RunConfig, run: &Path, prep: &Prepared, pred: &Predictions) -> Result<ReportIndex> {
    let dir = run.join(ANALYTICS_DIR);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(Error::io(&dir))?;
    }
    ensure_dir(&dir)?;
    let mut index = ReportIndex::default();
    let put = |name: String, text: &str, index: &mut ReportIndex| -> Result<()> {
        write_text(&dir.join(&name), text)?;
        index.files.push(name);
        Ok(())
    };
    let subs = &cfg.analytics.substitutions;
    let gold_paths: BTreeMap<_, _> = prep.test_episodes().map(|e| (e.source.episode.episode_id.clone(), e.gold.clone())).collect();
    for (group, eps) in test_groups(prep) {
        let loaded: Vec<&LoadedEpisode> = eps.iter().map(|e| &e.source).collect();
        let names = GroupRoster::new(&loaded, subs);
        for (source, events) in [("pred", &pred.events), ("gold", &pred.gold_events)] {
            for team in [Team::Home, Team::Away] {
                let stem = format!("{group}_{}_{source}", team_name(team));
                let points = team_points(&loaded, events, team);
                if points.is_empty() {
                    index.skipped.push(format!("heatmap_{stem}"));
                } else {
                    let grid = kde_heatmap(&points, cfg.analytics.bandwidth(), &cfg.pitch(), cfg.analytics.kde_cell_m)?;
                    put(format!("heatmap_{stem}.csv"), &grid_csv(&grid), &mut index)?;
                    let png = format!("heatmap_{stem}.png");
                    let file = dir.join(&png);
                    heat_image(&grid, cfg.analytics.image_scale)
                        .save(&file)
                        .map_err(|e| Error::Data(format!("{}: {e}", file.display())))?;
                    index.files.push(png);
                }
                let net = group_network(&names, &eps, events, team, subs);
                put(format!("pass_network_{stem}.json"), &network_json(&group, team, source, &net, &names), &mut index)?;
            }
        }
        let pred_stats = possession(prep, &eps, &pred.paths, cfg);
        let gold_stats = possession(prep, &eps, &gold_paths, cfg);
        let mut bins: BTreeMap<i64, [Option<f64>; 2]> = BTreeMap::new();
        for (k, stats) in [&pred_stats, &gold_stats].into_iter().enumerate() {
            for b in &stats.timeline {
                bins.entry((b.start_min * 1e6).round() as i64).or_default()[k] = b.home_share();
            }
        }
        let fmt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        let mut csv = String::from("start_min,pred_home_share,gold_home_share\n");
        for (k, [p, g]) in bins {
            let _ = writeln!(csv, "{},{},{}", k as f64 / 1e6, fmt(p), fmt(g));
        }
        put(format!("timeline_{group}.csv"), &csv, &mut index)?;
    }
    write_text(&run.join(INDEX), &(serde_json::to_string_pretty(&index).expect("index serializes") + "\n"))?;
    Ok(index)
}
