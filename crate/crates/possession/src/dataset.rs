//! CSV formats for tracking, touches, possession paths and events.
//!
//! Player order inside an episode is home players sorted by `player_id`,
//! then away players sorted by `player_id`, then the four outside nodes
//! (`left`, `right`, `top`, `bottom`). Every episode of a dataset must have
//! the same number of home and away players.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use possession_core::events::{EventKind, EventRecord};
use possession_core::graph::Boundary;
use possession_core::labeling::{Episode, TouchKind, TouchRecord};
use possession_core::{EdgeId, NodeId, Pitch, PossessionPath, Roster, RuleSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BALL_ID: &str = "ball";
pub const N_OUT: usize = 4;

/// An episode together with the `player_id` of each player node.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedEpisode {
    pub episode: Episode,
    pub player_ids: Vec<String>,
    /// Tracking frame number of the episode's first frame.
    pub first_frame: u64,
}

impl LoadedEpisode {
    pub fn node_name(&self, node: NodeId) -> String {
        match self.player_ids.get(node.index()) {
            Some(id) => id.clone(),
            None => self.episode.roster.boundary_of(node).map_or_else(|| format!("node{}", node.0), |b| b.name().to_string()),
        }
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        if let Some(i) = self.player_ids.iter().position(|p| p == name) {
            return Some(NodeId(i as u32));
        }
        Boundary::from_name(name).and_then(|b| self.episode.roster.outside_node(b))
    }
}

/// Matches are identified by the part of the episode id before the first `_`.
pub fn match_key(episode_id: &str) -> &str {
    episode_id.split('_').next().unwrap_or(episode_id)
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(Error::io(path))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file)))
}

fn open_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let file = File::create(path).map_err(Error::io(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// Column positions of `names` in the header, or an error naming the first missing one.
fn columns<const N: usize>(path: &Path, reader: &mut csv::Reader<BufReader<File>>, names: [&str; N]) -> Result<[usize; N]> {
    let header = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = header.iter().position(|h| h == name).ok_or_else(|| Error::row(path, 1, format!("missing column `{name}`")))?;
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, col: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(col).unwrap_or("");
    raw.parse().map_err(|_| Error::row(path, line, format!("bad {name} `{raw}`")))
}

#[derive(Default)]
struct EpisodeRows {
    /// player_id -> (team is home, slot)
    players: HashMap<String, (bool, u32)>,
    /// (frame, time_s, slot, x, y, line); ball rows use slot u32::MAX
    rows: Vec<(u64, f64, u32, f64, f64, u64)>,
}

/// Reads a tracking CSV into episodes without touches, in order of first appearance.
pub fn read_tracking(path: &Path, rate_hz: f64, pitch: Pitch) -> Result<Vec<LoadedEpisode>> {
    let mut reader = open_reader(path)?;
    let [c_ep, c_frame, c_time, c_team, c_player, c_x, c_y] =
        columns(path, &mut reader, ["episode_id", "frame", "time_s", "team", "player_id", "x_m", "y_m"])?;
    let mut order: Vec<String> = Vec::new();
    let mut episodes: HashMap<String, EpisodeRows> = HashMap::new();
    let mut rec = csv::StringRecord::new();
    while reader.read_record(&mut rec).map_err(|e| Error::csv(path, e))? {
        let line = rec.position().map_or(0, |p| p.line());
        let ep_id = rec.get(c_ep).unwrap_or("");
        if ep_id.is_empty() {
            return Err(Error::row(path, line, "empty episode_id"));
        }
        let frame: u64 = field(path, &rec, c_frame, "frame")?;
        let time: f64 = field(path, &rec, c_time, "time_s")?;
        let x: f64 = field(path, &rec, c_x, "x_m")?;
        let y: f64 = field(path, &rec, c_y, "y_m")?;
        if !time.is_finite() || !x.is_finite() || !y.is_finite() {
            return Err(Error::row(path, line, "non-finite value"));
        }
        let player = rec.get(c_player).unwrap_or("");
        if !episodes.contains_key(ep_id) {
            order.push(ep_id.to_string());
        }
        let ep = episodes.entry(ep_id.to_string()).or_default();
        let slot = if player == BALL_ID {
            u32::MAX
        } else {
            let home = match rec.get(c_team).unwrap_or("") {
                "home" => true,
                "away" => false,
                other => return Err(Error::row(path, line, format!("team must be home or away, got `{other}`"))),
            };
            if player.is_empty() || Boundary::from_name(player).is_some() {
                return Err(Error::row(path, line, format!("invalid player_id `{player}`")));
            }
            let next = ep.players.len() as u32;
            let &mut (h, slot) = ep.players.entry(player.to_string()).or_insert((home, next));
            if h != home {
                return Err(Error::row(path, line, format!("player `{player}` changes team")));
            }
            slot
        };
        ep.rows.push((frame, time, slot, x, y, line));
    }
    if order.is_empty() {
        return Err(Error::Data(format!("{}: no tracking rows", path.display())));
    }
    order.into_iter().map(|id| {
        let rows = episodes.remove(&id).expect("episode collected");
        build_episode(path, id, rows, rate_hz, pitch)
    }).collect()
}

fn build_episode(path: &Path, id: String, rows: EpisodeRows, rate_hz: f64, pitch: Pitch) -> Result<LoadedEpisode> {
    let mut home: Vec<(&String, u32)> = rows.players.iter().filter(|(_, v)| v.0).map(|(k, v)| (k, v.1)).collect();
    let mut away: Vec<(&String, u32)> = rows.players.iter().filter(|(_, v)| !v.0).map(|(k, v)| (k, v.1)).collect();
    home.sort();
    away.sort();
    if home.is_empty() && away.is_empty() {
        return Err(Error::Data(format!("{}: episode {id} has no players", path.display())));
    }
    let mut node_of_slot = vec![0u32; rows.players.len()];
    for (node, (_, slot)) in home.iter().chain(&away).enumerate() {
        node_of_slot[*slot as usize] = node as u32;
    }
    let player_ids: Vec<String> = home.iter().chain(&away).map(|(k, _)| (*k).clone()).collect();
    let roster = Roster::new(home.len(), away.len(), N_OUT);
    let n = roster.n_players();

    let first = rows.rows.iter().map(|r| r.0).min().expect("episode has rows");
    let last = rows.rows.iter().map(|r| r.0).max().expect("episode has rows");
    let frames = (last - first + 1) as usize;
    let mut players = vec![[f64::NAN; 2]; frames * n];
    let mut ball = vec![[f64::NAN; 2]; frames];
    let mut has_ball = false;
    let mut start_time = None;
    for &(frame, time, slot, x, y, line) in &rows.rows {
        let f = (frame - first) as usize;
        if f == 0 {
            start_time = Some(time);
        }
        let cell = if slot == u32::MAX {
            has_ball = true;
            &mut ball[f]
        } else {
            &mut players[f * n + node_of_slot[slot as usize] as usize]
        };
        if !cell[0].is_nan() {
            return Err(Error::row(path, line, format!("duplicate row for frame {frame} in episode {id}")));
        }
        *cell = [x, y];
    }
    if let Some(k) = players.iter().position(|p| p[0].is_nan()) {
        return Err(Error::Data(format!(
            "{}: episode {id} has no row for player {} at frame {}",
            path.display(),
            player_ids[k % n],
            first + (k / n) as u64
        )));
    }
    if has_ball {
        if let Some(f) = ball.iter().position(|p| p[0].is_nan()) {
            return Err(Error::Data(format!("{}: episode {id} has no ball row at frame {}", path.display(), first + f as u64)));
        }
    }
    let episode = Episode {
        episode_id: id,
        rate_hz,
        start_time_s: start_time.expect("first frame present"),
        roster,
        pitch,
        players,
        ball: has_ball.then_some(ball),
        touches: Vec::new(),
    };
    Ok(LoadedEpisode { episode, player_ids, first_frame: first })
}

/// Maps source kind labels onto touch kinds; anything on the ball is a touch.
pub fn touch_kind(label: &str) -> Option<TouchKind> {
    match label.to_ascii_lowercase().as_str() {
        "touch" | "control" | "receive" | "reception" | "kick" | "pass" | "cross" | "shot" | "dribble" | "tackle"
        | "interception" | "clearance" | "throw_in" | "goal_kick" | "corner" | "freekick" | "free_kick" => Some(TouchKind::Touch),
        "out_of_play" | "out" => Some(TouchKind::OutOfPlay),
        _ => None,
    }
}

pub fn touch_kind_name(kind: TouchKind) -> &'static str {
    match kind {
        TouchKind::Touch => "touch",
        TouchKind::OutOfPlay => "out_of_play",
    }
}

/// Attaches the touches in `path` to their episodes. Touch frames are tracking
/// frame numbers; out-of-play rows name the boundary as their `player_id`.
pub fn read_touches(path: &Path, episodes: &mut [LoadedEpisode]) -> Result<()> {
    let mut reader = open_reader(path)?;
    let [c_ep, c_frame, c_time, c_player, c_kind] = columns(path, &mut reader, ["episode_id", "frame", "time_s", "player_id", "kind"])?;
    let index: HashMap<String, usize> = episodes.iter().enumerate().map(|(i, e)| (e.episode.episode_id.clone(), i)).collect();
    let mut rec = csv::StringRecord::new();
    while reader.read_record(&mut rec).map_err(|e| Error::csv(path, e))? {
        let line = rec.position().map_or(0, |p| p.line());
        let ep_id = rec.get(c_ep).unwrap_or("");
        let Some(&i) = index.get(ep_id) else {
            return Err(Error::row(path, line, format!("unknown episode `{ep_id}`")));
        };
        let frame: u64 = field(path, &rec, c_frame, "frame")?;
        let time_s: f64 = field(path, &rec, c_time, "time_s")?;
        let label = rec.get(c_kind).unwrap_or("");
        let kind = touch_kind(label).ok_or_else(|| Error::row(path, line, format!("unknown kind `{label}`")))?;
        let ep = &mut episodes[i];
        let player = rec.get(c_player).unwrap_or("");
        let actor = ep.node_by_name(player).ok_or_else(|| Error::row(path, line, format!("unknown player_id `{player}`")))?;
        let is_player = actor.index() < ep.player_ids.len();
        if is_player != (kind == TouchKind::Touch) {
            return Err(Error::row(path, line, "out_of_play rows name a boundary, touches name a player"));
        }
        let rel = frame.checked_sub(ep.first_frame).map(|f| f as usize).filter(|&f| f < ep.episode.frames());
        let Some(frame) = rel else {
            return Err(Error::row(path, line, format!("frame {frame} outside episode `{ep_id}`")));
        };
        ep.episode.touches.push(TouchRecord { time_s, frame, actor, kind });
    }
    for ep in episodes.iter_mut() {
        ep.episode.touches.sort_by(|a, b| a.frame.cmp(&b.frame).then(a.time_s.total_cmp(&b.time_s)));
    }
    Ok(())
}

/// Tracking plus touches; every episode must share one roster shape.
pub fn load_dataset(tracking: &Path, touches: &Path, rate_hz: f64, pitch: Pitch) -> Result<Vec<LoadedEpisode>> {
    let mut episodes = read_tracking(tracking, rate_hz, pitch)?;
    let roster = episodes[0].episode.roster;
    if let Some(bad) = episodes.iter().find(|e| e.episode.roster != roster) {
        return Err(Error::Data(format!(
            "episode {} has {}+{} players, expected {}+{}",
            bad.episode.episode_id, bad.episode.roster.n_home, bad.episode.roster.n_away, roster.n_home, roster.n_away
        )));
    }
    read_touches(touches, &mut episodes)?;
    Ok(episodes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingRow {
    pub episode_id: String,
    pub frame: u64,
    pub time_s: f64,
    pub team: String,
    pub player_id: String,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchRow {
    pub episode_id: String,
    pub frame: u64,
    pub time_s: f64,
    pub player_id: String,
    pub kind: String,
}

/// Gold or decoded possession state of one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRow {
    pub episode_id: String,
    pub step: usize,
    pub sender_id: String,
    pub receiver_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub episode_id: String,
    pub step: usize,
    pub time_s: f64,
    pub kind: String,
    pub actor_id: String,
    pub target_id: Option<String>,
    pub x_m: f64,
    pub y_m: f64,
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = open_writer(path)?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Rows with their line numbers.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>> {
    let mut reader = open_reader(path)?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut rec = csv::StringRecord::new();
    let mut out = Vec::new();
    while reader.read_record(&mut rec).map_err(|e| Error::csv(path, e))? {
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.deserialize(Some(&headers)).map_err(|e| Error::row(path, line, e.to_string()))?;
        out.push((line, row));
    }
    Ok(out)
}

/// Tracking rows (players, then the ball when present) for each frame of `ep`.
pub fn tracking_rows(ep: &LoadedEpisode) -> impl Iterator<Item = TrackingRow> + '_ {
    let e = &ep.episode;
    let n = e.roster.n_players();
    (0..e.frames()).flat_map(move |f| {
        let time_s = e.time_of(f);
        let players = (0..n).map(move |v| {
            let p = e.player_position(f, v);
            TrackingRow {
                episode_id: e.episode_id.clone(),
                frame: ep.first_frame + f as u64,
                time_s,
                team: if v < e.roster.n_home { "home" } else { "away" }.to_string(),
                player_id: ep.player_ids[v].clone(),
                x_m: p[0],
                y_m: p[1],
            }
        });
        let ball = e.ball.as_ref().map(|b| TrackingRow {
            episode_id: e.episode_id.clone(),
            frame: ep.first_frame + f as u64,
            time_s,
            team: BALL_ID.to_string(),
            player_id: BALL_ID.to_string(),
            x_m: b[f][0],
            y_m: b[f][1],
        });
        players.chain(ball)
    })
}

pub fn touch_rows(ep: &LoadedEpisode) -> impl Iterator<Item = TouchRow> + '_ {
    ep.episode.touches.iter().map(move |t| TouchRow {
        episode_id: ep.episode.episode_id.clone(),
        frame: ep.first_frame + t.frame as u64,
        time_s: t.time_s,
        player_id: ep.node_name(t.actor),
        kind: touch_kind_name(t.kind).to_string(),
    })
}

pub fn path_rows<'a>(ep: &'a LoadedEpisode, path: &'a PossessionPath, rules: &'a RuleSet) -> impl Iterator<Item = PathRow> + 'a {
    path.edges().iter().enumerate().map(move |(step, &e)| {
        let (s, r) = rules.endpoints(e);
        PathRow { episode_id: ep.episode.episode_id.clone(), step, sender_id: ep.node_name(s), receiver_id: ep.node_name(r) }
    })
}

pub fn event_row(ep: &LoadedEpisode, e: &EventRecord) -> EventRow {
    EventRow {
        episode_id: ep.episode.episode_id.clone(),
        step: e.step,
        time_s: e.time_s,
        kind: e.kind.name().to_string(),
        actor_id: ep.node_name(e.actor),
        target_id: e.target.map(|t| ep.node_name(t)),
        x_m: e.location[0],
        y_m: e.location[1],
    }
}

/// Groups path rows by episode and turns them into paths; steps must run 0..len.
pub fn paths_from_rows(
    file: &Path,
    rows: Vec<(u64, PathRow)>,
    episodes: &[LoadedEpisode],
    rules: &RuleSet,
) -> Result<BTreeMap<String, PossessionPath>> {
    let index: HashMap<&str, &LoadedEpisode> = episodes.iter().map(|e| (e.episode.episode_id.as_str(), e)).collect();
    let mut out: BTreeMap<String, Vec<EdgeId>> = BTreeMap::new();
    for (line, row) in rows {
        let ep = index.get(row.episode_id.as_str()).ok_or_else(|| Error::row(file, line, format!("unknown episode `{}`", row.episode_id)))?;
        let node = |name: &str| ep.node_by_name(name).ok_or_else(|| Error::row(file, line, format!("unknown node `{name}`")));
        let edge = rules.edge(node(&row.sender_id)?, node(&row.receiver_id)?);
        let edges = out.entry(row.episode_id.clone()).or_default();
        if row.step != edges.len() {
            return Err(Error::row(file, line, format!("expected step {}, got {}", edges.len(), row.step)));
        }
        edges.push(edge);
    }
    Ok(out.into_iter().map(|(k, v)| (k, PossessionPath(v))).collect())
}

pub fn events_from_rows(file: &Path, rows: Vec<(u64, EventRow)>, episodes: &[LoadedEpisode]) -> Result<BTreeMap<String, Vec<EventRecord>>> {
    let index: HashMap<&str, &LoadedEpisode> = episodes.iter().map(|e| (e.episode.episode_id.as_str(), e)).collect();
    let mut out: BTreeMap<String, Vec<EventRecord>> = BTreeMap::new();
    for (line, row) in rows {
        let ep = index.get(row.episode_id.as_str()).ok_or_else(|| Error::row(file, line, format!("unknown episode `{}`", row.episode_id)))?;
        let node = |name: &str| ep.node_by_name(name).ok_or_else(|| Error::row(file, line, format!("unknown node `{name}`")));
        let kind = EventKind::from_name(&row.kind).ok_or_else(|| Error::row(file, line, format!("unknown event kind `{}`", row.kind)))?;
        let target = match row.target_id.as_deref() {
            Some(t) if !t.is_empty() => Some(node(t)?),
            _ => None,
        };
        out.entry(row.episode_id.clone()).or_default().push(EventRecord {
            step: row.step,
            time_s: row.time_s,
            kind,
            actor: node(&row.actor_id)?,
            target,
            location: [row.x_m, row.y_m],
        });
    }
    Ok(out)
}
