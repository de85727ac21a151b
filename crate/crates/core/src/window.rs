//! Fixed-rate player positions for a stretch of play.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{Boundary, NodeId, Roster, Team};
use crate::ScorerError;

/// Pitch dimensions in meters; origin at the bottom-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pitch {
    pub length: f64,
    pub width: f64,
}

impl Default for Pitch {
    fn default() -> Self {
        Pitch { length: 105.0, width: 68.0 }
    }
}

impl Pitch {
    /// Midpoint of a boundary line, used as the fixed position of its outside node.
    pub fn anchor(&self, boundary: Boundary) -> [f64; 2] {
        match boundary {
            Boundary::Left => [0.0, self.width / 2.0],
            Boundary::Right => [self.length, self.width / 2.0],
            Boundary::Top => [self.length / 2.0, self.width],
            Boundary::Bottom => [self.length / 2.0, 0.0],
        }
    }

    pub fn diagonal(&self) -> f64 {
        libm::hypot(self.length, self.width)
    }

    /// Boundary line closest to a point.
    pub fn nearest_boundary(&self, p: [f64; 2]) -> Boundary {
        let d = [p[0], self.length - p[0], self.width - p[1], p[1]];
        let mut best = 0;
        for i in 1..4 {
            if d[i] < d[best] {
                best = i;
            }
        }
        Boundary::ALL[best]
    }
}

/// Positions and velocities of every node (players plus outside anchors) over `steps` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackingWindow {
    pub episode_id: String,
    /// Offset of the first step within its episode.
    pub start_step: usize,
    pub rate_hz: f64,
    pub roster: Roster,
    pub pitch: Pitch,
    steps: usize,
    positions: Vec<[f64; 2]>,
    velocities: Vec<[f64; 2]>,
}

impl TrackingWindow {
    /// Builds a window from `steps x n_players` player positions; outside anchors are
    /// appended and velocities derived by backward differences.
    pub fn new(
        episode_id: impl Into<String>,
        start_step: usize,
        rate_hz: f64,
        roster: Roster,
        pitch: Pitch,
        player_positions: &[[f64; 2]],
    ) -> Result<TrackingWindow, ScorerError> {
        let n_players = roster.n_players();
        if n_players == 0 || player_positions.len() % n_players != 0 {
            return Err(ScorerError::NodeCount { window: player_positions.len(), rules: n_players });
        }
        let steps = player_positions.len() / n_players;
        let n_total = roster.n_total();
        let mut positions = Vec::with_capacity(steps * n_total);
        for t in 0..steps {
            for (v, p) in player_positions[t * n_players..(t + 1) * n_players].iter().enumerate() {
                if !p[0].is_finite() || !p[1].is_finite() {
                    return Err(ScorerError::NonFinitePosition { step: t, node: v });
                }
                positions.push(*p);
            }
            for k in 0..roster.n_out {
                positions.push(Boundary::ALL.get(k).map(|b| pitch.anchor(*b)).unwrap_or([0.0, 0.0]));
            }
        }
        let velocities = finite_difference(&positions, steps, n_total, rate_hz);
        Ok(TrackingWindow {
            episode_id: episode_id.into(),
            start_step,
            rate_hz,
            roster,
            pitch,
            steps,
            positions,
            velocities,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn n_nodes(&self) -> usize {
        self.roster.n_total()
    }

    #[inline]
    pub fn position(&self, t: usize, node: NodeId) -> [f64; 2] {
        self.positions[t * self.n_nodes() + node.index()]
    }

    #[inline]
    pub fn velocity(&self, t: usize, node: NodeId) -> [f64; 2] {
        self.velocities[t * self.n_nodes() + node.index()]
    }

    pub fn team_of(&self, node: NodeId) -> Team {
        self.roster.team_of(node)
    }

    /// Time of step `t` in seconds from the start of the episode.
    pub fn time_s(&self, t: usize) -> f64 {
        (self.start_step + t) as f64 / self.rate_hz
    }

    /// Steps `[start, start + len)` as a new window; velocities are kept, not recomputed.
    pub fn slice(&self, start: usize, len: usize) -> TrackingWindow {
        let n = self.n_nodes();
        TrackingWindow {
            episode_id: self.episode_id.clone(),
            start_step: self.start_step + start,
            rate_hz: self.rate_hz,
            roster: self.roster,
            pitch: self.pitch,
            steps: len,
            positions: self.positions[start * n..(start + len) * n].to_vec(),
            velocities: self.velocities[start * n..(start + len) * n].to_vec(),
        }
    }

    /// Reflection `x -> length - x` of every player; anchors stay in place.
    pub fn mirrored_x(&self) -> TrackingWindow {
        let n_players = self.roster.n_players();
        let mut players = Vec::with_capacity(self.steps * n_players);
        for t in 0..self.steps {
            for v in 0..n_players {
                let p = self.position(t, NodeId(v as u32));
                players.push([self.pitch.length - p[0], p[1]]);
            }
        }
        TrackingWindow::new(self.episode_id.clone(), self.start_step, self.rate_hz, self.roster, self.pitch, &players)
            .expect("mirroring preserves finiteness")
    }
}

fn finite_difference(positions: &[[f64; 2]], steps: usize, n: usize, rate_hz: f64) -> Vec<[f64; 2]> {
    let mut vel = alloc::vec![[0.0; 2]; positions.len()];
    for t in 1..steps {
        for v in 0..n {
            let a = positions[(t - 1) * n + v];
            let b = positions[t * n + v];
            vel[t * n + v] = [(b[0] - a[0]) * rate_hz, (b[1] - a[1]) * rate_hz];
        }
    }
    if steps >= 2 {
        let (first, rest) = vel.split_at_mut(n);
        first.copy_from_slice(&rest[..n]);
    }
    vel
}
