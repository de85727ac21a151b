//! Seeded synthetic matches: smooth player motion, a scripted ball and the
//! touch list, action script and gold path that go with it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::crf::PossessionPath;
use crate::events::EventKind;
use crate::graph::{NodeId, Roster, Team};
use crate::labeling::{build_gold_path, resample, Episode, ResampleMode, TouchKind, TouchRecord};
use crate::window::Pitch;
use crate::SynthError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_per_team: usize,
    pub episodes: usize,
    /// Target in-play length of each episode; it ends at the first free step after this.
    pub episode_s: f64,
    /// Mean time a player holds the ball before playing it.
    pub tempo_s: f64,
    pub pass_speed: f64,
    /// Gaussian noise added to recorded player positions.
    pub noise_sigma: f64,
    pub out_prob: f64,
    pub turnover_prob: f64,
    pub one_touch_prob: f64,
    /// Chance per decode step that a holder touches the ball while dribbling.
    pub dribble_touch_prob: f64,
    pub max_speed: f64,
    pub rate_hz: f64,
    /// Rate of the gold path; must divide `rate_hz`.
    pub step_hz: f64,
    pub pitch: Pitch,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_per_team: 11,
            episodes: 4,
            episode_s: 60.0,
            tempo_s: 2.0,
            pass_speed: 15.0,
            noise_sigma: 0.0,
            out_prob: 0.05,
            turnover_prob: 0.15,
            one_touch_prob: 0.1,
            dribble_touch_prob: 0.2,
            max_speed: 8.0,
            rate_hz: 25.0,
            step_hz: 5.0,
            pitch: Pitch::default(),
        }
    }
}

impl SynthConfig {
    pub fn roster(&self) -> Roster {
        Roster::new(self.n_per_team, self.n_per_team, 4)
    }

    fn frames_per_step(&self) -> Result<usize, SynthError> {
        let r = self.rate_hz / self.step_hz;
        let k = libm::round(r);
        if !(self.step_hz > 0.0) || (r - k).abs() > 1e-9 || k < 1.0 {
            return Err(SynthError::InvalidConfig("rate_hz must be an integer multiple of step_hz"));
        }
        Ok(k as usize)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = [
            (self.episode_s, "episode_s"),
            (self.tempo_s, "tempo_s"),
            (self.pass_speed, "pass_speed"),
            (self.max_speed, "max_speed"),
            (self.rate_hz, "rate_hz"),
            (self.pitch.length, "pitch.length"),
            (self.pitch.width, "pitch.width"),
        ];
        for (v, what) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SynthError::InvalidConfig(what));
            }
        }
        let probs = [self.out_prob, self.turnover_prob, self.one_touch_prob, self.dribble_touch_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SynthError::InvalidConfig("probabilities must lie in [0, 1]"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidConfig("noise_sigma"));
        }
        if self.n_per_team < 2 || self.episodes == 0 {
            return Err(SynthError::InvalidConfig("need at least two players per team and one episode"));
        }
        if self.max_speed > 9.0 {
            return Err(SynthError::InvalidConfig("max_speed above 9 m/s"));
        }
        self.frames_per_step()?;
        Ok(())
    }
}

/// A scripted on-ball event at tracking-frame resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptAction {
    pub frame: usize,
    pub kind: EventKind,
    pub actor: NodeId,
    pub target: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthEpisode {
    /// Tracking, ball and touches at `rate_hz`.
    pub episode: Episode,
    pub actions: Vec<ScriptAction>,
    /// Gold possession path at `step_hz`.
    pub gold: PossessionPath,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthMatch {
    pub config: SynthConfig,
    pub episodes: Vec<SynthEpisode>,
}

#[derive(Clone, Copy, Debug)]
enum Ball {
    Held { holder: usize, next_action: usize },
    Flight { receiver: usize, kicked_at: usize },
    OutFlight { dir: [f64; 2], kicked_at: usize },
    Dead { out_frame: usize },
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

struct Sim<'a> {
    cfg: &'a SynthConfig,
    roster: Roster,
    step: usize,
    dt: f64,
    pos: Vec<[f64; 2]>,
    vel: Vec<[f64; 2]>,
    base: Vec<[f64; 2]>,
    waypoint: Vec<[f64; 2]>,
    ball: [f64; 2],
    touches: Vec<(usize, NodeId, TouchKind)>,
    actions: Vec<ScriptAction>,
}

impl Sim<'_> {
    fn team_members(&self, team: Team) -> impl Iterator<Item = usize> + '_ {
        let roster = self.roster;
        (0..roster.n_players()).filter(move |&v| roster.team_of(NodeId(v as u32)) == team)
    }

    fn hold_frames(&self, rng: &mut ChaCha8Rng) -> usize {
        let exp = Exp::new(1.0 / self.cfg.tempo_s).expect("positive tempo");
        let s: f64 = exp.sample(rng);
        let frames = libm::ceil(s.clamp(0.4, 6.0) / self.dt) as usize;
        frames.div_ceil(self.step).max(1) * self.step
    }

    fn new_waypoint(&self, v: usize, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let p = self.cfg.pitch;
        let b = self.base[v];
        [
            (b[0] + rng.random_range(-12.0..12.0)).clamp(2.0, p.length - 2.0),
            (b[1] + rng.random_range(-10.0..10.0)).clamp(2.0, p.width - 2.0),
        ]
    }

    /// Kick by `u` at `frame`: a pass, a turnover or a ball played out.
    fn kick(&mut self, u: usize, frame: usize, rng: &mut ChaCha8Rng) -> Ball {
        let pitch = self.cfg.pitch;
        let team = self.roster.team_of(NodeId(u as u32));
        if rng.random_bool(self.cfg.out_prob) {
            let b = pitch.nearest_boundary(self.pos[u]);
            let o = self.roster.outside_node(b).expect("four outside nodes");
            self.actions.push(ScriptAction { frame, kind: EventKind::Kick, actor: NodeId(u as u32), target: Some(o) });
            let anchor = pitch.anchor(b);
            let dir = match b {
                crate::graph::Boundary::Left | crate::graph::Boundary::Right => [(anchor[0] - self.pos[u][0]).signum(), 0.0],
                _ => [0.0, (anchor[1] - self.pos[u][1]).signum()],
            };
            return Ball::OutFlight { dir, kicked_at: frame };
        }
        let mates: Vec<usize> = self.team_members(team).filter(|&v| v != u).collect();
        let weights: Vec<f64> = mates
            .iter()
            .map(|&v| {
                let d = dist(self.pos[u], self.pos[v]);
                if d < 6.0 {
                    1e-3
                } else {
                    libm::exp(-d / 20.0)
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random_range(0.0..total);
        let mut target = mates[mates.len() - 1];
        for (v, w) in mates.iter().zip(&weights) {
            if pick < *w {
                target = *v;
                break;
            }
            pick -= w;
        }
        if rng.random_bool(self.cfg.turnover_prob) {
            let mid = [(self.pos[u][0] + self.pos[target][0]) / 2.0, (self.pos[u][1] + self.pos[target][1]) / 2.0];
            let other = if team == Team::Home { Team::Away } else { Team::Home };
            target = self
                .team_members(other)
                .min_by(|&a, &b| dist(self.pos[a], mid).total_cmp(&dist(self.pos[b], mid)))
                .expect("non-empty team");
        }
        self.actions.push(ScriptAction {
            frame,
            kind: EventKind::Kick,
            actor: NodeId(u as u32),
            target: Some(NodeId(target as u32)),
        });
        Ball::Flight { receiver: target, kicked_at: frame }
    }

    fn move_players(&mut self, state: &Ball, rng: &mut ChaCha8Rng) {
        let cfg = self.cfg;
        let n = self.roster.n_players();
        // the nearest opponent closes down the holder, or the receiver while the ball travels
        let marked = match *state {
            Ball::Held { holder, .. } => Some(holder),
            Ball::Flight { receiver, .. } => Some(receiver),
            _ => None,
        };
        let presser = marked.and_then(|m| {
            let team = self.roster.team_of(NodeId(m as u32));
            let other = if team == Team::Home { Team::Away } else { Team::Home };
            self.team_members(other).min_by(|&a, &b| dist(self.pos[a], self.pos[m]).total_cmp(&dist(self.pos[b], self.pos[m])))
        });
        for v in 0..n {
            if dist(self.pos[v], self.waypoint[v]) < 1.0 || rng.random_bool(0.01) {
                self.waypoint[v] = self.new_waypoint(v, rng);
            }
            let target = match *state {
                Ball::Flight { receiver, .. } if receiver == v => self.ball,
                _ if presser == Some(v) => {
                    let h = self.pos[marked.expect("presser implies a marked player")];
                    let d = dist(self.pos[v], h).max(1e-9);
                    [h[0] + (self.pos[v][0] - h[0]) / d * 2.0, h[1] + (self.pos[v][1] - h[1]) / d * 2.0]
                }
                _ => self.waypoint[v],
            };
            let mut desired = [(target[0] - self.pos[v][0]) * 1.2, (target[1] - self.pos[v][1]) * 1.2];
            let ds = libm::hypot(desired[0], desired[1]);
            if ds > cfg.max_speed {
                desired = [desired[0] / ds * cfg.max_speed, desired[1] / ds * cfg.max_speed];
            }
            let a = (3.0 * self.dt).min(1.0);
            let mut vel = [self.vel[v][0] + (desired[0] - self.vel[v][0]) * a, self.vel[v][1] + (desired[1] - self.vel[v][1]) * a];
            let s = libm::hypot(vel[0], vel[1]);
            if s > cfg.max_speed {
                vel = [vel[0] / s * cfg.max_speed, vel[1] / s * cfg.max_speed];
            }
            let mut p = [self.pos[v][0] + vel[0] * self.dt, self.pos[v][1] + vel[1] * self.dt];
            for (k, lim) in [cfg.pitch.length, cfg.pitch.width].into_iter().enumerate() {
                if p[k] < 0.0 || p[k] > lim {
                    p[k] = p[k].clamp(0.0, lim);
                    vel[k] = 0.0;
                }
            }
            self.pos[v] = p;
            self.vel[v] = vel;
        }
    }
}

fn simulate_episode(
    cfg: &SynthConfig,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SynthEpisode, SynthError> {
    let roster = cfg.roster();
    let n = roster.n_players();
    let step = cfg.frames_per_step()?;
    let pitch = cfg.pitch;
    let half = pitch.length / 2.0;
    let base: Vec<[f64; 2]> = (0..n)
        .map(|v| {
            let home = roster.team_of(NodeId(v as u32)) == Team::Home;
            let x = if home { rng.random_range(8.0..half - 2.0) } else { rng.random_range(half + 2.0..pitch.length - 8.0) };
            [x, rng.random_range(6.0..pitch.width - 6.0)]
        })
        .collect();
    let mut sim = Sim {
        cfg,
        roster,
        step,
        dt: 1.0 / cfg.rate_hz,
        pos: base.clone(),
        vel: vec![[0.0; 2]; n],
        waypoint: base.clone(),
        base,
        ball: [0.0; 2],
        touches: Vec::new(),
        actions: Vec::new(),
    };
    let first = if index % 2 == 0 { rng.random_range(0..cfg.n_per_team) } else { cfg.n_per_team + rng.random_range(0..cfg.n_per_team) };
    sim.ball = sim.pos[first];
    for v in 0..n {
        sim.waypoint[v] = sim.new_waypoint(v, rng);
    }
    sim.touches.push((0, NodeId(first as u32), TouchKind::Touch));
    let mut state = Ball::Held { holder: first, next_action: sim.hold_frames(rng) };
    let target_frames = libm::ceil(cfg.episode_s * cfg.rate_hz) as usize;
    let noise = Normal::new(0.0, cfg.noise_sigma.max(1e-300)).expect("valid sigma");

    let mut players = Vec::new();
    let mut ball_track = Vec::new();
    let mut frame = 0usize;
    loop {
        // Resolve ball events scheduled for this frame.
        let on_step = frame % step == 0;
        match state {
            Ball::Held { holder, next_action } if on_step && frame > 0 => {
                if frame >= next_action {
                    sim.touches.push((frame, NodeId(holder as u32), TouchKind::Touch));
                    state = sim.kick(holder, frame, rng);
                } else if rng.random_bool(cfg.dribble_touch_prob) {
                    sim.touches.push((frame, NodeId(holder as u32), TouchKind::Touch));
                }
            }
            Ball::Flight { receiver, kicked_at } if on_step && frame >= kicked_at + step => {
                if dist(sim.ball, sim.pos[receiver]) <= 1.0 {
                    sim.touches.push((frame, NodeId(receiver as u32), TouchKind::Touch));
                    if rng.random_bool(cfg.one_touch_prob) {
                        state = sim.kick(receiver, frame, rng);
                    } else {
                        sim.actions.push(ScriptAction {
                            frame,
                            kind: EventKind::Control,
                            actor: NodeId(receiver as u32),
                            target: None,
                        });
                        state = Ball::Held { holder: receiver, next_action: frame + sim.hold_frames(rng) };
                    }
                }
            }
            Ball::OutFlight { kicked_at, .. } if on_step && frame >= kicked_at + step => {
                let b = sim.ball;
                if b[0] < 0.0 || b[0] > pitch.length || b[1] < 0.0 || b[1] > pitch.width {
                    let o = roster.outside_node(pitch.nearest_boundary(b)).expect("four outside nodes");
                    sim.touches.push((frame, o, TouchKind::OutOfPlay));
                    sim.actions.push(ScriptAction { frame, kind: EventKind::OutOfPlay, actor: o, target: None });
                    state = Ball::Dead { out_frame: frame };
                }
            }
            _ => {}
        }
        // Ball position at this frame.
        match state {
            Ball::Held { holder, .. } => {
                let v = sim.vel[holder];
                let s = libm::hypot(v[0], v[1]);
                let ahead = if s > 0.1 { [v[0] / s * 0.5, v[1] / s * 0.5] } else { [0.5, 0.0] };
                sim.ball = [sim.pos[holder][0] + ahead[0], sim.pos[holder][1] + ahead[1]];
            }
            Ball::Flight { receiver, .. } => {
                let r = sim.pos[receiver];
                let d = dist(sim.ball, r);
                let travel = cfg.pass_speed * sim.dt;
                if d <= travel.max(0.5) {
                    sim.ball = r;
                } else {
                    sim.ball = [sim.ball[0] + (r[0] - sim.ball[0]) / d * travel, sim.ball[1] + (r[1] - sim.ball[1]) / d * travel];
                }
            }
            Ball::OutFlight { dir, .. } => {
                let travel = cfg.pass_speed * sim.dt;
                sim.ball = [sim.ball[0] + dir[0] * travel, sim.ball[1] + dir[1] * travel];
            }
            Ball::Dead { .. } => {}
        }
        for v in 0..n {
            let p = sim.pos[v];
            let p = if cfg.noise_sigma > 0.0 {
                [
                    (p[0] + noise.sample(rng)).clamp(0.0, pitch.length),
                    (p[1] + noise.sample(rng)).clamp(0.0, pitch.width),
                ]
            } else {
                p
            };
            players.push(p);
        }
        ball_track.push(sim.ball);

        let done = match state {
            Ball::Held { .. } => on_step && frame >= target_frames,
            Ball::Dead { out_frame } => frame >= out_frame + 5 * step,
            _ => false,
        };
        if done {
            break;
        }
        sim.move_players(&state, rng);
        frame += 1;
    }

    let start_time_s = index as f64 * (cfg.episode_s + 30.0);
    let touches = sim
        .touches
        .iter()
        .map(|&(f, actor, kind)| TouchRecord { time_s: start_time_s + f as f64 / cfg.rate_hz, frame: f, actor, kind })
        .collect();
    let episode = Episode {
        episode_id: format!("m{}_e{}", cfg.seed, index),
        rate_hz: cfg.rate_hz,
        start_time_s,
        roster,
        pitch,
        players,
        ball: Some(ball_track),
        touches,
    };
    let coarse = resample(&episode, cfg.step_hz, ResampleMode::Decimate)?;
    let rules = roster.rules()?;
    let gold = build_gold_path(&coarse.touches, coarse.frames(), &rules)?;
    Ok(SynthEpisode { episode, actions: sim.actions, gold: gold.path })
}

/// Generates `config.episodes` episodes; identical configs give identical output.
pub fn generate_match(config: &SynthConfig) -> Result<SynthMatch, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let episodes = (0..config.episodes).map(|k| simulate_episode(config, k, &mut rng)).collect::<Result<_, _>>()?;
    Ok(SynthMatch { config: config.clone(), episodes })
}
