//! Extended node set, edge indexing and the hard transition-constraint system.
//!
//! Nodes are laid out canonically: home players, then away players, then the
//! outside nodes in (left, right, top, bottom) order. A possession state is a
//! directed edge `(sender, receiver)` over that node set; `(u, u)` means `u`
//! controls the ball, `(u, v)` means the ball travels from `u` to `v`.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::GraphError;

/// Index into the extended node set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a directed edge, `sender * n_total + receiver`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Player,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Team {
    Home,
    Away,
    Outside,
}

/// The four pitch boundaries, in canonical outside-node order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    Left,
    Right,
    Top,
    Bottom,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [Boundary::Left, Boundary::Right, Boundary::Top, Boundary::Bottom];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Left => "left",
            Boundary::Right => "right",
            Boundary::Top => "top",
            Boundary::Bottom => "bottom",
        }
    }

    pub fn from_name(name: &str) -> Option<Boundary> {
        Boundary::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// Team sizes for one episode. Player ordering within a team is up to the caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Roster {
    pub n_home: usize,
    pub n_away: usize,
    pub n_out: usize,
}

impl Default for Roster {
    fn default() -> Self {
        Roster { n_home: 11, n_away: 11, n_out: 4 }
    }
}

impl Roster {
    pub fn new(n_home: usize, n_away: usize, n_out: usize) -> Self {
        Roster { n_home, n_away, n_out }
    }

    pub fn n_players(&self) -> usize {
        self.n_home + self.n_away
    }

    pub fn n_total(&self) -> usize {
        self.n_players() + self.n_out
    }

    pub fn team_of(&self, node: NodeId) -> Team {
        let i = node.index();
        if i < self.n_home {
            Team::Home
        } else if i < self.n_players() {
            Team::Away
        } else {
            Team::Outside
        }
    }

    /// Node id of an outside boundary, if this roster has that many outside nodes.
    pub fn outside_node(&self, boundary: Boundary) -> Option<NodeId> {
        let k = Boundary::ALL.iter().position(|b| *b == boundary)?;
        (k < self.n_out).then(|| NodeId((self.n_players() + k) as u32))
    }

    pub fn boundary_of(&self, node: NodeId) -> Option<Boundary> {
        let i = node.index();
        if i >= self.n_players() && i < self.n_total() {
            Boundary::ALL.get(i - self.n_players()).copied()
        } else {
            None
        }
    }

    pub fn rules(&self) -> Result<RuleSet, GraphError> {
        RuleSet::new(self.n_players(), self.n_out)
    }
}

/// Which of the four allowed-transition subsets a pair belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    /// `(u,v) -> (u,v)`
    Identity,
    /// `(u,u) -> (u,v)`, `u` a player, `v != u`
    Kick,
    /// `(u,v) -> (v,w)`, `u != v` both players
    Reception,
    /// `(u,o) -> (o,o)`, `u` a player, `o` outside
    Out,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 4] =
        [TransitionKind::Identity, TransitionKind::Kick, TransitionKind::Reception, TransitionKind::Out];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllowedTransition {
    pub prev: EdgeId,
    pub next: EdgeId,
    pub kind: TransitionKind,
}

const NOT_ALLOWED: u32 = u32::MAX;

/// The possession-transition system for a fixed node count.
///
/// `allowed_list` is sorted by `(prev, next)` and is the layout used for
/// sparse per-step transition scores; its order never changes for a given
/// `(n_players, n_out)`.
#[derive(Clone, Debug)]
pub struct RuleSet {
    n_players: usize,
    n_out: usize,
    n_total: usize,
    allowed: Vec<AllowedTransition>,
    // successors of edge e are allowed[succ_offsets[e]..succ_offsets[e + 1]]
    succ_offsets: Vec<u32>,
    pred_offsets: Vec<u32>,
    // (prev edge, index into allowed)
    preds: Vec<(u32, u32)>,
    // dense n_edges x n_edges lookup into allowed, NOT_ALLOWED otherwise
    pair_index: Vec<u32>,
}

impl RuleSet {
    pub fn new(n_players: usize, n_out: usize) -> Result<RuleSet, GraphError> {
        if n_players == 0 {
            return Err(GraphError::NoPlayers);
        }
        let n_total = n_players + n_out;
        let n_edges = n_total * n_total;
        if n_edges > (u32::MAX / 2) as usize {
            return Err(GraphError::TooManyNodes(n_total));
        }
        let is_player = |i: usize| i < n_players;

        let mut allowed = Vec::new();
        let mut succ_offsets = Vec::with_capacity(n_edges + 1);
        let mut next_buf: Vec<(usize, TransitionKind)> = Vec::new();
        for a in 0..n_total {
            for b in 0..n_total {
                succ_offsets.push(allowed.len() as u32);
                next_buf.clear();
                let prev = a * n_total + b;
                next_buf.push((prev, TransitionKind::Identity));
                if a == b && is_player(a) {
                    for v in (0..n_total).filter(|&v| v != a) {
                        next_buf.push((a * n_total + v, TransitionKind::Kick));
                    }
                }
                if a != b && is_player(a) && is_player(b) {
                    for w in 0..n_total {
                        next_buf.push((b * n_total + w, TransitionKind::Reception));
                    }
                }
                if is_player(a) && !is_player(b) {
                    next_buf.push((b * n_total + b, TransitionKind::Out));
                }
                next_buf.sort_unstable_by_key(|&(n, _)| n);
                allowed.extend(next_buf.iter().map(|&(n, kind)| AllowedTransition {
                    prev: EdgeId(prev as u32),
                    next: EdgeId(n as u32),
                    kind,
                }));
            }
        }
        succ_offsets.push(allowed.len() as u32);

        let mut pair_index = alloc::vec![NOT_ALLOWED; n_edges * n_edges];
        let mut pred_counts = alloc::vec![0u32; n_edges + 1];
        for (i, tr) in allowed.iter().enumerate() {
            pair_index[tr.prev.index() * n_edges + tr.next.index()] = i as u32;
            pred_counts[tr.next.index() + 1] += 1;
        }
        let mut pred_offsets = pred_counts;
        for e in 0..n_edges {
            pred_offsets[e + 1] += pred_offsets[e];
        }
        let mut fill = pred_offsets.clone();
        let mut preds = alloc::vec![(0u32, 0u32); allowed.len()];
        // allowed is sorted by prev, so each predecessor list comes out ascending
        for (i, tr) in allowed.iter().enumerate() {
            let slot = &mut fill[tr.next.index()];
            preds[*slot as usize] = (tr.prev.0, i as u32);
            *slot += 1;
        }

        Ok(RuleSet { n_players, n_out, n_total, allowed, succ_offsets, pred_offsets, preds, pair_index })
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_edges(&self) -> usize {
        self.n_total * self.n_total
    }

    pub fn n_allowed(&self) -> usize {
        self.allowed.len()
    }

    pub fn allowed_list(&self) -> &[AllowedTransition] {
        &self.allowed
    }

    pub fn role(&self, node: NodeId) -> NodeRole {
        if node.index() < self.n_players {
            NodeRole::Player
        } else {
            NodeRole::Outside
        }
    }

    pub fn is_player(&self, node: NodeId) -> bool {
        node.index() < self.n_players
    }

    pub fn encode(&self, sender: NodeId, receiver: NodeId) -> Result<EdgeId, GraphError> {
        for n in [sender, receiver] {
            if n.index() >= self.n_total {
                return Err(GraphError::NodeOutOfRange { node: n.0, n_total: self.n_total });
            }
        }
        Ok(self.edge(sender, receiver))
    }

    pub fn decode(&self, edge: EdgeId) -> Result<(NodeId, NodeId), GraphError> {
        if edge.index() >= self.n_edges() {
            return Err(GraphError::EdgeOutOfRange { edge: edge.0, n_edges: self.n_edges() });
        }
        Ok(self.endpoints(edge))
    }

    /// Unchecked encode; indices must be valid.
    #[inline]
    pub fn edge(&self, sender: NodeId, receiver: NodeId) -> EdgeId {
        EdgeId((sender.index() * self.n_total + receiver.index()) as u32)
    }

    /// Unchecked decode; the edge must be valid.
    #[inline]
    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        let i = edge.index();
        (NodeId((i / self.n_total) as u32), NodeId((i % self.n_total) as u32))
    }

    pub fn self_loop(&self, node: NodeId) -> EdgeId {
        self.edge(node, node)
    }

    /// Position of `(prev, next)` in `allowed_list`, if the pair is allowed.
    #[inline]
    pub fn transition_index(&self, prev: EdgeId, next: EdgeId) -> Option<usize> {
        let n = self.n_edges();
        if prev.index() >= n || next.index() >= n {
            return None;
        }
        match self.pair_index[prev.index() * n + next.index()] {
            NOT_ALLOWED => None,
            i => Some(i as usize),
        }
    }

    #[inline]
    pub fn is_allowed(&self, prev: EdgeId, next: EdgeId) -> bool {
        self.transition_index(prev, next).is_some()
    }

    pub fn kind(&self, prev: EdgeId, next: EdgeId) -> Option<TransitionKind> {
        self.transition_index(prev, next).map(|i| self.allowed[i].kind)
    }

    /// Allowed transitions leaving `edge`, ascending by next edge.
    pub fn successors(&self, edge: EdgeId) -> &[AllowedTransition] {
        let e = edge.index();
        &self.allowed[self.succ_offsets[e] as usize..self.succ_offsets[e + 1] as usize]
    }

    /// Range of `allowed_list` holding the successors of `edge`.
    pub fn successor_range(&self, edge: EdgeId) -> core::ops::Range<usize> {
        let e = edge.index();
        self.succ_offsets[e] as usize..self.succ_offsets[e + 1] as usize
    }

    /// `(prev, allowed-list index)` for every allowed predecessor of `edge`, ascending by prev.
    pub fn predecessors(&self, edge: EdgeId) -> &[(u32, u32)] {
        let e = edge.index();
        &self.preds[self.pred_offsets[e] as usize..self.pred_offsets[e + 1] as usize]
    }

    pub fn count_kind(&self, kind: TransitionKind) -> usize {
        self.allowed.iter().filter(|t| t.kind == kind).count()
    }

    /// FNV-1a over the allowed list as little-endian `(prev, next)` u32 pairs.
    pub fn checksum(&self) -> u32 {
        let mut h: u32 = 0x811c_9dc5;
        for tr in &self.allowed {
            for word in [tr.prev.0, tr.next.0] {
                for byte in word.to_le_bytes() {
                    h ^= byte as u32;
                    h = h.wrapping_mul(0x0100_0193);
                }
            }
        }
        h
    }
}
