//! The deterministic level family.
//!
//! Vertices are laid out in vertex-number order `t, a1, b1, ..., an, bn, d, s`
//! and edges in Bland-number order, so `EdgeId(k)` carries Bland number `k+1`.

use std::fmt;
use std::str::FromStr;

use crate::mdp::{Edge, EdgeId, Label, Mdp, Policy, Vertex, VertexId};
use crate::rational::{int, pow2, ratio, Rational};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Travel,
    Enter,
    Skip,
    Board,
    Stay,
    Leave,
    DummyToSink,
    SinkLoop,
}

/// Role name of a base edge, e.g. `enter(3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeName {
    pub kind: EdgeKind,
    pub level: u32,
}

impl EdgeName {
    pub const DUMMY_TO_SINK: EdgeName = EdgeName { kind: EdgeKind::DummyToSink, level: 0 };
    pub const SINK_LOOP: EdgeName = EdgeName { kind: EdgeKind::SinkLoop, level: 0 };

    pub fn travel(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Travel, level: i }
    }
    pub fn enter(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Enter, level: i }
    }
    pub fn skip(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Skip, level: i }
    }
    pub fn board(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Board, level: i }
    }
    pub fn stay(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Stay, level: i }
    }
    pub fn leave(i: u32) -> Self {
        EdgeName { kind: EdgeKind::Leave, level: i }
    }
}

impl fmt::Display for EdgeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = match self.kind {
            EdgeKind::Travel => "travel",
            EdgeKind::Enter => "enter",
            EdgeKind::Skip => "skip",
            EdgeKind::Board => "board",
            EdgeKind::Stay => "stay",
            EdgeKind::Leave => "leave",
            EdgeKind::DummyToSink => return write!(f, "dummy_to_sink"),
            EdgeKind::SinkLoop => return write!(f, "sink_loop"),
        };
        write!(f, "{word}({})", self.level)
    }
}

impl FromStr for EdgeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dummy_to_sink" => return Ok(EdgeName::DUMMY_TO_SINK),
            "sink_loop" => return Ok(EdgeName::SINK_LOOP),
            _ => {}
        }
        let bad = || Error::Parse(format!("bad edge name {s:?}"));
        let (word, rest) = s.split_once('(').ok_or_else(bad)?;
        let level: u32 = rest.strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let kind = match word {
            "travel" => EdgeKind::Travel,
            "enter" => EdgeKind::Enter,
            "skip" => EdgeKind::Skip,
            "board" => EdgeKind::Board,
            "stay" => EdgeKind::Stay,
            "leave" => EdgeKind::Leave,
            _ => return Err(bad()),
        };
        if level == 0 {
            return Err(bad());
        }
        Ok(EdgeName { kind, level })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyB {
    n: u32,
    mdp: Mdp,
}

impl FamilyB {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 || n > 60 {
            return Err(Error::Domain(format!("level count must be in [1, 60], got {n}")));
        }
        let mut vertices = vec![Vertex::agent(Label::Transport)];
        for i in 1..=n {
            vertices.push(Vertex::agent(Label::A(i)));
            vertices.push(Vertex::agent(Label::B(i)));
        }
        vertices.push(Vertex::agent(Label::Dummy));
        vertices.push(Vertex::agent(Label::Sink));

        let edges = (0..6 * n + 2)
            .map(|k| {
                let name = name_at(n, k as usize);
                let (source, target) = endpoints(n, name);
                Edge {
                    source,
                    target,
                    payload: reward(name),
                    bland: Some(k + 1),
                }
            })
            .collect();
        let mdp = Mdp::new(vertices, edges, VertexId(2 * n as usize + 2))?;
        Ok(FamilyB { n, mdp })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn t(&self) -> VertexId {
        VertexId(0)
    }

    /// `a_i`; `a_{n+1}` is the sink.
    pub fn a(&self, i: u32) -> VertexId {
        assert!((1..=self.n + 1).contains(&i), "level {i} out of range");
        a_index(self.n, i)
    }

    /// `b_i`; `b_{n+1}` is the dummy vertex.
    pub fn b(&self, i: u32) -> VertexId {
        assert!((1..=self.n + 1).contains(&i), "level {i} out of range");
        b_index(self.n, i)
    }

    pub fn d(&self) -> VertexId {
        VertexId(2 * self.n as usize + 1)
    }

    pub fn s(&self) -> VertexId {
        VertexId(2 * self.n as usize + 2)
    }

    /// Position in the order `t, a1, b1, ..., an, bn, d, s`, starting at 1.
    pub fn vertex_number(&self, v: VertexId) -> u32 {
        v.0 as u32 + 1
    }

    /// Bland number of a named edge.
    pub fn bland_number(&self, name: EdgeName) -> u32 {
        let n = self.n;
        let base = n + 5 * (name.level.saturating_sub(1));
        match name.kind {
            EdgeKind::Travel => name.level,
            EdgeKind::Enter => base + 1,
            EdgeKind::Skip => base + 2,
            EdgeKind::Board => base + 3,
            EdgeKind::Stay => base + 4,
            EdgeKind::Leave => base + 5,
            EdgeKind::DummyToSink => 6 * n + 1,
            EdgeKind::SinkLoop => 6 * n + 2,
        }
    }

    pub fn contains(&self, name: EdgeName) -> bool {
        match name.kind {
            EdgeKind::DummyToSink | EdgeKind::SinkLoop => true,
            _ => (1..=self.n).contains(&name.level),
        }
    }

    pub fn edge(&self, name: EdgeName) -> EdgeId {
        assert!(self.contains(name), "{name} is not an edge of B_{}", self.n);
        EdgeId(self.bland_number(name) as usize - 1)
    }

    pub fn name(&self, e: EdgeId) -> EdgeName {
        name_at(self.n, e.0)
    }

    /// Policy with the given edges active; every switchable vertex must be
    /// covered.
    pub fn policy(&self, active: &[EdgeName]) -> Result<Policy> {
        for &name in active {
            if !self.contains(name) {
                return Err(Error::InvalidPolicy(format!("{name} is not an edge of B_{}", self.n)));
            }
        }
        Policy::from_edges(&self.mdp, active.iter().map(|&name| self.edge(name)))
    }

    /// Names of the explicitly chosen edges, in vertex order.
    pub fn active_names(&self, policy: &Policy) -> Vec<EdgeName> {
        policy.choices().map(|(_, e)| self.name(e)).collect()
    }

    /// Copy with one reward replaced; used to build perturbed fixtures.
    pub fn with_reward(&self, name: EdgeName, reward: Rational) -> Result<FamilyB> {
        Ok(FamilyB {
            n: self.n,
            mdp: self.mdp.with_payload(self.edge(name), reward)?,
        })
    }
}

fn a_index(n: u32, i: u32) -> VertexId {
    if i == n + 1 {
        VertexId(2 * n as usize + 2)
    } else {
        VertexId(2 * i as usize - 1)
    }
}

fn b_index(n: u32, i: u32) -> VertexId {
    if i == n + 1 {
        VertexId(2 * n as usize + 1)
    } else {
        VertexId(2 * i as usize)
    }
}

fn endpoints(n: u32, name: EdgeName) -> (VertexId, VertexId) {
    let i = name.level;
    let t = VertexId(0);
    let d = VertexId(2 * n as usize + 1);
    let s = VertexId(2 * n as usize + 2);
    match name.kind {
        EdgeKind::Travel => (t, a_index(n, i)),
        EdgeKind::Enter => (a_index(n, i), b_index(n, i)),
        EdgeKind::Skip => (a_index(n, i), a_index(n, i + 1)),
        EdgeKind::Board => (a_index(n, i), t),
        EdgeKind::Stay => (b_index(n, i), b_index(n, i + 1)),
        EdgeKind::Leave => (b_index(n, i), a_index(n, i + 1)),
        EdgeKind::DummyToSink => (d, s),
        EdgeKind::SinkLoop => (s, s),
    }
}

/// Name of the edge with Bland number `k + 1`.
fn name_at(n: u32, k: usize) -> EdgeName {
    let n = n as usize;
    if k < n {
        return EdgeName::travel(k as u32 + 1);
    }
    if k == 6 * n {
        return EdgeName::DUMMY_TO_SINK;
    }
    if k == 6 * n + 1 {
        return EdgeName::SINK_LOOP;
    }
    let level = ((k - n) / 5) as u32 + 1;
    match (k - n) % 5 {
        0 => EdgeName::enter(level),
        1 => EdgeName::skip(level),
        2 => EdgeName::board(level),
        3 => EdgeName::stay(level),
        _ => EdgeName::leave(level),
    }
}

/// Reward of a named base edge.
pub fn reward(name: EdgeName) -> Rational {
    match name.kind {
        EdgeKind::Enter => pow2(name.level as i64),
        EdgeKind::Stay => ratio(3, 4),
        EdgeKind::Board => ratio(5, 4) - pow2(name.level as i64),
        _ => int(0),
    }
}
