//! Finite Markov decision processes under the expected total reward criterion.
//!
//! Vertices are either agent vertices (the controller picks one outgoing edge
//! and collects its reward) or randomization vertices (the successor is drawn
//! from the outgoing probabilities). Every process has a designated sink, an
//! agent vertex whose only edge is a zero-reward self-loop.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, Zero};
use petgraph::graph::{DiGraph, NodeIndex};

use crate::rational::Rational;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VertexKind {
    Agent,
    Randomization,
}

/// Structured vertex name.
///
/// Gadget vertices are named after the base edge they replace, e.g.
/// `x(a1->b1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Sink,
    Dummy,
    Transport,
    A(u32),
    B(u32),
    GadgetX(Box<Label>, Box<Label>),
    GadgetY(Box<Label>, Box<Label>),
    GadgetZ(Box<Label>, Box<Label>),
    Named(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Sink => write!(f, "s"),
            Label::Dummy => write!(f, "d"),
            Label::Transport => write!(f, "t"),
            Label::A(i) => write!(f, "a{i}"),
            Label::B(i) => write!(f, "b{i}"),
            Label::GadgetX(v, w) => write!(f, "x({v}->{w})"),
            Label::GadgetY(v, w) => write!(f, "y({v}->{w})"),
            Label::GadgetZ(v, w) => write!(f, "z({v}->{w})"),
            Label::Named(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let named = || Label::Named(s.to_string());
        match s {
            "s" => return Ok(Label::Sink),
            "d" => return Ok(Label::Dummy),
            "t" => return Ok(Label::Transport),
            _ => {}
        }
        let level = |rest: &str| -> Option<u32> {
            if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
                None
            } else {
                rest.parse().ok()
            }
        };
        if let Some(i) = s.strip_prefix('a').and_then(level) {
            return Ok(Label::A(i));
        }
        if let Some(i) = s.strip_prefix('b').and_then(level) {
            return Ok(Label::B(i));
        }
        for (prefix, make) in [
            ("x(", Label::GadgetX as fn(Box<Label>, Box<Label>) -> Label),
            ("y(", Label::GadgetY),
            ("z(", Label::GadgetZ),
        ] {
            if let Some(inner) = s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')')) {
                if let Some((v, w)) = inner.split_once("->") {
                    let v: Label = v.parse()?;
                    let w: Label = w.parse()?;
                    if !matches!(v, Label::Named(_)) && !matches!(w, Label::Named(_)) {
                        return Ok(make(Box::new(v), Box::new(w)));
                    }
                }
            }
        }
        Ok(named())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub kind: VertexKind,
    pub label: Label,
}

impl Vertex {
    pub fn agent(label: Label) -> Self {
        Vertex {
            kind: VertexKind::Agent,
            label,
        }
    }

    pub fn random(label: Label) -> Self {
        Vertex {
            kind: VertexKind::Randomization,
            label,
        }
    }
}

/// A directed edge. `payload` is the reward of an agent edge or the
/// transition probability of a randomization edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub source: VertexId,
    pub target: VertexId,
    pub payload: Rational,
    pub bland: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mdp {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    out: Vec<Vec<EdgeId>>,
    sink: VertexId,
    lookup: HashMap<(VertexId, VertexId), EdgeId>,
}

impl Mdp {
    /// Validates and assembles a process. Edges keep the given order; the
    /// per-vertex adjacency lists follow it.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>, sink: VertexId) -> Result<Self> {
        let nv = vertices.len();
        let bad = |msg: String| Err(Error::InvalidMdp(msg));
        if sink.0 >= nv {
            return bad(format!("sink {} out of range", sink.0));
        }
        let mut out = vec![Vec::new(); nv];
        let mut lookup = HashMap::with_capacity(edges.len());
        let mut numbers = HashSet::new();
        for (i, e) in edges.iter().enumerate() {
            if e.source.0 >= nv || e.target.0 >= nv {
                return bad(format!("edge {i} has an endpoint out of range"));
            }
            if lookup.insert((e.source, e.target), EdgeId(i)).is_some() {
                return bad(format!("parallel edge {}->{}", e.source.0, e.target.0));
            }
            if let Some(b) = e.bland {
                if !numbers.insert(b) {
                    return bad(format!("Bland number {b} used twice"));
                }
            }
            out[e.source.0].push(EdgeId(i));
        }
        for (v, vertex) in vertices.iter().enumerate() {
            if out[v].is_empty() {
                return bad(format!("vertex {v} ({}) has no outgoing edge", vertex.label));
            }
            if vertex.kind == VertexKind::Randomization {
                let mut total = Rational::zero();
                for &e in &out[v] {
                    let p = &edges[e.0].payload;
                    if !p.is_positive() || *p > Rational::one() {
                        return Err(Error::BadProbability(crate::rational::format(p)));
                    }
                    total += p;
                }
                if !total.is_one() {
                    return bad(format!(
                        "probabilities at vertex {v} sum to {}",
                        crate::rational::format(&total)
                    ));
                }
            }
        }
        let sink_vertex = &vertices[sink.0];
        if sink_vertex.kind != VertexKind::Agent {
            return bad("sink must be an agent vertex".into());
        }
        match out[sink.0].as_slice() {
            [e] if edges[e.0].target == sink && edges[e.0].payload.is_zero() => {}
            _ => return bad("sink must have exactly one zero-reward self-loop".into()),
        }
        let mdp = Mdp {
            vertices,
            edges,
            out,
            sink,
            lookup,
        };
        let reach = mdp.reaches_sink(|v| mdp.out[v.0].iter().map(|&e| mdp.edges[e.0].target).collect());
        if let Some(v) = reach.iter().position(|r| !r) {
            return bad(format!("sink is not reachable from vertex {v}"));
        }
        Ok(mdp)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn sink(&self) -> VertexId {
        self.sink
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out[v.0]
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.lookup.get(&(u, v)).copied()
    }

    pub fn is_agent(&self, v: VertexId) -> bool {
        self.vertices[v.0].kind == VertexKind::Agent
    }

    pub fn is_agent_edge(&self, e: EdgeId) -> bool {
        self.is_agent(self.edges[e.0].source)
    }

    /// Agent vertex other than the sink with at least two outgoing edges.
    pub fn is_switchable(&self, v: VertexId) -> bool {
        self.is_agent(v) && v != self.sink && self.out[v.0].len() >= 2
    }

    pub fn agent_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertices.len()).map(VertexId).filter(|&v| self.is_agent(v))
    }

    pub fn agent_edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId).filter(|&e| self.is_agent_edge(e))
    }

    pub fn find_vertex(&self, label: &Label) -> Option<VertexId> {
        self.vertices.iter().position(|v| &v.label == label).map(VertexId)
    }

    /// `src->dst` using vertex labels, e.g. `x(a1->b1)->y(a1->b1)`.
    pub fn edge_label(&self, e: EdgeId) -> String {
        let edge = &self.edges[e.0];
        format!(
            "{}->{}",
            self.vertices[edge.source.0].label, self.vertices[edge.target.0].label
        )
    }

    /// Copy of this process with one edge payload replaced.
    pub fn with_payload(&self, e: EdgeId, payload: Rational) -> Result<Mdp> {
        let mut edges = self.edges.clone();
        edges[e.0].payload = payload;
        Mdp::new(self.vertices.clone(), edges, self.sink)
    }

    /// Backward search from the sink over the successor relation `succ`.
    fn reaches_sink(&self, succ: impl Fn(VertexId) -> Vec<VertexId>) -> Vec<bool> {
        let n = self.vertices.len();
        let mut pred = vec![Vec::new(); n];
        for u in 0..n {
            for w in succ(VertexId(u)) {
                pred[w.0].push(u);
            }
        }
        let mut seen = vec![false; n];
        seen[self.sink.0] = true;
        let mut queue = VecDeque::from([self.sink.0]);
        while let Some(w) = queue.pop_front() {
            for &u in &pred[w] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

/// One chosen outgoing edge per switchable agent vertex. Agent vertices with
/// a single outgoing edge are implicitly fixed to it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    choice: Vec<Option<EdgeId>>,
}

impl Policy {
    /// Builds a policy from a set of edges that must be active. Edges of
    /// non-switchable vertices are accepted and ignored; every switchable
    /// vertex must receive exactly one edge.
    pub fn from_edges(mdp: &Mdp, active: impl IntoIterator<Item = EdgeId>) -> Result<Self> {
        let mut choice = vec![None; mdp.num_vertices()];
        for e in active {
            if e.0 >= mdp.num_edges() {
                return Err(Error::InvalidPolicy(format!("edge {} does not exist", e.0)));
            }
            let src = mdp.edge(e).source;
            if !mdp.is_agent(src) {
                return Err(Error::NotAgentEdge { edge: e.0 });
            }
            if !mdp.is_switchable(src) {
                continue;
            }
            match choice[src.0] {
                Some(prev) if prev != e => {
                    return Err(Error::InvalidPolicy(format!(
                        "vertex {} assigned both {} and {}",
                        mdp.vertex(src).label,
                        mdp.edge_label(prev),
                        mdp.edge_label(e)
                    )))
                }
                _ => choice[src.0] = Some(e),
            }
        }
        for v in 0..mdp.num_vertices() {
            if mdp.is_switchable(VertexId(v)) && choice[v].is_none() {
                return Err(Error::InvalidPolicy(format!(
                    "vertex {} has no chosen edge",
                    mdp.vertex(VertexId(v)).label
                )));
            }
        }
        Ok(Policy { choice })
    }

    /// Every switchable vertex takes its first outgoing edge.
    pub fn first_edges(mdp: &Mdp) -> Self {
        let choice = (0..mdp.num_vertices())
            .map(|v| {
                let v = VertexId(v);
                mdp.is_switchable(v).then(|| mdp.out_edges(v)[0])
            })
            .collect();
        Policy { choice }
    }

    /// The explicit choice at `v`, if `v` is switchable.
    pub fn choice(&self, v: VertexId) -> Option<EdgeId> {
        self.choice[v.0]
    }

    /// The edge the process follows from agent vertex `v`.
    pub fn active_edge(&self, mdp: &Mdp, v: VertexId) -> Option<EdgeId> {
        if !mdp.is_agent(v) {
            return None;
        }
        self.choice[v.0].or_else(|| mdp.out_edges(v).first().copied())
    }

    pub fn is_active(&self, mdp: &Mdp, e: EdgeId) -> bool {
        let src = mdp.edge(e).source;
        self.active_edge(mdp, src) == Some(e)
    }

    /// All active agent edges, in vertex order.
    pub fn active_edges(&self, mdp: &Mdp) -> Vec<EdgeId> {
        mdp.agent_vertices()
            .filter_map(|v| self.active_edge(mdp, v))
            .collect()
    }

    /// Explicit choices as `(vertex, edge)` pairs.
    pub fn choices(&self) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        self.choice
            .iter()
            .enumerate()
            .filter_map(|(v, e)| e.map(|e| (VertexId(v), e)))
    }

    /// The policy with `edge` made active at its source.
    pub fn apply_switch(&self, mdp: &Mdp, edge: EdgeId) -> Result<Policy> {
        let src = mdp.edge(edge).source;
        if !mdp.is_agent(src) {
            return Err(Error::NotAgentEdge { edge: edge.0 });
        }
        if !mdp.is_switchable(src) {
            return Err(Error::NotSwitchable { vertex: src.0 });
        }
        let mut next = self.clone();
        next.choice[src.0] = Some(edge);
        Ok(next)
    }
}

/// Exact vertex values of a policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Values(Vec<Rational>);

impl Values {
    pub fn get(&self, v: VertexId) -> &Rational {
        &self.0[v.0]
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }
}

impl std::ops::Index<VertexId> for Values {
    type Output = Rational;

    fn index(&self, v: VertexId) -> &Rational {
        &self.0[v.0]
    }
}

/// Successors of `v` in the policy-induced chain with their weights.
fn induced_successors<'a>(
    mdp: &'a Mdp,
    policy: &'a Policy,
    v: VertexId,
) -> Box<dyn Iterator<Item = (VertexId, &'a Rational)> + 'a> {
    if mdp.is_agent(v) {
        let e = policy.active_edge(mdp, v).expect("agent vertex has an edge");
        Box::new(std::iter::once((mdp.edge(e).target, &*ONE)))
    } else {
        Box::new(mdp.out_edges(v).iter().map(move |&e| {
            let edge = mdp.edge(e);
            (edge.target, &edge.payload)
        }))
    }
}

static ONE: std::sync::LazyLock<Rational> = std::sync::LazyLock::new(Rational::one);

/// First vertex (by index) that cannot reach the sink under `policy`.
pub fn first_stuck_vertex(mdp: &Mdp, policy: &Policy) -> Option<VertexId> {
    let reach = mdp.reaches_sink(|v| induced_successors(mdp, policy, v).map(|(w, _)| w).collect());
    reach.iter().position(|r| !r).map(VertexId)
}

/// Whether the sink is reached with probability one from every vertex.
///
/// The sink is the only absorbing vertex, so this reduces to reachability
/// in the induced graph.
pub fn is_weak_unichain(mdp: &Mdp, policy: &Policy) -> bool {
    first_stuck_vertex(mdp, policy).is_none()
}

/// Solves the Bellman equations of `policy` exactly, with the sink pinned to
/// zero. Strongly connected components of the induced graph are eliminated in
/// reverse topological order; each component is a small dense system.
pub fn solve_values(mdp: &Mdp, policy: &Policy) -> Result<Values> {
    if let Some(v) = first_stuck_vertex(mdp, policy) {
        return Err(Error::NotWeakUnichain { vertex: v.0 });
    }
    let n = mdp.num_vertices();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    for _ in 0..n {
        graph.add_node(());
    }
    for u in 0..n {
        if u == mdp.sink.0 {
            continue;
        }
        for (w, _) in induced_successors(mdp, policy, VertexId(u)) {
            graph.add_edge(NodeIndex::new(u), NodeIndex::new(w.0), ());
        }
    }
    let reward = |u: VertexId| -> Rational {
        if mdp.is_agent(u) {
            mdp.edge(policy.active_edge(mdp, u).unwrap()).payload.clone()
        } else {
            Rational::zero()
        }
    };

    let mut values: Vec<Option<Rational>> = vec![None; n];
    for scc in petgraph::algo::tarjan_scc(&graph) {
        if scc.len() == 1 {
            let u = VertexId(scc[0].index());
            if u == mdp.sink {
                values[u.0] = Some(Rational::zero());
                continue;
            }
            let self_loop = induced_successors(mdp, policy, u).any(|(w, _)| w == u);
            if !self_loop {
                let mut val = reward(u);
                for (w, p) in induced_successors(mdp, policy, u) {
                    val += p * values[w.0].as_ref().expect("successor solved");
                }
                values[u.0] = Some(val);
                continue;
            }
        }
        // Dense elimination on (I - P_scc) x = r + P_out * values.
        let members: Vec<VertexId> = scc.iter().map(|i| VertexId(i.index())).collect();
        let local: HashMap<VertexId, usize> =
            members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let k = members.len();
        let mut mat = vec![vec![Rational::zero(); k + 1]; k];
        for (i, &u) in members.iter().enumerate() {
            mat[i][i] += Rational::one();
            let mut rhs = reward(u);
            for (w, p) in induced_successors(mdp, policy, u) {
                match local.get(&w) {
                    Some(&j) => mat[i][j] -= p,
                    None => rhs += p * values[w.0].as_ref().expect("successor solved"),
                }
            }
            mat[i][k] = rhs;
        }
        let sol = gauss_solve(mat).ok_or(Error::NotWeakUnichain { vertex: members[0].0 })?;
        for (i, v) in members.iter().enumerate() {
            values[v.0] = Some(sol[i].clone());
        }
    }
    Ok(Values(values.into_iter().map(|v| v.expect("all vertices solved")).collect()))
}

/// Gauss-Jordan elimination on an augmented `k x (k+1)` matrix. `None` when
/// singular.
pub(crate) fn gauss_solve(mut mat: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let k = mat.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, pivot);
        let inv = Rational::one() / &mat[col][col];
        for c in col..=k {
            mat[col][c] = &mat[col][c] * &inv;
        }
        for r in 0..k {
            if r == col || mat[r][col].is_zero() {
                continue;
            }
            let factor = mat[r][col].clone();
            for c in col..=k {
                let delta = &factor * &mat[col][c];
                mat[r][c] -= delta;
            }
        }
    }
    Some(mat.into_iter().map(|row| row[k].clone()).collect())
}

/// `z = r(u,v) + Val(v) - Val(u)` for an agent edge `(u,v)`.
pub fn reduced_cost(mdp: &Mdp, values: &Values, edge: EdgeId) -> Result<Rational> {
    let e = mdp.edge(edge);
    if !mdp.is_agent(e.source) {
        return Err(Error::NotAgentEdge { edge: edge.0 });
    }
    Ok(&e.payload + &values[e.target] - &values[e.source])
}

/// Agent edges with strictly positive reduced cost, ordered by source index
/// and then target index.
pub fn improving_switches(mdp: &Mdp, values: &Values) -> Vec<(EdgeId, Rational)> {
    let mut out: Vec<(EdgeId, Rational)> = mdp
        .agent_edges()
        .filter_map(|e| {
            let z = reduced_cost(mdp, values, e).expect("agent edge");
            z.is_positive().then_some((e, z))
        })
        .collect();
    out.sort_by_key(|(e, _)| {
        let edge = mdp.edge(*e);
        (edge.source, edge.target)
    });
    out
}

/// Sum of values over all agent vertices.
pub fn value_sum(mdp: &Mdp, values: &Values) -> Rational {
    mdp.agent_vertices().map(|v| &values[v]).sum()
}
