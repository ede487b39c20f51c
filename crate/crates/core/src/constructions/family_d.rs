//! The gadget family: every base edge `(v,w)` other than the sink loop is
//! replaced by agent vertices `x`, `z` and a randomization vertex `y` with
//!
//! ```text
//! v <-> x -> y --(p_v)--> z --r(v,w)--> w
//!           y --(1-p_v)--> v
//! ```

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::family_b::{EdgeName, FamilyB};
use crate::mdp::{Edge, EdgeId, Label, Mdp, Policy, Vertex, VertexId};
use crate::rational::{self, int, pow2, Rational};
use crate::{Error, Result};

/// Per-vertex gadget probabilities.
#[derive(Clone, Debug, Default)]
pub enum Probabilities {
    /// `p_v = 2^(-N_V(v)(n+5))`.
    #[default]
    Default,
    /// Explicit values keyed by base vertex; missing vertices use the default.
    Custom(HashMap<VertexId, Rational>),
}

/// Internal order of the `(x_{u,.}, u)` edges placed at the front of the
/// Bland numbering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PrependOrder {
    /// Ascending vertex number of `u`, ties by the base Bland number.
    #[default]
    Ascending,
    /// The reverse of `Ascending`.
    Descending,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    pub base_edge: EdgeId,
    pub source: VertexId,
    pub target: VertexId,
    pub x: VertexId,
    pub y: VertexId,
    pub z: VertexId,
    pub p: Rational,
    /// `(v, x)`
    pub enter: EdgeId,
    /// `(x, v)`
    pub back: EdgeId,
    /// `(x, y)`
    pub commit: EdgeId,
    /// `(z, w)`
    pub exit: EdgeId,
}

/// What an agent edge of the gadget family is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRole {
    Enter(usize),
    Back(usize),
    Commit(usize),
    Exit(usize),
    Return(usize),
    Advance(usize),
    SinkLoop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetMap {
    gadgets: Vec<Gadget>,
}

impl GadgetMap {
    /// Gadgets indexed by base edge id (the sink loop has none).
    pub fn gadgets(&self) -> &[Gadget] {
        &self.gadgets
    }

    pub fn for_base_edge(&self, e: EdgeId) -> Option<&Gadget> {
        self.gadgets.get(e.0)
    }

    /// `{base_edge: {x, y, z, p}}` keyed by base edge name.
    pub fn to_json(&self, base: &FamilyB) -> String {
        #[derive(Serialize)]
        struct Entry {
            x: usize,
            y: usize,
            z: usize,
            #[serde(with = "rational::serde_str")]
            p: Rational,
        }
        let doc: BTreeMap<String, Entry> = self
            .gadgets
            .iter()
            .map(|g| {
                (
                    base.name(g.base_edge).to_string(),
                    Entry { x: g.x.0, y: g.y.0, z: g.z.0, p: g.p.clone() },
                )
            })
            .collect();
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyD {
    base: FamilyB,
    mdp: Mdp,
    gadgets: GadgetMap,
    roles: Vec<EdgeRole>,
}

impl FamilyD {
    pub fn new(n: u32, probabilities: &Probabilities) -> Result<Self> {
        Self::with_order(n, probabilities, PrependOrder::default())
    }

    pub fn with_order(n: u32, probabilities: &Probabilities, order: PrependOrder) -> Result<Self> {
        let base = FamilyB::new(n)?;
        let bmdp = base.mdp();
        let nb = bmdp.num_vertices();
        let p_of = |v: VertexId| -> Result<Rational> {
            let p = match probabilities {
                Probabilities::Custom(map) if map.contains_key(&v) => map[&v].clone(),
                _ => default_probability(&base, v),
            };
            if !p.is_positive() || p > Rational::one() {
                return Err(Error::BadProbability(rational::format(&p)));
            }
            Ok(p)
        };
        if let Probabilities::Custom(map) = probabilities {
            if let Some(v) = map.keys().find(|v| v.0 >= nb || **v == base.s()) {
                return Err(Error::Domain(format!("no gadget probability for vertex {}", v.0)));
            }
        }

        let mut vertices: Vec<Vertex> = bmdp.vertices().to_vec();
        let mut edges: Vec<Edge> = Vec::new();
        let mut roles = Vec::new();
        let mut gadgets = Vec::new();
        let sink_loop = base.edge(EdgeName::SINK_LOOP);
        let push = |edges: &mut Vec<Edge>, roles: &mut Vec<EdgeRole>, s: VertexId, t: VertexId, r: Rational, role| {
            edges.push(Edge { source: s, target: t, payload: r, bland: None });
            roles.push(role);
            EdgeId(edges.len() - 1)
        };
        for (k, be) in bmdp.edges().iter().enumerate() {
            if EdgeId(k) == sink_loop {
                continue;
            }
            let (v, w) = (be.source, be.target);
            let vl = Box::new(bmdp.vertex(v).label.clone());
            let wl = Box::new(bmdp.vertex(w).label.clone());
            let x = VertexId(vertices.len());
            vertices.push(Vertex::agent(Label::GadgetX(vl.clone(), wl.clone())));
            let y = VertexId(vertices.len());
            vertices.push(Vertex::random(Label::GadgetY(vl.clone(), wl.clone())));
            let z = VertexId(vertices.len());
            vertices.push(Vertex::agent(Label::GadgetZ(vl, wl)));
            let p = p_of(v)?;
            let g = gadgets.len();
            let enter = push(&mut edges, &mut roles, v, x, int(0), EdgeRole::Enter(g));
            let back = push(&mut edges, &mut roles, x, v, int(0), EdgeRole::Back(g));
            let commit = push(&mut edges, &mut roles, x, y, int(0), EdgeRole::Commit(g));
            let ret = Rational::one() - &p;
            if !ret.is_zero() {
                push(&mut edges, &mut roles, y, v, ret, EdgeRole::Return(g));
            }
            push(&mut edges, &mut roles, y, z, p.clone(), EdgeRole::Advance(g));
            let exit = push(&mut edges, &mut roles, z, w, be.payload.clone(), EdgeRole::Exit(g));
            gadgets.push(Gadget {
                base_edge: EdgeId(k),
                source: v,
                target: w,
                x,
                y,
                z,
                p,
                enter,
                back,
                commit,
                exit,
            });
        }
        let s = base.s();
        push(&mut edges, &mut roles, s, s, int(0), EdgeRole::SinkLoop);

        // Bland numbering: all (x_{u,.}, u) first, then (x,y), (v,x) per base
        // edge in base order, then the forced edges.
        let mut front: Vec<&Gadget> = gadgets.iter().collect();
        front.sort_by_key(|g| (g.source, bmdp.edge(g.base_edge).bland));
        if order == PrependOrder::Descending {
            front.reverse();
        }
        let mut order_list: Vec<EdgeId> = front.iter().map(|g| g.back).collect();
        for g in &gadgets {
            order_list.push(g.commit);
            order_list.push(g.enter);
        }
        order_list.extend(gadgets.iter().map(|g| g.exit));
        order_list.push(EdgeId(edges.len() - 1));
        for (num, e) in order_list.iter().enumerate() {
            edges[e.0].bland = Some(num as u32 + 1);
        }

        let mdp = Mdp::new(vertices, edges, s)?;
        Ok(FamilyD { base, mdp, gadgets: GadgetMap { gadgets }, roles })
    }

    pub fn n(&self) -> u32 {
        self.base.n()
    }

    pub fn base(&self) -> &FamilyB {
        &self.base
    }

    pub fn mdp(&self) -> &Mdp {
        &self.mdp
    }

    pub fn gadget_map(&self) -> &GadgetMap {
        &self.gadgets
    }

    pub fn gadget(&self, base_edge: EdgeId) -> &Gadget {
        &self.gadgets.gadgets[base_edge.0]
    }

    pub fn gadget_by_name(&self, name: EdgeName) -> &Gadget {
        self.gadget(self.base.edge(name))
    }

    pub fn role(&self, e: EdgeId) -> EdgeRole {
        self.roles[e.0]
    }

    /// `p_v` used by the gadgets leaving base vertex `v`.
    pub fn probability(&self, v: VertexId) -> Option<&Rational> {
        self.gadgets.gadgets.iter().find(|g| g.source == v).map(|g| &g.p)
    }

    /// Base edge replaced by a `(x, y)` edge.
    pub fn commit_base_edge(&self, e: EdgeId) -> Option<EdgeId> {
        match self.roles.get(e.0) {
            Some(EdgeRole::Commit(g)) => Some(self.gadgets.gadgets[*g].base_edge),
            _ => None,
        }
    }

    /// The base vertex an edge belongs to: `(x,y)`, `(v,x)` and `(x,v)` of a
    /// gadget over `(v, .)` belong to `v`.
    pub fn owner(&self, e: EdgeId) -> Option<VertexId> {
        match self.roles.get(e.0)? {
            EdgeRole::Enter(g) | EdgeRole::Back(g) | EdgeRole::Commit(g) => {
                Some(self.gadgets.gadgets[*g].source)
            }
            _ => None,
        }
    }

    pub fn belongs(&self, e: EdgeId, v: VertexId) -> bool {
        self.owner(e) == Some(v)
    }

    /// The twin of a base policy: every base vertex is oriented towards its
    /// base choice.
    pub fn twin_policy(&self, base_policy: &Policy) -> Result<Policy> {
        let bmdp = self.base.mdp();
        let mut active = Vec::new();
        for g in &self.gadgets.gadgets {
            let chosen = base_policy
                .active_edge(bmdp, g.source)
                .ok_or_else(|| Error::InvalidPolicy("base vertex without an edge".into()))?;
            if chosen == g.base_edge {
                active.push(g.enter);
                active.push(g.commit);
            } else {
                active.push(g.back);
            }
        }
        Policy::from_edges(&self.mdp, active)
    }

    /// Inverse of [`FamilyD::twin_policy`]: the base policy whose twin is
    /// `policy`, if every base vertex is oriented.
    pub fn base_of_twin(&self, policy: &Policy) -> Option<Policy> {
        let mut chosen = Vec::new();
        for v in self.base.mdp().agent_vertices() {
            if v == self.base.s() {
                continue;
            }
            let mut orientation = None;
            for g in self.gadgets.gadgets.iter().filter(|g| g.source == v) {
                let toward = policy.is_active(&self.mdp, g.enter) && policy.is_active(&self.mdp, g.commit);
                if toward {
                    if orientation.is_some() {
                        return None;
                    }
                    orientation = Some(g.base_edge);
                } else if !policy.is_active(&self.mdp, g.back) {
                    return None;
                }
            }
            chosen.push(orientation?);
        }
        Policy::from_edges(self.base.mdp(), chosen).ok()
    }

    /// `(x_{v,w}, y_{v,w})` edges mapped to base names, other edges by label.
    pub fn describe(&self, e: EdgeId) -> String {
        self.mdp.edge_label(e)
    }
}

/// `2^(-N_V(v)(n+5))`.
pub fn default_probability(base: &FamilyB, v: VertexId) -> Rational {
    let n = base.n() as i64;
    pow2(-(base.vertex_number(v) as i64) * (n + 5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn sizes_for_four_levels() {
        let d = FamilyD::new(4, &Probabilities::Default).unwrap();
        assert_eq!(d.mdp().num_vertices(), 86);
        assert_eq!(d.mdp().agent_edges().count(), 101);
        assert_eq!(d.mdp().num_edges() - d.mdp().agent_edges().count(), 50);
    }

    #[test]
    fn default_probabilities() {
        let d = FamilyD::new(4, &Probabilities::Default).unwrap();
        assert_eq!(d.probability(d.base().t()).unwrap(), &pow2(-9));
        assert_eq!(d.probability(d.base().a(1)).unwrap(), &pow2(-18));
        assert_eq!(d.probability(d.base().d()).unwrap(), &pow2(-90));
        for g in d.gadget_map().gadgets() {
            let total: Rational = d.mdp().out_edges(g.y).iter().map(|&e| d.mdp().edge(e).payload.clone()).sum();
            assert!(total.is_one());
        }
    }

    #[test]
    fn bland_numbering_is_a_permutation() {
        for order in [PrependOrder::Ascending, PrependOrder::Descending] {
            let d = FamilyD::with_order(3, &Probabilities::Default, order).unwrap();
            let mut nums: Vec<u32> = d.mdp().agent_edges().map(|e| d.mdp().edge(e).bland.unwrap()).collect();
            nums.sort();
            assert_eq!(nums, (1..=nums.len() as u32).collect::<Vec<_>>());
            // every back edge precedes every commit edge
            let max_back = d.gadget_map().gadgets().iter().map(|g| d.mdp().edge(g.back).bland.unwrap()).max().unwrap();
            let min_commit = d.gadget_map().gadgets().iter().map(|g| d.mdp().edge(g.commit).bland.unwrap()).min().unwrap();
            assert!(max_back < min_commit);
        }
        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let g = d.gadget_by_name(EdgeName::travel(1));
        assert_eq!(d.mdp().edge(g.back).bland, Some(1));
        assert_eq!(d.mdp().edge(g.commit).bland, Some(14));
        assert_eq!(d.mdp().edge(g.enter).bland, Some(15));
    }

    #[test]
    fn custom_probabilities() {
        let b = FamilyB::new(2).unwrap();
        let map = HashMap::from([(b.t(), ratio(1, 2)), (b.a(1), int(1))]);
        let d = FamilyD::new(2, &Probabilities::Custom(map)).unwrap();
        assert_eq!(d.probability(b.t()).unwrap(), &ratio(1, 2));
        // p = 1 drops the return edge
        let g = d.gadget_by_name(EdgeName::enter(1));
        assert_eq!(d.mdp().out_edges(g.y).len(), 1);
        for bad in [int(0), int(2), ratio(-1, 3)] {
            let map = HashMap::from([(b.t(), bad)]);
            assert!(matches!(FamilyD::new(2, &Probabilities::Custom(map)), Err(Error::BadProbability(_))));
        }
    }

    #[test]
    fn belongs_examples() {
        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let (a1, b1) = (d.base().a(1), d.base().b(1));
        let g = d.gadget_by_name(EdgeName::enter(1));
        assert!(d.belongs(g.commit, a1));
        assert!(d.belongs(g.enter, a1));
        assert!(d.belongs(g.back, a1));
        assert!(!d.belongs(g.exit, a1));
        assert!(!d.belongs(g.exit, b1));
        // exhaustive: every agent edge except z-edges and the sink loop has
        // exactly one owner among the base vertices
        for e in d.mdp().agent_edges() {
            let owners: Vec<_> = d.base().mdp().agent_vertices().filter(|&v| d.belongs(e, v)).collect();
            match d.role(e) {
                EdgeRole::Exit(_) | EdgeRole::SinkLoop => assert!(owners.is_empty()),
                _ => assert_eq!(owners.len(), 1),
            }
        }
    }

    #[test]
    fn gadget_map_json() {
        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let text = d.gadget_map().to_json(d.base());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v.as_object().unwrap().len(), 13);
        assert_eq!(v["enter(1)"]["p"], "1/16384");
        assert_eq!(v["travel(1)"]["p"], "1/128");
    }
}
