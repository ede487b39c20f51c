//! Exact policy iteration on the level and gadget families, with pivot
//! rules, lemma checks and a flux LP simplex.

pub mod constructions;
pub mod engine;
pub mod error;
pub mod io;
pub mod lp;
pub mod mdp;
pub mod rational;
pub mod verify;

pub use error::{Error, Result};
pub use mdp::{Edge, EdgeId, Label, Mdp, Policy, Values, Vertex, VertexId, VertexKind};
pub use rational::Rational;
