//! Generators for the lower-bound families and their distinguished policies.

pub mod bits;
pub mod canonical;
pub mod family_b;
pub mod family_d;

pub use canonical::{
    canonical_phases, canonical_policy, canonical_requirements, canonical_violations, even_transition,
    optimal_policy_b, predicted_bland_trace, recognize_canonical, Clause,
};
pub use family_b::{EdgeKind, EdgeName, FamilyB};
pub use family_d::{default_probability, EdgeRole, FamilyD, Gadget, GadgetMap, PrependOrder, Probabilities};
