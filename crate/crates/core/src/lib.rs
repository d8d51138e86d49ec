//! Exact filtering over multisets of entities whose properties are only
//! partially known.
//!
//! A belief is a [`LiftedDistribution`]: a weighted set of [`LiftedState`]s,
//! each pairing a multiset of entity structures with a context of shared
//! distributions. [`predict`] advances it through maximally parallel
//! rewriting rules and [`update`] conditions it on an [`Observation`]. The
//! [`ground`] module provides a brute-force reference on explicit states.

pub mod canonical;
pub mod distributions;
pub mod dynamics;
pub mod error;
pub mod ground;
pub mod lifted;
pub mod multiset;
pub mod observation;
pub mod sampler;
pub mod scenario;
pub mod value;

pub use distributions::{DistributionRep, Gaussian};
pub use dynamics::{
    apply_compound, enumerate_amca, predict, split_to_determinacy, Action, ActionInstance, CompoundAction, Constraint,
    EffectOp, Limits, Source, StepStats,
};
pub use error::{Error, Result};
pub use ground::{compare, predict_ground, update_ground, CompareReport, GroundDistribution};
pub use lifted::{
    canonicalize, ground_expand, mixture_ground, Context, EntityStructure, GroundEntity, GroundState, Label,
    LiftedDistribution, LiftedState, Structure,
};
pub use multiset::Multiset;
pub use observation::{structure_likelihood, update, Observation};
pub use value::Value;
