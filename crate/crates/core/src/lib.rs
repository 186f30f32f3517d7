//! Quantitative parity objectives on Markov decision processes: energy parity
//! and mean-payoff parity, with decomposition, game solving, simulation and
//! brute-force cross-checks.

pub mod decomposition;
pub mod energy_game;
pub mod energy_parity;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod io;
mod linalg;
pub mod meanpayoff;
pub mod model;
pub mod oracle;
pub mod mp_parity;
pub mod scalar;
pub mod simulate;
pub mod strategy;
pub mod transform;

pub use error::{Error, Result};
pub use model::{
    Arena, Edge, GameGraph, Mdp, Model, ModelDraft, ModelKind, Objective, Owner, Priority, Prob, StateId,
    StateSet, Weight,
};
pub use scalar::Scalar;

/// Exact arbitrary-precision rational scalar.
pub type Rational = num_rational::BigRational;

pub type ExactMecValue = meanpayoff::MecValue<Rational>;
pub type FloatMecValue = meanpayoff::MecValue<f64>;
pub type SingleMecValue = meanpayoff::MecValue<f32>;
