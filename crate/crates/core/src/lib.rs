//! Generalized block-iterative projection (GBIP) solver for common fixed
//! point problems of continuous cutter operators.
//!
//! The crate provides the cutter catalog ([`cutters`]), control regimes
//! ([`weights`]), adaptive perturbation budgets ([`perturbation`]), the
//! iteration itself ([`solver`]), problem files and instance generators
//! ([`problems`]), randomized property suites ([`oracles`]) and the command
//! line front end ([`cli`]).

pub mod cli;
pub mod config;
pub mod cutters;
pub mod error;
pub mod oracles;
pub mod perturbation;
pub mod problems;
mod rng;
pub mod solver;
pub mod trace;
pub mod vector;
pub mod weights;

pub use config::{validate_config, Relaxation, Sigma, SolverConfig};
pub use cutters::{
    apply, check_separator, fixed_point_distance, residual, ConvexFunctionSpec, CutterSpec,
    ProxableFunctionSpec,
};
pub use error::{Error, Result};
pub use perturbation::{budget, theta_budget, zeta, BudgetInputs, PerturbationPolicy};
pub use rng::keyed_rng;
pub use solver::{run, step, Problem, RunSetup, StoppingRule};
pub use trace::{IterationRecord, RunResult, Status};
pub use vector::{inner, norm, Vector};
pub use weights::{divergence_profile, Regime, WeightSchedule, WeightVector};
