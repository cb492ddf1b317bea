//! Perturbed-utility route choice toolkit.
//!
//! A traveler routes one unit of demand through a directed network by
//! maximizing a linear link utility minus a strictly convex, length-weighted
//! perturbation, subject to flow conservation. This crate solves that convex
//! program, recovers the utility parameters from observed link flows by a
//! pseudoinverse-transformed linear regression, simulates trip datasets,
//! screens raw trips, and evaluates predictions. Enumerated-route logit
//! baselines are included for small-network comparisons.

pub mod baselines;
pub mod error;
pub mod estimation;
pub mod network;
pub mod perturbation;
pub mod preprocess;
pub mod simulate;
pub mod solver;
pub mod trip;
pub mod validation;

pub use error::{CoreError, Result};
pub use network::{
    assemble_features, DemandSpec, FeatureMatrix, FeatureSpec, Link, Network, UtilityRates,
};
pub use perturbation::Perturbation;
pub use solver::{solve_flow, FlowSolution, SolveMethod, SolverOptions};
pub use trip::Trip;
