//! Numerical verification of the equations of state for Bayesian learning
//! in regular models.
//!
//! The crate computes, for a (model, true distribution, prior) scenario, the
//! Bayes and Gibbs generalization and training losses, the functional
//! variance, WAIC and empirical TIC under a tempered posterior, and checks
//! their Monte Carlo averages against the asymptotic constants of the
//! scenario.

// `!(x <= tol)` is used on purpose: NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

pub mod beta;
pub mod error;
pub mod functionals;
pub mod harness;
pub mod io;
pub mod loss_geometry;
pub mod model_zoo;
pub mod optim;
pub mod posterior;
pub mod quadrature;
pub mod rng;

pub use beta::Beta;
pub use error::{EosError, Result};
pub use loss_geometry::{analyze, AsymptoticConstants, InformationPair, OptimalPoint, ScenarioGeometry};
pub use model_zoo::{
    builtin_scenarios, ParametricModel, Prior, Scenario, ScenarioCatalog, ScenarioTag, TrueDistribution,
};
pub use posterior::{PosteriorBackend, TemperedPosterior, TrainingSet};
