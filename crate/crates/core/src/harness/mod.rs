//! Replication studies: configuration, row generation, aggregation and the
//! statistical verification suites.

pub mod aggregate;
pub mod replicate;
pub mod sweep;
pub mod verify;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{EosError, Result};
use crate::loss_geometry::{analyze, AsymptoticConstants};
use crate::model_zoo::{builtin_scenarios, Scenario, ScenarioTag};
use crate::posterior::PosteriorBackend;

pub use aggregate::{AggregateReport, CellSummary, ScalingFit, Stat};
pub use replicate::{run_replications, ReplicationRow, RowStatus};
pub use sweep::{beta_sweep, verify_beta_sweep, SweepPoint, SweepTable};
pub use verify::{
    backend_equivalence, verify_all, verify_equations_of_state, verify_lemmas, verify_theorem1,
    verify_theorem2_scaling, EquivalenceOptions,
};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "EOS_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario_id: String,
    pub n_grid: Vec<usize>,
    pub beta_grid: Vec<Beta>,
    pub replications: usize,
    pub master_seed: u64,
    pub backend: PosteriorBackend,
    pub tolerance_se_multiplier: f64,
}

impl ExperimentConfig {
    pub fn new(scenario_id: &str) -> Self {
        Self {
            scenario_id: scenario_id.to_string(),
            n_grid: vec![100, 400, 1600],
            beta_grid: vec![Beta::Finite(0.5), Beta::Finite(1.0), Beta::Finite(2.0), Beta::Infinite],
            replications: 10_000,
            master_seed: 1,
            backend: PosteriorBackend::default(),
            tolerance_se_multiplier: 3.0,
        }
    }

    /// Checks the documented invariants against the scenario catalog.
    pub fn validate(&self) -> Result<()> {
        let catalog = builtin_scenarios();
        let scenario = catalog.get(&self.scenario_id)?;
        let d = scenario.dim();
        if self.n_grid.is_empty() {
            return Err(EosError::Validation("n_grid must not be empty".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EosError::Validation("n_grid must be strictly increasing".into()));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n < 10 * d) {
            return Err(EosError::Validation(format!("every n must satisfy n >= 10·d = {}, got {n}", 10 * d)));
        }
        if self.beta_grid.is_empty() {
            return Err(EosError::Validation("beta_grid must not be empty".into()));
        }
        if self.replications < 100 {
            return Err(EosError::Validation(format!("R >= 100 required, got {}", self.replications)));
        }
        if !(self.tolerance_se_multiplier > 0.0) {
            return Err(EosError::Validation("tolerance_se_multiplier must be positive".into()));
        }
        self.backend.validate()
    }
}

/// Worker count from `EOS_WORKERS`, else the available parallelism.
pub fn resolve_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1))
}

/// Scenario facts a study needs at verification time, computed once at
/// run start and stored alongside the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub tag: String,
    pub d: usize,
    pub w0: Vec<f64>,
    /// Row-major I(w₀).
    pub i: Vec<f64>,
    /// Row-major J(w₀).
    pub j: Vec<f64>,
    pub constants: AsymptoticConstants,
    /// ∇ log φ(w₀).
    pub prior_grad_at_w0: Vec<f64>,
}

impl ScenarioSummary {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let geo = analyze(scenario)?;
        let d = scenario.dim();
        let mut prior_grad = vec![0.0; d];
        scenario.prior.grad_log(&geo.optimal.w0, &mut prior_grad);
        let tag = match scenario.tag {
            ScenarioTag::ParametrizableRegular => "parametrizable_regular",
            ScenarioTag::NonparametrizableRegular => "nonparametrizable_regular",
        };
        Ok(Self {
            scenario_id: scenario.id.clone(),
            tag: tag.to_string(),
            d,
            w0: geo.optimal.w0.clone(),
            i: row_major(&geo.pair.i),
            j: row_major(&geo.pair.j),
            constants: geo.constants,
            prior_grad_at_w0: prior_grad,
        })
    }

    pub fn i_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.i)
    }

    pub fn j_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.j)
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Upper triangle (row by row) of a symmetric matrix.
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for r in 0..d {
        for c in r..d {
            out.push(m[(r, c)]);
        }
    }
    out
}

pub fn from_upper_triangle(d: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for r in 0..d {
        for c in r..d {
            m[(r, c)] = v[k];
            m[(c, r)] = v[k];
            k += 1;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// Monte Carlo error too large for the check to be meaningful.
    InsufficientPrecision,
    /// The quantity is identically (or structurally) zero for this
    /// scenario, so its scaling cannot be measured.
    Degenerate,
}

/// One statistical check: observed against predicted at `multiplier`
/// standard errors (or a stated absolute tolerance for slope and identity
/// checks).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub observed: f64,
    pub predicted: f64,
    pub se: f64,
    pub multiplier: f64,
    pub pass: bool,
    pub status: VerdictStatus,
    pub detail: String,
}

impl Verdict {
    pub fn new(
        name: impl Into<String>,
        observed: f64,
        predicted: f64,
        se: f64,
        multiplier: f64,
        status: VerdictStatus,
    ) -> Self {
        Self {
            name: name.into(),
            observed,
            predicted,
            se,
            multiplier,
            pass: matches!(status, VerdictStatus::Pass | VerdictStatus::Degenerate),
            status,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    /// |observed − predicted| ≤ multiplier·se, unless se exceeds `precision_scale`.
    pub fn within_se(
        name: impl Into<String>,
        observed: f64,
        predicted: f64,
        se: f64,
        multiplier: f64,
        precision_scale: f64,
    ) -> Self {
        let status = if !(se <= precision_scale) {
            VerdictStatus::InsufficientPrecision
        } else if (observed - predicted).abs() <= multiplier * se {
            VerdictStatus::Pass
        } else {
            VerdictStatus::Fail
        };
        Self::new(name, observed, predicted, se, multiplier, status)
    }

    /// |observed − predicted| ≤ tolerance.
    pub fn within_tolerance(name: impl Into<String>, observed: f64, predicted: f64, tolerance: f64) -> Self {
        let status = if (observed - predicted).abs() <= tolerance { VerdictStatus::Pass } else { VerdictStatus::Fail };
        Self::new(name, observed, predicted, tolerance, 1.0, status)
    }

    /// Hard failure: neither passed nor excused by precision.
    pub fn is_hard_failure(&self) -> bool {
        self.status == VerdictStatus::Fail
    }
}
