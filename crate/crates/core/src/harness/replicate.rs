//! One row per (n, β, replication): a fresh training set, its posterior and
//! every functional, plus the auxiliary statistics the verifiers use.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::beta::Beta;
use crate::error::{EosError, Result};
use crate::functionals::{evaluate, DTerms};
use crate::model_zoo::{builtin_scenarios, Scenario};
use crate::posterior::{empirical_matrices, PosteriorBackend, TemperedPosterior, TrainingSet};
use crate::rng::replication_seed;

use super::{upper_triangle, ExperimentConfig, ScenarioSummary};

/// Largest tolerated fraction of failed rows before a study aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// Error tag of the failure.
    Failed(String),
}

impl RowStatus {
    pub fn as_str(&self) -> &str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Failed(tag) => tag,
        }
    }

    pub fn parse(s: &str) -> Self {
        if s == "ok" {
            RowStatus::Ok
        } else {
            RowStatus::Failed(s.to_string())
        }
    }
}

/// Per-replication output. Symmetric matrices are stored as upper
/// triangles; failed rows carry NaN everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRow {
    pub scenario_id: String,
    pub n: usize,
    pub beta: Beta,
    pub seed: u64,
    pub rep: u64,
    pub b_g: f64,
    pub b_t: f64,
    pub g_g: f64,
    pub g_t: f64,
    pub v: f64,
    pub waic: f64,
    pub tic_n: f64,
    pub w_map: Vec<f64>,
    pub w_mle: Vec<f64>,
    pub d_terms: DTerms,
    /// −(1/n) Σ log p(X_j|w₀); its expectation is exactly S.
    pub s_emp: f64,
    /// (1/n) Σ ∇ log p(X_j|w₀); mean zero.
    pub score_mean: Vec<f64>,
    pub in_w0: Vec<f64>,
    pub jn_w0: Vec<f64>,
    /// K_n(ŵ)⁻¹/(nβ); zero at β = ∞.
    pub laplace_cov: Vec<f64>,
    /// E_w[w − ŵ].
    pub post_mean_dev: Vec<f64>,
    /// E_w[(w − ŵ)(w − ŵ)ᵀ].
    pub post_cov_map: Vec<f64>,
    /// E_w[(w − w₀)(w − w₀)ᵀ].
    pub post_cov_w0: Vec<f64>,
    /// E_w[|w − ŵ|³].
    pub post_abs3: f64,
    pub status: RowStatus,
}

impl ReplicationRow {
    fn failed(scenario_id: &str, d: usize, n: usize, beta: Beta, seed: u64, rep: u64, tag: &str) -> Self {
        let t = d * (d + 1) / 2;
        let nan = f64::NAN;
        Self {
            scenario_id: scenario_id.to_string(),
            n,
            beta,
            seed,
            rep,
            b_g: nan,
            b_t: nan,
            g_g: nan,
            g_t: nan,
            v: nan,
            waic: nan,
            tic_n: nan,
            w_map: vec![nan; d],
            w_mle: vec![nan; d],
            d_terms: DTerms::from_array([nan; 6]),
            s_emp: nan,
            score_mean: vec![nan; d],
            in_w0: vec![nan; t],
            jn_w0: vec![nan; t],
            laplace_cov: vec![nan; t],
            post_mean_dev: vec![nan; d],
            post_cov_map: vec![nan; t],
            post_cov_w0: vec![nan; t],
            post_abs3: nan,
            status: RowStatus::Failed(tag.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RowStatus::Ok
    }

    pub fn dim(&self) -> usize {
        self.w_map.len()
    }

    /// β·V, with the plug-in limit TIC_n at β = ∞.
    pub fn beta_v(&self) -> f64 {
        match self.beta {
            Beta::Finite(b) => b * self.v,
            Beta::Infinite => self.tic_n,
        }
    }

    /// B_t with the sampling noise of the empirical entropy removed:
    /// B_t − Ŝ_n + S has the same expectation as B_t.
    pub fn b_t_centered(&self, s: f64) -> f64 {
        self.b_t - self.s_emp + s
    }

    pub fn g_t_centered(&self, s: f64) -> f64 {
        self.g_t - self.s_emp + s
    }
}

/// Rows of a finished study together with its scenario summary.
#[derive(Debug, Clone)]
pub struct StudyRun {
    pub summary: ScenarioSummary,
    pub rows: Vec<ReplicationRow>,
}

/// Computes one replication. Errors become flagged rows.
pub fn compute_row(
    scenario: &Scenario,
    summary: &ScenarioSummary,
    n: usize,
    beta: Beta,
    rep: u64,
    seed: u64,
    backend: PosteriorBackend,
) -> ReplicationRow {
    let d = scenario.dim();
    match try_row(scenario, summary, n, beta, rep, seed, backend) {
        Ok(row) => row,
        Err(e) => ReplicationRow::failed(&scenario.id, d, n, beta, seed, rep, e.tag()),
    }
}

fn try_row(
    scenario: &Scenario,
    summary: &ScenarioSummary,
    n: usize,
    beta: Beta,
    rep: u64,
    seed: u64,
    backend: PosteriorBackend,
) -> Result<ReplicationRow> {
    let model = scenario.model.as_ref();
    let prior = scenario.prior.as_ref();
    let truth = scenario.truth.as_ref();
    let w0 = &summary.w0;
    let d = scenario.dim();
    let ts = TrainingSet::generate(truth, &scenario.id, n, seed);
    let post = TemperedPosterior::new(model, prior, &ts, beta, backend, w0)?;
    if let Some(diag) = post.draws().diagnostics {
        if !(diag.max_r_hat <= 1.05) {
            return Err(EosError::BackendUnconverged { r_hat: diag.max_r_hat });
        }
    }
    let report = evaluate(&post, truth, w0)?;

    let em = empirical_matrices(model, prior, &ts, Beta::Infinite, w0);
    let mut score_mean = vec![0.0; d];
    let mut g = vec![0.0; d];
    for &x in &ts.samples {
        model.grad_w(x, w0, &mut g);
        score_mean.iter_mut().zip(&g).for_each(|(s, v)| *s += v / n as f64);
    }
    let laplace = match beta {
        Beta::Finite(b) => post.laplace_covariance(b)?,
        Beta::Infinite => DMatrix::zeros(d, d),
    };
    let moments = post.moments(w0);
    let l = report.losses;
    Ok(ReplicationRow {
        scenario_id: scenario.id.clone(),
        n,
        beta,
        seed,
        rep,
        b_g: l.b_g,
        b_t: l.b_t,
        g_g: l.g_g,
        g_t: l.g_t,
        v: l.v,
        waic: l.waic,
        tic_n: l.tic_n,
        w_map: l.w_map,
        w_mle: l.w_mle,
        d_terms: report.d_terms,
        s_emp: report.s_emp,
        score_mean,
        in_w0: upper_triangle(&em.i_n),
        jn_w0: upper_triangle(&em.j_n),
        laplace_cov: upper_triangle(&laplace),
        post_mean_dev: moments.mean_dev,
        post_cov_map: upper_triangle(&moments.cov_map),
        post_cov_w0: upper_triangle(&moments.cov_w0),
        post_abs3: moments.abs3,
        status: RowStatus::Ok,
    })
}

/// Runs every (n, β, replication) of `config` on `workers` threads. Rows come
/// back ordered by n, then β as listed, then replication index, whatever
/// the worker count.
pub fn run_replications(config: &ExperimentConfig, workers: usize) -> Result<StudyRun> {
    let catalog = builtin_scenarios();
    let scenario = catalog.get(&config.scenario_id)?;
    let summary = ScenarioSummary::from_scenario(scenario)?;
    let mut tasks = Vec::with_capacity(config.n_grid.len() * config.beta_grid.len() * config.replications);
    for &n in &config.n_grid {
        for &beta in &config.beta_grid {
            for rep in 0..config.replications as u64 {
                tasks.push((n, beta, rep));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EosError::InvalidInput(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<ReplicationRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(n, beta, rep)| {
                let seed = replication_seed(config.master_seed, &config.scenario_id, n, beta, rep);
                compute_row(scenario, &summary, n, beta, rep, seed, config.backend)
            })
            .collect()
    });
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * rows.len() as f64 {
        return Err(EosError::TooManyFailures { failed, total: rows.len() });
    }
    Ok(StudyRun { summary, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenario: &str, r: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(scenario);
        c.n_grid = vec![30];
        c.beta_grid = vec![Beta::Finite(1.0)];
        c.replications = r;
        c
    }

    #[test]
    fn smoke_single_row() {
        let run = run_replications(&small("gauss-wide", 1), 1).unwrap();
        assert_eq!(run.rows.len(), 1);
        let row = &run.rows[0];
        assert!(row.is_ok());
        for v in [row.b_g, row.b_t, row.g_g, row.g_t, row.v, row.waic, row.tic_n, row.s_emp, row.post_abs3] {
            assert!(v.is_finite());
        }
        assert!(row.d_terms.as_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rows_independent_of_worker_count() {
        let mut c = small("gauss-scale-laplace", 6);
        c.beta_grid = vec![Beta::Finite(1.0), Beta::Infinite];
        let a = run_replications(&c, 1).unwrap();
        let b = run_replications(&c, 3).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 12);
        assert_eq!(a.rows[6].beta, Beta::Infinite);
    }

    #[test]
    fn infinite_beta_rows_have_no_spread() {
        let mut c = small("gauss-wide", 3);
        c.beta_grid = vec![Beta::Infinite];
        let run = run_replications(&c, 1).unwrap();
        for row in &run.rows {
            assert_eq!(row.v, 0.0);
            assert_eq!(row.post_abs3, 0.0);
            assert!(row.post_cov_map.iter().all(|v| *v == 0.0));
            assert_eq!(row.beta_v(), row.tic_n);
        }
    }

    #[test]
    fn failed_rows_are_flagged() {
        let cat = builtin_scenarios();
        let sc = cat.get("gauss-wide").unwrap();
        let summary = ScenarioSummary::from_scenario(sc).unwrap();
        // n = 1 violates n ≥ d + 1.
        let row = compute_row(sc, &summary, 1, Beta::Finite(1.0), 0, 5, PosteriorBackend::default());
        assert_eq!(row.status, RowStatus::Failed("invalid_input".into()));
        assert!(row.b_g.is_nan());
    }
}
