//! The tempered posterior φ(w) Π p(X_i|w)^β and its expectations.
//!
//! A posterior is reduced to a weighted point set: tensor Simpson nodes for
//! the grid backend, pooled chain states for the Metropolis backend, or the
//! single point w_MLE when β = ∞. Every functional downstream is a weighted
//! sum over that set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{EosError, Result};
use crate::model_zoo::{ParametricModel, Prior, TrueDistribution};
use crate::optim::{newton_minimize, Evaluation, NewtonOptions};
use crate::rng::{chain_seed, stream};

/// Log-likelihood tables larger than this (in entries) are recomputed on
/// demand instead of cached.
const CACHE_LIMIT: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub samples: Vec<f64>,
    pub seed: u64,
    pub scenario_id: String,
}

impl TrainingSet {
    /// Draws `n` samples from a stream seeded by `seed` alone.
    pub fn generate(truth: &dyn TrueDistribution, scenario_id: &str, n: usize, seed: u64) -> Self {
        let mut rng = stream(seed);
        Self { samples: truth.sample(&mut rng, n), seed, scenario_id: scenario_id.to_string() }
    }

    pub fn from_samples(samples: Vec<f64>) -> Self {
        Self { samples, seed: 0, scenario_id: String::new() }
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Odd, at least 201.
    pub nodes_per_dim: usize,
    /// Half-width of the grid in Laplace-approximation standard deviations.
    pub span_sd: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nodes_per_dim: 201, span_sd: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetropolisConfig {
    pub chains: usize,
    /// Kept steps per chain, after burn-in.
    pub steps: usize,
    pub burn_in: usize,
    /// Initial proposal scale in units of the Laplace covariance.
    pub proposal_scale: f64,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        Self { chains: 16, steps: 2500, burn_in: 1000, proposal_scale: 2.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PosteriorBackend {
    GridQuadrature(GridConfig),
    Metropolis(MetropolisConfig),
}

impl Default for PosteriorBackend {
    fn default() -> Self {
        PosteriorBackend::GridQuadrature(GridConfig::default())
    }
}

impl PosteriorBackend {
    pub fn name(&self) -> &'static str {
        match self {
            PosteriorBackend::GridQuadrature(_) => "grid_quadrature",
            PosteriorBackend::Metropolis(_) => "metropolis",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PosteriorBackend::GridQuadrature(g) => {
                if g.nodes_per_dim < 201 || g.nodes_per_dim % 2 == 0 {
                    return Err(EosError::Validation("grid nodes_per_dim must be odd and >= 201".into()));
                }
                if !(g.span_sd > 0.0) {
                    return Err(EosError::Validation("grid span must be positive".into()));
                }
            }
            PosteriorBackend::Metropolis(m) => {
                if m.chains < 2 || m.steps < 10 {
                    return Err(EosError::Validation("metropolis needs >= 2 chains and >= 10 steps".into()));
                }
                if !(m.proposal_scale > 0.0) {
                    return Err(EosError::Validation("metropolis proposal_scale must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorPair {
    pub w_map: Vec<f64>,
    pub w_mle: Vec<f64>,
    pub loss_at_map: f64,
    /// ∇²L_n at the MAP.
    pub hessian_at_map: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetropolisDiagnostics {
    pub acceptance_rate: f64,
    pub final_scale: f64,
    pub max_r_hat: f64,
    /// Acceptance rate fell outside [0.15, 0.6].
    pub flagged: bool,
}

/// Weighted point set standing in for the posterior.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub dim: usize,
    /// Row-major, one point per row.
    pub points: Vec<f64>,
    /// Normalized to sum to one.
    pub weights: Vec<f64>,
    /// Points are laid out as `chains` equal consecutive blocks.
    pub chains: usize,
    pub diagnostics: Option<MetropolisDiagnostics>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    fn point_mass(w: &[f64]) -> Self {
        Self { dim: w.len(), points: w.to_vec(), weights: vec![1.0], chains: 1, diagnostics: None }
    }

    /// Splits pooled Metropolis draws into one equally weighted set per chain.
    pub fn per_chain(&self) -> Vec<PosteriorDraws> {
        let per = self.len() / self.chains;
        (0..self.chains)
            .map(|c| PosteriorDraws {
                dim: self.dim,
                points: self.points[c * per * self.dim..(c + 1) * per * self.dim].to_vec(),
                weights: vec![1.0 / per as f64; per],
                chains: 1,
                diagnostics: None,
            })
            .collect()
    }

    /// Gelman–Rubin potential scale reduction of g across chains.
    pub fn r_hat<G: Fn(&[f64]) -> f64>(&self, g: G) -> f64 {
        if self.chains < 2 {
            return 1.0;
        }
        let per = self.len() / self.chains;
        let vals: Vec<f64> = (0..self.len()).map(|k| g(self.point(k))).collect();
        gelman_rubin(&vals, self.chains, per)
    }
}

fn gelman_rubin(vals: &[f64], chains: usize, per: usize) -> f64 {
    let m = per as f64;
    let means: Vec<f64> = (0..chains).map(|c| vals[c * per..(c + 1) * per].iter().sum::<f64>() / m).collect();
    let within: f64 = (0..chains)
        .map(|c| vals[c * per..(c + 1) * per].iter().map(|v| (v - means[c]).powi(2)).sum::<f64>() / (m - 1.0))
        .sum::<f64>()
        / chains as f64;
    let grand = means.iter().sum::<f64>() / chains as f64;
    let between_over_m = means.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (chains as f64 - 1.0);
    if within <= 0.0 {
        return if between_over_m <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (m - 1.0) / m * within + between_over_m;
    (var_plus / within).sqrt()
}

// ---------------------------------------------------------------------------
// Empirical loss and estimators

/// L_n(w) = −(1/n) Σ log p(X_j|w) − (1/(nβ)) log φ(w); the prior term is
/// dropped for β = ∞.
pub fn empirical_loss(
    model: &dyn ParametricModel,
    prior: &dyn Prior,
    training: &TrainingSet,
    beta: Beta,
    w: &[f64],
) -> f64 {
    let n = training.n() as f64;
    let ll: f64 = training.samples.iter().map(|&x| model.log_density(x, w)).sum();
    let mut loss = -ll / n;
    if let Beta::Finite(b) = beta {
        loss -= prior.log_density(w) / (n * b);
    }
    loss
}

/// L_n with its gradient and Hessian.
pub fn empirical_loss_derivatives(
    model: &dyn ParametricModel,
    prior: &dyn Prior,
    training: &TrainingSet,
    beta: Beta,
    w: &[f64],
) -> Evaluation {
    let d = model.dim();
    let n = training.n() as f64;
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut gs = vec![0.0; d];
    let mut hs = vec![0.0; d * d];
    let mut ll = 0.0;
    for &x in &training.samples {
        ll += model.log_density(x, w);
        model.grad_w(x, w, &mut gs);
        model.hess_w(x, w, &mut hs);
        g.iter_mut().zip(&gs).for_each(|(a, b)| *a -= b / n);
        h.iter_mut().zip(&hs).for_each(|(a, b)| *a -= b / n);
    }
    let mut value = -ll / n;
    if let Beta::Finite(b) = beta {
        let scale = 1.0 / (n * b);
        value -= prior.log_density(w) * scale;
        prior.grad_log(w, &mut gs);
        prior.hess_log(w, &mut hs);
        g.iter_mut().zip(&gs).for_each(|(a, b)| *a -= b * scale);
        h.iter_mut().zip(&hs).for_each(|(a, b)| *a -= b * scale);
    }
    (value, g, DMatrix::from_row_slice(d, d, &h))
}

/// I_n, J_n and K_n = ∇²L_n at one parameter.
#[derive(Debug, Clone)]
pub struct EmpiricalMatrices {
    pub i_n: DMatrix<f64>,
    pub j_n: DMatrix<f64>,
    pub k_n: DMatrix<f64>,
}

pub fn empirical_matrices(
    model: &dyn ParametricModel,
    prior: &dyn Prior,
    training: &TrainingSet,
    beta: Beta,
    w: &[f64],
) -> EmpiricalMatrices {
    let d = model.dim();
    let n = training.n() as f64;
    let mut i_n = DMatrix::zeros(d, d);
    let mut j_n = DMatrix::zeros(d, d);
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    for &x in &training.samples {
        model.grad_w(x, w, &mut g);
        model.hess_w(x, w, &mut h);
        for a in 0..d {
            for b in 0..d {
                i_n[(a, b)] += g[a] * g[b] / n;
                j_n[(a, b)] -= h[a * d + b] / n;
            }
        }
    }
    let mut k_n = j_n.clone();
    if let Beta::Finite(b) = beta {
        prior.hess_log(w, &mut h);
        for a in 0..d {
            for c in 0..d {
                k_n[(a, c)] -= h[a * d + c] / (n * b);
            }
        }
    }
    EmpiricalMatrices { i_n, j_n, k_n }
}

/// Newton minimization of L_n at β (the MAP) and at β = ∞ (the MLE), both
/// started from `start`.
pub fn fit_estimators(
    model: &dyn ParametricModel,
    prior: &dyn Prior,
    training: &TrainingSet,
    beta: Beta,
    start: &[f64],
) -> Result<EstimatorPair> {
    let d = model.dim();
    if training.n() < d + 1 {
        return Err(EosError::InvalidInput(format!("need n >= d + 1 = {}, got {}", d + 1, training.n())));
    }
    let opts = NewtonOptions::default();
    let bounds = model.param_box();
    let mle = newton_minimize(
        |w| Ok(empirical_loss_derivatives(model, prior, training, Beta::Infinite, w)),
        start,
        bounds,
        &opts,
    )?;
    let map = if beta.is_infinite() {
        mle.clone()
    } else {
        newton_minimize(|w| Ok(empirical_loss_derivatives(model, prior, training, beta, w)), start, bounds, &opts)?
    };
    let (_, _, hessian_at_map) = empirical_loss_derivatives(model, prior, training, beta, &map.x);
    Ok(EstimatorPair { w_map: map.x, w_mle: mle.x, loss_at_map: map.value, hessian_at_map })
}

// ---------------------------------------------------------------------------
// Tempered posterior

/// First and second posterior moments around ŵ and w₀.
#[derive(Debug, Clone)]
pub struct PosteriorMoments {
    /// E_w[w − ŵ].
    pub mean_dev: Vec<f64>,
    /// E_w[(w − ŵ)(w − ŵ)ᵀ].
    pub cov_map: DMatrix<f64>,
    /// E_w[(w − w₀)(w − w₀)ᵀ].
    pub cov_w0: DMatrix<f64>,
    /// E_w[|w − ŵ|³].
    pub abs3: f64,
}

#[derive(Debug, Clone)]
pub struct TemperedPosterior<'a> {
    pub model: &'a dyn ParametricModel,
    pub prior: &'a dyn Prior,
    pub training: &'a TrainingSet,
    pub beta: Beta,
    pub backend: PosteriorBackend,
    pub estimators: EstimatorPair,
    draws: PosteriorDraws,
    /// log p(X_j|w_k), node-major, when the grid backend cached it.
    loglik: Option<Vec<f64>>,
}

impl<'a> TemperedPosterior<'a> {
    /// Fits the estimators from `start` and materializes the backend.
    pub fn new(
        model: &'a dyn ParametricModel,
        prior: &'a dyn Prior,
        training: &'a TrainingSet,
        beta: Beta,
        backend: PosteriorBackend,
        start: &[f64],
    ) -> Result<Self> {
        backend.validate()?;
        let estimators = fit_estimators(model, prior, training, beta, start)?;
        let mut post = Self {
            model,
            prior,
            training,
            beta,
            backend,
            draws: PosteriorDraws::point_mass(&estimators.w_mle),
            estimators,
            loglik: None,
        };
        if let Beta::Finite(b) = beta {
            match backend {
                PosteriorBackend::GridQuadrature(cfg) => post.build_grid(b, &cfg)?,
                PosteriorBackend::Metropolis(cfg) => post.build_metropolis(b, &cfg)?,
            }
        }
        Ok(post)
    }

    pub fn draws(&self) -> &PosteriorDraws {
        &self.draws
    }

    /// Cached log-likelihood table (node-major), if any.
    pub fn loglik_table(&self) -> Option<&[f64]> {
        self.loglik.as_deref()
    }

    /// Same posterior represented by a different point set (used for
    /// per-chain Monte Carlo error estimates).
    pub fn with_draws(&self, draws: PosteriorDraws) -> Self {
        Self { draws, loglik: None, ..self.clone() }
    }

    /// Laplace covariance K_n(ŵ)⁻¹/(nβ).
    pub fn laplace_covariance(&self, beta: f64) -> Result<DMatrix<f64>> {
        let nb = self.training.n() as f64 * beta;
        let inv = self
            .estimators
            .hessian_at_map
            .clone()
            .try_inverse()
            .ok_or_else(|| EosError::InvalidInput("K_n at the MAP is singular".into()))?;
        Ok(inv / nb)
    }

    fn log_target(&self, beta: f64, w: &[f64], buf: &mut [f64]) -> f64 {
        let lp = self.prior.log_density(w);
        if !lp.is_finite() || !self.model.in_box(w) {
            return f64::NEG_INFINITY;
        }
        self.model.log_density_batch(&self.training.samples, w, buf);
        beta * buf.iter().sum::<f64>() + lp
    }

    fn build_grid(&mut self, beta: f64, cfg: &GridConfig) -> Result<()> {
        let d = self.model.dim();
        let n = self.training.n();
        let cov = self.laplace_covariance(beta)?;
        let m = cfg.nodes_per_dim;

        // Per-axis nodes and Simpson weights.
        let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(d);
        for i in 0..d {
            let sd = cov[(i, i)].max(0.0).sqrt();
            let (blo, bhi) = self.model.param_box()[i];
            let centre = self.estimators.w_map[i];
            let lo = (centre - cfg.span_sd * sd).max(blo);
            let hi = (centre + cfg.span_sd * sd).min(bhi);
            if !(hi > lo) {
                return Err(EosError::InvalidInput("degenerate posterior grid".into()));
            }
            let h = (hi - lo) / (m - 1) as f64;
            let nodes: Vec<f64> = (0..m).map(|t| lo + h * t as f64).collect();
            let weights: Vec<f64> = (0..m)
                .map(|t| {
                    let c = if t == 0 || t == m - 1 {
                        1.0
                    } else if t % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    c * h / 3.0
                })
                .collect();
            axes.push((nodes, weights));
        }

        let total = m.pow(d as u32);
        let mut points = Vec::with_capacity(total * d);
        let mut log_w = Vec::with_capacity(total);
        let cache = n * total <= CACHE_LIMIT;
        let mut table = if cache { Vec::with_capacity(n * total) } else { Vec::new() };
        let mut col = vec![0.0; n];
        let mut w = vec![0.0; d];
        for k in 0..total {
            let mut rem = k;
            let mut lw = 0.0;
            for i in (0..d).rev() {
                let t = rem % m;
                rem /= m;
                w[i] = axes[i].0[t];
                lw += axes[i].1[t].ln();
            }
            let lt = self.log_target(beta, &w, &mut col);
            points.extend_from_slice(&w);
            log_w.push(lw + lt);
            if cache {
                table.extend_from_slice(&col);
            }
        }
        let weights = normalize_log_weights(&log_w);
        self.draws = PosteriorDraws { dim: d, points, weights, chains: 1, diagnostics: None };
        self.loglik = cache.then_some(table);
        Ok(())
    }

    fn build_metropolis(&mut self, beta: f64, cfg: &MetropolisConfig) -> Result<()> {
        let d = self.model.dim();
        let n = self.training.n();
        let cov = self.laplace_covariance(beta)?;
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| EosError::InvalidInput("Laplace covariance not positive definite".into()))?
            .l();
        let target = if d == 1 { 0.44 } else { 0.35 };
        let mut buf = vec![0.0; n];
        let mut points = Vec::with_capacity(cfg.chains * cfg.steps * d);
        let mut accepted_total = 0usize;
        let mut scale_sum = 0.0;

        for c in 0..cfg.chains {
            let mut rng = stream(chain_seed(self.training.seed, c));
            let draw_offset = |rng: &mut rand_chacha::ChaCha20Rng, s: f64| -> DVector<f64> {
                let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                &chol * z * s
            };
            // Overdispersed start so that R-hat is informative.
            let mut state: Vec<f64>;
            let mut lt;
            let mut tries = 0;
            loop {
                let off = draw_offset(&mut rng, 2.0);
                state = (0..d).map(|i| self.estimators.w_map[i] + off[i]).collect();
                lt = self.log_target(beta, &state, &mut buf);
                tries += 1;
                if lt.is_finite() || tries > 100 {
                    break;
                }
            }
            if !lt.is_finite() {
                state = self.estimators.w_map.clone();
                lt = self.log_target(beta, &state, &mut buf);
            }

            let mut scale = cfg.proposal_scale / (d as f64).sqrt();
            let mut batch_acc = 0usize;
            let mut batch_len = 0usize;
            let mut batch_idx = 0usize;
            let mut accepted = 0usize;
            for step in 0..cfg.burn_in + cfg.steps {
                let off = draw_offset(&mut rng, scale);
                let prop: Vec<f64> = (0..d).map(|i| state[i] + off[i]).collect();
                let lp = self.log_target(beta, &prop, &mut buf);
                let u: f64 = rng.random();
                let ok = lp.is_finite() && u.ln() < lp - lt;
                if ok {
                    state = prop;
                    lt = lp;
                }
                if step < cfg.burn_in {
                    batch_acc += ok as usize;
                    batch_len += 1;
                    if batch_len == 50 {
                        batch_idx += 1;
                        let rate = batch_acc as f64 / 50.0;
                        scale *= ((rate - target) / (batch_idx as f64).sqrt()).exp();
                        batch_acc = 0;
                        batch_len = 0;
                    }
                } else {
                    accepted += ok as usize;
                    points.extend_from_slice(&state);
                }
            }
            accepted_total += accepted;
            scale_sum += scale;
        }

        let count = cfg.chains * cfg.steps;
        let mut draws = PosteriorDraws {
            dim: d,
            points,
            weights: vec![1.0 / count as f64; count],
            chains: cfg.chains,
            diagnostics: None,
        };
        let max_r_hat = (0..d).map(|i| draws.r_hat(|w| w[i])).fold(1.0, f64::max);
        let acceptance_rate = accepted_total as f64 / count as f64;
        draws.diagnostics = Some(MetropolisDiagnostics {
            acceptance_rate,
            final_scale: scale_sum / cfg.chains as f64,
            max_r_hat,
            flagged: !(0.15..=0.6).contains(&acceptance_rate),
        });
        self.draws = draws;
        Ok(())
    }

    /// E_w[g(w)]. For Metropolis draws the chains must agree on g
    /// (R-hat ≤ 1.05).
    pub fn expectation<G: Fn(&[f64]) -> f64>(&self, g: G) -> Result<f64> {
        let draws = &self.draws;
        if draws.chains > 1 {
            let r_hat = draws.r_hat(&g);
            if !(r_hat <= 1.05) {
                return Err(EosError::BackendUnconverged { r_hat });
            }
        }
        Ok((0..draws.len()).map(|k| draws.weights[k] * g(draws.point(k))).sum())
    }

    pub fn moments(&self, w0: &[f64]) -> PosteriorMoments {
        let d = self.draws.dim;
        let map = &self.estimators.w_map;
        let mut mean_dev = vec![0.0; d];
        let mut cov_map = DMatrix::zeros(d, d);
        let mut cov_w0 = DMatrix::zeros(d, d);
        let mut abs3 = 0.0;
        for k in 0..self.draws.len() {
            let pw = self.draws.weights[k];
            if pw == 0.0 {
                continue;
            }
            let p = self.draws.point(k);
            let mut r2 = 0.0;
            for a in 0..d {
                let da = p[a] - map[a];
                mean_dev[a] += pw * da;
                r2 += da * da;
                for b in 0..d {
                    cov_map[(a, b)] += pw * da * (p[b] - map[b]);
                    cov_w0[(a, b)] += pw * (p[a] - w0[a]) * (p[b] - w0[b]);
                }
            }
            abs3 += pw * r2 * r2.sqrt();
        }
        PosteriorMoments { mean_dev, cov_map, cov_w0, abs3 }
    }
}

/// Free-function form of [`TemperedPosterior::expectation`].
pub fn posterior_expectation<G: Fn(&[f64]) -> f64>(posterior: &TemperedPosterior<'_>, g: G) -> Result<f64> {
    posterior.expectation(g)
}

/// exp-normalizes log weights; −∞ entries get weight zero.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{builtin_scenarios, GaussianLocation, TruncatedGaussianPrior};

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

    fn prior() -> TruncatedGaussianPrior {
        TruncatedGaussianPrior::new(0.0, 10.0, vec![(-20.0, 20.0)]).unwrap()
    }

    #[test]
    fn empirical_loss_examples() {
        let m = GaussianLocation::new();
        let p = prior();
        let one = TrainingSet::from_samples(vec![0.0]);
        assert!((empirical_loss(&m, &p, &one, Beta::Infinite, &[0.0]) - HALF_LN_2PI).abs() < 1e-14);
        let two = TrainingSet::from_samples(vec![-1.0, 1.0]);
        assert!((empirical_loss(&m, &p, &two, Beta::Infinite, &[0.0]) - (HALF_LN_2PI + 0.5)).abs() < 1e-14);
        for w in [-3.0, 0.0, 2.5] {
            let diff = empirical_loss(&m, &p, &two, Beta::Finite(1.0), &[w])
                - empirical_loss(&m, &p, &two, Beta::Infinite, &[w]);
            assert!((diff + p.log_density(&[w]) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn estimators_match_closed_forms() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-wide").unwrap();
        let ts = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 50, 11);
        let n = ts.n() as f64;
        let xbar = ts.samples.iter().sum::<f64>() / n;
        let est = fit_estimators(sc.model.as_ref(), sc.prior.as_ref(), &ts, Beta::Finite(1.0), &[0.0]).unwrap();
        assert!((est.w_mle[0] - xbar).abs() < 1e-12);
        assert!((est.w_map[0] - n * xbar / (n + 0.01)).abs() < 1e-12);
        let big = fit_estimators(sc.model.as_ref(), sc.prior.as_ref(), &ts, Beta::Finite(1e9), &[0.0]).unwrap();
        assert!((big.w_map[0] - est.w_mle[0]).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_tiny_n() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-scaleloc-laplace").unwrap();
        let ts = TrainingSet::from_samples(vec![0.1, 0.2]);
        let r = fit_estimators(sc.model.as_ref(), sc.prior.as_ref(), &ts, Beta::Finite(1.0), &[0.0, 0.0]);
        assert!(matches!(r, Err(EosError::InvalidInput(_))));
    }

    #[test]
    fn empirical_matrices_examples() {
        let m = GaussianLocation::new();
        let p = prior();
        let ts = TrainingSet::from_samples(vec![-1.0, 0.0, 1.0]);
        let em = empirical_matrices(&m, &p, &ts, Beta::Finite(1.0), &[0.0]);
        assert!((em.i_n[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(em.j_n[(0, 0)], 1.0);
        assert!((em.k_n[(0, 0)] - (1.0 + 1.0 / 300.0)).abs() < 1e-15);
    }

    #[test]
    fn grid_posterior_matches_conjugate_moments() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-wide").unwrap();
        let ts = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 40, 3);
        let n = ts.n() as f64;
        let xbar = ts.samples.iter().sum::<f64>() / n;
        let post = TemperedPosterior::new(
            sc.model.as_ref(),
            sc.prior.as_ref(),
            &ts,
            Beta::Finite(1.0),
            PosteriorBackend::default(),
            &[0.0],
        )
        .unwrap();
        let total: f64 = post.draws().weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((post.expectation(|_| 1.0).unwrap() - 1.0).abs() < 1e-14);
        let mean = post.expectation(|w| w[0]).unwrap();
        assert!((mean - n * xbar / (n + 0.01)).abs() < 1e-10);
        let var = post.expectation(|w| (w[0] - mean).powi(2)).unwrap();
        assert!((var - 1.0 / (n + 0.01)).abs() < 1e-10);
    }

    #[test]
    fn metropolis_runs_and_is_deterministic() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-wide").unwrap();
        let ts = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 60, 5);
        let backend = PosteriorBackend::Metropolis(MetropolisConfig {
            chains: 4,
            steps: 1500,
            burn_in: 500,
            proposal_scale: 2.4,
        });
        let build = || {
            TemperedPosterior::new(sc.model.as_ref(), sc.prior.as_ref(), &ts, Beta::Finite(1.0), backend, &[0.0])
                .unwrap()
        };
        let a = build();
        let b = build();
        assert_eq!(a.draws().points, b.draws().points);
        let diag = a.draws().diagnostics.unwrap();
        assert!(!diag.flagged, "acceptance {}", diag.acceptance_rate);
        assert!(diag.max_r_hat < 1.05);
        let mean = a.expectation(|w| w[0]).unwrap();
        let exact = a.estimators.w_map[0];
        assert!((mean - exact).abs() < 0.05);
    }

    #[test]
    fn unconverged_chains_are_reported() {
        // Two chains stuck on different values.
        let draws = PosteriorDraws {
            dim: 1,
            points: [vec![0.0; 50], vec![1.0; 50]]
                .concat()
                .iter()
                .enumerate()
                .map(|(i, v)| v + 1e-3 * (i % 7) as f64)
                .collect(),
            weights: vec![0.01; 100],
            chains: 2,
            diagnostics: None,
        };
        assert!(draws.r_hat(|w| w[0]) > 1.05);
        let s = builtin_scenarios();
        let sc = s.get("gauss-wide").unwrap();
        let ts = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 20, 1);
        let post = TemperedPosterior::new(
            sc.model.as_ref(),
            sc.prior.as_ref(),
            &ts,
            Beta::Finite(1.0),
            PosteriorBackend::default(),
            &[0.0],
        )
        .unwrap()
        .with_draws(draws);
        assert!(matches!(post.expectation(|w| w[0]), Err(EosError::BackendUnconverged { .. })));
    }

    #[test]
    fn infinite_beta_is_point_mass() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-wide").unwrap();
        let ts = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 30, 2);
        let post = TemperedPosterior::new(
            sc.model.as_ref(),
            sc.prior.as_ref(),
            &ts,
            Beta::Infinite,
            PosteriorBackend::default(),
            &[0.0],
        )
        .unwrap();
        assert_eq!(post.draws().len(), 1);
        assert_eq!(post.expectation(|w| w[0]).unwrap(), post.estimators.w_mle[0]);
        let mom = post.moments(&[0.0]);
        assert_eq!(mom.cov_map[(0, 0)], 0.0);
        assert_eq!(mom.abs3, 0.0);
    }

    #[test]
    fn training_set_regenerates_bit_for_bit() {
        let s = builtin_scenarios();
        let sc = s.get("gauss-scaleloc-laplace").unwrap();
        let a = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 25, 77);
        let b = TrainingSet::generate(sc.truth.as_ref(), &sc.id, 25, 77);
        assert_eq!(a, b);
        assert_eq!(a.n(), 25);
    }
}
