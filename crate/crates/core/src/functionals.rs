//! Per-replication functionals: Bayes and Gibbs losses, functional variance,
//! WAIC, empirical TIC and the six D-terms.
//!
//! Everything is computed from the posterior's weighted point set in two
//! passes: a training pass over the n samples and a generalization pass that
//! integrates over x against the true density.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{EosError, Result};
use crate::model_zoo::{ParametricModel, TrueDistribution};
use crate::posterior::{TemperedPosterior, TrainingSet};
use crate::quadrature::{integrate_vec, QuadratureOptions};

/// Absolute quadrature tolerance for the generalization pass.
pub const GENERALIZATION_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub n: usize,
    pub beta: Beta,
    pub seed: u64,
    pub b_g: f64,
    pub b_t: f64,
    pub g_g: f64,
    pub g_t: f64,
    pub v: f64,
    pub waic: f64,
    pub tic_n: f64,
    pub w_map: Vec<f64>,
    pub w_mle: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DTerms {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
}

impl DTerms {
    pub fn as_array(&self) -> [f64; 6] {
        [self.d1, self.d2, self.d3, self.d4, self.d5, self.d6]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { d1: a[0], d2: a[1], d3: a[2], d4: a[3], d5: a[4], d6: a[5] }
    }
}

/// Averages over the n training points.
#[derive(Debug, Clone, Copy)]
pub struct TrainingPass {
    pub b_t: f64,
    pub g_t: f64,
    pub v: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
    /// −(1/n) Σ log p(X_j|w₀).
    pub s_emp: f64,
}

/// Integrals against the true density.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizationPass {
    pub b_g: f64,
    pub g_g: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Largest component error estimate of the quadrature.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct FunctionalReport {
    pub losses: LossReport,
    pub d_terms: DTerms,
    pub s_emp: f64,
    pub quadrature_error: f64,
}

/// Weighted point set with zero-weight points dropped.
struct Support<'p> {
    idx: Vec<usize>,
    weights: Vec<f64>,
    post: &'p TemperedPosterior<'p>,
}

impl<'p> Support<'p> {
    fn new(post: &'p TemperedPosterior<'p>) -> Self {
        let draws = post.draws();
        let idx: Vec<usize> = (0..draws.len()).filter(|&k| draws.weights[k] > 0.0).collect();
        let weights = idx.iter().map(|&k| draws.weights[k]).collect();
        Self { idx, weights, post }
    }

    /// Calls `f(weight, column)` with log p(X_j|w_k) for every kept point.
    fn for_each_column<F: FnMut(f64, &[f64])>(&self, col: &mut Vec<f64>, mut f: F) {
        let n = self.post.training.n();
        let draws = self.post.draws();
        match self.post.loglik_table() {
            Some(table) => {
                for (&k, &pw) in self.idx.iter().zip(&self.weights) {
                    f(pw, &table[k * n..(k + 1) * n]);
                }
            }
            None => {
                col.resize(n, 0.0);
                for (&k, &pw) in self.idx.iter().zip(&self.weights) {
                    self.post.model.log_density_batch(&self.post.training.samples, draws.point(k), col);
                    f(pw, col);
                }
            }
        }
    }
}

/// Training-sample averages. Variances use the two-pass form.
pub fn training_pass(posterior: &TemperedPosterior<'_>, w0: &[f64]) -> TrainingPass {
    let model = posterior.model;
    let samples = &posterior.training.samples;
    let n = samples.len();
    let support = Support::new(posterior);
    let mut col = Vec::new();

    let mut mean = vec![0.0; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    support.for_each_column(&mut col, |pw, ell| {
        for j in 0..n {
            mean[j] += pw * ell[j];
            max[j] = max[j].max(ell[j]);
        }
    });
    let mut sum_exp = vec![0.0; n];
    let mut var = vec![0.0; n];
    support.for_each_column(&mut col, |pw, ell| {
        for j in 0..n {
            sum_exp[j] += pw * (ell[j] - max[j]).exp();
            let dev = ell[j] - mean[j];
            var[j] += pw * dev * dev;
        }
    });

    let nf = n as f64;
    let (mut b_t, mut g_t, mut v, mut d4, mut d5, mut d6, mut s_emp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..n {
        let lse = max[j] + sum_exp[j].ln();
        let ell0 = model.log_density(samples[j], w0);
        let ef = ell0 - mean[j];
        b_t -= lse;
        g_t -= mean[j];
        v += var[j];
        d4 += ef;
        // E_w[f²] = Var_w[f] + (E_w f)².
        d5 += 0.5 * (var[j] + ef * ef);
        d6 += 0.5 * ef * ef;
        s_emp -= ell0;
    }
    TrainingPass { b_t: b_t / nf, g_t: g_t / nf, v, d4: d4 / nf, d5: d5 / nf, d6: d6 / nf, s_emp: s_emp / nf }
}

/// E_X integrals of −log E_w p, −E_w log p and the f-moments.
pub fn generalization_pass(
    posterior: &TemperedPosterior<'_>,
    truth: &dyn TrueDistribution,
    w0: &[f64],
) -> Result<GeneralizationPass> {
    let model = posterior.model;
    let draws = posterior.draws();
    let support = Support::new(posterior);
    let points: Vec<&[f64]> = support.idx.iter().map(|&k| draws.point(k)).collect();
    let mut ell = vec![0.0; points.len()];
    let opts = QuadratureOptions::default().with_abs_tol(GENERALIZATION_ABS_TOL);

    let est = integrate_vec(5, &truth.breakpoints(), &opts, |x, out| {
        let q = truth.density(x);
        if q == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let mut mean = 0.0;
        let mut max = f64::NEG_INFINITY;
        for (e, w) in ell.iter_mut().zip(&points) {
            *e = model.log_density(x, w);
            max = max.max(*e);
        }
        for (e, pw) in ell.iter().zip(&support.weights) {
            mean += pw * e;
        }
        let ell0 = model.log_density(x, w0);
        let mut sum_exp = 0.0;
        let mut var = 0.0;
        for (e, pw) in ell.iter().zip(&support.weights) {
            sum_exp += pw * (e - max).exp();
            let dev = e - mean;
            var += pw * dev * dev;
        }
        let ef = ell0 - mean;
        out[0] = -q * (max + sum_exp.ln());
        out[1] = -q * mean;
        out[2] = q * ef;
        out[3] = 0.5 * q * (var + ef * ef);
        out[4] = 0.5 * q * ef * ef;
    })?;
    let error = est.error.iter().cloned().fold(0.0, f64::max);
    let v = est.value;
    Ok(GeneralizationPass { b_g: v[0], g_g: v[1], d1: v[2], d2: v[3], d3: v[4], error })
}

/// (B_g, B_t).
pub fn bayes_losses(posterior: &TemperedPosterior<'_>, truth: &dyn TrueDistribution) -> Result<(f64, f64)> {
    let w = posterior.estimators.w_map.clone();
    let gen = generalization_pass(posterior, truth, &w)?;
    Ok((gen.b_g, training_pass(posterior, &w).b_t))
}

/// (G_g, G_t).
pub fn gibbs_losses(posterior: &TemperedPosterior<'_>, truth: &dyn TrueDistribution) -> Result<(f64, f64)> {
    let w = posterior.estimators.w_map.clone();
    let gen = generalization_pass(posterior, truth, &w)?;
    Ok((gen.g_g, training_pass(posterior, &w).g_t))
}

/// V = Σ_j Var_w[log p(X_j|w)].
pub fn functional_variance(posterior: &TemperedPosterior<'_>) -> f64 {
    training_pass(posterior, &posterior.estimators.w_map).v
}

/// n·B_t + β·V. At β = ∞ the penalty is its limit, the empirical TIC.
pub fn waic(posterior: &TemperedPosterior<'_>) -> Result<f64> {
    let tp = training_pass(posterior, &posterior.estimators.w_map);
    waic_from_parts(posterior.training.n(), posterior.beta, tp.b_t, tp.v, || {
        tic_empirical(posterior.model, posterior.training, &posterior.estimators.w_mle)
    })
}

fn waic_from_parts<F: FnOnce() -> Result<f64>>(n: usize, beta: Beta, b_t: f64, v: f64, tic: F) -> Result<f64> {
    let penalty = match beta {
        Beta::Finite(b) => b * v,
        Beta::Infinite => tic()?,
    };
    Ok(n as f64 * b_t + penalty)
}

/// tr(I_n J_n⁻¹) at `w`.
pub fn tic_empirical(model: &dyn ParametricModel, training: &TrainingSet, w: &[f64]) -> Result<f64> {
    let d = model.dim();
    let n = training.n() as f64;
    let mut i_n = DMatrix::<f64>::zeros(d, d);
    let mut j_n = DMatrix::<f64>::zeros(d, d);
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
    let min_eig = j_n.clone().symmetric_eigenvalues().min();
    if !(min_eig > 1e-12) {
        return Err(EosError::SingularJn);
    }
    let j_inv = j_n.try_inverse().ok_or(EosError::SingularJn)?;
    let product: DMatrix<f64> = i_n * j_inv;
    Ok(product.trace())
}

/// D₁…D₆ for f(x, w) = log p(x|w₀) − log p(x|w).
pub fn d_terms(posterior: &TemperedPosterior<'_>, truth: &dyn TrueDistribution, w0: &[f64]) -> Result<DTerms> {
    let gen = generalization_pass(posterior, truth, w0)?;
    let tp = training_pass(posterior, w0);
    Ok(DTerms { d1: gen.d1, d2: gen.d2, d3: gen.d3, d4: tp.d4, d5: tp.d5, d6: tp.d6 })
}

/// Every functional for one posterior in a single training and a single
/// generalization pass.
pub fn evaluate(
    posterior: &TemperedPosterior<'_>,
    truth: &dyn TrueDistribution,
    w0: &[f64],
) -> Result<FunctionalReport> {
    let tp = training_pass(posterior, w0);
    let gen = generalization_pass(posterior, truth, w0)?;
    let n = posterior.training.n();
    let tic_n = tic_empirical(posterior.model, posterior.training, &posterior.estimators.w_mle)?;
    let waic = waic_from_parts(n, posterior.beta, tp.b_t, tp.v, || Ok(tic_n))?;
    let losses = LossReport {
        n,
        beta: posterior.beta,
        seed: posterior.training.seed,
        b_g: gen.b_g,
        b_t: tp.b_t,
        g_g: gen.g_g,
        g_t: tp.g_t,
        v: tp.v,
        waic,
        tic_n,
        w_map: posterior.estimators.w_map.clone(),
        w_mle: posterior.estimators.w_mle.clone(),
    };
    let d_terms = DTerms { d1: gen.d1, d2: gen.d2, d3: gen.d3, d4: tp.d4, d5: tp.d5, d6: tp.d6 };
    Ok(FunctionalReport { losses, d_terms, s_emp: tp.s_emp, quadrature_error: gen.error })
}
