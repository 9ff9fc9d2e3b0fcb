//! Population quantities: the log loss L(w), its minimizer w₀, the matrices
//! I and J at w₀, and the constants S, λ, ν, μ and TIC built from them.
//!
//! Every E_X here is a deterministic adaptive quadrature against the true
//! density, so all constants are reproducible to quadrature precision.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::model_zoo::{ParametricModel, Scenario, TrueDistribution, REGULARITY_EIGEN_FLOOR};
use crate::optim::{newton_minimize, Evaluation, NewtonOptions};
use crate::quadrature::{integrate_vec, QuadratureOptions};

/// Number of extra deterministic starts used to confirm that w₀ is unique.
pub const MULTI_STARTS: usize = 8;

fn geometry_quadrature() -> QuadratureOptions {
    QuadratureOptions { abs_tol: 1e-12, rel_tol: 1e-13, ..Default::default() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalPoint {
    pub w0: Vec<f64>,
    /// L(w₀) in nats.
    pub loss_at_w0: f64,
    pub grad_norm: f64,
    pub newton_iterations: usize,
}

/// I(w₀), J(w₀) and Q = I − J.
#[derive(Debug, Clone)]
pub struct InformationPair {
    pub i: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl InformationPair {
    pub fn new(i: DMatrix<f64>, j: DMatrix<f64>) -> Self {
        let q = &i - &j;
        Self { i, j, q }
    }

    pub fn dim(&self) -> usize {
        self.i.nrows()
    }

    pub fn j_inverse(&self) -> Result<DMatrix<f64>> {
        self.j.clone().try_inverse().ok_or(EosError::SingularJ)
    }

    /// J⁻¹ I J⁻¹, the asymptotic covariance of √n(ŵ − w₀).
    pub fn sandwich(&self) -> Result<DMatrix<f64>> {
        let ji = self.j_inverse()?;
        Ok(&ji * &self.i * &ji)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    #[serde(rename = "S")]
    pub s: f64,
    pub lambda: f64,
    pub nu: f64,
    pub mu: f64,
    pub tic: f64,
    pub d: usize,
}

impl AsymptoticConstants {
    /// Predicted E[B_g] to order 1/n.
    pub fn bayes_generalization(&self, n: usize, inv_beta: f64) -> f64 {
        let n = n as f64;
        self.s + (self.lambda - self.nu) * inv_beta / n + self.nu / n
    }

    pub fn bayes_training(&self, n: usize, inv_beta: f64) -> f64 {
        let n = n as f64;
        self.s + (self.lambda - self.nu) * inv_beta / n - self.nu / n
    }

    pub fn gibbs_generalization(&self, n: usize, inv_beta: f64) -> f64 {
        let n = n as f64;
        self.s + self.lambda * inv_beta / n + self.nu / n
    }

    pub fn gibbs_training(&self, n: usize, inv_beta: f64) -> f64 {
        let n = n as f64;
        self.s + self.lambda * inv_beta / n - self.nu / n
    }

    /// Leading term of E[βV].
    pub fn beta_functional_variance(&self) -> f64 {
        2.0 * self.nu
    }
}

fn check_box(model: &dyn ParametricModel, w: &[f64]) -> Result<()> {
    if w.len() != model.dim() {
        return Err(EosError::InvalidInput(format!("parameter has length {}, model needs {}", w.len(), model.dim())));
    }
    if !model.in_box(w) {
        return Err(EosError::InvalidInput(format!("parameter {w:?} outside the model's box")));
    }
    Ok(())
}

/// L(w) = −∫ q(x) log p(x|w) dx.
pub fn log_loss(model: &dyn ParametricModel, truth: &dyn TrueDistribution, w: &[f64]) -> Result<f64> {
    check_box(model, w)?;
    let opts = QuadratureOptions { abs_tol: 1e-10, rel_tol: 1e-13, ..Default::default() };
    let est = integrate_vec(1, &truth.breakpoints(), &opts, |x, out| {
        out[0] = -truth.density(x) * model.log_density(x, w);
    })?;
    Ok(est.value[0])
}

/// L(w), ∇L(w) and ∇²L(w) from a single vector quadrature.
pub fn loss_derivatives(model: &dyn ParametricModel, truth: &dyn TrueDistribution, w: &[f64]) -> Result<Evaluation> {
    let d = model.dim();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let est = integrate_vec(1 + d + d * d, &truth.breakpoints(), &geometry_quadrature(), |x, out| {
        let q = truth.density(x);
        out[0] = -q * model.log_density(x, w);
        model.grad_w(x, w, &mut g);
        model.hess_w(x, w, &mut h);
        for k in 0..d {
            out[1 + k] = -q * g[k];
        }
        for k in 0..d * d {
            out[1 + d + k] = -q * h[k];
        }
    })?;
    let v = est.value;
    Ok((v[0], v[1..1 + d].to_vec(), DMatrix::from_row_slice(d, d, &v[1 + d..])))
}

/// Deterministic start points spread over the inner half of the box
/// (van der Corput sequences in successive prime bases).
pub fn multistart_points(model: &dyn ParametricModel, count: usize) -> Vec<Vec<f64>> {
    const BASES: [u32; 4] = [2, 3, 5, 7];
    let radical_inverse = |mut i: u32, base: u32| {
        let mut inv = 1.0 / base as f64;
        let mut r = 0.0;
        while i > 0 {
            r += (i % base) as f64 * inv;
            i /= base;
            inv /= base as f64;
        }
        r
    };
    (1..=count as u32)
        .map(|i| {
            model
                .param_box()
                .iter()
                .enumerate()
                .map(|(k, &(lo, hi))| {
                    let u = radical_inverse(i, BASES[k % BASES.len()]);
                    let quarter = 0.25 * (hi - lo);
                    lo + quarter + u * 2.0 * quarter
                })
                .collect()
        })
        .collect()
}

/// Newton minimization of L from `init`, confirmed by [`MULTI_STARTS`]
/// further starts that must land on the same point.
pub fn find_optimal_parameter(
    model: &dyn ParametricModel,
    truth: &dyn TrueDistribution,
    init: &[f64],
) -> Result<OptimalPoint> {
    check_box(model, init)?;
    let opts = NewtonOptions::default();
    let eval = |w: &[f64]| loss_derivatives(model, truth, w);
    let best = newton_minimize(eval, init, model.param_box(), &opts)?;

    for start in multistart_points(model, MULTI_STARTS) {
        let other = newton_minimize(eval, &start, model.param_box(), &opts)?;
        let distance = best.x.iter().zip(&other.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if distance > 1e-4 {
            return Err(EosError::MultipleMinima { distance });
        }
    }

    Ok(OptimalPoint {
        w0: best.x,
        loss_at_w0: best.value,
        grad_norm: best.grad_norm,
        newton_iterations: best.iterations,
    })
}

/// I = E_X[∇log p ∇log pᵀ] and J = −E_X[∇² log p] at w₀.
pub fn information_matrices(
    model: &dyn ParametricModel,
    truth: &dyn TrueDistribution,
    w0: &[f64],
) -> Result<InformationPair> {
    check_box(model, w0)?;
    let d = model.dim();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let est = integrate_vec(2 * d * d, &truth.breakpoints(), &geometry_quadrature(), |x, out| {
        let q = truth.density(x);
        model.grad_w(x, w0, &mut g);
        model.hess_w(x, w0, &mut h);
        for a in 0..d {
            for b in 0..d {
                out[a * d + b] = q * g[a] * g[b];
                out[d * d + a * d + b] = -q * h[a * d + b];
            }
        }
    })?;
    let i = symmetrize(DMatrix::from_row_slice(d, d, &est.value[..d * d]));
    let j = symmetrize(DMatrix::from_row_slice(d, d, &est.value[d * d..]));
    Ok(InformationPair::new(i, j))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// S = L(w₀), λ = d/2, ν = tr(IJ⁻¹)/2, μ = tr(IJ⁻¹IJ⁻¹)/2, TIC = tr(IJ⁻¹).
pub fn asymptotic_constants(optimal: &OptimalPoint, pair: &InformationPair) -> Result<AsymptoticConstants> {
    let d = pair.dim();
    let min_eig = pair.j.clone().symmetric_eigenvalues().min();
    if !(min_eig > REGULARITY_EIGEN_FLOOR) {
        return Err(EosError::SingularJ);
    }
    let ij = &pair.i * pair.j_inverse()?;
    let tic = ij.trace();
    let mu = 0.5 * (&ij * &ij).trace();
    Ok(AsymptoticConstants { s: optimal.loss_at_w0, lambda: d as f64 / 2.0, nu: tic / 2.0, mu, tic, d })
}

/// Everything loss_geometry knows about a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioGeometry {
    pub optimal: OptimalPoint,
    pub pair: InformationPair,
    pub constants: AsymptoticConstants,
}

pub fn analyze(scenario: &Scenario) -> Result<ScenarioGeometry> {
    let model = scenario.model.as_ref();
    let truth = scenario.truth.as_ref();
    let init = vec![0.0; model.dim()];
    let optimal = find_optimal_parameter(model, truth, &init)?;
    let pair = information_matrices(model, truth, &optimal.w0)?;
    let constants = asymptotic_constants(&optimal, &pair)?;
    Ok(ScenarioGeometry { optimal, pair, constants })
}
