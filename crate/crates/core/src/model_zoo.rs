//! Parametric models, true densities and priors used by the experiments.
//!
//! Data are scalar. Parameters live in a finite box, which bounds every
//! optimizer start and every posterior grid.

use std::f64::consts::PI;
use std::fmt::{self, Debug};
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EosError, Result};
use crate::loss_geometry;
use crate::quadrature::{integrate, QuadratureOptions};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Default half-width of the parameter box.
pub const DEFAULT_BOX: f64 = 20.0;

/// A learning machine p(x|w) with analytic derivatives in w.
pub trait ParametricModel: Send + Sync + Debug {
    fn id(&self) -> &str;

    /// Parameter dimension d.
    fn dim(&self) -> usize;

    fn log_density(&self, x: f64, w: &[f64]) -> f64;

    /// ∇_w log p(x|w), written into `out` (length d).
    fn grad_w(&self, x: f64, w: &[f64], out: &mut [f64]);

    /// ∇²_w log p(x|w), row-major into `out` (length d·d).
    fn hess_w(&self, x: f64, w: &[f64], out: &mut [f64]);

    fn param_box(&self) -> &[(f64, f64)];

    /// log p(x_j|w) for every x_j.
    fn log_density_batch(&self, xs: &[f64], w: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = self.log_density(x, w);
        }
    }

    fn in_box(&self, w: &[f64]) -> bool {
        w.iter().zip(self.param_box()).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

/// A true density q(x) that can be sampled and integrated against.
pub trait TrueDistribution: Send + Sync + Debug {
    fn id(&self) -> &str;
    fn density(&self, x: f64) -> f64;
    fn log_density(&self, x: f64) -> f64;
    fn sample(&self, rng: &mut dyn RngCore, count: usize) -> Vec<f64>;

    /// Finite interval carrying all but a negligible tail of the mass.
    fn support(&self) -> (f64, f64);

    /// Points where the density is not smooth, strictly inside the support.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Analytic (mean, variance) when known.
    fn moments(&self) -> Option<(f64, f64)>;

    /// Support endpoints with the kinks in between: the initial panels for
    /// every E_X quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = self.support();
        let mut pts = vec![a];
        pts.extend(self.kinks().into_iter().filter(|k| *k > a && *k < b));
        pts.push(b);
        pts
    }
}

/// A prior density φ(w) with derivatives of its log.
pub trait Prior: Send + Sync + Debug {
    fn log_density(&self, w: &[f64]) -> f64;
    fn grad_log(&self, w: &[f64], out: &mut [f64]);
    /// Row-major Hessian of log φ.
    fn hess_log(&self, w: &[f64], out: &mut [f64]);
    fn is_proper(&self) -> bool;
}

// ---------------------------------------------------------------------------
// Models

fn default_box(d: usize) -> Vec<(f64, f64)> {
    vec![(-DEFAULT_BOX, DEFAULT_BOX); d]
}

/// N(w, 1).
#[derive(Debug, Clone)]
pub struct GaussianLocation {
    bounds: Vec<(f64, f64)>,
}

impl GaussianLocation {
    pub fn new() -> Self {
        Self { bounds: default_box(1) }
    }
}

impl Default for GaussianLocation {
    fn default() -> Self {
        Self::new()
    }
}

impl ParametricModel for GaussianLocation {
    fn id(&self) -> &str {
        "gauss-location"
    }
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, x: f64, w: &[f64]) -> f64 {
        let r = x - w[0];
        -HALF_LN_2PI - 0.5 * r * r
    }
    fn grad_w(&self, x: f64, w: &[f64], out: &mut [f64]) {
        out[0] = x - w[0];
    }
    fn hess_w(&self, _x: f64, _w: &[f64], out: &mut [f64]) {
        out[0] = -1.0;
    }
    fn param_box(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn log_density_batch(&self, xs: &[f64], w: &[f64], out: &mut [f64]) {
        let m = w[0];
        for (o, &x) in out.iter_mut().zip(xs) {
            let r = x - m;
            *o = -HALF_LN_2PI - 0.5 * r * r;
        }
    }
}

/// N(0, exp(w)²): w is the log standard deviation.
#[derive(Debug, Clone)]
pub struct GaussianScale {
    bounds: Vec<(f64, f64)>,
}

impl GaussianScale {
    pub fn new() -> Self {
        Self { bounds: default_box(1) }
    }
}

impl Default for GaussianScale {
    fn default() -> Self {
        Self::new()
    }
}

impl ParametricModel for GaussianScale {
    fn id(&self) -> &str {
        "gauss-scale"
    }
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, x: f64, w: &[f64]) -> f64 {
        -HALF_LN_2PI - w[0] - 0.5 * x * x * (-2.0 * w[0]).exp()
    }
    fn grad_w(&self, x: f64, w: &[f64], out: &mut [f64]) {
        out[0] = -1.0 + x * x * (-2.0 * w[0]).exp();
    }
    fn hess_w(&self, x: f64, w: &[f64], out: &mut [f64]) {
        out[0] = -2.0 * x * x * (-2.0 * w[0]).exp();
    }
    fn param_box(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn log_density_batch(&self, xs: &[f64], w: &[f64], out: &mut [f64]) {
        let prec = (-2.0 * w[0]).exp();
        let c = -HALF_LN_2PI - w[0];
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = c - 0.5 * x * x * prec;
        }
    }
}

/// N(w₁, exp(w₂)²).
#[derive(Debug, Clone)]
pub struct GaussianLocationScale {
    bounds: Vec<(f64, f64)>,
}

impl GaussianLocationScale {
    pub fn new() -> Self {
        Self { bounds: default_box(2) }
    }
}

impl Default for GaussianLocationScale {
    fn default() -> Self {
        Self::new()
    }
}

impl ParametricModel for GaussianLocationScale {
    fn id(&self) -> &str {
        "gauss-location-scale"
    }
    fn dim(&self) -> usize {
        2
    }
    fn log_density(&self, x: f64, w: &[f64]) -> f64 {
        let r = x - w[0];
        -HALF_LN_2PI - w[1] - 0.5 * r * r * (-2.0 * w[1]).exp()
    }
    fn grad_w(&self, x: f64, w: &[f64], out: &mut [f64]) {
        let r = x - w[0];
        let prec = (-2.0 * w[1]).exp();
        out[0] = r * prec;
        out[1] = -1.0 + r * r * prec;
    }
    fn hess_w(&self, x: f64, w: &[f64], out: &mut [f64]) {
        let r = x - w[0];
        let prec = (-2.0 * w[1]).exp();
        out[0] = -prec;
        out[1] = -2.0 * r * prec;
        out[2] = out[1];
        out[3] = -2.0 * r * r * prec;
    }
    fn param_box(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn log_density_batch(&self, xs: &[f64], w: &[f64], out: &mut [f64]) {
        let prec = (-2.0 * w[1]).exp();
        let c = -HALF_LN_2PI - w[1];
        for (o, &x) in out.iter_mut().zip(xs) {
            let r = x - w[0];
            *o = c - 0.5 * r * r * prec;
        }
    }
}

// ---------------------------------------------------------------------------
// True distributions

/// N(mean, variance).
#[derive(Debug, Clone)]
pub struct GaussianTruth {
    id: String,
    mean: f64,
    variance: f64,
}

impl GaussianTruth {
    pub fn new(mean: f64, variance: f64) -> Self {
        assert!(variance > 0.0, "variance must be positive");
        Self { id: format!("normal({mean},{variance})"), mean, variance }
    }
}

impl TrueDistribution for GaussianTruth {
    fn id(&self) -> &str {
        &self.id
    }
    fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }
    fn log_density(&self, x: f64) -> f64 {
        let r = x - self.mean;
        -HALF_LN_2PI - 0.5 * self.variance.ln() - 0.5 * r * r / self.variance
    }
    fn sample(&self, rng: &mut dyn RngCore, count: usize) -> Vec<f64> {
        let sd = self.variance.sqrt();
        (0..count)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.mean + sd * z
            })
            .collect()
    }
    fn support(&self) -> (f64, f64) {
        let half = 16.0 * self.variance.sqrt();
        (self.mean - half, self.mean + half)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.mean]
    }
    fn moments(&self) -> Option<(f64, f64)> {
        Some((self.mean, self.variance))
    }
}

/// Laplace(location, scale).
#[derive(Debug, Clone)]
pub struct LaplaceTruth {
    id: String,
    location: f64,
    scale: f64,
}

impl LaplaceTruth {
    pub fn new(location: f64, scale: f64) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        Self { id: format!("laplace({location},{scale})"), location, scale }
    }
}

impl TrueDistribution for LaplaceTruth {
    fn id(&self) -> &str {
        &self.id
    }
    fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }
    fn log_density(&self, x: f64) -> f64 {
        -(2.0 * self.scale).ln() - (x - self.location).abs() / self.scale
    }
    fn sample(&self, rng: &mut dyn RngCore, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                self.location - self.scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect()
    }
    fn support(&self) -> (f64, f64) {
        let half = 50.0 * self.scale;
        (self.location - half, self.location + half)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.location]
    }
    fn moments(&self) -> Option<(f64, f64)> {
        Some((self.location, 2.0 * self.scale * self.scale))
    }
}

// ---------------------------------------------------------------------------
// Priors

/// Independent N(mean, sd²) per coordinate, truncated to a box and
/// renormalized there.
#[derive(Debug, Clone)]
pub struct TruncatedGaussianPrior {
    mean: f64,
    sd: f64,
    bounds: Vec<(f64, f64)>,
    log_norm: f64,
}

impl TruncatedGaussianPrior {
    pub fn new(mean: f64, sd: f64, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let opts = QuadratureOptions::default();
        let mut log_norm = 0.0;
        for &(lo, hi) in &bounds {
            let (mass, _) = integrate(&[lo, hi], &opts, |w| {
                let z = (w - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            })?;
            log_norm += mass.ln();
        }
        Ok(Self { mean, sd, bounds, log_norm })
    }

    /// The catalog default: N(0, 10²) per coordinate on the model's box.
    pub fn broad(model: &dyn ParametricModel) -> Result<Self> {
        Self::new(0.0, 10.0, model.param_box().to_vec())
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

impl Prior for TruncatedGaussianPrior {
    fn log_density(&self, w: &[f64]) -> f64 {
        let mut lp = -self.log_norm;
        for (v, &(lo, hi)) in w.iter().zip(&self.bounds) {
            if *v < lo || *v > hi {
                return f64::NEG_INFINITY;
            }
            let z = (v - self.mean) / self.sd;
            lp += -HALF_LN_2PI - self.sd.ln() - 0.5 * z * z;
        }
        lp
    }
    fn grad_log(&self, w: &[f64], out: &mut [f64]) {
        let prec = 1.0 / (self.sd * self.sd);
        for (o, v) in out.iter_mut().zip(w) {
            *o = -(v - self.mean) * prec;
        }
    }
    fn hess_log(&self, w: &[f64], out: &mut [f64]) {
        let d = w.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let prec = 1.0 / (self.sd * self.sd);
        for i in 0..d {
            out[i * d + i] = -prec;
        }
    }
    fn is_proper(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Scenarios

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    ParametrizableRegular,
    NonparametrizableRegular,
}

impl fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioTag::ParametrizableRegular => "parametrizable_regular",
            ScenarioTag::NonparametrizableRegular => "nonparametrizable_regular",
        })
    }
}

/// A (model, true distribution, prior) triple with its regularity tag.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub tag: ScenarioTag,
    pub model: Arc<dyn ParametricModel>,
    pub truth: Arc<dyn TrueDistribution>,
    pub prior: Arc<dyn Prior>,
}

impl Scenario {
    pub fn new(
        id: &str,
        tag: ScenarioTag,
        model: Arc<dyn ParametricModel>,
        truth: Arc<dyn TrueDistribution>,
    ) -> Result<Self> {
        let prior = Arc::new(TruncatedGaussianPrior::broad(model.as_ref())?);
        Ok(Self { id: id.to_string(), tag, model, truth, prior })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioCatalog {
    scenarios: Vec<Scenario>,
}

impl ScenarioCatalog {
    pub fn get(&self, id: &str) -> Result<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id).ok_or_else(|| EosError::UnknownScenario(id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scenario> {
        self.scenarios.iter()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// The built-in scenarios. Ids are stable: they appear in config files and
/// CSV output.
pub fn builtin_scenarios() -> ScenarioCatalog {
    use ScenarioTag::*;
    let loc: Arc<dyn ParametricModel> = Arc::new(GaussianLocation::new());
    let entries: Vec<(&str, ScenarioTag, Arc<dyn ParametricModel>, Arc<dyn TrueDistribution>)> = vec![
        ("gauss-match", ParametrizableRegular, loc.clone(), Arc::new(GaussianTruth::new(0.0, 1.0))),
        ("gauss-wide", NonparametrizableRegular, loc.clone(), Arc::new(GaussianTruth::new(0.0, 2.0))),
        ("gauss-narrow", NonparametrizableRegular, loc, Arc::new(GaussianTruth::new(0.0, 0.5))),
        (
            "gauss-scaleloc-laplace",
            NonparametrizableRegular,
            Arc::new(GaussianLocationScale::new()),
            Arc::new(LaplaceTruth::new(0.0, 1.0)),
        ),
        (
            "gauss-scale-laplace",
            NonparametrizableRegular,
            Arc::new(GaussianScale::new()),
            Arc::new(LaplaceTruth::new(0.0, 1.0)),
        ),
    ];
    let scenarios = entries
        .into_iter()
        .map(|(id, tag, model, truth)| Scenario::new(id, tag, model, truth).expect("builtin prior normalizes"))
        .collect();
    ScenarioCatalog { scenarios }
}

/// Differential entropy S₀ = −∫ q log q.
pub fn entropy(truth: &dyn TrueDistribution) -> Result<f64> {
    let opts = QuadratureOptions::default();
    let (v, _) = integrate(&truth.breakpoints(), &opts, |x| {
        let lq = truth.log_density(x);
        if lq == f64::NEG_INFINITY {
            0.0
        } else {
            -lq.exp() * lq
        }
    })?;
    Ok(v)
}

/// Smallest eigenvalue below which J(w₀) counts as singular.
pub const REGULARITY_EIGEN_FLOOR: f64 = 1e-8;

/// Tags a (model, truth) pair from the misspecification gap L(w₀) − S₀ and
/// the definiteness of J(w₀). The prior plays no role.
pub fn classify_scenario(model: &dyn ParametricModel, truth: &dyn TrueDistribution, tol: f64) -> Result<ScenarioTag> {
    let init = vec![0.0; model.dim()];
    let optimal = loss_geometry::find_optimal_parameter(model, truth, &init)?;
    let pair = loss_geometry::information_matrices(model, truth, &optimal.w0)?;
    let min_eig = pair.j.clone().symmetric_eigenvalues().min();
    if !(min_eig > REGULARITY_EIGEN_FLOOR) {
        return Err(EosError::SingularDetected { min_eigenvalue: min_eig });
    }
    let gap = optimal.loss_at_w0 - entropy(truth)?;
    Ok(if gap <= tol { ScenarioTag::ParametrizableRegular } else { ScenarioTag::NonparametrizableRegular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fd_check(model: &dyn ParametricModel, seed: u64) {
        let d = model.dim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-5.0..5.0);
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut g = vec![0.0; d];
            let mut h = vec![0.0; d * d];
            model.grad_w(x, &w, &mut g);
            model.hess_w(x, &w, &mut h);
            for i in 0..d {
                let step = 1e-5 * (1.0 + w[i].abs());
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i] += step;
                wm[i] -= step;
                let fd = (model.log_density(x, &wp) - model.log_density(x, &wm)) / (2.0 * step);
                let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
                assert!(rel <= 1e-5, "{} grad[{i}] at x={x} w={w:?}: {fd} vs {}", model.id(), g[i]);

                let mut gp = vec![0.0; d];
                let mut gm = vec![0.0; d];
                model.grad_w(x, &wp, &mut gp);
                model.grad_w(x, &wm, &mut gm);
                for k in 0..d {
                    let fd = (gp[k] - gm[k]) / (2.0 * step);
                    let exact = h[i * d + k];
                    let rel = (fd - exact).abs() / exact.abs().max(1.0);
                    assert!(rel <= 1e-4, "{} hess[{i},{k}]: {fd} vs {exact}", model.id());
                }
            }
        }
    }

    #[test]
    fn model_derivatives_match_finite_differences() {
        fd_check(&GaussianLocation::new(), 1);
        fd_check(&GaussianScale::new(), 2);
        fd_check(&GaussianLocationScale::new(), 3);
    }

    #[test]
    fn batch_matches_pointwise() {
        let xs = [-1.5, 0.0, 0.3, 4.0];
        let models: Vec<Box<dyn ParametricModel>> = vec![
            Box::new(GaussianLocation::new()),
            Box::new(GaussianScale::new()),
            Box::new(GaussianLocationScale::new()),
        ];
        for m in &models {
            let w: Vec<f64> = (0..m.dim()).map(|i| 0.3 - 0.2 * i as f64).collect();
            let mut out = [0.0; 4];
            m.log_density_batch(&xs, &w, &mut out);
            for (o, &x) in out.iter().zip(&xs) {
                assert!((o - m.log_density(x, &w)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn model_densities_normalize() {
        let opts = QuadratureOptions::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let models: Vec<Box<dyn ParametricModel>> = vec![
            Box::new(GaussianLocation::new()),
            Box::new(GaussianScale::new()),
            Box::new(GaussianLocationScale::new()),
        ];
        for m in &models {
            for _ in 0..20 {
                let w: Vec<f64> = m.param_box().iter().map(|(lo, hi)| rng.random_range(lo / 4.0..hi / 4.0)).collect();
                let (centre, sd) = match m.dim() {
                    1 if m.id() == "gauss-location" => (w[0], 1.0),
                    1 => (0.0, w[0].exp()),
                    _ => (w[0], w[1].exp()),
                };
                let breaks = [centre - 40.0 * sd, centre, centre + 40.0 * sd];
                let (mass, _) = integrate(&breaks, &opts, |x| m.log_density(x, &w).exp()).unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "{} at {w:?}: mass {mass}", m.id());
            }
        }
    }

    #[test]
    fn true_densities_normalize_and_sample_moments() {
        let truths: Vec<Box<dyn TrueDistribution>> = vec![
            Box::new(GaussianTruth::new(0.0, 1.0)),
            Box::new(GaussianTruth::new(0.0, 2.0)),
            Box::new(GaussianTruth::new(0.0, 0.5)),
            Box::new(LaplaceTruth::new(0.0, 1.0)),
        ];
        let opts = QuadratureOptions::default();
        for (i, t) in truths.iter().enumerate() {
            let (mass, _) = integrate(&t.breakpoints(), &opts, |x| t.density(x)).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "{}: mass {mass}", t.id());

            let mut rng = ChaCha20Rng::seed_from_u64(100 + i as u64);
            let n = 1_000_000;
            let xs = t.sample(&mut rng, n);
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let (m, v) = t.moments().unwrap();
            let mean_se = (v / n as f64).sqrt();
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let var_se = ((m4 - v * v) / n as f64).sqrt();
            assert!((mean - m).abs() < 4.0 * mean_se, "{}: mean {mean}", t.id());
            assert!((var - v).abs() < 4.0 * var_se, "{}: var {var}", t.id());
        }
    }

    #[test]
    fn prior_normalizes_on_box() {
        let prior = TruncatedGaussianPrior::new(0.0, 10.0, vec![(-20.0, 20.0)]).unwrap();
        let opts = QuadratureOptions::default();
        let (mass, _) = integrate(&[-20.0, 20.0], &opts, |w| prior.log_density(&[w]).exp()).unwrap();
        assert!((mass - 1.0).abs() < 1e-6);
        assert!(prior.log_density(&[20.0]).is_finite());
        assert!(prior.log_density(&[-20.0]).is_finite());
        assert_eq!(prior.log_density(&[20.5]), f64::NEG_INFINITY);

        let prior2 = TruncatedGaussianPrior::new(0.0, 10.0, vec![(-20.0, 20.0); 2]).unwrap();
        let (m1, _) = integrate(&[-20.0, 20.0], &opts, |a| {
            integrate(&[-20.0, 20.0], &opts, |b| prior2.log_density(&[a, b]).exp()).unwrap().0
        })
        .unwrap();
        assert!((m1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn catalog_contents() {
        let cat = builtin_scenarios();
        assert!(cat.len() >= 4);
        for id in ["gauss-match", "gauss-wide", "gauss-narrow", "gauss-scaleloc-laplace"] {
            assert!(cat.get(id).is_ok(), "{id}");
        }
        assert_eq!(cat.get("gauss-scaleloc-laplace").unwrap().dim(), 2);
        assert!(matches!(cat.get("nope"), Err(EosError::UnknownScenario(_))));
    }

    #[test]
    fn entropy_of_gaussian() {
        let s = entropy(&GaussianTruth::new(0.0, 2.0)).unwrap();
        assert!((s - (0.5 * (2.0 * PI * std::f64::consts::E * 2.0).ln())).abs() < 1e-10);
        let s = entropy(&LaplaceTruth::new(0.0, 1.0)).unwrap();
        assert!((s - (1.0 + 2f64.ln())).abs() < 1e-10);
    }
}
