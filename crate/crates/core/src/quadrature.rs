//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.
//!
//! Integrands are vector valued: one pass over the abscissae evaluates every
//! component, which matters when each evaluation is itself an average over a
//! posterior grid. Subdivision always splits the panel whose error, normalized
//! by each component's tolerance, is largest.

use crate::error::{EosError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5 and the centre.
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Tolerances for [`integrate_vec`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
    /// A result whose error estimate exceeds this is reported as a failure
    /// even if subdivision ran out.
    pub failure_limit: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-12, max_segments: 4000, failure_limit: 1e-6 }
    }
}

impl QuadratureOptions {
    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// Integral estimate with per-component error bounds.
#[derive(Debug, Clone)]
pub struct VecEstimate {
    pub value: Vec<f64>,
    pub error: Vec<f64>,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: Vec<f64>,
}

fn kronrod_panel<F>(f: &mut F, a: f64, b: f64, dim: usize, scratch: &mut [f64]) -> Panel
where
    F: FnMut(f64, &mut [f64]),
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];
    let mut resabs = vec![0.0; dim];
    // Function values are kept so resasc can be formed after the mean is known.
    let mut values = vec![0.0; 15 * dim];

    f(centre, scratch);
    values[..dim].copy_from_slice(scratch);
    for c in 0..dim {
        kron[c] = WGK[7] * scratch[c];
        gauss[c] = WG[3] * scratch[c];
        resabs[c] = WGK[7] * scratch[c].abs();
    }
    for (i, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        let slot = 1 + 2 * i;
        f(centre - dx, scratch);
        values[slot * dim..(slot + 1) * dim].copy_from_slice(scratch);
        f(centre + dx, scratch);
        values[(slot + 1) * dim..(slot + 2) * dim].copy_from_slice(scratch);
        for c in 0..dim {
            let lo = values[slot * dim + c];
            let hi = values[(slot + 1) * dim + c];
            kron[c] += WGK[i] * (lo + hi);
            resabs[c] += WGK[i] * (lo.abs() + hi.abs());
            if i % 2 == 1 {
                gauss[c] += WG[i / 2] * (lo + hi);
            }
        }
    }

    let mut error = vec![0.0; dim];
    for c in 0..dim {
        let mean = 0.5 * kron[c];
        let mut resasc = WGK[7] * (values[c] - mean).abs();
        for (i, wgk) in WGK.iter().enumerate().take(7) {
            let slot = 1 + 2 * i;
            resasc += wgk * ((values[slot * dim + c] - mean).abs() + (values[(slot + 1) * dim + c] - mean).abs());
        }
        resasc *= half.abs();
        let raw = ((kron[c] - gauss[c]) * half).abs();
        // QUADPACK's scaling of the Gauss/Kronrod difference.
        let mut err = raw;
        if resasc != 0.0 && raw != 0.0 {
            err = resasc * (200.0 * raw / resasc).powf(1.5).min(1.0);
        }
        let round = 50.0 * f64::EPSILON * resabs[c] * half.abs();
        if round > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(round);
        }
        error[c] = err;
        kron[c] *= half;
    }
    Panel { a, b, value: kron, error }
}

/// Integrates a `dim`-component function over `[breaks[0], breaks.last()]`.
///
/// `breaks` must be strictly increasing; interior entries seed the initial
/// subdivision (use them at kinks of the integrand).
pub fn integrate_vec<F>(dim: usize, breaks: &[f64], opts: &QuadratureOptions, mut f: F) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64]),
{
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EosError::InvalidInput("quadrature breakpoints must be strictly increasing".into()));
    }
    let mut scratch = vec![0.0; dim];
    let mut panels: Vec<Panel> =
        breaks.windows(2).map(|w| kronrod_panel(&mut f, w[0], w[1], dim, &mut scratch)).collect();
    let mut evaluations = 15 * panels.len();

    loop {
        let mut total = vec![0.0; dim];
        let mut err = vec![0.0; dim];
        for p in &panels {
            for c in 0..dim {
                total[c] += p.value[c];
                err[c] += p.error[c];
            }
        }
        let tol: Vec<f64> = total.iter().map(|v| opts.abs_tol.max(opts.rel_tol * v.abs())).collect();
        let converged = err.iter().zip(&tol).all(|(e, t)| e <= t);
        if converged || panels.len() >= opts.max_segments {
            let worst = err.iter().cloned().fold(0.0, f64::max);
            if !converged && worst > opts.failure_limit {
                return Err(EosError::QuadratureFailure { estimate: worst, limit: opts.failure_limit });
            }
            return Ok(VecEstimate { value: total, error: err, evaluations });
        }

        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let score: f64 = p.error.iter().zip(&tol).map(|(e, t)| e / t).fold(0.0, f64::max);
                (i, score)
            })
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let p = panels.swap_remove(worst_idx);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // Panel can no longer be split in floating point.
            let worst = err.iter().cloned().fold(0.0, f64::max);
            if worst > opts.failure_limit {
                return Err(EosError::QuadratureFailure { estimate: worst, limit: opts.failure_limit });
            }
            return Ok(VecEstimate { value: total, error: err, evaluations });
        }
        panels.push(kronrod_panel(&mut f, p.a, mid, dim, &mut scratch));
        panels.push(kronrod_panel(&mut f, mid, p.b, dim, &mut scratch));
        evaluations += 30;
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F>(breaks: &[f64], opts: &QuadratureOptions, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let est = integrate_vec(1, breaks, opts, |x, out| out[0] = f(x))?;
    Ok((est.value[0], est.error[0]))
}
