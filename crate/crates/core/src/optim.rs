//! Damped Newton minimization with a box constraint.

use nalgebra::{DMatrix, DVector};

use crate::error::{EosError, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Largest allowed move per coordinate in one iteration.
    pub max_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-8, max_iterations: 100, max_step: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Value, gradient and Hessian of the objective at a point.
pub type Evaluation = (f64, Vec<f64>, DMatrix<f64>);

pub fn newton_minimize<F>(
    mut eval: F,
    start: &[f64],
    bounds: &[(f64, f64)],
    opts: &NewtonOptions,
) -> Result<NewtonResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    let d = start.len();
    let mut x = start.to_vec();
    let (mut f, mut g, mut h) = eval(&x)?;
    let mut iterations = 0;
    loop {
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm <= opts.grad_tol {
            return Ok(NewtonResult { x, value: f, grad_norm, iterations });
        }
        if iterations >= opts.max_iterations || !grad_norm.is_finite() {
            return Err(EosError::NoConvergence { iterations, grad_norm });
        }
        iterations += 1;

        let gv = DVector::from_column_slice(&g);
        let (mut step, newton) = match h.clone().cholesky() {
            Some(chol) => (-chol.solve(&gv), true),
            None => (-gv.clone(), false),
        };
        let largest = step.amax();
        if largest > opts.max_step {
            step *= opts.max_step / largest;
        }
        // Keep the trial point inside the box.
        let mut t_max: f64 = 1.0;
        for i in 0..d {
            let (lo, hi) = bounds[i];
            if step[i] > 0.0 && x[i] + step[i] > hi {
                t_max = t_max.min((hi - x[i]) / step[i]);
            } else if step[i] < 0.0 && x[i] + step[i] < lo {
                t_max = t_max.min((lo - x[i]) / step[i]);
            }
        }
        let slope = gv.dot(&step);
        let local = newton && largest < 1e-3 && t_max >= 1.0;

        let mut t = t_max;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..d).map(|i| x[i] + t * step[i]).collect();
            let next = eval(&trial)?;
            if local || next.0 <= f + 1e-4 * t * slope {
                accepted = Some((trial, next));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, (nf, ng, nh))) => {
                x = trial;
                f = nf;
                g = ng;
                h = nh;
            }
            None => {
                return Err(EosError::NoConvergence { iterations, grad_norm });
            }
        }
    }
}
