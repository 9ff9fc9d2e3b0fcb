//! Replication averages, standard errors, regression control variates and
//! log-log scaling fits.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{EosError, Result};

use super::replicate::ReplicationRow;
use super::ScenarioSummary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation over √count.
    pub se: f64,
    pub count: usize,
}

impl Stat {
    /// Mean and standard error of the finite entries of `values`.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        let count = v.len();
        if count == 0 {
            return Self { mean: f64::NAN, se: f64::NAN, count };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let se = if count > 1 {
            let ss: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (count - 1) as f64).sqrt() / (count as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, se, count }
    }

    /// Sample standard deviation.
    pub fn sd(&self) -> f64 {
        self.se * (self.count as f64).sqrt()
    }
}

/// Names of the per-row quantities summarized in every cell.
pub const METRICS: [&str; 26] = [
    "b_g",
    "b_t",
    "g_g",
    "g_t",
    "v",
    "waic",
    "tic_n",
    "d1",
    "d2",
    "d3",
    "d4",
    "d5",
    "d6",
    "s_emp",
    "post_abs3",
    "beta_v",
    "b_t_centered",
    "g_t_centered",
    "bayes_gap",
    "gibbs_gap",
    "eos_v",
    "eos_residual_bayes",
    "eos_residual_gibbs",
    "n_b_g",
    "waic_minus_n_b_g",
    "waic_minus_n_b_g_centered",
];

/// Value of a named metric for one row. `s` is the entropy constant used by
/// the centered variants.
pub fn metric(row: &ReplicationRow, name: &str, s: f64) -> f64 {
    let n = row.n as f64;
    let d = &row.d_terms;
    match name {
        "b_g" => row.b_g,
        "b_t" => row.b_t,
        "g_g" => row.g_g,
        "g_t" => row.g_t,
        "v" => row.v,
        "waic" => row.waic,
        "tic_n" => row.tic_n,
        "d1" => d.d1,
        "d2" => d.d2,
        "d3" => d.d3,
        "d4" => d.d4,
        "d5" => d.d5,
        "d6" => d.d6,
        "s_emp" => row.s_emp,
        "post_abs3" => row.post_abs3,
        "beta_v" => row.beta_v(),
        "b_t_centered" => row.b_t_centered(s),
        "g_t_centered" => row.g_t_centered(s),
        "bayes_gap" => row.b_g - row.b_t,
        "gibbs_gap" => row.g_g - row.g_t,
        "eos_v" => row.beta_v() / n,
        "eos_residual_bayes" => row.b_g - row.b_t - row.beta_v() / n,
        "eos_residual_gibbs" => row.g_g - row.g_t - row.beta_v() / n,
        "n_b_g" => n * row.b_g,
        "waic_minus_n_b_g" => row.waic - n * row.b_g,
        // WAIC − n·B_g − n(Ŝ_n − S): same mean, without the entropy noise.
        "waic_minus_n_b_g_centered" => row.waic - n * row.b_g - n * (row.s_emp - s),
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub beta: Beta,
    pub rows: usize,
    pub failed: usize,
    pub stats: BTreeMap<String, Stat>,
}

impl CellSummary {
    pub fn stat(&self, name: &str) -> Stat {
        self.stats.get(name).copied().unwrap_or(Stat { mean: f64::NAN, se: f64::NAN, count: 0 })
    }
}

/// Per-(n, β) summaries keyed as `n=<n>,beta=<β>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenario_id: String,
    pub cells: BTreeMap<String, CellSummary>,
}

pub fn cell_key(n: usize, beta: Beta) -> String {
    format!("n={n},beta={beta}")
}

impl AggregateReport {
    pub fn from_rows(rows: &[ReplicationRow], summary: &ScenarioSummary) -> Self {
        let s = summary.constants.s;
        let mut cells = BTreeMap::new();
        for (n, beta) in cells_of(rows) {
            let members: Vec<&ReplicationRow> = rows.iter().filter(|r| r.n == n && r.beta == beta).collect();
            let ok: Vec<&ReplicationRow> = members.iter().copied().filter(|r| r.is_ok()).collect();
            let stats = METRICS
                .iter()
                .map(|&name| (name.to_string(), Stat::of(ok.iter().map(|r| metric(r, name, s)))))
                .collect();
            cells.insert(
                cell_key(n, beta),
                CellSummary { n, beta, rows: members.len(), failed: members.len() - ok.len(), stats },
            );
        }
        Self { scenario_id: summary.scenario_id.clone(), cells }
    }

    pub fn cell(&self, n: usize, beta: Beta) -> Option<&CellSummary> {
        self.cells.get(&cell_key(n, beta))
    }
}

/// Distinct (n, β) pairs in first-appearance order.
pub fn cells_of(rows: &[ReplicationRow]) -> Vec<(usize, Beta)> {
    let mut out: Vec<(usize, Beta)> = Vec::new();
    for r in rows {
        if !out.iter().any(|&(n, b)| n == r.n && b == r.beta) {
            out.push((r.n, r.beta));
        }
    }
    out
}

/// Distinct sample sizes, ascending.
pub fn sample_sizes(rows: &[ReplicationRow]) -> Vec<usize> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns
}

/// Distinct β values in first-appearance order.
pub fn betas(rows: &[ReplicationRow]) -> Vec<Beta> {
    let mut out: Vec<Beta> = Vec::new();
    for r in rows {
        if !out.contains(&r.beta) {
            out.push(r.beta);
        }
    }
    out
}

/// Successful rows of one cell.
pub fn cell_rows(rows: &[ReplicationRow], n: usize, beta: Beta) -> Vec<&ReplicationRow> {
    rows.iter().filter(|r| r.n == n && r.beta == beta && r.is_ok()).collect()
}

// ---------------------------------------------------------------------------
// Control variates

/// Zero-mean auxiliary statistics of each row: Ŝ_n − S, the mean score at
/// w₀, its outer product minus I/n, and I_n(w₀) − I, J_n(w₀) − J.
pub fn control_columns(rows: &[&ReplicationRow], summary: &ScenarioSummary) -> Vec<Vec<f64>> {
    let d = summary.d;
    let i = summary.i_matrix();
    let j = summary.j_matrix();
    let s = summary.constants.s;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    cols.push(rows.iter().map(|r| r.s_emp - s).collect());
    for a in 0..d {
        cols.push(rows.iter().map(|r| r.score_mean[a]).collect());
    }
    for a in 0..d {
        for b in a..d {
            cols.push(rows.iter().map(|r| r.score_mean[a] * r.score_mean[b] - i[(a, b)] / r.n as f64).collect());
        }
    }
    let mut k = 0;
    for a in 0..d {
        for b in a..d {
            cols.push(rows.iter().map(|r| r.in_w0[k] - i[(a, b)]).collect());
            cols.push(rows.iter().map(|r| r.jn_w0[k] - j[(a, b)]).collect());
            k += 1;
        }
    }
    cols
}

/// Regression estimator of E[y] given zero-mean controls: the intercept of
/// the least-squares fit y ≈ a + Σ c_k z_k. Constant columns are dropped.
pub fn control_variate_mean(y: &[f64], controls: &[Vec<f64>]) -> f64 {
    let r = y.len();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for col in controls {
        let st = Stat::of(col.iter().copied());
        let sd = st.sd();
        if sd.is_finite() && sd > 1e-12 * (1.0 + st.mean.abs()) {
            kept.push(col.iter().map(|v| v / sd).collect());
        }
    }
    if kept.is_empty() || r <= kept.len() + 1 {
        return Stat::of(y.iter().copied()).mean;
    }
    let p = kept.len() + 1;
    let x = DMatrix::from_fn(r, p, |i, k| if k == 0 { 1.0 } else { kept[k - 1][i] });
    let yv = DVector::from_column_slice(y);
    match x.svd(true, true).solve(&yv, 1e-12) {
        Ok(coef) => coef[0],
        Err(_) => Stat::of(y.iter().copied()).mean,
    }
}

// ---------------------------------------------------------------------------
// Scaling fits

/// OLS fit of log(value) against log(n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub quantity: String,
    /// (log n, log value) pairs.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub slope_se: f64,
}

impl ScalingFit {
    pub fn fit(quantity: &str, ns: &[usize], values: &[f64]) -> Result<Self> {
        let mut distinct = ns.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 || ns.len() != values.len() {
            return Err(EosError::InsufficientPoints { needed: 3, got: distinct.len() });
        }
        let points: Vec<(f64, f64)> = ns.iter().zip(values).map(|(&n, &v)| ((n as f64).ln(), v.ln())).collect();
        let m = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
        let my = points.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let rss: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        let slope_se = (rss / (m - 2.0) / sxx).sqrt();
        Ok(Self { quantity: quantity.to_string(), points, slope, slope_se })
    }
}

/// Root mean square of the finite entries.
pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stat_basics() {
        let s = Stat::of([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(s.count, 3);
        assert_eq!(s.mean, 2.0);
        assert!((s.se - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn scaling_fit_recovers_power_law() {
        let ns = [100, 400, 1600];
        let vals: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-1.5)).collect();
        let f = ScalingFit::fit("x", &ns, &vals).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.slope_se < 1e-10);
        assert!(matches!(
            ScalingFit::fit("x", &[100, 100, 100], &[1.0, 2.0, 3.0]),
            Err(EosError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn control_variate_removes_linear_noise() {
        // y = 2 + 3z with E z = 0: the estimator returns 2 whatever the sample.
        let z: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0 + 0.3).collect();
        let y: Vec<f64> = z.iter().map(|v| 2.0 + 3.0 * v).collect();
        let est = control_variate_mean(&y, &[z.clone(), vec![1.0; 200]]);
        assert!((est - 2.0).abs() < 1e-10);
        assert!((Stat::of(y.iter().copied()).mean - 2.0).abs() > 0.5);
    }

    proptest! {
        #[test]
        fn control_variate_without_controls_is_mean(v in proptest::collection::vec(-1e3f64..1e3, 3..50)) {
            let est = control_variate_mean(&v, &[]);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((est - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        }

        #[test]
        fn se_scales_with_inverse_sqrt_count(x in -10.0f64..10.0, k in 1usize..6) {
            let base = [x, x + 1.0, x - 1.0, x + 2.0];
            let once = Stat::of(base);
            let rep: Vec<f64> = base.iter().cycle().take(4 * k * k).copied().collect();
            let many = Stat::of(rep);
            prop_assert!((many.mean - once.mean).abs() < 1e-9);
            // Sample SD shrinks slightly with more copies; SE follows 1/√count.
            prop_assert!(many.se <= once.se / k as f64 + 1e-12);
        }
    }
}
