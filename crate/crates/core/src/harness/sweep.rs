//! E[B_g] as a function of 1/β, against the plug-in (β = ∞) baseline.

use serde::{Deserialize, Serialize};

use crate::beta::Beta;
use crate::error::{EosError, Result};

use super::aggregate::{betas, cell_rows, sample_sizes, Stat};
use super::replicate::{run_replications, ReplicationRow};
use super::{ExperimentConfig, ScenarioSummary, Verdict, VerdictStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub beta: Beta,
    pub inv_beta: f64,
    pub mean_b_g: f64,
    pub se_b_g: f64,
    pub count: usize,
    /// Leading-order prediction S + tr/(2n) + (d − tr)/(2nβ).
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario_id: String,
    pub points: Vec<SweepPoint>,
}

impl SweepTable {
    pub fn from_rows(rows: &[ReplicationRow], summary: &ScenarioSummary) -> Self {
        let c = summary.constants;
        let mut points = Vec::new();
        for n in sample_sizes(rows) {
            let mut bs = betas(rows);
            bs.sort_by(|a, b| b.sort_key().total_cmp(&a.sort_key()));
            for beta in bs {
                let st = Stat::of(cell_rows(rows, n, beta).iter().map(|r| r.b_g));
                let nf = n as f64;
                points.push(SweepPoint {
                    n,
                    beta,
                    inv_beta: beta.inverse(),
                    mean_b_g: st.mean,
                    se_b_g: st.se,
                    count: st.count,
                    predicted: c.s + c.tic / (2.0 * nf) + (c.d as f64 - c.tic) * beta.inverse() / (2.0 * nf),
                });
            }
        }
        Self { scenario_id: summary.scenario_id.clone(), points }
    }

    fn point(&self, n: usize, beta: Beta) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.n == n && p.beta == beta)
    }
}

/// Runs the replications of `config` and tabulates E[B_g] per β. The β grid
/// must contain ∞ and at least three finite values.
pub fn beta_sweep(config: &ExperimentConfig, workers: usize) -> Result<(SweepTable, ScenarioSummary)> {
    let finite = config.beta_grid.iter().filter(|b| !b.is_infinite()).count();
    if !config.beta_grid.contains(&Beta::Infinite) || finite < 3 {
        return Err(EosError::Validation("beta sweep needs inf and at least three finite beta values".into()));
    }
    let run = run_replications(config, workers)?;
    Ok((SweepTable::from_rows(&run.rows, &run.summary), run.summary))
}

/// Weighted least-squares slope of E[B_g] on 1/β and its standard error.
fn weighted_slope(points: &[&SweepPoint]) -> (f64, f64) {
    let w: Vec<f64> = points.iter().map(|p| 1.0 / (p.se_b_g * p.se_b_g)).collect();
    let sw: f64 = w.iter().sum();
    let mx = points.iter().zip(&w).map(|(p, w)| w * p.inv_beta).sum::<f64>() / sw;
    let my = points.iter().zip(&w).map(|(p, w)| w * p.mean_b_g).sum::<f64>() / sw;
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.inv_beta - mx).powi(2)).sum();
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.inv_beta - mx) * (p.mean_b_g - my)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

/// Per n: E[B_g](β=1) − E[B_g](∞) against (d − tr(IJ⁻¹))/(2n), and the
/// direction of E[B_g] in 1/β against the sign of d − tr(IJ⁻¹).
pub fn verify_beta_sweep(table: &SweepTable, summary: &ScenarioSummary, multiplier: f64) -> Vec<Verdict> {
    let c = summary.constants;
    let gap = c.d as f64 - c.tic;
    let boundary = gap.abs() < 1e-6;
    let mut out = Vec::new();
    let mut ns: Vec<usize> = table.points.iter().map(|p| p.n).collect();
    ns.dedup();
    for n in ns {
        let nf = n as f64;
        let precision = (gap.abs() / (2.0 * nf)).max(c.nu / nf) / 3.0;
        if let (Some(one), Some(inf)) = (table.point(n, Beta::Finite(1.0)), table.point(n, Beta::Infinite)) {
            let diff = one.mean_b_g - inf.mean_b_g;
            let se = one.se_b_g.hypot(inf.se_b_g);
            out.push(Verdict::within_se(
                format!("beta_sweep/bayes_minus_mle/n={n}"),
                diff,
                gap / (2.0 * nf),
                se,
                multiplier,
                precision,
            ));
        }
        let pts: Vec<&SweepPoint> = table.points.iter().filter(|p| p.n == n && p.se_b_g > 0.0).collect();
        if pts.iter().filter(|p| !p.beta.is_infinite()).count() >= 3 && pts.iter().any(|p| p.beta.is_infinite()) {
            let (slope, se) = weighted_slope(&pts);
            let predicted = gap / (2.0 * nf);
            let status = if !(se <= precision) {
                VerdictStatus::InsufficientPrecision
            } else if boundary {
                if slope.abs() <= multiplier * se {
                    VerdictStatus::Pass
                } else {
                    VerdictStatus::Fail
                }
            } else if slope * predicted > 0.0 && slope.abs() > multiplier * se {
                VerdictStatus::Pass
            } else {
                VerdictStatus::Fail
            };
            let rule = if boundary {
                "flat in 1/beta"
            } else if gap > 0.0 {
                "increasing in 1/beta"
            } else {
                "decreasing in 1/beta"
            };
            out.push(
                Verdict::new(format!("beta_sweep/direction/n={n}"), slope, predicted, se, multiplier, status)
                    .with_detail(format!("expected {rule}")),
            );
        }
    }
    out
}
