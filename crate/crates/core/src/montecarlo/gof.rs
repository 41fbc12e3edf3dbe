//! Goodness of fit of replicated fluctuations against their limit laws.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::stats::{column_stats, kde_1d, kde_2d, ks_one_sample, ks_two_sample, Bandwidth, Kde1d, Kde2d};
use super::{Mode, ReplicationSet, MIN_REPLICATIONS};
use crate::error::{Error, Result};
use crate::limits::{sample_limit_law, LimitKind, LimitLaw};

/// Draws from a matrix limit law used as the two-sample reference.
pub const DEFAULT_LIMIT_DRAWS: usize = 100_000;

/// Pass criteria applied to each column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofThresholds {
    /// Smallest accepted KS p-value.
    pub min_p_value: f64,
    /// Largest accepted `|emp_var / theo_var - 1|`.
    pub variance_rel_tol: f64,
    /// Largest accepted `|emp_mean - theo_mean|` in units of the limit sd.
    pub mean_tol_sd: f64,
}

impl GofThresholds {
    pub const FAST: Self = Self { min_p_value: 0.01, variance_rel_tol: 0.20, mean_tol_sd: 0.15 };
    /// Binary entries converge more slowly; the wider band is empirical.
    pub const FAST_BINARY: Self = Self { min_p_value: 0.01, variance_rel_tol: 0.25, mean_tol_sd: 0.15 };
    pub const PAPER_SCALE: Self = Self { min_p_value: 0.01, variance_rel_tol: 0.10, mean_tol_sd: 0.15 };

    pub fn for_mode(mode: Mode, binary: bool) -> Self {
        match (mode, binary) {
            (Mode::PaperScale, _) => Self::PAPER_SCALE,
            (Mode::Fast, true) => Self::FAST_BINARY,
            (Mode::Fast, false) => Self::FAST,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KsKind {
    /// Against the scalar Gaussian cdf.
    OneSample,
    /// Against draws of the matrix limit law.
    TwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofColumn {
    pub column: String,
    pub spike_k: usize,
    pub j: usize,
    pub ks_kind: KsKind,
    pub ks_stat: f64,
    pub p_value: f64,
    pub emp_mean: f64,
    pub emp_mean_se: f64,
    pub emp_var: f64,
    pub emp_var_se: f64,
    pub theo_mean: f64,
    pub theo_var: f64,
    pub verdict: Verdict,
}

/// Per-column fit results plus plotting grids; the grids are written to
/// their own CSV files and are not part of the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub replications: usize,
    pub thresholds: GofThresholds,
    pub columns: Vec<GofColumn>,
    #[serde(skip)]
    pub kde_1d: Vec<(String, Kde1d)>,
    #[serde(skip)]
    pub kde_2d: Vec<(String, Kde2d)>,
}

impl GofReport {
    pub fn all_pass(&self) -> bool {
        self.columns.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

/// Compares every tracked column with its limit law.
///
/// Simple spikes get a one-sample KS test against `N(0, σ²)`. Packed
/// groups get a two-sample KS test per ordered coordinate against `draws`
/// samples of the matrix law, drawn from `rng` in spike order.
pub fn compare_to_limit<R: Rng + ?Sized>(
    reps: &ReplicationSet,
    laws: &BTreeMap<usize, LimitLaw>,
    draws: usize,
    thresholds: GofThresholds,
    rng: &mut R,
) -> Result<GofReport> {
    let mut report = GofReport {
        replications: reps.len(),
        thresholds,
        columns: Vec::new(),
        kde_1d: Vec::new(),
        kde_2d: Vec::new(),
    };
    for (k, idx) in reps.groups() {
        let law = laws
            .get(&k)
            .ok_or_else(|| Error::Dimension(format!("no limit law for tracked spike {k}")))?;
        if law.size() != idx.len() {
            return Err(Error::Dimension(format!(
                "spike {k}: law of size {} for {} columns",
                law.size(),
                idx.len()
            )));
        }
        let reference: Option<Vec<Vec<f64>>> = match law.kind {
            LimitKind::ScalarGaussian { .. } => None,
            LimitKind::MatrixEigLaw { .. } => {
                if draws < super::stats::MIN_KS_SAMPLE {
                    return Err(Error::InvalidParameter(format!("too few reference draws: {draws}")));
                }
                Some(sample_limit_law(law, draws, rng))
            }
        };
        for (pos, &c) in idx.iter().enumerate() {
            let col = &reps.columns[c];
            let x = reps.delta_column(c);
            let stats = column_stats(&x)?;
            let (ks, kind, theo_mean, theo_var) = match (&law.kind, &reference) {
                (LimitKind::ScalarGaussian { variance }, _) => {
                    let normal = Normal::new(0.0, variance.sqrt())
                        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    (ks_one_sample(&x, |t| normal.cdf(t))?, KsKind::OneSample, 0.0, *variance)
                }
                (_, Some(draws)) => {
                    let coord: Vec<f64> = draws.iter().map(|d| d[pos]).collect();
                    let ref_stats = column_stats(&coord)?;
                    (ks_two_sample(&x, &coord)?, KsKind::TwoSample, ref_stats.mean, ref_stats.variance)
                }
                _ => unreachable!("matrix laws always carry reference draws"),
            };
            let pass = ks.p_value >= thresholds.min_p_value
                && (stats.variance / theo_var - 1.0).abs() <= thresholds.variance_rel_tol
                && (stats.mean - theo_mean).abs() <= thresholds.mean_tol_sd * theo_var.sqrt();
            report.columns.push(GofColumn {
                column: col.label(),
                spike_k: k,
                j: col.j,
                ks_kind: kind,
                ks_stat: ks.statistic,
                p_value: ks.p_value,
                emp_mean: stats.mean,
                emp_mean_se: stats.mean_se,
                emp_var: stats.variance,
                emp_var_se: stats.variance_se,
                theo_mean,
                theo_var,
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            });
            if x.len() >= MIN_REPLICATIONS {
                if let Ok(kde) = kde_1d(&x, Bandwidth::Auto) {
                    report.kde_1d.push((col.label(), kde));
                }
            }
        }
        if idx.len() == 2 && reps.len() >= MIN_REPLICATIONS {
            let pairs: Vec<(f64, f64)> = reps.deltas.iter().map(|r| (r[idx[0]], r[idx[1]])).collect();
            if let Ok(kde) = kde_2d(&pairs, Bandwidth::Auto) {
                let label = format!("{}_{}", reps.columns[idx[0]].label(), reps.columns[idx[1]].j);
                report.kde_2d.push((label, kde));
            }
        }
    }
    Ok(report)
}
