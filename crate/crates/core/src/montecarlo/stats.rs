//! Moment summaries, Kolmogorov–Smirnov tests and Gaussian kernel density
//! estimates. Every function here is pure.

use serde::{Deserialize, Serialize};

use super::ReplicationSet;
use crate::error::{Error, Result};

/// Replications needed before moments are summarized.
pub const MIN_REPLICATIONS: usize = 30;
/// Smallest sample accepted by the KS tests.
pub const MIN_KS_SAMPLE: usize = 8;
const KOLMOGOROV_TERMS: usize = 100;
const KDE_GRID_1D: usize = 512;
const KDE_GRID_2D: usize = 128;
/// Kernel support cut-off in bandwidths; the neglected mass is below 6e-7.
const KERNEL_CUTOFF: f64 = 5.0;

/// Moments of one column with jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub count: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub variance_se: f64,
    /// `None` when the column has zero spread.
    pub skewness: Option<f64>,
    pub skewness_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    #[serde(flatten)]
    pub stats: ColumnStats,
}

/// Sample covariance of the columns belonging to one spike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCovariance {
    pub spike_k: usize,
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replications: usize,
    pub columns: Vec<ColumnSummary>,
    pub groups: Vec<GroupCovariance>,
}

/// Mean, variance and skewness of `x`, each with a jackknife standard error.
///
/// Leave-one-out statistics come from power sums of deviations about the
/// full-sample mean, so the cost is linear in `x.len()`.
pub fn column_stats(x: &[f64]) -> Result<ColumnStats> {
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewReplications { got: n, need: 3 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("non-finite value".into()));
    }
    let nf = n as f64;
    let center = x.iter().sum::<f64>() / nf;
    let d: Vec<f64> = x.iter().map(|v| v - center).collect();
    let s1: f64 = d.iter().sum();
    let s2: f64 = d.iter().map(|v| v * v).sum();
    let s3: f64 = d.iter().map(|v| v * v * v).sum();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let flat = |c2: f64| c2 <= (1e-12 * scale).powi(2);

    // (mean offset, unbiased variance, skewness) of a sample of size m.
    let moments = |a1: f64, a2: f64, a3: f64, m: f64| {
        let (r1, r2, r3) = (a1 / m, a2 / m, a3 / m);
        let c2 = (r2 - r1 * r1).max(0.0);
        let c3 = r3 - 3.0 * r1 * r2 + 2.0 * r1.powi(3);
        let skew = if flat(c2) { None } else { Some(c3 / c2.powf(1.5)) };
        (r1, c2 * m / (m - 1.0), skew)
    };

    let (_, variance, skewness) = moments(s1, s2, s3, nf);
    let mut loo_var = Vec::with_capacity(n);
    let mut loo_skew = Vec::with_capacity(n);
    for &di in &d {
        let (_, v, s) = moments(s1 - di, s2 - di * di, s3 - di * di * di, nf - 1.0);
        loo_var.push(v);
        loo_skew.push(s);
    }
    let jack = |vals: &[f64]| {
        let m = vals.iter().sum::<f64>() / nf;
        ((nf - 1.0) / nf * vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt()
    };
    // The jackknife SE of the mean is exactly s/√n.
    let mean_se = (variance / nf).sqrt();
    let skewness_se = match (skewness, loo_skew.iter().copied().collect::<Option<Vec<f64>>>()) {
        (Some(_), Some(v)) => Some(jack(&v)),
        _ => None,
    };
    Ok(ColumnStats {
        count: n,
        mean: center + s1 / nf,
        mean_se,
        variance,
        variance_se: jack(&loo_var),
        skewness,
        skewness_se,
    })
}

/// Per-column moments and per-spike covariance of the `δ` columns.
pub fn empirical_summary(reps: &ReplicationSet) -> Result<Summary> {
    if reps.len() < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications { got: reps.len(), need: MIN_REPLICATIONS });
    }
    let mut columns = Vec::with_capacity(reps.columns.len());
    for (c, col) in reps.columns.iter().enumerate() {
        columns.push(ColumnSummary { column: col.label(), stats: column_stats(&reps.delta_column(c))? });
    }
    let groups = reps
        .groups()
        .into_iter()
        .map(|(k, idx)| {
            let data: Vec<Vec<f64>> = idx.iter().map(|&c| reps.delta_column(c)).collect();
            GroupCovariance {
                spike_k: k,
                columns: idx.iter().map(|&c| reps.columns[c].label()).collect(),
                matrix: covariance(&data),
            }
        })
        .collect();
    Ok(Summary { replications: reps.len(), columns, groups })
}

/// Unbiased covariance matrix of equally long series.
fn covariance(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = series.first().map_or(0, Vec::len) as f64;
    let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let k = series.len();
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let c = series[a]
                .iter()
                .zip(&series[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum::<f64>()
                / (n - 1.0);
            out[a][b] = c;
            out[b][a] = c;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Effective sample size entering the asymptotic p-value.
    pub effective_n: f64,
}

/// Kolmogorov survival function `P(K > λ)`.
///
/// The alternating series converges fast for `λ ≥ 1`; below that the
/// Jacobi-theta form of the cdf is used instead. Both use 100 terms.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let sum: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let sum: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

fn asymptotic_p(d: f64, ne: f64) -> f64 {
    let rn = ne.sqrt();
    kolmogorov_q((rn + 0.12 + 0.11 / rn) * d)
}

fn checked_sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < MIN_KS_SAMPLE {
        return Err(Error::DegenerateSample(format!(
            "KS needs at least {MIN_KS_SAMPLE} values, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSample("non-finite value".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample KS test of `sample` against a continuous `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let s = checked_sorted(sample)?;
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: asymptotic_p(d, n), effective_n: n })
}

/// Two-sample KS test with effective size `n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (a, b) = (checked_sorted(a)?, checked_sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smaller value so ties move both cdfs.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok(KsResult { statistic: d, p_value: asymptotic_p(d, ne), effective_n: ne })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule of thumb per axis.
    #[default]
    Auto,
    Value(f64),
}

/// Gaussian KDE on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde1d {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde1d {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Linear interpolation of the density; zero off the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        interp(&self.grid, &self.density, x)
    }
}

/// Product-kernel Gaussian KDE on a regular grid; `density[i * ys.len() + j]`
/// is the estimate at `(xs[i], ys[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde2d {
    pub bandwidth: (f64, f64),
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde2d {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.ys.len() + j]
    }

    /// Iterated trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        let rows: Vec<f64> = (0..self.xs.len())
            .map(|i| trapezoid(&self.ys, &self.density[i * self.ys.len()..(i + 1) * self.ys.len()]))
            .collect();
        trapezoid(&self.xs, &rows)
    }
}

fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2).zip(f.windows(2)).map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])).sum()
}

fn interp(x: &[f64], f: &[f64], t: f64) -> f64 {
    if x.is_empty() || t < x[0] || t > x[x.len() - 1] {
        return 0.0;
    }
    let k = x.partition_point(|&v| v <= t).clamp(1, x.len() - 1);
    let w = (t - x[k - 1]) / (x[k] - x[k - 1]);
    f[k - 1] + w * (f[k] - f[k - 1])
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

fn check_kde_sample(len: usize, finite: bool) -> Result<()> {
    if len < MIN_REPLICATIONS {
        return Err(Error::DegenerateSample(format!(
            "KDE needs at least {MIN_REPLICATIONS} values, got {len}"
        )));
    }
    if !finite {
        return Err(Error::DegenerateSample("non-finite value".into()));
    }
    Ok(())
}

fn explicit_bandwidth(h: f64) -> Result<f64> {
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")))
    }
}

fn regular_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let step = (hi - lo) / (m - 1) as f64;
    (0..m).map(|i| lo + step * i as f64).collect()
}

/// 1-D Gaussian KDE on 512 points spanning the sample range ± 3h.
/// Silverman: `h = 0.9 min(s, IQR/1.34) n^{-1/5}`.
pub fn kde_1d(sample: &[f64], bandwidth: Bandwidth) -> Result<Kde1d> {
    check_kde_sample(sample.len(), sample.iter().all(|v| v.is_finite()))?;
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let sd = std_dev(&s);
    if !(sd > 0.0) {
        return Err(Error::DegenerateSample("zero-variance sample".into()));
    }
    let h = match bandwidth {
        Bandwidth::Auto => {
            let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
            let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
            0.9 * spread * (s.len() as f64).powf(-0.2)
        }
        Bandwidth::Value(h) => explicit_bandwidth(h)?,
    };
    let grid = regular_grid(s[0] - 3.0 * h, s[s.len() - 1] + 3.0 * h, KDE_GRID_1D);
    let norm = 1.0 / (s.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&g| {
            let lo = s.partition_point(|&v| v < g - KERNEL_CUTOFF * h);
            let hi = s.partition_point(|&v| v <= g + KERNEL_CUTOFF * h);
            norm * s[lo..hi].iter().map(|v| (-0.5 * ((g - v) / h).powi(2)).exp()).sum::<f64>()
        })
        .collect();
    Ok(Kde1d { bandwidth: h, grid, density })
}

/// 2-D product-kernel KDE on a 128 × 128 grid spanning each axis range
/// ± 3h. Auto bandwidth per axis: `s n^{-1/6}`.
pub fn kde_2d(pairs: &[(f64, f64)], bandwidth: Bandwidth) -> Result<Kde2d> {
    check_kde_sample(
        pairs.len(),
        pairs.iter().all(|(a, b)| a.is_finite() && b.is_finite()),
    )?;
    let xs_s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys_s: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (sx, sy) = (std_dev(&xs_s), std_dev(&ys_s));
    if !(sx > 0.0 && sy > 0.0) {
        return Err(Error::DegenerateSample("zero-variance axis".into()));
    }
    let n = pairs.len() as f64;
    let (hx, hy) = match bandwidth {
        Bandwidth::Auto => (sx * n.powf(-1.0 / 6.0), sy * n.powf(-1.0 / 6.0)),
        Bandwidth::Value(h) => {
            let h = explicit_bandwidth(h)?;
            (h, h)
        }
    };
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = range(&xs_s);
    let (y0, y1) = range(&ys_s);
    let xs = regular_grid(x0 - 3.0 * hx, x1 + 3.0 * hx, KDE_GRID_2D);
    let ys = regular_grid(y0 - 3.0 * hy, y1 + 3.0 * hy, KDE_GRID_2D);
    let (dx, dy) = (xs[1] - xs[0], ys[1] - ys[0]);
    let m = KDE_GRID_2D;
    let mut density = vec![0.0; m * m];
    let window = |c: f64, lo: f64, step: f64, h: f64| {
        let a = ((c - KERNEL_CUTOFF * h - lo) / step).ceil().max(0.0) as usize;
        let b = (((c + KERNEL_CUTOFF * h - lo) / step).floor().max(-1.0) + 1.0) as usize;
        a..b.min(m)
    };
    let mut wy = vec![0.0; m];
    for &(px, py) in pairs {
        let ry = window(py, ys[0], dy, hy);
        for j in ry.clone() {
            wy[j] = (-0.5 * ((ys[j] - py) / hy).powi(2)).exp();
        }
        for i in window(px, xs[0], dx, hx) {
            let wx = (-0.5 * ((xs[i] - px) / hx).powi(2)).exp();
            let row = &mut density[i * m..(i + 1) * m];
            for j in ry.clone() {
                row[j] += wx * wy[j];
            }
        }
    }
    let norm = 1.0 / (n * 2.0 * std::f64::consts::PI * hx * hy);
    density.iter_mut().for_each(|v| *v *= norm);
    Ok(Kde2d { bandwidth: (hx, hy), xs, ys, density })
}
