//! Numeric check suites that compare implementations against independent
//! routes: closed forms against quadrature, resolvent statistics against
//! their deterministic limits, and simulated sesquilinear forms against the
//! CLT covariance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::{s2_binary, sigma2, theta_omega};
use crate::linalg::resolvent_stats;
use crate::montecarlo::replication_seed;
use crate::sesquiform::{b_covariance, d_covariance, form_stats, z_vector, MomentSpec};
use crate::spectra::{m_closed_forms, mp_integral, mp_support, phi, stieltjes_real, MpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Absolute,
    Relative,
}

/// One comparison of a computed value with a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub kind: Tolerance,
    pub pass: bool,
}

impl Check {
    pub fn abs(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (value - reference).abs() <= tolerance;
        Self { name: name.into(), value, reference, tolerance, kind: Tolerance::Absolute, pass }
    }

    pub fn rel(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (value - reference).abs() <= tolerance * reference.abs();
        Self { name: name.into(), value, reference, tolerance, kind: Tolerance::Relative, pass }
    }

    /// `|value - reference|`, or its ratio to `|reference|` when relative.
    pub fn error(&self) -> f64 {
        let e = (self.value - self.reference).abs();
        match self.kind {
            Tolerance::Absolute => e,
            Tolerance::Relative => e / self.reference.abs(),
        }
    }
}

pub const IDENTITY_ALPHAS: [f64; 5] = [4.0, 3.0, 2.0, 0.2, 0.1];
pub const IDENTITY_YS: [f64; 3] = [0.2, 0.5, 0.9];

/// `(α, y)` pairs of the identity grid whose spike is outside the critical
/// interval; the others have no `φ`.
pub fn identity_grid() -> Vec<(f64, MpParams)> {
    let mut out = Vec::new();
    for y in IDENTITY_YS {
        let params = MpParams::new(y).expect("grid ratios are valid");
        for alpha in IDENTITY_ALPHAS {
            if !params.in_critical_interval(alpha) {
                out.push((alpha, params));
            }
        }
    }
    out
}

/// Closed-form `m₁, m₂, m₃` at `φ(α)` against direct quadrature.
pub fn closed_form_checks(tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (alpha, params) in identity_grid() {
        let lambda = phi(alpha, params)?;
        let closed = m_closed_forms(alpha, params)?;
        let q = |f: &dyn Fn(f64) -> f64| mp_integral(f, params, 1e-13);
        let m1 = q(&|x| x / (lambda - x))?;
        let m2 = q(&|x| (x / (lambda - x)).powi(2))?;
        let m3 = q(&|x| x / (lambda - x).powi(2))?;
        let tag = format!("alpha={alpha} y={}", params.y());
        out.push(Check::abs(format!("m1 {tag}"), closed.m1, m1, tol));
        out.push(Check::abs(format!("m2 {tag}"), closed.m2, m2, tol));
        out.push(Check::abs(format!("m3 {tag}"), closed.m3, m3, tol));
    }
    Ok(out)
}

/// 40 real points outside the support, half below and half above.
pub fn stieltjes_points(params: MpParams) -> Vec<f64> {
    let (a, b) = mp_support(params);
    let below = (0..20).map(|i| -3.0 + (a - 0.01 + 3.0) * i as f64 / 19.0);
    let above = (0..20).map(|i| b + 0.01 + (12.0 - b) * i as f64 / 19.0);
    below.chain(above).collect()
}

/// The Stieltjes transform against quadrature of `∫ (x - λ)⁻¹ F_y(dx)`.
pub fn stieltjes_checks(params: MpParams, tol: f64) -> Result<Vec<Check>> {
    stieltjes_points(params)
        .into_iter()
        .map(|l| {
            let q = mp_integral(|x| 1.0 / (x - l), params, 1e-13)?;
            Ok(Check::abs(format!("m(lambda={l:.4}) y={}", params.y()), stieltjes_real(l, params)?, q, tol))
        })
        .collect()
}

/// `σ² = 2θα²/(1 + y m₃ α)²` and
/// `s² = σ² y/(α-1)² = 2(θ - ω)α²/(1 + y m₃ α)²`.
pub fn variance_identity_checks(tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (alpha, params) in identity_grid() {
        let y = params.y();
        let to = theta_omega(alpha, params)?;
        let m3 = m_closed_forms(alpha, params)?.m3;
        let den = (1.0 + y * m3 * alpha).powi(2);
        let s = sigma2(alpha, params)?;
        let s2 = s2_binary(alpha, params)?;
        let tag = format!("alpha={alpha} y={y}");
        out.push(Check::abs(format!("sigma2 {tag}"), s, 2.0 * to.theta * alpha * alpha / den, tol * s.max(1.0)));
        out.push(Check::abs(format!("s2 ratio {tag}"), s2, s * y / (alpha - 1.0).powi(2), tol * s2.max(1.0)));
        out.push(Check::abs(
            format!("s2 theta-omega {tag}"),
            s2,
            2.0 * (to.theta - to.omega) * alpha * alpha / den,
            tol * s2.max(1.0),
        ));
    }
    Ok(out)
}

/// Every identity check at the given tolerances.
pub fn identities(quad_tol: f64, algebra_tol: f64) -> Result<Vec<Check>> {
    let mut out = closed_form_checks(quad_tol)?;
    for y in IDENTITY_YS {
        out.extend(stieltjes_checks(MpParams::new(y)?, quad_tol)?);
    }
    out.extend(variance_identity_checks(algebra_tol)?);
    Ok(out)
}

/// Median of the resolvent statistics of Gaussian `p × n` blocks (entries
/// `N(0, 1/n)`) over `seeds`, against their limits `y m₁`, `y m₂` and
/// `(r/(λ - r))²` with `r = y(1 + m₁)`.
pub fn resolvent_traces(p: usize, n: usize, lambda: f64, seeds: &[u64]) -> Result<Vec<Check>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let params = MpParams::new(p as f64 / n as f64)?;
    let y = params.y();
    let m1 = -1.0 - lambda * stieltjes_real(lambda, params)?;
    let m2 = mp_integral(|x| (x / (lambda - x)).powi(2), params, 1e-13)?;
    let r = y * (1.0 + m1);
    let stats: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let scale = 1.0 / (n as f64).sqrt();
            let x2 = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
            resolvent_stats(&x2, lambda)
        })
        .collect::<Result<_>>()?;
    let median = |f: &dyn Fn(&crate::linalg::ResolventStats) -> f64| {
        let mut v: Vec<f64> = stats.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
    };
    Ok(vec![
        Check::abs("trA/n", median(&|s| s.tr_a_over_n), y * m1, 0.02),
        Check::abs("sum a_ii^2/n", median(&|s| s.sum_aii_sq_over_n), (r / (lambda - r)).powi(2), 0.006),
        Check::rel("trAA*/n", median(&|s| s.tr_aastar_over_n), y * m2, 0.15),
    ])
}

/// Symmetric circulant matrix with first-row bands `c[0], c[1], …`.
pub fn circulant(n: usize, c: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |u, v| {
        let d = (u as isize - v as isize).rem_euclid(n as isize) as usize;
        let d = d.min(n - d);
        c.get(d).copied().unwrap_or(0.0)
    })
}

/// Stacked `(x₁, x₂, y₁, y₂)` covariance of the two-form experiment.
pub fn two_form_covariance() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.5, 0.6, 0.2, //
            0.5, 1.0, 0.1, 0.3, //
            0.6, 0.1, 1.0, 0.4, //
            0.2, 0.3, 0.4, 1.0,
        ],
    )
}

/// Empirical covariance of `Z_n` over `reps` replications of real
/// Gaussian vectors with stacked covariance `cov`. `quadratic` sets
/// `Y = X` and uses only the `x` block.
pub fn simulate_z(
    a: &DMatrix<f64>,
    cov: &DMatrix<f64>,
    quadratic: bool,
    reps: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = a.nrows();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?;
    let l = chol.l();
    let d = cov.nrows();
    let k = if quadratic { d } else { d / 2 };
    let rho: Vec<f64> = (0..k).map(|i| if quadratic { cov[(i, i)] } else { cov[(i, k + i)] }).collect();
    let zs: Vec<DVector<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, r));
            let g = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = &l * g;
            let (x, y) = if quadratic {
                (w.clone(), w)
            } else {
                (w.rows(0, k).into_owned(), w.rows(k, k).into_owned())
            };
            z_vector(&x, &y, a, &rho)
        })
        .collect::<Result<_>>()?;
    let mean = zs.iter().fold(DVector::zeros(k), |acc, z| acc + z) / reps as f64;
    let mut c = DMatrix::zeros(k, k);
    for z in &zs {
        let dz = z - &mean;
        c += &dz * dz.transpose();
    }
    Ok((c / (reps as f64 - 1.0), mean))
}

/// Entries of `empirical` against `theory` within `rel` wherever
/// `|theory| ≥ floor`, plus a mean-zero check at four standard errors.
fn covariance_checks(
    label: &str,
    empirical: &DMatrix<f64>,
    mean: &DVector<f64>,
    theory: &DMatrix<f64>,
    reps: usize,
    rel: f64,
    floor: f64,
) -> Vec<Check> {
    let mut out = Vec::new();
    let k = theory.nrows();
    for i in 0..k {
        for j in i..k {
            if theory[(i, j)].abs() >= floor {
                out.push(Check::rel(format!("{label} cov[{i},{j}]"), empirical[(i, j)], theory[(i, j)], rel));
            }
        }
        let se = (empirical[(i, i)] / reps as f64).sqrt();
        out.push(Check::abs(format!("{label} mean[{i}]"), mean[i], 0.0, 4.0 * se));
    }
    out
}

/// Simulated sesquilinear and quadratic forms against `B` and `D`.
pub fn sesquiform_suite(n: usize, reps: usize, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let a = circulant(n, &[1.0, 0.5, 0.25]);
    let stats = form_stats(&a)?;
    let cov = two_form_covariance();
    let b = b_covariance(&MomentSpec::real_gaussian(&cov)?, &stats)?.map(|v| v.re);
    let (emp, mean) = simulate_z(&a, &cov, false, reps, seed)?;
    out.extend(covariance_checks("banded A", &emp, &mean, &b, reps, 0.15, 0.1));

    let identity = DMatrix::identity(n, n);
    let unit = DMatrix::from_element(1, 1, 1.0);
    let (emp, mean) = simulate_z(&identity, &unit, true, reps, seed ^ 1)?;
    out.push(Check::rel("identity A variance", emp[(0, 0)], 2.0, 0.10));
    out.extend(covariance_checks("identity A", &emp, &mean, &DMatrix::from_element(1, 1, 2.0), reps, f64::INFINITY, f64::INFINITY));

    let hollow = circulant(n, &[0.0, 0.5, 0.25]);
    let hstats = form_stats(&hollow)?;
    let gamma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let mut joint = DMatrix::zeros(4, 4);
    joint.view_mut((0, 0), (2, 2)).copy_from(&gamma);
    joint.view_mut((2, 2), (2, 2)).copy_from(&gamma);
    joint.view_mut((0, 2), (2, 2)).copy_from(&gamma);
    joint.view_mut((2, 0), (2, 2)).copy_from(&gamma);
    let d = d_covariance(&MomentSpec::real_gaussian(&joint)?, &hstats)?;
    let (emp, mean) = simulate_z(&hollow, &gamma, true, reps, seed ^ 2)?;
    out.extend(covariance_checks("zero-diagonal A", &emp, &mean, &d, reps, 0.15, 0.1));
    Ok(out)
}
