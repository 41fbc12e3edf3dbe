//! Marčenko–Pastur analytics and the spike maps.
//!
//! Everything here is a pure function of its arguments. Integrals against
//! the Marčenko–Pastur law use the substitution
//! `x = ((a + b) + (b - a) sin t) / 2`, which turns the square-root edge
//! behaviour of the density into a smooth `cos² t` factor.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Absolute tolerance used for all internal Marčenko–Pastur integrals.
pub const MP_QUAD_TOL: f64 = 1e-12;

/// Dimension-to-sample ratio `y = lim p/n`, restricted to `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MpParams {
    y: f64,
}

impl MpParams {
    pub fn new(y: f64) -> Result<Self> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ratio y must lie in (0, 1), got {y}"
            )));
        }
        Ok(Self { y })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Left edge `a_y = (1 - √y)²`.
    pub fn lower_edge(&self) -> f64 {
        (1.0 - self.y.sqrt()).powi(2)
    }

    /// Right edge `b_y = (1 + √y)²`.
    pub fn upper_edge(&self) -> f64 {
        (1.0 + self.y.sqrt()).powi(2)
    }

    /// Spikes in `[1 - √y, 1 + √y]` produce no outlier eigenvalues.
    pub fn critical_interval(&self) -> (f64, f64) {
        let s = self.y.sqrt();
        (1.0 - s, 1.0 + s)
    }

    pub fn in_critical_interval(&self, alpha: f64) -> bool {
        let (lo, hi) = self.critical_interval();
        (lo..=hi).contains(&alpha)
    }

    fn check_outside_support(&self, lambda: f64) -> Result<()> {
        let (a, b) = mp_support(*self);
        if (a..=b).contains(&lambda) || lambda.is_nan() {
            return Err(Error::InsideSupport {
                value: lambda,
                lo: a,
                hi: b,
            });
        }
        Ok(())
    }

    fn check_spike(&self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spike must be positive and finite, got {alpha}"
            )));
        }
        if self.in_critical_interval(alpha) {
            let (lo, hi) = self.critical_interval();
            return Err(Error::CriticalInterval { alpha, lo, hi });
        }
        Ok(())
    }
}

impl TryFrom<f64> for MpParams {
    type Error = Error;
    fn try_from(y: f64) -> Result<Self> {
        MpParams::new(y)
    }
}

impl From<MpParams> for f64 {
    fn from(p: MpParams) -> f64 {
        p.y
    }
}

/// Which side of the bulk a sample eigenvalue (or spike) sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
}

/// One atom `t_j` of the limiting population spectrum `H`, with mass `w_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub weight: f64,
}

/// Discrete limiting spectral distribution `H` of the non-spike block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct BulkSpectrum {
    atoms: Vec<Atom>,
}

impl BulkSpectrum {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("bulk needs at least one atom".into()));
        }
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.value > 0.0) || !a.value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "bulk atom {} must be positive, got {}",
                    i, a.value
                )));
            }
            if !(a.weight > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bulk weight {} must be positive, got {}",
                    i, a.weight
                )));
            }
            if atoms[..i].iter().any(|b| b.value == a.value) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate bulk atom {}",
                    a.value
                )));
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "bulk weights must sum to 1, got {total}"
            )));
        }
        Ok(Self { atoms })
    }

    /// The null bulk `H = δ₁`.
    pub fn unit() -> Self {
        Self {
            atoms: vec![Atom {
                value: 1.0,
                weight: 1.0,
            }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_unit(&self) -> bool {
        self.atoms.len() == 1 && self.atoms[0].value == 1.0
    }
}

impl TryFrom<Vec<Atom>> for BulkSpectrum {
    type Error = Error;
    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        BulkSpectrum::new(atoms)
    }
}

impl From<BulkSpectrum> for Vec<Atom> {
    fn from(b: BulkSpectrum) -> Self {
        b.atoms
    }
}

/// Ordered, pairwise disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSet {
    intervals: Vec<(f64, f64)>,
}

impl SupportSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in intervals.windows(2) {
            if w[0].1 >= w[1].0 {
                return Err(Error::InvalidParameter(
                    "support intervals overlap".into(),
                ));
            }
        }
        if intervals.iter().any(|(l, r)| !(l < r)) {
            return Err(Error::InvalidParameter(
                "support interval with l >= r".into(),
            ));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(l, r)| (l..=r).contains(&x))
    }

    pub fn lower(&self) -> f64 {
        self.intervals.first().map_or(f64::NAN, |i| i.0)
    }

    pub fn upper(&self) -> f64 {
        self.intervals.last().map_or(f64::NAN, |i| i.1)
    }
}

/// `m₁, m₂, m₃` at a point outside the Marčenko–Pastur support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MTransforms {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

/// Support edges `(a_y, b_y)`.
pub fn mp_support(params: MpParams) -> (f64, f64) {
    (params.lower_edge(), params.upper_edge())
}

/// Marčenko–Pastur density; zero outside `[a_y, b_y]`.
pub fn mp_density(x: f64, params: MpParams) -> f64 {
    let (a, b) = mp_support(params);
    if !(a..=b).contains(&x) {
        return 0.0;
    }
    let r = ((x - a) * (b - x)).max(0.0);
    r.sqrt() / (2.0 * PI * x * params.y())
}

/// `∫ f(x) F_y(dx)` with the sine substitution, to absolute accuracy `tol`.
pub fn mp_integral<F: Fn(f64) -> f64>(f: F, params: MpParams, tol: f64) -> Result<f64> {
    let (a, b) = mp_support(params);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let y = params.y();
    quadrature::integrate(
        |t| {
            let c = t.cos();
            let x = mid + half * t.sin();
            f(x) * half * half * c * c / (2.0 * PI * x * y)
        },
        -FRAC_PI_2,
        FRAC_PI_2,
        tol,
    )
}

/// Stieltjes transform `m(z) = ∫ (x - z)⁻¹ F_y(dx)`.
///
/// The square root is taken as `√(z - a)·√(z - b)` with principal
/// branches, which is analytic off `[a, b]`, behaves like `z` at infinity,
/// and gives `Im m > 0` on the upper half plane. On the real axis this means
/// `m < 0` above `b_y` and `m > 0` below `a_y`.
pub fn stieltjes(z: Complex64, params: MpParams) -> Result<Complex64> {
    if z.im == 0.0 {
        params.check_outside_support(z.re)?;
    }
    let (a, b) = mp_support(params);
    let y = params.y();
    // Avoid a negative-zero imaginary part flipping the principal branch.
    let z = Complex64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im });
    let s = (z - a).sqrt() * (z - b).sqrt();
    let base = Complex64::new(1.0 - y, 0.0) - z;
    let plus = base + s;
    let minus = base - s;
    // plus * minus = 4yz, so pick whichever form avoids cancellation.
    if plus.norm() >= minus.norm() {
        Ok(plus / (2.0 * y * z))
    } else {
        Ok(2.0 / minus)
    }
}

/// Real-argument Stieltjes transform, for `λ` outside `[a_y, b_y]`.
pub fn stieltjes_real(lambda: f64, params: MpParams) -> Result<f64> {
    Ok(stieltjes(Complex64::new(lambda, 0.0), params)?.re)
}

/// `m₁` in closed form via the Stieltjes transform, `m₂` and `m₃` by
/// quadrature.
pub fn m_transforms(lambda: f64, params: MpParams) -> Result<MTransforms> {
    params.check_outside_support(lambda)?;
    let m = stieltjes_real(lambda, params)?;
    let m1 = -1.0 - lambda * m;
    let m2 = mp_integral(|x| (x / (lambda - x)).powi(2), params, MP_QUAD_TOL)?;
    let m3 = mp_integral(|x| x / (lambda - x).powi(2), params, MP_QUAD_TOL)?;
    Ok(MTransforms { m1, m2, m3 })
}

/// Closed forms of `m₁∘φ`, `m₂∘φ`, `m₃∘φ` at a spike `α`.
pub fn m_closed_forms(alpha: f64, params: MpParams) -> Result<MTransforms> {
    params.check_spike(alpha)?;
    let y = params.y();
    let d = alpha - 1.0;
    let q = d * d - y;
    Ok(MTransforms {
        m1: 1.0 / d,
        m2: (d + y * (alpha + 1.0)) / (d * q),
        m3: 1.0 / q,
    })
}

/// Spike map `φ(α) = α + yα/(α - 1)`.
pub fn phi(alpha: f64, params: MpParams) -> Result<f64> {
    params.check_spike(alpha)?;
    Ok(alpha + params.y() * alpha / (alpha - 1.0))
}

/// Inverse of [`phi`] on the requested side of the bulk.
///
/// Solves `α² - α(λ + 1 - y) + λ = 0`; the discriminant is
/// `(λ - a_y)(λ - b_y)`.
pub fn phi_inverse(lambda: f64, params: MpParams, side: Side) -> Result<f64> {
    let (a, b) = mp_support(params);
    let y = params.y();
    let ok = match side {
        Side::Above => lambda > b,
        Side::Below => lambda > 0.0 && lambda < a,
    };
    if !ok {
        return Err(Error::InsideSupport {
            value: lambda,
            lo: if side == Side::Below { 0.0 } else { a },
            hi: if side == Side::Below { a } else { b },
        });
    }
    let s = lambda + 1.0 - y;
    let disc = ((lambda - a) * (lambda - b)).max(0.0).sqrt();
    Ok(match side {
        Side::Above => 0.5 * (s + disc),
        Side::Below => 2.0 * lambda / (s + disc),
    })
}

/// Value of the generalized spike map together with the separation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub value: f64,
    /// `true` when the value lies outside the support of the limiting ESD.
    pub separated: bool,
}

/// `ψ(α) = α[1 + y Σ w_j t_j / (α - t_j)]` without the separation check.
pub fn psi_value(alpha: f64, params: MpParams, bulk: &BulkSpectrum) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spike must be positive and finite, got {alpha}"
        )));
    }
    let mut acc = 0.0;
    for atom in bulk.atoms() {
        let gap = alpha - atom.value;
        if gap.abs() <= 1e-14 * atom.value {
            return Err(Error::Singularity { at: alpha });
        }
        acc += atom.weight * atom.value / gap;
    }
    Ok(alpha * (1.0 + params.y() * acc))
}

/// Generalized spike map with the "outside `supp F`" status attached.
pub fn psi(alpha: f64, params: MpParams, bulk: &BulkSpectrum) -> Result<PsiValue> {
    let value = psi_value(alpha, params, bulk)?;
    let support = general_support(params, bulk);
    Ok(PsiValue {
        value,
        separated: value > 0.0 && !support.contains(value),
    })
}

/// Samples per segment between consecutive poles of `λ(m̲)`.
pub const SUPPORT_GRID: usize = 4096;

struct InverseMap<'a> {
    y: f64,
    atoms: &'a [Atom],
}

impl InverseMap<'_> {
    fn value(&self, m: f64) -> f64 {
        -1.0 / m
            + self.y
                * self
                    .atoms
                    .iter()
                    .map(|a| a.weight * a.value / (1.0 + a.value * m))
                    .sum::<f64>()
    }

    fn slope(&self, m: f64) -> f64 {
        1.0 / (m * m)
            - self.y
                * self
                    .atoms
                    .iter()
                    .map(|a| {
                        let d = 1.0 + a.value * m;
                        a.weight * a.value * a.value / (d * d)
                    })
                    .sum::<f64>()
    }

    /// Bisection on the slope; `lo` and `hi` bracket a sign change.
    fn polish(&self, mut lo: f64, mut hi: f64) -> f64 {
        let s_lo = self.slope(lo) > 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * mid.abs() {
                break;
            }
            if (self.slope(mid) > 0.0) == s_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn segment_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut pts = Vec::with_capacity(2 * half);
    if lo.is_infinite() {
        // (-∞, hi): distances from the pole spread geometrically.
        let scale = hi.abs();
        for k in 0..2 * half {
            let e = -12.0 + 24.0 * k as f64 / (2 * half - 1) as f64;
            pts.push(hi - scale * 10f64.powf(e));
        }
    } else {
        let w = hi - lo;
        for k in 0..half {
            let e = -12.0 * (1.0 - k as f64 / half as f64);
            let d = 0.5 * w * 10f64.powf(e);
            pts.push(lo + d);
            pts.push(hi - d);
        }
    }
    pts.retain(|&m| m > lo && m < hi);
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// Support of the limiting ESD for ratio `y` and population bulk `H`.
///
/// Scans `λ(m̲) = -1/m̲ + y Σ w_j t_j/(1 + t_j m̲)` on the negative axis
/// between its poles. The image of every stretch where `λ` is increasing
/// lies outside the support; what remains of `(0, ∞)` is the support.
pub fn general_support(params: MpParams, bulk: &BulkSpectrum) -> SupportSet {
    let map = InverseMap {
        y: params.y(),
        atoms: bulk.atoms(),
    };
    let mut poles: Vec<f64> = bulk.atoms().iter().map(|a| -1.0 / a.value).collect();
    poles.sort_by(|a, b| a.total_cmp(b));

    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend(poles.iter().copied());
    bounds.push(0.0);

    // Images of increasing stretches: the complement of the support.
    let mut gaps: Vec<(f64, f64)> = vec![(f64::NEG_INFINITY, 0.0)];
    for seg in bounds.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let grid = segment_grid(lo, hi, SUPPORT_GRID);
        if grid.is_empty() {
            continue;
        }
        let mut run_start: Option<f64> = None;
        let mut prev = grid[0];
        let mut prev_up = map.slope(prev) > 0.0;
        if prev_up {
            run_start = Some(if lo.is_infinite() { 0.0 } else { map.value(prev) });
        }
        for &m in &grid[1..] {
            let up = map.slope(m) > 0.0;
            if up != prev_up {
                let root = map.polish(prev, m);
                let v = map.value(root);
                if up {
                    run_start = Some(v);
                } else if let Some(s) = run_start.take() {
                    gaps.push((s, v));
                }
            }
            prev = m;
            prev_up = up;
        }
        if let Some(s) = run_start {
            let end = if hi == 0.0 {
                f64::INFINITY
            } else {
                map.value(prev)
            };
            gaps.push((s, end));
        }
    }

    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for g in gaps {
        match merged.last_mut() {
            Some(last) if g.0 <= last.1 => last.1 = last.1.max(g.1),
            _ => merged.push(g),
        }
    }
    let intervals: Vec<(f64, f64)> = merged
        .windows(2)
        .map(|w| (w[0].1, w[1].0))
        .filter(|(l, r)| r - l > 1e-12 * r.abs().max(1.0))
        .collect();
    SupportSet::new(intervals).expect("gaps of a merged cover are ordered and disjoint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(y: f64) -> MpParams {
        MpParams::new(y).unwrap()
    }

    #[test]
    fn params_reject_out_of_range_ratio() {
        for y in [0.0, 1.0, -0.3, 1.5, f64::NAN] {
            assert!(MpParams::new(y).is_err(), "y={y}");
        }
    }

    #[test]
    fn support_edges() {
        let (a, b) = mp_support(p(0.5));
        assert_abs_diff_eq!(a, 0.0858, epsilon = 1e-4);
        assert_abs_diff_eq!(b, 2.9142, epsilon = 1e-4);
        let (a, b) = mp_support(p(0.25));
        assert_abs_diff_eq!(a, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 2.25, epsilon = 1e-15);
        let (a, b) = mp_support(p(1e-12));
        assert_abs_diff_eq!(a, 1.0, epsilon = 3e-6);
        assert_abs_diff_eq!(b, 1.0, epsilon = 3e-6);
    }

    #[test]
    fn density_values() {
        let q = p(0.5);
        let (a, b) = mp_support(q);
        assert_eq!(mp_density(a, q), 0.0);
        assert_eq!(mp_density(b, q), 0.0);
        assert_eq!(mp_density(b + 1.0, q), 0.0);
        assert_eq!(mp_density(-1.0, q), 0.0);
        // independent value: sqrt(2) / (2π · 1.5 · 0.5)
        assert_abs_diff_eq!(mp_density(1.5, q), 0.300105438719035, epsilon = 1e-12);
        let mass = mp_integral(|_| 1.0, q, 1e-13).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn stieltjes_reference_values() {
        let q = p(0.5);
        // mpmath quadrature at 30 digits
        assert_abs_diff_eq!(stieltjes_real(5.0, q).unwrap(), -0.259687576256715, epsilon = 1e-12);
        assert_abs_diff_eq!(stieltjes_real(0.01, q).unwrap(), 2.08518357704040, epsilon = 1e-11);
        let big = 1e6;
        let m = stieltjes_real(big, q).unwrap();
        assert!(((m * big) + 1.0).abs() < 1e-5);
        assert_abs_diff_eq!(stieltjes_real(0.0, q).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn stieltjes_rejects_support_and_keeps_upper_half_plane() {
        let q = p(0.3);
        assert!(stieltjes_real(1.0, q).is_err());
        for re in [-2.0, 0.0, 0.5, 1.0, 2.0, 5.0] {
            for im in [1e-3, 0.1, 1.0, 10.0] {
                let m = stieltjes(Complex64::new(re, im), q).unwrap();
                assert!(m.im > 0.0, "z={re}+{im}i m={m}");
                let mc = stieltjes(Complex64::new(re, -im), q).unwrap();
                assert_abs_diff_eq!(mc.im, -m.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn m_transforms_match_reference() {
        let q = p(0.5);
        let t = m_transforms(phi(4.0, q).unwrap(), q).unwrap();
        assert_abs_diff_eq!(t.m1, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.m2, 0.215686274509804, epsilon = 1e-11);
        assert_abs_diff_eq!(t.m3, 0.117647058823529, epsilon = 1e-11);
        let t5 = m_transforms(5.0, q).unwrap();
        assert_abs_diff_eq!(t5.m1, 0.298437881283576, epsilon = 1e-12);
        let far = m_transforms(1e8, q).unwrap();
        assert!(far.m1.abs() < 1e-7 && far.m2.abs() < 1e-14 && far.m3.abs() < 1e-14);
        assert!(m_transforms(1.0, q).is_err());
    }

    #[test]
    fn m_transform_signs() {
        let q = p(0.5);
        let above = m_transforms(4.0, q).unwrap();
        assert!(above.m1 > 0.0 && above.m2 > 0.0 && above.m3 > 0.0);
        let below = m_transforms(0.05, q).unwrap();
        assert!(below.m1 < 0.0 && below.m2 > 0.0 && below.m3 > 0.0);
    }

    #[test]
    fn closed_forms() {
        let q = p(0.5);
        assert_abs_diff_eq!(m_closed_forms(2.0, p(0.2)).unwrap().m1, 1.0, epsilon = 1e-15);
        let c = m_closed_forms(4.0, q).unwrap();
        assert_abs_diff_eq!(c.m1, 0.333333333333333, epsilon = 1e-14);
        assert_abs_diff_eq!(c.m2, 0.215686274509804, epsilon = 1e-14);
        assert_abs_diff_eq!(c.m3, 0.117647058823529, epsilon = 1e-14);
        let c = m_closed_forms(0.1, q).unwrap();
        assert_abs_diff_eq!(c.m1, -1.11111111111111, epsilon = 1e-13);
        assert_abs_diff_eq!(c.m3, 3.2258064516129, epsilon = 1e-12);
        assert!(matches!(
            m_closed_forms(1.2, q),
            Err(Error::CriticalInterval { .. })
        ));
    }

    #[test]
    fn stieltjes_agrees_with_quadrature_on_both_sides() {
        let q = p(0.5);
        let (a, b) = mp_support(q);
        for k in 0..10 {
            let above = b + 0.05 + 0.7 * k as f64;
            let below = a * (0.05 + 0.09 * k as f64);
            for l in [above, below] {
                let quad = mp_integral(|x| 1.0 / (x - l), q, 1e-13).unwrap();
                assert_abs_diff_eq!(stieltjes_real(l, q).unwrap(), quad, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for y in [0.2, 0.5, 0.9] {
            let q = p(y);
            for alpha in [4.0, 3.0, 2.0, 0.2, 0.1] {
                if q.in_critical_interval(alpha) {
                    continue;
                }
                let c = m_closed_forms(alpha, q).unwrap();
                let t = m_transforms(phi(alpha, q).unwrap(), q).unwrap();
                assert_abs_diff_eq!(c.m1, t.m1, epsilon = 1e-8);
                assert_abs_diff_eq!(c.m2, t.m2, epsilon = 1e-8);
                assert_abs_diff_eq!(c.m3, t.m3, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn phi_values_and_errors() {
        let q = p(0.5);
        assert_abs_diff_eq!(phi(4.0, q).unwrap(), 4.667, epsilon = 1e-3);
        assert_abs_diff_eq!(phi(0.1, q).unwrap(), 0.044, epsilon = 1e-3);
        assert_abs_diff_eq!(phi(3.0, q).unwrap(), 3.75, epsilon = 1e-14);
        match phi(1.5, q) {
            Err(Error::CriticalInterval { lo, hi, .. }) => {
                assert_abs_diff_eq!(lo, 0.293, epsilon = 1e-3);
                assert_abs_diff_eq!(hi, 1.707, epsilon = 1e-3);
            }
            other => panic!("expected critical-interval error, got {other:?}"),
        }
        assert!(phi(-1.0, q).is_err());
    }

    #[test]
    fn phi_inverse_values() {
        let q = p(0.5);
        assert_abs_diff_eq!(phi_inverse(14.0 / 3.0, q, Side::Above).unwrap(), 4.0, epsilon = 1e-12);
        let l = phi(0.1, q).unwrap();
        assert_abs_diff_eq!(phi_inverse(l, q, Side::Below).unwrap(), 0.1, epsilon = 1e-12);
        let b = q.upper_edge();
        let edge = phi_inverse(b + 1e-12, q, Side::Above).unwrap();
        assert_abs_diff_eq!(edge, 1.0 + 0.5f64.sqrt(), epsilon = 1e-5);
        assert!(phi_inverse(1.0, q, Side::Above).is_err());
        assert!(phi_inverse(1.0, q, Side::Below).is_err());
        assert!(phi_inverse(b, q, Side::Above).is_err());
    }

    #[test]
    fn psi_values() {
        let q = p(0.2);
        let bulk = BulkSpectrum::new(vec![
            Atom { value: 1.0, weight: 0.5 },
            Atom { value: 10.0, weight: 0.5 },
        ])
        .unwrap();
        let five = psi(5.0, q, &bulk).unwrap();
        assert_abs_diff_eq!(five.value, 4.125, epsilon = 1e-12);
        assert!(five.separated);
        assert_abs_diff_eq!(psi(4.0, q, &bulk).unwrap().value, 3.46666666666667, epsilon = 1e-12);
        assert_abs_diff_eq!(psi(3.0, q, &bulk).unwrap().value, 2.72142857142857, epsilon = 1e-12);
        assert!(matches!(psi(10.0, q, &bulk), Err(Error::Singularity { .. })));
        // lands inside the lower band: reported, not rejected
        let inside = psi(8.9, q, &bulk).unwrap();
        assert!(inside.value > 0.3953 && inside.value < 1.5793);
        assert!(!inside.separated);
    }

    #[test]
    fn two_atom_support_matches_polynomial_oracle() {
        // Critical points of λ(m̲) from the cleared-denominator polynomial,
        // solved at 30 digits.
        let bulk = BulkSpectrum::new(vec![
            Atom { value: 1.0, weight: 0.5 },
            Atom { value: 10.0, weight: 0.5 },
        ])
        .unwrap();
        let s = general_support(p(0.2), &bulk);
        let iv = s.intervals();
        assert_eq!(iv.len(), 2);
        let expect = [
            (0.395258439692724, 1.57938298093550),
            (4.79258147626334, 17.4327771031084),
        ];
        for (got, want) in iv.iter().zip(expect) {
            assert_abs_diff_eq!(got.0, want.0, epsilon = 1e-9);
            assert_abs_diff_eq!(got.1, want.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn unit_bulk_support_is_mp() {
        for y in [0.05, 0.2, 0.5, 0.9] {
            let s = general_support(p(y), &BulkSpectrum::unit());
            let (a, b) = mp_support(p(y));
            assert_eq!(s.intervals().len(), 1);
            assert_abs_diff_eq!(s.lower(), a, epsilon = 1e-8);
            assert_abs_diff_eq!(s.upper(), b, epsilon = 1e-8);
        }
        let s = general_support(p(0.2), &BulkSpectrum::unit());
        assert_abs_diff_eq!(s.lower(), 0.305572809000084, epsilon = 1e-10);
        assert_abs_diff_eq!(s.upper(), 2.09442719099992, epsilon = 1e-10);
    }

    #[test]
    fn bulk_validation() {
        let bad = |v: Vec<(f64, f64)>| {
            BulkSpectrum::new(v.into_iter().map(|(value, weight)| Atom { value, weight }).collect())
                .is_err()
        };
        assert!(bad(vec![]));
        assert!(bad(vec![(1.0, 0.6), (2.0, 0.6)]));
        assert!(bad(vec![(1.0, 0.5), (1.0, 0.5)]));
        assert!(bad(vec![(-1.0, 1.0)]));
        assert!(bad(vec![(1.0, 1.0), (2.0, 0.0)]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn phi_round_trips_above(y in 0.01f64..0.99, excess in 1e-3f64..50.0) {
                let q = p(y);
                let alpha = 1.0 + y.sqrt() + excess;
                let l = phi(alpha, q).unwrap();
                prop_assert!(l > q.upper_edge());
                let back = phi_inverse(l, q, Side::Above).unwrap();
                prop_assert!((back - alpha).abs() <= 1e-10 * alpha.max(1.0));
                prop_assert!((phi(back, q).unwrap() - l).abs() <= 1e-10 * l);
            }

            #[test]
            fn phi_round_trips_below(y in 0.01f64..0.99, frac in 0.001f64..0.999) {
                let q = p(y);
                let alpha = frac * (1.0 - y.sqrt());
                let l = phi(alpha, q).unwrap();
                prop_assert!(l > 0.0 && l < q.lower_edge());
                let back = phi_inverse(l, q, Side::Below).unwrap();
                prop_assert!((back - alpha).abs() <= 1e-10);
            }

            #[test]
            fn phi_is_increasing_above(y in 0.01f64..0.99, e1 in 1e-3f64..20.0, d in 1e-3f64..20.0) {
                let q = p(y);
                let a1 = 1.0 + y.sqrt() + e1;
                prop_assert!(phi(a1 + d, q).unwrap() > phi(a1, q).unwrap());
            }

            #[test]
            fn psi_with_unit_bulk_is_phi(y in 0.01f64..0.99, alpha in 0.01f64..30.0) {
                let q = p(y);
                prop_assume!(!q.in_critical_interval(alpha));
                let a = psi_value(alpha, q, &BulkSpectrum::unit()).unwrap();
                let b = phi(alpha, q).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }

            #[test]
            fn stieltjes_is_bounded_by_inverse_distance(y in 0.01f64..0.99, re in -5.0f64..10.0, im in -3.0f64..3.0) {
                let q = p(y);
                let z = Complex64::new(re, im);
                let (a, b) = mp_support(q);
                let dx = if re < a { a - re } else if re > b { re - b } else { 0.0 };
                let dist = (dx * dx + im * im).sqrt();
                prop_assume!(dist > 1e-3);
                let m = stieltjes(z, q).unwrap();
                prop_assert!(m.norm() <= 1.0 / dist + 1e-9);
            }
        }
    }
}
