//! Central limit theorem for random sesquilinear and quadratic forms.
//!
//! For i.i.d. pairs `(x_u, y_u) ∈ ℂᴷ × ℂᴷ` and an `n × n` Hermitian weight
//! matrix `A`, the vector
//! `Z_ℓ = n^{-1/2} [X(ℓ)* A Y(ℓ) - ρ(ℓ) tr A]`
//! is asymptotically Gaussian. Its pseudo-covariance `B = E[ZZᵀ]` and its
//! covariance `C = E[ZZ*]` depend on `A` only through
//! `ω = n⁻¹ Σ a_uu²`, `θ = n⁻¹ Σ |a_uv|²` and `τ = n⁻¹ Σ a_uv²`.
//!
//! Moment tables use the conventions below (`ℓ` rows, `ℓ'` columns):
//!
//! | field | entry |
//! |-------|-------|
//! | `rho`  | `E[x̄_ℓ y_ℓ]` |
//! | `m4`   | `E[x̄_ℓ y_ℓ x̄_ℓ' y_ℓ']` |
//! | `m4c`  | `E[x̄_ℓ y_ℓ x_ℓ' ȳ_ℓ']` |
//! | `cxy`  | `E[x̄_ℓ y_ℓ']` |
//! | `pxx`  | `E[x̄_ℓ x̄_ℓ']` |
//! | `pyy`  | `E[y_ℓ y_ℓ']` |
//! | `hxx`  | `E[x̄_ℓ x_ℓ']` |
//! | `hyy`  | `E[y_ℓ ȳ_ℓ']` |
//! | `pxy`  | `E[x̄_ℓ ȳ_ℓ']` |

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-`n` values of `ω`, `θ`, `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormStats {
    pub omega: f64,
    pub theta: f64,
    pub tau: f64,
}

/// `ω_n`, `θ_n`, `τ_n` of a Hermitian weight matrix.
pub fn form_stats<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) -> Result<FormStats> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension(format!(
            "weight matrix must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    let mut asym: f64 = 0.0;
    let (mut omega, mut theta, mut tau) = (0.0, 0.0, 0.0);
    for v in 0..n {
        for u in 0..n {
            let x = a[(u, v)];
            asym = asym.max((x - a[(v, u)].conjugate()).modulus());
            theta += x.modulus_squared();
            tau += (x * x).real();
        }
        omega += a[(v, v)].real().powi(2);
    }
    if asym > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(asym / scale));
    }
    let nf = n as f64;
    Ok(FormStats { omega: omega / nf, theta: theta / nf, tau: tau / nf })
}

/// Population moments of the pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSpec {
    pub rho: DVector<Complex64>,
    pub m4: DMatrix<Complex64>,
    pub m4c: DMatrix<Complex64>,
    pub cxy: DMatrix<Complex64>,
    pub pxx: DMatrix<Complex64>,
    pub pyy: DMatrix<Complex64>,
    pub hxx: DMatrix<Complex64>,
    pub hyy: DMatrix<Complex64>,
    pub pxy: DMatrix<Complex64>,
    /// Standard errors of every entry when the spec was estimated; real and
    /// imaginary parts carry the errors of the respective parts.
    pub standard_errors: Option<Box<MomentSpec>>,
}

/// One factor of a moment: `x_ℓ` or `y_ℓ`, optionally conjugated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Term {
    pub var: Var,
    pub conj: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    Y(usize),
}

fn x(l: usize) -> Term {
    Term { var: Var::X(l), conj: false }
}
fn xb(l: usize) -> Term {
    Term { var: Var::X(l), conj: true }
}
fn y(l: usize) -> Term {
    Term { var: Var::Y(l), conj: false }
}
fn yb(l: usize) -> Term {
    Term { var: Var::Y(l), conj: true }
}

impl MomentSpec {
    /// Number of forms `K`.
    pub fn k(&self) -> usize {
        self.rho.len()
    }

    /// Builds every table from second and fourth joint moments of the terms.
    pub fn from_joint(
        k: usize,
        e2: impl Fn(Term, Term) -> Complex64,
        e4: impl Fn([Term; 4]) -> Complex64,
    ) -> Self {
        let tab2 = |f: &dyn Fn(usize, usize) -> (Term, Term)| {
            DMatrix::from_fn(k, k, |l, lp| {
                let (a, b) = f(l, lp);
                e2(a, b)
            })
        };
        Self {
            rho: DVector::from_fn(k, |l, _| e2(xb(l), y(l))),
            m4: DMatrix::from_fn(k, k, |l, lp| e4([xb(l), y(l), xb(lp), y(lp)])),
            m4c: DMatrix::from_fn(k, k, |l, lp| e4([xb(l), y(l), x(lp), yb(lp)])),
            cxy: tab2(&|l, lp| (xb(l), y(lp))),
            pxx: tab2(&|l, lp| (xb(l), xb(lp))),
            pyy: tab2(&|l, lp| (y(l), y(lp))),
            hxx: tab2(&|l, lp| (xb(l), x(lp))),
            hyy: tab2(&|l, lp| (y(l), yb(lp))),
            pxy: tab2(&|l, lp| (xb(l), yb(lp))),
            standard_errors: None,
        }
    }

    /// Real jointly Gaussian `(x, y)` with covariance `cov` of the stacked
    /// vector `(x₁…x_K, y₁…y_K)`; fourth moments by Isserlis' theorem.
    pub fn real_gaussian(cov: &DMatrix<f64>) -> Result<Self> {
        let d = cov.nrows();
        if d == 0 || !d.is_multiple_of(2) || cov.ncols() != d {
            return Err(Error::Dimension(format!(
                "covariance must be 2K x 2K, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if (cov - cov.transpose()).amax() > 1e-12 * cov.amax() {
            return Err(Error::NotHermitian((cov - cov.transpose()).amax()));
        }
        let k = d / 2;
        let idx = |t: Term| match t.var {
            Var::X(l) => l,
            Var::Y(l) => k + l,
        };
        let c = |a: Term, b: Term| cov[(idx(a), idx(b))];
        Ok(Self::from_joint(
            k,
            |a, b| Complex64::new(c(a, b), 0.0),
            |[a, b, e, f]| Complex64::new(c(a, b) * c(e, f) + c(a, e) * c(b, f) + c(a, f) * c(b, e), 0.0),
        ))
    }

    /// Sample moments of `N` observed pairs (columns of `x` and `y`), with
    /// standard errors.
    pub fn from_samples(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> Result<Self> {
        let (k, n) = x.shape();
        if y.shape() != (k, n) || k == 0 {
            return Err(Error::Dimension(format!(
                "sample blocks must share a K x N shape, got {:?} and {:?}",
                x.shape(),
                y.shape()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewReplications { got: n, need: 2 });
        }
        let val = |t: Term, s: usize| {
            let v = match t.var {
                Var::X(l) => x[(l, s)],
                Var::Y(l) => y[(l, s)],
            };
            if t.conj {
                v.conj()
            } else {
                v
            }
        };
        let mean_se = |f: &dyn Fn(usize) -> Complex64| {
            let nf = n as f64;
            let (mut sum, mut sq_re, mut sq_im) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
            for s in 0..n {
                let v = f(s);
                sum += v;
                sq_re += v.re * v.re;
                sq_im += v.im * v.im;
            }
            let m = sum / nf;
            let var = |sq: f64, mu: f64| ((sq - nf * mu * mu) / (nf - 1.0)).max(0.0);
            let se = Complex64::new(
                (var(sq_re, m.re) / nf).sqrt(),
                (var(sq_im, m.im) / nf).sqrt(),
            );
            (m, se)
        };
        let mean = Self::from_joint(
            k,
            |a, b| mean_se(&|s| val(a, s) * val(b, s)).0,
            |t| mean_se(&|s| t.iter().map(|&u| val(u, s)).product()).0,
        );
        let se = Self::from_joint(
            k,
            |a, b| mean_se(&|s| val(a, s) * val(b, s)).1,
            |t| mean_se(&|s| t.iter().map(|&u| val(u, s)).product()).1,
        );
        Ok(Self { standard_errors: Some(Box::new(se)), ..mean })
    }

    /// Real-valued convenience wrapper around [`MomentSpec::from_samples`].
    pub fn from_real_samples(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
        Self::from_samples(&c(x), &c(y))
    }

    fn tables(&self) -> [&DMatrix<Complex64>; 8] {
        [&self.m4, &self.m4c, &self.cxy, &self.pxx, &self.pyy, &self.hxx, &self.hyy, &self.pxy]
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::MissingMoment("empty moment spec".into()));
        }
        for t in self.tables() {
            if t.shape() != (k, k) {
                return Err(Error::Dimension(format!(
                    "moment table has shape {:?}, expected {k}x{k}",
                    t.shape()
                )));
            }
        }
        let finite = |v: &Complex64| v.re.is_finite() && v.im.is_finite();
        if !self.rho.iter().all(finite) || !self.tables().iter().all(|t| t.iter().all(finite)) {
            return Err(Error::MissingMoment("non-finite moment entry".into()));
        }
        Ok(())
    }

    /// Largest imaginary part across all tables.
    pub fn max_imag(&self) -> f64 {
        self.tables()
            .iter()
            .flat_map(|t| t.iter())
            .chain(self.rho.iter())
            .map(|v| v.im.abs())
            .fold(0.0, f64::max)
    }
}

/// `Z_ℓ = n^{-1/2}[X(ℓ)* A Y(ℓ) - ρ(ℓ) tr A]` for `K × n` blocks `x`, `y`.
pub fn z_vector<T: ComplexField<RealField = f64> + Copy>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    a: &DMatrix<T>,
    rho: &[T],
) -> Result<DVector<T>> {
    let (k, n) = x.shape();
    if y.shape() != (k, n) || a.shape() != (n, n) || rho.len() != k {
        return Err(Error::Dimension(format!(
            "z_vector: x {:?}, y {:?}, A {:?}, rho {}",
            x.shape(),
            y.shape(),
            a.shape(),
            rho.len()
        )));
    }
    let ay = a * y.transpose();
    let tr = a.trace();
    let scale = T::from_real(1.0 / (n as f64).sqrt());
    Ok(DVector::from_fn(k, |l, _| {
        let mut acc = T::zero();
        for u in 0..n {
            acc += x[(l, u)].conjugate() * ay[(u, l)];
        }
        (acc - rho[l] * tr) * scale
    }))
}

/// Pseudo-covariance `B = B₁ + B₂ + B₃`, complex symmetric.
pub fn b_covariance(m: &MomentSpec, s: &FormStats) -> Result<DMatrix<Complex64>> {
    m.validate()?;
    let k = m.k();
    Ok(DMatrix::from_fn(k, k, |l, lp| {
        let b1 = s.omega * (m.m4[(l, lp)] - m.rho[l] * m.rho[lp]);
        let b2 = (s.theta - s.omega) * m.cxy[(l, lp)] * m.cxy[(lp, l)];
        let b3 = (s.tau - s.omega) * m.pxx[(l, lp)] * m.pyy[(l, lp)];
        b1 + b2 + b3
    }))
}

/// Covariance `C = E[ZZ*]` of the limit, Hermitian.
pub fn cross_covariance(m: &MomentSpec, s: &FormStats) -> Result<DMatrix<Complex64>> {
    m.validate()?;
    let k = m.k();
    Ok(DMatrix::from_fn(k, k, |l, lp| {
        let c1 = s.omega * (m.m4c[(l, lp)] - m.rho[l] * m.rho[lp].conj());
        let c2 = (s.theta - s.omega) * m.hxx[(l, lp)] * m.hyy[(l, lp)];
        let c3 = (s.tau - s.omega) * m.pxy[(l, lp)] * m.pxy[(lp, l)].conj();
        c1 + c2 + c3
    }))
}

/// Covariance `D = D₁ + D₂` of real quadratic forms `X(ℓ)ᵀ A X(ℓ)`.
///
/// Reads `γ` from `cxy` and `E[x_ℓ² x_ℓ'²]` from `m4`, so the spec must
/// describe a real pair with `y = x`.
pub fn d_covariance(m: &MomentSpec, s: &FormStats) -> Result<DMatrix<f64>> {
    m.validate()?;
    let scale = m.m4.amax_by(|v| v.norm()).max(1.0);
    if m.max_imag() > 1e-12 * scale {
        return Err(Error::Precondition("quadratic forms need real moments".into()));
    }
    let k = m.k();
    let g = |l: usize, lp: usize| m.cxy[(l, lp)].re;
    Ok(DMatrix::from_fn(k, k, |l, lp| {
        let d1 = s.omega * (m.m4[(l, lp)].re - g(l, l) * g(lp, lp));
        let d2 = (s.theta - s.omega) * (g(l, lp) * g(lp, l) + g(l, lp).powi(2));
        d1 + d2
    }))
}

trait AmaxBy {
    fn amax_by(&self, f: impl Fn(&Complex64) -> f64) -> f64;
}

impl AmaxBy for DMatrix<Complex64> {
    fn amax_by(&self, f: impl Fn(&Complex64) -> f64) -> f64 {
        self.iter().map(f).fold(0.0, f64::max)
    }
}

/// Covariance of `(Re Z, Im Z)` from the pseudo-covariance `b` and the
/// blocks `b_a`, `b_b` pairing `Z` with `Z̄`.
///
/// `Γ₁₁ = ¼(2 Re B + Re(B_a + B_b))`, `Γ₂₂ = ¼(-2 Re B + Re(B_a + B_b))`,
/// `Γ₁₂ = ½ Im B - ¼ Im(B_a - B_b)`. The last term vanishes for real
/// `B_a`, `B_b`; with `B_a = C` and `B_b = C̄` the result is exact.
pub fn gamma_from_blocks(
    b: &DMatrix<Complex64>,
    b_a: &DMatrix<Complex64>,
    b_b: &DMatrix<Complex64>,
) -> Result<DMatrix<f64>> {
    let k = b.nrows();
    if b.shape() != (k, k) || b_a.shape() != (k, k) || b_b.shape() != (k, k) {
        return Err(Error::Dimension(format!(
            "inconsistent blocks {:?}, {:?}, {:?}",
            b.shape(),
            b_a.shape(),
            b_b.shape()
        )));
    }
    let mut g = DMatrix::zeros(2 * k, 2 * k);
    for l in 0..k {
        for lp in 0..k {
            let bb = b[(l, lp)];
            let sum = b_a[(l, lp)] + b_b[(l, lp)];
            let diff = b_a[(l, lp)] - b_b[(l, lp)];
            g[(l, lp)] = 0.25 * (2.0 * bb.re + sum.re);
            g[(k + l, k + lp)] = 0.25 * (-2.0 * bb.re + sum.re);
            let g12 = 0.5 * bb.im - 0.25 * diff.im;
            g[(l, k + lp)] = g12;
            g[(k + lp, l)] = g12;
        }
    }
    Ok(g)
}

/// `Γ` for `(Re Z, Im Z)` built from `B` and `C`.
pub fn gamma(m: &MomentSpec, s: &FormStats) -> Result<DMatrix<f64>> {
    let b = b_covariance(m, s)?;
    let c = cross_covariance(m, s)?;
    gamma_from_blocks(&b, &c, &c.map(|v| v.conj()))
}
