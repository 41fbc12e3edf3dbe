//! Limiting fluctuation laws of the packed sample eigenvalues.
//!
//! For a tracked spike `α` with multiplicity `n_k`, the rescaled deviations
//! `√n(λ_{n,j} - φ(α))`, `j ∈ J_k`, converge to the eigenvalues of
//! `R / (1 + y m₃ α)`, where `R` is an `n_k × n_k` symmetric (or Hermitian)
//! Gaussian matrix whose covariance is assembled from `θ`, `ω` and the
//! entry moments.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigs, HermitianMatrix};
use crate::model::EntryLaw;
use crate::sesquiform::{self, FormStats, MomentSpec, Term, Var};
use crate::spectra::{self, MpParams};

/// `θ`, `ω` and, for complex data, `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaOmega {
    pub theta: f64,
    pub omega: f64,
    pub tau: Option<f64>,
}

impl ThetaOmega {
    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau: Some(tau), ..self }
    }

    /// Real data: `τ = θ`.
    pub fn real_form_stats(&self) -> FormStats {
        FormStats { omega: self.omega, theta: self.theta, tau: self.theta }
    }

    /// Complex data: `τ` must have been supplied.
    pub fn complex_form_stats(&self) -> Result<FormStats> {
        let tau = self
            .tau
            .ok_or_else(|| Error::MissingMoment("tau is required for complex data".into()))?;
        Ok(FormStats { omega: self.omega, theta: self.theta, tau })
    }
}

/// `θ` and `ω` at `λ = φ(α)` in closed form.
pub fn theta_omega(alpha: f64, params: MpParams) -> Result<ThetaOmega> {
    spectra::m_closed_forms(alpha, params)?;
    let y = params.y();
    let d = alpha - 1.0;
    Ok(ThetaOmega {
        theta: (d + y).powi(2) / (d * d - y),
        omega: (1.0 + y / d).powi(2),
        tau: None,
    })
}

/// `θ = 1 + 2y m₁ + y m₂` and
/// `ω = 1 + 2y m₁ + (y(1 + m₁)/(λ - y(1 + m₁)))²` at any `λ` outside the
/// support, with `m₁`, `m₂` by quadrature.
pub fn theta_omega_at(lambda: f64, params: MpParams) -> Result<ThetaOmega> {
    let m = spectra::m_transforms(lambda, params)?;
    let y = params.y();
    let r = y * (1.0 + m.m1);
    Ok(ThetaOmega {
        theta: 1.0 + 2.0 * y * m.m1 + y * m.m2,
        omega: 1.0 + 2.0 * y * m.m1 + (r / (lambda - r)).powi(2),
        tau: None,
    })
}

/// `1/(1 + y m₃(φ(α)) α)`.
pub fn limit_scale(alpha: f64, params: MpParams) -> Result<f64> {
    let m3 = spectra::m_closed_forms(alpha, params)?.m3;
    Ok(1.0 / (1.0 + params.y() * m3 * alpha))
}

/// `σ²(α) = 2α²((α - 1)² - y)/(α - 1)²`, the Gaussian-entry variance of a
/// simple spike.
pub fn sigma2(alpha: f64, params: MpParams) -> Result<f64> {
    spectra::m_closed_forms(alpha, params)?;
    let d = alpha - 1.0;
    Ok(2.0 * alpha * alpha * (d * d - params.y()) / (d * d))
}

/// `s²(α) = σ²(α) y/(α - 1)²`, the variance for `±1` entries.
pub fn s2_binary(alpha: f64, params: MpParams) -> Result<f64> {
    Ok(sigma2(alpha, params)? * params.y() / (alpha - 1.0).powi(2))
}

/// Moments of independent, zero-mean coordinates `ξ(1..M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMoments {
    /// `E|ξ(i)|²`
    pub variance: Vec<f64>,
    /// `E|ξ(i)|⁴`
    pub fourth: Vec<f64>,
    /// `E ξ(i)²`; equals the variance for real coordinates.
    pub pseudo: Vec<Complex64>,
    pub complex: bool,
}

impl CoordinateMoments {
    pub fn real(variance: Vec<f64>, fourth: Vec<f64>) -> Result<Self> {
        if variance.len() != fourth.len() {
            return Err(Error::Dimension("variance and fourth-moment lengths differ".into()));
        }
        let pseudo = variance.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(Self { variance, fourth, pseudo, complex: false })
    }

    /// Complex coordinates with `E ξ² = 0`.
    pub fn circular(variance: Vec<f64>, fourth: Vec<f64>) -> Result<Self> {
        if variance.len() != fourth.len() {
            return Err(Error::Dimension("variance and fourth-moment lengths differ".into()));
        }
        let pseudo = vec![Complex64::new(0.0, 0.0); variance.len()];
        Ok(Self { variance, fourth, pseudo, complex: true })
    }

    /// `ξ(i) = √Σ_ii · ε` for a standardized entry law.
    pub fn from_entry_law(diag: &[f64], law: EntryLaw) -> Result<Self> {
        let fourth = diag.iter().map(|a| a * a * law.fourth_moment()).collect();
        if law.is_complex() {
            Self::circular(diag.to_vec(), fourth)
        } else {
            Self::real(diag.to_vec(), fourth)
        }
    }

    pub fn dim(&self) -> usize {
        self.variance.len()
    }

    /// Joint moment of coordinate factors `(index, conjugated)`.
    fn joint(&self, factors: &[(usize, bool)]) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let mut idx: Vec<usize> = factors.iter().map(|f| f.0).collect();
        idx.sort_unstable();
        idx.dedup();
        let mut out = Complex64::new(1.0, 0.0);
        for i in idx {
            let group: Vec<bool> = factors.iter().filter(|f| f.0 == i).map(|f| f.1).collect();
            let conj = group.iter().filter(|&&c| c).count();
            let v = match (group.len(), conj) {
                (2, 1) => Complex64::new(self.variance[i], 0.0),
                (2, 0) => self.pseudo[i],
                (2, 2) => self.pseudo[i].conj(),
                (4, 2) => Complex64::new(self.fourth[i], 0.0),
                (4, _) if !self.complex => Complex64::new(self.fourth[i], 0.0),
                // Odd groups vanish; the forms built here never produce
                // unbalanced complex groups of four.
                _ => zero,
            };
            out *= v;
        }
        out
    }

    /// Moments of the `K = M(M+1)/2` forms indexed by `ℓ = (i, j)`, `i ≤ j`:
    /// `x_ℓ = ξ(i)`, `y_ℓ = ξ(j)` for real data and `x_ℓ = ξ̄(i)`,
    /// `y_ℓ = ξ̄(j)` for complex data.
    pub fn pair_moments(&self) -> MomentSpec {
        let pairs = upper_pairs(self.dim());
        let base = self.complex;
        let factor = |t: Term| {
            let i = match t.var {
                Var::X(l) => pairs[l].0,
                Var::Y(l) => pairs[l].1,
            };
            (i, t.conj ^ base)
        };
        MomentSpec::from_joint(
            pairs.len(),
            |a, b| self.joint(&[factor(a), factor(b)]),
            |t| self.joint(&t.map(factor)),
        )
    }
}

/// Upper-triangle pairs `(i, j)`, `i ≤ j`, row by row.
pub fn upper_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect()
}

fn triangular_dim(k: usize) -> Result<usize> {
    let m = (((8 * k + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    if m * (m + 1) / 2 != k {
        return Err(Error::Dimension(format!("{k} is not a triangular number of pairs")));
    }
    Ok(m)
}

/// Covariance of the upper triangle of the limit matrix `R`.
///
/// Real case: `matrix[ℓ, ℓ'] = cov(R_ℓ, R_ℓ')` over `K` pairs. Complex
/// case: the `2K × 2K` covariance of `(Re R_ℓ, Im R_ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RCovariance {
    pub dim: usize,
    pub pairs: Vec<(usize, usize)>,
    pub matrix: DMatrix<f64>,
    pub complex: bool,
}

impl RCovariance {
    fn pos(&self, (i, j): (usize, usize)) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.pairs.iter().position(|&p| p == key)
    }

    /// `cov(R_ij, R_i'j')` (real parts in the complex case).
    pub fn cov(&self, a: (usize, usize), b: (usize, usize)) -> Option<f64> {
        Some(self.matrix[(self.pos(a)?, self.pos(b)?)])
    }

    /// `var(Im R_ij)`; zero for real data.
    pub fn imag_var(&self, a: (usize, usize)) -> Option<f64> {
        if !self.complex {
            return self.pos(a).map(|_| 0.0);
        }
        let p = self.pos(a)?;
        let k = self.pairs.len();
        Some(self.matrix[(k + p, k + p)])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.matrix.clone()).eigenvalues.min()
    }
}

/// Covariance of the real limit matrix `R` from pair moments.
pub fn r_covariance_real(moments: &MomentSpec, to: &ThetaOmega) -> Result<RCovariance> {
    let dim = triangular_dim(moments.k())?;
    let scale = moments.m4.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if moments.max_imag() > 1e-12 * scale {
        return Err(Error::Precondition("real R covariance needs real moments".into()));
    }
    let b = sesquiform::b_covariance(moments, &to.real_form_stats())?;
    Ok(RCovariance {
        dim,
        pairs: upper_pairs(dim),
        matrix: b.map(|v| v.re),
        complex: false,
    })
}

/// `2K`-dimensional covariance of `(Re R, Im R)` for complex data.
pub fn gamma_complex(moments: &MomentSpec, to: &ThetaOmega) -> Result<RCovariance> {
    let dim = triangular_dim(moments.k())?;
    let g = sesquiform::gamma(moments, &to.complex_form_stats()?)?;
    Ok(RCovariance { dim, pairs: upper_pairs(dim), matrix: g, complex: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitKind {
    ScalarGaussian {
        variance: f64,
    },
    /// Eigenvalues of `scale · R` with `R` of size `size`; `offdiag_variance`
    /// is `E|R_ij|²`, split evenly between real and imaginary parts for
    /// complex data.
    MatrixEigLaw {
        size: usize,
        diag_variance: f64,
        offdiag_variance: f64,
        scale: f64,
    },
}

/// Law of `√n(λ_{n,j} - φ(α))` over the packed positions of one spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub kind: LimitKind,
    pub alpha: f64,
    pub y: f64,
    pub beta: f64,
    pub complex: bool,
}

impl LimitLaw {
    pub fn size(&self) -> usize {
        match self.kind {
            LimitKind::ScalarGaussian { .. } => 1,
            LimitKind::MatrixEigLaw { size, .. } => size,
        }
    }

    /// A scalar Gaussian law with the given variance.
    pub fn scalar(variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
        }
        Ok(Self {
            kind: LimitKind::ScalarGaussian { variance },
            alpha: f64::NAN,
            y: f64::NAN,
            beta: f64::NAN,
            complex: false,
        })
    }
}

/// Limit law of a spike with independent coordinates and diagonal `Σ`.
///
/// Diagonal variance of `R`: `(2θ + βω)α²` (real), `(θ + β'ω)α²`
/// (complex). Off-diagonal `E|R_ij|² = θα²`. Scale `1/(1 + y m₃ α)`.
pub fn limit_law(alpha: f64, multiplicity: usize, params: MpParams, entry: EntryLaw) -> Result<LimitLaw> {
    if multiplicity == 0 {
        return Err(Error::InvalidParameter("multiplicity must be positive".into()));
    }
    let to = theta_omega(alpha, params)?;
    let scale = limit_scale(alpha, params)?;
    let beta = entry.beta();
    let a2 = alpha * alpha;
    let diag = if entry.is_complex() {
        (to.theta + beta * to.omega) * a2
    } else {
        (2.0 * to.theta + beta * to.omega) * a2
    };
    if !(diag > 0.0) {
        return Err(Error::Precondition(format!(
            "degenerate diagonal variance {diag} at alpha = {alpha}"
        )));
    }
    let kind = if multiplicity == 1 {
        LimitKind::ScalarGaussian { variance: scale * scale * diag }
    } else {
        LimitKind::MatrixEigLaw {
            size: multiplicity,
            diag_variance: diag,
            offdiag_variance: to.theta * a2,
            scale,
        }
    };
    Ok(LimitLaw { kind, alpha, y: params.y(), beta, complex: entry.is_complex() })
}

/// `count` independent draws, each a descending tuple of `law.size()` values.
pub fn sample_limit_law<R: Rng + ?Sized>(law: &LimitLaw, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    match law.kind {
        LimitKind::ScalarGaussian { variance } => {
            let sd = variance.sqrt();
            for _ in 0..count {
                out.push(vec![sd * rng.sample::<f64, _>(StandardNormal)]);
            }
        }
        LimitKind::MatrixEigLaw { size, diag_variance, offdiag_variance, scale } => {
            let sd_d = scale * diag_variance.sqrt();
            let sd_o = scale * offdiag_variance.sqrt();
            let mut normal = || rng.sample::<f64, _>(StandardNormal);
            for _ in 0..count {
                if law.complex {
                    let h = std::f64::consts::FRAC_1_SQRT_2;
                    let mut m = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
                    for i in 0..size {
                        m[(i, i)] = Complex64::new(sd_d * normal(), 0.0);
                        for j in i + 1..size {
                            let v = Complex64::new(sd_o * h * normal(), sd_o * h * normal());
                            m[(i, j)] = v;
                            m[(j, i)] = v.conj();
                        }
                    }
                    out.push(eigenvalues(HermitianMatrix::Complex(m)));
                } else if size == 2 {
                    let (a, c) = (sd_d * normal(), sd_d * normal());
                    let b = sd_o * normal();
                    let mid = 0.5 * (a + c);
                    let rad = (0.25 * (a - c).powi(2) + b * b).sqrt();
                    out.push(vec![mid + rad, mid - rad]);
                } else {
                    let mut m = DMatrix::zeros(size, size);
                    for i in 0..size {
                        m[(i, i)] = sd_d * normal();
                        for j in i + 1..size {
                            let v = sd_o * normal();
                            m[(i, j)] = v;
                            m[(j, i)] = v;
                        }
                    }
                    out.push(eigenvalues(HermitianMatrix::Real(m)));
                }
            }
        }
    }
    out
}

fn eigenvalues(m: HermitianMatrix) -> Vec<f64> {
    hermitian_eigs(&m, false)
        .expect("matrices assembled symmetric by construction")
        .values
}

/// Unordered joint density of the two eigenvalues of `σ W` for a 2 × 2
/// real Gaussian–Wigner `W`:
/// `|δ - γ| exp(-(δ² + γ²)/(2σ²)) / (4σ³√π)`. Requires `σ > 0`.
pub fn wigner_pair_density(delta: f64, gamma: f64, sigma: f64) -> f64 {
    (delta - gamma).abs() * (-(delta * delta + gamma * gamma) / (2.0 * sigma * sigma)).exp()
        / (4.0 * sigma.powi(3) * std::f64::consts::PI.sqrt())
}
