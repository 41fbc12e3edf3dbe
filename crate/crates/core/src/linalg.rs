//! Hermitian eigendecomposition and resolvent statistics.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated by [`hermitian_eigs`].
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Real symmetric or complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum HermitianMatrix {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl HermitianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            Self::Real(m) => m.nrows(),
            Self::Complex(m) => m.nrows(),
        }
    }
}

/// Eigenvectors in the same scalar field as the input.
#[derive(Debug, Clone, PartialEq)]
pub enum EigenVectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Provenance of a sample spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    pub model_digest: String,
}

/// Eigenvalues sorted descending, optionally with their eigenvectors as
/// columns in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSample {
    pub values: Vec<f64>,
    pub vectors: Option<EigenVectors>,
    pub meta: Option<SampleMeta>,
}

impl EigenSample {
    /// Wraps an externally supplied spectrum, sorting it descending.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite eigenvalue".into()));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values, vectors: None, meta: None })
    }
}

fn check_hermitian<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.iter().map(|v| v.modulus()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in j..m.nrows() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conjugate()).modulus());
        }
    }
    if worst > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(worst / scale));
    }
    Ok(())
}

fn sorted_eigs<T: ComplexField<RealField = f64> + Copy>(
    m: &DMatrix<T>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DMatrix<T>>)> {
    check_hermitian(m)?;
    if !want_vectors {
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        return Ok((values, None));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = want_vectors.then(|| {
        DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])])
    });
    Ok((values, vectors))
}

/// All eigenvalues, descending; eigenvectors on request.
pub fn hermitian_eigs(matrix: &HermitianMatrix, want_vectors: bool) -> Result<EigenSample> {
    let (values, vectors) = match matrix {
        HermitianMatrix::Real(m) => {
            let (v, vec) = sorted_eigs(m, want_vectors)?;
            (v, vec.map(EigenVectors::Real))
        }
        HermitianMatrix::Complex(m) => {
            let (v, vec) = sorted_eigs(m, want_vectors)?;
            (v, vec.map(EigenVectors::Complex))
        }
    };
    Ok(EigenSample { values, vectors, meta: None })
}

/// Normalized traces of `A = X₂*(λI - X₂X₂*)⁻¹X₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventStats {
    /// `tr A / n`
    pub tr_a_over_n: f64,
    /// `tr AA* / n`
    pub tr_aastar_over_n: f64,
    /// `Σ a_ii² / n`
    pub sum_aii_sq_over_n: f64,
}

/// Resolvent statistics of the scaled `p × n` block `X₂`.
///
/// With `X₂X₂* = V diag(β) V*` and `W = V*X₂`:
/// `tr A = Σ β_k/(λ - β_k)`, `tr AA* = Σ β_k²/(λ - β_k)²` and
/// `a_ii = Σ_k |W_ki|²/(λ - β_k)`. The `n × n` matrix is never formed.
pub fn resolvent_stats<T: ComplexField<RealField = f64> + Copy>(
    x2: &DMatrix<T>,
    lambda: f64,
) -> Result<ResolventStats> {
    let n = x2.ncols();
    if n == 0 || x2.nrows() == 0 {
        return Err(Error::Dimension("empty data block".into()));
    }
    let gram = x2 * x2.adjoint();
    let eig = SymmetricEigen::new(gram);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &b| (l.min(b), h.max(b)));
    if (lo..=hi).contains(&lambda) {
        return Err(Error::InsideSupport { value: lambda, lo, hi });
    }
    let inv: Vec<f64> = eig.eigenvalues.iter().map(|&b| 1.0 / (lambda - b)).collect();
    let tr_a: f64 = eig.eigenvalues.iter().zip(&inv).map(|(b, r)| b * r).sum();
    let tr_aa: f64 = eig.eigenvalues.iter().zip(&inv).map(|(b, r)| (b * r).powi(2)).sum();
    let w = eig.eigenvectors.adjoint() * x2;
    let mut sum_sq = 0.0;
    for i in 0..n {
        let aii: f64 = w
            .column(i)
            .iter()
            .zip(&inv)
            .map(|(v, r)| v.modulus_squared() * r)
            .sum();
        sum_sq += aii * aii;
    }
    let nf = n as f64;
    Ok(ResolventStats {
        tr_a_over_n: tr_a / nf,
        tr_aastar_over_n: tr_aa / nf,
        sum_aii_sq_over_n: sum_sq / nf,
    })
}
