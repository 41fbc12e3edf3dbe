//! Spiked population models and seeded sampling of data matrices.
//!
//! The population vector is `x = (ξᵀ, ηᵀ)ᵀ`: the first `M` coordinates carry
//! the spikes, the remaining `p - M` coordinates form the bulk. Here `p` is
//! the full dimension of `x`, so a data matrix has `p` rows and `n` columns.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use crate::spectra::{self, BulkSpectrum, MpParams};

/// A population spike `α` with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spike {
    pub alpha: f64,
    pub multiplicity: usize,
}

/// Spikes sorted strictly descending by `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Spike>", into = "Vec<Spike>")]
pub struct SpikeSpec {
    spikes: Vec<Spike>,
}

impl SpikeSpec {
    /// Sorts the input; rejects duplicates, non-positive values and zero
    /// multiplicities.
    pub fn new(mut spikes: Vec<Spike>) -> Result<Self> {
        for s in &spikes {
            if !(s.alpha > 0.0) || !s.alpha.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "spike must be positive and finite, got {}",
                    s.alpha
                )));
            }
            if s.multiplicity == 0 {
                return Err(Error::InvalidParameter(format!(
                    "spike {} has zero multiplicity",
                    s.alpha
                )));
            }
        }
        spikes.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
        if spikes.windows(2).any(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::InvalidParameter("spike values must be distinct".into()));
        }
        Ok(Self { spikes })
    }

    pub fn empty() -> Self {
        Self { spikes: Vec::new() }
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    /// `M`, the dimension of the spike block.
    pub fn total_multiplicity(&self) -> usize {
        self.spikes.iter().map(|s| s.multiplicity).sum()
    }

    /// Spike values repeated by multiplicity, in block order.
    pub fn diagonal(&self) -> Vec<f64> {
        self.spikes
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.alpha, s.multiplicity))
            .collect()
    }
}

impl TryFrom<Vec<Spike>> for SpikeSpec {
    type Error = Error;
    fn try_from(v: Vec<Spike>) -> Result<Self> {
        SpikeSpec::new(v)
    }
}

impl From<SpikeSpec> for Vec<Spike> {
    fn from(s: SpikeSpec) -> Self {
        s.spikes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryFamily {
    Gaussian,
    Rademacher,
    /// Symmetric three-point law `{-c, 0, c}` tuned to the requested
    /// fourth-moment parameter.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryLawRepr {
    family: EntryFamily,
    #[serde(default)]
    complex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

/// Law of the standardized entries: zero mean, unit (absolute) variance.
///
/// `beta` is `E ξ⁴ - 3` for real laws and `E|ξ|⁴ - 2` for complex laws.
/// Complex laws all satisfy `E ξ² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EntryLawRepr", into = "EntryLawRepr")]
pub struct EntryLaw {
    family: EntryFamily,
    complex: bool,
    beta: f64,
}

impl EntryLaw {
    pub fn gaussian() -> Self {
        Self { family: EntryFamily::Gaussian, complex: false, beta: 0.0 }
    }

    pub fn rademacher() -> Self {
        Self { family: EntryFamily::Rademacher, complex: false, beta: -2.0 }
    }

    /// Real three-point law; needs `β ≥ -2`.
    pub fn custom(beta: f64) -> Result<Self> {
        if !(beta >= -2.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "real entry laws need beta >= -2, got {beta}"
            )));
        }
        Ok(Self { family: EntryFamily::Custom, complex: false, beta })
    }

    /// `(g₁ + i g₂)/√2`.
    pub fn complex_gaussian() -> Self {
        Self { family: EntryFamily::Gaussian, complex: true, beta: 0.0 }
    }

    /// `(ε₁ + i ε₂)/√2`.
    pub fn complex_rademacher() -> Self {
        Self { family: EntryFamily::Rademacher, complex: true, beta: -1.0 }
    }

    /// Uniform phase with a three-point modulus; needs `β' ≥ -1`.
    pub fn complex_custom(beta: f64) -> Result<Self> {
        if !(beta >= -1.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "complex entry laws need beta >= -1, got {beta}"
            )));
        }
        Ok(Self { family: EntryFamily::Custom, complex: true, beta })
    }

    pub fn family(&self) -> EntryFamily {
        self.family
    }

    pub fn is_complex(&self) -> bool {
        self.complex
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `E|ξ|⁴` for the standardized entry.
    pub fn fourth_moment(&self) -> f64 {
        if self.complex {
            self.beta + 2.0
        } else {
            self.beta + 3.0
        }
    }

    /// Standardized real draw.
    pub fn draw_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            EntryFamily::Gaussian => rng.sample(StandardNormal),
            EntryFamily::Rademacher => sign(rng),
            EntryFamily::Custom => {
                // P(ξ ≠ 0) = q with q c² = 1 and q c⁴ = β + 3.
                let q = 1.0 / (self.beta + 3.0);
                if rng.random::<f64>() < q {
                    sign(rng) / q.sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// Standardized complex draw with `E ξ² = 0`.
    pub fn draw_complex<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self.family {
            EntryFamily::Gaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * h, im * h)
            }
            EntryFamily::Rademacher => Complex64::new(sign(rng) * h, sign(rng) * h),
            EntryFamily::Custom => {
                // |ξ|² ∈ {0, 1/q} with P(ξ ≠ 0) = q and E|ξ|⁴ = 1/q = β' + 2.
                let q = 1.0 / (self.beta + 2.0);
                let phase = rng.random::<f64>() * std::f64::consts::TAU;
                if rng.random::<f64>() < q {
                    Complex64::from_polar(1.0 / q.sqrt(), phase)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

impl TryFrom<EntryLawRepr> for EntryLaw {
    type Error = Error;
    fn try_from(r: EntryLawRepr) -> Result<Self> {
        let law = match (r.family, r.complex) {
            (EntryFamily::Gaussian, false) => EntryLaw::gaussian(),
            (EntryFamily::Gaussian, true) => EntryLaw::complex_gaussian(),
            (EntryFamily::Rademacher, false) => EntryLaw::rademacher(),
            (EntryFamily::Rademacher, true) => EntryLaw::complex_rademacher(),
            (EntryFamily::Custom, complex) => {
                let beta = r.beta.ok_or_else(|| {
                    Error::InvalidParameter("custom entry law needs beta".into())
                })?;
                return if complex {
                    EntryLaw::complex_custom(beta)
                } else {
                    EntryLaw::custom(beta)
                };
            }
        };
        match r.beta {
            Some(b) if b != law.beta => Err(Error::InvalidParameter(format!(
                "beta {b} conflicts with the {:?} family (beta {})",
                law.family, law.beta
            ))),
            _ => Ok(law),
        }
    }
}

impl From<EntryLaw> for EntryLawRepr {
    fn from(l: EntryLaw) -> Self {
        Self {
            family: l.family,
            complex: l.complex,
            beta: (l.family == EntryFamily::Custom).then_some(l.beta),
        }
    }
}

/// Complete population specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpikedModel {
    pub spikes: SpikeSpec,
    #[serde(default = "BulkSpectrum::unit")]
    pub bulk: BulkSpectrum,
    #[serde(default = "EntryLaw::gaussian")]
    pub entry: EntryLaw,
    pub y: MpParams,
    /// Orthogonal `M × M` matrix `U` with `Σ = U diag(α) Uᵀ`; identity when
    /// absent.
    #[serde(skip)]
    rotation: Option<DMatrix<f64>>,
}

impl SpikedModel {
    pub fn new(spikes: SpikeSpec, bulk: BulkSpectrum, entry: EntryLaw, y: MpParams) -> Self {
        Self { spikes, bulk, entry, y, rotation: None }
    }

    pub fn with_rotation(mut self, u: DMatrix<f64>) -> Result<Self> {
        let m = self.spikes.total_multiplicity();
        if u.nrows() != m || u.ncols() != m {
            return Err(Error::Dimension(format!(
                "rotation must be {m}x{m}, got {}x{}",
                u.nrows(),
                u.ncols()
            )));
        }
        let defect = (u.transpose() * &u - DMatrix::identity(m, m)).amax();
        if defect > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthogonal (defect {defect:e})"
            )));
        }
        self.rotation = Some(u);
        Ok(self)
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    /// Whether spike `k` produces outlier sample eigenvalues.
    ///
    /// Unit bulk: `α` outside the critical interval. General bulk: `ψ(α)`
    /// lands outside the support of the limiting spectral distribution.
    pub fn is_tracked(&self, k: usize) -> bool {
        let Some(s) = self.spikes.spikes().get(k) else {
            return false;
        };
        if self.bulk.is_unit() {
            !self.y.in_critical_interval(s.alpha)
        } else {
            spectra::psi(s.alpha, self.y, &self.bulk).is_ok_and(|v| v.separated)
        }
    }

    /// Almost-sure limit of the sample eigenvalues attached to spike `k`.
    pub fn center(&self, k: usize) -> Result<f64> {
        let s = self.spikes.spikes().get(k).ok_or_else(|| {
            Error::Precondition(format!("no spike with index {k}"))
        })?;
        if self.bulk.is_unit() {
            spectra::phi(s.alpha, self.y)
        } else {
            spectra::psi_value(s.alpha, self.y, &self.bulk)
        }
    }
}

/// Rows `0..spike_rows` hold the spike block, the rest the bulk block.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Real { entries: DMatrix<f64>, spike_rows: usize },
    Complex { entries: DMatrix<Complex64>, spike_rows: usize },
}

impl DataMatrix {
    pub fn p(&self) -> usize {
        match self {
            Self::Real { entries, .. } => entries.nrows(),
            Self::Complex { entries, .. } => entries.nrows(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Real { entries, .. } => entries.ncols(),
            Self::Complex { entries, .. } => entries.ncols(),
        }
    }

    pub fn spike_rows(&self) -> usize {
        match self {
            Self::Real { spike_rows, .. } | Self::Complex { spike_rows, .. } => *spike_rows,
        }
    }
}

/// Largest-remainder split of `total` rows across the bulk atoms.
pub fn bulk_counts(bulk: &BulkSpectrum, total: usize) -> Vec<usize> {
    let atoms = bulk.atoms();
    let quotas: Vec<f64> = atoms.iter().map(|a| a.weight * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..atoms.len()).collect();
    // Stable: ties go to the earlier atom.
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.total_cmp(&ri)
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Population standard deviation of every row, in row order.
fn row_scales(model: &SpikedModel, p: usize) -> Vec<f64> {
    let m = model.spikes.total_multiplicity();
    let mut scales: Vec<f64> = model.spikes.diagonal().iter().map(|a| a.sqrt()).collect();
    for (atom, count) in model.bulk.atoms().iter().zip(bulk_counts(&model.bulk, p - m)) {
        scales.extend(std::iter::repeat_n(atom.value.sqrt(), count));
    }
    scales
}

/// Draws `n` i.i.d. copies of `x` as the columns of a `p × n` matrix.
///
/// Entries are generated column by column, row by row within a column, so
/// the output is a pure function of `(model, p, n)` and the stream state.
pub fn sample_data<R: Rng + ?Sized>(
    model: &SpikedModel,
    p: usize,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    let m = model.spikes.total_multiplicity();
    if p < m {
        return Err(Error::Dimension(format!(
            "p = {p} cannot host {m} spike coordinates"
        )));
    }
    if n == 0 || p > n {
        return Err(Error::Dimension(format!("need 0 < p <= n, got p = {p}, n = {n}")));
    }
    let scales = row_scales(model, p);
    let law = model.entry;
    if law.is_complex() {
        let mut x = DMatrix::from_fn(p, n, |i, _| law.draw_complex(rng) * scales[i]);
        if let Some(u) = &model.rotation {
            let uc = u.map(|v| Complex64::new(v, 0.0));
            let top = &uc * x.rows(0, m);
            x.rows_mut(0, m).copy_from(&top);
        }
        Ok(DataMatrix::Complex { entries: x, spike_rows: m })
    } else {
        let mut x = DMatrix::from_fn(p, n, |i, _| law.draw_real(rng) * scales[i]);
        if let Some(u) = &model.rotation {
            let top = u * x.rows(0, m);
            x.rows_mut(0, m).copy_from(&top);
        }
        Ok(DataMatrix::Real { entries: x, spike_rows: m })
    }
}

/// `S_n = (1/n) X X*`, symmetrized to remove round-off asymmetry.
pub fn sample_cov(data: &DataMatrix) -> HermitianMatrix {
    match data {
        DataMatrix::Real { entries, .. } => {
            let n = entries.ncols() as f64;
            let mut s = entries * entries.transpose() / n;
            symmetrize(&mut s, |v| v);
            HermitianMatrix::Real(s)
        }
        DataMatrix::Complex { entries, .. } => {
            let n = entries.ncols() as f64;
            let mut s = entries * entries.adjoint() / Complex64::new(n, 0.0);
            symmetrize(&mut s, |v| v.conj());
            for i in 0..s.nrows() {
                s[(i, i)].im = 0.0;
            }
            HermitianMatrix::Complex(s)
        }
    }
}

fn symmetrize<T: nalgebra::Scalar + Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>>(
    s: &mut DMatrix<T>,
    conj: impl Fn(T) -> T,
) {
    let d = s.nrows();
    for j in 0..d {
        for i in j + 1..d {
            let v = (s[(i, j)] + conj(s[(j, i)])) * 0.5;
            s[(i, j)] = v;
            s[(j, i)] = conj(v);
        }
    }
}

/// 1-based positions `J_k` of the packed sample eigenvalues of every spike
/// for the unit bulk, in spike order. Untracked spikes get an empty set.
///
/// Spikes above the critical interval fill the top positions in descending
/// order; spikes below fill the bottom positions, the smallest spike last.
pub fn packed_index_sets(spec: &SpikeSpec, params: MpParams, p: usize) -> Vec<Vec<usize>> {
    let (lo, hi) = params.critical_interval();
    let spikes = spec.spikes();
    let mut sets = vec![Vec::new(); spikes.len()];
    let mut s = 0;
    for (k, sp) in spikes.iter().enumerate() {
        if sp.alpha > hi {
            sets[k] = (s + 1..=s + sp.multiplicity).collect();
            s += sp.multiplicity;
        }
    }
    let mut t = 0;
    for (k, sp) in spikes.iter().enumerate().rev() {
        if sp.alpha < lo {
            sets[k] = (p + 1 - t - sp.multiplicity..=p - t).collect();
            t += sp.multiplicity;
        }
    }
    sets
}

/// Packed positions for a general bulk, by rank order.
///
/// A separated spike `α` ranks below every bulk row with `t > α` and every
/// spike copy with a larger value. Non-separated spikes get an empty set.
pub fn packed_index_sets_general(model: &SpikedModel, p: usize) -> Result<Vec<Vec<usize>>> {
    let m = model.spikes.total_multiplicity();
    if p < m {
        return Err(Error::Dimension(format!(
            "p = {p} cannot host {m} spike coordinates"
        )));
    }
    let counts = bulk_counts(&model.bulk, p - m);
    let spikes = model.spikes.spikes();
    let mut sets = Vec::with_capacity(spikes.len());
    let mut larger_spikes = 0;
    for (k, sp) in spikes.iter().enumerate() {
        if model.is_tracked(k) {
            let above: usize = model
                .bulk
                .atoms()
                .iter()
                .zip(&counts)
                .filter(|(a, _)| a.value > sp.alpha)
                .map(|(_, c)| c)
                .sum();
            let start = above + larger_spikes;
            sets.push((start + 1..=start + sp.multiplicity).collect());
        } else {
            sets.push(Vec::new());
        }
        larger_spikes += sp.multiplicity;
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigs;
    use crate::spectra::Atom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(v: &[(f64, usize)]) -> SpikeSpec {
        SpikeSpec::new(
            v.iter()
                .map(|&(alpha, multiplicity)| Spike { alpha, multiplicity })
                .collect(),
        )
        .unwrap()
    }

    fn y(v: f64) -> MpParams {
        MpParams::new(v).unwrap()
    }

    fn model(spikes: &[(f64, usize)], entry: EntryLaw, ratio: f64) -> SpikedModel {
        SpikedModel::new(spec(spikes), BulkSpectrum::unit(), entry, y(ratio))
    }

    #[test]
    fn spike_spec_sorts_and_validates() {
        let s = spec(&[(0.1, 1), (4.0, 1), (3.0, 2)]);
        let a: Vec<f64> = s.spikes().iter().map(|s| s.alpha).collect();
        assert_eq!(a, vec![4.0, 3.0, 0.1]);
        assert_eq!(s.total_multiplicity(), 4);
        assert_eq!(s.diagonal(), vec![4.0, 3.0, 3.0, 0.1]);
        assert!(SpikeSpec::new(vec![Spike { alpha: 2.0, multiplicity: 1 }; 2]).is_err());
        assert!(SpikeSpec::new(vec![Spike { alpha: -2.0, multiplicity: 1 }]).is_err());
        assert!(SpikeSpec::new(vec![Spike { alpha: 2.0, multiplicity: 0 }]).is_err());
    }

    #[test]
    fn entry_law_serde_round_trip_and_checks() {
        let law: EntryLaw = serde_json::from_str(r#"{"family":"rademacher"}"#).unwrap();
        assert_eq!(law.beta(), -2.0);
        let c: EntryLaw =
            serde_json::from_str(r#"{"family":"custom","beta":1.5,"complex":true}"#).unwrap();
        assert_eq!(c, EntryLaw::complex_custom(1.5).unwrap());
        assert!(serde_json::from_str::<EntryLaw>(r#"{"family":"custom"}"#).is_err());
        assert!(serde_json::from_str::<EntryLaw>(r#"{"family":"gaussian","beta":1}"#).is_err());
        assert!(serde_json::from_str::<EntryLaw>(r#"{"family":"gaussian","x":1}"#).is_err());
        assert!(EntryLaw::custom(-2.5).is_err());
        let json = serde_json::to_string(&EntryLaw::custom(0.5).unwrap()).unwrap();
        assert_eq!(serde_json::from_str::<EntryLaw>(&json).unwrap().beta(), 0.5);
    }

    #[test]
    fn entry_laws_have_the_declared_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        for law in [
            EntryLaw::gaussian(),
            EntryLaw::rademacher(),
            EntryLaw::custom(1.0).unwrap(),
            EntryLaw::custom(-1.5).unwrap(),
        ] {
            let xs: Vec<f64> = (0..n).map(|_| law.draw_real(&mut rng)).collect();
            let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
            let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
            assert!((m2 - 1.0).abs() < 0.02, "{law:?} m2={m2}");
            assert!((m4 - law.fourth_moment()).abs() < 0.1, "{law:?} m4={m4}");
        }
        for law in [
            EntryLaw::complex_gaussian(),
            EntryLaw::complex_rademacher(),
            EntryLaw::complex_custom(0.5).unwrap(),
        ] {
            let xs: Vec<Complex64> = (0..n).map(|_| law.draw_complex(&mut rng)).collect();
            let m2 = xs.iter().map(|x| x.norm_sqr()).sum::<f64>() / n as f64;
            let pseudo = xs.iter().map(|x| x * x).sum::<Complex64>() / n as f64;
            let m4 = xs.iter().map(|x| x.norm_sqr().powi(2)).sum::<f64>() / n as f64;
            assert!((m2 - 1.0).abs() < 0.02, "{law:?}");
            assert!(pseudo.norm() < 0.02, "{law:?}");
            assert!((m4 - law.fourth_moment()).abs() < 0.05, "{law:?} m4={m4}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let md = model(&[(4.0, 1)], EntryLaw::gaussian(), 0.5);
        let a = sample_data(&md, 20, 40, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_data(&md, 20, 40, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c = sample_data(&md, 20, 40, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rademacher_spike_row_takes_two_values() {
        let md = model(&[(4.0, 1)], EntryLaw::rademacher(), 0.5);
        let DataMatrix::Real { entries, .. } =
            sample_data(&md, 10, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap()
        else {
            panic!("expected real data")
        };
        assert!(entries.row(0).iter().all(|&v| v == 2.0 || v == -2.0));
        assert!(entries.row(5).iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn spike_row_variance_matches_alpha() {
        let md = model(&[(4.0, 1)], EntryLaw::gaussian(), 0.5);
        let d = sample_data(&md, 1, 100_000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let DataMatrix::Real { entries, .. } = d else { panic!() };
        let v = entries.row(0).iter().map(|x| x * x).sum::<f64>() / 1e5;
        assert!((v - 4.0).abs() < 0.2, "variance {v}");
    }

    #[test]
    fn dimension_errors() {
        let md = model(&[(4.0, 3)], EntryLaw::gaussian(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_data(&md, 2, 10, &mut rng), Err(Error::Dimension(_))));
        assert!(matches!(sample_data(&md, 20, 10, &mut rng), Err(Error::Dimension(_))));
    }

    #[test]
    fn sample_cov_of_single_unit_column() {
        let mut x = DMatrix::zeros(3, 1);
        x[(0, 0)] = 1.0;
        let s = sample_cov(&DataMatrix::Real { entries: x, spike_rows: 0 });
        let e = hermitian_eigs(&s, false).unwrap();
        assert_eq!(e.values, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn sample_cov_trace_and_hermitian_symmetry() {
        let md = model(&[(3.0, 2)], EntryLaw::complex_gaussian(), 0.5);
        let d = sample_data(&md, 15, 30, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let DataMatrix::Complex { entries, .. } = &d else { panic!() };
        let direct: f64 = entries.iter().map(|v| v.norm_sqr()).sum::<f64>() / 30.0;
        let HermitianMatrix::Complex(s) = sample_cov(&d) else { panic!() };
        let tr: f64 = (0..15).map(|i| s[(i, i)].re).sum();
        assert!((tr - direct).abs() < 1e-12 * direct);
        assert_eq!(s, s.adjoint());
    }

    #[test]
    fn null_model_top_eigenvalue_near_edge() {
        let md = model(&[], EntryLaw::gaussian(), 0.5);
        let d = sample_data(&md, 200, 400, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let e = hermitian_eigs(&sample_cov(&d), false).unwrap();
        assert!((e.values[0] - y(0.5).upper_edge()).abs() < 0.15, "{}", e.values[0]);
        assert!(e.values.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn rotation_preserves_the_spike_spectrum() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let u = DMatrix::from_row_slice(2, 2, &[c, -c, c, c]);
        let md = model(&[(9.0, 1), (4.0, 1)], EntryLaw::gaussian(), 0.5)
            .with_rotation(u)
            .unwrap();
        let d = sample_data(&md, 2, 200_000, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let HermitianMatrix::Real(s) = sample_cov(&d) else { panic!() };
        // Σ = U diag(9, 4) Uᵀ has off-diagonal 2.5.
        assert!((s[(0, 1)] - 2.5).abs() < 0.1, "{}", s[(0, 1)]);
        assert!(md.clone().with_rotation(DMatrix::from_element(2, 2, 1.0)).is_err());
    }

    #[test]
    fn packed_sets_of_the_two_atom_example() {
        let s = spec(&[(4.0, 1), (3.0, 2), (0.2, 2), (0.1, 1)]);
        let sets = packed_index_sets(&s, y(0.5), 500);
        assert_eq!(sets, vec![vec![1], vec![2, 3], vec![498, 499], vec![500]]);
        assert_eq!(packed_index_sets(&spec(&[(5.0, 1)]), y(0.5), 10), vec![vec![1]]);
        assert!(packed_index_sets(&spec(&[(1.2, 1)]), y(0.5), 10)[0].is_empty());
    }

    #[test]
    fn general_rank_rule_matches_unit_rule_and_two_atom_bulk() {
        let s = spec(&[(4.0, 1), (3.0, 2), (1.2, 1), (0.2, 2), (0.1, 1)]);
        let md = SpikedModel::new(s.clone(), BulkSpectrum::unit(), EntryLaw::gaussian(), y(0.5));
        assert_eq!(
            packed_index_sets_general(&md, 500).unwrap(),
            packed_index_sets(&s, y(0.5), 500)
        );
        let bulk = BulkSpectrum::new(vec![
            Atom { value: 1.0, weight: 0.5 },
            Atom { value: 10.0, weight: 0.5 },
        ])
        .unwrap();
        let md = SpikedModel::new(
            spec(&[(5.0, 1), (4.0, 2), (3.0, 1)]),
            bulk.clone(),
            EntryLaw::gaussian(),
            y(0.2),
        );
        assert_eq!(bulk_counts(&bulk, 496), vec![248, 248]);
        assert_eq!(
            packed_index_sets_general(&md, 500).unwrap(),
            vec![vec![249], vec![250, 251], vec![252]]
        );
    }

    #[test]
    fn largest_remainder_apportionment() {
        let bulk = BulkSpectrum::new(vec![
            Atom { value: 1.0, weight: 0.25 },
            Atom { value: 2.0, weight: 0.5 },
            Atom { value: 3.0, weight: 0.25 },
        ])
        .unwrap();
        assert_eq!(bulk_counts(&bulk, 10), vec![3, 5, 2]);
        assert_eq!(bulk_counts(&bulk, 0), vec![0, 0, 0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn packed_sets_are_disjoint_and_anchored(
                alphas in proptest::collection::btree_set(1u32..400, 1..6),
                mults in proptest::collection::vec(1usize..4, 6),
                ratio in 0.05f64..0.9,
            ) {
                let params = y(ratio);
                let spikes: Vec<(f64, usize)> = alphas
                    .iter()
                    .zip(&mults)
                    .map(|(&a, &m)| (a as f64 / 40.0, m))
                    .collect();
                let s = spec(&spikes);
                let p = 100;
                let sets = packed_index_sets(&s, params, p);
                let mut all: Vec<usize> = sets.iter().flatten().copied().collect();
                let total = all.len();
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), total);
                let (lo, hi) = params.critical_interval();
                let above: usize = s.spikes().iter().filter(|x| x.alpha > hi).map(|x| x.multiplicity).sum();
                let below: usize = s.spikes().iter().filter(|x| x.alpha < lo).map(|x| x.multiplicity).sum();
                let top: Vec<usize> = all.iter().copied().filter(|&j| j <= above).collect();
                prop_assert_eq!(top, (1..=above).collect::<Vec<_>>());
                let bottom: Vec<usize> = all.iter().copied().filter(|&j| j > p - below).collect();
                prop_assert_eq!(bottom, (p - below + 1..=p).collect::<Vec<_>>());
            }
        }
    }
}
