//! Spike estimation from an observed sample spectrum.
//!
//! Outliers are inverted through `φ⁻¹`. Intervals are built in `λ`-space
//! from the scalar CLT, `λ ± z σ(α̂)/√n`, and mapped back through `φ⁻¹`.
//! That map is increasing on both sides of the bulk, so the interval
//! endpoints keep their order. Near-equal outliers form clusters, which are
//! reported with a multiplicity hint and no interval: packed eigenvalues
//! are not jointly Gaussian.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::limits::{limit_law, s2_binary, sigma2, LimitKind};
use crate::linalg::EigenSample;
use crate::model::EntryLaw;
use crate::spectra::{general_support, mp_support, phi_inverse, BulkSpectrum, MpParams, Side};

/// Margin around each support interval, as a fraction of its width.
pub const EDGE_MARGIN: f64 = 0.05;
/// Cap on the margin, as a fraction of the free gap next to the edge; the
/// gap below the lowest interval is measured from zero.
pub const GAP_MARGIN_CAP: f64 = 0.25;
/// Outliers closer than this many `σ̂/√n` are clustered.
pub const CLUSTER_GAP_SDS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Above,
    Below,
    InterBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lambda: f64,
    /// 1-based rank in the descending spectrum.
    pub rank: usize,
    pub placement: Placement,
}

/// Eigenvalues outside the margin-inflated support of the limiting bulk,
/// in descending order.
pub fn detect_spikes(eigs: &EigenSample, params: MpParams, bulk: &BulkSpectrum) -> Vec<Candidate> {
    let intervals: Vec<(f64, f64)> = if bulk.is_unit() {
        vec![mp_support(params)]
    } else {
        general_support(params, bulk).intervals().to_vec()
    };
    let inflated: Vec<(f64, f64)> = intervals
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let m = EDGE_MARGIN * (hi - lo);
            let below = if i == 0 { lo.max(0.0) } else { lo - intervals[i - 1].1 };
            let above = intervals.get(i + 1).map_or(f64::INFINITY, |n| n.0 - hi);
            (lo - m.min(GAP_MARGIN_CAP * below), hi + m.min(GAP_MARGIN_CAP * above))
        })
        .collect();
    let (first, last) = (inflated[0].0, inflated[inflated.len() - 1].1);
    eigs.values
        .iter()
        .enumerate()
        .filter(|(_, &l)| !inflated.iter().any(|&(lo, hi)| l >= lo && l <= hi))
        .map(|(i, &lambda)| Candidate {
            lambda,
            rank: i + 1,
            placement: if lambda > last {
                Placement::Above
            } else if lambda < first {
                Placement::Below
            } else {
                Placement::InterBand
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceModel {
    Gaussian,
    /// Symmetric `±1` entries.
    Binary,
    /// Real entries with excess kurtosis `beta`.
    Custom { beta: f64 },
}

impl VarianceModel {
    /// Limit variance of `√n(λ - φ(α))` for a simple spike.
    pub fn variance(&self, alpha: f64, params: MpParams) -> Result<f64> {
        match *self {
            VarianceModel::Gaussian => sigma2(alpha, params),
            VarianceModel::Binary => s2_binary(alpha, params),
            VarianceModel::Custom { beta } => {
                match limit_law(alpha, 1, params, EntryLaw::custom(beta)?)?.kind {
                    LimitKind::ScalarGaussian { variance } => Ok(variance),
                    LimitKind::MatrixEigLaw { .. } => unreachable!("simple spikes have scalar laws"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeEstimate {
    pub alpha_hat: f64,
    pub lambda_observed: f64,
    pub side: Side,
    /// Interval for `α`; absent for clusters.
    pub ci: Option<(f64, f64)>,
    /// The `λ`-space interval before inversion.
    pub lambda_ci: Option<(f64, f64)>,
    pub level: f64,
    pub variance_model: VarianceModel,
    /// Limit variance at `α̂`.
    pub variance: f64,
    /// Number of sample eigenvalues attributed to this spike.
    pub multiplicity_hint: usize,
}

fn side_of(lambda: f64, params: MpParams) -> Result<Side> {
    let (a, b) = mp_support(params);
    if lambda > b {
        Ok(Side::Above)
    } else if lambda < a {
        Ok(Side::Below)
    } else {
        Err(Error::InsideSupport { value: lambda, lo: a, hi: b })
    }
}

fn check_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level must be in (0, 1), got {level}")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * level);
    Ok(z)
}

/// Inverts a `λ`-space endpoint, clamping at the ends of the spike range
/// on `side`: `(1+√y, ∞)` above the bulk, `(0, 1-√y)` below it.
fn invert_clamped(lambda: f64, params: MpParams, side: Side) -> Result<f64> {
    let (a, b) = mp_support(params);
    let (c_lo, c_hi) = params.critical_interval();
    match side {
        Side::Above if lambda <= b => Ok(c_hi),
        Side::Below if lambda >= a => Ok(c_lo),
        Side::Below if lambda <= 0.0 => Ok(0.0),
        _ => phi_inverse(lambda, params, side),
    }
}

/// Point estimate and CI for a simple spike with outlier `lambda_obs`.
pub fn estimate_spike(
    lambda_obs: f64,
    n: usize,
    params: MpParams,
    model: VarianceModel,
    level: f64,
) -> Result<SpikeEstimate> {
    estimate_spike_with_multiplicity(lambda_obs, n, params, model, level, 1)
}

/// As [`estimate_spike`]; multiplicities above one have no scalar CI and
/// are rejected.
pub fn estimate_spike_with_multiplicity(
    lambda_obs: f64,
    n: usize,
    params: MpParams,
    model: VarianceModel,
    level: f64,
    multiplicity: usize,
) -> Result<SpikeEstimate> {
    if multiplicity != 1 {
        return Err(Error::Unsupported(format!(
            "no scalar confidence interval for a spike of multiplicity {multiplicity}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let z = check_level(level)?;
    let side = side_of(lambda_obs, params)?;
    let alpha_hat = phi_inverse(lambda_obs, params, side)?;
    let variance = model.variance(alpha_hat, params)?;
    let half = z * (variance / n as f64).sqrt();
    let lambda_ci = (lambda_obs - half, lambda_obs + half);
    let ci = (
        invert_clamped(lambda_ci.0, params, side)?,
        invert_clamped(lambda_ci.1, params, side)?,
    );
    Ok(SpikeEstimate {
        alpha_hat,
        lambda_observed: lambda_obs,
        side,
        ci: Some(ci),
        lambda_ci: Some(lambda_ci),
        level,
        variance_model: model,
        variance,
        multiplicity_hint: 1,
    })
}

/// Detects outliers of an MP-bulk spectrum and estimates one spike per
/// cluster. Adjacent outliers on the same side closer than
/// `3 max(σ̂)/√n` join a cluster; clusters report the mean eigenvalue, its
/// inverse and a multiplicity hint, without an interval.
pub fn analyze_spectrum(
    eigs: &EigenSample,
    n: usize,
    params: MpParams,
    model: VarianceModel,
    level: f64,
) -> Result<Vec<SpikeEstimate>> {
    let singles: Vec<SpikeEstimate> = detect_spikes(eigs, params, &BulkSpectrum::unit())
        .into_iter()
        .map(|c| estimate_spike(c.lambda, n, params, model, level))
        .collect::<Result<_>>()?;
    let sqrt_n = (n as f64).sqrt();
    let mut clusters: Vec<Vec<SpikeEstimate>> = Vec::new();
    for est in singles {
        if let Some(prev) = clusters.last_mut().and_then(|c| c.last()) {
            let sd = prev.variance.max(est.variance).sqrt() / sqrt_n;
            if prev.side == est.side && prev.lambda_observed - est.lambda_observed < CLUSTER_GAP_SDS * sd {
                clusters.last_mut().expect("non-empty").push(est);
                continue;
            }
        }
        clusters.push(vec![est]);
    }
    clusters
        .into_iter()
        .map(|mut c| {
            if c.len() == 1 {
                return Ok(c.pop().expect("one element"));
            }
            let lambda = c.iter().map(|e| e.lambda_observed).sum::<f64>() / c.len() as f64;
            let side = c[0].side;
            let alpha_hat = phi_inverse(lambda, params, side)?;
            Ok(SpikeEstimate {
                alpha_hat,
                lambda_observed: lambda,
                side,
                ci: None,
                lambda_ci: None,
                level,
                variance_model: model,
                variance: model.variance(alpha_hat, params)?,
                multiplicity_hint: c.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{phi, Atom};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(y: f64) -> MpParams {
        MpParams::new(y).unwrap()
    }

    fn spectrum(v: &[f64]) -> EigenSample {
        EigenSample::from_values(v.to_vec()).unwrap()
    }

    #[test]
    fn null_spectrum_has_no_candidates() {
        let (a, b) = mp_support(p(0.5));
        let vals: Vec<f64> = (0..50).map(|i| a + (b - a) * i as f64 / 49.0).collect();
        assert!(detect_spikes(&spectrum(&vals), p(0.5), &BulkSpectrum::unit()).is_empty());
    }

    #[test]
    fn edge_value_is_inside_margin() {
        let (a, b) = mp_support(p(0.5));
        let c = detect_spikes(&spectrum(&[b, b + 0.1, 4.667, a, 0.044]), p(0.5), &BulkSpectrum::unit());
        let got: Vec<(f64, Placement, usize)> = c.iter().map(|c| (c.lambda, c.placement, c.rank)).collect();
        assert_eq!(got, vec![(4.667, Placement::Above, 1), (0.044, Placement::Below, 5)]);
    }

    #[test]
    fn inter_band_outliers_are_tagged() {
        let bulk = BulkSpectrum::new(vec![
            Atom { value: 1.0, weight: 0.5 },
            Atom { value: 10.0, weight: 0.5 },
        ])
        .unwrap();
        let c = detect_spikes(&spectrum(&[20.0, 3.0, 1.0, 0.1]), p(0.2), &bulk);
        let tags: Vec<Placement> = c.iter().map(|c| c.placement).collect();
        assert_eq!(tags, vec![Placement::Above, Placement::InterBand, Placement::Below]);
    }

    #[test]
    fn estimate_above_matches_reference() {
        let e = estimate_spike(phi(4.0, p(0.5)).unwrap(), 1000, p(0.5), VarianceModel::Gaussian, 0.95).unwrap();
        assert_abs_diff_eq!(e.alpha_hat, 4.0, epsilon = 1e-12);
        let (l0, l1) = e.lambda_ci.unwrap();
        assert_abs_diff_eq!(0.5 * (l1 - l0), 0.3407, epsilon = 1e-3);
        let (lo, hi) = e.ci.unwrap();
        assert!(lo < 4.0 && 4.0 < hi);
        assert_abs_diff_eq!(lo, phi_inverse(l0, p(0.5), Side::Above).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn estimate_below_round_trips() {
        let e = estimate_spike(0.044_444_444_444_444_44, 1000, p(0.5), VarianceModel::Gaussian, 0.95).unwrap();
        assert_eq!(e.side, Side::Below);
        assert_abs_diff_eq!(e.alpha_hat, 0.1, epsilon = 1e-12);
        let (lo, hi) = e.ci.unwrap();
        assert!((0.0..0.1).contains(&lo) && 0.1 < hi);
    }

    #[test]
    fn interval_shrinks_with_n() {
        let w = |n| {
            let e = estimate_spike(4.667, n, p(0.5), VarianceModel::Gaussian, 0.95).unwrap();
            let (lo, hi) = e.ci.unwrap();
            (hi - lo, e.alpha_hat)
        };
        let (w1, a1) = w(1_000);
        let (w2, a2) = w(1_000_000_000);
        assert_eq!(a1, a2);
        // Width scales as n^{-1/2}.
        assert!((w2 / w1 - 1e-3).abs() < 1e-5);
    }

    #[test]
    fn clamps_at_the_critical_edge() {
        let e = estimate_spike(3.0, 10, p(0.5), VarianceModel::Gaussian, 0.95).unwrap();
        assert_eq!(e.ci.unwrap().0, 1.0 + 0.5f64.sqrt());
    }

    #[test]
    fn variance_models_agree_with_custom_beta() {
        let y = p(0.5);
        for alpha in [4.0, 3.0, 0.2, 0.1] {
            let g = VarianceModel::Gaussian.variance(alpha, y).unwrap();
            let c0 = VarianceModel::Custom { beta: 0.0 }.variance(alpha, y).unwrap();
            assert_abs_diff_eq!(g, c0, epsilon = 1e-10 * g);
            let b = VarianceModel::Binary.variance(alpha, y).unwrap();
            let c2 = VarianceModel::Custom { beta: -2.0 }.variance(alpha, y).unwrap();
            assert_abs_diff_eq!(b, c2, epsilon = 1e-10 * b);
        }
    }

    #[test]
    fn errors() {
        let y = p(0.5);
        assert!(matches!(
            estimate_spike(1.0, 100, y, VarianceModel::Gaussian, 0.95),
            Err(Error::InsideSupport { .. })
        ));
        assert!(matches!(
            estimate_spike_with_multiplicity(4.0, 100, y, VarianceModel::Gaussian, 0.95, 2),
            Err(Error::Unsupported(_))
        ));
        assert!(estimate_spike(4.0, 100, y, VarianceModel::Gaussian, 1.0).is_err());
    }

    #[test]
    fn near_equal_outliers_cluster() {
        let y = p(0.5);
        let l3 = phi(3.0, y).unwrap();
        let s = spectrum(&[4.667, l3 + 0.01, l3 - 0.01, 1.0, 0.044]);
        let out = analyze_spectrum(&s, 400, y, VarianceModel::Gaussian, 0.95).unwrap();
        let hints: Vec<usize> = out.iter().map(|e| e.multiplicity_hint).collect();
        assert_eq!(hints, vec![1, 2, 1]);
        assert!(out[1].ci.is_none());
        assert_abs_diff_eq!(out[1].alpha_hat, 3.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn ci_brackets_estimate(lambda in 3.0f64..40.0, n in 10usize..100_000, level in 0.5f64..0.999) {
            let e = estimate_spike(lambda, n, p(0.5), VarianceModel::Gaussian, level).unwrap();
            let (lo, hi) = e.ci.unwrap();
            prop_assert!(lo < e.alpha_hat && e.alpha_hat < hi);
            let (l0, l1) = e.lambda_ci.unwrap();
            prop_assert!(l0 < lambda && lambda < l1);
        }

        #[test]
        fn below_ci_brackets_estimate(alpha in 0.01f64..0.25, n in 10usize..100_000) {
            let y = p(0.5);
            let e = estimate_spike(phi(alpha, y).unwrap(), n, y, VarianceModel::Gaussian, 0.95).unwrap();
            let (lo, hi) = e.ci.unwrap();
            prop_assert!(lo < e.alpha_hat && e.alpha_hat < hi);
            prop_assert!(lo >= 0.0 && hi <= 1.0 - 0.5f64.sqrt());
        }
    }
}
