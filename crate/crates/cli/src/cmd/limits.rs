use std::process::ExitCode;

use serde::Serialize;

use spikelab::limits::{s2_binary, sigma2, theta_omega};
use spikelab::spectra::{general_support, m_closed_forms, mp_support, phi, psi, Atom, MTransforms};
use spikelab::{BulkSpectrum, MpParams};

use super::print_json;
use crate::exit::Failure;
use crate::EntryArg;

/// Parses `value:weight`.
pub fn parse_atom(s: &str) -> Result<(f64, f64), String> {
    let (v, w) = s.split_once(':').ok_or_else(|| format!("expected value:weight, got `{s}`"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((num(v)?, num(w)?))
}

#[derive(Serialize)]
struct SpikeReport {
    alpha: f64,
    /// Almost-sure limit of the attached sample eigenvalues.
    center: f64,
    separated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<MTransforms>,
}

#[derive(Serialize)]
struct LimitsReport {
    y: f64,
    entry: &'static str,
    critical_interval: (f64, f64),
    support: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma2: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s2: Option<Vec<f64>>,
    spikes: Vec<SpikeReport>,
}

pub fn run(y: f64, alphas: &[f64], bulk: &[(f64, f64)], entry: EntryArg) -> Result<ExitCode, Failure> {
    let params = MpParams::new(y)?;
    let bulk = if bulk.is_empty() {
        BulkSpectrum::unit()
    } else {
        BulkSpectrum::new(bulk.iter().map(|&(value, weight)| Atom { value, weight }).collect())?
    };
    let report = if bulk.is_unit() { unit_bulk(params, alphas, entry)? } else { general_bulk(params, &bulk, alphas)? };
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn unit_bulk(params: MpParams, alphas: &[f64], entry: EntryArg) -> Result<LimitsReport, Failure> {
    let mut spikes = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let center = phi(alpha, params)?;
        let to = theta_omega(alpha, params)?;
        let variance = match entry {
            EntryArg::Gaussian => sigma2(alpha, params)?,
            EntryArg::Binary => s2_binary(alpha, params)?,
        };
        spikes.push(SpikeReport {
            alpha,
            center,
            separated: true,
            variance: Some(variance),
            theta: Some(to.theta),
            omega: Some(to.omega),
            m: Some(m_closed_forms(alpha, params)?),
        });
    }
    let variances: Vec<f64> = spikes.iter().filter_map(|s| s.variance).collect();
    Ok(LimitsReport {
        y: params.y(),
        entry: entry_name(entry),
        critical_interval: params.critical_interval(),
        support: vec![mp_support(params)],
        phi: Some(spikes.iter().map(|s| s.center).collect()),
        psi: None,
        sigma2: (entry == EntryArg::Gaussian).then(|| variances.clone()),
        s2: (entry == EntryArg::Binary).then_some(variances),
        spikes,
    })
}

/// General bulks have no scalar variance formula; only centers and the
/// support are reported. Unseparated spikes have no outlier and are a
/// critical-interval failure.
fn general_bulk(params: MpParams, bulk: &BulkSpectrum, alphas: &[f64]) -> Result<LimitsReport, Failure> {
    let support = general_support(params, bulk);
    let mut spikes = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let v = psi(alpha, params, bulk)?;
        if !v.separated {
            let bands: Vec<String> =
                support.intervals().iter().map(|(lo, hi)| format!("[{lo:.3}, {hi:.3}]")).collect();
            let place = if v.value <= 0.0 { "is not positive" } else { "lies in the support" };
            return Err(Failure::Critical(format!(
                "spike {alpha} is not separated: psi = {:.4} {place} (support {})",
                v.value,
                bands.join(" U ")
            )));
        }
        spikes.push(SpikeReport {
            alpha,
            center: v.value,
            separated: true,
            variance: None,
            theta: None,
            omega: None,
            m: None,
        });
    }
    Ok(LimitsReport {
        y: params.y(),
        entry: "n/a",
        critical_interval: params.critical_interval(),
        support: support.intervals().to_vec(),
        phi: None,
        psi: Some(spikes.iter().map(|s| s.center).collect()),
        sigma2: None,
        s2: None,
        spikes,
    })
}

fn entry_name(e: EntryArg) -> &'static str {
    match e {
        EntryArg::Gaussian => "gaussian",
        EntryArg::Binary => "binary",
    }
}
