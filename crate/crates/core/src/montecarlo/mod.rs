//! Seeded replication harness and goodness-of-fit checks against the
//! limit laws.
//!
//! Replication `r` draws from its own stream, seeded by
//! [`replication_seed`]`(master_seed, r)`, so any subset of replications can
//! be recomputed alone and results never depend on the thread count.

mod gof;
mod io;
mod stats;

pub use gof::{compare_to_limit, GofColumn, DEFAULT_LIMIT_DRAWS, GofReport, GofThresholds, KsKind, Verdict};
pub use io::{
    format_g17, write_gof_json, write_kde_1d_csv, write_kde_2d_csv, write_replications_csv,
};
pub use stats::{
    column_stats, empirical_summary, kde_1d, kde_2d, ks_one_sample, ks_two_sample,
    kolmogorov_q, Bandwidth, MIN_KS_SAMPLE, ColumnStats, ColumnSummary, GroupCovariance, Kde1d, Kde2d,
    KsResult, Summary, MIN_REPLICATIONS,
};

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::hermitian_eigs;
use crate::model::{self, SpikedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Fast,
    PaperScale,
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: SpikedModel,
    pub p: usize,
    pub n: usize,
    pub replications: usize,
    /// Spike indices (0-based, descending-α order) to track; all tracked
    /// spikes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracked_spikes: Option<Vec<usize>>,
    pub master_seed: u64,
    #[serde(default)]
    pub mode: Mode,
}

/// Maximum relative gap between `p/n` and the model ratio `y`.
pub const RATIO_TOL: f64 = 0.01;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::TooFewReplications { got: self.replications, need: 2 });
        }
        let m = self.model.spikes.total_multiplicity();
        if self.p < m || self.p > self.n || self.n == 0 {
            return Err(Error::Dimension(format!(
                "need {m} <= p <= n, got p = {}, n = {}",
                self.p, self.n
            )));
        }
        let y = self.model.y.y();
        let ratio = self.p as f64 / self.n as f64;
        if (ratio - y).abs() > RATIO_TOL * y {
            return Err(Error::InvalidParameter(format!(
                "p/n = {ratio} does not match y = {y}"
            )));
        }
        if let Some(list) = &self.tracked_spikes {
            let k = self.model.spikes.spikes().len();
            for &i in list {
                if i >= k {
                    return Err(Error::Precondition(format!(
                        "tracked spike {i} does not exist ({k} spikes)"
                    )));
                }
                if !self.model.is_tracked(i) {
                    return Err(Error::Precondition(format!(
                        "spike {} is not separated from the bulk",
                        self.model.spikes.spikes()[i].alpha
                    )));
                }
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Precondition("tracked spikes repeat".into()));
            }
        }
        Ok(())
    }

    /// Tracked spike indices in ascending order.
    pub fn tracked(&self) -> Vec<usize> {
        match &self.tracked_spikes {
            Some(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v
            }
            None => (0..self.model.spikes.spikes().len())
                .filter(|&k| self.model.is_tracked(k))
                .collect(),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Column layout: one column per packed position of every tracked spike.
    pub fn columns(&self) -> Result<Vec<Column>> {
        let sets = if self.model.bulk.is_unit() {
            model::packed_index_sets(&self.model.spikes, self.model.y, self.p)
        } else {
            model::packed_index_sets_general(&self.model, self.p)?
        };
        let mut cols = Vec::new();
        for k in self.tracked() {
            let center = self.model.center(k)?;
            let alpha = self.model.spikes.spikes()[k].alpha;
            for &j in &sets[k] {
                cols.push(Column { spike_k: k, alpha, j, center });
            }
        }
        Ok(cols)
    }
}

/// splitmix64 finalizer applied to `master + (r + 1)·γ`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    let mut z = master.wrapping_add((r as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A tracked sample-eigenvalue position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Column {
    /// 0-based spike index.
    pub spike_k: usize,
    pub alpha: f64,
    /// 1-based rank of the sample eigenvalue.
    pub j: usize,
    /// Almost-sure limit `φ(α)` or `ψ(α)`.
    pub center: f64,
}

impl Column {
    pub fn label(&self) -> String {
        format!("k{}_j{}", self.spike_k + 1, self.j)
    }
}

/// Per-replication tracked eigenvalues and their rescaled deviations
/// `δ = √n(λ - center)`. Rows are sorted by replication index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSet {
    pub columns: Vec<Column>,
    pub rep_indices: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<Vec<f64>>,
    pub deltas: Vec<Vec<f64>>,
    pub n: usize,
    pub config_digest: String,
}

impl ReplicationSet {
    pub fn len(&self) -> usize {
        self.rep_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep_indices.is_empty()
    }

    /// `δ` values of one column across replications.
    pub fn delta_column(&self, c: usize) -> Vec<f64> {
        self.deltas.iter().map(|r| r[c]).collect()
    }

    /// `λ` values of one column across replications.
    pub fn lambda_column(&self, c: usize) -> Vec<f64> {
        self.lambdas.iter().map(|r| r[c]).collect()
    }

    /// Column positions grouped by spike, in column order.
    pub fn groups(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            match out.last_mut() {
                Some((k, v)) if *k == col.spike_k => v.push(c),
                _ => out.push((col.spike_k, vec![c])),
            }
        }
        out
    }

    /// Union of two runs of the same experiment over disjoint index ranges.
    pub fn merge(self, other: ReplicationSet) -> Result<ReplicationSet> {
        if self.config_digest != other.config_digest
            || self.columns != other.columns
            || self.n != other.n
        {
            return Err(Error::Precondition("cannot merge runs of different experiments".into()));
        }
        let columns = self.columns.clone();
        let n = self.n;
        let config_digest = self.config_digest.clone();
        let mut rows: Vec<(usize, u64, Vec<f64>, Vec<f64>)> =
            Vec::with_capacity(self.len() + other.len());
        for set in [self, other] {
            let ReplicationSet { rep_indices, seeds, lambdas, deltas, .. } = set;
            rows.extend(
                rep_indices
                    .into_iter()
                    .zip(seeds)
                    .zip(lambdas.into_iter().zip(deltas))
                    .map(|((r, s), (l, d))| (r, s, l, d)),
            );
        }
        rows.sort_by_key(|r| r.0);
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Precondition("replication ranges overlap".into()));
        }
        let mut out = ReplicationSet {
            columns,
            rep_indices: Vec::with_capacity(rows.len()),
            seeds: Vec::with_capacity(rows.len()),
            lambdas: Vec::with_capacity(rows.len()),
            deltas: Vec::with_capacity(rows.len()),
            n,
            config_digest,
        };
        for (r, s, l, d) in rows {
            out.rep_indices.push(r);
            out.seeds.push(s);
            out.lambdas.push(l);
            out.deltas.push(d);
        }
        Ok(out)
    }
}

/// Runs every replication of the experiment.
pub fn run_replications(config: &ExperimentConfig) -> Result<ReplicationSet> {
    run_replication_range(config, 0..config.replications)
}

/// Runs replications with indices in `range`; rows come back in index
/// order whatever the scheduling.
/// Seed, eigenvalues and deltas of one replication.
type Row = (u64, Vec<f64>, Vec<f64>);

pub fn run_replication_range(config: &ExperimentConfig, range: Range<usize>) -> Result<ReplicationSet> {
    config.validate()?;
    if range.end > config.replications {
        return Err(Error::Precondition(format!(
            "range end {} exceeds {} replications",
            range.end, config.replications
        )));
    }
    let columns = config.columns()?;
    if config.tracked_spikes.as_ref().is_some_and(|t| !t.is_empty()) && columns.is_empty() {
        return Err(Error::Precondition("tracked spikes map to no sample positions".into()));
    }
    let sqrt_n = (config.n as f64).sqrt();
    let rows: Vec<Result<Row>> = range
        .clone()
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(config.master_seed, r);
            one_replication(config, &columns, seed, sqrt_n).map_err(|e| Error::Replication {
                rep: r,
                seed,
                source: Box::new(e),
            })
        })
        .collect();
    let mut seeds = Vec::with_capacity(rows.len());
    let mut lambdas = Vec::with_capacity(rows.len());
    let mut deltas = Vec::with_capacity(rows.len());
    for row in rows {
        let (s, l, d) = row?;
        seeds.push(s);
        lambdas.push(l);
        deltas.push(d);
    }
    Ok(ReplicationSet {
        columns,
        rep_indices: range.collect(),
        seeds,
        lambdas,
        deltas,
        n: config.n,
        config_digest: config.digest(),
    })
}

fn one_replication(
    config: &ExperimentConfig,
    columns: &[Column],
    seed: u64,
    sqrt_n: f64,
) -> Result<(u64, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = model::sample_data(&config.model, config.p, config.n, &mut rng)?;
    let eig = hermitian_eigs(&model::sample_cov(&data), false)?;
    let lambdas: Vec<f64> = columns.iter().map(|c| eig.values[c.j - 1]).collect();
    let deltas: Vec<f64> = columns
        .iter()
        .zip(&lambdas)
        .map(|(c, l)| sqrt_n * (l - c.center))
        .collect();
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::DegenerateSample("non-finite eigenvalue".into()));
    }
    Ok((seed, lambdas, deltas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EntryLaw, Spike, SpikeSpec};
    use crate::spectra::{BulkSpectrum, MpParams};

    fn config(spikes: &[(f64, usize)], p: usize, n: usize, reps: usize) -> ExperimentConfig {
        let spec = SpikeSpec::new(
            spikes.iter().map(|&(alpha, multiplicity)| Spike { alpha, multiplicity }).collect(),
        )
        .unwrap();
        let y = MpParams::new(p as f64 / n as f64).unwrap();
        ExperimentConfig {
            model: SpikedModel::new(spec, BulkSpectrum::unit(), EntryLaw::gaussian(), y),
            p,
            n,
            replications: reps,
            tracked_spikes: None,
            master_seed: 42,
            mode: Mode::Fast,
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: std::collections::BTreeSet<u64> = (0..10_000).map(|r| replication_seed(7, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(replication_seed(7, 0), replication_seed(8, 0));
        assert_eq!(replication_seed(7, 3), replication_seed(7, 3));
    }

    #[test]
    fn deterministic_regardless_of_thread_count() {
        let cfg = config(&[(4.0, 1), (3.0, 2), (0.1, 1)], 40, 80, 12);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_replications(&cfg).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a, b);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_replications_csv(&mut ca, &a).unwrap();
        write_replications_csv(&mut cb, &b).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn merge_of_disjoint_ranges_equals_full_run() {
        let cfg = config(&[(4.0, 1)], 30, 60, 20);
        let full = run_replications(&cfg).unwrap();
        let lo = run_replication_range(&cfg, 0..9).unwrap();
        let hi = run_replication_range(&cfg, 9..20).unwrap();
        assert_eq!(hi.clone().merge(lo.clone()).unwrap(), full);
        assert!(lo.clone().merge(lo).is_err());
    }

    #[test]
    fn columns_follow_packed_positions_and_stay_ordered() {
        let cfg = config(&[(4.0, 1), (3.0, 2), (0.1, 1)], 40, 80, 6);
        let reps = run_replications(&cfg).unwrap();
        let js: Vec<usize> = reps.columns.iter().map(|c| c.j).collect();
        assert_eq!(js, vec![1, 2, 3, 40]);
        assert_eq!(reps.groups(), vec![(0, vec![0]), (1, vec![1, 2]), (2, vec![3])]);
        for row in &reps.lambdas {
            assert!(row[1] >= row[2]);
        }
        assert!(reps.deltas.iter().flatten().all(|d| d.is_finite()));
    }

    #[test]
    fn fake_tracked_spike_is_a_precondition_error() {
        let mut cfg = config(&[], 20, 40, 4);
        cfg.tracked_spikes = Some(vec![0]);
        assert!(matches!(run_replications(&cfg), Err(Error::Precondition(_))));
        let mut cfg = config(&[(1.2, 1)], 20, 40, 4);
        cfg.tracked_spikes = Some(vec![0]);
        assert!(matches!(cfg.validate(), Err(Error::Precondition(_))));
        cfg.tracked_spikes = None;
        assert!(cfg.columns().unwrap().is_empty());
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut cfg = config(&[(4.0, 1)], 20, 40, 1);
        assert!(matches!(cfg.validate(), Err(Error::TooFewReplications { .. })));
        cfg.replications = 2;
        cfg.p = 25;
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameter(_))));
        cfg.p = 50;
        assert!(matches!(cfg.validate(), Err(Error::Dimension(_))));
    }

    #[test]
    fn config_json_round_trip_and_unknown_fields() {
        let cfg = config(&[(4.0, 1)], 20, 40, 3);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }
}
