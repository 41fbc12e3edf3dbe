//! Fast-scale Monte Carlo checks of the harness and the spike detector.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spikelab::infer::{detect_spikes, Placement};
use spikelab::linalg::hermitian_eigs;
use spikelab::model::{sample_cov, sample_data, EntryLaw, Spike, SpikeSpec, SpikedModel};
use spikelab::montecarlo::{column_stats, run_replications, ExperimentConfig, Mode};
use spikelab::spectra::{mp_support, phi};
use spikelab::{BulkSpectrum, MpParams};

fn univariate_model() -> SpikedModel {
    let spikes = SpikeSpec::new(vec![
        Spike { alpha: 4.0, multiplicity: 1 },
        Spike { alpha: 0.1, multiplicity: 1 },
    ])
    .unwrap();
    SpikedModel::new(spikes, BulkSpectrum::unit(), EntryLaw::gaussian(), MpParams::new(0.5).unwrap())
}

#[test]
fn top_spike_moments_at_fast_scale() {
    let config = ExperimentConfig {
        model: univariate_model(),
        p: 200,
        n: 400,
        replications: 400,
        tracked_spikes: Some(vec![0]),
        master_seed: 20240501,
        mode: Mode::Fast,
    };
    let reps = run_replications(&config).unwrap();
    assert_eq!(reps.columns.len(), 1);
    let stats = column_stats(&reps.delta_column(0)).unwrap();
    assert!(stats.mean.abs() <= 0.9, "mean {}", stats.mean);
    assert!((24.0..=37.0).contains(&stats.variance), "variance {}", stats.variance);
}

#[test]
fn detector_finds_the_single_upper_outlier() {
    let model = univariate_model();
    let params = model.y;
    let center = phi(4.0, params).unwrap();
    let edge = mp_support(params).1;
    let mut hits = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = sample_data(&model, 200, 400, &mut rng).unwrap();
        let eigs = hermitian_eigs(&sample_cov(&data), false).unwrap();
        let above: Vec<_> = detect_spikes(&eigs, params, &model.bulk)
            .into_iter()
            .filter(|c| c.placement == Placement::Above)
            .collect();
        // One outlier within about four standard deviations of its limit.
        if above.len() == 1 && above[0].lambda > edge && (above[0].lambda - center).abs() < 1.0 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100 seeds");
}
