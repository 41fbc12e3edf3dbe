use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use spikelab::limits::{limit_law, LimitLaw};
use spikelab::model::EntryFamily;
use spikelab::montecarlo::{
    compare_to_limit, empirical_summary, run_replications, write_gof_json, write_kde_1d_csv, write_kde_2d_csv,
    write_replications_csv, ExperimentConfig, GofReport, GofThresholds, DEFAULT_LIMIT_DRAWS, MIN_KS_SAMPLE, MIN_REPLICATIONS,
};

use crate::exit::{self, Failure};

pub const SEED_ENV: &str = "SPIKELAB_SEED";

/// Contents of a `simulate` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
    /// Overrides the thresholds implied by the experiment mode.
    #[serde(default)]
    pub thresholds: Option<GofThresholds>,
    /// Reference draws per packed spike group.
    #[serde(default = "default_draws")]
    pub limit_draws: usize,
}

fn default_draws() -> usize {
    DEFAULT_LIMIT_DRAWS
}

fn read_config(path: &Path) -> Result<CliConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::NoInput(format!("{}: {e}", path.display())))?;
    let mut cfg: CliConfig =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if let Ok(seed) = std::env::var(SEED_ENV) {
        cfg.experiment.master_seed = seed
            .trim()
            .parse()
            .map_err(|e| Failure::Usage(format!("{SEED_ENV}=`{seed}`: {e}")))?;
    }
    cfg.experiment.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn finish(mut w: BufWriter<File>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

/// Label characters safe in file names.
fn file_label(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

pub fn run(config: &Path, output_dir: Option<PathBuf>, verbose: u8) -> Result<ExitCode, Failure> {
    let mut cfg = read_config(config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let exp = &cfg.experiment;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;

    if verbose > 0 {
        eprintln!(
            "running {} replications (p = {}, n = {}, seed = {})",
            exp.replications, exp.p, exp.n, exp.master_seed
        );
    }
    let reps = run_replications(exp)?;
    let mut w = create(dir, "replications.csv")?;
    write_replications_csv(&mut w, &reps)?;
    finish(w)?;

    let report = if exp.model.bulk.is_unit() && reps.len() >= MIN_KS_SAMPLE {
        let mut laws: BTreeMap<usize, LimitLaw> = BTreeMap::new();
        for (k, _) in reps.groups() {
            let s = exp.model.spikes.spikes()[k];
            laws.insert(k, limit_law(s.alpha, s.multiplicity, exp.model.y, exp.model.entry)?);
        }
        let binary = exp.model.entry.family() == EntryFamily::Rademacher;
        let thresholds = cfg.thresholds.unwrap_or(GofThresholds::for_mode(exp.mode, binary));
        // The reference draws get their own stream, disjoint from replication seeds.
        let mut rng = ChaCha8Rng::seed_from_u64(exp.master_seed ^ 0x5eed_0f11_a1a7);
        compare_to_limit(&reps, &laws, cfg.limit_draws, thresholds, &mut rng)?
    } else {
        if !exp.model.bulk.is_unit() {
            eprintln!("general bulk: no limit variance is available, gof.json lists no columns");
        } else {
            eprintln!("fewer than {MIN_KS_SAMPLE} replications: gof.json lists no columns");
        }
        GofReport {
            replications: reps.len(),
            thresholds: cfg.thresholds.unwrap_or(GofThresholds::FAST),
            columns: Vec::new(),
            kde_1d: Vec::new(),
            kde_2d: Vec::new(),
        }
    };
    let mut w = create(dir, "gof.json")?;
    write_gof_json(&mut w, &report)?;
    finish(w)?;
    for (label, kde) in &report.kde_1d {
        let mut w = create(dir, &format!("kde_{}.csv", file_label(label)))?;
        write_kde_1d_csv(&mut w, kde)?;
        finish(w)?;
    }
    for (label, kde) in &report.kde_2d {
        let mut w = create(dir, &format!("kde2d_{}.csv", file_label(label)))?;
        write_kde_2d_csv(&mut w, kde)?;
        finish(w)?;
    }
    if reps.len() >= MIN_REPLICATIONS && !reps.columns.is_empty() {
        let summary = empirical_summary(&reps)?;
        let mut w = create(dir, "summary.json")?;
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Failure::Internal(e.to_string()))?;
        writeln!(w, "{text}").map_err(|e| Failure::Io(e.to_string()))?;
        finish(w)?;
    }

    for c in &report.columns {
        eprintln!(
            "{:<10} p = {:.4}  mean = {:+.4}  var = {:.4} (limit {:.4})  {:?}",
            c.column, c.p_value, c.emp_mean, c.emp_var, c.theo_var, c.verdict
        );
    }
    if report.all_pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("spikelab: goodness-of-fit thresholds not met");
        Ok(ExitCode::from(exit::STATISTICAL))
    }
}
