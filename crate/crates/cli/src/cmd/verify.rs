use std::process::ExitCode;

use spikelab::checks::{self, Check, Tolerance};

use crate::exit::{self, Failure};
use crate::Suite;

pub fn run(suite: Suite, seed: u64) -> Result<ExitCode, Failure> {
    let checks = match suite {
        Suite::Identities => checks::identities(1e-8, 1e-10)?,
        Suite::Resolvent => {
            let seeds: Vec<u64> = (0..8).map(|s| seed.wrapping_add(s)).collect();
            checks::resolvent_traces(200, 400, 5.0, &seeds)?
        }
        Suite::Sesquiform => checks::sesquiform_suite(2000, 500, seed)?,
    };
    print_table(&checks);
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} of {} checks pass", checks.len() - failed, checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(exit::STATISTICAL) })
}

fn print_table(checks: &[Check]) {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
    println!("{:<width$}  {:>14}  {:>14}  {:>10}  {:>10}  status", "check", "value", "reference", "error", "tol");
    for c in checks {
        let tol = match c.kind {
            Tolerance::Absolute => format!("{:.1e}", c.tolerance),
            Tolerance::Relative => format!("{:.0}%", 100.0 * c.tolerance),
        };
        println!(
            "{:<width$}  {:>14.8}  {:>14.8}  {:>10.2e}  {:>10}  {}",
            c.name,
            c.value,
            c.reference,
            c.error(),
            tol,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
}
