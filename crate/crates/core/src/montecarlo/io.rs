//! CSV and JSON writers. Numbers in CSV use `%.17g`, so every `f64`
//! round-trips exactly.

use std::io::Write;

use super::gof::GofReport;
use super::stats::{Kde1d, Kde2d};
use super::ReplicationSet;
use crate::error::Result;

/// C `printf("%.17g")` formatting.
pub fn format_g17(v: f64) -> String {
    const P: i32 = 17;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Rounding to 17 significant digits fixes the exponent that decides
    // between fixed and scientific notation.
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let x: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&x) {
        let fixed = format!("{:.*}", (P - 1 - x) as usize, v);
        strip_zeros(&fixed).to_string()
    } else {
        let m = strip_zeros(mantissa);
        let sign = if x < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", x.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `rep,spike_k,j,lambda,delta`, one row per tracked eigenvalue per
/// replication; `spike_k` is 1-based.
pub fn write_replications_csv<W: Write>(mut w: W, reps: &ReplicationSet) -> Result<()> {
    writeln!(w, "rep,spike_k,j,lambda,delta")?;
    for (row, &r) in reps.rep_indices.iter().enumerate() {
        for (c, col) in reps.columns.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                r,
                col.spike_k + 1,
                col.j,
                format_g17(reps.lambdas[row][c]),
                format_g17(reps.deltas[row][c])
            )?;
        }
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_gof_json<W: Write>(mut w: W, report: &GofReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| crate::Error::Io(e.to_string()))?;
    writeln!(w, "{text}")?;
    Ok(())
}

pub fn write_kde_1d_csv<W: Write>(mut w: W, kde: &Kde1d) -> Result<()> {
    writeln!(w, "x,density")?;
    for (x, d) in kde.grid.iter().zip(&kde.density) {
        writeln!(w, "{},{}", format_g17(*x), format_g17(*d))?;
    }
    Ok(())
}

pub fn write_kde_2d_csv<W: Write>(mut w: W, kde: &Kde2d) -> Result<()> {
    writeln!(w, "x,y,density")?;
    for (i, x) in kde.xs.iter().enumerate() {
        for (j, y) in kde.ys.iter().enumerate() {
            writeln!(w, "{},{},{}", format_g17(*x), format_g17(*y), format_g17(kde.at(i, j)))?;
        }
    }
    Ok(())
}
