use std::fs;
use std::path::Path;
use std::process::ExitCode;

use spikelab::infer::{analyze_spectrum, VarianceModel};
use spikelab::linalg::EigenSample;
use spikelab::MpParams;

use super::print_json;
use crate::exit::Failure;
use crate::VarianceArg;

/// One eigenvalue per line. Blank lines are skipped, and a first line made
/// only of letters and underscores is taken as a header.
pub fn parse_spectrum(text: &str) -> Result<Vec<f64>, Failure> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim().trim_end_matches(',');
        if t.is_empty() {
            continue;
        }
        let header = i == 0 && t.chars().all(|c| c.is_ascii_alphabetic() || c == '_');
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(Failure::Data(format!("line {}: non-finite value {v}", i + 1))),
            Err(_) if header && !matches!(t.to_ascii_lowercase().as_str(), "nan" | "inf" | "infinity") => {}
            Err(e) => return Err(Failure::Data(format!("line {}: `{t}`: {e}", i + 1))),
        }
    }
    Ok(values)
}

pub fn run(
    path: &Path,
    y: f64,
    n: usize,
    model: VarianceArg,
    beta: Option<f64>,
    level: f64,
) -> Result<ExitCode, Failure> {
    let model = match (model, beta) {
        (VarianceArg::Gaussian, None) => VarianceModel::Gaussian,
        (VarianceArg::Binary, None) => VarianceModel::Binary,
        (VarianceArg::Custom, Some(beta)) => VarianceModel::Custom { beta },
        (VarianceArg::Custom, None) => return Err(Failure::Usage("--variance-model custom needs --beta".into())),
        (_, Some(_)) => return Err(Failure::Usage("--beta only applies to --variance-model custom".into())),
    };
    let params = MpParams::new(y)?;
    let text = fs::read_to_string(path).map_err(|e| Failure::NoInput(format!("{}: {e}", path.display())))?;
    let values = parse_spectrum(&text)?;
    let eigs = EigenSample::from_values(values)?;
    let estimates = analyze_spectrum(&eigs, n, params, model, level)?;
    print_json(&estimates)?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_header_and_blanks() {
        assert_eq!(parse_spectrum("lambda\n3.5\n\n1e-2\n").unwrap(), vec![3.5, 0.01]);
        assert_eq!(parse_spectrum("2,\n1\n").unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn reports_bad_line_numbers() {
        let e = parse_spectrum("1.0\n2.0\nNaN\n").unwrap_err();
        assert!(matches!(&e, Failure::Data(m) if m.starts_with("line 3")), "{e}");
        let e = parse_spectrum("nan\n").unwrap_err();
        assert!(matches!(&e, Failure::Data(m) if m.starts_with("line 1")), "{e}");
        assert!(parse_spectrum("1.0\nabc\n").is_err());
    }
}
