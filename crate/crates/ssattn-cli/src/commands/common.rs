//! Flag parsing shared across subcommands.

use ssattn::{DeltaMode, DiagShift, PinvMode};

use crate::report::CliError;

/// `paper` (sketch closed form), `fixed=<v>`, or `oracle` (full-matrix closed
/// form at desk scale).
pub fn parse_delta_mode(s: &str) -> Result<DeltaMode, CliError> {
    if s == "paper" {
        return Ok(DeltaMode::SketchFormula);
    }
    if s == "oracle" {
        return Ok(DeltaMode::FullOracle);
    }
    if let Some(value) = s.strip_prefix("fixed=") {
        let v: f64 = value.parse().map_err(|e| {
            CliError::Usage(format!("--delta-mode fixed=<v>: cannot parse '{value}': {e}"))
        })?;
        if !v.is_finite() {
            return Err(CliError::Usage(format!(
                "--delta-mode fixed=<v>: value must be finite, got {v}"
            )));
        }
        return Ok(DeltaMode::Fixed(v));
    }
    Err(CliError::Usage(format!(
        "--delta-mode must be one of paper, fixed=<v>, oracle; got '{s}'"
    )))
}

/// Label a delta mode the way the flag spells it.
pub fn delta_mode_label(mode: DeltaMode) -> String {
    match mode {
        DeltaMode::SketchFormula => "paper".into(),
        DeltaMode::Fixed(v) => format!("fixed={v}"),
        DeltaMode::FullOracle => "oracle".into(),
    }
}

pub fn parse_diag_shift(s: &str) -> Result<DiagShift, CliError> {
    match s {
        "omit" => Ok(DiagShift::Omit),
        "include" => Ok(DiagShift::Include),
        other => Err(CliError::Usage(format!(
            "--diag-shift must be omit or include, got '{other}'"
        ))),
    }
}

pub fn parse_pinv_mode(s: &str) -> Result<PinvMode, CliError> {
    match s {
        "svd" => Ok(PinvMode::Svd),
        "iterative" => Ok(PinvMode::Iterative),
        other => Err(CliError::Usage(format!(
            "--pinv must be svd or iterative, got '{other}'"
        ))),
    }
}

/// Comma-separated ascending positive integers.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let n: usize = part.trim().parse().map_err(|e| {
            CliError::Usage(format!("--n-list: cannot parse '{}': {e}", part.trim()))
        })?;
        if n == 0 {
            return Err(CliError::Usage("--n-list: entries must be positive".into()));
        }
        out.push(n);
    }
    if out.is_empty() {
        return Err(CliError::Usage("--n-list: at least one length required".into()));
    }
    if out.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage("--n-list: lengths must be strictly ascending".into()));
    }
    Ok(out)
}

/// Default thread count: `SSATTN_THREADS` when set and parseable, else 1.
pub fn default_threads() -> usize {
    std::env::var("SSATTN_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}
