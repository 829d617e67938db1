use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use ssattn::spectral_shift::{theorem1_check, FlatTailSpec, Theorem1Report};
use ssattn::SCHEMA_VERSION;

use crate::report::{emit_json, CliError};

#[derive(Args)]
pub struct Lemma1Args {
    /// Matrix size.
    #[arg(long)]
    n: usize,
    /// Head rank (eigenvalues strictly above the flat tail).
    #[arg(long)]
    k: usize,
    /// Tail eigenvalue, > 0.
    #[arg(long)]
    theta: f64,
    /// Columns to select; must be at least k.
    #[arg(long)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated head eigenvalues (default: theta + 1, ..., theta + k).
    #[arg(long)]
    head_eigs: Option<String>,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Lemma1Report {
    schema_version: u32,
    #[serde(flatten)]
    report: Theorem1Report,
}

pub fn run(args: Lemma1Args) -> Result<(), CliError> {
    let spec = match &args.head_eigs {
        Some(list) => {
            let mut head = Vec::new();
            for part in list.split(',') {
                let v: f64 = part.trim().parse().map_err(|e| {
                    CliError::Usage(format!("--head-eigs: cannot parse '{}': {e}", part.trim()))
                })?;
                head.push(v);
            }
            if head.len() != args.k {
                return Err(CliError::Usage(format!(
                    "--head-eigs lists {} values but --k is {}",
                    head.len(),
                    args.k
                )));
            }
            FlatTailSpec::new(args.n, head, args.theta, args.seed)
        }
        None => FlatTailSpec::with_default_head(args.n, args.k, args.theta, args.seed),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let report = theorem1_check(&spec, args.c).map_err(|e| CliError::Usage(e.to_string()))?;
    emit_json(
        args.out.as_ref(),
        &Lemma1Report {
            schema_version: SCHEMA_VERSION,
            report,
        },
    )
}
