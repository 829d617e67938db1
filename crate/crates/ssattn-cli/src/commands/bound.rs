use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use ssattn::analysis::{approx_error, error_bound};
use ssattn::attention::exact_scores;
use ssattn::ss_attention::{ss_attention_materialized, ss_attention_run};
use ssattn::{
    AttentionProblem, NormKind, PinvMode, SsAttentionConfig, DESK_SCALE_MAX_N, SCHEMA_VERSION,
};

use crate::report::{emit_json, CliError};

#[derive(Args)]
pub struct BoundArgs {
    /// Sequence length (desk scale enforced).
    #[arg(long)]
    n: usize,
    /// Query/key dimension.
    #[arg(long)]
    d: usize,
    /// Landmark count.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap for the iterative pseudoinverse.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Measured approximation error versus the evaluated bound. The comparison is
/// recorded, never asserted: a violation is data, not a failure.
#[derive(Serialize)]
struct BoundReport {
    schema_version: u32,
    n: usize,
    m: usize,
    d_k: usize,
    seed: u64,
    iters: usize,
    delta_used: f64,
    /// `|S - S~|_inf` with the iterative pseudoinverse in the pipeline.
    empirical_e: f64,
    bound_value: f64,
    respected: bool,
    pinv_iterations: Option<usize>,
    pinv_residual: Option<f64>,
    flags: Vec<String>,
}

pub fn run(args: BoundArgs) -> Result<(), CliError> {
    if args.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }
    if args.n == 0 || args.d == 0 {
        return Err(CliError::Usage("--n and --d must be positive".into()));
    }
    if args.m == 0 || args.m > args.n {
        return Err(CliError::Usage(format!(
            "--m must be in [1, {}], got {}",
            args.n, args.m
        )));
    }
    if args.n > DESK_SCALE_MAX_N {
        return Err(CliError::Usage(format!(
            "bound evaluation materializes {0}x{0}; desk-scale threshold is {DESK_SCALE_MAX_N}",
            args.n
        )));
    }

    let p = AttentionProblem::gaussian(args.n, args.d, args.d, args.seed);
    let mut cfg = SsAttentionConfig::new(args.m);
    cfg.pinv_mode = PinvMode::Iterative;
    cfg.pinv_iters = args.iters;

    let run = ss_attention_run(&p, &cfg).map_err(CliError::from)?;
    let s = exact_scores(&p).map_err(CliError::from)?;
    let s_tilde = ss_attention_materialized(&p, &cfg).map_err(CliError::from)?;
    let (empirical_e, _) = approx_error(&s, &s_tilde, NormKind::InfInduced).map_err(CliError::from)?;
    let bound_value = error_bound(&run.a_s, run.delta, &run.z).map_err(CliError::from)?;

    let report = BoundReport {
        schema_version: SCHEMA_VERSION,
        n: args.n,
        m: args.m,
        d_k: args.d,
        seed: args.seed,
        iters: args.iters,
        delta_used: run.delta,
        empirical_e,
        bound_value,
        respected: empirical_e <= bound_value,
        pinv_iterations: run.pinv_iterations,
        pinv_residual: run.pinv_residual,
        flags: run.flags.iter().map(|f| f.to_string()).collect(),
    };
    emit_json(args.out.as_ref(), &report)
}
