use std::path::PathBuf;

use clap::Args;
use ssattn::analysis::spectrum_report;
use ssattn::attention::exact_scores;
use ssattn::ss_attention::ss_attention_materialized;
use ssattn::{AttentionProblem, SsAttentionConfig, DESK_SCALE_MAX_N};

use crate::commands::common;
use crate::io::write_spectrum_csv;
use crate::report::CliError;

#[derive(Args)]
pub struct SpectrumArgs {
    /// Sequence length.
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
    /// Shift estimator: paper, fixed=<v>, or oracle.
    #[arg(long, default_value = "paper")]
    delta_mode: String,
    /// omit or include the delta * I diagonal term.
    #[arg(long, default_value = "omit")]
    diag_shift: String,
    /// Output prefix; writes `<prefix>_exact.csv` and `<prefix>_approx.csv`.
    #[arg(long, default_value = "spectrum")]
    out_prefix: String,
    /// Allow materialization above the desk-scale threshold.
    #[arg(long)]
    force: bool,
}

pub fn run(args: SpectrumArgs) -> Result<(), CliError> {
    let delta_mode = common::parse_delta_mode(&args.delta_mode)?;
    let diag_shift = common::parse_diag_shift(&args.diag_shift)?;
    if args.n == 0 || args.d == 0 {
        return Err(CliError::Usage("--n and --d must be positive".into()));
    }
    if args.m == 0 || args.m > args.n {
        return Err(CliError::Usage(format!(
            "--m must be in [1, {}], got {}",
            args.n, args.m
        )));
    }
    if args.n > DESK_SCALE_MAX_N && !args.force {
        return Err(CliError::Usage(format!(
            "spectrum materializes {0}x{0}; desk-scale threshold is {DESK_SCALE_MAX_N} (pass --force to override)",
            args.n
        )));
    }

    let p = AttentionProblem::gaussian(args.n, args.d, args.d, args.seed);
    let s = exact_scores(&p).map_err(CliError::from)?;
    let exact = spectrum_report(&s, "exact").map_err(CliError::from)?;

    let mut cfg = SsAttentionConfig::new(args.m);
    cfg.delta_mode = delta_mode;
    cfg.diag_shift = diag_shift;
    let s_tilde = ss_attention_materialized(&p, &cfg).map_err(CliError::from)?;
    let approx = spectrum_report(&s_tilde, "approx").map_err(CliError::from)?;

    let exact_path = PathBuf::from(format!("{}_exact.csv", args.out_prefix));
    write_spectrum_csv(&exact_path, &exact.values, &exact.cumulative)?;
    let approx_path = PathBuf::from(format!("{}_approx.csv", args.out_prefix));
    write_spectrum_csv(&approx_path, &approx.values, &approx.cumulative)?;
    Ok(())
}
