use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use ssattn::analysis::{error_bound, error_summary, ApproxReport, Method};
use ssattn::attention::{exact_attention, exact_scores};
use ssattn::nystrom::{nystrom_attention_materialized, nystrom_attention_opts};
use ssattn::ss_attention::{ss_attention_materialized, ss_attention_run, StageTimings};
use ssattn::{
    AttentionProblem, DenseMatrix, Error as CoreError, PinvMode, SsAttentionConfig,
    DESK_SCALE_MAX_N, SCHEMA_VERSION,
};

use crate::commands::common;
use crate::io::{read_matrix, write_matrix};
use crate::report::{emit_json, CliError};

#[derive(Args)]
pub struct ApproxArgs {
    /// Method: exact, nystrom, or ss.
    #[arg(long)]
    method: String,
    /// Sequence length for seeded generation.
    #[arg(long)]
    n: Option<usize>,
    /// Query/key dimension for seeded generation.
    #[arg(long)]
    d: Option<usize>,
    /// Value dimension (defaults to --d).
    #[arg(long)]
    dv: Option<usize>,
    /// Landmark count (required for nystrom and ss).
    #[arg(long)]
    m: Option<usize>,
    /// Seed for the deterministic generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Query matrix file (.csv or .mat1) instead of seeded generation.
    #[arg(long)]
    q: Option<PathBuf>,
    /// Key matrix file.
    #[arg(long)]
    k: Option<PathBuf>,
    /// Value matrix file.
    #[arg(long)]
    v: Option<PathBuf>,
    /// Pseudoinverse route: svd or iterative.
    #[arg(long, default_value = "svd")]
    pinv: String,
    /// Iteration cap for the iterative pseudoinverse.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    /// Shift estimator: paper, fixed=<v>, or oracle.
    #[arg(long, default_value = "paper")]
    delta_mode: String,
    /// Keep or omit the delta * I diagonal term: omit or include.
    #[arg(long, default_value = "omit")]
    diag_shift: String,
    /// Materialize the approximate matrix and report errors vs the exact one.
    #[arg(long)]
    materialize: bool,
    /// Allow materialization above the desk-scale threshold.
    #[arg(long)]
    force: bool,
    /// Report destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the attention output matrix (.csv or .mat1).
    #[arg(long)]
    save_output: Option<PathBuf>,
}

/// Emitted instead of an [`ApproxReport`] when the run fails numerically;
/// the process then exits 3.
#[derive(Serialize)]
struct FailureReport {
    schema_version: u32,
    error: String,
    flags: Vec<String>,
}

fn load_problem(args: &ApproxArgs) -> Result<AttentionProblem, CliError> {
    let from_files = [&args.q, &args.k, &args.v];
    let given = from_files.iter().filter(|p| p.is_some()).count();
    if given == 3 {
        let q = read_matrix(args.q.as_ref().unwrap())?;
        let k = read_matrix(args.k.as_ref().unwrap())?;
        let v = read_matrix(args.v.as_ref().unwrap())?;
        return AttentionProblem::new(q, k, v)
            .map_err(|e| CliError::Usage(format!("input matrices: {e}")));
    }
    if given > 0 {
        return Err(CliError::Usage(
            "--q, --k, and --v must be given together".into(),
        ));
    }
    let n = args
        .n
        .ok_or_else(|| CliError::Usage("--n is required without input files".into()))?;
    let d = args
        .d
        .ok_or_else(|| CliError::Usage("--d is required without input files".into()))?;
    if n == 0 || d == 0 {
        return Err(CliError::Usage("--n and --d must be positive".into()));
    }
    let dv = args.dv.unwrap_or(d);
    if dv == 0 {
        return Err(CliError::Usage("--dv must be positive".into()));
    }
    Ok(AttentionProblem::gaussian(n, d, dv, args.seed))
}

struct RunOutcome {
    output: DenseMatrix,
    delta_used: f64,
    pinv_iterations: Option<usize>,
    pinv_residual: Option<f64>,
    row_sum_max_deviation: Option<f64>,
    flags: Vec<String>,
    timings: StageTimings,
    /// Sketch and pseudoinverse, for the bound (ss only).
    bound_inputs: Option<(DenseMatrix, DenseMatrix)>,
}

fn execute(
    method: Method,
    p: &AttentionProblem,
    cfg: &SsAttentionConfig,
    pinv_mode: PinvMode,
) -> Result<RunOutcome, CoreError> {
    match method {
        Method::Exact => {
            let t = Instant::now();
            let output = exact_attention(p)?;
            let total = t.elapsed().as_secs_f64();
            Ok(RunOutcome {
                output,
                delta_used: 0.0,
                pinv_iterations: None,
                pinv_residual: None,
                row_sum_max_deviation: None,
                flags: Vec::new(),
                timings: StageTimings {
                    multiply: total,
                    total,
                    ..Default::default()
                },
            bound_inputs: None,
            })
        }
        Method::Nystrom => {
            let t = Instant::now();
            let output = nystrom_attention_opts(p, cfg.m, pinv_mode, cfg.pinv_iters, cfg.tol)?;
            let total = t.elapsed().as_secs_f64();
            Ok(RunOutcome {
                output,
                delta_used: 0.0,
                pinv_iterations: None,
                pinv_residual: None,
                row_sum_max_deviation: None,
                flags: Vec::new(),
                timings: StageTimings {
                    total,
                    ..Default::default()
                },
                bound_inputs: None,
            })
        }
        Method::Ss => {
            let run = ss_attention_run(p, cfg)?;
            Ok(RunOutcome {
                output: run.output,
                delta_used: run.delta,
                pinv_iterations: run.pinv_iterations,
                pinv_residual: run.pinv_residual,
                row_sum_max_deviation: Some(run.row_sum_max_deviation),
                flags: run.flags.iter().map(|f| f.to_string()).collect(),
                timings: run.timings,
                bound_inputs: Some((run.a_s, run.z)),
            })
        }
    }
}

fn materialized_approximation(
    method: Method,
    p: &AttentionProblem,
    cfg: &SsAttentionConfig,
    s: &DenseMatrix,
) -> Result<DenseMatrix, CoreError> {
    match method {
        Method::Exact => Ok(s.clone()),
        Method::Nystrom => nystrom_attention_materialized(p, cfg.m),
        Method::Ss => ss_attention_materialized(p, cfg),
    }
}

pub fn run(args: ApproxArgs) -> Result<(), CliError> {
    let method: Method = args
        .method
        .parse()
        .map_err(|e: CoreError| CliError::Usage(e.to_string()))?;
    let delta_mode = common::parse_delta_mode(&args.delta_mode)?;
    let diag_shift = common::parse_diag_shift(&args.diag_shift)?;
    let pinv_mode = common::parse_pinv_mode(&args.pinv)?;
    if args.iters == 0 {
        return Err(CliError::Usage("--iters must be at least 1".into()));
    }

    let p = load_problem(&args)?;
    let n = p.n();

    let m = match method {
        Method::Exact => args.m.unwrap_or(1),
        _ => args.m.ok_or_else(|| {
            CliError::Usage(format!("--m is required for method {}", method.name()))
        })?,
    };
    if method != Method::Exact && (m == 0 || m > n) {
        return Err(CliError::Usage(format!(
            "--m must be in [1, {n}], got {m}"
        )));
    }

    let mut cfg = SsAttentionConfig::new(m);
    cfg.pinv_mode = pinv_mode;
    cfg.pinv_iters = args.iters;
    cfg.delta_mode = delta_mode;
    cfg.diag_shift = diag_shift;

    let outcome = match execute(method, &p, &cfg, pinv_mode) {
        Ok(outcome) => outcome,
        Err(core) => {
            let cli: CliError = core.into();
            if let CliError::Numerical { message, flags } = &cli {
                let failure = FailureReport {
                    schema_version: SCHEMA_VERSION,
                    error: message.clone(),
                    flags: flags.clone(),
                };
                emit_json(args.out.as_ref(), &failure)?;
            }
            return Err(cli);
        }
    };

    let mut errors = None;
    let mut rank_s_tilde = None;
    let mut bound_value = None;
    let mut bound_respected = None;
    if args.materialize {
        if n > DESK_SCALE_MAX_N && !args.force {
            return Err(CliError::Usage(format!(
                "--materialize at n = {n} exceeds the desk-scale threshold {DESK_SCALE_MAX_N}; pass --force to override"
            )));
        }
        let s = exact_scores(&p).map_err(CliError::from)?;
        let s_tilde = materialized_approximation(method, &p, &cfg, &s).map_err(CliError::from)?;
        let summary = error_summary(&s, &s_tilde).map_err(CliError::from)?;
        rank_s_tilde = Some(s_tilde.numerical_rank(None));
        if let Some((a_s, z)) = &outcome.bound_inputs {
            let b = error_bound(a_s, outcome.delta_used, z).map_err(CliError::from)?;
            bound_value = Some(b);
            bound_respected = Some(summary.inf_induced.absolute <= b);
        }
        errors = Some(summary);
    }

    if let Some(path) = &args.save_output {
        write_matrix(path, &outcome.output)?;
    }

    let report = ApproxReport {
        schema_version: SCHEMA_VERSION,
        method: method.name().to_string(),
        n,
        m,
        d_k: p.d_k(),
        d_v: p.d_v(),
        seed: if args.q.is_some() { None } else { Some(args.seed) },
        delta_mode: common::delta_mode_label(delta_mode),
        errors,
        bound_value,
        bound_respected,
        delta_used: outcome.delta_used,
        rank_s_tilde,
        row_sum_max_deviation: outcome.row_sum_max_deviation,
        pinv_iterations: outcome.pinv_iterations,
        pinv_residual: outcome.pinv_residual,
        runtimes: outcome.timings,
        flags: outcome.flags,
    };
    emit_json(args.out.as_ref(), &report)
}
