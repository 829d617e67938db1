use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use ssattn::analysis::{scaling_study, Method, ScalingConfig};

use crate::commands::common;
use crate::report::{emit_json, CliError};

/// Exact attention refuses larger sequence lengths without --force
/// (an n x n materialization-free pass is still quadratic time).
const EXACT_MAX_N: usize = 16384;

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated subset of exact, nystrom, ss.
    #[arg(long, default_value = "ss")]
    methods: String,
    /// Comma-separated ascending sequence lengths.
    #[arg(long)]
    n_list: String,
    /// Query/key/value dimension.
    #[arg(long, default_value_t = 64)]
    d: usize,
    /// Landmark count.
    #[arg(long, default_value_t = 64)]
    m: usize,
    /// Timed trials per point (after one warm-up); medians are reported.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Worker threads for the optional error trials; timing always runs on
    /// one thread. Defaults to SSATTN_THREADS or 1.
    #[arg(long)]
    threads: Option<usize>,
    /// Also collect per-length approximation errors (desk scale only).
    #[arg(long)]
    errors: bool,
    /// Allow the exact method beyond its refusal threshold.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runtime CSV destination (stdout when omitted).
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Slope JSON destination (stderr when omitted, keeping stdout pure CSV).
    #[arg(long)]
    out_json: Option<PathBuf>,
}

pub fn run(args: BenchArgs) -> Result<(), CliError> {
    let n_list = common::parse_n_list(&args.n_list)?;
    let mut methods = Vec::new();
    for name in args.methods.split(',') {
        let method: Method = name
            .trim()
            .parse()
            .map_err(|e: ssattn::Error| CliError::Usage(e.to_string()))?;
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    let max_n = *n_list.last().expect("validated nonempty");
    if methods.contains(&Method::Exact) && max_n > EXACT_MAX_N && !args.force {
        return Err(CliError::Usage(format!(
            "exact attention at n = {max_n} exceeds {EXACT_MAX_N}; pass --force to accept the quadratic cost"
        )));
    }
    if args.m == 0 || args.m > *n_list.first().expect("nonempty") {
        return Err(CliError::Usage(format!(
            "--m must be in [1, {}], got {}",
            n_list.first().unwrap(),
            args.m
        )));
    }

    let threads = args.threads.unwrap_or_else(common::default_threads);
    let cfg = ScalingConfig {
        methods,
        n_list,
        d_k: args.d,
        m: args.m,
        trials: args.trials,
        seed: args.seed,
        collect_errors: args.errors,
        error_threads: threads.max(1),
    };
    let study = scaling_study(&cfg).map_err(CliError::from)?;

    let mut csv = String::from("method,n,median_seconds\n");
    for ms in &study.methods {
        for point in &ms.points {
            csv.push_str(&format!(
                "{},{},{:.9e}\n",
                ms.method.name(),
                point.n,
                point.median_seconds
            ));
        }
    }
    match &args.out_csv {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| CliError::io(path, e))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
        }
    }

    match &args.out_json {
        Some(_) => emit_json(args.out_json.as_ref(), &study),
        None => {
            let text = serde_json::to_string_pretty(&study)
                .map_err(|e| CliError::Io(format!("serializing slopes: {e}")))?;
            eprintln!("{text}");
            Ok(())
        }
    }
}
