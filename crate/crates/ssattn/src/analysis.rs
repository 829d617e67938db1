//! Error measurement, the iterative-pseudoinverse error bound, spectrum
//! reports, and the sequence-length scaling study.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{exact_attention, exact_scores, AttentionProblem};
use crate::error::{Error, Result};
use crate::matcore::{DenseMatrix, NormKind, PinvMode};
use crate::nystrom::{nystrom_attention, nystrom_attention_materialized};
use crate::ss_attention::{
    ss_attention_materialized, ss_attention_run, SsAttentionConfig, StageTimings,
};
use crate::DESK_SCALE_MAX_N;

/// Absolute and relative error of `s_tilde` against `s` in the given norm:
/// `absolute = |s - s_tilde|`, `relative = absolute / |s|`.
pub fn approx_error(
    s: &DenseMatrix,
    s_tilde: &DenseMatrix,
    kind: NormKind,
) -> Result<(f64, f64)> {
    if s.rows() != s_tilde.rows() || s.cols() != s_tilde.cols() {
        return Err(Error::ShapeMismatch {
            op: "approx_error",
            left_rows: s.rows(),
            left_cols: s.cols(),
            right_rows: s_tilde.rows(),
            right_cols: s_tilde.cols(),
        });
    }
    let absolute = s.sub(s_tilde)?.norm(kind);
    let base = s.norm(kind);
    let relative = if base > 0.0 { absolute / base } else { absolute };
    Ok((absolute, relative))
}

/// The iterative-pseudoinverse error bound, evaluated exactly as printed:
/// `1 + |A^+|_inf * (1 + delta * |A^+|_inf) * (1 - |A^+ - Z*|_inf)` with
/// `A^+` from the SVD pseudoinverse and induced infinity norms throughout.
/// The bound's derivation direction is an open question; callers compare it
/// against the measured error and record the outcome instead of asserting it.
pub fn error_bound(a_s: &DenseMatrix, delta_ss: f64, z_star: &DenseMatrix) -> Result<f64> {
    if a_s.rows() != z_star.rows() || a_s.cols() != z_star.cols() {
        return Err(Error::ShapeMismatch {
            op: "error_bound",
            left_rows: a_s.rows(),
            left_cols: a_s.cols(),
            right_rows: z_star.rows(),
            right_cols: z_star.cols(),
        });
    }
    let pinv = a_s.pinv_svd(None);
    let pinv_norm = pinv.inf_induced_norm();
    let gap_norm = pinv.sub(z_star)?.inf_induced_norm();
    Ok(1.0 + pinv_norm * (1.0 + delta_ss * pinv_norm) * (1.0 - gap_norm))
}

/// Labeled spectrum of a square matrix, ready for CSV emission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub label: String,
    /// Spectrum magnitudes sorted nonincreasing.
    pub values: Vec<f64>,
    /// Cumulative magnitude series, normalized to end at 1.
    pub cumulative: Vec<f64>,
}

pub fn spectrum_report(m: &DenseMatrix, label: &str) -> Result<SpectrumReport> {
    let s = m.spectrum()?;
    Ok(SpectrumReport {
        label: label.to_string(),
        values: s.values,
        cumulative: s.cumulative,
    })
}

/// Absolute/relative error pair for one norm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorPair {
    pub absolute: f64,
    pub relative: f64,
}

/// Errors of an approximate attention matrix against the exact one, in all
/// three reported norms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub frobenius: ErrorPair,
    pub inf_induced: ErrorPair,
    pub spectral: ErrorPair,
}

pub fn error_summary(s: &DenseMatrix, s_tilde: &DenseMatrix) -> Result<ErrorSummary> {
    let build = |kind| -> Result<ErrorPair> {
        let (absolute, relative) = approx_error(s, s_tilde, kind)?;
        Ok(ErrorPair { absolute, relative })
    };
    Ok(ErrorSummary {
        frobenius: build(NormKind::Frobenius)?,
        inf_induced: build(NormKind::InfInduced)?,
        spectral: build(NormKind::Spectral)?,
    })
}

/// One approximation run's measurables: sizes, per-norm errors, the error
/// bound, ranks, timings, and flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub schema_version: u32,
    pub method: String,
    pub n: usize,
    pub m: usize,
    pub d_k: usize,
    pub d_v: usize,
    pub seed: Option<u64>,
    /// Shift estimator the run used, spelled like the CLI flag
    /// (`paper`, `fixed=<v>`, `oracle`).
    pub delta_mode: String,
    pub errors: Option<ErrorSummary>,
    pub bound_value: Option<f64>,
    /// `errors.inf_induced.absolute <= bound_value` when both are present.
    pub bound_respected: Option<bool>,
    pub delta_used: f64,
    pub rank_s_tilde: Option<usize>,
    pub row_sum_max_deviation: Option<f64>,
    pub pinv_iterations: Option<usize>,
    pub pinv_residual: Option<f64>,
    pub runtimes: StageTimings,
    pub flags: Vec<String>,
}

/// Approximation methods the benchmark and report surfaces understand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Nystrom,
    Ss,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Nystrom => "nystrom",
            Method::Ss => "ss",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "nystrom" => Ok(Method::Nystrom),
            "ss" => Ok(Method::Ss),
            other => Err(Error::InvalidArgument {
                reason: format!("unknown method '{other}' (expected exact, nystrom, or ss)"),
            }),
        }
    }
}

/// Scaling-study configuration. Timing always runs sequentially on one
/// thread; `error_threads` only parallelizes the optional per-trial error
/// measurements, which never share a clock with the timed section.
#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub methods: Vec<Method>,
    pub n_list: Vec<usize>,
    pub d_k: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub collect_errors: bool,
    pub error_threads: usize,
}

/// One measured point of the study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub median_seconds: f64,
    pub trial_seconds: Vec<f64>,
    /// Mean relative Frobenius error across error trials, when collected and
    /// the size permits materialization.
    pub rel_error: Option<f64>,
}

/// Per-method series with its fitted log-log slope (absent for single-point
/// series).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScaling {
    pub method: Method,
    pub points: Vec<ScalingPoint>,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub schema_version: u32,
    pub d_k: usize,
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<MethodScaling>,
}

/// Least-squares slope of `log(y)` against `log(x)`; `None` with fewer than
/// two points.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let var: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    (var > 0.0).then(|| cov / var)
}

fn problem_seed(seed: u64, n: usize, trial: u64) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(n as u64)
        .wrapping_add(trial.wrapping_mul(0x517cc1b727220a95))
}

fn run_method(method: Method, p: &AttentionProblem, m: usize) -> Result<DenseMatrix> {
    match method {
        Method::Exact => exact_attention(p),
        Method::Nystrom => nystrom_attention(p, m, PinvMode::Iterative),
        Method::Ss => {
            let mut cfg = SsAttentionConfig::new(m);
            cfg.pinv_mode = PinvMode::Iterative;
            ss_attention_run(p, &cfg).map(|r| r.output)
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

fn rel_error_trial(method: Method, m: usize, seed: u64) -> Result<f64> {
    let n_small = 256.min(DESK_SCALE_MAX_N);
    let p = AttentionProblem::gaussian(n_small, 16, 16, seed);
    let s = exact_scores(&p)?;
    let s_tilde = match method {
        Method::Exact => s.clone(),
        Method::Nystrom => nystrom_attention_materialized(&p, m.min(n_small))?,
        Method::Ss => {
            let cfg = SsAttentionConfig::new(m.min(n_small));
            ss_attention_materialized(&p, &cfg)?
        }
    };
    Ok(approx_error(&s, &s_tilde, NormKind::Frobenius)?.1)
}

fn collect_errors(method: Method, cfg: &ScalingConfig, n: usize) -> Result<Option<f64>> {
    if !cfg.collect_errors || n > DESK_SCALE_MAX_N {
        return Ok(None);
    }
    let seeds: Vec<u64> = (0..cfg.trials as u64)
        .map(|t| problem_seed(cfg.seed, n, t + 1))
        .collect();
    let errors: Vec<f64> = if cfg.error_threads > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(seeds.len().div_ceil(cfg.error_threads))
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(|&s| rel_error_trial(method, cfg.m, s))
                            .collect::<Result<Vec<f64>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("error trial panicked"))
                .collect::<Result<Vec<Vec<f64>>>>()
                .map(|v| v.into_iter().flatten().collect())
        })?
    } else {
        seeds
            .iter()
            .map(|&s| rel_error_trial(method, cfg.m, s))
            .collect::<Result<_>>()?
    };
    Ok(Some(errors.iter().sum::<f64>() / errors.len() as f64))
}

/// Measure median wall-clock runtimes per method per sequence length, after
/// one warm-up run, and fit the log-log slope of time against length.
pub fn scaling_study(cfg: &ScalingConfig) -> Result<ScalingStudy> {
    if cfg.trials < 3 {
        return Err(Error::InvalidArgument {
            reason: format!("trials must be at least 3, got {}", cfg.trials),
        });
    }
    if cfg.n_list.is_empty() {
        return Err(Error::InvalidArgument {
            reason: "n_list must not be empty".into(),
        });
    }
    if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument {
            reason: "n_list must be strictly ascending".into(),
        });
    }

    let mut methods = Vec::new();
    for &method in &cfg.methods {
        let mut points = Vec::new();
        for &n in &cfg.n_list {
            let p = AttentionProblem::gaussian(n, cfg.d_k, cfg.d_k, problem_seed(cfg.seed, n, 0));
            run_method(method, &p, cfg.m)?; // warm-up, untimed
            let mut trial_seconds = Vec::with_capacity(cfg.trials);
            for _ in 0..cfg.trials {
                let t = Instant::now();
                let out = run_method(method, &p, cfg.m)?;
                trial_seconds.push(t.elapsed().as_secs_f64());
                std::hint::black_box(out.data().len());
            }
            let rel_error = collect_errors(method, cfg, n)?;
            points.push(ScalingPoint {
                n,
                median_seconds: median(trial_seconds.clone()),
                trial_seconds,
                rel_error,
            });
        }
        let slope = fit_loglog_slope(
            &points
                .iter()
                .map(|p| (p.n as f64, p.median_seconds.max(1e-9)))
                .collect::<Vec<_>>(),
        );
        methods.push(MethodScaling {
            method,
            points,
            slope,
        });
    }
    Ok(ScalingStudy {
        schema_version: crate::SCHEMA_VERSION,
        d_k: cfg.d_k,
        m: cfg.m,
        trials: cfg.trials,
        seed: cfg.seed,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_error_of_identical_matrices_is_zero() {
        let p = AttentionProblem::gaussian(8, 4, 4, 1);
        let s = exact_scores(&p).unwrap();
        let (abs, rel) = approx_error(&s, &s, NormKind::Frobenius).unwrap();
        assert_eq!((abs, rel), (0.0, 0.0));
    }

    #[test]
    fn approx_error_identity_vs_zero() {
        let id = DenseMatrix::identity(2);
        let z = DenseMatrix::zeros(2, 2);
        let (abs, rel) = approx_error(&id, &z, NormKind::Frobenius).unwrap();
        assert!((abs - 2.0f64.sqrt()).abs() < 1e-15);
        assert!((rel - 1.0).abs() < 1e-15);
    }

    #[test]
    fn approx_error_matches_explicit_recomputation() {
        let p = AttentionProblem::gaussian(10, 4, 4, 5);
        let s = exact_scores(&p).unwrap();
        let s2 = exact_scores(&AttentionProblem::gaussian(10, 4, 4, 6)).unwrap();
        for kind in [NormKind::Frobenius, NormKind::InfInduced, NormKind::Spectral] {
            let (abs, rel) = approx_error(&s, &s2, kind).unwrap();
            let direct = s.sub(&s2).unwrap().norm(kind);
            assert!((abs - direct).abs() < 1e-14);
            assert!((rel - direct / s.norm(kind)).abs() < 1e-14);
        }
    }

    #[test]
    fn approx_error_rejects_shape_mismatch() {
        let a = DenseMatrix::zeros(2, 2);
        let b = DenseMatrix::zeros(3, 3);
        assert!(approx_error(&a, &b, NormKind::Frobenius).is_err());
    }

    #[test]
    fn error_bound_analytic_cases() {
        let id = DenseMatrix::identity(3);
        let b = error_bound(&id, 0.0, &id).unwrap();
        assert!((b - 2.0).abs() < 1e-14);
        let z = DenseMatrix::zeros(3, 3);
        let b = error_bound(&id, 0.0, &z).unwrap();
        assert!((b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spectrum_report_is_nondecreasing_and_ends_at_one() {
        let p = AttentionProblem::gaussian(24, 8, 8, 3);
        let s = exact_scores(&p).unwrap();
        let rep = spectrum_report(&s, "exact").unwrap();
        assert_eq!(rep.values.len(), 24);
        for w in rep.cumulative.windows(2) {
            assert!(w[1] >= w[0] - 1e-15);
        }
        assert!((rep.cumulative.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_slope_recovers_power_laws() {
        let quadratic: Vec<(f64, f64)> = [256.0, 512.0, 1024.0]
            .iter()
            .map(|&n: &f64| (n, 3.0e-9 * n * n))
            .collect();
        let slope = fit_loglog_slope(&quadratic).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&quadratic[..1]).is_none());
    }

    #[test]
    fn scaling_study_smoke() {
        let cfg = ScalingConfig {
            methods: vec![Method::Ss, Method::Nystrom],
            n_list: vec![64, 128],
            d_k: 8,
            m: 8,
            trials: 3,
            seed: 7,
            collect_errors: true,
            error_threads: 2,
        };
        let study = scaling_study(&cfg).unwrap();
        assert_eq!(study.methods.len(), 2);
        for ms in &study.methods {
            assert_eq!(ms.points.len(), 2);
            assert!(ms.slope.is_some());
            for p in &ms.points {
                assert!(p.median_seconds >= 0.0);
                assert_eq!(p.trial_seconds.len(), 3);
                let err = p.rel_error.expect("errors collected at desk scale");
                assert!(err.is_finite() && err >= 0.0);
            }
        }
    }

    #[test]
    fn scaling_study_validates_inputs() {
        let bad_trials = ScalingConfig {
            methods: vec![Method::Ss],
            n_list: vec![64],
            d_k: 4,
            m: 4,
            trials: 2,
            seed: 0,
            collect_errors: false,
            error_threads: 1,
        };
        assert!(scaling_study(&bad_trials).is_err());
        let bad_list = ScalingConfig {
            n_list: vec![128, 64],
            trials: 3,
            ..bad_trials
        };
        assert!(scaling_study(&bad_list).is_err());
    }
}
