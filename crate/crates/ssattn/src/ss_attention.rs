//! Linear-time attention through sketched spectral shifting with landmarks:
//! the approximate attention matrix is
//! `F * A_s^+ * (I_c - delta * A_s^+) * B` with the three softmax factors of
//! [`crate::nystrom::landmark_factors`], applied to `V` right-to-left so no
//! `n x n` matrix is ever materialized. A desk-scale materialized twin and an
//! SVD-form entry evaluator back the verification suite.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{exact_scores, AttentionProblem};
use crate::error::{Error, Result};
use crate::matcore::{pinv_iterative, pinv_iterative_verified, DenseMatrix, PinvMode};
use crate::nystrom::{landmark_factors, pad_rows, LandmarkFactors};
use crate::spectral_shift::ss_factors_modified;
use crate::DESK_SCALE_MAX_N;

/// How the shift scalar `delta` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// Closed form fitted on the `c x c` sketch alone. The fitted value is
    /// zero up to rounding (see [`ss_factors_modified`]); the pipeline
    /// computes and reports it rather than assuming it.
    SketchFormula,
    /// Caller-supplied constant.
    Fixed(f64),
    /// Closed form fitted on the materialized exact attention matrix with the
    /// landmark column factor standing in for the selected columns. Desk
    /// scale only; the honest nonzero-delta reference.
    FullOracle,
}

/// Whether the output keeps the `delta * I_n` diagonal term of the shifted
/// approximation or omits it (the display-equation form omits it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagShift {
    Omit,
    Include,
}

/// Middle correction factor `(I_c - delta * X)`: `X` is the pseudoinverse in
/// the derived form; the `Sketch` variant substitutes `A_s` itself, matching
/// the display equation, and exists for comparison only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerForm {
    Pseudoinverse,
    Sketch,
}

/// Configuration for the spectral-shift attention pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsAttentionConfig {
    pub m: usize,
    pub pinv_mode: PinvMode,
    pub pinv_iters: usize,
    pub delta_mode: DeltaMode,
    pub diag_shift: DiagShift,
    pub inner_form: InnerForm,
    /// Convergence threshold for the iterative pseudoinverse.
    pub tol: f64,
    /// Check the iteration's start condition against an SVD pseudoinverse
    /// (desk-scale verification only; defeats the purpose in pipelines).
    pub verify_pinv_start: bool,
}

impl SsAttentionConfig {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            pinv_mode: PinvMode::Svd,
            pinv_iters: crate::matcore::PINV_ITER_DEFAULT_MAX,
            delta_mode: DeltaMode::SketchFormula,
            diag_shift: DiagShift::Omit,
            inner_form: InnerForm::Pseudoinverse,
            tol: crate::matcore::PINV_ITER_DEFAULT_TOL,
            verify_pinv_start: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::ZeroLandmarks);
        }
        if self.pinv_iters == 0 {
            return Err(Error::ZeroIterations);
        }
        if let DeltaMode::Fixed(v) = self.delta_mode {
            if !v.is_finite() {
                return Err(Error::InvalidArgument {
                    reason: format!("fixed delta must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Noteworthy events of a pipeline run, reported rather than raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    /// The delta denominator vanished (full-rank sketch) and the zero
    /// convention was applied.
    FullRankConvention,
    /// Inputs were zero-padded so the landmark count divides the row count.
    PaddingApplied,
    /// The iterative pseudoinverse start violated the contraction condition.
    PinvInitialConditionWarning,
}

impl fmt::Display for RunFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RunFlag::FullRankConvention => "full_rank_convention",
            RunFlag::PaddingApplied => "padding_applied",
            RunFlag::PinvInitialConditionWarning => "pinv_initial_condition_warning",
        };
        f.write_str(s)
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub landmarks_and_factors: f64,
    pub pinv: f64,
    pub delta: f64,
    pub multiply: f64,
    pub total: f64,
}

/// Full result of a pipeline run: the output plus everything the reports and
/// the error bound need.
#[derive(Debug, Clone)]
pub struct SsRun {
    pub output: DenseMatrix,
    pub delta: f64,
    /// The `c x c` landmark sketch.
    pub a_s: DenseMatrix,
    /// The pseudoinverse actually used (exact or iterative).
    pub z: DenseMatrix,
    pub pinv_iterations: Option<usize>,
    pub pinv_residual: Option<f64>,
    /// Max deviation of the approximate attention row sums from 1, measured
    /// with a ones-vector pass (no materialization). Reported, not corrected.
    pub row_sum_max_deviation: f64,
    pub flags: Vec<RunFlag>,
    pub timings: StageTimings,
}

struct Pieces {
    factors: LandmarkFactors,
    z: DenseMatrix,
    delta: f64,
    pinv_iterations: Option<usize>,
    pinv_residual: Option<f64>,
    flags: Vec<RunFlag>,
    factor_seconds: f64,
    pinv_seconds: f64,
    delta_seconds: f64,
}

fn compute_pieces(p: &AttentionProblem, cfg: &SsAttentionConfig) -> Result<Pieces> {
    cfg.validate()?;
    let mut flags = Vec::new();

    let t = Instant::now();
    let factors = landmark_factors(p, cfg.m)?;
    let factor_seconds = t.elapsed().as_secs_f64();
    if factors.padded() {
        flags.push(RunFlag::PaddingApplied);
    }

    let t = Instant::now();
    let (z, pinv_iterations, pinv_residual) = match cfg.pinv_mode {
        PinvMode::Svd => (factors.a_s.pinv_svd(None), None, None),
        PinvMode::Iterative => {
            let run = if cfg.verify_pinv_start {
                pinv_iterative_verified(&factors.a_s, cfg.pinv_iters, cfg.tol)?
            } else {
                pinv_iterative(&factors.a_s, cfg.pinv_iters, cfg.tol)?
            };
            if run.initial_condition_warning {
                flags.push(RunFlag::PinvInitialConditionWarning);
            }
            (run.z, Some(run.iterations), Some(run.residual))
        }
    };
    let pinv_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let delta = match cfg.delta_mode {
        DeltaMode::Fixed(v) => v,
        DeltaMode::SketchFormula => {
            let fit = ss_factors_modified(&factors.a_s)?;
            if fit.full_rank_convention {
                flags.push(RunFlag::FullRankConvention);
            }
            fit.delta_ss
        }
        DeltaMode::FullOracle => {
            let n = p.n();
            if n > DESK_SCALE_MAX_N {
                return Err(Error::DeskScaleExceeded {
                    n,
                    limit: DESK_SCALE_MAX_N,
                });
            }
            let s = exact_scores(p)?;
            let f_n = if factors.padded() {
                factors.f.truncate_rows(n)?
            } else {
                factors.f.clone()
            };
            let rank_f = f_n.numerical_rank(None);
            if rank_f == n {
                flags.push(RunFlag::FullRankConvention);
                0.0
            } else {
                let pinv_f = f_n.pinv_svd(None);
                let sketch_trace = pinv_f.matmul(&s)?.matmul(&f_n)?.trace()?;
                (s.trace()? - sketch_trace) / (n - rank_f) as f64
            }
        }
    };
    let delta_seconds = t.elapsed().as_secs_f64();

    Ok(Pieces {
        factors,
        z,
        delta,
        pinv_iterations,
        pinv_residual,
        flags,
        factor_seconds,
        pinv_seconds,
        delta_seconds,
    })
}

impl Pieces {
    /// `(I_c - delta * X) * rhs` without forming the bracket, where `X` is
    /// the pseudoinverse or the sketch per the configured inner form.
    fn corrected(&self, rhs: &DenseMatrix, cfg: &SsAttentionConfig) -> Result<DenseMatrix> {
        let inner = match cfg.inner_form {
            InnerForm::Pseudoinverse => &self.z,
            InnerForm::Sketch => &self.factors.a_s,
        };
        let mut out = rhs.clone();
        if self.delta != 0.0 {
            out.add_scaled_in_place(-self.delta, &inner.matmul(rhs)?)?;
        }
        Ok(out)
    }

    /// Max row-sum deviation from 1 via a ones-vector pass over the first
    /// `n` rows.
    fn row_sum_deviation(&self, cfg: &SsAttentionConfig) -> Result<f64> {
        let ones = DenseMatrix::from_fn(self.factors.n_padded, 1, |_, _| 1.0);
        let col = self.factors.b.matmul(&ones)?;
        let t = self.z.matmul(&self.corrected(&col, cfg)?)?;
        let sums = self.factors.f.matmul(&t)?;
        let offset = match cfg.diag_shift {
            DiagShift::Include => self.delta,
            DiagShift::Omit => 0.0,
        };
        Ok((0..self.factors.n)
            .map(|i| (sums.get(i, 0) + offset - 1.0).abs())
            .fold(0.0, f64::max))
    }
}

/// Run the linear-memory pipeline and return the output with run diagnostics.
///
/// The multiplication is right-to-left: `B V` first (`c x d_v`), then the
/// corrected product, then `Z`, then `F`; peak temporary storage stays within
/// `O(n c + c^2 + n d_v)` scalars.
pub fn ss_attention_run(p: &AttentionProblem, cfg: &SsAttentionConfig) -> Result<SsRun> {
    let start = Instant::now();
    let pieces = compute_pieces(p, cfg)?;

    let t = Instant::now();
    let v_pad = pad_rows(p.v(), pieces.factors.n_padded);
    let v = v_pad.as_ref().unwrap_or(p.v());
    let bv = pieces.factors.b.matmul(v)?;
    let w = pieces.z.matmul(&pieces.corrected(&bv, cfg)?)?;
    let full = pieces.factors.f.matmul(&w)?;
    let mut output = if pieces.factors.padded() {
        full.truncate_rows(pieces.factors.n)?
    } else {
        full
    };
    if cfg.diag_shift == DiagShift::Include && pieces.delta != 0.0 {
        output.add_scaled_in_place(pieces.delta, p.v())?;
    }
    let multiply = t.elapsed().as_secs_f64();

    let row_sum_max_deviation = pieces.row_sum_deviation(cfg)?;
    Ok(SsRun {
        output,
        delta: pieces.delta,
        a_s: pieces.factors.a_s,
        z: pieces.z,
        pinv_iterations: pieces.pinv_iterations,
        pinv_residual: pieces.pinv_residual,
        row_sum_max_deviation,
        flags: pieces.flags,
        timings: StageTimings {
            landmarks_and_factors: pieces.factor_seconds,
            pinv: pieces.pinv_seconds,
            delta: pieces.delta_seconds,
            multiply,
            total: start.elapsed().as_secs_f64(),
        },
    })
}

/// Output-only convenience wrapper around [`ss_attention_run`].
pub fn ss_attention(p: &AttentionProblem, cfg: &SsAttentionConfig) -> Result<DenseMatrix> {
    Ok(ss_attention_run(p, cfg)?.output)
}

/// Desk-scale twin: the approximate attention matrix as an explicit `n x n`
/// matrix (plus `delta * I_n` when the diagonal shift is included).
pub fn ss_attention_materialized(
    p: &AttentionProblem,
    cfg: &SsAttentionConfig,
) -> Result<DenseMatrix> {
    let pieces = compute_pieces(p, cfg)?;
    let w = pieces.z.matmul(&pieces.corrected(&pieces.factors.b, cfg)?)?;
    let full = pieces.factors.f.matmul(&w)?;
    let mut s_tilde = if pieces.factors.padded() {
        full.truncate_square(pieces.factors.n)?
    } else {
        full
    };
    if cfg.diag_shift == DiagShift::Include && pieces.delta != 0.0 {
        s_tilde = s_tilde.add_scaled_identity(pieces.delta)?;
    }
    Ok(s_tilde)
}

/// Single entry `(i, j)` of the approximate attention matrix evaluated through
/// the SVD of the sketch: with `A_s = U G V^T`, the factor `V G^{-1} U^T`
/// replaces the pseudoinverse (reciprocals of singular values at the noise
/// floor are zeroed, which is exactly the pseudoinverse substitution for
/// singular sketches). Agrees with the materialized entry to rounding; the
/// verification suite uses that as the algebraic-equivalence check.
pub fn ss_entry_svd_form(
    p: &AttentionProblem,
    cfg: &SsAttentionConfig,
    i: usize,
    j: usize,
) -> Result<f64> {
    let n = p.n();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    let pieces = compute_pieces(p, cfg)?;
    let gamma_inv = pieces.factors.a_s.svd().pinv(crate::matcore::PINV_DEFAULT_TOL)?;

    let f_row = pieces.factors.f.row(i).to_vec();
    let b_col = pieces.factors.b.column(j);
    let c = b_col.len();

    let apply = |m: &DenseMatrix, x: &[f64]| -> Vec<f64> {
        (0..c)
            .map(|r| m.row(r).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    };

    let inner: &DenseMatrix = match cfg.inner_form {
        InnerForm::Pseudoinverse => &gamma_inv,
        InnerForm::Sketch => &pieces.factors.a_s,
    };
    let u1 = apply(inner, &b_col);
    let u2: Vec<f64> = b_col
        .iter()
        .zip(&u1)
        .map(|(&b, &u)| b - pieces.delta * u)
        .collect();
    let u3 = apply(&gamma_inv, &u2);
    let mut value: f64 = f_row.iter().zip(&u3).map(|(&a, &b)| a * b).sum();
    if cfg.diag_shift == DiagShift::Include && i == j {
        value += pieces.delta;
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::exact_attention;
    use crate::matcore::audit;
    use crate::nystrom::nystrom_attention;

    fn rel_fro(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn full_landmarks_reproduce_exact_attention() {
        // m = n: the sketch is the full attention matrix, the fitted delta
        // hits the full-rank convention, and the chain collapses to S V.
        let p = AttentionProblem::gaussian(24, 8, 8, 41);
        let cfg = SsAttentionConfig::new(24);
        let run = ss_attention_run(&p, &cfg).unwrap();
        assert_eq!(run.delta, 0.0);
        assert!(run.flags.contains(&RunFlag::FullRankConvention));
        let exact = exact_attention(&p).unwrap();
        let rel = rel_fro(&run.output, &exact);
        assert!(rel < 1e-8, "relative error {rel}");
    }

    #[test]
    fn single_token_returns_values() {
        let p = AttentionProblem::gaussian(1, 2, 3, 6);
        let out = ss_attention(&p, &SsAttentionConfig::new(1)).unwrap();
        assert!(out.sub(p.v()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zero_delta_reduces_to_nystrom_attention() {
        let p = AttentionProblem::gaussian(48, 8, 8, 15);
        let mut cfg = SsAttentionConfig::new(8);
        cfg.delta_mode = DeltaMode::Fixed(0.0);
        let ss = ss_attention(&p, &cfg).unwrap();
        let nys = nystrom_attention(&p, 8, PinvMode::Svd).unwrap();
        let rel = rel_fro(&ss, &nys);
        assert!(rel < 1e-10, "reduction gap {rel}");
    }

    #[test]
    fn pipeline_matches_materialized_across_configs() {
        let p = AttentionProblem::gaussian(40, 8, 6, 27);
        let mut cfgs = Vec::new();
        for &delta_mode in &[
            DeltaMode::SketchFormula,
            DeltaMode::Fixed(0.2),
            DeltaMode::FullOracle,
        ] {
            for &diag_shift in &[DiagShift::Omit, DiagShift::Include] {
                for &pinv_mode in &[PinvMode::Svd, PinvMode::Iterative] {
                    let mut cfg = SsAttentionConfig::new(8);
                    cfg.delta_mode = delta_mode;
                    cfg.diag_shift = diag_shift;
                    cfg.pinv_mode = pinv_mode;
                    cfgs.push(cfg);
                }
            }
        }
        let mut literal = SsAttentionConfig::new(8);
        literal.inner_form = InnerForm::Sketch;
        literal.delta_mode = DeltaMode::Fixed(0.1);
        cfgs.push(literal);

        for cfg in cfgs {
            let direct = ss_attention(&p, &cfg).unwrap();
            let via = ss_attention_materialized(&p, &cfg)
                .unwrap()
                .matmul(p.v())
                .unwrap();
            let expected = if cfg.diag_shift == DiagShift::Include {
                via
            } else {
                via.clone()
            };
            let rel = rel_fro(&direct, &expected);
            assert!(rel < 1e-10, "pipeline gap {rel} for {cfg:?}");
        }
    }

    #[test]
    fn materialized_rank_follows_diag_shift() {
        let p = AttentionProblem::gaussian(64, 8, 8, 33);
        let mut cfg = SsAttentionConfig::new(8);
        let omit = ss_attention_materialized(&p, &cfg).unwrap();
        assert!(omit.numerical_rank(None) <= 8);

        cfg.delta_mode = DeltaMode::Fixed(0.1);
        cfg.diag_shift = DiagShift::Include;
        let include = ss_attention_materialized(&p, &cfg).unwrap();
        assert_eq!(include.numerical_rank(None), 64);
    }

    #[test]
    fn entry_svd_form_matches_materialized_entries() {
        let p = AttentionProblem::gaussian(32, 8, 8, 51);
        let cfg = SsAttentionConfig::new(8);
        assert!(p.q().rows() == 32);
        let s_tilde = ss_attention_materialized(&p, &cfg).unwrap();
        let mut rng = crate::synth::rng(77);
        for _ in 0..20 {
            use rand::Rng;
            let i = rng.random_range(0..32);
            let j = rng.random_range(0..32);
            let entry = ss_entry_svd_form(&p, &cfg, i, j).unwrap();
            let gap = (entry - s_tilde.get(i, j)).abs();
            assert!(gap < 1e-9, "entry ({i},{j}) gap {gap}");
        }
    }

    #[test]
    fn entry_form_reproduces_exact_scores_at_full_landmarks() {
        let p = AttentionProblem::gaussian(12, 4, 4, 61);
        let cfg = SsAttentionConfig::new(12);
        let s = exact_scores(&p).unwrap();
        for (i, j) in [(0, 0), (3, 7), (11, 2)] {
            let entry = ss_entry_svd_form(&p, &cfg, i, j).unwrap();
            assert!((entry - s.get(i, j)).abs() < 1e-8);
        }
    }

    #[test]
    fn entry_form_on_single_token_is_one() {
        let p = AttentionProblem::gaussian(1, 1, 1, 5);
        let cfg = SsAttentionConfig::new(1);
        let v = ss_entry_svd_form(&p, &cfg, 0, 0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(matches!(
            ss_entry_svd_form(&p, &cfg, 1, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn sketch_delta_degenerates_on_rank_deficient_sketch() {
        // Duplicate rows in Q collapse landmark rows, making A_s rank
        // deficient; the fitted delta must still vanish to rounding.
        let mut rng = crate::synth::rng(71);
        let base = crate::synth::gaussian_matrix(&mut rng, 4, 4);
        let mut qdata = Vec::new();
        for i in 0..4 {
            for _ in 0..4 {
                qdata.extend_from_slice(base.row(i % 2));
            }
        }
        let q = DenseMatrix::new(16, 4, qdata).unwrap();
        let k = crate::synth::gaussian_matrix(&mut rng, 16, 4);
        let v = crate::synth::gaussian_matrix(&mut rng, 16, 4);
        let p = AttentionProblem::new(q, k, v).unwrap();
        let run = ss_attention_run(&p, &SsAttentionConfig::new(4)).unwrap();
        let bound = 1e-8 * (run.a_s.trace().unwrap().abs() + 1.0);
        assert!(run.delta.abs() <= bound, "delta {} bound {bound}", run.delta);
    }

    #[test]
    fn padding_is_transparent() {
        let p = AttentionProblem::gaussian(15, 4, 4, 81);
        let cfg = SsAttentionConfig::new(4);
        let run = ss_attention_run(&p, &cfg).unwrap();
        assert_eq!(run.output.rows(), 15);
        assert!(run.flags.contains(&RunFlag::PaddingApplied));
        let via = ss_attention_materialized(&p, &cfg)
            .unwrap()
            .matmul(p.v())
            .unwrap();
        assert!(rel_fro(&run.output, &via) < 1e-10);
    }

    #[test]
    fn full_oracle_is_desk_scale_only() {
        let p = AttentionProblem::gaussian(4100, 2, 2, 1);
        let mut cfg = SsAttentionConfig::new(4);
        cfg.delta_mode = DeltaMode::FullOracle;
        assert!(matches!(
            ss_attention(&p, &cfg),
            Err(Error::DeskScaleExceeded { .. })
        ));
    }

    #[test]
    fn full_oracle_delta_is_finite_and_used() {
        let p = AttentionProblem::gaussian(32, 8, 8, 91);
        let mut cfg = SsAttentionConfig::new(8);
        cfg.delta_mode = DeltaMode::FullOracle;
        let run = ss_attention_run(&p, &cfg).unwrap();
        assert!(run.delta.is_finite());
        assert_eq!(run.output.rows(), 32);
    }

    #[test]
    fn peak_temporaries_stay_linear() {
        let n = 512;
        let c = 16;
        let d = 16;
        let p = AttentionProblem::gaussian(n, d, d, 13);
        let cfg = SsAttentionConfig::new(c);
        let (out, peak) = audit::audited(|| ss_attention(&p, &cfg).unwrap());
        assert_eq!(out.rows(), n);
        let budget = 3 * (n * c + c * c + n * d);
        assert!(peak <= budget, "peak {peak} scalars exceeds budget {budget}");
    }

    #[test]
    fn row_sum_deviation_is_small_when_approximation_is_exact() {
        let p = AttentionProblem::gaussian(16, 4, 4, 19);
        let run = ss_attention_run(&p, &SsAttentionConfig::new(16)).unwrap();
        assert!(run.row_sum_max_deviation < 1e-8);
    }
}
