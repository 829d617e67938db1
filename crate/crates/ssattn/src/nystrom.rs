//! Baseline Nystrom approximations: the raw column form on an explicit square
//! matrix (desk scale) and the landmark three-softmax form that never
//! materializes `n x n`.

use crate::attention::AttentionProblem;
use crate::error::{Error, Result};
use crate::landmarks;
use crate::matcore::{pinv_iterative, DenseMatrix, PinvMode, PINV_ITER_DEFAULT_MAX, PINV_ITER_DEFAULT_TOL};

/// The three softmax factors built from landmarks:
/// `f = L(Q K~^T / sqrt(d_k))` (n' x m), `a_s = L(Q~ K~^T / sqrt(d_k))`
/// (m x m), `b = L(Q~ K^T / sqrt(d_k))` (m x n'), where n' is the padded row
/// count.
#[derive(Debug, Clone)]
pub struct LandmarkFactors {
    pub f: DenseMatrix,
    pub a_s: DenseMatrix,
    pub b: DenseMatrix,
    /// Original row count before padding.
    pub n: usize,
    /// Padded row count (multiple of m).
    pub n_padded: usize,
}

impl LandmarkFactors {
    pub fn padded(&self) -> bool {
        self.n_padded != self.n
    }
}

/// Pad `x` to `n_padded` rows with zero rows, cloning only when needed.
pub(crate) fn pad_rows(x: &DenseMatrix, n_padded: usize) -> Option<DenseMatrix> {
    if x.rows() == n_padded {
        return None;
    }
    let mut data = Vec::with_capacity(n_padded * x.cols());
    data.extend_from_slice(x.data());
    data.resize(n_padded * x.cols(), 0.0);
    Some(DenseMatrix::from_vec_unchecked(n_padded, x.cols(), data))
}

/// Build the landmark softmax factors for a problem, padding transparently
/// when `m` does not divide `n`.
pub fn landmark_factors(p: &AttentionProblem, m: usize) -> Result<LandmarkFactors> {
    let n = p.n();
    if m == 0 {
        return Err(Error::ZeroLandmarks);
    }
    if m > n {
        return Err(Error::TooManyLandmarks { m, n });
    }
    let n_padded = n.div_ceil(m) * m;
    let q_pad = pad_rows(p.q(), n_padded);
    let k_pad = pad_rows(p.k(), n_padded);
    let q = q_pad.as_ref().unwrap_or(p.q());
    let k = k_pad.as_ref().unwrap_or(p.k());
    let pair = landmarks::landmark_pair(q, k, m)?;
    let scale = p.scale();

    let mut a_s = pair.q_tilde.matmul_transb(&pair.k_tilde)?;
    a_s.scale_in_place(scale);
    a_s.row_softmax_in_place()?;

    let mut f = q.matmul_transb(&pair.k_tilde)?;
    f.scale_in_place(scale);
    f.row_softmax_in_place()?;

    let mut b = pair.q_tilde.matmul_transb(k)?;
    b.scale_in_place(scale);
    b.row_softmax_in_place()?;

    Ok(LandmarkFactors {
        f,
        a_s,
        b,
        n,
        n_padded,
    })
}

pub(crate) fn pinv_for_mode(
    a_s: &DenseMatrix,
    mode: PinvMode,
    max_iters: usize,
    tol: f64,
) -> Result<DenseMatrix> {
    match mode {
        PinvMode::Svd => Ok(a_s.pinv_svd(None)),
        PinvMode::Iterative => Ok(pinv_iterative(a_s, max_iters, tol)?.z),
    }
}

/// Raw Nystrom reconstruction of a square matrix from the selected columns:
/// with `C = s[:, cols]`, `R = s[cols, :]`, `A_s = s[cols, cols]`, returns
/// `C * pinv(A_s) * R`. Materializes `n x n`; desk scale only.
pub fn nystrom_raw(s: &DenseMatrix, cols: &[usize]) -> Result<DenseMatrix> {
    if !s.is_square() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let c = s.gather_columns(cols)?;
    let r = s.gather_rows(cols)?;
    let a_s = r.gather_columns(cols)?;
    c.matmul(&a_s.pinv_svd(None))?.matmul(&r)
}

/// Landmark Nystrom attention output
/// `L(Q K~^T) * pinv(A_s) * L(Q~ K^T) * V`, computed right-to-left so no
/// `n x n` matrix is ever materialized. Cost is `O(n m d + m^3)`.
pub fn nystrom_attention(
    p: &AttentionProblem,
    m: usize,
    pinv_mode: PinvMode,
) -> Result<DenseMatrix> {
    nystrom_attention_opts(p, m, pinv_mode, PINV_ITER_DEFAULT_MAX, PINV_ITER_DEFAULT_TOL)
}

/// [`nystrom_attention`] with an explicit iteration budget for the iterative
/// pseudoinverse. Few iterations leave the smallest singular values of the
/// sketch uninverted, which damps the error amplification an ill-conditioned
/// sketch otherwise causes; at the default budget the iteration converges to
/// the SVD pseudoinverse.
pub fn nystrom_attention_opts(
    p: &AttentionProblem,
    m: usize,
    pinv_mode: PinvMode,
    max_iters: usize,
    tol: f64,
) -> Result<DenseMatrix> {
    let factors = landmark_factors(p, m)?;
    let z = pinv_for_mode(&factors.a_s, pinv_mode, max_iters, tol)?;
    let v_pad = pad_rows(p.v(), factors.n_padded);
    let v = v_pad.as_ref().unwrap_or(p.v());
    let bv = factors.b.matmul(v)?;
    let out = factors.f.matmul(&z.matmul(&bv)?)?;
    if factors.padded() {
        out.truncate_rows(factors.n)
    } else {
        Ok(out)
    }
}

/// Desk-scale twin of [`nystrom_attention`]: the approximate attention matrix
/// `F * pinv(A_s) * B` as an explicit `n x n` matrix, for error studies.
pub fn nystrom_attention_materialized(p: &AttentionProblem, m: usize) -> Result<DenseMatrix> {
    let factors = landmark_factors(p, m)?;
    let z = factors.a_s.pinv_svd(None);
    let s_hat = factors.f.matmul(&z.matmul(&factors.b)?)?;
    s_hat.truncate_square(factors.n)
}
