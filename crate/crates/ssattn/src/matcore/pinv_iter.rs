//! Factorization-free pseudoinverse via the high-order fixed-point iteration
//! `Z_{j+1} = 1/4 * Z_j (13 I - A Z_j (15 I - A Z_j (7 I - A Z_j)))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

/// Default convergence threshold for the step criterion
/// `|A Z_{j+1} - A Z_j|_F <= tol * |A Z_j|_F`.
pub const PINV_ITER_DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap; far beyond the convergence horizon of the
/// high-order iteration on conditioned inputs.
pub const PINV_ITER_DEFAULT_MAX: usize = 30;

/// Which pseudoinverse route a pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinvMode {
    Svd,
    Iterative,
}

/// Result of the iterative pseudoinverse.
#[derive(Debug, Clone)]
pub struct IterativePinv {
    /// The approximate pseudoinverse `Z*`.
    pub z: DenseMatrix,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Final true residual `|A Z* A - A|_F / |A|_F`.
    pub residual: f64,
    /// True residual before each update, then after the last one; index 0 is
    /// the residual of the initial `Z_0`.
    pub residual_history: Vec<f64>,
    /// Spectral norm of `A A^+ - A Z_0` when the verified entry point was
    /// used; `None` in pipeline mode where computing `A^+` defeats the point.
    pub initial_condition: Option<f64>,
    /// Set when the verified check found the contraction condition violated
    /// (reported, not fatal).
    pub initial_condition_warning: bool,
}

fn quartic_step(z: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    // z * (13 I - y (15 I - y (7 I - y))) / 4, with y = A z.
    let t = y.matmul(&y.sub_from_scaled_identity(7.0)?)?;
    let t = y.matmul(&t.sub_from_scaled_identity(15.0)?)?;
    let mut out = z.matmul(&t.sub_from_scaled_identity(13.0)?)?;
    out.scale_in_place(0.25);
    Ok(out)
}

fn true_residual(y: &DenseMatrix, a: &DenseMatrix, a_norm: f64) -> Result<f64> {
    // |A Z A - A|_F / |A|_F computed from the cached product y = A Z.
    Ok(y.matmul(a)?.sub(a)?.frobenius_norm() / a_norm)
}

/// Scaled-transpose start `Z_0 = A^T / (|A|_1 |A|_inf)`; for nonzero `A` this
/// satisfies the contraction condition `|A A^+ - A Z_0| < 1`.
pub fn scaled_transpose_start(a: &DenseMatrix) -> DenseMatrix {
    let denom = a.one_induced_norm() * a.inf_induced_norm();
    if denom == 0.0 {
        DenseMatrix::zeros(a.cols(), a.rows())
    } else {
        a.transpose().scale(1.0 / denom)
    }
}

/// Iterate from the scaled-transpose start until the step criterion holds or
/// `max_iters` is reached. See [`pinv_iterative_with_start`] for details.
pub fn pinv_iterative(a: &DenseMatrix, max_iters: usize, tol: f64) -> Result<IterativePinv> {
    pinv_iterative_with_start(a, scaled_transpose_start(a), max_iters, tol)
}

/// Like [`pinv_iterative`], but also evaluates `|A A^+ - A Z_0|_2` with an SVD
/// pseudoinverse and flags a violation of the contraction condition. Desk
/// scale only; pipelines use [`pinv_iterative`].
pub fn pinv_iterative_verified(a: &DenseMatrix, max_iters: usize, tol: f64) -> Result<IterativePinv> {
    let z0 = scaled_transpose_start(a);
    let projector = a.matmul(&a.pinv_svd(None))?;
    let start_gap = projector.sub(&a.matmul(&z0)?)?.spectral_norm();
    let mut out = pinv_iterative_with_start(a, z0, max_iters, tol)?;
    out.initial_condition = Some(start_gap);
    out.initial_condition_warning = start_gap >= 1.0;
    Ok(out)
}

/// Run the iteration from an explicit `z0` (warm restarts, or deliberately bad
/// starts in divergence tests).
///
/// Stops at the first iterate with `|A Z_{j+1} - A Z_j|_F <= tol * |A Z_j|_F`,
/// or after `max_iters`. Divergence — the true residual growing for 3
/// consecutive iterations — is an error naming the last residual. A zero
/// matrix short-circuits to its pseudoinverse (the zero matrix of transposed
/// shape).
pub fn pinv_iterative_with_start(
    a: &DenseMatrix,
    z0: DenseMatrix,
    max_iters: usize,
    tol: f64,
) -> Result<IterativePinv> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if max_iters == 0 {
        return Err(Error::ZeroIterations);
    }
    let a_norm = a.frobenius_norm();
    if a_norm == 0.0 {
        return Ok(IterativePinv {
            z: DenseMatrix::zeros(a.cols(), a.rows()),
            iterations: 0,
            residual: 0.0,
            residual_history: vec![0.0],
            initial_condition: None,
            initial_condition_warning: false,
        });
    }

    let mut z = z0;
    let mut y = a.matmul(&z)?;
    let mut residual = true_residual(&y, a, a_norm)?;
    let mut best_residual = residual;
    let mut history = vec![residual];
    let mut growths = 0usize;

    for iteration in 1..=max_iters {
        let z_next = quartic_step(&z, &y)?;
        let y_next = a.matmul(&z_next)?;
        let step = y_next.sub(&y)?.frobenius_norm();
        let base = y.frobenius_norm();
        let next_residual = true_residual(&y_next, a, a_norm)?;
        history.push(next_residual);

        if !next_residual.is_finite() {
            return Err(Error::PinvDiverged {
                iteration,
                residual: next_residual,
                growths: growths + 1,
            });
        }
        // Count genuine growth only well above the best residual seen, so
        // rounding wiggle at the convergence plateau never trips this.
        if next_residual > residual * (1.0 + 1e-12) {
            growths += 1;
            if growths >= 3 && next_residual > 10.0 * best_residual {
                return Err(Error::PinvDiverged {
                    iteration,
                    residual: next_residual,
                    growths,
                });
            }
        } else {
            growths = 0;
        }
        best_residual = best_residual.min(next_residual);

        z = z_next;
        y = y_next;
        residual = next_residual;

        if step <= tol * base {
            return Ok(IterativePinv {
                z,
                iterations: iteration,
                residual,
                residual_history: history,
                initial_condition: None,
                initial_condition_warning: false,
            });
        }
    }

    Ok(IterativePinv {
        z,
        iterations: max_iters,
        residual,
        residual_history: history,
        initial_condition: None,
        initial_condition_warning: false,
    })
}
