//! Spectral shifting on explicit matrices: the full closed form on a symmetric
//! `n x n` matrix, the sketched closed form on the `c x c` intersection block,
//! the least-squares objectives behind both, flat-tail SPSD generators, and
//! the comparison report pitting the shifted reconstruction against plain
//! Nystrom on the same columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::nystrom;
use crate::synth;

/// A column selection over a square `n x n` matrix, stored as a list of
/// distinct in-range indices (the selection matrix applied as a gather).
#[derive(Debug, Clone)]
pub struct ColumnSelection {
    indices: Vec<usize>,
    n: usize,
}

impl ColumnSelection {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &idx in &indices {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
            if seen[idx] {
                return Err(Error::DuplicateIndex { index: idx });
            }
            seen[idx] = true;
        }
        Ok(Self { indices, n })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Shift factors `(U, delta)` for the approximation
/// `C~ * U * C~^T + delta * I_n`, together with the sketch they were fitted
/// on. `shift` records the diagonal shift used to form `K~ = K - shift * I`
/// before selecting columns (0 when none), so the objective can rebuild `C~`.
#[derive(Debug, Clone)]
pub struct SsFactors {
    pub u_ss: DenseMatrix,
    pub delta_ss: f64,
    /// The `c x c` sketch the factors were computed from.
    pub a_s: DenseMatrix,
    pub rank_a: usize,
    /// Diagonal shift applied before column selection.
    pub shift: f64,
    /// Set when the rank-deficiency denominator vanished and the delta
    /// convention (`delta = 0`) was applied.
    pub full_rank_convention: bool,
}

/// Full spectral shifting on a symmetric matrix (cost `O(n^2 c)`):
/// with `C~ = (K - shift * I) P`,
/// `delta = (tr(K) - tr(C~^+ K C~)) / (n - rank(C~))` and
/// `U = C~^+ K (C~^+)^T - delta (C~^T C~)^+`.
/// When `rank(C~) = n` the delta formula is 0/0; the convention `delta = 0`
/// applies and is flagged.
pub fn ss_factors_full(
    k_mat: &DenseMatrix,
    sel: &ColumnSelection,
    shift_delta: Option<f64>,
) -> Result<SsFactors> {
    if !k_mat.is_square() {
        return Err(Error::NotSquare {
            rows: k_mat.rows(),
            cols: k_mat.cols(),
        });
    }
    k_mat.check_symmetric(1e-10)?;
    let n = k_mat.rows();
    if sel.n() != n {
        return Err(Error::IndexOutOfRange {
            index: sel.n(),
            n,
        });
    }
    let shift = shift_delta.unwrap_or(0.0);
    let k_tilde = if shift == 0.0 {
        k_mat.clone()
    } else {
        k_mat.add_scaled_identity(-shift)?
    };
    let c_tilde = k_tilde.gather_columns(sel.indices())?;
    let rank_c = c_tilde.numerical_rank(None);
    let pinv_c = c_tilde.pinv_svd(None);

    let pk = pinv_c.matmul(k_mat)?; // c x n
    let full_rank = rank_c == n;
    let delta = if full_rank {
        0.0
    } else {
        let sketch_trace = pk.matmul(&c_tilde)?.trace()?;
        (k_mat.trace()? - sketch_trace) / (n - rank_c) as f64
    };

    let mut u = pk.matmul_transb(&pinv_c)?; // C~^+ K (C~^+)^T
    if delta != 0.0 {
        let gram = c_tilde.transpose().matmul(&c_tilde)?;
        u.add_scaled_in_place(-delta, &gram.pinv_svd(None))?;
    }

    let a_s = c_tilde.gather_rows(sel.indices())?;
    let rank_a = a_s.numerical_rank(None);
    Ok(SsFactors {
        u_ss: u,
        delta_ss: delta,
        a_s,
        rank_a,
        shift,
        full_rank_convention: full_rank,
    })
}

/// Sketched spectral shifting on the intersection block alone (cost `O(c^3)`):
/// `delta = (tr(A_s) - tr(A_s^+ A_s^2)) / (c - rank(A_s))` and
/// `U = A_s^+ - delta (A_s^2)^+`, both evaluated with the SVD pseudoinverse.
/// A full-rank sketch triggers the delta convention (`delta = 0`,
/// `U = A_s^+`).
///
/// Note: `tr(A_s^+ A_s^2) = tr(A_s A_s^+ A_s) = tr(A_s)` holds for every
/// matrix, so the numerator vanishes up to rounding and the computed delta is
/// zero in exact arithmetic. The verification suite measures and documents
/// this degeneracy rather than hiding it.
pub fn ss_factors_modified(a_s: &DenseMatrix) -> Result<SsFactors> {
    if !a_s.is_square() {
        return Err(Error::NotSquare {
            rows: a_s.rows(),
            cols: a_s.cols(),
        });
    }
    let c = a_s.rows();
    let pinv_a = a_s.pinv_svd(None);
    let rank_a = a_s.numerical_rank(None);
    let full_rank = rank_a == c;
    let (delta, u) = if full_rank {
        (0.0, pinv_a)
    } else {
        let a_sq = a_s.matmul(a_s)?;
        let numerator = a_s.trace()? - pinv_a.matmul(&a_sq)?.trace()?;
        let delta = numerator / (c - rank_a) as f64;
        let mut u = pinv_a;
        if delta != 0.0 {
            u.add_scaled_in_place(-delta, &a_sq.pinv_svd(None))?;
        }
        (delta, u)
    };
    Ok(SsFactors {
        u_ss: u,
        delta_ss: delta,
        a_s: a_s.clone(),
        rank_a,
        shift: 0.0,
        full_rank_convention: full_rank,
    })
}

/// Rebuild the approximation `C~ * U * C~^T + delta * I_n` from explicit
/// selected columns and factors.
pub fn ss_reconstruct(c_mat: &DenseMatrix, f: &SsFactors, n: usize) -> Result<DenseMatrix> {
    if c_mat.rows() != n || c_mat.cols() != f.u_ss.rows() {
        return Err(Error::ShapeMismatch {
            op: "ss_reconstruct",
            left_rows: c_mat.rows(),
            left_cols: c_mat.cols(),
            right_rows: f.u_ss.rows(),
            right_cols: f.u_ss.cols(),
        });
    }
    let cu = c_mat.matmul(&f.u_ss)?;
    let low_rank = cu.matmul_transb(c_mat)?;
    low_rank.add_scaled_identity(f.delta_ss)
}

/// Which residual the objective measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// `|K - C~ U C~^T - delta I|_F` over the whole matrix.
    Full,
    /// `|P^T (K - C~ U C~^T - delta I) P|_F` restricted to the sketch.
    Sketched,
}

/// Frobenius norm of the shift-approximation residual in the requested mode.
/// `C~` is rebuilt from `k_mat`, the selection, and the shift recorded in the
/// factors.
pub fn ss_objective(
    k_mat: &DenseMatrix,
    sel: &ColumnSelection,
    f: &SsFactors,
    mode: ObjectiveMode,
) -> Result<f64> {
    if !k_mat.is_square() {
        return Err(Error::NotSquare {
            rows: k_mat.rows(),
            cols: k_mat.cols(),
        });
    }
    let k_tilde = if f.shift == 0.0 {
        k_mat.clone()
    } else {
        k_mat.add_scaled_identity(-f.shift)?
    };
    let c_tilde = k_tilde.gather_columns(sel.indices())?;
    let recon = ss_reconstruct(&c_tilde, f, k_mat.rows())?;
    let resid = k_mat.sub(&recon)?;
    match mode {
        ObjectiveMode::Full => Ok(resid.frobenius_norm()),
        ObjectiveMode::Sketched => {
            let sketch = resid
                .gather_rows(sel.indices())?
                .gather_columns(sel.indices())?;
            Ok(sketch.frobenius_norm())
        }
    }
}

/// Parameters of a flat-tail SPSD matrix: `k` head eigenvalues strictly above
/// a tail in which every eigenvalue equals `theta > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatTailSpec {
    pub n: usize,
    pub head_eigs: Vec<f64>,
    pub theta: f64,
    pub seed: u64,
}

impl FlatTailSpec {
    pub fn new(n: usize, head_eigs: Vec<f64>, theta: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidFlatTail {
                reason: "n must be at least 1".into(),
            });
        }
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidFlatTail {
                reason: format!("theta must be finite and > 0, got {theta}"),
            });
        }
        if head_eigs.len() > n {
            return Err(Error::InvalidFlatTail {
                reason: format!("{} head eigenvalues exceed n = {n}", head_eigs.len()),
            });
        }
        if let Some(&bad) = head_eigs.iter().find(|&&e| !(e > theta) || !e.is_finite()) {
            return Err(Error::InvalidFlatTail {
                reason: format!("head eigenvalue {bad} is not strictly above theta = {theta}"),
            });
        }
        Ok(Self {
            n,
            head_eigs,
            theta,
            seed,
        })
    }

    /// Head rank `k`.
    pub fn k(&self) -> usize {
        self.head_eigs.len()
    }

    /// Default head spectrum for a given rank: `theta + 1, ..., theta + k`.
    pub fn with_default_head(n: usize, k: usize, theta: f64, seed: u64) -> Result<Self> {
        let head = (1..=k).map(|i| theta + i as f64).collect();
        Self::new(n, head, theta, seed)
    }
}

/// Build `K = V diag(head_eigs, theta, ..., theta) V^T` with `V` a seeded
/// random orthogonal matrix; exactly symmetric, eigenvalues matching the spec
/// to solver accuracy.
pub fn flat_tail_spsd(spec: &FlatTailSpec) -> DenseMatrix {
    let mut eigs = spec.head_eigs.clone();
    eigs.resize(spec.n, spec.theta);
    let v = synth::random_orthogonal(&mut synth::rng(spec.seed), spec.n);
    let scaled = DenseMatrix::from_fn(spec.n, spec.n, |i, j| v.get(i, j) * eigs[j]);
    let k = scaled.matmul_transb(&v).expect("shapes agree");
    // Average with the transpose so symmetry holds exactly, not just to
    // rounding.
    let kt = k.transpose();
    k.add(&kt).expect("same shape").scale(0.5)
}

/// Greedy rank-revealing column selection: repeatedly pick the column with the
/// largest residual norm after projecting out the span of the columns chosen
/// so far. Once the residual drops to the noise floor the range is spanned and
/// the remaining picks fall back to the largest original columns.
pub fn range_spanning_columns(m: &DenseMatrix, c: usize) -> Result<Vec<usize>> {
    let n_cols = m.cols();
    if c > n_cols {
        return Err(Error::TooManyColumns {
            requested: c,
            available: n_cols,
        });
    }
    let mut residual: Vec<Vec<f64>> = (0..n_cols).map(|j| m.column(j)).collect();
    let original_norms: Vec<f64> = residual
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let norm_floor = original_norms.iter().cloned().fold(0.0, f64::max) * 1e-12;

    let mut chosen = Vec::with_capacity(c);
    let mut taken = vec![false; n_cols];
    for _ in 0..c {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n_cols {
            if taken[j] {
                continue;
            }
            let norm = residual[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if best.map_or(true, |(_, b)| norm > b) {
                best = Some((j, norm));
            }
        }
        let (j, norm) = best.expect("c <= n_cols leaves a candidate");
        if norm <= norm_floor {
            break;
        }
        taken[j] = true;
        chosen.push(j);
        let q: Vec<f64> = residual[j].iter().map(|x| x / norm).collect();
        for jj in 0..n_cols {
            if taken[jj] {
                continue;
            }
            let dot: f64 = q.iter().zip(&residual[jj]).map(|(a, b)| a * b).sum();
            for (r, &qv) in residual[jj].iter_mut().zip(&q) {
                *r -= dot * qv;
            }
        }
    }

    // Range spanned early: fill with the largest remaining original columns.
    let mut rest: Vec<usize> = (0..n_cols).filter(|&j| !taken[j]).collect();
    rest.sort_by(|&a, &b| {
        original_norms[b]
            .partial_cmp(&original_norms[a])
            .expect("finite")
            .then(a.cmp(&b))
    });
    for j in rest {
        if chosen.len() == c {
            break;
        }
        chosen.push(j);
    }
    Ok(chosen)
}

/// Side-by-side accuracy of the shifted reconstruction and plain Nystrom on
/// the same columns of a flat-tail instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub n: usize,
    pub k: usize,
    pub theta: f64,
    pub c: usize,
    pub seed: u64,
    pub head_eigs: Vec<f64>,
    pub norm_k: f64,
    pub ss_error: f64,
    pub nystrom_error: f64,
    pub ss_error_relative: f64,
    pub nystrom_error_relative: f64,
    /// `ss_error <= nystrom_error`.
    pub ss_no_worse: bool,
    pub columns: Vec<usize>,
}

/// Build the flat-tail instance, shift by `theta`, select `c` range-spanning
/// columns of `K - theta I`, and compare the shifted reconstruction against
/// raw Nystrom on the same columns. Requires `c >= k` so the selected columns
/// can span the shifted range.
pub fn theorem1_check(spec: &FlatTailSpec, c: usize) -> Result<Theorem1Report> {
    let k_rank = spec.k();
    if c < k_rank {
        return Err(Error::InsufficientColumns {
            needed: k_rank,
            got: c,
        });
    }
    let k_mat = flat_tail_spsd(spec);
    let shifted = k_mat.add_scaled_identity(-spec.theta)?;
    let columns = range_spanning_columns(&shifted, c)?;
    let sel = ColumnSelection::new(columns.clone(), spec.n)?;

    let factors = ss_factors_full(&k_mat, &sel, Some(spec.theta))?;
    let c_tilde = shifted.gather_columns(sel.indices())?;
    let recon = ss_reconstruct(&c_tilde, &factors, spec.n)?;
    let ss_error = k_mat.sub(&recon)?.frobenius_norm();

    let nystrom = nystrom::nystrom_raw(&k_mat, sel.indices())?;
    let nystrom_error = k_mat.sub(&nystrom)?.frobenius_norm();

    let norm_k = k_mat.frobenius_norm();
    Ok(Theorem1Report {
        n: spec.n,
        k: k_rank,
        theta: spec.theta,
        c,
        seed: spec.seed,
        head_eigs: spec.head_eigs.clone(),
        norm_k,
        ss_error,
        nystrom_error,
        ss_error_relative: ss_error / norm_k,
        nystrom_error_relative: nystrom_error / norm_k,
        ss_no_worse: ss_error <= nystrom_error,
        columns,
    })
}
