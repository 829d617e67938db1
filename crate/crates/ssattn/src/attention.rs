//! Reference quadratic softmax self-attention: the ground truth for every
//! error measurement in this crate.

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::synth;

/// A `(Q, K, V)` bundle. Queries and keys share the column count `d_k` (the
/// scaling is `1/sqrt(d_k)`), and all three share the row count `n`. Values
/// may have a different column count `d_v`.
#[derive(Debug, Clone)]
pub struct AttentionProblem {
    q: DenseMatrix,
    k: DenseMatrix,
    v: DenseMatrix,
}

impl AttentionProblem {
    pub fn new(q: DenseMatrix, k: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if q.cols() != k.cols() {
            return Err(Error::ShapeMismatch {
                op: "attention q/k",
                left_rows: q.rows(),
                left_cols: q.cols(),
                right_rows: k.rows(),
                right_cols: k.cols(),
            });
        }
        if q.rows() != k.rows() || q.rows() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "attention rows",
                left_rows: q.rows(),
                left_cols: q.cols(),
                right_rows: v.rows(),
                right_cols: v.cols(),
            });
        }
        Ok(Self { q, k, v })
    }

    /// Problem with i.i.d. standard normal entries from the given seed.
    pub fn gaussian(n: usize, d_k: usize, d_v: usize, seed: u64) -> Self {
        let mut rng = synth::rng(seed);
        let q = synth::gaussian_matrix(&mut rng, n, d_k);
        let k = synth::gaussian_matrix(&mut rng, n, d_k);
        let v = synth::gaussian_matrix(&mut rng, n, d_v);
        Self::new(q, k, v).expect("generated shapes are consistent")
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn k(&self) -> &DenseMatrix {
        &self.k
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.q.rows()
    }

    pub fn d_k(&self) -> usize {
        self.q.cols()
    }

    pub fn d_v(&self) -> usize {
        self.v.cols()
    }

    /// The logit scaling `1/sqrt(d_k)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.d_k() as f64).sqrt()
    }
}

/// Scaled logits `Q K^T / sqrt(d_k)` as an explicit `n x n` matrix.
pub fn logits(p: &AttentionProblem) -> Result<DenseMatrix> {
    let mut l = p.q().matmul_transb(p.k())?;
    l.scale_in_place(p.scale());
    Ok(l)
}

/// The exact attention matrix `S = softmax(Q K^T / sqrt(d_k))`; row-stochastic
/// by construction. Materializes `n x n`.
pub fn exact_scores(p: &AttentionProblem) -> Result<DenseMatrix> {
    let mut l = logits(p)?;
    l.row_softmax_in_place()?;
    Ok(l)
}

/// Exact attention output `S V`, computed one row at a time so memory stays
/// `O(n d)` even at benchmark sizes. Each output row is a convex combination
/// of the rows of `V`.
pub fn exact_attention(p: &AttentionProblem) -> Result<DenseMatrix> {
    let (n, d_v) = (p.n(), p.d_v());
    let scale = p.scale();
    let mut out = DenseMatrix::zeros(n, d_v);
    let mut logits_row = vec![0.0; n];
    for i in 0..n {
        let q_row = p.q().row(i);
        for (j, lj) in logits_row.iter_mut().enumerate() {
            let k_row = p.k().row(j);
            let mut acc = 0.0;
            for (&a, &b) in q_row.iter().zip(k_row) {
                acc += a * b;
            }
            *lj = acc * scale;
        }
        let max = logits_row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if !max.is_finite() {
            let j = logits_row.iter().position(|x| !x.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite {
                row: i,
                col: j,
                value: logits_row[j],
            });
        }
        let mut sum = 0.0;
        for lj in logits_row.iter_mut() {
            *lj = (*lj - max).exp();
            sum += *lj;
        }
        for (j, &w) in logits_row.iter().enumerate() {
            let weight = w / sum;
            for (jj, &v) in p.v().row(j).iter().enumerate() {
                let cur = out.get(i, jj);
                out.set(i, jj, cur + weight * v);
            }
        }
    }
    Ok(out)
}
