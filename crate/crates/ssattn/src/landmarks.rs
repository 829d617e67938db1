//! Segment-means landmark selection: the n input rows are split into m
//! contiguous segments of length `l = ceil(n / m)` (zero rows pad the tail
//! when m does not divide n) and each segment is averaged into one landmark
//! row.

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

/// Landmark rows for a query/key pair.
#[derive(Debug, Clone)]
pub struct LandmarkPair {
    /// Pooled query rows, `m x d_k`.
    pub q_tilde: DenseMatrix,
    /// Pooled key rows, `m x d_k`.
    pub k_tilde: DenseMatrix,
    /// Landmark count.
    pub m: usize,
    /// Segment length after padding, `l = n' / m`.
    pub l: usize,
}

fn check_counts(n: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::ZeroLandmarks);
    }
    if m > n {
        return Err(Error::TooManyLandmarks { m, n });
    }
    Ok(n.div_ceil(m))
}

/// Average each length-`l` segment of `x` into one output row. Rows past the
/// end of `x` count as zero rows (the padding convention), which dilutes the
/// final landmark when `m` does not divide `n`; callers that need exact means
/// use divisible sizes. `segment_means(x, n)` returns `x` itself.
pub fn segment_means(x: &DenseMatrix, m: usize) -> Result<DenseMatrix> {
    let (n, d) = (x.rows(), x.cols());
    let l = check_counts(n, m)?;
    let mut out = DenseMatrix::zeros(m, d);
    for j in 0..m {
        let start = j * l;
        let end = ((j + 1) * l).min(n);
        let mut acc = vec![0.0; d];
        for i in start..end {
            for (a, &v) in acc.iter_mut().zip(x.row(i)) {
                *a += v;
            }
        }
        for (jj, a) in acc.into_iter().enumerate() {
            out.set(j, jj, a / l as f64);
        }
    }
    Ok(out)
}

/// Alternative pooling that averages a fixed window of `m` rows starting at
/// each segment boundary `j * l`, dividing by `m` (rows past the end count as
/// zero). Windows overlap when `m > l` and leave gaps when `m < l`; when
/// `l == m` this coincides with [`segment_means`]. Kept for comparison only.
pub fn segment_means_windowed(x: &DenseMatrix, m: usize) -> Result<DenseMatrix> {
    let (n, d) = (x.rows(), x.cols());
    let l = check_counts(n, m)?;
    let mut out = DenseMatrix::zeros(m, d);
    for j in 0..m {
        let start = j * l;
        let end = (start + m).min(n);
        let mut acc = vec![0.0; d];
        for i in start..end {
            for (a, &v) in acc.iter_mut().zip(x.row(i)) {
                *a += v;
            }
        }
        for (jj, a) in acc.into_iter().enumerate() {
            out.set(j, jj, a / m as f64);
        }
    }
    Ok(out)
}

/// Append zero rows until the row count is the smallest multiple of `m` at or
/// above `n`; returns the padded matrix and the original row count so
/// downstream output can be truncated back.
pub fn pad_to_multiple(x: &DenseMatrix, m: usize) -> Result<(DenseMatrix, usize)> {
    if m == 0 {
        return Err(Error::ZeroLandmarks);
    }
    let n = x.rows();
    let target = n.div_ceil(m) * m;
    if target == n {
        return Ok((x.clone(), n));
    }
    let mut data = Vec::with_capacity(target * x.cols());
    data.extend_from_slice(x.data());
    data.resize(target * x.cols(), 0.0);
    Ok((DenseMatrix::from_vec_unchecked(target, x.cols(), data), n))
}

/// Landmarks for a query/key pair sharing a row count.
pub fn landmark_pair(q: &DenseMatrix, k: &DenseMatrix, m: usize) -> Result<LandmarkPair> {
    if q.rows() != k.rows() {
        return Err(Error::ShapeMismatch {
            op: "landmark_pair",
            left_rows: q.rows(),
            left_cols: q.cols(),
            right_rows: k.rows(),
            right_cols: k.cols(),
        });
    }
    let l = check_counts(q.rows(), m)?;
    Ok(LandmarkPair {
        q_tilde: segment_means(q, m)?,
        k_tilde: segment_means(k, m)?,
        m,
        l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn two_segments_average_pairs() {
        let x = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![3.0, 2.0],
            vec![5.0, 4.0],
            vec![7.0, 6.0],
        ])
        .unwrap();
        let lm = segment_means(&x, 2).unwrap();
        assert_eq!(lm.row(0), &[2.0, 1.0]);
        assert_eq!(lm.row(1), &[6.0, 5.0]);
    }

    #[test]
    fn m_equal_n_is_identity() {
        let x = synth::gaussian_matrix(&mut synth::rng(1), 6, 3);
        let lm = segment_means(&x, 6).unwrap();
        assert_eq!(lm.data(), x.data());
    }

    #[test]
    fn identical_rows_pool_to_themselves() {
        let x = DenseMatrix::from_fn(6, 2, |_, j| (j + 1) as f64);
        let lm = segment_means(&x, 3).unwrap();
        for i in 0..3 {
            assert_eq!(lm.row(i), &[1.0, 2.0]);
        }
    }

    #[test]
    fn counts_are_validated() {
        let x = DenseMatrix::zeros(4, 2);
        assert!(matches!(segment_means(&x, 0), Err(Error::ZeroLandmarks)));
        assert!(matches!(
            segment_means(&x, 5),
            Err(Error::TooManyLandmarks { m: 5, n: 4 })
        ));
    }

    #[test]
    fn padding_appends_zero_rows() {
        let x = synth::gaussian_matrix(&mut synth::rng(2), 5, 3);
        let (padded, orig) = pad_to_multiple(&x, 2).unwrap();
        assert_eq!((padded.rows(), orig), (6, 5));
        assert_eq!(padded.row(5), &[0.0, 0.0, 0.0]);
        assert_eq!(&padded.data()[..15], x.data());

        let y = synth::gaussian_matrix(&mut synth::rng(3), 6, 2);
        let (same, orig) = pad_to_multiple(&y, 3).unwrap();
        assert_eq!((same.rows(), orig), (6, 6));
        assert_eq!(same.data(), y.data());

        let z = synth::gaussian_matrix(&mut synth::rng(4), 7, 2);
        let (padded, orig) = pad_to_multiple(&z, 4).unwrap();
        assert_eq!((padded.rows(), orig), (8, 7));
        assert_eq!(padded.truncate_rows(7).unwrap().data(), z.data());
    }

    #[test]
    fn mean_of_means_matches_global_mean_on_divisible_input() {
        let x = synth::gaussian_matrix(&mut synth::rng(5), 12, 4);
        let lm = segment_means(&x, 4).unwrap();
        for j in 0..4 {
            let global: f64 = x.column(j).iter().sum::<f64>() / 12.0;
            let pooled: f64 = lm.column(j).iter().sum::<f64>() / 4.0;
            assert!((global - pooled).abs() < 1e-12);
        }
    }

    #[test]
    fn windowed_variant_coincides_when_l_equals_m() {
        // n = m * m makes l == m, where both poolings agree.
        let x = synth::gaussian_matrix(&mut synth::rng(6), 9, 2);
        let a = segment_means(&x, 3).unwrap();
        let b = segment_means_windowed(&x, 3).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-15);
    }
}
