//! Small dense-matrix helpers shared by the model and analysis code.

use ndarray::Array2;
use rand::Rng;

use crate::{DenseMatrix, Error, Result};

/// Right-multiplication of a dense matrix by `diag(d)`.
pub fn diag_right_mul(m: &DenseMatrix, d: &[f64]) -> Result<DenseMatrix> {
    if d.len() != m.ncols() {
        return Err(Error::DimMismatch {
            context: "diag_right_mul",
            expected: format!("length {}", m.ncols()),
            got: format!("length {}", d.len()),
        });
    }
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        for (v, s) in row.iter_mut().zip(d) {
            *v *= s;
        }
    }
    Ok(out)
}

pub fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.mapv(|v| v.max(0.0))
}

/// Row-wise softmax with max subtraction for overflow safety.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Glorot-uniform initialization: U(-a, a) with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-a..a))
}

/// Inverted dropout: kept entries are scaled by `1/(1-rate)`. Returns the
/// dropped matrix and the keep mask. `rate` must be in `[0, 1)`.
pub fn dropout(m: &DenseMatrix, rate: f64, rng: &mut impl Rng) -> (DenseMatrix, Vec<bool>) {
    let scale = 1.0 / (1.0 - rate);
    let mut mask = vec![true; m.len()];
    let mut out = m.clone();
    for (v, keep) in out.iter_mut().zip(mask.iter_mut()) {
        if rng.random_range(0.0..1.0) < rate {
            *keep = false;
            *v = 0.0;
        } else {
            *v *= scale;
        }
    }
    (out, mask)
}

pub fn all_finite(m: &DenseMatrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Index of the row maximum, lowest index on ties.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn softmax_rows_are_stochastic() {
        let y = softmax_rows(&array![[1.0, 2.0, 3.0], [1000.0, 1000.0, 1000.0]]);
        for row in y.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn diag_right_mul_identity_and_zero() {
        let m = array![[1.0, -2.0], [3.0, 4.0]];
        assert_eq!(diag_right_mul(&m, &[1.0, 1.0]).unwrap(), m);
        assert_eq!(
            diag_right_mul(&m, &[0.0, 0.0]).unwrap(),
            Array2::zeros((2, 2))
        );
        assert!(diag_right_mul(&m, &[1.0]).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let m = Array2::ones((20, 20));
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (dropped, mask) = dropout(&m, 0.5, &mut rng);
        for (v, keep) in dropped.iter().zip(&mask) {
            if *keep {
                assert_eq!(*v, 2.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        let kept = mask.iter().filter(|k| **k).count();
        assert!(kept > 100 && kept < 300, "kept {kept} of 400");
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_row(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax_row(&[0.1, 0.5, 0.5]), 1);
    }
}
