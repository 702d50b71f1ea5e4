//! Dense symmetric eigendecomposition and the graph Fourier transform.
//!
//! The solver is a cyclic Jacobi iteration: it is symmetric-exact, has no
//! trouble with clustered eigenvalues, and the O(N³) cost is irrelevant at
//! the sizes used for spectral verification. Large operators are never
//! decomposed here; the random-walk Laplacian in particular is handled via
//! its similarity to the symmetric one.

use ndarray::Array2;

use crate::{DenseMatrix, Error, Result};

/// Hard cap on the matrix size accepted by [`eigendecompose_sym`].
pub const DEFAULT_DIM_CAP: usize = 2000;

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns. Column `i` of `eigenvectors` pairs with `eigenvalues[i]`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EigenBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Graph Fourier transform `x̂ = Ũᵀ x`.
    pub fn gft(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let n = self.n();
        Ok((0..n)
            .map(|i| (0..n).map(|k| self.eigenvectors[[k, i]] * x[k]).sum())
            .collect())
    }

    /// Inverse transform `x = Ũ x̂`.
    pub fn igft(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xhat)?;
        let n = self.n();
        Ok((0..n)
            .map(|k| (0..n).map(|i| self.eigenvectors[[k, i]] * xhat[i]).sum())
            .collect())
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimMismatch {
                context: "gft",
                expected: format!("length {}", self.n()),
                got: format!("length {}", x.len()),
            });
        }
        Ok(())
    }
}

/// Frequency response of a stacked filter: `∏_k (1 - φ_k λ)`.
///
/// With all coefficients at 1 this collapses to the fixed `(1 - λ)^K`
/// response of K-step GCN/SGC propagation.
pub fn freq_response(phis: &[f64], lambda: f64) -> f64 {
    phis.iter().fold(1.0, |acc, &p| acc * (1.0 - p * lambda))
}

/// Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate every off-diagonal pair per pass until the off-diagonal
/// Frobenius norm falls below `tol`. Fails on asymmetric input, on matrices
/// larger than [`DEFAULT_DIM_CAP`], and if the norm target is not reached
/// within 100 sweeps.
pub fn eigendecompose_sym(m: &DenseMatrix, tol: f64) -> Result<EigenBasis> {
    eigendecompose_sym_capped(m, tol, DEFAULT_DIM_CAP)
}

pub fn eigendecompose_sym_capped(m: &DenseMatrix, tol: f64, cap: usize) -> Result<EigenBasis> {
    let (n, ncols) = m.dim();
    if n != ncols {
        return Err(Error::DimMismatch {
            context: "eigendecompose_sym",
            expected: format!("{n}x{n}"),
            got: format!("{n}x{ncols}"),
        });
    }
    if n > cap {
        return Err(Error::MatrixTooLarge { n, cap });
    }
    let mut max_asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    if max_asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { max_asymmetry: max_asym });
    }

    let mut a = m.clone();
    let mut v: DenseMatrix = Array2::eye(n);
    let mut off = off_norm(&a);
    let mut sweeps = 0;
    while off > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                off_norm: off,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).expect("finite"));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        // Sign convention: the largest-magnitude entry of each eigenvector is
        // positive (first such entry on ties).
        let mut lead = 0;
        for k in 0..n {
            if v[[k, src]].abs() > v[[lead, src]].abs() {
                lead = k;
            }
        }
        let flip = if v[[lead, src]] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            eigenvectors[[k, dst]] = flip * v[[k, src]];
        }
    }
    Ok(EigenBasis {
        eigenvalues,
        eigenvectors,
    })
}

fn off_norm(a: &DenseMatrix) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += 2.0 * a[[i, j]] * a[[i, j]];
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`, accumulated into `v`.
fn rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize) {
    let apq = a[[p, q]];
    if apq == 0.0 {
        return;
    }
    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
    let t = if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.nrows();

    for k in 0..n {
        let akp = a[[k, p]];
        let akq = a[[k, q]];
        a[[k, p]] = c * akp - s * akq;
        a[[k, q]] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[[p, k]];
        let aqk = a[[q, k]];
        a[[p, k]] = c * apk - s * aqk;
        a[[q, k]] = s * apk + c * aqk;
    }
    a[[p, q]] = 0.0;
    a[[q, p]] = 0.0;
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, LaplacianKind};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
        (&b + &b.t()) * 0.5
    }

    #[test]
    fn identity_eigenvalues() {
        let basis = eigendecompose_sym(&Array2::eye(3), 1e-10).unwrap();
        for v in &basis.eigenvalues {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_laplacian_spectrum() {
        let l = Graph::from_edges(2, [(0, 1)])
            .unwrap()
            .laplacian(LaplacianKind::Sym, true)
            .unwrap()
            .to_dense();
        let basis = eigendecompose_sym(&l, 1e-12).unwrap();
        assert!((basis.eigenvalues[0] - 0.0).abs() < 1e-12);
        assert!((basis.eigenvalues[1] - 1.0).abs() < 1e-12);
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((basis.eigenvectors[[0, 0]] - inv_sqrt2).abs() < 1e-10);
        assert!((basis.eigenvectors[[1, 0]] - inv_sqrt2).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let m = random_symmetric(20, 42);
        let basis = eigendecompose_sym(&m, 1e-10).unwrap();
        let u = &basis.eigenvectors;
        let utu = u.t().dot(u);
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((utu[[i, j]] - want).abs() < 1e-10);
            }
        }
        let lambda = Array2::from_diag(&ndarray::Array1::from(basis.eigenvalues.clone()));
        let rec = u.dot(&lambda).dot(&u.t());
        for i in 0..20 {
            for j in 0..20 {
                assert!((rec[[i, j]] - m[[i, j]]).abs() < 1e-8);
            }
        }
        // ascending order
        for w in basis.eigenvalues.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn gft_roundtrip_and_parseval() {
        let m = random_symmetric(15, 7);
        let basis = eigendecompose_sym(&m, 1e-10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xhat = basis.gft(&x).unwrap();
        let back = basis.igft(&xhat).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
        let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nh: f64 = xhat.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((nx - nh).abs() < 1e-10);
    }

    #[test]
    fn gft_of_first_eigenvector_is_e1() {
        let m = random_symmetric(10, 11);
        let basis = eigendecompose_sym(&m, 1e-10).unwrap();
        let u1: Vec<f64> = (0..10).map(|k| basis.eigenvectors[[k, 0]]).collect();
        let xhat = basis.gft(&u1).unwrap();
        assert!((xhat[0] - 1.0).abs() < 1e-10);
        for v in &xhat[1..] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn gft_length_mismatch() {
        let basis = eigendecompose_sym(&Array2::eye(3), 1e-10).unwrap();
        assert!(basis.gft(&[1.0, 2.0]).is_err());
        assert!(basis.igft(&[0.0; 4]).is_err());
    }

    #[test]
    fn igft_identities() {
        let m = random_symmetric(6, 5);
        let basis = eigendecompose_sym(&m, 1e-10).unwrap();
        let e1 = {
            let mut e = vec![0.0; 6];
            e[0] = 1.0;
            e
        };
        let u1 = basis.igft(&e1).unwrap();
        for k in 0..6 {
            assert!((u1[k] - basis.eigenvectors[[k, 0]]).abs() < 1e-12);
        }
        assert_eq!(basis.igft(&vec![0.0; 6]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = array![[1.0, 0.5], [0.4, 1.0]];
        assert!(matches!(
            eigendecompose_sym(&m, 1e-10),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_oversized_input() {
        let m = Array2::<f64>::eye(5);
        assert!(matches!(
            eigendecompose_sym_capped(&m, 1e-10, 4),
            Err(Error::MatrixTooLarge { n: 5, cap: 4 })
        ));
    }

    #[test]
    fn freq_response_examples() {
        assert_eq!(freq_response(&[1.0, 1.0], 0.0), 1.0);
        // all-ones coefficients give (1 - λ)^K
        for k in 1..=5usize {
            let phis = vec![1.0; k];
            for &lam in &[0.0, 0.3, 1.0, 1.7, 2.0] {
                assert!((freq_response(&phis, lam) - (1.0 - lam).powi(k as i32)).abs() < 1e-12);
            }
        }
        assert!((freq_response(&[0.5, 2.0], 1.0) - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn sign_convention_is_deterministic() {
        let m = random_symmetric(12, 99);
        let a = eigendecompose_sym(&m, 1e-10).unwrap();
        let b = eigendecompose_sym(&m, 1e-10).unwrap();
        assert_eq!(a.eigenvectors, b.eigenvectors);
        for col in 0..12 {
            let mut lead = 0;
            for k in 0..12 {
                if a.eigenvectors[[k, col]].abs() > a.eigenvectors[[lead, col]].abs() {
                    lead = k;
                }
            }
            assert!(a.eigenvectors[[lead, col]] > 0.0);
        }
    }
}
