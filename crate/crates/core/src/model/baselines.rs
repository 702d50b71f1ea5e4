//! GCN and SGC baselines sharing the propagation operator
//! `S = D̃^{-1/2} Ã D̃^{-1/2}`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{dropout_sparse, Mode};
use crate::{dense, DenseMatrix, Error, Result, SparseMatrix};

/// Per-layer GCN weights. Layer 1 maps `in_dim -> hidden`, intermediate
/// layers `hidden -> hidden`, the final layer `hidden -> classes`; a
/// single-layer model maps `in_dim -> classes` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub k_layers: usize,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub weights: Vec<DenseMatrix>,
}

impl GcnParams {
    pub fn init(k_layers: usize, in_dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        assert!(k_layers >= 1);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(k_layers);
        for k in 1..=k_layers {
            let rows = if k == 1 { in_dim } else { hidden };
            let cols = if k == k_layers { classes } else { hidden };
            weights.push(dense::glorot_uniform(rows, cols, &mut rng));
        }
        Self {
            k_layers,
            in_dim,
            hidden,
            classes,
            weights,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| DenseMatrix::zeros(w.dim()))
                .collect(),
            ..self.clone()
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect()
    }
}

/// SGC: `softmax(S^k X W)` with a single weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SgcParams {
    pub k_steps: usize,
    pub in_dim: usize,
    pub classes: usize,
    pub w: DenseMatrix,
}

impl SgcParams {
    pub fn init(k_steps: usize, in_dim: usize, classes: usize, seed: u64) -> Self {
        assert!(k_steps >= 1);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Self {
            k_steps,
            in_dim,
            classes,
            w: dense::glorot_uniform(in_dim, classes, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: DenseMatrix::zeros(self.w.dim()),
            ..self.clone()
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![self.w.as_slice().expect("standard layout")]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_slice_mut().expect("standard layout")]
    }
}

#[derive(Debug, Clone)]
pub struct GcnCache {
    x0_t: SparseMatrix,
    /// Dense layer inputs after dropout, for layers 2..=K.
    layer_inputs: Vec<DenseMatrix>,
    /// Pre-activations of layers 1..K-1 (ReLU masks).
    pre_acts: Vec<DenseMatrix>,
    /// Dropout keep-masks of the dense layer inputs.
    masks: Vec<Option<Vec<bool>>>,
    pub yhat: DenseMatrix,
    dropout_rate: f64,
}

/// Standard GCN stacking over a shared propagation operator: dropout on each
/// layer input, `ReLU(S · H · W_k)` on all but the last layer, a linear final
/// layer into softmax.
pub fn gcn_forward(
    p: &GcnParams,
    x: &SparseMatrix,
    s: &SparseMatrix,
    mode: Mode,
    rng_seed: u64,
    dropout: f64,
) -> Result<(DenseMatrix, Option<GcnCache>)> {
    if x.n_cols() != p.in_dim {
        return Err(Error::DimMismatch {
            context: "gcn_forward",
            expected: format!("{} feature columns", p.in_dim),
            got: format!("{}", x.n_cols()),
        });
    }
    let train = mode == Mode::Train && dropout > 0.0;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);

    let x0 = if train {
        dropout_sparse(x, dropout, &mut rng)
    } else {
        x.clone()
    };
    let mut z = s.spmm(&x0.spmm(&p.weights[0])?)?;
    if !dense::all_finite(&z) {
        return Err(Error::NonFinite { layer: 1 });
    }

    let mut pre_acts = Vec::new();
    let mut layer_inputs = Vec::new();
    let mut masks = Vec::new();
    for k in 2..=p.k_layers {
        let h = dense::relu(&z);
        pre_acts.push(z);
        let (input, mask) = if train {
            let (dropped, mask) = dense::dropout(&h, dropout, &mut rng);
            (dropped, Some(mask))
        } else {
            (h, None)
        };
        z = s.spmm(&input.dot(&p.weights[k - 1]))?;
        if !dense::all_finite(&z) {
            return Err(Error::NonFinite { layer: k });
        }
        layer_inputs.push(input);
        masks.push(mask);
    }
    let yhat = dense::softmax_rows(&z);

    let cache = if mode == Mode::Train {
        Some(GcnCache {
            x0_t: x0.transpose(),
            layer_inputs,
            pre_acts,
            masks,
            yhat: yhat.clone(),
            dropout_rate: dropout,
        })
    } else {
        None
    };
    Ok((yhat, cache))
}

pub fn gcn_backward(
    p: &GcnParams,
    cache: &GcnCache,
    s: &SparseMatrix,
    y: &[usize],
    train_mask: &[bool],
    beta: f64,
) -> Result<GcnParams> {
    let n = cache.yhat.nrows();
    let mut grads = p.zeros_like();

    let mut g = cache.yhat.clone();
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        if train_mask[i] {
            row[y[i]] -= 1.0;
        } else {
            row.fill(0.0);
        }
    }
    debug_assert_eq!(y.len(), n);

    for k in (1..=p.k_layers).rev() {
        // z_k = S (a_k W_k) with symmetric S.
        let t = s.spmm(&g)?;
        if k == 1 {
            grads.weights[0] = cache.x0_t.spmm(&t)?;
        } else {
            grads.weights[k - 1] = cache.layer_inputs[k - 2].t().dot(&t);
            let mut gh = t.dot(&p.weights[k - 1].t());
            if let Some(mask) = cache.masks[k - 2].as_deref() {
                let scale = 1.0 / (1.0 - cache.dropout_rate);
                for (v, keep) in gh.iter_mut().zip(mask) {
                    *v = if *keep { *v * scale } else { 0.0 };
                }
            }
            gh.zip_mut_with(&cache.pre_acts[k - 2], |gv, pre| {
                if *pre <= 0.0 {
                    *gv = 0.0;
                }
            });
            g = gh;
        }
        grads.weights[k - 1].zip_mut_with(&p.weights[k - 1], |gr, w| *gr += 2.0 * beta * w);
    }
    Ok(grads)
}

/// Input to the final GCN layer in eval mode (the last hidden activation,
/// or the raw features for a single-layer model).
pub fn gcn_representation(
    p: &GcnParams,
    x: &SparseMatrix,
    s: &SparseMatrix,
) -> Result<DenseMatrix> {
    if p.k_layers == 1 {
        return Ok(x.to_dense());
    }
    let mut h = dense::relu(&s.spmm(&x.spmm(&p.weights[0])?)?);
    for k in 2..p.k_layers {
        h = dense::relu(&s.spmm(&h.dot(&p.weights[k - 1]))?);
    }
    Ok(h)
}

/// `softmax(S^k X W)`, evaluated as `k` successive propagations.
pub fn sgc_forward(
    w: &DenseMatrix,
    x: &DenseMatrix,
    s: &SparseMatrix,
    k: usize,
) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(Error::BadConfig("sgc needs k >= 1 propagation steps".into()));
    }
    Ok(dense::softmax_rows(&sgc_propagate(x, s, k)?.dot(w)))
}

/// `S^k X` by repeated sparse products.
pub fn sgc_propagate(x: &DenseMatrix, s: &SparseMatrix, k: usize) -> Result<DenseMatrix> {
    let mut out = x.clone();
    for _ in 0..k {
        out = s.spmm(&out)?;
    }
    Ok(out)
}

/// Weight gradient for SGC given the already-propagated features.
pub fn sgc_logits_grad(
    propagated: &DenseMatrix,
    yhat: &DenseMatrix,
    w: &DenseMatrix,
    y: &[usize],
    train_mask: &[bool],
    beta: f64,
) -> DenseMatrix {
    let mut g = yhat.clone();
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        if train_mask[i] {
            row[y[i]] -= 1.0;
        } else {
            row.fill(0.0);
        }
    }
    let mut grad = propagated.t().dot(&g);
    grad.zip_mut_with(w, |gr, wv| *gr += 2.0 * beta * wv);
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::model::{adagnn_forward, FilterOperator, ModelParams};
    use crate::spectral::eigendecompose_sym;
    use crate::LaplacianKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn chain_with_chords(n: usize) -> Graph {
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, n / 2));
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn single_layer_identity_is_softmax_of_onehot_input() {
        let p = GcnParams {
            k_layers: 1,
            in_dim: 3,
            hidden: 3,
            classes: 3,
            weights: vec![DenseMatrix::eye(3)],
        };
        let x = SparseMatrix::identity(3);
        let s = SparseMatrix::identity(3);
        let (yhat, _) = gcn_forward(&p, &x, &s, Mode::Eval, 0, 0.0).unwrap();
        let want = dense::softmax_rows(&dense::relu(&DenseMatrix::eye(3)));
        for (a, b) in yhat.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn two_layer_gcn_equals_unit_phi_network() {
        // A 2-layer GCN with weights (W1, W2) equals the adaptive network at
        // Φ = I with Θ = W1 and W = W2: the propagation of the filtered model
        // is S on both layers and S·ReLU(...) stays entrywise non-negative.
        let g = chain_with_chords(9);
        let s = g.gcn_propagation();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let xd = DenseMatrix::from_shape_fn((9, 4), |_| rng.random_range(-1.0..1.0));
        let x = SparseMatrix::from_dense(&xd);

        let gcn = GcnParams::init(2, 4, 5, 3, 77);
        let mut ada = ModelParams::init(2, 4, 5, 3, 0);
        ada.theta = gcn.weights[0].clone();
        ada.w_out = gcn.weights[1].clone();

        let (yg, _) = gcn_forward(&gcn, &x, &s, Mode::Eval, 0, 0.0).unwrap();
        let op = FilterOperator::symmetric(g.laplacian(LaplacianKind::Sym, true).unwrap());
        let (ya, _) = adagnn_forward(&ada, &x, &op, Mode::Eval, 0, 0.0, false).unwrap();
        for (a, b) in yg.iter().zip(ya.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gcn_output_is_row_stochastic() {
        let g = chain_with_chords(8);
        let s = g.gcn_propagation();
        let p = GcnParams::init(3, 4, 6, 3, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = SparseMatrix::from_dense(&DenseMatrix::from_shape_fn((8, 4), |_| {
            rng.random_range(-1.0..1.0)
        }));
        let (yhat, cache) = gcn_forward(&p, &x, &s, Mode::Train, 9, 0.5, ).unwrap();
        assert!(cache.is_some());
        for row in yhat.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sgc_propagation_is_associative() {
        let g = chain_with_chords(10);
        let s = g.gcn_propagation();
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let x = DenseMatrix::from_shape_fn((10, 3), |_| rng.random_range(-1.0..1.0));
        let all_at_once = sgc_propagate(&x, &s, 4).unwrap();
        let staged = sgc_propagate(&sgc_propagate(&x, &s, 3).unwrap(), &s, 1).unwrap();
        assert_eq!(all_at_once, staged);
    }

    #[test]
    fn sgc_identity_propagation() {
        let mut rng = ChaCha12Rng::seed_from_u64(32);
        let x = DenseMatrix::from_shape_fn((6, 4), |_| rng.random_range(-1.0..1.0));
        let w = dense::glorot_uniform(4, 3, &mut rng);
        let s = SparseMatrix::identity(6);
        let direct = dense::softmax_rows(&x.dot(&w));
        for k in [1, 2, 5] {
            let yhat = sgc_forward(&w, &x, &s, k).unwrap();
            for (a, b) in yhat.iter().zip(direct.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(sgc_forward(&w, &x, &s, 0).is_err());
    }

    #[test]
    fn sgc_matches_spectral_filter() {
        // S^k x = Ũ diag((1-λ̃)^k) Ũᵀ x on the augmented symmetric Laplacian.
        let g = chain_with_chords(12);
        let s = g.gcn_propagation();
        let l = g.laplacian(LaplacianKind::Sym, true).unwrap().to_dense();
        let basis = eigendecompose_sym(&l, 1e-12).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        for k in [1usize, 3, 6] {
            let spatial = sgc_propagate(
                &DenseMatrix::from_shape_vec((12, 1), x.clone()).unwrap(),
                &s,
                k,
            )
            .unwrap();
            let mut xhat = basis.gft(&x).unwrap();
            for (coef, lam) in xhat.iter_mut().zip(&basis.eigenvalues) {
                *coef *= (1.0 - lam).powi(k as i32);
            }
            let spectral = basis.igft(&xhat).unwrap();
            for i in 0..12 {
                assert!((spatial[[i, 0]] - spectral[i]).abs() < 1e-8);
            }
        }
    }
}
