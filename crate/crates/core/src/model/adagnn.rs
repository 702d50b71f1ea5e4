//! Forward and reverse passes of the adaptive-filter network.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use super::{dropout_sparse, sign, FilterOperator, ForwardCache, Mode, ModelParams};
use crate::{dense, DenseMatrix, Error, Result, SparseMatrix};

/// Runs the network on sparse node features.
///
/// Returns row-stochastic class probabilities, plus the reverse-pass cache in
/// train mode. Eval mode applies no dropout and is deterministic. Dropout is
/// applied to the input features and to the classifier input; the
/// `dropout_intermediate` switch additionally applies it to every
/// parameter-free layer input.
pub fn adagnn_forward(
    p: &ModelParams,
    x: &SparseMatrix,
    op: &FilterOperator,
    mode: Mode,
    rng_seed: u64,
    dropout: f64,
    dropout_intermediate: bool,
) -> Result<(DenseMatrix, Option<ForwardCache>)> {
    if x.n_cols() != p.in_dim {
        return Err(Error::DimMismatch {
            context: "adagnn_forward",
            expected: format!("{} feature columns", p.in_dim),
            got: format!("{}", x.n_cols()),
        });
    }
    if x.n_rows() != op.n() {
        return Err(Error::DimMismatch {
            context: "adagnn_forward",
            expected: format!("{} nodes", op.n()),
            got: format!("{}", x.n_rows()),
        });
    }
    let train = mode == Mode::Train && dropout > 0.0;
    let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);

    let x0 = if train {
        dropout_sparse(x, dropout, &mut rng)
    } else {
        x.clone()
    };

    // First layer, evaluated as X₀Θ - L̃(X₀(Φ₁Θ)) to keep X₀ sparse.
    let mut theta_scaled = p.theta.clone();
    for (mut row, &phi) in theta_scaled.rows_mut().into_iter().zip(&p.phi[0]) {
        row.mapv_inplace(|v| v * phi);
    }
    let mixed = x0.spmm(&p.theta)?;
    let filtered = op.apply(&x0.spmm(&theta_scaled)?)?;
    let pre_act = mixed - filtered;
    if !dense::all_finite(&pre_act) {
        return Err(Error::NonFinite { layer: 1 });
    }
    let mut h = dense::relu(&pre_act);

    let mut lap_h = Vec::with_capacity(p.k_layers - 1);
    let mut intermediate_masks = Vec::with_capacity(p.k_layers - 1);
    for k in 2..=p.k_layers {
        let mask = if train && dropout_intermediate {
            let (dropped, mask) = dense::dropout(&h, dropout, &mut rng);
            h = dropped;
            Some(mask)
        } else {
            None
        };
        let lh = op.apply(&h)?;
        for (mut h_row, lh_row) in h.rows_mut().into_iter().zip(lh.rows()) {
            for ((v, l), phi) in h_row.iter_mut().zip(lh_row).zip(&p.phi[k - 1]) {
                *v -= phi * l;
            }
        }
        if !dense::all_finite(&h) {
            return Err(Error::NonFinite { layer: k });
        }
        lap_h.push(lh);
        intermediate_masks.push(mask);
    }

    let (hk_dropped, out_mask) = if train {
        let (dropped, mask) = dense::dropout(&h, dropout, &mut rng);
        (dropped, Some(mask))
    } else {
        (h, None)
    };
    let logits = hk_dropped.dot(&p.w_out);
    if !dense::all_finite(&logits) {
        return Err(Error::NonFinite {
            layer: p.k_layers + 1,
        });
    }
    let yhat = dense::softmax_rows(&logits);

    let cache = if mode == Mode::Train {
        Some(ForwardCache {
            x0_t: x0.transpose(),
            x0,
            pre_act,
            lap_h,
            intermediate_masks,
            out_mask,
            hk_dropped,
            logits: logits.clone(),
            yhat: yhat.clone(),
            dropout_rate: dropout,
        })
    } else {
        None
    };
    Ok((yhat, cache))
}

/// Gradients of the full regularized loss with respect to every parameter.
///
/// The cross-entropy/softmax pair collapses to `Ŷ - Y` on labeled rows. Each
/// filter coefficient gets `∂L/∂φ_{j,k} = -Σ_n (L̃H^{k-1})_{n,j} G^{(k)}_{n,j}`
/// plus the `α·sign(φ) + 2β·φ` regularization terms; the first-layer variant
/// is contracted against Θ so the sparse features never densify.
pub fn adagnn_backward(
    p: &ModelParams,
    cache: &ForwardCache,
    op: &FilterOperator,
    y: &[usize],
    train_mask: &[bool],
    alpha: f64,
    beta: f64,
) -> Result<ModelParams> {
    let n = cache.yhat.nrows();
    if cache.pre_act.dim() != (n, p.hidden)
        || cache.yhat.ncols() != p.classes
        || cache.lap_h.len() != p.k_layers - 1
    {
        return Err(Error::DimMismatch {
            context: "adagnn_backward",
            expected: "cache from a train-mode forward on the same params".into(),
            got: format!(
                "cache with {} nodes, {} deep layers",
                n,
                cache.lap_h.len()
            ),
        });
    }
    if y.len() != n || train_mask.len() != n {
        return Err(Error::DimMismatch {
            context: "adagnn_backward",
            expected: format!("{n} labels/mask entries"),
            got: format!("{}/{}", y.len(), train_mask.len()),
        });
    }
    let mut grads = p.zeros_like();

    // dL/dZ for the masked cross-entropy under softmax.
    let mut g = cache.yhat.clone();
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        if train_mask[i] {
            row[y[i]] -= 1.0;
        } else {
            row.fill(0.0);
        }
    }

    grads.w_out = cache.hk_dropped.t().dot(&g);
    grads
        .w_out
        .zip_mut_with(&p.w_out, |gr, w| *gr += 2.0 * beta * w);

    let mut g = g.dot(&p.w_out.t());
    apply_mask(&mut g, cache.out_mask.as_deref(), cache.dropout_rate);

    for k in (2..=p.k_layers).rev() {
        let lh = &cache.lap_h[k - 2];
        let phi = &p.phi[k - 1];
        let grad_phi = &mut grads.phi[k - 1];
        for j in 0..phi.len() {
            let mut acc = 0.0;
            for i in 0..n {
                acc += lh[[i, j]] * g[[i, j]];
            }
            grad_phi[j] = -acc + alpha * sign(phi[j]) + 2.0 * beta * phi[j];
        }
        let scaled = dense::diag_right_mul(&g, phi)?;
        g = g - op.apply_t(&scaled)?;
        apply_mask(
            &mut g,
            cache.intermediate_masks[k - 2].as_deref(),
            cache.dropout_rate,
        );
    }

    // Through the ReLU.
    g.zip_mut_with(&cache.pre_act, |gv, pre| {
        if *pre <= 0.0 {
            *gv = 0.0;
        }
    });

    // With B1 = X₀ᵀ L̃ᵀ G: ∂Θ = X₀ᵀG - Φ₁B1 and ∂φ_{j,1} = -Σ_h Θ_{j,h} B1_{j,h}.
    let a1 = cache.x0_t.spmm(&g)?;
    let b1 = cache.x0_t.spmm(&op.apply_t(&g)?)?;
    for j in 0..p.in_dim {
        let mut acc = 0.0;
        for h in 0..p.hidden {
            acc += p.theta[[j, h]] * b1[[j, h]];
        }
        grads.phi[0][j] = -acc + alpha * sign(p.phi[0][j]) + 2.0 * beta * p.phi[0][j];
    }
    grads.theta = a1;
    for ((mut grow, b1row), &phi) in grads
        .theta
        .rows_mut()
        .into_iter()
        .zip(b1.rows())
        .zip(&p.phi[0])
    {
        for (gv, bv) in grow.iter_mut().zip(b1row) {
            *gv -= phi * bv;
        }
    }
    grads
        .theta
        .zip_mut_with(&p.theta, |gr, t| *gr += 2.0 * beta * t);

    Ok(grads)
}

/// Final-layer representation `Hᴷ` (the classifier input) in eval mode.
pub fn adagnn_representation(
    p: &ModelParams,
    x: &SparseMatrix,
    op: &FilterOperator,
) -> Result<DenseMatrix> {
    let mut theta_scaled = p.theta.clone();
    for (mut row, &phi) in theta_scaled.rows_mut().into_iter().zip(&p.phi[0]) {
        row.mapv_inplace(|v| v * phi);
    }
    let pre_act = x.spmm(&p.theta)? - op.apply(&x.spmm(&theta_scaled)?)?;
    let mut h = dense::relu(&pre_act);
    for k in 2..=p.k_layers {
        let lh = op.apply(&h)?;
        for (mut h_row, lh_row) in h.rows_mut().into_iter().zip(lh.rows()) {
            for ((v, l), phi) in h_row.iter_mut().zip(lh_row).zip(&p.phi[k - 1]) {
                *v -= phi * l;
            }
        }
    }
    Ok(h)
}

fn apply_mask(g: &mut DenseMatrix, mask: Option<&[bool]>, rate: f64) {
    if let Some(mask) = mask {
        let scale = 1.0 / (1.0 - rate);
        for (v, keep) in g.iter_mut().zip(mask) {
            *v = if *keep { *v * scale } else { 0.0 };
        }
    }
}
