//! Loss assembly, Adam, and the early-stopped training loop.
//!
//! The loss is the masked cross-entropy plus `α Σ‖Φ‖₁` on the filter
//! coefficients and `β (Σ‖Φ‖² + ‖Θ‖² + ‖W‖²)` on everything trainable. The
//! ℓ1 term is handled by subgradient inside the Adam update (sign(0) = 0),
//! not by a proximal step.

use std::fmt::Write as _;
use std::path::Path;

use crate::model::{
    adagnn_backward, adagnn_forward, gcn_backward, gcn_forward, sgc_logits_grad, sgc_propagate,
    FilterOperator, GcnParams, Mode, ModelKind, ModelParams, ParamSet, SgcParams,
};
use crate::{dense, Dataset, DenseMatrix, Error, LaplacianKind, Result, SparseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub dropout: f64,
    /// ℓ1 weight on the filter coefficients.
    pub alpha: f64,
    /// ℓ2 weight on all trainable parameters.
    pub beta: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Also apply dropout inside the parameter-free layers.
    pub dropout_intermediate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            max_epochs: 300,
            dropout: 0.5,
            alpha: 1e-6,
            beta: 9e-4,
            patience: 30,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            dropout_intermediate: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::BadConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::BadConfig("dropout must lie in [0, 1)".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::BadConfig(
                "regularization weights must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The loss value split into its three terms, plus the count of probability
/// clamps that guarded `ln` against zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    pub cross_entropy: f64,
    pub l1: f64,
    pub l2: f64,
    pub clamp_count: usize,
}

const LOG_CLAMP: f64 = 1e-12;

/// Cross-entropy over masked nodes plus the two regularizers.
pub fn total_loss(
    yhat: &DenseMatrix,
    y: &[usize],
    mask: &[bool],
    params: &ParamSet,
    alpha: f64,
    beta: f64,
) -> LossTerms {
    let mut cross_entropy = 0.0;
    let mut clamp_count = 0;
    for (i, row) in yhat.rows().into_iter().enumerate() {
        if mask[i] {
            let mut p = row[y[i]];
            if p < LOG_CLAMP {
                p = LOG_CLAMP;
                clamp_count += 1;
            }
            cross_entropy -= p.ln();
        }
    }
    let l1 = alpha * params.l1_phi();
    let l2 = beta * params.l2_squared();
    LossTerms {
        total: cross_entropy + l1 + l2,
        cross_entropy,
        l1,
        l2,
        clamp_count,
    }
}

/// Fraction of masked nodes whose argmax prediction matches the label.
/// Returns 0 for an empty mask.
pub fn masked_accuracy(yhat: &DenseMatrix, y: &[usize], mask: &[bool]) -> f64 {
    let mut hit = 0usize;
    let mut total = 0usize;
    for (i, row) in yhat.rows().into_iter().enumerate() {
        if mask[i] {
            total += 1;
            if dense::argmax_row(row.as_slice().expect("contiguous row")) == y[i] {
                hit += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// First/second-moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new_like(params: &ParamSet) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self {
            m: shapes.iter().map(|&l| vec![0.0; l]).collect(),
            v: shapes.iter().map(|&l| vec![0.0; l]).collect(),
            t: 0,
        }
    }
}

/// One Adam update with bias correction:
/// `p <- p - lr * m̂ / (sqrt(v̂) + eps)`.
#[allow(clippy::too_many_arguments)]
pub fn adam_step(
    state: &mut AdamState,
    params: &mut ParamSet,
    grads: &ParamSet,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    let grad_tensors = grads.tensors();
    {
        let param_tensors = params.tensors();
        if grad_tensors.len() != param_tensors.len()
            || grad_tensors
                .iter()
                .zip(&param_tensors)
                .any(|(g, p)| g.len() != p.len())
        {
            return Err(Error::DimMismatch {
                context: "adam_step",
                expected: "gradients shaped like the parameters".into(),
                got: format!("{} gradient tensors", grad_tensors.len()),
            });
        }
    }
    for (idx, g) in grad_tensors.iter().enumerate() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                tensor: format!("tensor {idx}"),
            });
        }
    }

    state.t += 1;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for ((tensor, grad), (m, v)) in params
        .tensors_mut()
        .into_iter()
        .zip(grad_tensors)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..tensor.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            tensor[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation accuracy (ties
    /// broken by lower validation loss, then by the earlier epoch).
    pub params: ParamSet,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// `epoch,train_loss,val_loss,val_acc` with a header row.
pub fn write_history_csv(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
    for row in history {
        writeln!(
            out,
            "{},{},{},{}",
            row.epoch, row.train_loss, row.val_loss, row.val_acc
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

enum Engine {
    Adagnn { op: FilterOperator, x: SparseMatrix },
    Gcn { s: SparseMatrix, x: SparseMatrix },
    Sgc { propagated: DenseMatrix },
}

impl Engine {
    fn build(kind: ModelKind, ds: &Dataset, k_layers: usize) -> Result<Self> {
        match kind {
            ModelKind::AdagnnSym => Ok(Engine::Adagnn {
                op: FilterOperator::symmetric(ds.graph.laplacian(LaplacianKind::Sym, true)?),
                x: SparseMatrix::from_dense(&ds.x),
            }),
            ModelKind::AdagnnRw => Ok(Engine::Adagnn {
                op: FilterOperator::general(ds.graph.laplacian(LaplacianKind::Rw, true)?),
                x: SparseMatrix::from_dense(&ds.x),
            }),
            ModelKind::Gcn => Ok(Engine::Gcn {
                s: ds.graph.gcn_propagation(),
                x: SparseMatrix::from_dense(&ds.x),
            }),
            ModelKind::Sgc => Ok(Engine::Sgc {
                propagated: sgc_propagate(&ds.x, &ds.graph.gcn_propagation(), k_layers)?,
            }),
        }
    }

    fn init_params(
        kind: ModelKind,
        k_layers: usize,
        in_dim: usize,
        hidden: usize,
        classes: usize,
        seed: u64,
    ) -> ParamSet {
        match kind {
            ModelKind::AdagnnSym | ModelKind::AdagnnRw => {
                ParamSet::Adagnn(ModelParams::init(k_layers, in_dim, hidden, classes, seed))
            }
            ModelKind::Gcn => ParamSet::Gcn(GcnParams::init(k_layers, in_dim, hidden, classes, seed)),
            ModelKind::Sgc => ParamSet::Sgc(SgcParams::init(k_layers, in_dim, classes, seed)),
        }
    }

    /// Train-mode forward + gradients of the full loss.
    fn step(
        &self,
        params: &ParamSet,
        ds: &Dataset,
        cfg: &TrainConfig,
        rng_seed: u64,
    ) -> Result<(DenseMatrix, ParamSet)> {
        match (self, params) {
            (Engine::Adagnn { op, x }, ParamSet::Adagnn(p)) => {
                let (yhat, cache) = adagnn_forward(
                    p,
                    x,
                    op,
                    Mode::Train,
                    rng_seed,
                    cfg.dropout,
                    cfg.dropout_intermediate,
                )?;
                let cache = cache.expect("train mode populates the cache");
                let grads = adagnn_backward(
                    p,
                    &cache,
                    op,
                    &ds.y,
                    &ds.train_mask,
                    cfg.alpha,
                    cfg.beta,
                )?;
                Ok((yhat, ParamSet::Adagnn(grads)))
            }
            (Engine::Gcn { s, x }, ParamSet::Gcn(p)) => {
                let (yhat, cache) = gcn_forward(p, x, s, Mode::Train, rng_seed, cfg.dropout)?;
                let cache = cache.expect("train mode populates the cache");
                let grads = gcn_backward(p, &cache, s, &ds.y, &ds.train_mask, cfg.beta)?;
                Ok((yhat, ParamSet::Gcn(grads)))
            }
            (Engine::Sgc { propagated }, ParamSet::Sgc(p)) => {
                let yhat = dense::softmax_rows(&propagated.dot(&p.w));
                let grad = sgc_logits_grad(propagated, &yhat, &p.w, &ds.y, &ds.train_mask, cfg.beta);
                Ok((
                    yhat,
                    ParamSet::Sgc(SgcParams {
                        w: grad,
                        ..p.clone()
                    }),
                ))
            }
            _ => Err(Error::BadConfig(
                "engine and parameter set disagree on the model kind".into(),
            )),
        }
    }

    fn eval(&self, params: &ParamSet) -> Result<DenseMatrix> {
        match (self, params) {
            (Engine::Adagnn { op, x }, ParamSet::Adagnn(p)) => {
                Ok(adagnn_forward(p, x, op, Mode::Eval, 0, 0.0, false)?.0)
            }
            (Engine::Gcn { s, x }, ParamSet::Gcn(p)) => {
                Ok(gcn_forward(p, x, s, Mode::Eval, 0, 0.0)?.0)
            }
            (Engine::Sgc { propagated }, ParamSet::Sgc(p)) => {
                Ok(dense::softmax_rows(&propagated.dot(&p.w)))
            }
            _ => Err(Error::BadConfig(
                "engine and parameter set disagree on the model kind".into(),
            )),
        }
    }
}

/// Deterministic per-epoch stream seed.
fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    let mut z = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a model and returns the parameters of the best validation epoch
/// together with the full per-epoch history.
///
/// Stops early after `patience` epochs without a validation-accuracy
/// improvement. Everything is a pure function of `(kind, dataset, dims,
/// config)`, bit for bit.
pub fn train(
    kind: ModelKind,
    ds: &Dataset,
    k_layers: usize,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ds.validate()?;
    if k_layers == 0 {
        return Err(Error::BadConfig("need at least one layer".into()));
    }
    if !ds.train_mask.iter().any(|&b| b) || !ds.val_mask.iter().any(|&b| b) {
        return Err(Error::BadConfig(
            "training needs non-empty train and val masks".into(),
        ));
    }

    let engine = Engine::build(kind, ds, k_layers)?;
    let mut params = Engine::init_params(
        kind,
        k_layers,
        ds.n_features(),
        hidden,
        ds.n_classes,
        cfg.seed,
    );
    let mut adam = AdamState::new_like(&params);

    let mut history = Vec::new();
    let mut best: Option<(f64, f64, usize, ParamSet)> = None;
    let mut since_best = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let (yhat, grads) = engine
            .step(&params, ds, cfg, epoch_seed(cfg.seed, epoch))
            .map_err(|e| match e {
                Error::NonFinite { .. } | Error::NonFiniteGradient { .. } => {
                    Error::Divergence { epoch }
                }
                other => other,
            })?;
        let train_loss = total_loss(&yhat, &ds.y, &ds.train_mask, &params, cfg.alpha, cfg.beta);
        if !train_loss.total.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        adam_step(
            &mut adam,
            &mut params,
            &grads,
            cfg.lr,
            cfg.beta1,
            cfg.beta2,
            cfg.eps,
        )
        .map_err(|e| match e {
            Error::NonFiniteGradient { .. } => Error::Divergence { epoch },
            other => other,
        })?;

        let yhat_eval = engine.eval(&params)?;
        let val_loss = total_loss(&yhat_eval, &ds.y, &ds.val_mask, &params, cfg.alpha, cfg.beta);
        let val_acc = masked_accuracy(&yhat_eval, &ds.y, &ds.val_mask);
        history.push(EpochStats {
            epoch,
            train_loss: train_loss.total,
            val_loss: val_loss.total,
            val_acc,
        });

        let improved = match &best {
            None => true,
            Some((best_acc, best_loss, _, _)) => {
                val_acc > *best_acc || (val_acc == *best_acc && val_loss.total < *best_loss)
            }
        };
        if improved {
            best = Some((val_acc, val_loss.total, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= cfg.patience {
            break;
        }
    }

    let (_, _, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params: best_params,
        history,
        best_epoch,
    })
}

/// Eval-mode class probabilities for trained parameters on a dataset.
pub fn predict(kind: ModelKind, params: &ParamSet, ds: &Dataset) -> Result<DenseMatrix> {
    let k_layers = match params {
        ParamSet::Adagnn(p) => p.k_layers,
        ParamSet::Gcn(p) => p.k_layers,
        ParamSet::Sgc(p) => p.k_steps,
    };
    let engine = Engine::build(kind, ds, k_layers)?;
    engine.eval(params)
}
