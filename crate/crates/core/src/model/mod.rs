//! Forward and reverse passes for the adaptive-filter network and the
//! GCN/SGC baselines.
//!
//! The adaptive architecture is: one mixing layer
//! `H¹ = ReLU((X - L̃ X Φ₁) Θ)`, then parameter-free filter layers
//! `Hᵏ = Hᵏ⁻¹ - L̃ Hᵏ⁻¹ Φₖ`, then a softmax classifier `Ŷ = softmax(Hᴷ W)`.
//! Gradients are hand-derived; every parameter gradient is checked against
//! central finite differences in the test suite.
//!
//! Internally the first layer is evaluated as
//! `X·Θ - L̃·(X·(Φ₁Θ))` so the sparse feature matrix is never densified;
//! this is algebraically identical to filtering first and mixing second.

mod adagnn;
mod baselines;
mod checkpoint;

pub use adagnn::{adagnn_backward, adagnn_forward, adagnn_representation};
pub use baselines::{
    gcn_backward, gcn_forward, gcn_representation, sgc_forward, sgc_logits_grad, sgc_propagate,
    GcnCache, GcnParams, SgcParams,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::{dense, DenseMatrix, Error, Result, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Adaptive filter over the symmetric normalized Laplacian.
    AdagnnSym,
    /// Adaptive filter over the random-walk normalized Laplacian.
    AdagnnRw,
    Gcn,
    Sgc,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::AdagnnSym => "adagnn-s",
            ModelKind::AdagnnRw => "adagnn-r",
            ModelKind::Gcn => "gcn",
            ModelKind::Sgc => "sgc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "adagnn-s" | "adagnn_sym" => Ok(ModelKind::AdagnnSym),
            "adagnn-r" | "adagnn_rw" => Ok(ModelKind::AdagnnRw),
            "gcn" => Ok(ModelKind::Gcn),
            "sgc" => Ok(ModelKind::Sgc),
            other => Err(Error::BadConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Trainable parameters of the adaptive-filter network.
///
/// `phi[0]` has one coefficient per input channel (length `in_dim`); each
/// deeper `phi[k]` has one per hidden channel (length `hidden`). `theta` is
/// the first-layer mixing matrix and `w_out` the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub k_layers: usize,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub phi: Vec<Vec<f64>>,
    pub theta: DenseMatrix,
    pub w_out: DenseMatrix,
}

impl ModelParams {
    /// Fresh parameters: all filter coefficients start at 1 (the fixed
    /// GCN/GraphSAGE operating point) and the dense weights are
    /// Glorot-uniform from the seeded generator.
    pub fn init(k_layers: usize, in_dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        assert!(k_layers >= 1, "need at least one layer");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut phi = vec![vec![1.0; in_dim]];
        for _ in 1..k_layers {
            phi.push(vec![1.0; hidden]);
        }
        let theta = dense::glorot_uniform(in_dim, hidden, &mut rng);
        let w_out = dense::glorot_uniform(hidden, classes, &mut rng);
        Self {
            k_layers,
            in_dim,
            hidden,
            classes,
            phi,
            theta,
            w_out,
        }
    }

    /// Same shapes, all entries zero. Used as the gradient container.
    pub fn zeros_like(&self) -> Self {
        Self {
            k_layers: self.k_layers,
            in_dim: self.in_dim,
            hidden: self.hidden,
            classes: self.classes,
            phi: self.phi.iter().map(|p| vec![0.0; p.len()]).collect(),
            theta: DenseMatrix::zeros(self.theta.dim()),
            w_out: DenseMatrix::zeros(self.w_out.dim()),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.phi.iter().map(|p| p.as_slice()).collect();
        out.push(self.theta.as_slice().expect("standard layout"));
        out.push(self.w_out.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .phi
            .iter_mut()
            .map(|p| p.as_mut_slice())
            .collect();
        out.push(self.theta.as_slice_mut().expect("standard layout"));
        out.push(self.w_out.as_slice_mut().expect("standard layout"));
        out
    }
}

/// The full parameter set of any trainable model.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSet {
    Adagnn(ModelParams),
    Gcn(GcnParams),
    Sgc(SgcParams),
}

impl ParamSet {
    pub fn tensors(&self) -> Vec<&[f64]> {
        match self {
            ParamSet::Adagnn(p) => p.tensors(),
            ParamSet::Gcn(p) => p.tensors(),
            ParamSet::Sgc(p) => p.tensors(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            ParamSet::Adagnn(p) => p.tensors_mut(),
            ParamSet::Gcn(p) => p.tensors_mut(),
            ParamSet::Sgc(p) => p.tensors_mut(),
        }
    }

    /// Sum of |φ| over all filter coefficients (the ℓ1 regularization base).
    pub fn l1_phi(&self) -> f64 {
        match self {
            ParamSet::Adagnn(p) => p
                .phi
                .iter()
                .flat_map(|v| v.iter())
                .map(|x| x.abs())
                .sum(),
            _ => 0.0,
        }
    }

    /// Sum of squares over every trainable tensor (the ℓ2 base).
    pub fn l2_squared(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum()
    }
}

/// A propagation operator together with its transpose for the reverse pass.
///
/// For symmetric Laplacians the transpose is the matrix itself and is not
/// duplicated.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    lap: SparseMatrix,
    lap_t: Option<SparseMatrix>,
}

impl FilterOperator {
    pub fn symmetric(lap: SparseMatrix) -> Self {
        debug_assert!(lap.is_symmetric());
        Self { lap, lap_t: None }
    }

    pub fn general(lap: SparseMatrix) -> Self {
        let lap_t = lap.transpose();
        Self {
            lap,
            lap_t: Some(lap_t),
        }
    }

    pub fn n(&self) -> usize {
        self.lap.n_rows()
    }

    pub fn lap(&self) -> &SparseMatrix {
        &self.lap
    }

    pub fn apply(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        self.lap.spmm(d)
    }

    pub fn apply_t(&self, d: &DenseMatrix) -> Result<DenseMatrix> {
        self.lap_t.as_ref().unwrap_or(&self.lap).spmm(d)
    }
}

/// One adaptive filter layer: `H - L̃ H diag(φ)`.
///
/// Each channel is filtered independently, so entry `φ_j` only ever touches
/// column `j` of the output.
pub fn layer_filter(h: &DenseMatrix, lap: &SparseMatrix, phi: &[f64]) -> Result<DenseMatrix> {
    if phi.len() != h.ncols() {
        return Err(Error::DimMismatch {
            context: "layer_filter",
            expected: format!("{} filter coefficients", h.ncols()),
            got: format!("{}", phi.len()),
        });
    }
    let lh = lap.spmm(h)?;
    let mut out = h.clone();
    for (mut out_row, lh_row) in out.rows_mut().into_iter().zip(lh.rows()) {
        for ((o, l), p) in out_row.iter_mut().zip(lh_row).zip(phi) {
            *o -= p * l;
        }
    }
    Ok(out)
}

/// Bookkeeping from a train-mode forward pass, in the exact shape the
/// reverse pass consumes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input features after dropout, kept sparse.
    pub x0: SparseMatrix,
    pub x0_t: SparseMatrix,
    /// First-layer pre-activation `(X₀ - L̃X₀Φ₁)Θ`.
    pub pre_act: DenseMatrix,
    /// `L̃ · (layer input)` for layers 2..=K, in layer order.
    pub lap_h: Vec<DenseMatrix>,
    /// Keep-masks for intermediate dropout (when enabled), one per layer 2..=K.
    pub intermediate_masks: Vec<Option<Vec<bool>>>,
    /// Keep-mask of the classifier-input dropout.
    pub out_mask: Option<Vec<bool>>,
    /// Classifier input after dropout.
    pub hk_dropped: DenseMatrix,
    pub logits: DenseMatrix,
    pub yhat: DenseMatrix,
    pub dropout_rate: f64,
}

/// Inverted dropout over the stored entries of a sparse matrix. Structural
/// zeros are untouched by dropout, so this equals elementwise dropout on the
/// dense equivalent.
pub(crate) fn dropout_sparse(x: &SparseMatrix, rate: f64, rng: &mut impl Rng) -> SparseMatrix {
    if rate == 0.0 {
        return x.clone();
    }
    let scale = 1.0 / (1.0 - rate);
    let mut entries = Vec::with_capacity(x.nnz());
    for r in 0..x.n_rows() {
        for (c, v) in x.row(r) {
            if rng.random_range(0.0..1.0) >= rate {
                entries.push((r, c, v * scale));
            }
        }
    }
    SparseMatrix::from_coo(entries, x.n_rows(), x.n_cols()).expect("indices preserved")
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
