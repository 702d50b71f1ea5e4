//! Spectral graph neural networks with adaptive per-channel frequency-response
//! filters.
//!
//! The central operation is the learnable low-pass layer `H - L̃ H Φ`, where
//! `L̃` is a self-loop-augmented normalized Laplacian and `Φ` holds one
//! trainable coefficient per feature channel. Stacking `K` such layers gives
//! each channel the polynomial frequency response `∏_k (1 - φ_k λ̃)`, which
//! specializes to the fixed GCN / GraphSAGE-mean / SGC filters at `Φ = I` and
//! can instead keep high-frequency content alive at depth.
//!
//! Module map:
//!
//! - [`sparse`]: CSR matrix kernels (construction, sparse×dense products).
//! - [`graph`]: undirected graphs, degree vectors, Laplacian operators.
//! - [`spectral`]: dense symmetric eigendecomposition (cyclic Jacobi), graph
//!   Fourier transform, frequency-response evaluation.
//! - [`model`]: forward/backward passes for the adaptive filter network and
//!   the GCN/SGC baselines, plus checkpoint I/O.
//! - [`optim`]: the regularized loss, Adam, and the early-stopped training loop.
//! - [`data`]: TSV dataset ingestion, split generation, synthetic fixtures.
//! - [`analysis`]: over-smoothing diagnostics, response-curve export, and
//!   depth sweeps.

use std::path::PathBuf;

use thiserror::Error;

pub mod analysis;
pub mod data;
pub mod dense;
pub mod graph;
pub mod model;
pub mod optim;
pub mod sparse;
pub mod spectral;

pub use data::Dataset;
pub use graph::{DegreeVector, Graph, LaplacianKind};
pub use model::{FilterOperator, ForwardCache, Mode, ModelKind, ModelParams, ParamSet};
pub use optim::{train, TrainConfig, TrainOutcome};
pub use sparse::SparseMatrix;
pub use spectral::EigenBasis;

/// Dense matrices are plain row-major `f64` arrays.
pub type DenseMatrix = ndarray::Array2<f64>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("node {node} has degree 0; normalized Laplacians need self-loop augmentation")]
    DegenerateDegree { node: usize },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("eigensolver did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix of size {n} exceeds the eigendecomposition cap {cap}")]
    MatrixTooLarge { n: usize, cap: usize },

    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("{path}:{line}: {msg}")]
    DataFormat {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("bad checkpoint: {0}")]
    CheckpointFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
