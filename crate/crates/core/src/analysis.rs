//! Over-smoothing diagnostics, frequency-response export, and depth sweeps.
//!
//! The over-smoothing limit of repeated fixed low-pass filtering is the span
//! of the zero-eigenvalue eigenvector of the augmented symmetric Laplacian,
//! which points along `D̃^{1/2}·1`. [`collinearity_residual`] measures how far
//! a representation still is from that subspace; [`smoothness_score`] is a
//! model-free pairwise-similarity diagnostic.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::model::{
    adagnn_representation, gcn_representation, sgc_propagate, FilterOperator, ModelKind,
    ModelParams, ParamSet,
};
use crate::optim::{masked_accuracy, predict, train, TrainConfig};
use crate::spectral::freq_response;
use crate::{Dataset, DegreeVector, DenseMatrix, Error, LaplacianKind, Result, SparseMatrix};

/// Mean pairwise cosine distance `1 - cos(h_i, h_j)` over all node pairs.
///
/// Zero rows count as similarity 0 against nonzero rows and 1 against other
/// zero rows. 0 means all representations coincide up to scale; larger is
/// less smoothed.
///
/// Evaluated in O(N·H) via `Σ_{i<j} cos = (‖Σ r̂_i‖² - m) / 2` over the `m`
/// normalized nonzero rows.
pub fn smoothness_score(h: &DenseMatrix) -> f64 {
    let n = h.nrows();
    assert!(n >= 2, "smoothness needs at least two nodes");
    let mut unit_sum = vec![0.0f64; h.ncols()];
    let mut nonzero = 0usize;
    for row in h.rows() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            nonzero += 1;
            for (acc, v) in unit_sum.iter_mut().zip(row) {
                *acc += v / norm;
            }
        }
    }
    let zero = n - nonzero;
    let sum_sq: f64 = unit_sum.iter().map(|v| v * v).sum();
    let cos_sum = (sum_sq - nonzero as f64) / 2.0 + (zero * zero.saturating_sub(1)) as f64 / 2.0;
    let pairs = (n * (n - 1)) as f64 / 2.0;
    1.0 - cos_sum / pairs
}

/// Relative mass of `h` outside the span of `D̃^{1/2}·1`, in `[0, 1]`.
///
/// 0 means fully over-smoothed (every column collinear with the limit
/// direction); a zero matrix is defined as 0.
pub fn collinearity_residual(h: &DenseMatrix, d_aug: &DegreeVector) -> f64 {
    debug_assert!(d_aug.augmented, "the limit direction uses augmented degrees");
    let total: f64 = h.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut u: Vec<f64> = d_aug.d.iter().map(|d| d.sqrt()).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);

    let mut residual = 0.0;
    for col in h.columns() {
        let coef: f64 = col.iter().zip(&u).map(|(a, b)| a * b).sum();
        for (v, ui) in col.iter().zip(&u) {
            let r = v - coef * ui;
            residual += r * r;
        }
    }
    (residual / total).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveLabel {
    Channel(usize),
    SgcReference,
}

impl std::fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurveLabel::Channel(j) => write!(f, "{j}"),
            CurveLabel::SgcReference => write!(f, "SGC"),
        }
    }
}

/// One frequency-response curve sampled on a uniform grid over `[0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseCurve {
    pub label: CurveLabel,
    pub k_layers: usize,
    pub lambda_grid: Vec<f64>,
    pub response: Vec<f64>,
}

/// Samples `∏_k (1 - φ_{j,k} λ)` for the selected channels, plus the fixed
/// `(1 - λ)^K` reference curve of K-step SGC at the same depth.
pub fn export_response(
    params: &ModelParams,
    channels: &[usize],
    grid_points: usize,
) -> Result<Vec<ResponseCurve>> {
    if grid_points < 2 {
        return Err(Error::BadConfig("need at least two grid points".into()));
    }
    let max_channel = params.phi.iter().map(|p| p.len()).min().unwrap_or(0);
    let lambda_grid: Vec<f64> = (0..grid_points)
        .map(|i| 2.0 * i as f64 / (grid_points - 1) as f64)
        .collect();

    let mut curves = Vec::with_capacity(channels.len() + 1);
    for &j in channels {
        if j >= max_channel {
            return Err(Error::BadConfig(format!(
                "channel {j} out of range; every layer must have a coefficient (max {max_channel})"
            )));
        }
        let phis: Vec<f64> = params.phi.iter().map(|layer| layer[j]).collect();
        let response = lambda_grid
            .iter()
            .map(|&lam| freq_response(&phis, lam))
            .collect();
        curves.push(ResponseCurve {
            label: CurveLabel::Channel(j),
            k_layers: params.k_layers,
            lambda_grid: lambda_grid.clone(),
            response,
        });
    }
    let sgc = vec![1.0; params.k_layers];
    curves.push(ResponseCurve {
        label: CurveLabel::SgcReference,
        k_layers: params.k_layers,
        lambda_grid: lambda_grid.clone(),
        response: lambda_grid
            .iter()
            .map(|&lam| freq_response(&sgc, lam))
            .collect(),
    });
    Ok(curves)
}

/// `lambda,channel_or_SGC,response` rows, curve by curve.
pub fn write_response_csv(curves: &[ResponseCurve], path: &Path) -> Result<()> {
    let mut out = String::from("lambda,channel_or_SGC,response\n");
    for curve in curves {
        for (lam, resp) in curve.lambda_grid.iter().zip(&curve.response) {
            writeln!(out, "{lam},{},{resp}", curve.label).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kind: ModelKind,
    pub depth: usize,
    pub seed: u64,
    pub test_acc: f64,
    pub smoothness: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Successful rows, sorted by (kind, depth, seed).
    pub rows: Vec<SweepRow>,
    /// Combinations whose training failed, with the error message.
    pub failures: Vec<(ModelKind, usize, u64, String)>,
}

impl SweepResult {
    /// Mean and population standard deviation of test accuracy per
    /// (kind, depth), over seeds.
    pub fn summarize(&self) -> BTreeMap<(String, usize), (f64, f64)> {
        let mut grouped: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
        for row in &self.rows {
            grouped
                .entry((row.kind.as_str().to_string(), row.depth))
                .or_default()
                .push(row.test_acc);
        }
        grouped
            .into_iter()
            .map(|(key, accs)| {
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                let var =
                    accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / accs.len() as f64;
                (key, (mean, var.sqrt()))
            })
            .collect()
    }
}

/// Trains every (kind, depth, seed) combination and records test accuracy
/// and the smoothness of the final-layer representation.
///
/// A diverging row is recorded as a failure without aborting the rest.
pub fn oversmooth_sweep(
    ds: &Dataset,
    kinds: &[ModelKind],
    depths: &[usize],
    seeds: &[u64],
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<SweepResult> {
    if kinds.is_empty() || depths.is_empty() || seeds.is_empty() {
        return Err(Error::BadConfig(
            "sweep needs non-empty kinds, depths, and seeds".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &kind in kinds {
        for &depth in depths {
            for &seed in seeds {
                let row_cfg = TrainConfig { seed, ..cfg.clone() };
                let start = Instant::now();
                match sweep_row(ds, kind, depth, hidden, &row_cfg) {
                    Ok((test_acc, smoothness)) => rows.push(SweepRow {
                        kind,
                        depth,
                        seed,
                        test_acc,
                        smoothness,
                        seconds: start.elapsed().as_secs_f64(),
                    }),
                    Err(e) => failures.push((kind, depth, seed, e.to_string())),
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.kind.as_str(), a.depth, a.seed).cmp(&(b.kind.as_str(), b.depth, b.seed))
    });
    Ok(SweepResult { rows, failures })
}

fn sweep_row(
    ds: &Dataset,
    kind: ModelKind,
    depth: usize,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let outcome = train(kind, ds, depth, hidden, cfg)?;
    let yhat = predict(kind, &outcome.params, ds)?;
    let test_acc = masked_accuracy(&yhat, &ds.y, &ds.test_mask);
    let repr = final_representation(kind, &outcome.params, ds)?;
    Ok((test_acc, smoothness_score(&repr)))
}

/// The representation fed to each model's classifier, in eval mode.
pub fn final_representation(
    kind: ModelKind,
    params: &ParamSet,
    ds: &Dataset,
) -> Result<DenseMatrix> {
    let x = SparseMatrix::from_dense(&ds.x);
    match (kind, params) {
        (ModelKind::AdagnnSym, ParamSet::Adagnn(p)) => {
            let op = FilterOperator::symmetric(ds.graph.laplacian(LaplacianKind::Sym, true)?);
            adagnn_representation(p, &x, &op)
        }
        (ModelKind::AdagnnRw, ParamSet::Adagnn(p)) => {
            let op = FilterOperator::general(ds.graph.laplacian(LaplacianKind::Rw, true)?);
            adagnn_representation(p, &x, &op)
        }
        (ModelKind::Gcn, ParamSet::Gcn(p)) => {
            gcn_representation(p, &x, &ds.graph.gcn_propagation())
        }
        (ModelKind::Sgc, ParamSet::Sgc(p)) => {
            sgc_propagate(&ds.x, &ds.graph.gcn_propagation(), p.k_steps)
        }
        _ => Err(Error::BadConfig(
            "parameter set does not match the model kind".into(),
        )),
    }
}

/// `kind,depth,seed,test_acc,smoothness,seconds` for the successful rows.
pub fn write_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let mut out = String::from("kind,depth,seed,test_acc,smoothness,seconds\n");
    for row in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.kind, row.depth, row.seed, row.test_acc, row.smoothness, row.seconds
        )
        .unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_two_channel, Topology};
    use crate::Graph;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn brute_force_smoothness(h: &DenseMatrix) -> f64 {
        let n = h.nrows();
        let mut sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let ri = h.row(i);
                let rj = h.row(j);
                let ni = ri.iter().map(|v| v * v).sum::<f64>().sqrt();
                let nj = rj.iter().map(|v| v * v).sum::<f64>().sqrt();
                let cos = if ni == 0.0 && nj == 0.0 {
                    1.0
                } else if ni == 0.0 || nj == 0.0 {
                    0.0
                } else {
                    ri.iter().zip(rj).map(|(a, b)| a * b).sum::<f64>() / (ni * nj)
                };
                sum += 1.0 - cos;
            }
        }
        sum / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn smoothness_trivial_cases() {
        let identical = DenseMatrix::from_shape_fn((4, 3), |(_, j)| (j + 1) as f64);
        assert!(smoothness_score(&identical).abs() < 1e-12);
        assert!((smoothness_score(&array![[1.0, 0.0], [0.0, 1.0]]) - 1.0).abs() < 1e-12);
        assert!((smoothness_score(&array![[1.0, 0.0], [-1.0, 0.0]]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn smoothness_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for trial in 0..5 {
            let mut h = DenseMatrix::from_shape_fn((11, 4), |_| rng.random_range(-2.0..2.0));
            if trial % 2 == 0 {
                for j in 0..4 {
                    h[[3, j]] = 0.0;
                    h[[7, j]] = 0.0;
                }
            }
            let fast = smoothness_score(&h);
            let slow = brute_force_smoothness(&h);
            assert!((fast - slow).abs() < 1e-10, "trial {trial}: {fast} vs {slow}");
        }
    }

    #[test]
    fn collinearity_limits() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        let deg = g.degree_vector(true);
        let direction: Vec<f64> = deg.d.iter().map(|d| d.sqrt()).collect();
        let in_span = DenseMatrix::from_shape_fn((5, 3), |(i, j)| direction[i] * (j + 1) as f64);
        assert!(collinearity_residual(&in_span, &deg) < 1e-12);

        // a column orthogonal to the direction
        let mut orth = vec![1.0, -direction[0] / direction[1], 0.0, 0.0, 0.0];
        let dot: f64 = orth.iter().zip(&direction).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
        let h = DenseMatrix::from_shape_fn((5, 1), |(i, _)| orth[i]);
        assert!((collinearity_residual(&h, &deg) - 1.0).abs() < 1e-12);
        orth[0] = 0.0;

        assert_eq!(collinearity_residual(&DenseMatrix::zeros((5, 2)), &deg), 0.0);
    }

    #[test]
    fn repeated_propagation_converges_to_limit_direction() {
        // Power iteration on S: residual collapses for a connected
        // non-bipartite graph.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let g = Graph::from_edges(
            12,
            (0..12)
                .flat_map(|i| ((i + 1)..12).map(move |j| (i, j)))
                .filter(|_| true)
                .collect::<Vec<_>>()
                .into_iter()
                .filter(|&(i, j)| (i * 31 + j * 17) % 3 == 0 || j == i + 1),
        )
        .unwrap();
        let s = g.gcn_propagation();
        let deg = g.degree_vector(true);
        let mut h = DenseMatrix::from_shape_fn((12, 2), |_| rng.random_range(-1.0..1.0));
        for _ in 0..200 {
            h = s.spmm(&h).unwrap();
        }
        assert!(collinearity_residual(&h, &deg) < 1e-6);
    }

    #[test]
    fn untrained_response_coincides_with_sgc() {
        let params = ModelParams::init(4, 6, 5, 3, 0);
        let curves = export_response(&params, &[0, 2, 4], 201).unwrap();
        assert_eq!(curves.len(), 4);
        let sgc = &curves[3];
        assert_eq!(sgc.label, CurveLabel::SgcReference);
        for curve in &curves[..3] {
            assert_eq!(curve.response, sgc.response);
            assert_eq!(curve.lambda_grid.len(), 201);
            assert_eq!(curve.response[0], 1.0);
        }
    }

    #[test]
    fn single_layer_response_is_a_line() {
        let mut params = ModelParams::init(1, 3, 3, 2, 0);
        params.phi[0] = vec![0.5, 0.5, 0.5];
        let curves = export_response(&params, &[1], 5).unwrap();
        let curve = &curves[0];
        for (lam, resp) in curve.lambda_grid.iter().zip(&curve.response) {
            assert!((resp - (1.0 - 0.5 * lam)).abs() < 1e-15);
        }
    }

    #[test]
    fn response_uses_the_shared_evaluator() {
        let mut params = ModelParams::init(3, 4, 4, 2, 1);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for layer in params.phi.iter_mut() {
            for v in layer.iter_mut() {
                *v = rng.random_range(-1.0..1.5);
            }
        }
        let curves = export_response(&params, &[2], 17).unwrap();
        let phis: Vec<f64> = params.phi.iter().map(|l| l[2]).collect();
        for (lam, resp) in curves[0].lambda_grid.iter().zip(&curves[0].response) {
            assert_eq!(*resp, freq_response(&phis, *lam));
        }
    }

    #[test]
    fn response_rejects_bad_inputs() {
        let params = ModelParams::init(2, 4, 3, 2, 0);
        assert!(export_response(&params, &[0], 1).is_err());
        assert!(export_response(&params, &[3], 10).is_err()); // only 3 hidden channels
    }

    #[test]
    fn sweep_runs_and_isolates_failures() {
        let mut ds = synthetic_two_channel(24, Topology::Cycle);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        ds.x = DenseMatrix::from_shape_fn((24, 3), |(i, _)| {
            ds.y[i] as f64 + rng.random_range(-0.3..0.3)
        });
        for i in 0..24 {
            match i % 3 {
                0 => ds.train_mask[i] = true,
                1 => ds.val_mask[i] = true,
                _ => ds.test_mask[i] = true,
            }
        }
        let cfg = TrainConfig {
            max_epochs: 8,
            patience: 8,
            ..Default::default()
        };
        // depth 0 fails per-row without sinking the sweep
        let result = oversmooth_sweep(
            &ds,
            &[ModelKind::Gcn, ModelKind::Sgc],
            &[0, 2],
            &[1, 2],
            6,
            &cfg,
        )
        .unwrap();
        assert_eq!(result.rows.len(), 8 - 4);
        assert_eq!(result.failures.len(), 4);
        let sorted: Vec<_> = result
            .rows
            .iter()
            .map(|r| (r.kind.as_str(), r.depth, r.seed))
            .collect();
        let mut expect = sorted.clone();
        expect.sort();
        assert_eq!(sorted, expect);

        let summary = result.summarize();
        assert!(summary.contains_key(&("gcn".to_string(), 2)));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&result, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kind,depth,seed,test_acc,smoothness,seconds\n"));
        assert_eq!(text.lines().count(), 1 + 4);

        assert!(oversmooth_sweep(&ds, &[], &[2], &[0], 4, &cfg).is_err());
    }
}
