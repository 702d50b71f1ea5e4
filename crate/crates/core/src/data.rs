//! Dataset ingestion and split generation.
//!
//! A dataset directory holds four TSV files:
//!
//! - `edges.tsv`: `src<TAB>dst` per line; either orientation, duplicates
//!   tolerated.
//! - `features.tsv`: either dense rows `id<TAB>f1<TAB>...<TAB>fF`, or the
//!   sparse form `id<TAB>col:val col:val ...` (auto-detected by the presence
//!   of `:` anywhere in the file). In sparse form `F` is one more than the
//!   largest column index that appears, and a bare `id` line is an all-zero
//!   row.
//! - `labels.tsv`: `id<TAB>label`, one line per node.
//! - `split.tsv` (optional): `id<TAB>{train|val|test}`; ids not listed stay
//!   out of every mask.
//!
//! Node ids are remapped to `0..N-1` by sorting the original ids, so the
//! result does not depend on file line order.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::{DenseMatrix, Error, Graph, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub x: DenseMatrix,
    pub y: Vec<usize>,
    pub n_classes: usize,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Path,
    Star,
    Cycle,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// True when any split assignment exists.
    pub fn has_split(&self) -> bool {
        self.train_mask.iter().any(|&b| b)
            || self.val_mask.iter().any(|&b| b)
            || self.test_mask.iter().any(|&b| b)
    }

    pub fn mask_sizes(&self) -> (usize, usize, usize) {
        let count = |m: &[bool]| m.iter().filter(|b| **b).count();
        (
            count(&self.train_mask),
            count(&self.val_mask),
            count(&self.test_mask),
        )
    }

    /// Checks the structural invariants: consistent lengths, pairwise
    /// disjoint masks, and labels dense in `[0, C)`.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.x.nrows() != n
            || self.y.len() != n
            || self.train_mask.len() != n
            || self.val_mask.len() != n
            || self.test_mask.len() != n
        {
            return Err(Error::BadConfig(format!(
                "dataset arrays disagree on node count (graph has {n})"
            )));
        }
        for i in 0..n {
            let assigned =
                self.train_mask[i] as u8 + self.val_mask[i] as u8 + self.test_mask[i] as u8;
            if assigned > 1 {
                return Err(Error::BadConfig(format!(
                    "node {i} appears in more than one split mask"
                )));
            }
        }
        let mut seen = vec![false; self.n_classes];
        for (i, &label) in self.y.iter().enumerate() {
            if label >= self.n_classes {
                return Err(Error::BadConfig(format!(
                    "label {label} of node {i} out of range [0, {})",
                    self.n_classes
                )));
            }
            seen[label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::BadConfig(format!(
                "no node carries class {missing}; labels must be dense in [0, C)"
            )));
        }
        Ok(())
    }

    /// Divides each feature row by its sum (rows summing to zero are left
    /// untouched).
    pub fn row_normalize(&mut self) {
        for mut row in self.x.rows_mut() {
            let sum = row.sum();
            if sum != 0.0 {
                row.mapv_inplace(|v| v / sum);
            }
        }
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let features_path = dir.join("features.tsv");
    let labels_path = dir.join("labels.tsv");
    let edges_path = dir.join("edges.tsv");
    for p in [&features_path, &labels_path, &edges_path] {
        if !p.exists() {
            return Err(Error::MissingFile(p.clone()));
        }
    }

    let feat_text = fs::read_to_string(&features_path)?;
    let sparse = feat_text.contains(':');

    // First pass: node ids and the feature dimension.
    let mut rows: Vec<(i64, &str)> = Vec::new();
    for (lineno, line) in feat_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id_str, rest) = line.split_once('\t').unwrap_or((line, ""));
        let id = parse_i64(id_str, &features_path, lineno + 1)?;
        rows.push((id, rest));
    }
    let mut ids: Vec<i64> = rows.iter().map(|(id, _)| *id).collect();
    ids.sort_unstable();
    let before = ids.len();
    ids.dedup();
    if ids.len() != before {
        return Err(Error::BadConfig("duplicate node id in features.tsv".into()));
    }
    let remap: BTreeMap<i64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();

    let f_dim = if sparse {
        let mut max_col = None::<usize>;
        for (id, rest) in &rows {
            for tok in rest.split_whitespace() {
                let (c, _) = split_sparse_token(tok, &features_path, *id)?;
                max_col = Some(max_col.map_or(c, |m| m.max(c)));
            }
        }
        max_col.map(|m| m + 1).unwrap_or(0)
    } else {
        rows.first()
            .map(|(_, rest)| rest.split('\t').filter(|t| !t.is_empty()).count())
            .unwrap_or(0)
    };
    if f_dim == 0 {
        return Err(Error::BadConfig(
            "features.tsv has no feature columns".into(),
        ));
    }

    let mut x = DenseMatrix::zeros((n, f_dim));
    for (id, rest) in &rows {
        let node = remap[id];
        if sparse {
            for tok in rest.split_whitespace() {
                let (c, v) = split_sparse_token(tok, &features_path, *id)?;
                x[[node, c]] = v;
            }
        } else {
            let vals: Vec<&str> = rest.split('\t').filter(|t| !t.is_empty()).collect();
            if vals.len() != f_dim {
                return Err(Error::DataFormat {
                    path: features_path.clone(),
                    line: 0,
                    msg: format!(
                        "ragged feature row for node {id}: {} values, expected {f_dim}",
                        vals.len()
                    ),
                });
            }
            for (c, tok) in vals.iter().enumerate() {
                x[[node, c]] = parse_f64(tok, &features_path, *id)?;
            }
        }
    }

    // Labels.
    let mut y = vec![usize::MAX; n];
    for (lineno, line) in fs::read_to_string(&labels_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id_str, label_str) = line.split_once('\t').ok_or_else(|| Error::DataFormat {
            path: labels_path.clone(),
            line: lineno + 1,
            msg: "expected id<TAB>label".into(),
        })?;
        let id = parse_i64(id_str, &labels_path, lineno + 1)?;
        let node = *remap.get(&id).ok_or_else(|| Error::DataFormat {
            path: labels_path.clone(),
            line: lineno + 1,
            msg: format!("label for unknown node {id}"),
        })?;
        y[node] = label_str.trim().parse().map_err(|_| Error::DataFormat {
            path: labels_path.clone(),
            line: lineno + 1,
            msg: format!("bad label `{label_str}`"),
        })?;
    }
    if let Some(node) = y.iter().position(|&l| l == usize::MAX) {
        return Err(Error::BadConfig(format!("node {} has no label", ids[node])));
    }
    let n_classes = y.iter().max().map(|m| m + 1).unwrap_or(0);

    // Edges.
    let mut edges = Vec::new();
    for (lineno, line) in fs::read_to_string(&edges_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let (a, b) = match (it.next(), it.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::DataFormat {
                    path: edges_path.clone(),
                    line: lineno + 1,
                    msg: "expected src<TAB>dst".into(),
                })
            }
        };
        let lookup = |tok: &str| -> Result<usize> {
            let id = parse_i64(tok, &edges_path, lineno + 1)?;
            remap.get(&id).copied().ok_or_else(|| Error::DataFormat {
                path: edges_path.clone(),
                line: lineno + 1,
                msg: format!("edge references unknown node {id}"),
            })
        };
        edges.push((lookup(a)?, lookup(b)?));
    }
    let graph = Graph::from_edges(n, edges)?;

    // Optional split.
    let mut train_mask = vec![false; n];
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    let split_path = dir.join("split.tsv");
    if split_path.exists() {
        for (lineno, line) in fs::read_to_string(&split_path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id_str, which) = line.split_once('\t').ok_or_else(|| Error::DataFormat {
                path: split_path.clone(),
                line: lineno + 1,
                msg: "expected id<TAB>{train|val|test}".into(),
            })?;
            let id = parse_i64(id_str, &split_path, lineno + 1)?;
            let node = *remap.get(&id).ok_or_else(|| Error::DataFormat {
                path: split_path.clone(),
                line: lineno + 1,
                msg: format!("split entry for unknown node {id}"),
            })?;
            match which.trim() {
                "train" => train_mask[node] = true,
                "val" => val_mask[node] = true,
                "test" => test_mask[node] = true,
                other => {
                    return Err(Error::DataFormat {
                        path: split_path.clone(),
                        line: lineno + 1,
                        msg: format!("unknown split `{other}`"),
                    })
                }
            }
        }
    }

    let ds = Dataset {
        graph,
        x,
        y,
        n_classes,
        train_mask,
        val_mask,
        test_mask,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a dataset back out in the canonical form `load_dataset` accepts:
/// remapped ids, sparse features, one line per undirected edge. Loading the
/// result reproduces the dataset exactly.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    for &(u, v) in ds.graph.edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    fs::write(dir.join("edges.tsv"), edges)?;

    let f_dim = ds.n_features();
    let last_col_witnessed = ds.x.column(f_dim - 1).iter().any(|v| *v != 0.0);
    let mut feats = String::new();
    for i in 0..ds.n() {
        write!(feats, "{i}").unwrap();
        let mut first = true;
        for (c, v) in ds.x.row(i).iter().enumerate() {
            if *v != 0.0 {
                feats.push(if first { '\t' } else { ' ' });
                write!(feats, "{c}:{v}").unwrap();
                first = false;
            }
        }
        if i == 0 && !last_col_witnessed {
            // Pins the feature dimension for the sparse reader.
            feats.push(if first { '\t' } else { ' ' });
            write!(feats, "{}:0", f_dim - 1).unwrap();
        }
        feats.push('\n');
    }
    fs::write(dir.join("features.tsv"), feats)?;

    let mut labels = String::new();
    for (i, label) in ds.y.iter().enumerate() {
        writeln!(labels, "{i}\t{label}").unwrap();
    }
    fs::write(dir.join("labels.tsv"), labels)?;

    if ds.has_split() {
        let mut split = String::new();
        for i in 0..ds.n() {
            if ds.train_mask[i] {
                writeln!(split, "{i}\ttrain").unwrap();
            } else if ds.val_mask[i] {
                writeln!(split, "{i}\tval").unwrap();
            } else if ds.test_mask[i] {
                writeln!(split, "{i}\ttest").unwrap();
            }
        }
        fs::write(dir.join("split.tsv"), split)?;
    }
    Ok(())
}

/// Random node split into `(train, val)` fractions, the remainder becoming
/// test. Sizes are the rounded fractions of `N`; the permutation is fully
/// determined by `seed`.
pub fn random_split(ds: &Dataset, fractions: (f64, f64), seed: u64) -> Result<Dataset> {
    let (ft, fv) = fractions;
    if !(ft > 0.0 && fv > 0.0 && ft + fv < 1.0) {
        return Err(Error::BadConfig(format!(
            "split fractions must be positive and sum below 1, got ({ft}, {fv})"
        )));
    }
    let n = ds.n();
    let n_train = ((ft * n as f64).round() as usize).max(1);
    let n_val = ((fv * n as f64).round() as usize).max(1);
    if n_train + n_val >= n {
        return Err(Error::BadConfig(
            "split fractions leave no test nodes".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut out = ds.clone();
    out.train_mask = vec![false; n];
    out.val_mask = vec![false; n];
    out.test_mask = vec![false; n];
    for (rank, &node) in order.iter().enumerate() {
        if rank < n_train {
            out.train_mask[node] = true;
        } else if rank < n_train + n_val {
            out.val_mask[node] = true;
        } else {
            out.test_mask[node] = true;
        }
    }
    Ok(out)
}

/// The fixed citation-benchmark split: the first `per_class_train` nodes of
/// each class (in node order) train, the next `val_size` nodes validate, and
/// the last `test_size` nodes test.
///
/// When the dataset already carries masks from `split.tsv` those are kept
/// verbatim and this becomes a no-op.
pub fn planetoid_split(
    ds: &Dataset,
    per_class_train: usize,
    val_size: usize,
    test_size: usize,
) -> Result<Dataset> {
    if ds.has_split() {
        return Ok(ds.clone());
    }
    if per_class_train == 0 {
        return Err(Error::BadConfig("per_class_train must be positive".into()));
    }
    let n = ds.n();
    let mut out = ds.clone();
    out.train_mask = vec![false; n];
    out.val_mask = vec![false; n];
    out.test_mask = vec![false; n];

    let mut remaining: Vec<usize> = vec![per_class_train; ds.n_classes];
    let mut assigned = 0;
    for i in 0..n {
        let c = ds.y[i];
        if remaining[c] > 0 {
            remaining[c] -= 1;
            out.train_mask[i] = true;
            assigned += 1;
        }
    }
    if remaining.iter().any(|&r| r > 0) {
        return Err(Error::BadConfig(format!(
            "not enough labeled nodes for {per_class_train} training nodes per class"
        )));
    }

    let mut val_left = val_size;
    for i in 0..n {
        if val_left == 0 {
            break;
        }
        if !out.train_mask[i] {
            out.val_mask[i] = true;
            val_left -= 1;
        }
    }
    let mut test_left = test_size;
    for i in (0..n).rev() {
        if test_left == 0 {
            break;
        }
        if !out.train_mask[i] && !out.val_mask[i] && !out.test_mask[i] {
            out.test_mask[i] = true;
            test_left -= 1;
        }
    }
    if val_left > 0 || test_left > 0 || assigned + val_size + test_size > n {
        return Err(Error::BadConfig(
            "not enough nodes for the requested split sizes".into(),
        ));
    }
    out.validate()?;
    Ok(out)
}

/// Tiny two-channel fixture: node 0 emits on channel 0 and the middle node
/// (the hub, for a star) on channel 1; labels split nodes by which source is
/// closer.
pub fn synthetic_two_channel(n: usize, topology: Topology) -> Dataset {
    assert!(n >= 2, "need at least two nodes");
    let mid = n / 2;
    let edges: Vec<(usize, usize)> = match topology {
        Topology::Path => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Topology::Cycle => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        Topology::Star => (0..n).filter(|&i| i != mid).map(|i| (i, mid)).collect(),
    };
    let graph = Graph::from_edges(n, edges).expect("valid indices");

    let mut x = DenseMatrix::zeros((n, 2));
    x[[0, 0]] = 1.0;
    x[[mid, 1]] = 1.0;

    let d0 = bfs_distances(&graph, 0);
    let d1 = bfs_distances(&graph, mid);
    let y: Vec<usize> = (0..n).map(|i| usize::from(d0[i] > d1[i])).collect();
    let n_classes = y.iter().max().unwrap() + 1;

    Dataset {
        graph,
        x,
        y,
        n_classes,
        train_mask: vec![false; n],
        val_mask: vec![false; n],
        test_mask: vec![false; n],
    }
}

fn bfs_distances(g: &Graph, from: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); g.n()];
    for &(u, v) in g.edges() {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut dist = vec![usize::MAX; g.n()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn parse_i64(tok: &str, path: &Path, line: usize) -> Result<i64> {
    tok.trim().parse().map_err(|_| Error::DataFormat {
        path: path.to_path_buf(),
        line,
        msg: format!("bad integer `{tok}`"),
    })
}

fn parse_f64(tok: &str, path: &Path, id: i64) -> Result<f64> {
    tok.trim().parse().map_err(|_| Error::DataFormat {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("bad number `{tok}` in row of node {id}"),
    })
}

fn split_sparse_token(tok: &str, path: &Path, id: i64) -> Result<(usize, f64)> {
    let (c, v) = tok.split_once(':').ok_or_else(|| Error::DataFormat {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("expected col:val, got `{tok}` in row of node {id}"),
    })?;
    let col = c.parse().map_err(|_| Error::DataFormat {
        path: path.to_path_buf(),
        line: 0,
        msg: format!("bad column `{c}` in row of node {id}"),
    })?;
    Ok((col, parse_f64(v, path, id)?))
}
