//! Undirected graphs and their Laplacian / propagation operators.
//!
//! Edges are canonicalized at construction: symmetrized, deduplicated, and
//! stored once as `(min, max)` pairs. Self-loops are never stored; they enter
//! only through the augmentation flag (`Ã = A + I`) when operators are built.

use crate::{Error, Result, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    /// `L = D - A`
    Unnormalized,
    /// `L_sym = D^{-1/2} L D^{-1/2}`
    Sym,
    /// `L_rw = D^{-1} L`
    Rw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

/// Node degrees, optionally from the self-loop-augmented adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector {
    pub d: Vec<f64>,
    pub augmented: bool,
}

impl Graph {
    /// Builds a graph from an edge list. Input pairs may appear in either
    /// orientation and more than once; self-loops are ignored.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::IndexOutOfRange {
                    row: u,
                    col: v,
                    n_rows: n,
                    n_cols: n,
                });
            }
            if u != v {
                canon.push((u.min(v), u.max(v)));
            }
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Self { n, edges: canon })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degree_vector(&self, augmented: bool) -> DegreeVector {
        let mut d = vec![if augmented { 1.0 } else { 0.0 }; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1.0;
            d[v] += 1.0;
        }
        DegreeVector { d, augmented }
    }

    /// Adjacency matrix, with unit self-loops when `self_loops` is set.
    pub fn adjacency(&self, self_loops: bool) -> SparseMatrix {
        let mut entries = Vec::with_capacity(self.edges.len() * 2 + self.n);
        for &(u, v) in &self.edges {
            entries.push((u, v, 1.0));
            entries.push((v, u, 1.0));
        }
        if self_loops {
            for i in 0..self.n {
                entries.push((i, i, 1.0));
            }
        }
        SparseMatrix::from_coo(entries, self.n, self.n).expect("indices validated")
    }

    /// Builds the requested Laplacian.
    ///
    /// Normalized kinds without self-loop augmentation require every node to
    /// have positive degree. Off-diagonal pairs are pushed with the identical
    /// computed value for `(u,v)` and `(v,u)`, so the `Sym` variant is exactly
    /// symmetric rather than symmetric up to rounding.
    pub fn laplacian(&self, kind: LaplacianKind, self_loops: bool) -> Result<SparseMatrix> {
        let deg = self.degree_vector(self_loops).d;
        if kind != LaplacianKind::Unnormalized {
            if let Some(node) = deg.iter().position(|&d| d == 0.0) {
                return Err(Error::DegenerateDegree { node });
            }
        }
        let loop_w = if self_loops { 1.0 } else { 0.0 };
        let mut entries = Vec::with_capacity(self.edges.len() * 2 + self.n);
        for i in 0..self.n {
            let diag = match kind {
                LaplacianKind::Unnormalized => deg[i] - loop_w,
                LaplacianKind::Sym | LaplacianKind::Rw => 1.0 - loop_w / deg[i],
            };
            entries.push((i, i, diag));
        }
        for &(u, v) in &self.edges {
            match kind {
                LaplacianKind::Unnormalized => {
                    entries.push((u, v, -1.0));
                    entries.push((v, u, -1.0));
                }
                LaplacianKind::Sym => {
                    let w = -1.0 / (deg[u] * deg[v]).sqrt();
                    entries.push((u, v, w));
                    entries.push((v, u, w));
                }
                LaplacianKind::Rw => {
                    entries.push((u, v, -1.0 / deg[u]));
                    entries.push((v, u, -1.0 / deg[v]));
                }
            }
        }
        SparseMatrix::from_coo(entries, self.n, self.n)
    }

    /// The GCN propagation operator `S = D̃^{-1/2} Ã D̃^{-1/2}`.
    ///
    /// Entries are chosen so that `S + L̃_sym = I` holds exactly: off-diagonal
    /// values are the exact negations of the Laplacian's, and for degrees
    /// `d̃ ≥ 1` the diagonal sum `1/d̃ + (1 - 1/d̃)` rounds to 1 exactly.
    pub fn gcn_propagation(&self) -> SparseMatrix {
        let deg = self.degree_vector(true).d;
        let mut entries = Vec::with_capacity(self.edges.len() * 2 + self.n);
        for i in 0..self.n {
            entries.push((i, i, 1.0 / deg[i]));
        }
        for &(u, v) in &self.edges {
            let w = 1.0 / (deg[u] * deg[v]).sqrt();
            entries.push((u, v, w));
            entries.push((v, u, w));
        }
        SparseMatrix::from_coo(entries, self.n, self.n).expect("indices validated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn p2() -> Graph {
        Graph::from_edges(2, [(0, 1)]).unwrap()
    }

    fn k3() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    #[test]
    fn edges_symmetrized_and_deduped() {
        let g = Graph::from_edges(3, [(1, 0), (0, 1), (0, 1), (2, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn p2_sym_augmented_laplacian() {
        let l = p2().laplacian(LaplacianKind::Sym, true).unwrap().to_dense();
        assert_eq!(l, array![[0.5, -0.5], [-0.5, 0.5]]);
    }

    #[test]
    fn unnormalized_rows_sum_to_zero() {
        for g in [p2(), k3(), Graph::from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)]).unwrap()] {
            for self_loops in [false, true] {
                let l = g
                    .laplacian(LaplacianKind::Unnormalized, self_loops)
                    .unwrap()
                    .to_dense();
                for row in l.rows() {
                    assert!(row.sum().abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn k3_rw_augmented() {
        let l = k3().laplacian(LaplacianKind::Rw, true).unwrap().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 2.0 / 3.0 } else { -1.0 / 3.0 };
                assert!((l[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rw_rows_sum_to_zero() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)])
            .unwrap();
        let l = g.laplacian(LaplacianKind::Rw, true).unwrap().to_dense();
        for row in l.rows() {
            assert!(row.sum().abs() < 1e-14);
        }
    }

    #[test]
    fn sym_laplacian_exactly_symmetric() {
        let g = Graph::from_edges(7, [(0, 1), (0, 2), (1, 3), (2, 4), (4, 5), (5, 6), (1, 6)])
            .unwrap();
        assert!(g.laplacian(LaplacianKind::Sym, true).unwrap().is_symmetric());
    }

    #[test]
    fn isolated_node_needs_augmentation() {
        let g = Graph::from_edges(3, [(0, 1)]).unwrap();
        assert!(matches!(
            g.laplacian(LaplacianKind::Sym, false),
            Err(Error::DegenerateDegree { node: 2 })
        ));
        assert!(g.laplacian(LaplacianKind::Sym, true).is_ok());
        assert!(g.laplacian(LaplacianKind::Unnormalized, false).is_ok());
    }

    #[test]
    fn gcn_propagation_p2_and_k3() {
        assert_eq!(
            p2().gcn_propagation().to_dense(),
            array![[0.5, 0.5], [0.5, 0.5]]
        );
        let s = k3().gcn_propagation().to_dense();
        for v in s.iter() {
            assert!((*v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn propagation_is_identity_minus_sym_laplacian() {
        let g = Graph::from_edges(8, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 5), (4, 5), (5, 6), (6, 7)])
            .unwrap();
        let s = g.gcn_propagation().to_dense();
        let l = g.laplacian(LaplacianKind::Sym, true).unwrap().to_dense();
        let sum = &s + &l;
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (sum[[i, j]] - want).abs() < 1e-14,
                    "S + L deviates from I at ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn rw_similar_to_sym() {
        // L_rw = D̃^{-1/2} L_sym D̃^{1/2}
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]).unwrap();
        let deg = g.degree_vector(true).d;
        let l_sym = g.laplacian(LaplacianKind::Sym, true).unwrap().to_dense();
        let l_rw = g.laplacian(LaplacianKind::Rw, true).unwrap().to_dense();
        for i in 0..6 {
            for j in 0..6 {
                let conj = l_sym[[i, j]] * (deg[j] / deg[i]).sqrt();
                assert!((conj - l_rw[[i, j]]).abs() < 1e-12);
            }
        }
    }
}
