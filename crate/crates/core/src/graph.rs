//! Per-class reciprocal nearest-neighbor affinity graphs.
//!
//! Given the `d × N` feature matrix of one class's extended example set,
//! [`build_affinity`] links `i` and `j` iff each is among the other's
//! `k_nn` most cosine-similar examples, with weight `max(0, v̂ᵢ·v̂ⱼ)`.
//! Two normalizations are derived from it:
//!
//! * [`normalize_row_stochastic`]: `D⁻¹(A + I)`, consumed by the GCN.
//! * [`normalize_symmetric`]: `D^{-1/2} A D^{-1/2}`, consumed by label propagation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::{dot, normalized, DenseMatrix, SparseMatrix};

/// Symmetric, nonnegative affinity matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityGraph {
    adjacency: SparseMatrix,
    k_nn: usize,
}

impl AffinityGraph {
    /// Wraps an explicit adjacency matrix after checking the graph invariants.
    pub fn from_adjacency(adjacency: SparseMatrix, k_nn: usize) -> Result<Self> {
        if adjacency.rows() != adjacency.cols() {
            return Err(Error::contract("adjacency must be square"));
        }
        for (r, c, v) in adjacency.triplets() {
            if r == c {
                return Err(Error::contract(format!("adjacency has diagonal entry at {r}")));
            }
            if v < 0.0 {
                return Err(Error::contract(format!("negative affinity at ({r}, {c})")));
            }
        }
        if !adjacency.is_symmetric() {
            return Err(Error::contract("adjacency is not symmetric"));
        }
        Ok(Self { adjacency, k_nn })
    }

    /// Graph with `n` vertices and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            adjacency: SparseMatrix::zeros(n, n),
            k_nn: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn k_nn(&self) -> usize {
        self.k_nn
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.triplets().filter(|&(i, j, _)| i < j)
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency.row_sum(i)
    }
}

/// `Ã = D⁻¹(A + I)` with `D = diag((A + I)·1)`. Rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAffinity {
    matrix: SparseMatrix,
}

impl NormalizedAffinity {
    /// The propagation matrix of an edgeless graph. A GCN using it is an MLP.
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: SparseMatrix::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

/// `S = D^{-1/2} A D^{-1/2}` with `D` the degree matrix of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymNormalizedAffinity {
    matrix: SparseMatrix,
}

impl SymNormalizedAffinity {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }
}

/// Top-`k` neighbors of every column by cosine similarity, self excluded.
/// Ties go to the smaller index.
fn top_k_neighbors(sims: &[Vec<f64>], k: usize) -> Vec<Vec<usize>> {
    let n = sims.len();
    (0..n)
        .map(|i| {
            let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            cand.sort_by(|&a, &b| sims[i][b].total_cmp(&sims[i][a]).then(a.cmp(&b)));
            cand.truncate(k);
            cand.sort_unstable();
            cand
        })
        .collect()
}

/// Builds the reciprocal `k_nn`-nearest-neighbor affinity graph over the
/// columns of `features` (`d × N`). Columns are L2-normalized first;
/// `ids` name the columns in error messages.
///
/// For classes with fewer than `k_nn + 1` examples every other example is a
/// candidate neighbor (`k = min(k_nn, N − 1)`).
pub fn build_affinity(features: &DenseMatrix, ids: &[String], k_nn: usize) -> Result<AffinityGraph> {
    let n = features.cols();
    if n == 0 || features.rows() == 0 {
        return Err(Error::contract("affinity graph needs at least one example of dimension ≥ 1"));
    }
    if ids.len() != n {
        return Err(Error::contract(format!("{} ids for {n} feature columns", ids.len())));
    }
    let unit: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            normalized(&features.column(j))
                .ok_or_else(|| Error::contract(format!("zero-norm feature vector for id {:?}", ids[j])))
        })
        .collect::<Result<_>>()?;

    let mut sims = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = dot(&unit[i], &unit[j]);
            sims[i][j] = s;
            sims[j][i] = s;
        }
    }

    let k = k_nn.min(n - 1);
    let neighbors = top_k_neighbors(&sims, k);
    let mut trips = Vec::new();
    for i in 0..n {
        for &j in &neighbors[i] {
            if j > i && neighbors[j].binary_search(&i).is_ok() && sims[i][j] > 0.0 {
                trips.push((i, j, sims[i][j]));
                trips.push((j, i, sims[i][j]));
            }
        }
    }
    Ok(AffinityGraph {
        adjacency: SparseMatrix::from_triplets(n, n, trips)?,
        k_nn,
    })
}

pub fn normalize_row_stochastic(g: &AffinityGraph) -> NormalizedAffinity {
    let n = g.n();
    let a = g.adjacency();
    let mut trips = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let degree = 1.0 + vals.iter().sum::<f64>();
        let mut self_done = false;
        for (&j, &w) in cols.iter().zip(vals) {
            if !self_done && j > i {
                trips.push((i, i, 1.0 / degree));
                self_done = true;
            }
            trips.push((i, j, w / degree));
        }
        if !self_done {
            trips.push((i, i, 1.0 / degree));
        }
    }
    NormalizedAffinity {
        matrix: SparseMatrix::from_triplets(n, n, trips).expect("normalized entries are finite"),
    }
}

pub fn normalize_symmetric(g: &AffinityGraph) -> SymNormalizedAffinity {
    let n = g.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = g.degree(i);
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let trips = g
        .adjacency()
        .triplets()
        .map(|(i, j, w)| (i, j, inv_sqrt[i] * w * inv_sqrt[j]));
    SymNormalizedAffinity {
        matrix: SparseMatrix::from_triplets(n, n, trips).expect("normalized entries are finite"),
    }
}

/// Debug dump of the edge list as `src_id,dst_id,weight`, one line per
/// undirected edge (`src < dst` by position).
pub fn write_edge_csv<W: Write>(mut out: W, g: &AffinityGraph, ids: &[String]) -> std::io::Result<()> {
    writeln!(out, "src_id,dst_id,weight")?;
    for (i, j, w) in g.edges() {
        writeln!(out, "{},{},{:.6}", ids[i], ids[j], w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn duplicates_connect_and_orthogonal_is_isolated() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let g = build_affinity(&v, &ids(3), 1).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.adjacency().get(0, 1), 1.0);
        assert_eq!(g.degree(2), 0.0);
    }

    #[test]
    fn antipodal_pair_is_clipped() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 2.0], vec![-1.0, -2.0]]).unwrap();
        let g = build_affinity(&v, &ids(2), 1).unwrap();
        assert_eq!(g.adjacency().nnz(), 0);
    }

    #[test]
    fn zero_vector_is_named() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let err = build_affinity(&v, &ids(2), 1).unwrap_err();
        assert!(err.to_string().contains("\"x1\""), "{err}");
    }

    #[test]
    fn single_example_graph() {
        let v = DenseMatrix::from_columns(&[vec![0.3, 0.4]]).unwrap();
        let g = build_affinity(&v, &ids(1), 50).unwrap();
        assert_eq!(g.n(), 1);
        let t = normalize_row_stochastic(&g);
        assert_eq!(t.matrix().get(0, 0), 1.0);
    }

    #[test]
    fn row_stochastic_small_cases() {
        let t = normalize_row_stochastic(&AffinityGraph::empty(3));
        assert_eq!(t.matrix().to_dense(), DenseMatrix::identity(3));

        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let g = AffinityGraph::from_adjacency(a, 1).unwrap();
        let t = normalize_row_stochastic(&g);
        assert_eq!(t.matrix().to_dense().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn symmetric_small_cases() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let g = AffinityGraph::from_adjacency(a.clone(), 1).unwrap();
        assert_eq!(normalize_symmetric(&g).matrix(), &a);

        let a = SparseMatrix::from_triplets(3, 3, [(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        let s = normalize_symmetric(&AffinityGraph::from_adjacency(a, 1).unwrap());
        for k in 0..3 {
            assert_eq!(s.matrix().get(2, k), 0.0);
            assert_eq!(s.matrix().get(k, 2), 0.0);
        }
    }

    #[test]
    fn from_adjacency_rejects_asymmetry_and_loops() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
        assert!(AffinityGraph::from_adjacency(a, 1).is_err());
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0)]).unwrap();
        assert!(AffinityGraph::from_adjacency(a, 1).is_err());
    }

    #[test]
    fn edge_csv_has_six_decimals() {
        let v = DenseMatrix::from_columns(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let g = build_affinity(&v, &ids(2), 1).unwrap();
        let mut buf = Vec::new();
        write_edge_csv(&mut buf, &g, &ids(2)).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "src_id,dst_id,weight\nx0,x1,0.707107\n");
    }
}
