use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed; entries that end up zero are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut trips: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &trips {
            if r >= rows || c >= cols {
                return Err(Error::contract(format!(
                    "triplet ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::numerical(format!("non-finite value at ({r}, {c})")));
            }
        }
        trips.sort_by_key(|t| (t.0, t.1));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values = Vec::with_capacity(trips.len());
        let mut i = 0;
        while i < trips.len() {
            let (r, c, mut v) = trips[i];
            i += 1;
            while i < trips.len() && trips[i].0 == r && trips[i].1 == c {
                v += trips[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let trips = (0..m.rows())
            .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, m.get(r, c)))
            .filter(|t| t.2 != 0.0);
        // Dense entries are finite and in range.
        Self::from_triplets(m.rows(), m.cols(), trips).expect("dense matrix is valid")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m.set(r, c, v);
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.triplets().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// `S · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::contract(format!(
                "mul_vec: vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }
}

/// Right-multiplies a dense `l × N` matrix by a sparse `N × N` matrix:
/// column `i` of the output is `Σ_j X[:, j] · S[j, i]`.
///
/// Contributions to every output entry are accumulated in ascending row
/// index of `S`, so the result is reproducible bit for bit.
pub fn spmm(s: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if s.rows() != x.cols() || s.cols() != x.cols() {
        return Err(Error::contract(format!(
            "spmm shape mismatch: X is {}x{}, S is {}x{}",
            x.rows(),
            x.cols(),
            s.rows(),
            s.cols()
        )));
    }
    let n = x.cols();
    let mut out = DenseMatrix::zeros(x.rows(), n);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for j in 0..s.rows() {
        let (cols, vals) = s.row(j);
        for (&i, &w) in cols.iter().zip(vals) {
            for a in 0..x.rows() {
                os[a * n + i] += xs[a * n + j] * w;
            }
        }
    }
    Ok(out)
}

/// `X · Sᵀ`: column `j` of the output is `Σ_i X[:, i] · S[j, i]`.
/// This is the adjoint of [`spmm`] and is what backpropagation through
/// `X ↦ X S` needs.
pub fn spmm_transpose(s: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if s.rows() != x.cols() || s.cols() != x.cols() {
        return Err(Error::contract(format!(
            "spmm_transpose shape mismatch: X is {}x{}, S is {}x{}",
            x.rows(),
            x.cols(),
            s.rows(),
            s.cols()
        )));
    }
    let n = x.cols();
    let mut out = DenseMatrix::zeros(x.rows(), n);
    let xs = x.as_slice();
    let os = out.as_mut_slice();
    for j in 0..s.rows() {
        let (cols, vals) = s.row(j);
        for a in 0..x.rows() {
            let mut acc = 0.0;
            for (&i, &w) in cols.iter().zip(vals) {
                acc += xs[a * n + i] * w;
            }
            os[a * n + j] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn dense_product(x: &DenseMatrix, s: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(x.rows(), s.cols());
        for a in 0..x.rows() {
            for i in 0..s.cols() {
                let mut acc = 0.0;
                for j in 0..x.cols() {
                    acc += x.get(a, j) * s.get(j, i);
                }
                out.set(a, i, acc);
            }
        }
        out
    }

    fn random_sparse(rng: &mut Rng, n: usize, density: f64) -> SparseMatrix {
        let mut trips = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if rng.uniform() < density {
                    trips.push((r, c, rng.uniform_range(-1.0, 1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, trips).unwrap()
    }

    #[test]
    fn identity_leaves_input_unchanged() {
        let x = DenseMatrix::from_fn(2, 3, |r, c| r as f64 * 3.0 - c as f64 + 0.25);
        assert_eq!(spmm(&SparseMatrix::identity(3), &x).unwrap(), x);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let x = DenseMatrix::from_fn(2, 3, |r, c| (r + c) as f64);
        assert_eq!(spmm(&SparseMatrix::zeros(3, 3), &x).unwrap(), DenseMatrix::zeros(2, 3));
    }

    #[test]
    fn random_instance_matches_dense_oracle() {
        let mut rng = Rng::new(7);
        let s = random_sparse(&mut rng, 6, 0.3);
        let x = DenseMatrix::from_fn(4, 6, |_, _| rng.uniform_range(-1.0, 1.0));
        let got = spmm(&s, &x).unwrap();
        let want = dense_product(&x, &s.to_dense());
        for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
            assert!((g - w).abs() <= 1e-12);
        }
        let got_t = spmm_transpose(&s, &x).unwrap();
        let want_t = dense_product(&x, &s.to_dense().transpose());
        for (g, w) in got_t.as_slice().iter().zip(want_t.as_slice()) {
            assert!((g - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let x = DenseMatrix::zeros(2, 4);
        assert!(matches!(
            spmm(&SparseMatrix::identity(3), &x),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn triplets_are_merged_and_zeros_dropped() {
        let s = SparseMatrix::from_triplets(2, 2, [(1, 0, 1.0), (0, 1, 2.0), (1, 0, -1.0), (0, 0, 0.0)])
            .unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.get(1, 0), 0.0);
    }
}
