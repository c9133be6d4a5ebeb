//! Symmetric-matrix storage and matrix-vector products.
//!
//! Only one triangle is ever accepted from callers, so the represented
//! matrix is exactly symmetric by construction. Two layouts are provided:
//! a packed dense lower triangle and a compressed sparse layout built from
//! lower-triangle triplets. Every product computes output entry `i` with a
//! fixed summation order (row part by ascending column, then the mirrored
//! column part by ascending row), which makes the parallel and sequential
//! paths bitwise identical.

use thiserror::Error;

/// Dimension threshold below which `from_triplets` picks the dense layout.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("entry ({i},{j}) lies in the upper triangle; store the lower triangle only")]
    UpperTriangleEntry { i: usize, j: usize },
    #[error("entry ({i},{j}) out of bounds for dimension {n}")]
    OutOfBounds { i: usize, j: usize, n: usize },
    #[error("non-finite value at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("vector length {got} does not match matrix dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone)]
enum Storage {
    /// Packed lower triangle, row major: entry (i,j), j <= i at i*(i+1)/2 + j.
    Dense(Vec<f64>),
    /// Lower triangle rows plus the mirrored strict upper rows, both in
    /// compressed form, so each output row is a pair of gather loops.
    Sparse {
        lower_ptr: Vec<usize>,
        lower_col: Vec<usize>,
        lower_val: Vec<f64>,
        upper_ptr: Vec<usize>,
        upper_col: Vec<usize>,
        upper_val: Vec<f64>,
    },
}

/// Symmetric matrix of order `n`.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    n: usize,
    storage: Storage,
}

impl SymMatrix {
    /// Build from a packed dense lower triangle (row major, length n(n+1)/2).
    pub fn from_packed_lower(n: usize, packed: Vec<f64>) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        assert_eq!(packed.len(), n * (n + 1) / 2, "packed length mismatch");
        for (idx, v) in packed.iter().enumerate() {
            if !v.is_finite() {
                let (i, j) = unpack_index(idx);
                return Err(MatrixError::NonFinite { i, j });
            }
        }
        Ok(Self {
            n,
            storage: Storage::Dense(packed),
        })
    }

    /// Build a dense matrix from a callback over the lower triangle.
    pub fn dense_from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        let mut packed = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                packed.push(f(i, j));
            }
        }
        Self::from_packed_lower(n, packed)
    }

    /// Build from lower-triangle triplets `(i, j, v)` with `i >= j`.
    /// Duplicates are summed. Layout follows [`DENSE_LIMIT`].
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, MatrixError> {
        if n < DENSE_LIMIT {
            Self::from_triplets_dense(n, entries)
        } else {
            Self::from_triplets_sparse(n, entries)
        }
    }

    /// Triplet constructor forcing the dense layout.
    pub fn from_triplets_dense(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        validate_triplets(n, entries)?;
        let mut packed = vec![0.0; n * (n + 1) / 2];
        for &(i, j, v) in entries {
            packed[i * (i + 1) / 2 + j] += v;
        }
        Ok(Self {
            n,
            storage: Storage::Dense(packed),
        })
    }

    /// Triplet constructor forcing the sparse layout.
    pub fn from_triplets_sparse(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, MatrixError> {
        if n == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        validate_triplets(n, entries)?;

        // Sort by (row, col), stable, then merge duplicates in input order.
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }

        let mut lower_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &merged {
            lower_ptr[i + 1] += 1;
        }
        for i in 0..n {
            lower_ptr[i + 1] += lower_ptr[i];
        }
        let mut lower_col = Vec::with_capacity(merged.len());
        let mut lower_val = Vec::with_capacity(merged.len());
        for &(_, j, v) in &merged {
            lower_col.push(j);
            lower_val.push(v);
        }

        // Mirror of the strict lower triangle: row j gains column i for each
        // stored (i, j) with i > j. Sorted by (j, i) for the gather loop.
        let mut mirror: Vec<(usize, usize, f64)> = merged
            .iter()
            .filter(|&&(i, j, _)| i > j)
            .map(|&(i, j, v)| (j, i, v))
            .collect();
        mirror.sort_by_key(|&(r, c, _)| (r, c));
        let mut upper_ptr = vec![0usize; n + 1];
        for &(r, _, _) in &mirror {
            upper_ptr[r + 1] += 1;
        }
        for i in 0..n {
            upper_ptr[i + 1] += upper_ptr[i];
        }
        let mut upper_col = Vec::with_capacity(mirror.len());
        let mut upper_val = Vec::with_capacity(mirror.len());
        for &(_, c, v) in &mirror {
            upper_col.push(c);
            upper_val.push(v);
        }

        Ok(Self {
            n,
            storage: Storage::Sparse {
                lower_ptr,
                lower_col,
                lower_val,
                upper_ptr,
                upper_col,
                upper_val,
            },
        })
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        Self::dense_from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 }).expect("n >= 1")
    }

    /// Diagonal matrix from its entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self, MatrixError> {
        let n = diag.len();
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets_dense(n, &entries)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Entry (i, j); either triangle may be requested.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        match &self.storage {
            Storage::Dense(packed) => packed[i * (i + 1) / 2 + j],
            Storage::Sparse {
                lower_ptr,
                lower_col,
                lower_val,
                ..
            } => {
                let row = &lower_col[lower_ptr[i]..lower_ptr[i + 1]];
                match row.binary_search(&j) {
                    Ok(k) => lower_val[lower_ptr[i] + k],
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Gershgorin bound on the spectral radius: max_i sum_j |a_ij|.
    pub fn gershgorin_bound(&self) -> f64 {
        let mut row_sums = vec![0.0f64; self.n];
        self.for_each_lower(|i, j, v| {
            row_sums[i] += v.abs();
            if i != j {
                row_sums[j] += v.abs();
            }
        });
        row_sums.into_iter().fold(0.0, f64::max)
    }

    /// Visit every stored lower-triangle entry.
    pub fn for_each_lower(&self, mut f: impl FnMut(usize, usize, f64)) {
        match &self.storage {
            Storage::Dense(packed) => {
                let mut idx = 0;
                for i in 0..self.n {
                    for j in 0..=i {
                        f(i, j, packed[idx]);
                        idx += 1;
                    }
                }
            }
            Storage::Sparse {
                lower_ptr,
                lower_col,
                lower_val,
                ..
            } => {
                for i in 0..self.n {
                    for k in lower_ptr[i]..lower_ptr[i + 1] {
                        f(i, lower_col[k], lower_val[k]);
                    }
                }
            }
        }
    }

    fn row_product(&self, i: usize, v: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(packed) => {
                let base = i * (i + 1) / 2;
                let mut sum = 0.0;
                for j in 0..=i {
                    sum += packed[base + j] * v[j];
                }
                for j in (i + 1)..self.n {
                    sum += packed[j * (j + 1) / 2 + i] * v[j];
                }
                sum
            }
            Storage::Sparse {
                lower_ptr,
                lower_col,
                lower_val,
                upper_ptr,
                upper_col,
                upper_val,
            } => {
                let mut sum = 0.0;
                for k in lower_ptr[i]..lower_ptr[i + 1] {
                    sum += lower_val[k] * v[lower_col[k]];
                }
                for k in upper_ptr[i]..upper_ptr[i + 1] {
                    sum += upper_val[k] * v[upper_col[k]];
                }
                sum
            }
        }
    }

    /// `y = Q v`, sequential kernel.
    pub fn matvec_seq_into(&self, v: &[f64], y: &mut [f64]) -> Result<(), MatrixError> {
        self.check_dim(v)?;
        self.check_dim(y)?;
        for i in 0..self.n {
            y[i] = self.row_product(i, v);
        }
        Ok(())
    }

    /// `y = Q v`; row-parallel when the `parallel` feature is enabled and the
    /// matrix is large enough to amortize the fork, otherwise sequential.
    /// Output is bitwise identical across both paths.
    pub fn matvec_into(&self, v: &[f64], y: &mut [f64]) -> Result<(), MatrixError> {
        self.check_dim(v)?;
        self.check_dim(y)?;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if self.n >= 256 {
                y.par_iter_mut()
                    .enumerate()
                    .for_each(|(i, yi)| *yi = self.row_product(i, v));
                return Ok(());
            }
        }
        self.matvec_seq_into(v, y)
    }

    /// Allocating form of [`SymMatrix::matvec_into`].
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(v, &mut y)?;
        Ok(y)
    }

    /// Allocating form of the sequential kernel.
    pub fn matvec_seq(&self, v: &[f64]) -> Result<Vec<f64>, MatrixError> {
        let mut y = vec![0.0; self.n];
        self.matvec_seq_into(v, &mut y)?;
        Ok(y)
    }

    /// `y = (Q + sigma I) v`
    pub fn shifted_matvec_into(&self, sigma: f64, v: &[f64], y: &mut [f64]) -> Result<(), MatrixError> {
        self.matvec_into(v, y)?;
        for i in 0..self.n {
            y[i] += sigma * v[i];
        }
        Ok(())
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), MatrixError> {
        if v.len() != self.n {
            Err(MatrixError::DimensionMismatch {
                got: v.len(),
                want: self.n,
            })
        } else {
            Ok(())
        }
    }
}

fn validate_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<(), MatrixError> {
    for &(i, j, v) in entries {
        if i >= n || j >= n {
            return Err(MatrixError::OutOfBounds { i, j, n });
        }
        if j > i {
            return Err(MatrixError::UpperTriangleEntry { i, j });
        }
        if !v.is_finite() {
            return Err(MatrixError::NonFinite { i, j });
        }
    }
    Ok(())
}

fn unpack_index(idx: usize) -> (usize, usize) {
    let mut i = 0usize;
    while (i + 1) * (i + 2) / 2 <= idx {
        i += 1;
    }
    (i, idx - i * (i + 1) / 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops;
    use proptest::prelude::*;

    #[test]
    fn identity_matvec() {
        let q = SymMatrix::identity(3);
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(q.matvec(&v).unwrap(), v);
    }

    #[test]
    fn diagonal_matvec_example() {
        let q = SymMatrix::from_diagonal(&[-1.0, 1.0]).unwrap();
        let y = q.matvec(&[0.0, -1.8]).unwrap();
        assert_eq!(y, vec![0.0, -1.8]);
    }

    #[test]
    fn zero_matrix_annihilates() {
        let q = SymMatrix::from_triplets(4, &[]).unwrap();
        let y = q.matvec(&[1.0, -2.0, 3.5, 0.25]).unwrap();
        assert_eq!(y, vec![0.0; 4]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let q = SymMatrix::identity(3);
        assert_eq!(
            q.matvec(&[1.0, 2.0]).unwrap_err(),
            MatrixError::DimensionMismatch { got: 2, want: 3 }
        );
    }

    #[test]
    fn upper_triangle_entry_rejected() {
        let err = SymMatrix::from_triplets(3, &[(0, 2, 1.0)]).unwrap_err();
        assert_eq!(err, MatrixError::UpperTriangleEntry { i: 0, j: 2 });
    }

    #[test]
    fn sparse_and_dense_agree() {
        let entries = vec![
            (0, 0, 2.0),
            (1, 0, -1.0),
            (1, 1, 3.0),
            (2, 1, 0.5),
            (2, 2, -4.0),
            (3, 0, 1.5),
            (3, 3, 7.0),
        ];
        let dense = SymMatrix::from_triplets_dense(4, &entries).unwrap();
        let sparse = SymMatrix::from_triplets_sparse(4, &entries).unwrap();
        let v = vec![0.3, -1.2, 2.0, 0.7];
        let yd = dense.matvec(&v).unwrap();
        let ys = sparse.matvec(&v).unwrap();
        assert_eq!(yd, ys);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dense.get(i, j), sparse.get(i, j));
            }
        }
    }

    #[test]
    fn parallel_path_matches_sequential_bitwise() {
        // 300 > the parallel dispatch threshold.
        let n = 300usize;
        let mut entries = Vec::new();
        for i in 0..n {
            for j in (i.saturating_sub(3))..=i {
                entries.push((i, j, ((i * 31 + j * 17) % 13) as f64 - 6.0));
            }
        }
        let q = SymMatrix::from_triplets_dense(n, &entries).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let a = q.matvec(&v).unwrap();
        let b = q.matvec_seq(&v).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    proptest! {
        // matvec is linear to 1e-12 relative for random inputs.
        #[test]
        fn matvec_linearity(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..20usize);
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..=i {
                    entries.push((i, j, rng.gen_range(-5.0..5.0)));
                }
            }
            let q = SymMatrix::from_triplets(n, &entries).unwrap();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let mut combo = vec![0.0; n];
            for i in 0..n {
                combo[i] = a * u[i] + b * v[i];
            }
            let lhs = q.matvec(&combo).unwrap();
            let qu = q.matvec(&u).unwrap();
            let qv = q.matvec(&v).unwrap();
            let scale = 1.0 + vecops::norm(&lhs);
            for i in 0..n {
                let rhs = a * qu[i] + b * qv[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale);
            }
        }
    }
}
