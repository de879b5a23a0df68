//! Compressed-sparse-row storage with a shareable sparsity pattern.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row pointers and sorted, unique column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    pub fn new(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[nrows] != col_idx.len() {
            return Err(Error::Dimension("inconsistent CSR row pointers".into()));
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(Error::Contract(format!("row {r} columns not sorted/unique/in range")));
            }
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx })
    }

    /// Builds a pattern from per-row column lists (sorted and deduplicated here).
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Result<Self> {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self::new(nrows, ncols, row_ptr, col_idx)
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Storage slot of entry `(r, c)`, if it is structurally present.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|p| start + p)
    }

    /// Pattern restricted to the rows and columns in `keep` (sorted), along
    /// with the source slot of every retained entry.
    pub fn submatrix(&self, keep: &[usize]) -> (CsrPattern, Vec<usize>) {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut src = Vec::new();
        row_ptr.push(0);
        for &r in keep {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = map[self.col_idx[p]];
                if c != usize::MAX {
                    col_idx.push(c);
                    src.push(p);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let pattern = CsrPattern { nrows: keep.len(), ncols: keep.len(), row_ptr, col_idx };
        (pattern, src)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    pattern: Arc<CsrPattern>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn new(pattern: Arc<CsrPattern>, values: Vec<T>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::Dimension(format!(
                "{} values for a pattern with {} entries",
                values.len(),
                pattern.nnz()
            )));
        }
        Ok(Self { pattern, values })
    }

    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        Self { pattern: Arc::new(CsrPattern::identity(n)), values: vec![T::one(); n] }
    }

    /// Builds a matrix from a dense row-major array, keeping nonzeros.
    pub fn from_dense(n: usize, m: usize, dense: &[T]) -> Self {
        let rows = (0..n)
            .map(|i| (0..m).filter(|&j| dense[i * m + j] != T::zero()).collect())
            .collect();
        let pattern = Arc::new(CsrPattern::from_rows(m, rows).expect("valid dense pattern"));
        let values = (0..n)
            .flat_map(|i| pattern.row(i).iter().map(move |&j| dense[i * m + j]).collect::<Vec<_>>())
            .collect();
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.pattern.find(r, c).map_or(T::zero(), |p| self.values[p])
    }

    pub fn shares_pattern(&self, other_pattern: &CsrPattern) -> bool {
        *self.pattern == *other_pattern
    }

    /// `y = A x`
    pub fn matvec_into<S>(&self, x: &[S], y: &mut [S])
    where
        S: Scalar + From<T>,
    {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = S::zero();
            for p in rp[r]..rp[r + 1] {
                acc += S::from(self.values[p]) * x[ci[p]];
            }
            *yr = acc;
        }
    }

    pub fn matvec<S>(&self, x: &[S]) -> Vec<S>
    where
        S: Scalar + From<T>,
    {
        let mut y = vec![S::zero(); self.nrows()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x^H A y`, summed row by row in storage order.
    pub fn sesquilinear<S>(&self, x: &[S], y: &[S]) -> S
    where
        S: Scalar + From<T>,
    {
        let rp = &self.pattern.row_ptr;
        let ci = &self.pattern.col_idx;
        let mut total = S::zero();
        for r in 0..self.nrows() {
            let mut acc = S::zero();
            for p in rp[r]..rp[r + 1] {
                acc += S::from(self.values[p]) * y[ci[p]];
            }
            total += x[r].conj() * acc;
        }
        total
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows()).map(|r| self.get(r, r)).collect()
    }

    /// Largest entrywise asymmetry `|A_ij - A_ji|` relative to `max |A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for r in 0..self.nrows() {
            for p in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.col_idx[p];
                let v = self.values[p];
                scale = scale.max(v.abs());
                let t = self.get(c, r);
                worst = worst.max((v - t).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `self <- a * self + b * other` on a shared pattern.
    pub fn axpby(&mut self, a: T, b: T, other: &CsrMatrix<T>) -> Result<()> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && *self.pattern != *other.pattern {
            return Err(Error::Dimension("axpby on different sparsity patterns".into()));
        }
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s = a * *s + b * *o;
        }
        Ok(())
    }

    /// Rows and columns in `keep` (sorted), in order.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix<T> {
        let (pattern, src) = self.pattern.submatrix(keep);
        let values = src.iter().map(|&p| self.values[p]).collect();
        CsrMatrix { pattern: Arc::new(pattern), values }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let m = self.ncols();
        let mut d = vec![T::zero(); self.nrows() * m];
        for r in 0..self.nrows() {
            for p in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                d[r * m + self.pattern.col_idx[p]] = self.values[p];
            }
        }
        d
    }

    pub fn scaled(&self, a: T) -> CsrMatrix<T> {
        CsrMatrix { pattern: self.pattern.clone(), values: self.values.iter().map(|&v| a * v).collect() }
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}
