//! Sparse `L D L^T` factorization of symmetric (real or complex symmetric)
//! matrices, up-looking by rows of `L`, without pivoting.
//!
//! Complex symmetric matrices of the form `H + iS` with `H` positive definite
//! and `S` real symmetric admit this factorization stably, which covers the
//! Crank-Nicolson step matrix after scaling by `-i tau`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Ordering, SolveReport};
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, CsrPattern};

const NONE: usize = usize::MAX;

/// Ordering, elimination tree and column counts for one sparsity pattern.
#[derive(Debug, Clone)]
pub struct LdltSymbolic {
    pattern: Arc<CsrPattern>,
    perm: Vec<usize>,
    // upper triangle of P A P^T by columns, with source slots into A
    cp: Vec<usize>,
    ci: Vec<usize>,
    src: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

impl LdltSymbolic {
    /// The pattern must be structurally symmetric.
    pub fn analyze(pattern: &Arc<CsrPattern>, ordering: &Ordering) -> Result<Self> {
        let n = pattern.nrows();
        if pattern.ncols() != n {
            return Err(Error::Dimension("factorization needs a square matrix".into()));
        }
        let perm = ordering.permutation(n);
        let mut pinv = vec![NONE; n];
        for (new, &old) in perm.iter().enumerate() {
            pinv[old] = new;
        }
        let mut cp = Vec::with_capacity(n + 1);
        let mut ci = Vec::new();
        let mut src = Vec::new();
        cp.push(0);
        let mut col: Vec<(usize, usize)> = Vec::new();
        for &old in &perm {
            let k = cp.len() - 1;
            col.clear();
            let start = pattern.row_ptr()[old];
            for (off, &c) in pattern.row(old).iter().enumerate() {
                let nc = pinv[c];
                if nc <= k {
                    col.push((nc, start + off));
                }
            }
            col.sort_unstable();
            for &(r, s) in &col {
                ci.push(r);
                src.push(s);
            }
            cp.push(ci.len());
        }

        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for k in 0..n {
            flag[k] = k;
            for &i0 in &ci[cp[k]..cp[k + 1]] {
                let mut i = i0;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = Vec::with_capacity(n + 1);
        lp.push(0);
        for k in 0..n {
            lp.push(lp[k] + lnz[k]);
        }
        Ok(Self { pattern: pattern.clone(), perm, cp, ci, src, parent, lp })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Number of strictly-lower entries of `L`.
    pub fn nnz_l(&self) -> usize {
        self.lp[self.n()]
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn matches(&self, pattern: &Arc<CsrPattern>) -> bool {
        Arc::ptr_eq(&self.pattern, pattern) || *self.pattern == **pattern
    }
}

/// Numeric factors `P A P^T = L D L^T`.
#[derive(Debug, Clone)]
pub struct LdltFactor<T> {
    sym: Arc<LdltSymbolic>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
}

impl<T: Scalar> LdltFactor<T> {
    pub fn factor(sym: Arc<LdltSymbolic>, a: &CsrMatrix<T>) -> Result<Self> {
        if !sym.matches(a.pattern()) {
            return Err(Error::Dimension("matrix pattern differs from the analyzed pattern".into()));
        }
        let n = sym.n();
        let av = a.values();
        let nnz = sym.nnz_l();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![T::zero(); nnz];
        let mut d = vec![T::zero(); n];
        let mut y = vec![T::zero(); n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in sym.cp[k]..sym.cp[k + 1] {
                let mut i = sym.ci[p];
                y[i] += av[sym.src[p]];
                let mut len = 0;
                while flag[i] != k {
                    stack[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = sym.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    stack[top] = stack[len];
                }
            }
            let mut dk = y[k];
            y[k] = T::zero();
            for &i in &stack[top..n] {
                let yi = y[i];
                y[i] = T::zero();
                let p2 = sym.lp[i] + lnz[i];
                for p in sym.lp[i]..p2 {
                    let r = li[p];
                    y[r] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                dk -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if !(dk.abs() > 0.0) || !dk.abs().is_finite() {
                return Err(Error::SolverFailure {
                    reason: format!("zero or non-finite pivot at elimination step {k}"),
                    report: SolveReport::default(),
                });
            }
            d[k] = dk;
        }
        Ok(Self { sym, li, lx, d })
    }

    pub fn symbolic(&self) -> &Arc<LdltSymbolic> {
        &self.sym
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Pivots `D`, in elimination order.
    pub fn diagonal(&self) -> &[T] {
        &self.d
    }

    /// Solves `A x = b` in place of `x`.
    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        let n = self.n();
        let perm = &self.sym.perm;
        let lp = &self.sym.lp;
        let mut y: Vec<T> = perm.iter().map(|&o| b[o]).collect();
        for j in 0..n {
            let yj = y[j];
            for p in lp[j]..lp[j + 1] {
                y[self.li[p]] -= self.lx[p] * yj;
            }
        }
        for (v, dj) in y.iter_mut().zip(&self.d) {
            *v /= *dj;
        }
        for j in (0..n).rev() {
            let mut acc = y[j];
            for p in lp[j]..lp[j + 1] {
                acc -= self.lx[p] * y[self.li[p]];
            }
            y[j] = acc;
        }
        for (k, &o) in perm.iter().enumerate() {
            x[o] = y[k];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n()];
        self.solve_into(b, &mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplace_2d(m: usize) -> (CsrMatrix<f64>, Vec<(usize, usize)>) {
        let n = m * m;
        let mut dense = vec![0.0; n * n];
        let mut coords = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let r = j * m + i;
                coords.push((i + 1, j + 1));
                dense[r * n + r] = 4.0;
                if i > 0 {
                    dense[r * n + r - 1] = -1.0;
                }
                if i + 1 < m {
                    dense[r * n + r + 1] = -1.0;
                }
                if j > 0 {
                    dense[r * n + r - m] = -1.0;
                }
                if j + 1 < m {
                    dense[r * n + r + m] = -1.0;
                }
            }
        }
        (CsrMatrix::from_dense(n, n, &dense), coords)
    }

    #[test]
    fn solves_small_spd() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let sym = Arc::new(LdltSymbolic::analyze(a.pattern(), &Ordering::Natural).unwrap());
        let f = LdltFactor::factor(sym, &a).unwrap();
        let x = f.solve(&[3.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orderings_agree_on_grid_laplacian() {
        let (a, coords) = laplace_2d(15);
        let b: Vec<f64> = (0..a.nrows()).map(|i| (i as f64 * 0.37).sin()).collect();
        let nat = Arc::new(LdltSymbolic::analyze(a.pattern(), &Ordering::Natural).unwrap());
        let nd = Arc::new(
            LdltSymbolic::analyze(a.pattern(), &Ordering::Lattice { coords: Arc::new(coords), stride: 1 }).unwrap(),
        );
        assert!(nd.nnz_l() < nat.nnz_l());
        let x1 = LdltFactor::factor(nat, &a).unwrap().solve(&b);
        let x2 = LdltFactor::factor(nd, &a).unwrap().solve(&b);
        let r: Vec<f64> = a.matvec(&x2);
        for i in 0..b.len() {
            assert!((x1[i] - x2[i]).abs() < 1e-12);
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_symmetric_shifted() {
        let (k, coords) = laplace_2d(8);
        let n = k.nrows();
        let mut a = k.to_complex();
        for r in 0..n {
            let p = a.pattern().find(r, r).unwrap();
            a.values_mut()[p] += Complex64::new(0.0, 50.0);
        }
        let sym = Arc::new(LdltSymbolic::analyze(a.pattern(), &Ordering::Lattice { coords: Arc::new(coords), stride: 1 }).unwrap());
        let f = LdltFactor::factor(sym, &a).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0, i as f64)).collect();
        let x = f.solve(&b);
        let r: Vec<Complex64> = a.matvec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reports_failure() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let sym = Arc::new(LdltSymbolic::analyze(a.pattern(), &Ordering::Natural).unwrap());
        assert!(matches!(LdltFactor::factor(sym, &a), Err(Error::SolverFailure { .. })));
    }
}
