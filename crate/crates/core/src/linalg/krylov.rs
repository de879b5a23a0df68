//! Preconditioned Krylov iterations. Convergence is declared on the true
//! residual `b - A x`, recomputed whenever the recursive residual meets the
//! target, so stagnating recurrences restart instead of reporting success.

use crate::linalg::LdltFactor;
use crate::scalar::{dotc, norm2, Scalar};
use crate::sparse::CsrMatrix;

pub trait Preconditioner<T>: Send + Sync {
    fn apply(&self, r: &[T], z: &mut [T]);
}

pub struct IdentityPreconditioner;

impl<T: Scalar> Preconditioner<T> for IdentityPreconditioner {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi<T> {
    inv_diag: Vec<T>,
}

impl<T: Scalar> Jacobi<T> {
    pub fn new(a: &CsrMatrix<T>) -> Self {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d == T::zero() { T::one() } else { T::one() / d })
            .collect();
        Self { inv_diag }
    }
}

impl<T: Scalar> Preconditioner<T> for Jacobi<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = *ri * *di;
        }
    }
}

impl<T: Scalar> Preconditioner<T> for LdltFactor<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        self.solve_into(r, z);
    }
}

/// Outcome of a Krylov run.
#[derive(Debug, Clone, Copy)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

fn true_residual<T: Scalar>(a: &CsrMatrix<T>, b: &[T], x: &[T], r: &mut [T]) {
    a.matvec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = *bi - *ri;
    }
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

/// Conjugate gradients for Hermitian positive definite `A`, starting from `x`.
pub fn pcg<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    precond: &dyn Preconditioner<T>,
    rel_tol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    let bnorm = norm2(b);
    let mut r = vec![T::zero(); n];
    let mut z = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut it = 0;
    true_residual(a, b, x, &mut r);
    let mut rel = norm2(&r) / bnorm;
    while rel > rel_tol && it < max_iter {
        precond.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dotc(&r, &z);
        while it < max_iter {
            it += 1;
            a.matvec_into(&p, &mut q);
            let pq = dotc(&p, &q);
            if pq == T::zero() {
                break;
            }
            let alpha = rz / pq;
            axpy(alpha, &p, x);
            axpy(T::zero() - alpha, &q, &mut r);
            if norm2(&r) / bnorm <= rel_tol {
                break;
            }
            precond.apply(&r, &mut z);
            let rz_new = dotc(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = *zi + beta * *pi;
            }
        }
        true_residual(a, b, x, &mut r);
        rel = norm2(&r) / bnorm;
    }
    KrylovOutcome { iterations: it, rel_residual: rel, converged: rel <= rel_tol }
}

/// Right-preconditioned BiCGSTAB for general square `A`, starting from `x`.
pub fn bicgstab<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    precond: &dyn Preconditioner<T>,
    rel_tol: f64,
    max_iter: usize,
) -> KrylovOutcome {
    let n = b.len();
    let bnorm = norm2(b);
    let mut r = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ph = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut sh = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    let mut it = 0;
    let mut restarts = 0;
    true_residual(a, b, x, &mut r);
    let mut rel = norm2(&r) / bnorm;
    while rel > rel_tol && it < max_iter && restarts < 20 {
        restarts += 1;
        let r_hat = r.clone();
        let mut rho = T::one();
        let mut alpha = T::one();
        let mut omega = T::one();
        v.iter_mut().for_each(|e| *e = T::zero());
        p.iter_mut().for_each(|e| *e = T::zero());
        while it < max_iter {
            it += 1;
            let rho_new = dotc(&r_hat, &r);
            if rho_new.abs() <= f64::EPSILON * f64::EPSILON * bnorm * bnorm {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for ((pi, ri), vi) in p.iter_mut().zip(&r).zip(&v) {
                *pi = *ri + beta * (*pi - omega * *vi);
            }
            precond.apply(&p, &mut ph);
            a.matvec_into(&ph, &mut v);
            let rv = dotc(&r_hat, &v);
            if rv == T::zero() {
                break;
            }
            alpha = rho / rv;
            for ((si, ri), vi) in s.iter_mut().zip(&r).zip(&v) {
                *si = *ri - alpha * *vi;
            }
            if norm2(&s) / bnorm <= rel_tol {
                axpy(alpha, &ph, x);
                break;
            }
            precond.apply(&s, &mut sh);
            a.matvec_into(&sh, &mut t);
            let tt = dotc(&t, &t);
            if tt == T::zero() {
                axpy(alpha, &ph, x);
                break;
            }
            omega = dotc(&t, &s) / tt;
            axpy(alpha, &ph, x);
            axpy(omega, &sh, x);
            for ((ri, si), ti) in r.iter_mut().zip(&s).zip(&t) {
                *ri = *si - omega * *ti;
            }
            if norm2(&r) / bnorm <= rel_tol || omega == T::zero() {
                break;
            }
        }
        true_residual(a, b, x, &mut r);
        rel = norm2(&r) / bnorm;
    }
    KrylovOutcome { iterations: it, rel_residual: rel, converged: rel <= rel_tol }
}
