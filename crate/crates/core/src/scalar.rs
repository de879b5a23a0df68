use std::fmt::Debug;

use num_complex::Complex64;
use num_traits::NumAssign;

/// Field scalar: real for mass/Poisson operators, complex for the
/// Schrodinger system.
pub trait Scalar: NumAssign + Copy + Debug + PartialEq + Send + Sync + 'static {
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn abs_sqr(self) -> f64;
    fn re(self) -> f64;

    fn abs(self) -> f64 {
        self.abs_sqr().sqrt()
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self * self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
}

/// Euclidean norm of a vector.
pub fn norm2<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs_sqr()).sum::<f64>().sqrt()
}

/// Unconjugated bilinear dot product, `sum x_i y_i`.
pub fn dotu<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for (a, b) in x.iter().zip(y) {
        acc += *a * *b;
    }
    acc
}

/// Conjugated inner product, `sum conj(x_i) y_i`.
pub fn dotc<T: Scalar>(x: &[T], y: &[T]) -> T {
    let mut acc = T::zero();
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * *b;
    }
    acc
}
