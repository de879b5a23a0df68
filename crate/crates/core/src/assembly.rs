//! Sparse realizations of the mass, stiffness and weighted-mass forms and of
//! density load vectors, with homogeneous Dirichlet elimination.
//!
//! An [`Assembler`] targets either the full DOF set or the interior DOFs of a
//! [`DirichletReduction`]. All matrices it produces share one pattern, so the
//! per-step Schrodinger operator is an entrywise combination of them.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fespace::{FeSpace, Field, QuadraturePurpose, QuadratureRule, Tabulation};
use crate::problem::Potential;
use crate::scalar::Scalar;
use crate::sparse::{CsrMatrix, CsrPattern};

const NONE: usize = usize::MAX;

/// Index maps between the full DOF vector and the interior (non-Dirichlet)
/// DOFs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirichletReduction {
    interior: Vec<usize>,
    full_to_reduced: Vec<usize>,
}

impl DirichletReduction {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut full_to_reduced = vec![NONE; mask.len()];
        let mut interior = Vec::new();
        for (d, &b) in mask.iter().enumerate() {
            if !b {
                full_to_reduced[d] = interior.len();
                interior.push(d);
            }
        }
        Self { interior, full_to_reduced }
    }

    pub fn none(n: usize) -> Self {
        Self::from_mask(&vec![false; n])
    }

    pub fn full_dim(&self) -> usize {
        self.full_to_reduced.len()
    }

    pub fn reduced_dim(&self) -> usize {
        self.interior.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Reduced index of full DOF `d`, or `None` on the boundary.
    pub fn reduced_index(&self, d: usize) -> Option<usize> {
        let r = self.full_to_reduced[d];
        (r != NONE).then_some(r)
    }

    pub fn restrict<T: Copy>(&self, full: &[T]) -> Vec<T> {
        self.interior.iter().map(|&d| full[d]).collect()
    }

    /// Places a reduced vector into a full one with exact zeros on the boundary.
    pub fn lift<T: Scalar>(&self, reduced: &[T]) -> Field<T> {
        let mut full = vec![T::zero(); self.full_dim()];
        for (&d, &v) in self.interior.iter().zip(reduced) {
            full[d] = v;
        }
        Field::new(full)
    }
}

/// Removes the rows and columns of masked DOFs. Homogeneous data needs no
/// right-hand-side correction beyond deleting the masked entries.
pub fn dirichlet_reduce<T: Scalar>(
    matrix: &CsrMatrix<T>,
    rhs: &[T],
    mask: &[bool],
) -> Result<(CsrMatrix<T>, Vec<T>)> {
    if matrix.nrows() != matrix.ncols() || mask.len() != matrix.nrows() || rhs.len() != mask.len() {
        return Err(Error::Dimension(format!(
            "matrix {}x{}, rhs {}, mask {}",
            matrix.nrows(),
            matrix.ncols(),
            rhs.len(),
            mask.len()
        )));
    }
    let red = DirichletReduction::from_mask(mask);
    Ok((matrix.submatrix(red.interior()), red.restrict(rhs)))
}

/// Evaluates coefficient vectors (in a target numbering) at the points of a
/// quadrature rule on every element.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    tab: Tabulation,
    local_rows: Vec<usize>,
    n_target: usize,
    n_elements: usize,
    det_j: f64,
    points: Vec<(f64, f64)>,
}

impl PointEvaluator {
    pub fn new(space: &FeSpace, rule: QuadratureRule, reduction: Option<&DirichletReduction>) -> Self {
        let tab = space.tabulate(rule);
        let n_el = space.mesh().n_elements();
        let mut local_rows = Vec::with_capacity(n_el * space.n_local());
        for e in 0..n_el {
            for &d in space.element_dofs(e) {
                local_rows.push(match reduction {
                    Some(r) => r.reduced_index(d).unwrap_or(NONE),
                    None => d,
                });
            }
        }
        let n_target = reduction.map_or(space.ndof(), |r| r.reduced_dim());
        let points = space.physical_points(&tab);
        Self { tab, local_rows, n_target, n_elements: n_el, det_j: space.det_jacobian(), points }
    }

    pub fn tabulation(&self) -> &Tabulation {
        &self.tab
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn n_points_total(&self) -> usize {
        self.n_elements * self.tab.n_points()
    }

    /// Physical coordinates of all points, element-major.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn element_rows(&self, e: usize) -> &[usize] {
        let n = self.tab.n_local;
        &self.local_rows[e * n..(e + 1) * n]
    }

    /// Function values at all points; DOFs outside the target read as zero.
    pub fn values<T: Scalar>(&self, coeffs: &[T]) -> Result<Vec<T>> {
        if coeffs.len() != self.n_target {
            return Err(Error::Dimension(format!(
                "coefficient vector of length {} for a space of dimension {}",
                coeffs.len(),
                self.n_target
            )));
        }
        let nq = self.tab.n_points();
        let nl = self.tab.n_local;
        let mut out = Vec::with_capacity(self.n_points_total());
        let mut local = vec![T::zero(); nl];
        for e in 0..self.n_elements {
            for (l, &r) in self.element_rows(e).iter().enumerate() {
                local[l] = if r == NONE { T::zero() } else { coeffs[r] };
            }
            for q in 0..nq {
                let mut acc = T::zero();
                for (c, &phi) in local.iter().zip(self.tab.point_values(q)) {
                    acc += *c * T::from_real(phi);
                }
                out.push(acc);
            }
        }
        Ok(out)
    }

    /// Quadrature approximation of `int f` from point values of `f`.
    pub fn integrate(&self, point_values: &[f64]) -> f64 {
        let w = self.tab.rule.weights();
        let nq = w.len();
        let mut total = 0.0;
        for e in 0..self.n_elements {
            let mut acc = 0.0;
            for q in 0..nq {
                acc += w[q] * point_values[e * nq + q];
            }
            total += acc;
        }
        total * self.det_j
    }
}

enum WeightTerm<'a> {
    Constant(f64),
    Field(f64, &'a [f64]),
    Density(f64, &'a [Complex64]),
    Potential(&'a Potential),
    Points(&'a [f64]),
}

/// Pointwise weight `w(x)` built from coefficient vectors, a density `|u|^2`
/// and an analytic potential. Coefficient vectors use the assembler's target
/// numbering.
#[derive(Default)]
pub struct Weight<'a> {
    terms: Vec<WeightTerm<'a>>,
}

impl<'a> Weight<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.terms.push(WeightTerm::Constant(c));
        self
    }

    /// Adds `coef * f_h` for a real coefficient vector.
    pub fn field(mut self, coef: f64, coeffs: &'a [f64]) -> Self {
        self.terms.push(WeightTerm::Field(coef, coeffs));
        self
    }

    /// Adds `coef * |u_h|^2`.
    pub fn density(mut self, coef: f64, coeffs: &'a [Complex64]) -> Self {
        self.terms.push(WeightTerm::Density(coef, coeffs));
        self
    }

    pub fn potential(mut self, v: &'a Potential) -> Self {
        self.terms.push(WeightTerm::Potential(v));
        self
    }

    /// Adds precomputed values at the assembler's quadrature points.
    pub fn points(mut self, values: &'a [f64]) -> Self {
        self.terms.push(WeightTerm::Points(values));
        self
    }
}

/// Global assembly of forms on one sparsity pattern.
#[derive(Debug, Clone)]
pub struct Assembler {
    space: Arc<FeSpace>,
    eval: PointEvaluator,
    pattern: Arc<CsrPattern>,
    slots: Vec<usize>,
    elem_mass: Vec<f64>,
    elem_stiffness: Vec<f64>,
}

impl Assembler {
    /// Assembler using the standard assembly quadrature for the space degree.
    pub fn new(space: Arc<FeSpace>, reduction: Option<&DirichletReduction>) -> Result<Self> {
        let rule = QuadratureRule::for_degree(space.degree(), QuadraturePurpose::Assembly)?;
        Ok(Self::with_rule(space, rule, reduction))
    }

    pub fn with_rule(space: Arc<FeSpace>, rule: QuadratureRule, reduction: Option<&DirichletReduction>) -> Self {
        let eval = PointEvaluator::new(&space, rule, reduction);
        let nl = space.n_local();
        let n_el = space.mesh().n_elements();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); eval.n_target()];
        for e in 0..n_el {
            let er = eval.element_rows(e);
            for &r in er.iter().filter(|&&r| r != NONE) {
                rows[r].extend(er.iter().copied().filter(|&c| c != NONE));
            }
        }
        let pattern = Arc::new(
            CsrPattern::from_rows(eval.n_target(), rows).expect("element connectivity yields a valid pattern"),
        );
        let mut slots = Vec::with_capacity(n_el * nl * nl);
        for e in 0..n_el {
            let er = eval.element_rows(e);
            for &r in er {
                for &c in er {
                    slots.push(if r == NONE || c == NONE {
                        NONE
                    } else {
                        pattern.find(r, c).expect("slot in pattern")
                    });
                }
            }
        }
        let (elem_mass, elem_stiffness) = reference_element_matrices(&space, eval.tabulation());
        Self { space, eval, pattern, slots, elem_mass, elem_stiffness }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn evaluator(&self) -> &PointEvaluator {
        &self.eval
    }

    pub fn dim(&self) -> usize {
        self.eval.n_target()
    }

    fn scatter_uniform(&self, elem: &[f64]) -> CsrMatrix<f64> {
        let mut m = CsrMatrix::zeros(self.pattern.clone());
        let vals = m.values_mut();
        let nn = elem.len();
        for chunk in self.slots.chunks_exact(nn) {
            for (&s, &v) in chunk.iter().zip(elem) {
                if s != NONE {
                    vals[s] += v;
                }
            }
        }
        m
    }

    /// Gram matrix `M_ij = int phi_i phi_j`.
    pub fn mass(&self) -> CsrMatrix<f64> {
        self.scatter_uniform(&self.elem_mass)
    }

    /// `K_ij = int grad phi_i . grad phi_j`.
    pub fn stiffness(&self) -> CsrMatrix<f64> {
        self.scatter_uniform(&self.elem_stiffness)
    }

    /// Values of a weight at every quadrature point.
    pub fn weight_values(&self, w: &Weight<'_>) -> Result<Vec<f64>> {
        let n = self.eval.n_points_total();
        let mut out = vec![0.0; n];
        for term in &w.terms {
            match term {
                WeightTerm::Constant(c) => out.iter_mut().for_each(|o| *o += c),
                WeightTerm::Field(coef, coeffs) => {
                    for (o, v) in out.iter_mut().zip(self.eval.values(coeffs)?) {
                        *o += coef * v;
                    }
                }
                WeightTerm::Density(coef, coeffs) => {
                    for (o, v) in out.iter_mut().zip(self.eval.values(coeffs)?) {
                        *o += coef * v.norm_sqr();
                    }
                }
                WeightTerm::Potential(p) => {
                    for (o, &(x, y)) in out.iter_mut().zip(self.eval.points()) {
                        *o += p.eval(x, y);
                    }
                }
                WeightTerm::Points(vals) => {
                    if vals.len() != n {
                        return Err(Error::Dimension(format!("{} point values, expected {n}", vals.len())));
                    }
                    for (o, v) in out.iter_mut().zip(vals.iter()) {
                        *o += v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `W_ij = int w phi_i phi_j` from weight values at the quadrature points,
    /// written into a matrix on this assembler's pattern.
    pub fn weighted_mass_into(&self, point_weights: &[f64], out: &mut CsrMatrix<f64>) -> Result<()> {
        if point_weights.len() != self.eval.n_points_total() {
            return Err(Error::Dimension("weight values do not match quadrature points".into()));
        }
        if !Arc::ptr_eq(out.pattern(), &self.pattern) && !out.shares_pattern(&self.pattern) {
            return Err(Error::Dimension("output matrix uses a different pattern".into()));
        }
        let tab = self.eval.tabulation();
        let nq = tab.n_points();
        let nl = tab.n_local;
        let qw = tab.rule.weights();
        let det = self.space.det_jacobian();
        let vals = out.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        let mut local = vec![0.0; nl * nl];
        for (e, chunk) in self.slots.chunks_exact(nl * nl).enumerate() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..nq {
                let wq = qw[q] * det * point_weights[e * nq + q];
                let phi = tab.point_values(q);
                for a in 0..nl {
                    let fa = wq * phi[a];
                    let row = &mut local[a * nl..(a + 1) * nl];
                    for b in 0..nl {
                        row[b] += fa * phi[b];
                    }
                }
            }
            for (&s, &v) in chunk.iter().zip(&local) {
                if s != NONE {
                    vals[s] += v;
                }
            }
        }
        Ok(())
    }

    pub fn weighted_mass(&self, w: &Weight<'_>) -> Result<CsrMatrix<f64>> {
        let pw = self.weight_values(w)?;
        let mut m = CsrMatrix::zeros(self.pattern.clone());
        self.weighted_mass_into(&pw, &mut m)?;
        Ok(m)
    }

    /// `b_i = int rho phi_i` from density values at the quadrature points.
    pub fn load_from_points(&self, point_density: &[f64]) -> Result<Vec<f64>> {
        if point_density.len() != self.eval.n_points_total() {
            return Err(Error::Dimension("density values do not match quadrature points".into()));
        }
        let tab = self.eval.tabulation();
        let nq = tab.n_points();
        let qw = tab.rule.weights();
        let det = self.space.det_jacobian();
        let mut b = vec![0.0; self.dim()];
        let mut local = vec![0.0; tab.n_local];
        for e in 0..self.space.mesh().n_elements() {
            local.iter_mut().for_each(|v| *v = 0.0);
            for q in 0..nq {
                let wq = qw[q] * det * point_density[e * nq + q];
                for (l, &phi) in local.iter_mut().zip(tab.point_values(q)) {
                    *l += wq * phi;
                }
            }
            for (&r, &v) in self.eval.element_rows(e).iter().zip(&local) {
                if r != NONE {
                    b[r] += v;
                }
            }
        }
        Ok(b)
    }

    pub fn load(&self, rho: &Weight<'_>) -> Result<Vec<f64>> {
        self.load_from_points(&self.weight_values(rho)?)
    }
}

fn reference_element_matrices(space: &FeSpace, tab: &Tabulation) -> (Vec<f64>, Vec<f64>) {
    let nl = tab.n_local;
    let det = space.det_jacobian();
    let [sx, sy] = space.grad_scale();
    let mut mass = vec![0.0; nl * nl];
    let mut stiff = vec![0.0; nl * nl];
    for q in 0..tab.n_points() {
        let w = tab.rule.weights()[q] * det;
        let v = tab.point_values(q);
        let g = tab.point_grads(q);
        for a in 0..nl {
            for b in 0..nl {
                mass[a * nl + b] += w * v[a] * v[b];
                stiff[a * nl + b] += w * (sx * sx * g[a][0] * g[b][0] + sy * sy * g[a][1] * g[b][1]);
            }
        }
    }
    (mass, stiff)
}

/// Full-DOF mass matrix of a space.
pub fn assemble_mass(space: &Arc<FeSpace>) -> Result<CsrMatrix<f64>> {
    Ok(Assembler::new(space.clone(), None)?.mass())
}

/// Full-DOF stiffness matrix of a space.
pub fn assemble_stiffness(space: &Arc<FeSpace>) -> Result<CsrMatrix<f64>> {
    Ok(Assembler::new(space.clone(), None)?.stiffness())
}

/// Full-DOF weighted mass matrix; coefficient vectors are full fields.
pub fn assemble_weighted_mass(space: &Arc<FeSpace>, w: &Weight<'_>) -> Result<CsrMatrix<f64>> {
    Assembler::new(space.clone(), None)?.weighted_mass(w)
}

/// Full-DOF load vector `int rho phi_i`.
pub fn assemble_density_load(space: &Arc<FeSpace>, rho: &Weight<'_>) -> Result<Vec<f64>> {
    Assembler::new(space.clone(), None)?.load(rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{RectDomain, StructuredQuadMesh};
    use crate::problem::vortex_initial_condition;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(dom: RectDomain, nc: usize, k: usize) -> Arc<FeSpace> {
        Arc::new(FeSpace::new(StructuredQuadMesh::new(dom, nc, nc).unwrap(), k).unwrap())
    }

    fn kron(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        // (A kron B) with x-fastest local ordering: index = by*n + bx
        let mut out = vec![0.0; n * n * n * n];
        for iy in 0..n {
            for ix in 0..n {
                for jy in 0..n {
                    for jx in 0..n {
                        out[(iy * n + ix) * n * n + jy * n + jx] = a[iy * n + jy] * b[ix * n + jx];
                    }
                }
            }
        }
        out
    }

    fn assert_rel_close(a: &[f64], b: &[f64], tol: f64) {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn q1_unit_element_matrices_ccw() {
        let s = space(RectDomain::unit_square(), 1, 1);
        let m = assemble_mass(&s).unwrap().to_dense();
        let k = assemble_stiffness(&s).unwrap().to_dense();
        // lattice order (0,0),(1,0),(0,1),(1,1) -> counter-clockwise corners
        let ccw = [0usize, 1, 3, 2];
        let perm = |d: &[f64]| {
            let mut out = vec![0.0; 16];
            for i in 0..4 {
                for j in 0..4 {
                    out[i * 4 + j] = d[ccw[i] * 4 + ccw[j]];
                }
            }
            out
        };
        let m_expect: Vec<f64> = [4., 2., 1., 2., 2., 4., 2., 1., 1., 2., 4., 2., 2., 1., 2., 4.]
            .iter()
            .map(|v| v / 36.0)
            .collect();
        let k_expect: Vec<f64> = [4., -1., -2., -1., -1., 4., -1., -2., -2., -1., 4., -1., -1., -2., -1., 4.]
            .iter()
            .map(|v| v / 6.0)
            .collect();
        assert_rel_close(&perm(&m), &m_expect, 1e-13);
        assert_rel_close(&perm(&k), &k_expect, 1e-13);
    }

    #[test]
    fn single_element_tensor_product_oracle() {
        for k in 1..=2 {
            let (hx, hy) = (0.7, 1.9);
            let s = space(RectDomain::new(0.0, hx, 0.0, hy).unwrap(), 1, k);
            let (m1, k1): (fn(f64) -> Vec<f64>, fn(f64) -> Vec<f64>) = if k == 1 {
                (
                    |h| [2., 1., 1., 2.].iter().map(|v| v * h / 6.0).collect(),
                    |h| [1., -1., -1., 1.].iter().map(|v| v / h).collect(),
                )
            } else {
                (
                    |h| [4., 2., -1., 2., 16., 2., -1., 2., 4.].iter().map(|v| v * h / 30.0).collect(),
                    |h| [7., -8., 1., -8., 16., -8., 1., -8., 7.].iter().map(|v| v / (3.0 * h)).collect(),
                )
            };
            let n = k + 1;
            let mass = kron(&m1(hy), &m1(hx), n);
            let stiff: Vec<f64> = kron(&m1(hy), &k1(hx), n)
                .iter()
                .zip(kron(&k1(hy), &m1(hx), n))
                .map(|(a, b)| a + b)
                .collect();
            assert_rel_close(&assemble_mass(&s).unwrap().to_dense(), &mass, 1e-13);
            assert_rel_close(&assemble_stiffness(&s).unwrap().to_dense(), &stiff, 1e-13);
        }
    }

    #[test]
    fn global_properties() {
        let dom = RectDomain::new(-1.0, 2.0, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=2 {
            let s = space(dom, 4, k);
            let m = assemble_mass(&s).unwrap();
            let kk = assemble_stiffness(&s).unwrap();
            assert!(m.asymmetry() <= 1e-14 && kk.asymmetry() <= 1e-14);
            let total: f64 = m.values().iter().sum();
            assert!((total - dom.area()).abs() < 1e-13 * dom.area());
            let ones = vec![1.0; s.ndof()];
            let k1: Vec<f64> = kk.matvec(&ones);
            assert!(k1.iter().all(|v| v.abs() < 1e-12));
            for _ in 0..100 {
                let x: Vec<f64> = (0..s.ndof()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!(m.sesquilinear(&x, &x) > 0.0);
                assert!(kk.sesquilinear(&x, &x) >= -1e-12);
            }
        }
    }

    #[test]
    fn weighted_mass_consistency_and_linearity() {
        let s = space(RectDomain::unit_square(), 3, 2);
        let a = Assembler::new(s.clone(), None).unwrap();
        let zero = a.weighted_mass(&Weight::new()).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let one = a.weighted_mass(&Weight::new().constant(1.0)).unwrap();
        assert_rel_close(one.values(), a.mass().values(), 1e-14);

        let f1 = s.interpolate(|x, y| (x + y).sin());
        let f2 = s.interpolate(|x, y| x * x - y);
        let v = Potential::Harmonic;
        let w1 = a.weighted_mass(&Weight::new().field(2.0, &f1.values).potential(&v)).unwrap();
        let w2 = a.weighted_mass(&Weight::new().field(-0.5, &f2.values)).unwrap();
        let w12 = a
            .weighted_mass(&Weight::new().field(2.0, &f1.values).potential(&v).field(-0.5, &f2.values))
            .unwrap();
        for ((x, y), z) in w1.values().iter().zip(w2.values()).zip(w12.values()) {
            assert!((x + y - z).abs() <= 1e-13);
        }
        assert!(w12.asymmetry() <= 1e-14);
    }

    #[test]
    fn harmonic_weight_integral() {
        let s = space(RectDomain::centered_square(1.0).unwrap(), 1, 2);
        let w = assemble_weighted_mass(&s, &Weight::new().potential(&Potential::Harmonic)).unwrap();
        let total: f64 = w.values().iter().sum();
        assert!((total - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn density_loads() {
        let s = space(RectDomain::new(0.0, 2.0, 0.0, 3.0).unwrap(), 3, 1);
        let b0 = assemble_density_load(&s, &Weight::new()).unwrap();
        assert!(b0.iter().all(|&v| v == 0.0));
        let b1 = assemble_density_load(&s, &Weight::new().constant(1.0)).unwrap();
        assert!((b1.iter().sum::<f64>() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn vortex_density_integrates_to_two() {
        let s = space(RectDomain::centered_square(8.0).unwrap(), 80, 2);
        let u = s.interpolate(vortex_initial_condition);
        let b = assemble_density_load(&s, &Weight::new().density(1.0, &u.values)).unwrap();
        assert!((b.iter().sum::<f64>() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn reduction_dimensions() {
        let s1 = space(RectDomain::unit_square(), 1, 1);
        let m1 = assemble_mass(&s1).unwrap();
        let (r1, b1) = dirichlet_reduce(&m1, &[1.0; 4], s1.boundary_mask()).unwrap();
        assert_eq!((r1.nrows(), b1.len()), (0, 0));

        let s2 = space(RectDomain::unit_square(), 2, 1);
        let k2 = assemble_stiffness(&s2).unwrap();
        let (r2, _) = dirichlet_reduce(&k2, &[0.0; 9], s2.boundary_mask()).unwrap();
        assert_eq!(r2.nrows(), 1);
        assert!((r2.get(0, 0) - 8.0 / 3.0).abs() < 1e-14);

        let (same, _) = dirichlet_reduce(&k2, &[0.0; 9], &[false; 9]).unwrap();
        assert_eq!(same.to_dense(), k2.to_dense());

        let red = DirichletReduction::from_mask(s2.boundary_mask());
        let lifted = red.lift(&[3.0]);
        assert!(lifted.is_dirichlet_conforming(s2.boundary_mask()));
        assert_eq!(lifted.values[4], 3.0);
    }

    #[test]
    fn reduced_assembler_matches_submatrix() {
        let s = space(RectDomain::unit_square(), 4, 2);
        let red = DirichletReduction::from_mask(s.boundary_mask());
        let full = Assembler::new(s.clone(), None).unwrap();
        let part = Assembler::new(s.clone(), Some(&red)).unwrap();
        let f = s.interpolate(|x, y| 1.0 + x * y);
        let w_full = full.weighted_mass(&Weight::new().field(1.0, &f.values)).unwrap();
        let fr = red.restrict(&f.values);
        let mut fb = f.clone();
        fb.zero_boundary(s.boundary_mask());
        let w_fb = full.weighted_mass(&Weight::new().field(1.0, &fb.values)).unwrap();
        let w_red = part.weighted_mass(&Weight::new().field(1.0, &fr)).unwrap();
        assert_rel_close(w_red.values(), w_fb.submatrix(red.interior()).values(), 1e-14);
        assert_eq!(part.mass().to_dense(), full.mass().submatrix(red.interior()).to_dense());
        assert_ne!(w_full.values(), w_fb.values());
    }

    #[test]
    fn assembly_is_bit_reproducible() {
        let s = space(RectDomain::centered_square(2.0).unwrap(), 6, 2);
        let u = s.interpolate(|x, y| Complex64::new(x.cos(), y * x));
        let run = || {
            let a = Assembler::new(s.clone(), None).unwrap();
            a.weighted_mass(&Weight::new().density(1.0, &u.values).potential(&Potential::Saddle))
                .unwrap()
        };
        assert_eq!(run().values(), run().values());
    }
}
