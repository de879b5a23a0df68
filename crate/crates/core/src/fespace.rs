//! Tensor-product Lagrange spaces `Q^k` on structured meshes.
//!
//! Local basis functions on an element are ordered x-fastest over the
//! `(k+1) x (k+1)` equispaced reference nodes. Global DOFs live on the
//! `(k*ncx + 1) x (k*ncy + 1)` node lattice, numbered row-major.

use crate::error::{Error, Result};
use crate::mesh::StructuredQuadMesh;
use crate::scalar::Scalar;

/// Lagrange basis of per-direction degree `k` on `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QkBasis {
    k: usize,
    nodes_1d: Vec<f64>,
}

impl QkBasis {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::Config(format!("unsupported polynomial degree k={k} (1 or 2)")));
        }
        let nodes_1d = (0..=k).map(|i| -1.0 + 2.0 * i as f64 / k as f64).collect();
        Ok(Self { k, nodes_1d })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes_1d
    }

    /// Number of local basis functions, `(k+1)^2`.
    pub fn n_local(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    /// Reference coordinates of local node `l`.
    pub fn node(&self, l: usize) -> (f64, f64) {
        let n = self.k + 1;
        (self.nodes_1d[l % n], self.nodes_1d[l / n])
    }

    fn eval_1d(&self, x: f64, vals: &mut [f64], ders: &mut [f64]) {
        let nodes = &self.nodes_1d;
        for a in 0..nodes.len() {
            let mut v = 1.0;
            let mut d = 0.0;
            for b in 0..nodes.len() {
                if b == a {
                    continue;
                }
                let denom = nodes[a] - nodes[b];
                // product rule: d(v * f) = d*f + v*f'
                d = d * (x - nodes[b]) / denom + v / denom;
                v *= (x - nodes[b]) / denom;
            }
            vals[a] = v;
            ders[a] = d;
        }
    }

    /// Values and reference gradients of every local basis function.
    pub fn eval(&self, xi: f64, eta: f64) -> (Vec<f64>, Vec<[f64; 2]>) {
        let n = self.k + 1;
        let (mut vx, mut dx, mut vy, mut dy) = ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
        self.eval_1d(xi, &mut vx[..n], &mut dx[..n]);
        self.eval_1d(eta, &mut vy[..n], &mut dy[..n]);
        let mut values = Vec::with_capacity(n * n);
        let mut grads = Vec::with_capacity(n * n);
        for b in 0..n {
            for a in 0..n {
                values.push(vx[a] * vy[b]);
                grads.push([dx[a] * vy[b], vx[a] * dy[b]]);
            }
        }
        (values, grads)
    }
}

/// Tensor-product Gauss-Legendre rule on `[-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    q: usize,
    points: Vec<(f64, f64)>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadraturePurpose {
    /// Mass, stiffness, weighted-mass and load terms: `q = k + 2`.
    Assembly,
    /// The quartic term of the original energy: `q = 2k + 1`.
    QuarticDiagnostic,
}

/// One-dimensional Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre_1d(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, z);
        x[i] = -z;
        x[q - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * d * d);
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    if q % 2 == 1 {
        x[q / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadratureRule {
    pub fn gauss(q: usize) -> Self {
        let (x, w) = gauss_legendre_1d(q);
        let mut points = Vec::with_capacity(q * q);
        let mut weights = Vec::with_capacity(q * q);
        for j in 0..q {
            for i in 0..q {
                points.push((x[i], x[j]));
                weights.push(w[i] * w[j]);
            }
        }
        Self { q, points, weights }
    }

    pub fn for_degree(k: usize, purpose: QuadraturePurpose) -> Result<Self> {
        if !(1..=2).contains(&k) {
            return Err(Error::Config(format!("unsupported polynomial degree k={k} (1 or 2)")));
        }
        let q = match purpose {
            QuadraturePurpose::Assembly => k + 2,
            QuadraturePurpose::QuarticDiagnostic => 2 * k + 1,
        };
        Ok(Self::gauss(q))
    }

    pub fn points_per_direction(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Basis values and reference gradients at every point of a quadrature rule.
/// All elements are congruent, so one table serves the whole mesh.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub rule: QuadratureRule,
    pub n_local: usize,
    /// `values[q * n_local + l]`
    pub values: Vec<f64>,
    /// Reference gradients, laid out like `values`.
    pub ref_grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(basis: &QkBasis, rule: QuadratureRule) -> Self {
        let n_local = basis.n_local();
        let mut values = Vec::with_capacity(rule.len() * n_local);
        let mut ref_grads = Vec::with_capacity(rule.len() * n_local);
        for &(xi, eta) in rule.points() {
            let (v, g) = basis.eval(xi, eta);
            values.extend(v);
            ref_grads.extend(g);
        }
        Self { rule, n_local, values, ref_grads }
    }

    pub fn n_points(&self) -> usize {
        self.rule.len()
    }

    pub fn point_values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_local..(q + 1) * self.n_local]
    }

    pub fn point_grads(&self, q: usize) -> &[[f64; 2]] {
        &self.ref_grads[q * self.n_local..(q + 1) * self.n_local]
    }
}

/// DOF-indexed coefficient vector of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> Field<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero on every boundary-masked DOF.
    pub fn is_dirichlet_conforming(&self, mask: &[bool]) -> bool {
        self.values.len() == mask.len()
            && self.values.iter().zip(mask).all(|(v, &b)| !b || *v == T::zero())
    }

    pub fn zero_boundary(&mut self, mask: &[bool]) {
        for (v, &b) in self.values.iter_mut().zip(mask) {
            if b {
                *v = T::zero();
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: StructuredQuadMesh,
    basis: QkBasis,
    nlx: usize,
    nly: usize,
    dofs: Vec<usize>,
    boundary: Vec<bool>,
}

impl FeSpace {
    pub fn new(mesh: StructuredQuadMesh, k: usize) -> Result<Self> {
        let basis = QkBasis::new(k)?;
        let nlx = k * mesh.ncx() + 1;
        let nly = k * mesh.ncy() + 1;
        let n = k + 1;
        let mut dofs = Vec::with_capacity(mesh.n_elements() * n * n);
        for e in 0..mesh.n_elements() {
            let (ei, ej) = mesh.element_ij(e);
            for b in 0..n {
                for a in 0..n {
                    dofs.push((k * ej + b) * nlx + k * ei + a);
                }
            }
        }
        let boundary = (0..nlx * nly)
            .map(|d| {
                let (i, j) = (d % nlx, d / nlx);
                i == 0 || j == 0 || i == nlx - 1 || j == nly - 1
            })
            .collect();
        Ok(Self { mesh, basis, nlx, nly, dofs, boundary })
    }

    pub fn mesh(&self) -> &StructuredQuadMesh {
        &self.mesh
    }

    pub fn basis(&self) -> &QkBasis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn ndof(&self) -> usize {
        self.nlx * self.nly
    }

    /// Node lattice dimensions `(k*ncx + 1, k*ncy + 1)`.
    pub fn lattice_dims(&self) -> (usize, usize) {
        (self.nlx, self.nly)
    }

    pub fn n_local(&self) -> usize {
        self.basis.n_local()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let n = self.n_local();
        &self.dofs[e * n..(e + 1) * n]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn dof_coords(&self, d: usize) -> (f64, f64) {
        let k = self.degree();
        let (i, j) = (d % self.nlx, d / self.nlx);
        let dom = self.mesh.domain();
        let coord = |lo: f64, hi: f64, i: usize, n: usize| {
            if i == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / n as f64
            }
        };
        (
            coord(dom.xmin, dom.xmax, i, k * self.mesh.ncx()),
            coord(dom.ymin, dom.ymax, j, k * self.mesh.ncy()),
        )
    }

    /// Jacobian determinant of the reference-to-physical map.
    pub fn det_jacobian(&self) -> f64 {
        0.25 * self.mesh.hx() * self.mesh.hy()
    }

    /// Scale factors turning reference gradients into physical ones.
    pub fn grad_scale(&self) -> [f64; 2] {
        [2.0 / self.mesh.hx(), 2.0 / self.mesh.hy()]
    }

    pub fn tabulate(&self, rule: QuadratureRule) -> Tabulation {
        Tabulation::new(&self.basis, rule)
    }

    /// Nodal interpolation: DOF `i` receives `f(node_i)`.
    pub fn interpolate<T: Scalar>(&self, f: impl Fn(f64, f64) -> T) -> Field<T> {
        Field::new(
            (0..self.ndof())
                .map(|d| {
                    let (x, y) = self.dof_coords(d);
                    f(x, y)
                })
                .collect(),
        )
    }

    pub fn eval_field<T: Scalar>(&self, field: &Field<T>, e: usize, xi: f64, eta: f64) -> T {
        let (vals, _) = self.basis.eval(xi, eta);
        let mut acc = T::zero();
        for (l, &d) in self.element_dofs(e).iter().enumerate() {
            acc += field.values[d] * T::from_real(vals[l]);
        }
        acc
    }

    /// Value and physical gradient at a reference point of element `e`.
    pub fn eval_field_grad<T: Scalar>(
        &self,
        field: &Field<T>,
        e: usize,
        xi: f64,
        eta: f64,
    ) -> (T, [T; 2]) {
        let (vals, grads) = self.basis.eval(xi, eta);
        let [sx, sy] = self.grad_scale();
        let (mut v, mut gx, mut gy) = (T::zero(), T::zero(), T::zero());
        for (l, &d) in self.element_dofs(e).iter().enumerate() {
            let c = field.values[d];
            v += c * T::from_real(vals[l]);
            gx += c * T::from_real(grads[l][0] * sx);
            gy += c * T::from_real(grads[l][1] * sy);
        }
        (v, [gx, gy])
    }

    /// Evaluates a field at an arbitrary physical point of the domain.
    pub fn eval_at<T: Scalar>(&self, field: &Field<T>, x: f64, y: f64) -> T {
        let (e, xi, eta) = self.mesh.locate(x, y);
        self.eval_field(field, e, xi, eta)
    }

    /// Values of `field` at every quadrature point, element-major.
    pub fn values_at_points<T: Scalar>(&self, tab: &Tabulation, field: &Field<T>) -> Vec<T> {
        let nq = tab.n_points();
        let mut out = Vec::with_capacity(self.mesh.n_elements() * nq);
        for e in 0..self.mesh.n_elements() {
            let dofs = self.element_dofs(e);
            for q in 0..nq {
                let mut acc = T::zero();
                for (l, &phi) in tab.point_values(q).iter().enumerate() {
                    acc += field.values[dofs[l]] * T::from_real(phi);
                }
                out.push(acc);
            }
        }
        out
    }

    /// Physical coordinates of every quadrature point, element-major.
    pub fn physical_points(&self, tab: &Tabulation) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.mesh.n_elements() * tab.n_points());
        for e in 0..self.mesh.n_elements() {
            for &(xi, eta) in tab.rule.points() {
                out.push(self.mesh.to_physical(e, xi, eta));
            }
        }
        out
    }
}
