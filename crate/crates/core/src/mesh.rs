//! Uniform structured quadrilateral meshes of axis-aligned rectangles.
//!
//! Vertices are numbered row-major with x running fastest: vertex `(i, j)`
//! has index `j * (ncx + 1) + i`. Elements follow the same convention.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectDomain {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl RectDomain {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::Config(format!(
                "degenerate domain [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// The square `[-half, half]^2`.
    pub fn centered_square(half: f64) -> Result<Self> {
        Self::new(-half, half, -half, half)
    }

    pub fn unit_square() -> Self {
        Self { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredQuadMesh {
    domain: RectDomain,
    ncx: usize,
    ncy: usize,
    hx: f64,
    hy: f64,
}

impl StructuredQuadMesh {
    pub fn new(domain: RectDomain, ncx: usize, ncy: usize) -> Result<Self> {
        if ncx == 0 || ncy == 0 {
            return Err(Error::Config(format!(
                "cell counts must be positive, got {ncx} x {ncy}"
            )));
        }
        Ok(Self {
            domain,
            ncx,
            ncy,
            hx: domain.width() / ncx as f64,
            hy: domain.height() / ncy as f64,
        })
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn ncx(&self) -> usize {
        self.ncx
    }

    pub fn ncy(&self) -> usize {
        self.ncy
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    /// Mesh size `max(hx, hy)`.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn n_elements(&self) -> usize {
        self.ncx * self.ncy
    }

    pub fn n_vertices(&self) -> usize {
        (self.ncx + 1) * (self.ncy + 1)
    }

    pub fn element_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.ncx + 1) + i
    }

    pub fn vertex_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.ncx + 1), v / (self.ncx + 1))
    }

    /// Coordinates of lattice point `(i, j)`. The far edges are pinned to the
    /// domain bounds so boundary detection never depends on roundoff.
    pub fn vertex_coords(&self, v: usize) -> (f64, f64) {
        let (i, j) = self.vertex_ij(v);
        (
            lattice_coord(self.domain.xmin, self.domain.xmax, i, self.ncx),
            lattice_coord(self.domain.ymin, self.domain.ymax, j, self.ncy),
        )
    }

    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.ncx, e / self.ncx)
    }

    pub fn element_index(&self, i: usize, j: usize) -> usize {
        j * self.ncx + i
    }

    /// Vertices of element `e` in counter-clockwise order starting at the
    /// lower-left corner.
    pub fn element_vertices(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_ij(e);
        [
            self.vertex_index(i, j),
            self.vertex_index(i + 1, j),
            self.vertex_index(i + 1, j + 1),
            self.vertex_index(i, j + 1),
        ]
    }

    /// Lower-left corner of element `e`.
    pub fn element_origin(&self, e: usize) -> (f64, f64) {
        let (i, j) = self.element_ij(e);
        (
            lattice_coord(self.domain.xmin, self.domain.xmax, i, self.ncx),
            lattice_coord(self.domain.ymin, self.domain.ymax, j, self.ncy),
        )
    }

    /// Maps a reference point `(xi, eta)` of `[-1, 1]^2` on element `e` to
    /// physical coordinates.
    pub fn to_physical(&self, e: usize, xi: f64, eta: f64) -> (f64, f64) {
        let (x0, y0) = self.element_origin(e);
        (x0 + 0.5 * (xi + 1.0) * self.hx, y0 + 0.5 * (eta + 1.0) * self.hy)
    }

    /// Finds the element containing `(x, y)` and the reference coordinates
    /// of the point inside it. Points on shared edges go to the element with
    /// the larger index; points outside the domain are clamped.
    pub fn locate(&self, x: f64, y: f64) -> (usize, f64, f64) {
        let (i, xi) = locate_1d(x, self.domain.xmin, self.hx, self.ncx);
        let (j, eta) = locate_1d(y, self.domain.ymin, self.hy, self.ncy);
        (self.element_index(i, j), xi, eta)
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let (i, j) = self.vertex_ij(v);
        i == 0 || j == 0 || i == self.ncx || j == self.ncy
    }

    /// Vertices on the domain boundary, in increasing index order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| self.is_boundary_vertex(v))
            .collect()
    }

    /// Uniform bisection of every cell.
    pub fn refine(&self) -> Self {
        Self {
            domain: self.domain,
            ncx: 2 * self.ncx,
            ncy: 2 * self.ncy,
            hx: self.hx / 2.0,
            hy: self.hy / 2.0,
        }
    }

    /// True when `fine` is obtained from `self` by an integer number of
    /// uniform bisections per axis, i.e. every cell of `fine` lies inside
    /// exactly one cell of `self`.
    pub fn is_refined_by(&self, fine: &StructuredQuadMesh) -> bool {
        fn divides(coarse: usize, fine: usize) -> bool {
            fine >= coarse && fine % coarse == 0
        }
        self.domain == fine.domain && divides(self.ncx, fine.ncx) && divides(self.ncy, fine.ncy)
    }
}

fn lattice_coord(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    if i == n {
        hi
    } else {
        lo + (hi - lo) * (i as f64) / (n as f64)
    }
}

fn locate_1d(x: f64, lo: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (x - lo) / h;
    let cell = if s <= 0.0 { 0 } else { (s.floor() as usize).min(n - 1) };
    let local = s - cell as f64;
    (cell, 2.0 * local - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn square8(nc: usize) -> StructuredQuadMesh {
        StructuredQuadMesh::new(RectDomain::centered_square(8.0).unwrap(), nc, nc).unwrap()
    }

    #[test]
    fn counts_on_eighty_cell_square() {
        let m = square8(80);
        assert_eq!(m.n_elements(), 6400);
        assert_eq!(m.n_vertices(), 6561);
        assert!((m.h() - 0.2).abs() < 1e-15);
        assert_eq!(m.boundary_vertices().len(), 320);
    }

    #[test]
    fn small_unit_meshes() {
        let m1 = StructuredQuadMesh::new(RectDomain::unit_square(), 1, 1).unwrap();
        assert_eq!((m1.n_elements(), m1.n_vertices()), (1, 4));
        assert_eq!(m1.boundary_vertices(), vec![0, 1, 2, 3]);

        let m2 = StructuredQuadMesh::new(RectDomain::unit_square(), 2, 2).unwrap();
        assert_eq!((m2.n_elements(), m2.n_vertices()), (4, 9));
        assert_eq!(m2.h(), 0.5);
        let b = m2.boundary_vertices();
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&4));
    }

    #[test]
    fn zero_cells_rejected() {
        assert!(StructuredQuadMesh::new(RectDomain::unit_square(), 0, 3).is_err());
        assert!(RectDomain::new(1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn boundary_count_formula_anisotropic() {
        for (nx, ny) in [(1, 5), (3, 2), (7, 7), (12, 1)] {
            let m = StructuredQuadMesh::new(RectDomain::unit_square(), nx, ny).unwrap();
            assert_eq!(m.boundary_vertices().len(), 2 * (nx + ny));
            let interior = (0..m.n_vertices()).filter(|&v| !m.is_boundary_vertex(v)).count();
            assert_eq!(interior + 2 * (nx + ny), m.n_vertices());
        }
    }

    #[test]
    fn element_areas_sum_to_domain() {
        let m = StructuredQuadMesh::new(RectDomain::new(-1.0, 2.5, 0.3, 1.7).unwrap(), 7, 5).unwrap();
        let total: f64 = (0..m.n_elements()).map(|_| m.element_area()).sum();
        assert!((total - m.domain().area()).abs() <= 1e-13 * m.domain().area());
    }

    #[test]
    fn refinement_is_nested() {
        let m = StructuredQuadMesh::new(RectDomain::unit_square(), 2, 2).unwrap();
        let f = m.refine();
        assert_eq!((f.ncx(), f.ncy(), f.n_vertices()), (4, 4, 25));
        let ff = f.refine();
        let key = |(x, y): (f64, f64)| ((x * 1e9).round() as i64, (y * 1e9).round() as i64);
        let fine: HashSet<_> = (0..ff.n_vertices()).map(|v| key(ff.vertex_coords(v))).collect();
        for mesh in [&m, &f] {
            for v in 0..mesh.n_vertices() {
                assert!(fine.contains(&key(mesh.vertex_coords(v))));
            }
        }
        assert!(m.is_refined_by(&ff));
        assert!(!f.is_refined_by(&m));
        let big = square8(50).refine();
        assert_eq!((big.ncx(), big.ncy()), (100, 100));
    }

    #[test]
    fn locate_roundtrip() {
        let m = square8(10);
        for e in [0, 5, 37, 99] {
            let (x, y) = m.to_physical(e, 0.25, -0.5);
            let (e2, xi, eta) = m.locate(x, y);
            assert_eq!(e, e2);
            assert!((xi - 0.25).abs() < 1e-12 && (eta + 0.5).abs() < 1e-12);
        }
    }
}
