//! Fill-reducing orderings for lattice-structured matrices.

use std::sync::Arc;

const LEAF: usize = 32;

/// Symmetric permutation to apply before factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    /// Geometric nested dissection. `coords[r]` is the lattice position of
    /// unknown `r`; separators are lattice lines at multiples of `stride`,
    /// which must be lines that no element straddles.
    Lattice { coords: Arc<Vec<(usize, usize)>>, stride: usize },
}

impl Ordering {
    /// `perm[new] = old`.
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..n).collect(),
            Ordering::Lattice { coords, stride } => {
                assert_eq!(coords.len(), n, "lattice ordering built for a different size");
                nested_dissection(coords, *stride)
            }
        }
    }
}

/// Orders unknowns so that each recursive separator comes after the two
/// halves it splits.
pub fn nested_dissection(coords: &[(usize, usize)], stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut out = Vec::with_capacity(coords.len());
    dissect((0..coords.len()).collect(), coords, stride, &mut out);
    out
}

fn dissect(ids: Vec<usize>, coords: &[(usize, usize)], stride: usize, out: &mut Vec<usize>) {
    if ids.len() <= LEAF {
        out.extend(ids);
        return;
    }
    let (mut ilo, mut ihi, mut jlo, mut jhi) = (usize::MAX, 0, usize::MAX, 0);
    for &r in &ids {
        let (i, j) = coords[r];
        ilo = ilo.min(i);
        ihi = ihi.max(i);
        jlo = jlo.min(j);
        jhi = jhi.max(j);
    }
    let axes = if ihi - ilo >= jhi - jlo { [(0, ilo, ihi), (1, jlo, jhi)] } else { [(1, jlo, jhi), (0, ilo, ihi)] };
    let Some((axis, line)) = axes.iter().find_map(|&(ax, lo, hi)| split_line(lo, hi, stride).map(|s| (ax, s))) else {
        out.extend(ids);
        return;
    };
    let key = |r: usize| if axis == 0 { coords[r].0 } else { coords[r].1 };
    let (mut left, mut right, mut sep) = (Vec::new(), Vec::new(), Vec::new());
    for r in ids {
        match key(r).cmp(&line) {
            std::cmp::Ordering::Less => left.push(r),
            std::cmp::Ordering::Greater => right.push(r),
            std::cmp::Ordering::Equal => sep.push(r),
        }
    }
    dissect(left, coords, stride, out);
    dissect(right, coords, stride, out);
    out.extend(sep);
}

/// Multiple of `stride` strictly inside `(lo, hi)` closest to the midpoint.
fn split_line(lo: usize, hi: usize, stride: usize) -> Option<usize> {
    if hi <= lo + 1 {
        return None;
    }
    let mid = (lo + hi) / 2;
    let down = mid - mid % stride;
    let up = down + stride;
    [down, up]
        .into_iter()
        .filter(|&s| s > lo && s < hi)
        .min_by_key(|&s| s.abs_diff(mid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissection_is_a_permutation() {
        let coords: Vec<_> = (1..40).flat_map(|j| (1..30).map(move |i| (i, j))).collect();
        for stride in [1, 2] {
            let mut p = nested_dissection(&coords, stride);
            assert_eq!(p.len(), coords.len());
            p.sort_unstable();
            assert!(p.iter().enumerate().all(|(a, &b)| a == b));
        }
    }

    #[test]
    fn top_separator_is_last_and_on_stride() {
        let coords: Vec<_> = (1..20).flat_map(|j| (1..20).map(move |i| (i, j))).collect();
        let p = nested_dissection(&coords, 2);
        let tail: Vec<_> = p[p.len() - 19..].iter().map(|&r| coords[r]).collect();
        let xs: std::collections::HashSet<_> = tail.iter().map(|c| c.0).collect();
        assert_eq!(xs.len(), 1);
        assert_eq!(xs.into_iter().next().unwrap() % 2, 0);
    }
}
