use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

use super::InequalitySystem;
use crate::error::{Error, Result};

/// Convex hull of `X^M` in real coordinates, `A x_r <= b`.
///
/// Row `(i - 1) * M + m` carries `beta_i = [cos phi_i, -sin phi_i]` in the two
/// columns of antenna `m`, with `phi_i = 2 pi i / alpha_x`, `i = 1..alpha_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub antennas: usize,
    pub alpha_x: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// The hull restricted to the free coordinates once the first `fixed`
/// antennas are pinned. Rows that only touched fixed coordinates are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPolyhedron {
    pub fixed: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

pub fn build_polyhedron(antennas: usize, alpha_x: usize) -> Result<Polyhedron> {
    if antennas == 0 {
        return Err(Error::Parameter("antenna count must be >= 1".into()));
    }
    if alpha_x < 2 {
        return Err(Error::Parameter(format!("alpha_x must be >= 2, got {alpha_x}")));
    }
    let rows = antennas * alpha_x;
    let mut a = DMatrix::zeros(rows, 2 * antennas);
    for i in 1..=alpha_x {
        let phi = TAU * i as f64 / alpha_x as f64;
        let (s, c) = phi.sin_cos();
        for m in 0..antennas {
            let r = (i - 1) * antennas + m;
            a[(r, 2 * m)] = c;
            a[(r, 2 * m + 1)] = -s;
        }
    }
    let offset = (PI / alpha_x as f64).cos() / (antennas as f64).sqrt();
    Ok(Polyhedron { antennas, alpha_x, a, b: DVector::from_element(rows, offset) })
}

pub fn restrict_polyhedron(poly: &Polyhedron, fixed: usize) -> Result<SubPolyhedron> {
    if fixed == 0 || fixed >= poly.antennas {
        return Err(Error::OutOfRange { index: fixed, max: poly.antennas.saturating_sub(1) });
    }
    Ok(restrict_unchecked(poly, fixed))
}

/// Like [`restrict_polyhedron`] but accepts `fixed = 0` (the whole hull).
pub(crate) fn restrict_unchecked(poly: &Polyhedron, fixed: usize) -> SubPolyhedron {
    let first = 2 * fixed;
    let cols = poly.a.ncols() - first;
    let keep: Vec<usize> = (0..poly.a.nrows())
        .filter(|&r| (first..poly.a.ncols()).any(|c| poly.a[(r, c)] != 0.0))
        .collect();
    let mut a = DMatrix::zeros(keep.len(), cols);
    let mut b = DVector::zeros(keep.len());
    for (i, &r) in keep.iter().enumerate() {
        for c in 0..cols {
            a[(i, c)] = poly.a[(r, first + c)];
        }
        b[i] = poly.b[r];
    }
    SubPolyhedron { fixed, a, b }
}

impl Polyhedron {
    pub fn contains(&self, x_r: &[f64], tol: f64) -> bool {
        (0..self.a.nrows()).all(|r| self.a.row(r).iter().zip(x_r).map(|(a, x)| a * x).sum::<f64>() <= self.b[r] + tol)
    }

    pub fn to_system(&self) -> InequalitySystem {
        InequalitySystem::from_dense(&self.a, self.b.as_slice())
    }
}

impl SubPolyhedron {
    pub fn free_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn contains(&self, v_r: &[f64], tol: f64) -> bool {
        (0..self.a.nrows()).all(|r| self.a.row(r).iter().zip(v_r).map(|(a, x)| a * x).sum::<f64>() <= self.b[r] + tol)
    }

    pub fn to_system(&self) -> InequalitySystem {
        InequalitySystem::from_dense(&self.a, self.b.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{to_real, PskAlphabet};

    #[test]
    fn single_antenna_qpsk_is_a_box() {
        let p = build_polyhedron(1, 4).unwrap();
        let want = [[0.0, -1.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        for (r, w) in want.iter().enumerate() {
            assert!((p.a[(r, 0)] - w[0]).abs() < 1e-15 && (p.a[(r, 1)] - w[1]).abs() < 1e-15);
        }
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert!(p.b.iter().all(|&b| (b - half).abs() < 1e-15));
        let two = build_polyhedron(2, 4).unwrap();
        assert!(two.b.iter().all(|&b| (b - 0.5).abs() < 1e-15));
    }

    #[test]
    fn alphabet_points_are_tight_on_two_rows() {
        for (m, alpha) in [(1, 4), (3, 4), (2, 8), (2, 3)] {
            let p = build_polyhedron(m, alpha).unwrap();
            let a = PskAlphabet::transmit(alpha, m).unwrap();
            for i in 0..alpha {
                let x = vec![a.point(i); m];
                let x_r = to_real(&x);
                assert!(p.contains(&x_r, 1e-12));
                let tight = (0..p.a.nrows())
                    .filter(|&r| {
                        let lhs: f64 = p.a.row(r).iter().zip(x_r.iter()).map(|(u, v)| u * v).sum();
                        (lhs - p.b[r]).abs() < 1e-12
                    })
                    .count();
                assert_eq!(tight, 2 * m);
            }
        }
    }

    #[test]
    fn restriction_keeps_free_antenna_rows() {
        let p = build_polyhedron(2, 4).unwrap();
        let s = restrict_polyhedron(&p, 1).unwrap();
        assert_eq!(s.a.shape(), (4, 2));
        let single = build_polyhedron(1, 4).unwrap();
        assert_eq!(s.a, single.a);
        assert!(restrict_polyhedron(&p, 0).is_err());
        assert!(restrict_polyhedron(&p, 2).is_err());
        let big = build_polyhedron(5, 8).unwrap();
        let tail = restrict_polyhedron(&big, 4).unwrap();
        assert_eq!(tail.free_dim(), 2);
        assert_eq!(tail.a.nrows(), 8);
    }
}
