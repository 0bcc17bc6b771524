//! Boundary forms, their 2x2 minors and the regular / irregular / degenerate split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Relative threshold used to decide whether a minor (or a sum of minors) is zero.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-12;

/// The six minors `A_jk` (`1 <= j < k <= 4`) of the boundary coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minors {
    pub a12: C64,
    pub a13: C64,
    pub a14: C64,
    pub a23: C64,
    pub a24: C64,
    pub a34: C64,
}

impl Minors {
    /// Minor for columns `j < k` (1-based). Reversed indices give the negated minor,
    /// so `get(3, 2) == -A_23`.
    pub fn get(&self, j: usize, k: usize) -> C64 {
        match (j, k) {
            (1, 2) => self.a12,
            (1, 3) => self.a13,
            (1, 4) => self.a14,
            (2, 3) => self.a23,
            (2, 4) => self.a24,
            (3, 4) => self.a34,
            (j, k) if j > k => -self.get(k, j),
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn as_array(&self) -> [C64; 6] {
        [self.a12, self.a13, self.a14, self.a23, self.a24, self.a34]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `A12 A34 - A13 A24 + A14 A23`, zero for any matrix of rank two.
    pub fn plucker_residual(&self) -> C64 {
        self.a12 * self.a34 - self.a13 * self.a24 + self.a14 * self.a23
    }

    pub fn scaled(&self, s: C64) -> Minors {
        Minors {
            a12: self.a12 * s,
            a13: self.a13 * s,
            a14: self.a14 * s,
            a23: self.a23 * s,
            a24: self.a24 * s,
            a34: self.a34 * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BcClass {
    Regular,
    Irregular,
    Degenerate,
}

/// Coefficients `a_jk` of the boundary forms
/// `U_j(y) = a_j1 y1(0) + a_j2 y2(0) + a_j3 y1(pi) + a_j4 y2(pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    a: [[C64; 4]; 2],
    minors: Minors,
}

impl BoundaryMatrix {
    pub fn new(a: [[C64; 4]; 2]) -> Result<Self> {
        for z in a.iter().flatten() {
            crate::ensure_finite(*z, "boundary coefficient")?;
        }
        let minors = compute_minors(&a)?;
        Ok(Self { a, minors })
    }

    /// Convenience constructor for real coefficient matrices.
    pub fn from_real(a: [[f64; 4]; 2]) -> Result<Self> {
        let mut c = [[C64::new(0.0, 0.0); 4]; 2];
        for (row, src) in c.iter_mut().zip(a.iter()) {
            for (z, &x) in row.iter_mut().zip(src.iter()) {
                *z = C64::new(x, 0.0);
            }
        }
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[[C64; 4]; 2] {
        &self.a
    }

    pub fn minors(&self) -> &Minors {
        &self.minors
    }

    /// Left-multiplies the coefficient matrix by `t` (a change of basis of the forms).
    pub fn mixed(&self, t: [[C64; 2]; 2]) -> Result<Self> {
        let mut out = [[C64::new(0.0, 0.0); 4]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, z) in row.iter_mut().enumerate() {
                *z = t[i][0] * self.a[0][k] + t[i][1] * self.a[1][k];
            }
        }
        Self::new(out)
    }

    /// Value of the two boundary forms on a vector function given its endpoint values.
    pub fn apply(&self, y_at_0: [C64; 2], y_at_pi: [C64; 2]) -> [C64; 2] {
        let v = [y_at_0[0], y_at_0[1], y_at_pi[0], y_at_pi[1]];
        let mut out = [C64::new(0.0, 0.0); 2];
        for (o, row) in out.iter_mut().zip(self.a.iter()) {
            *o = row.iter().zip(v.iter()).map(|(a, y)| a * y).sum();
        }
        out
    }

    pub fn classify(&self) -> BcClass {
        classify_bc(self, DEFAULT_ZERO_THRESHOLD)
    }

    /// Absolute zero threshold for minors: `rel * max |A_jk|`.
    pub fn zero_threshold(&self, rel: f64) -> f64 {
        rel * self.minors.max_abs()
    }

    pub fn is_zero(&self, z: C64) -> bool {
        z.norm() <= self.zero_threshold(DEFAULT_ZERO_THRESHOLD)
    }
}

fn det2(a: &[[C64; 4]; 2], j: usize, k: usize) -> C64 {
    a[0][j] * a[1][k] - a[0][k] * a[1][j]
}

/// All six 2x2 minors of a 2x4 matrix. Fails when the rows are linearly dependent.
pub fn compute_minors(a: &[[C64; 4]; 2]) -> Result<Minors> {
    let m = Minors {
        a12: det2(a, 0, 1),
        a13: det2(a, 0, 2),
        a14: det2(a, 0, 3),
        a23: det2(a, 1, 2),
        a24: det2(a, 1, 3),
        a34: det2(a, 2, 3),
    };
    let r0: f64 = a[0].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let r1: f64 = a[1].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    // All minors vanish iff the rows are dependent; compare against the row-norm scale.
    if m.max_abs() <= 1e-13 * r0 * r1 || r0 == 0.0 || r1 == 0.0 {
        return Err(Error::RankDeficient { max_minor: m.max_abs() });
    }
    Ok(m)
}

/// Regular iff `A14 A23 != 0`; otherwise irregular iff `(A12 + A34)(|A23| + |A14|) != 0`,
/// degenerate else. Zero tests use `rel_threshold * max |A_jk|`.
pub fn classify_bc(bc: &BoundaryMatrix, rel_threshold: f64) -> BcClass {
    let m = bc.minors();
    let thr = bc.zero_threshold(rel_threshold);
    let nz = |z: C64| z.norm() > thr;
    if nz(m.a14) && nz(m.a23) {
        BcClass::Regular
    } else if nz(m.a12 + m.a34) && (nz(m.a23) || nz(m.a14)) {
        BcClass::Irregular
    } else {
        BcClass::Degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn close(a: C64, b: f64) -> bool {
        (a - c(b)).norm() < 1e-15
    }

    #[test]
    fn periodic_minors() {
        let bc = BoundaryMatrix::from_real([[1., 0., -1., 0.], [0., 1., 0., -1.]]).unwrap();
        let m = bc.minors();
        assert!(close(m.a12, 1.0));
        assert!(close(m.a13, 0.0));
        assert!(close(m.a14, -1.0));
        assert!(close(m.a23, 1.0));
        assert!(close(m.a24, 0.0));
        assert!(close(m.a34, 1.0));
        assert_eq!(bc.classify(), BcClass::Regular);
    }

    #[test]
    fn only_columns_one_and_three() {
        let bc = BoundaryMatrix::from_real([[1., 0., 0., 0.], [0., 0., 1., 0.]]).unwrap();
        let m = bc.minors();
        assert!(close(m.a13, 1.0));
        for z in [m.a12, m.a14, m.a23, m.a24, m.a34] {
            assert!(close(z, 0.0));
        }
        assert_eq!(bc.classify(), BcClass::Degenerate);
    }

    #[test]
    fn irregular_example() {
        let bc = BoundaryMatrix::from_real([[1., 0., 1., 0.], [0., 1., 0., 0.]]).unwrap();
        let m = bc.minors();
        assert!(close(m.a12, 1.0));
        assert!(close(m.a23, -1.0));
        for z in [m.a13, m.a14, m.a24, m.a34] {
            assert!(close(z, 0.0));
        }
        assert_eq!(bc.classify(), BcClass::Irregular);
    }

    #[test]
    fn rejects_dependent_rows() {
        let err = BoundaryMatrix::from_real([[1., 2., 3., 4.], [2., 4., 6., 8.]]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
        assert!(BoundaryMatrix::from_real([[0.; 4], [0., 1., 0., 0.]]).is_err());
    }

    #[test]
    fn reversed_minor_index_is_negated() {
        let bc = BoundaryMatrix::from_real([[1., 0., 1., 0.], [0., 1., 0., 0.]]).unwrap();
        assert_eq!(bc.minors().get(3, 2), -bc.minors().a23);
        assert_eq!(bc.minors().get(4, 2), -bc.minors().a24);
    }
}
