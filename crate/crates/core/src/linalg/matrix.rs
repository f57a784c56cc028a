use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::MatrixDocument;

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Largest dimension accepted from callers.
pub const MAX_DIM: usize = 64;

pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square complex matrix with `1 <= n <= 64` and finite entries.
///
/// Arithmetic between valid matrices stays square; overflow to non-finite
/// entries is only rechecked at the validated constructors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MatrixDocument", try_from = "MatrixDocument")]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let n = m.nrows();
        if n == 0 || n > MAX_DIM {
            return Err(Error::DimensionOutOfRange(n));
        }
        for j in 0..n {
            for i in 0..n {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be square and in range.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(n, n, f))
    }

    /// Builds a matrix from real rows. Panics if the rows are ragged.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        for r in rows {
            assert_eq!(r.len(), n, "ragged rows");
        }
        Self::from_fn(n, |i, j| c64(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Schema {
                    path: format!("row {i}"),
                    message: format!("expected {n} entries, found {}", r.len()),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn diag(d: &[C64]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn diag_real(d: &[f64]) -> Self {
        Self::diag(&d.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>())
    }

    /// `block ⊕ 0` padded up to dimension `n`.
    pub fn embed(block: &DMatrix<C64>, n: usize) -> Self {
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (block.nrows(), block.ncols())).copy_from(block);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    /// `self^k` by repeated squaring; `self^0 = I`.
    pub fn pow(&self, k: u32) -> Self {
        let n = self.dim();
        let mut result = DMatrix::identity(n, n);
        let mut base = self.0.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Self(result)
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        &self.0 * x
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let scale = self.frobenius_norm().max(1.0);
        (&self.0 - self.0.adjoint()).norm() <= tol * scale
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn inverse(&self) -> Result<Self> {
        self.0.clone().try_inverse().map(Self).ok_or(Error::Singular)
    }

    pub fn spectral_norm(&self) -> f64 {
        super::decomp::singular_values(&self.0).first().copied().unwrap_or(0.0)
    }

    /// Ratio of extreme singular values; infinite for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let sv = super::decomp::singular_values(&self.0);
        let lo = sv.last().copied().unwrap_or(0.0);
        if lo == 0.0 {
            f64::INFINITY
        } else {
            sv[0] / lo
        }
    }

    pub fn commutator_norm_with(&self, other: &Self) -> f64 {
        (&self.0 * &other.0 - &other.0 * &self.0).norm()
    }
}

impl From<ComplexMatrix> for DMatrix<C64> {
    fn from(m: ComplexMatrix) -> Self {
        m.0
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix($tr::$f(&self.0, &rhs.0))
            }
        }
        impl $tr<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix($tr::$f(&self.0, &rhs.0))
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $f(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix($tr::$f(&self.0, &rhs.0))
            }
        }
    };
}

binop!(Add, add);
binop!(Sub, sub);
binop!(Mul, mul);

impl Mul<C64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: C64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// Bilinear pairing `<x, f> = f(x) = Σ f_i x_i` (no conjugation).
pub fn pairing(x: &CVector, f: &CVector) -> C64 {
    x.iter().zip(f.iter()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(matches!(
            ComplexMatrix::new(DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        assert!(matches!(
            ComplexMatrix::new(DMatrix::zeros(0, 0)),
            Err(Error::DimensionOutOfRange(0))
        ));
        assert!(matches!(
            ComplexMatrix::new(DMatrix::zeros(65, 65)),
            Err(Error::DimensionOutOfRange(65))
        ));
        let mut m = DMatrix::zeros(2, 2);
        m[(1, 0)] = c64(f64::NAN, 0.0);
        assert!(matches!(ComplexMatrix::new(m), Err(Error::NonFinite { row: 1, col: 0 })));
    }

    #[test]
    fn power_by_squaring_matches_repeated_product() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[0.5, -1.0]]);
        let mut direct = ComplexMatrix::identity(2);
        for k in 0..12u32 {
            assert!((&a.pow(k) - &direct).frobenius_norm() <= 1e-9 * direct.frobenius_norm().max(1.0));
            direct = &direct * &a;
        }
    }

    #[test]
    fn embed_pads_with_zeros() {
        let b = DMatrix::from_element(2, 2, c64(1.0, 0.0));
        let m = ComplexMatrix::embed(&b, 4);
        assert_eq!(m.trace(), c64(2.0, 0.0));
        assert_eq!(m.get(3, 3), c64(0.0, 0.0));
    }
}
