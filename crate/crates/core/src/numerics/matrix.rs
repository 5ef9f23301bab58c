use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense complex matrix, row-major in its serialized form.
///
/// Every operator in the crate (states, POVM effects, Kraus factors,
/// representation images, intertwiners, Choi matrices) is a `CMatrix`.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<Complex64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::DimensionMismatch("non-finite matrix entry".into()));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    /// Real matrix from nested rows; panics on ragged input (test and
    /// fixture convenience).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { Complex64::new(entries[i], 0.0) } else { ZERO })
    }

    pub fn column(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), 1, |i, _| entries[i])
    }

    /// Standard basis vector `e_i` of length `n` as a column.
    pub fn basis_vector(n: usize, i: usize) -> Self {
        Self::from_fn(n, 1, |r, _| if r == i { ONE } else { ZERO })
    }

    /// Matrix unit `E_ij` in `M_n`.
    pub fn matrix_unit(n: usize, i: usize, j: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == i && c == j { ONE } else { ZERO })
    }

    /// Rank-one projector `|v><v|` for a column `v`.
    pub fn projector(v: &CMatrix) -> Self {
        v * &v.adjoint()
    }

    pub fn from_inner(inner: DMatrix<Complex64>) -> Self {
        Self(inner)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn conj(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self(&self.0 * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    /// Tensor product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// Max-norm `max |a_ij|`.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        if self.rows() == 0 || self.cols() == 0 {
            return 0.0;
        }
        super::decomp::singular_values(self)[0]
    }

    /// `‖self − other‖_max`; panics on shape mismatch.
    pub fn max_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_diff shape mismatch");
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// `‖a − a*‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(a + a*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    pub fn is_hermitian(&self, abs_eq: f64) -> bool {
        self.hermiticity_defect() <= abs_eq
    }

    /// `‖a*a − 1‖_max` (and `‖aa* − 1‖_max` for square matrices).
    pub fn unitarity_defect(&self) -> f64 {
        let a = self.adjoint();
        let left = (&a * self).max_diff(&Self::identity(self.cols()));
        if self.is_square() {
            left.max((self * &a).max_diff(&Self::identity(self.rows())))
        } else {
            left
        }
    }

    /// `[a, b] = ab − ba`.
    pub fn commutator(&self, other: &CMatrix) -> Self {
        self * other - other * self
    }

    /// Sum of an iterator of equally shaped matrices; `None` when empty.
    pub fn sum<'a>(items: impl IntoIterator<Item = &'a CMatrix>) -> Option<CMatrix> {
        let mut iter = items.into_iter();
        let first = iter.next()?.clone();
        Some(iter.fold(first, |acc, m| acc + m))
    }

    /// `<u, v>` for column vectors (conjugate-linear in `u`).
    pub fn inner_product(&self, other: &CMatrix) -> Complex64 {
        assert_eq!(self.shape(), other.shape());
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `v* a v` for a column `v`.
    pub fn expectation(&self, v: &CMatrix) -> Complex64 {
        (v.adjoint() * self * v)[(0, 0)]
    }

    /// Coefficients of `self` in the matrix-unit basis, row-major.
    pub fn unit_coefficients(&self) -> Vec<Complex64> {
        self.row_major()
    }

    pub fn view(&self, row: usize, col: usize, rows: usize, cols: usize) -> Self {
        Self(self.0.view((row, col), (rows, cols)).into_owned())
    }

    pub fn set_block(&mut self, row: usize, col: usize, block: &CMatrix) {
        self.0.view_mut((row, col), block.shape()).copy_from(&block.0);
    }

    /// Horizontal concatenation; all blocks need the same row count.
    pub fn hstack(blocks: &[CMatrix]) -> Result<CMatrix> {
        let rows = blocks.first().map_or(0, CMatrix::rows);
        if blocks.iter().any(|b| b.rows() != rows) {
            return Err(Error::DimensionMismatch("hstack row counts differ".into()));
        }
        let cols: usize = blocks.iter().map(CMatrix::cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut at = 0;
        for b in blocks {
            out.set_block(0, at, b);
            at += b.cols();
        }
        Ok(out)
    }
}

/// Tensor product of two matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kron(b)
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut Complex64 {
        &mut self.0[idx]
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix($trait::$method(self.0, &rhs.0))
            }
        }
        impl $trait<CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix($trait::$method(&self.0, rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.0 += &rhs.0;
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        self.0 -= &rhs.0;
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-self.0)
    }
}

impl Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: Complex64) -> CMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: f64) -> CMatrix {
        self.scale_real(rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self.row_major();
        MatrixRepr {
            rows: self.rows(),
            cols: self.cols(),
            re: entries.iter().map(|z| z.re).collect(),
            im: entries.iter().map(|z| z.im).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MatrixRepr::deserialize(deserializer)?;
        if repr.re.len() != repr.im.len() {
            return Err(serde::de::Error::custom(format!(
                "re has {} entries but im has {}",
                repr.re.len(),
                repr.im.len()
            )));
        }
        let entries: Vec<Complex64> = repr
            .re
            .iter()
            .zip(&repr.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        CMatrix::from_row_major(repr.rows, repr.cols, &entries).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    fn pauli_z() -> CMatrix {
        CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    #[test]
    fn kron_identity_and_unit() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
        let a = CMatrix::from_rows(&[&[ONE, I], &[Complex64::new(2.0, -1.0), ZERO]]);
        assert_eq!(kron(&a, &CMatrix::identity(1)), a);
    }

    #[test]
    fn kron_x_z_entries() {
        // X ⊗ Z = [[0, Z], [Z, 0]]: row 0 is (0, 0, 1, 0)
        let xz = kron(&pauli_x(), &pauli_z());
        assert_eq!(xz[(0, 3)], ZERO);
        assert_eq!(xz[(0, 2)], ONE);
        assert_eq!(xz[(1, 3)], -ONE);
    }

    #[test]
    fn json_layout_is_row_major() {
        let a = CMatrix::from_rows(&[&[ONE, I], &[ZERO, Complex64::new(0.5, -2.0)]]);
        let json = serde_json::to_value(&a).unwrap();
        assert_eq!(json["rows"], 2);
        assert_eq!(json["re"], serde_json::json!([1.0, 0.0, 0.0, 0.5]));
        assert_eq!(json["im"], serde_json::json!([0.0, 1.0, 0.0, -2.0]));
        let back: CMatrix = serde_json::from_value(json).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn json_rejects_bad_lengths() {
        let bad = serde_json::json!({"rows": 2, "cols": 2, "re": [1.0, 0.0, 0.0], "im": [0.0, 0.0, 0.0]});
        assert!(serde_json::from_value::<CMatrix>(bad).is_err());
        let bad = serde_json::json!({"rows": 1, "cols": 1, "re": [1.0], "im": []});
        assert!(serde_json::from_value::<CMatrix>(bad).is_err());
    }

    #[test]
    fn hermiticity_and_unitarity() {
        let x = pauli_x();
        assert!(x.is_hermitian(1e-12));
        assert!(x.unitarity_defect() < 1e-15);
        let n = CMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]);
        assert!((n.hermiticity_defect() - 1.0).abs() < 1e-15);
        assert!((n.op_norm() - 1.0).abs() < 1e-12);
    }
}
