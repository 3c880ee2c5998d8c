//! Bookkeeping for symmetric matrices: half-vectorisation, the duplication
//! and elimination matrices, and the measurement map that turns `vech(A)`
//! into the product `A s`.
//!
//! `vech` stacks the lower triangle column by column, so for a 3x3 matrix
//! the order is `a00, a10, a20, a11, a21, a22`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Length of `vech` for an `n x n` matrix.
pub const fn half_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`half_dim`]; `None` when `len` is not a triangular number.
pub fn dim_from_half(len: usize) -> Option<usize> {
    let mut n = 0;
    while half_dim(n) < len {
        n += 1;
    }
    (half_dim(n) == len).then_some(n)
}

/// Position of element `(row, col)`, `row >= col`, inside `vech`.
#[inline]
pub fn vech_index(n: usize, row: usize, col: usize) -> usize {
    debug_assert!(row >= col && row < n);
    // Columns before `col` hold n, n-1, ..., n-col+1 entries.
    col * n - col * col.saturating_sub(1) / 2 + (row - col)
}

/// Half-vectorised symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymVec {
    n: usize,
    data: DVector<f64>,
}

impl SymVec {
    pub fn new(data: DVector<f64>) -> Result<Self> {
        let n = dim_from_half(data.len()).ok_or(Error::NotTriangular(data.len()))?;
        Ok(Self { n, data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(data))
    }

    /// `vech(scale * I_n)`.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut data = DVector::zeros(half_dim(n));
        for i in 0..n {
            data[vech_index(n, i, i)] = scale;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }
}

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

/// Relative symmetry check used by [`vech`].
pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = a.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let n = a.nrows();
    (0..n).all(|j| (j + 1..n).all(|i| (a[(i, j)] - a[(j, i)]).abs() <= rel_tol * scale))
}

pub fn vech(a: &DMatrix<f64>) -> Result<SymVec> {
    let n = check_square(a)?;
    if !is_symmetric(a, SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    let mut data = Vec::with_capacity(half_dim(n));
    for j in 0..n {
        for i in j..n {
            data.push(a[(i, j)]);
        }
    }
    Ok(SymVec {
        n,
        data: DVector::from_vec(data),
    })
}

pub fn unvech(h: &SymVec) -> DMatrix<f64> {
    let n = h.n;
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            a[(i, j)] = h.data[k];
            a[(j, i)] = h.data[k];
            k += 1;
        }
    }
    a
}

/// Column-stacking vectorisation.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// The 0/1 matrix `D` with `vec(A) = D vech(A)` for symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicationMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl DuplicationMatrix {
    pub fn new(n: usize) -> Self {
        let mut entries = DMatrix::zeros(n * n, half_dim(n));
        for j in 0..n {
            for i in j..n {
                let col = vech_index(n, i, j);
                entries[(i + j * n, col)] = 1.0;
                entries[(j + i * n, col)] = 1.0;
            }
        }
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// The elimination matrix `L` with `vech(A) = L vec(A)`.
pub fn elimination_matrix(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(half_dim(n), n * n);
    for j in 0..n {
        for i in j..n {
            l[(vech_index(n, i, j), i + j * n)] = 1.0;
        }
    }
    l
}

/// `(s^T ⊗ I) D`, the `n x n(n+1)/2` map with `dbar(s) vech(A) = A s`.
pub fn dbar(s: &DVector<f64>, dup: &DuplicationMatrix) -> Result<DMatrix<f64>> {
    let n = dup.n;
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    // Row r of (s^T ⊗ I) picks entries r, r + n, r + 2n, ... of vec(.) weighted by s.
    let d = &dup.entries;
    let mut out = DMatrix::zeros(n, half_dim(n));
    for r in 0..n {
        for (j, &sj) in s.iter().enumerate() {
            if sj == 0.0 {
                continue;
            }
            let row = d.row(r + j * n);
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    out[(r, c)] += sj * v;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn vech_index_matches_column_order() {
        let n = 4;
        let mut k = 0;
        for j in 0..n {
            for i in j..n {
                assert_eq!(vech_index(n, i, j), k);
                k += 1;
            }
        }
    }

    #[test]
    fn vech_examples() {
        let a = dmatrix![2.0, -1.0; -1.0, 5.0];
        assert_eq!(vech(&a).unwrap().as_vector().as_slice(), &[2.0, -1.0, 5.0]);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(
            vech(&eye).unwrap().as_vector().as_slice(),
            &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn vech_rejects_asymmetric() {
        let a = dmatrix![1.0, 2.0; 2.1, 1.0];
        assert_eq!(vech(&a), Err(Error::NotSymmetric));
        let b = DMatrix::<f64>::zeros(2, 3);
        assert!(matches!(vech(&b), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn vech_accepts_rounding_asymmetry() {
        let a = dmatrix![1e6, 3.0; 3.0 + 1e-7, 2.0];
        assert!(vech(&a).is_ok());
    }

    #[test]
    fn unvech_examples() {
        let h = SymVec::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(unvech(&h), dmatrix![1.0, 2.0; 2.0, 3.0]);
        let h = SymVec::from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(unvech(&h), DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn non_triangular_length_rejected() {
        assert_eq!(
            SymVec::from_slice(&[1.0, 2.0]),
            Err(Error::NotTriangular(2))
        );
        assert_eq!(dim_from_half(10), Some(4));
        assert_eq!(dim_from_half(0), Some(0));
        assert_eq!(dim_from_half(7), None);
    }

    #[test]
    fn duplication_small_cases() {
        assert_eq!(DuplicationMatrix::new(1).matrix(), &dmatrix![1.0]);
        let d2 = DuplicationMatrix::new(2);
        assert_eq!(
            d2.matrix(),
            &dmatrix![
                1.0, 0.0, 0.0;
                0.0, 1.0, 0.0;
                0.0, 1.0, 0.0;
                0.0, 0.0, 1.0
            ]
        );
    }

    #[test]
    fn duplication_column_structure() {
        let n = 4;
        let d = DuplicationMatrix::new(n);
        for r in 0..n * n {
            assert_eq!(d.matrix().row(r).sum(), 1.0);
        }
        for j in 0..n {
            for i in j..n {
                let expected = if i == j { 1.0 } else { 2.0 };
                assert_eq!(d.matrix().column(vech_index(n, i, j)).sum(), expected);
            }
        }
    }

    #[test]
    fn elimination_inverts_duplication() {
        for n in 1..6 {
            let l = elimination_matrix(n);
            let d = DuplicationMatrix::new(n);
            assert_eq!(l * d.matrix(), DMatrix::identity(half_dim(n), half_dim(n)));
        }
    }

    #[test]
    fn dbar_examples() {
        let d1 = DuplicationMatrix::new(1);
        assert_eq!(
            dbar(&DVector::from_vec(alloc::vec![2.0]), &d1).unwrap(),
            dmatrix![2.0]
        );

        let d2 = DuplicationMatrix::new(2);
        let a = dmatrix![2.0, -1.0; -1.0, 5.0];
        let s = DVector::from_vec(alloc::vec![1.0, 0.0]);
        let out = dbar(&s, &d2).unwrap() * vech(&a).unwrap().as_vector();
        assert_eq!(out.as_slice(), &[2.0, -1.0]);

        let zero = dbar(&DVector::zeros(2), &d2).unwrap();
        assert_eq!(zero, DMatrix::zeros(2, 3));
    }

    #[test]
    fn dbar_dimension_mismatch() {
        let d2 = DuplicationMatrix::new(2);
        assert_eq!(
            dbar(&DVector::zeros(3), &d2),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        );
    }
}
