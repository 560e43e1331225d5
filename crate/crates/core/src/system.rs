//! Quasilinear systems `D(w) dw/dt + sum_k M_k(w) D(w) dw/dx_k = q(w)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiLinearSystem<T: Real> {
    pub d: DMatrix<T>,
    pub mk: Vec<DMatrix<T>>,
    pub q: DVector<T>,
}

impl<T: Real> QuasiLinearSystem<T> {
    pub fn new(d: DMatrix<T>, mk: Vec<DMatrix<T>>, q: DVector<T>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d.ncols(),
            });
        }
        for m in &mk {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows().max(m.ncols()),
                });
            }
        }
        if q.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: q.len(),
            });
        }
        Ok(Self { d, mk, q })
    }

    pub fn dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn spatial_dims(&self) -> usize {
        self.mk.len()
    }

    /// 2-norm condition number of `D`; infinite when `D` is singular.
    pub fn d_condition(&self) -> T {
        condition_number(&self.d)
    }

    /// `sum_k n_k M_k`.
    pub fn combination(&self, n: &[T]) -> DMatrix<T> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (m, &c) in self.mk.iter().zip(n) {
            out += m * c;
        }
        out
    }

    /// Coefficient matrices of the normal form `dw/dt + sum_k A_k dw/dx_k = D^{-1} q`,
    /// i.e. `A_k = D^{-1} M_k D`.
    pub fn normal_form(&self) -> Result<Vec<DMatrix<T>>> {
        let lu = self.d.clone().lu();
        let dinv = lu
            .try_inverse()
            .ok_or(Error::Singular(f64::INFINITY))?;
        Ok(self.mk.iter().map(|m| &dinv * m * &self.d).collect())
    }

    /// `D^{-1} q`.
    pub fn normal_source(&self) -> Result<DVector<T>> {
        self.d
            .clone()
            .lu()
            .solve(&self.q)
            .ok_or(Error::Singular(f64::INFINITY))
    }
}

/// Ratio of extreme singular values; infinite for a singular or empty matrix.
pub fn condition_number<T: Real>(a: &DMatrix<T>) -> T {
    if a.is_empty() {
        return T::zero();
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().copied().fold(T::zero(), |m, x| if x > m { x } else { m });
    let min = sv.iter().copied().fold(max, |m, x| if x < m { x } else { m });
    if min <= T::zero() || max <= T::zero() {
        T::lit(f64::INFINITY)
    } else {
        max / min
    }
}

/// Largest absolute entry.
pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, x| if x.abs() > m { x.abs() } else { m })
}
