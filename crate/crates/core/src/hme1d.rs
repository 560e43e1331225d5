//! Matrices of the 1D moment system.
//!
//! Every matrix uses the unknown layout `(rho, u, theta, f_3, ..., f_M)`:
//! row and column `0` is `rho`, `1` is `u`, `2` is `theta` and `alpha >= 3`
//! is `f_alpha`. Indices are zero-based, so the one-based columns `2` and
//! `3` touched by the regularization are columns `1` and `2` here.
//!
//! Two independent routes produce the regularized matrix:
//!
//! * Grad's matrix [`assemble_grad_a`] followed by [`regularize`];
//! * the truncated-expansion deduction [`build_system_by_deduction`], which
//!   probes the derivative recursion `G` and the convection recursion `J`
//!   with unit vectors and never looks at Grad's matrix.
//!
//! They agree through `D(w) A_hat(w) = M(u, theta) D(w)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::state1d::{bgk_source, MomentState1D};
use crate::system::QuasiLinearSystem;

/// Grad's coefficient matrix `A(w)` for the closure `f_{M+1} = 0`.
pub fn assemble_grad_a<T: Real>(state: &MomentState1D<T>) -> Result<DMatrix<T>> {
    state.check()?;
    let m = state.order;
    let n = m + 1;
    let (rho, u, th) = (state.rho, state.u, state.theta);
    let c = |a: usize| state.coeff(a as isize);
    let ci = |a: isize| state.coeff(a);
    let half = T::lit(0.5);
    let num = |k: usize| T::from_usize_exact(k);

    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = u;
    a[(0, 1)] = rho;
    a[(1, 0)] = th / rho;
    a[(1, 1)] = u;
    a[(1, 2)] = T::one();
    a[(2, 1)] = num(2) * th;
    a[(2, 2)] = u;
    a[(2, 3)] = num(6) / rho;
    for alpha in 3..=m {
        let al = alpha as isize;
        a[(alpha, 0)] = -th * ci(al - 1) / rho;
        a[(alpha, 1)] = num(alpha + 1) * c(alpha);
        a[(alpha, 2)] = half * (th * ci(al - 3) + num(alpha - 1) * ci(al - 1));
        a[(alpha, 3)] -= num(3) * ci(al - 2) / rho;
        if alpha >= 4 {
            a[(alpha, alpha - 1)] += th;
        }
        a[(alpha, alpha)] += u;
        if alpha < m {
            a[(alpha, alpha + 1)] = num(alpha + 1);
        }
    }
    Ok(a)
}

/// `A - (M+1) f_M E_{M+1,2} - (M+1)/2 f_{M-1} E_{M+1,3}` (one-based `E`).
pub fn regularize<T: Real>(a: &DMatrix<T>, state: &MomentState1D<T>) -> Result<DMatrix<T>> {
    let n = state.dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.nrows().max(a.ncols()),
        });
    }
    let m = state.order;
    let mp1 = T::from_usize_exact(m + 1);
    let mut out = a.clone();
    out[(m, 1)] -= mp1 * state.coeff(m as isize);
    out[(m, 2)] -= mp1 * T::lit(0.5) * state.coeff(m as isize - 1);
    Ok(out)
}

/// `A_hat(w)` straight from the state.
pub fn regularized_matrix<T: Real>(state: &MomentState1D<T>) -> Result<DMatrix<T>> {
    regularize(&assemble_grad_a(state)?, state)
}

/// Block lower-triangular `D(w)`: `D_11 = diag(1, rho, rho/2, 1)`, identity
/// below, and rows `(0, f_{alpha-1}, f_{alpha-2}/2, 0)` for `alpha = 4..M`.
pub fn assemble_d<T: Real>(state: &MomentState1D<T>) -> Result<DMatrix<T>> {
    state.check()?;
    let n = state.dim();
    let mut d = DMatrix::identity(n, n);
    d[(1, 1)] = state.rho;
    d[(2, 2)] = state.rho * T::lit(0.5);
    for alpha in 4..n {
        let al = alpha as isize;
        d[(alpha, 1)] = state.coeff(al - 1);
        d[(alpha, 2)] = state.coeff(al - 2) * T::lit(0.5);
    }
    Ok(d)
}

/// Tridiagonal multiply-by-velocity-then-truncate operator: diagonal `u`,
/// subdiagonal `theta`, superdiagonal `1, 2, ..., M`.
pub fn assemble_mmat<T: Real>(u: T, theta: T, order: usize) -> Result<DMatrix<T>> {
    if !(theta > T::zero()) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    let n = order + 1;
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        m[(a, a)] = u;
        if a + 1 < n {
            m[(a, a + 1)] = T::from_usize_exact(a + 1);
            m[(a + 1, a)] = theta;
        }
    }
    Ok(m)
}

/// Expansion coefficients `G_alpha = df_alpha + du f_{alpha-1} + dtheta/2 f_{alpha-2}`
/// of a derivative of the truncated distribution, for `alpha = 0..=M`.
///
/// `dw` is a derivative of the unknown vector in the usual layout; the
/// structural constraints give `df_0 = drho`, `df_1 = df_2 = 0`.
pub fn derivative_coeffs_1d<T: Real>(state: &MomentState1D<T>, dw: &DVector<T>) -> DVector<T> {
    let n = state.dim();
    let du = dw[1];
    let dth = dw[2];
    DVector::from_fn(n, |alpha, _| {
        let df = match alpha {
            0 => dw[0],
            1 | 2 => T::zero(),
            a => dw[a],
        };
        let al = alpha as isize;
        df + du * state.coeff(al - 1) + dth * T::lit(0.5) * state.coeff(al - 2)
    })
}

/// `J_alpha = theta G_{alpha-1} + u G_alpha + (alpha+1) G_{alpha+1}` for
/// `alpha = 0..=M`, with `G_{M+1} = 0` (the second truncation).
pub fn convection_coeffs_1d<T: Real>(u: T, theta: T, g: &DVector<T>) -> DVector<T> {
    let n = g.len();
    DVector::from_fn(n, |alpha, _| {
        let mut j = u * g[alpha];
        if alpha > 0 {
            j += theta * g[alpha - 1];
        }
        if alpha + 1 < n {
            j += T::from_usize_exact(alpha + 1) * g[alpha + 1];
        }
        j
    })
}

/// Builds `D`, `M` and the BGK source by the truncated-expansion deduction.
///
/// `D` is obtained by applying [`derivative_coeffs_1d`] to each unit
/// derivative of the unknowns, and `M` by applying
/// [`convection_coeffs_1d`] to each unit coefficient vector.
pub fn build_system_by_deduction<T: Real>(state: &MomentState1D<T>, tau: T) -> Result<QuasiLinearSystem<T>> {
    state.check()?;
    let n = state.dim();
    let d = probe(n, |e| derivative_coeffs_1d(state, e));
    let m = probe(n, |e| convection_coeffs_1d(state.u, state.theta, e));
    if d.clone().lu().determinant() == T::zero() {
        return Err(Error::Singular(f64::INFINITY));
    }
    let q = bgk_source(state, tau)?;
    QuasiLinearSystem::new(d, vec![m], q)
}

/// Matrix whose column `j` is `f(e_j)` for a linear map `f`.
pub(crate) fn probe<T: Real, F>(n: usize, mut f: F) -> DMatrix<T>
where
    F: FnMut(&DVector<T>) -> DVector<T>,
{
    let mut out = DMatrix::zeros(n, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = T::one();
        let col = f(&e);
        out.set_column(j, &col);
        e[j] = T::zero();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{hermite_eval, hermite_roots};
    use crate::system::max_abs;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_state(rng: &mut ChaCha8Rng, m: usize) -> MomentState1D<f64> {
        crate::state1d::random_state_1d(m, rng).unwrap()
    }

    #[test]
    fn grad_m3_at_rest() {
        let s = MomentState1D::new(3, 1.0, 0.0, 1.0, vec![0.0]).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 6.0, 0.0, 0.0, 0.5, 0.0],
        );
        assert_eq!(a, expect);
    }

    #[test]
    fn grad_row_four() {
        let s = MomentState1D::new(4, 2.0, 0.0, 1.0, vec![0.1, 0.0]).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        let row: Vec<f64> = a.row(4).iter().copied().collect();
        let expect = [-0.05, 0.0, 0.15, 1.0, 0.0];
        for (x, y) in row.iter().zip(expect) {
            assert_relative_eq!(*x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn grad_general_rows_match_printed_pattern() {
        // rows M-1 and M of the printed matrix for M = 7
        let f = vec![0.3, -0.2, 0.15, 0.07, -0.04];
        let s = MomentState1D::new(7, 1.7, 0.4, 1.3, f).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        let (rho, u, th) = (1.7, 0.4, 1.3);
        let c = |k: isize| s.coeff(k);
        let m = 7usize;
        for (row, mm) in [(m - 1, m as isize - 1), (m, m as isize)] {
            let mut expect = vec![0.0; m + 1];
            expect[0] = -th * c(mm - 1) / rho;
            expect[1] = (mm + 1) as f64 * c(mm);
            expect[2] = 0.5 * ((mm - 1) as f64 * c(mm - 1) + th * c(mm - 3));
            expect[3] = -3.0 * c(mm - 2) / rho;
            expect[row - 1] = th;
            expect[row] = u;
            if row < m {
                expect[row + 1] = (row + 1) as f64;
            }
            for j in 0..=m {
                assert_relative_eq!(a[(row, j)], expect[j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn grad_velocity_shift() {
        let s0 = MomentState1D::new(5, 1.2, 0.0, 0.9, vec![0.1, -0.3, 0.2]).unwrap();
        let s1 = MomentState1D { u: 2.5, ..s0.clone() };
        let a0 = assemble_grad_a(&s0).unwrap();
        let a1 = assemble_grad_a(&s1).unwrap();
        assert!(max_abs(&(a1 - a0 - DMatrix::identity(6, 6) * 2.5)) < 1e-15);
    }

    #[test]
    fn regularize_examples() {
        let eq = MomentState1D::equilibrium(6, 1.0, 0.2, 1.4).unwrap();
        let a = assemble_grad_a(&eq).unwrap();
        assert_eq!(regularize(&a, &eq).unwrap(), a);

        let s = MomentState1D::new(3, 1.0, 0.0, 1.0, vec![0.5]).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        assert_eq!(a[(3, 1)], 2.0);
        let r = regularize(&a, &s).unwrap();
        assert_eq!(r[(3, 1)], 0.0);
        assert_eq!(r[(3, 2)], a[(3, 2)]);

        let s = MomentState1D::new(4, 1.0, 0.0, 1.0, vec![0.1, 0.3]).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        let r = regularize(&a, &s).unwrap();
        let diff = &r - &a;
        assert_relative_eq!(diff[(4, 1)], -1.5, epsilon = 1e-15);
        assert_relative_eq!(diff[(4, 2)], -0.25, epsilon = 1e-15);
        let mut rest = diff.clone();
        rest[(4, 1)] = 0.0;
        rest[(4, 2)] = 0.0;
        assert_eq!(max_abs(&rest), 0.0);

        assert!(regularize(&DMatrix::zeros(3, 3), &s).is_err());
    }

    #[test]
    fn d_examples() {
        let s = MomentState1D::new(3, 2.5, 0.3, 0.7, vec![0.4]).unwrap();
        let d = assemble_d(&s).unwrap();
        assert_eq!(d, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.5, 1.25, 1.0])));

        let s = MomentState1D::new(5, 2.0, 0.0, 1.0, vec![0.3, 0.5, 0.0]).unwrap();
        let d = assemble_d(&s).unwrap();
        let d21 = d.view((4, 0), (2, 4)).clone_owned();
        let expect = DMatrix::from_row_slice(2, 4, &[0.0, 0.3, 0.0, 0.0, 0.0, 0.5, 0.15, 0.0]);
        assert!(max_abs(&(d21 - expect)) < 1e-15);
        assert_eq!(max_abs(&d.view((0, 4), (4, 2)).clone_owned()), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in 3..9 {
            let s = rand_state(&mut rng, m);
            let det = assemble_d(&s).unwrap().determinant();
            assert_relative_eq!(det, s.rho * s.rho / 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn mmat_examples() {
        let m = assemble_mmat(0.0, 1.0, 2).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 0.0]));
        let m3 = assemble_mmat(3.0, 1.0, 2).unwrap();
        assert_eq!(m3 - m, DMatrix::identity(3, 3) * 3.0);
        assert!(assemble_mmat(0.0, 0.0, 2).is_err());

        for order in 1..8 {
            let mut ev: Vec<f64> = assemble_mmat(0.0, 1.0, order)
                .unwrap()
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let roots = hermite_roots::<f64>(order + 1).unwrap();
            for (a, b) in ev.iter().zip(&roots) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn factorization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = rng.random_range(3..=10);
            let s = rand_state(&mut rng, m);
            let ah = regularized_matrix(&s).unwrap();
            let d = assemble_d(&s).unwrap();
            let mm = assemble_mmat(s.u, s.theta, m).unwrap();
            let r = &d * &ah - &mm * &d;
            assert!(max_abs(&r) < 1e-12 * max_abs(&ah));
        }
    }

    #[test]
    fn grad_fails_identity_off_equilibrium() {
        // the identity needs the regularized matrix once f_M != 0
        let s = MomentState1D::new(4, 1.0, 0.0, 1.0, vec![0.1, 0.2]).unwrap();
        let a = assemble_grad_a(&s).unwrap();
        let d = assemble_d(&s).unwrap();
        let mm = assemble_mmat(0.0, 1.0, 4).unwrap();
        assert!(max_abs(&(&d * &a - &mm * &d)) > 0.1);
    }

    #[test]
    fn deduction_examples() {
        let eq = MomentState1D::equilibrium(3, 1.3, 0.2, 0.8).unwrap();
        let sys = build_system_by_deduction(&eq, 1.0).unwrap();
        let a = sys.normal_form().unwrap().remove(0);
        assert!(max_abs(&(a - assemble_grad_a(&eq).unwrap())) < 1e-14);

        let s = MomentState1D::new(3, 1.0, 0.0, 1.0, vec![0.5]).unwrap();
        let sys = build_system_by_deduction(&s, 1.0).unwrap();
        let a = sys.normal_form().unwrap().remove(0);
        let last: Vec<f64> = a.row(3).iter().copied().collect();
        for (x, y) in last.iter().zip([0.0, 0.0, 0.5, 0.0]) {
            assert!((x - y).abs() < 1e-15);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let m = rng.random_range(3..=10);
            let s = rand_state(&mut rng, m);
            let sys = build_system_by_deduction(&s, 0.5).unwrap();
            let a = sys.normal_form().unwrap().remove(0);
            assert!(max_abs(&(a - regularized_matrix(&s).unwrap())) < 1e-12);
            assert_eq!(sys.d, assemble_d(&s).unwrap());
            assert_eq!(sys.mk[0], assemble_mmat(s.u, s.theta, m).unwrap());
        }
    }

    #[test]
    fn characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 3..=8 {
            let s = rand_state(&mut rng, m);
            let ah = regularized_matrix(&s).unwrap();
            let sq = s.theta.sqrt();
            for k in 0..2 * (m + 1) {
                let lam = s.u + sq * (-5.0 + 10.0 * (k as f64 + 0.37) / (2 * (m + 1)) as f64);
                let lhs = (DMatrix::identity(m + 1, m + 1) * lam - &ah).determinant();
                let rhs = s.theta.powf((m + 1) as f64 / 2.0) * hermite_eval(m + 1, (lam - s.u) / sq);
                assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300), "m={m} k={k} {lhs} {rhs}");
            }
        }
    }
}
