//! Probabilists' Hermite polynomials, their roots, and the weighted
//! Hermite basis functions the moment expansions are written in.
//!
//! `He_k` satisfies `He_{k+1}(x) = x He_k(x) - k He_{k-1}(x)` with
//! `He_0 = 1`, `He_1 = x`. The plain recursion is used for evaluation and
//! stays finite for `k <= 50`, `|x| <= 10` in double precision.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::scalar::Real;
use crate::state1d::MomentState1D;

/// Parameters of the weighted basis `H_alpha^[theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasisParams<T> {
    pub theta: T,
    pub m_g: T,
    pub u: T,
}

impl<T: Real> HermiteBasisParams<T> {
    pub fn new(theta: T, m_g: T, u: T) -> Result<Self> {
        let p = Self { theta, m_g, u };
        let v = p.violations();
        if v.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidState(v))
        }
    }

    /// Unit molecule mass.
    pub fn with_unit_mass(theta: T, u: T) -> Result<Self> {
        Self::new(theta, T::one(), u)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.theta.is_finite_val() && self.m_g.is_finite_val() && self.u.is_finite_val()) {
            v.push(Violation::NonFinite("basis parameters"));
        }
        if !(self.theta > T::zero()) {
            v.push(Violation::TemperatureNonpositive);
        }
        if !(self.m_g > T::zero()) {
            v.push(Violation::Constraint("molecule mass must be positive".into()));
        }
        v
    }
}

/// `He_k(x)` by the three-term recursion.
pub fn hermite_eval<T: Real>(k: usize, x: T) -> T {
    hermite_pair(k, x).1
}

/// `(He_{k-1}(x), He_k(x))`, with `He_{-1} = 0`.
pub fn hermite_pair<T: Real>(k: usize, x: T) -> (T, T) {
    let mut prev = T::zero();
    let mut cur = T::one();
    for j in 0..k {
        let next = x * cur - T::from_usize_exact(j) * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// All of `He_0(x) .. He_n(x)`.
pub fn hermite_all<T: Real>(n: usize, x: T) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    if n == 0 {
        return out;
    }
    out.push(x);
    for j in 1..n {
        let next = x * out[j] - T::from_usize_exact(j) * out[j - 1];
        out.push(next);
    }
    out
}

/// Symmetric Jacobi matrix of the probabilists' recurrence; its
/// eigenvalues are the roots of `He_k`.
fn jacobi_matrix<T: Real>(k: usize) -> DMatrix<T> {
    let mut j = DMatrix::<T>::zeros(k, k);
    for i in 1..k {
        let b = T::from_usize_exact(i).sqrt();
        j[(i - 1, i)] = b;
        j[(i, i - 1)] = b;
    }
    j
}

/// Newton correction `He_k(c) / He_k'(c)` relative to `max(1, |c|)`.
///
/// This is the residual the root finder certifies: raw `|He_k(c)|` grows
/// like `|He_k'(c)| * ulp(c)` at the best representable root, which is far
/// above any fixed absolute threshold once `k` is in the teens.
pub fn scaled_root_residual<T: Real>(k: usize, c: T) -> T {
    let (p, v) = hermite_pair(k, c);
    let d = T::from_usize_exact(k) * p;
    let scale = if c.abs() > T::one() { c.abs() } else { T::one() };
    (v / d).abs() / scale
}

/// The `k` simple real roots of `He_k`, ascending and exactly symmetric.
pub fn hermite_roots<T: Real>(k: usize) -> Result<Vec<T>> {
    if k == 0 {
        return Err(Error::InvalidArgument("He_0 has no roots".into()));
    }
    let eig = SymmetricEigen::new(jacobi_matrix::<T>(k));
    let mut c: Vec<T> = eig.eigenvalues.iter().copied().collect();
    c.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    // one Newton polish step
    for x in c.iter_mut() {
        let (p, v) = hermite_pair(k, *x);
        let d = T::from_usize_exact(k) * p;
        if d != T::zero() {
            *x -= v / d;
        }
    }

    let half = T::lit(0.5);
    for j in 0..k / 2 {
        let m = (c[k - 1 - j] - c[j]) * half;
        c[j] = -m;
        c[k - 1 - j] = m;
    }
    if k % 2 == 1 {
        c[k / 2] = T::zero();
    }

    let tol = T::lit(1e4) * T::eps();
    for &x in &c {
        let r = scaled_root_residual(k, x);
        if !(r < tol) {
            return Err(Error::RootFinding {
                degree: k,
                residual: r.as_f64(),
            });
        }
    }
    Ok(c)
}

/// Gauss-Hermite rule for the normalized weight `exp(-x^2/2)/sqrt(2 pi)`
/// (weights sum to one), via Golub-Welsch.
pub fn gauss_hermite<T: Real>(k: usize) -> Result<(Vec<T>, Vec<T>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let eig = SymmetricEigen::new(jacobi_matrix::<T>(k));
    let mut pairs: Vec<(T, T)> = (0..k)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    let nodes = hermite_roots::<T>(k)?;
    let weights = pairs.into_iter().map(|p| p.1).collect();
    Ok((nodes, weights))
}

/// `H_alpha^[theta](v)` with `v = (xi - u)/sqrt(theta)` computed from `xi`.
pub fn eval_basis_1d<T: Real>(alpha: usize, params: &HermiteBasisParams<T>, xi: T) -> T {
    let sq = params.theta.sqrt();
    let v = (xi - params.u) / sq;
    basis_at(alpha, params.theta, params.m_g, v)
}

fn basis_at<T: Real>(alpha: usize, theta: T, m_g: T, v: T) -> T {
    let two_pi = T::two_pi();
    let pow = theta.powf(-(T::from_usize_exact(alpha) + T::one()) * T::lit(0.5));
    hermite_eval(alpha, v) * (-(v * v) * T::lit(0.5)).exp() * pow / (m_g * two_pi.sqrt())
}

/// Evaluates the truncated expansion of `state` at each grid velocity.
pub fn reconstruct_distribution<T: Real>(state: &MomentState1D<T>, m_g: T, xi_grid: &[T]) -> Vec<T> {
    let sq = state.theta.sqrt();
    let two_pi = T::two_pi();
    let norm = T::one() / (m_g * two_pi.sqrt());
    xi_grid
        .iter()
        .map(|&xi| {
            let v = (xi - state.u) / sq;
            let he = hermite_all(state.order, v);
            let gauss = (-(v * v) * T::lit(0.5)).exp();
            let mut acc = T::zero();
            let mut pow = T::one() / sq;
            for (alpha, h) in he.iter().enumerate() {
                acc += state.coeff(alpha as isize) * *h * pow;
                pow /= sq;
            }
            acc * gauss * norm
        })
        .collect()
}
