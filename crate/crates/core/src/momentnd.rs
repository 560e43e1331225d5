//! Full-moment systems in `D` spatial dimensions.
//!
//! The distribution is expanded in the anisotropic Hermite functions
//! `H_alpha^[Theta]` for all multi-indices `|alpha| <= M`. Two sets of
//! constraints fix the expansion parameters:
//!
//! * [`ConstraintCase::Classic`]: `Theta = theta I`, `f_{e_j} = 0` and
//!   `sum_j f_{2 e_j} = 0`;
//! * [`ConstraintCase::Generalized`]: `Theta` symmetric positive definite,
//!   `f_{e_j} = 0` and `f_alpha = 0` for `|alpha| = 2`.
//!
//! # Unknown ordering
//!
//! Coefficients `f` are stored in the order of [`enumerate_indices`]. The
//! unknown vector is `w = (f_0, u_1..u_D, grade-2 block, w_3..w_M)` where the
//! grade-2 block runs over `i <= j` row by row and `w_m` lists `f_alpha` for
//! `|alpha| = m` in enumeration order. Rows of `D`, `M_k` and `q` use the same
//! order (see [`system_order`]), under which `D` is lower triangular.
//!
//! The grade-2 variable is `theta_ij` in the generalized case. In the
//! classic case it is `g_{e_i+e_j} = f_{e_i+e_j}` for `i != j` and
//! `g_{2 e_i} = f_0 theta / 2 + f_{2 e_i}`.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::hme1d::probe;
use crate::scalar::Real;
use crate::system::QuasiLinearSystem;

/// A multi-index `alpha = (alpha_1, ..., alpha_D)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] = 1;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// `alpha + e_i`.
    pub fn plus(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v[i] += 1;
        Self(v)
    }

    /// `alpha - e_i`, or `None` when `alpha_i = 0`.
    pub fn minus(&self, i: usize) -> Option<Self> {
        if self.0[i] == 0 {
            return None;
        }
        let mut v = self.0.clone();
        v[i] -= 1;
        Some(Self(v))
    }

    /// `alpha! = prod_i alpha_i!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| (1..=a).map(f64::from).product::<f64>()).product()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// All `alpha` in `N^D` with `|alpha| <= M`, grade by grade, ascending
/// lexicographic within a grade. The length is `binomial(M + D, D)`.
pub fn enumerate_indices(dim: usize, order: usize) -> Vec<MultiIndex> {
    fn fill(rest: usize, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if slots == 1 {
            cur.push(rest as u32);
            out.push(MultiIndex(cur.clone()));
            cur.pop();
            return;
        }
        for a in 0..=rest {
            cur.push(a as u32);
            fill(rest - a, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    for grade in 0..=order {
        fill(grade, dim, &mut Vec::with_capacity(dim), &mut out);
    }
    out
}

/// Enumerated multi-indices with position lookup.
#[derive(Debug, Clone)]
pub struct IndexSet {
    pub dim: usize,
    pub order: usize,
    pub indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

impl IndexSet {
    pub fn new(dim: usize, order: usize) -> Self {
        let indices = enumerate_indices(dim, order);
        let lookup = indices.iter().enumerate().map(|(n, a)| (a.clone(), n)).collect();
        Self {
            dim,
            order,
            indices,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Position of `alpha`, `None` outside the set.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Position of `alpha - e_i - e_j`.
    fn minus2(&self, n: usize, i: usize, j: usize) -> Option<usize> {
        let a = self.indices[n].minus(i)?.minus(j)?;
        self.position(&a)
    }

    /// Position of `alpha - e_i`.
    fn minus1(&self, n: usize, i: usize) -> Option<usize> {
        self.position(&self.indices[n].minus(i)?)
    }

    /// Position of `e_i + e_j`.
    fn pair(&self, i: usize, j: usize) -> usize {
        self.position(&MultiIndex::unit(self.dim, i).plus(j)).expect("grade 2 present")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCase {
    Classic,
    Generalized,
}

/// Expansion coefficients `f_alpha` (in [`enumerate_indices`] order) and
/// the parameters `u`, `Theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentStateND<T> {
    pub dim: usize,
    pub order: usize,
    pub case: ConstraintCase,
    pub u: Vec<T>,
    /// Row-major `D x D`.
    pub theta: Vec<Vec<T>>,
    pub indices: Vec<MultiIndex>,
    pub f: Vec<T>,
}

impl<T: Real> MomentStateND<T> {
    /// Builds and validates a state; `f` is in [`enumerate_indices`] order.
    pub fn new(order: usize, case: ConstraintCase, u: Vec<T>, theta: Vec<Vec<T>>, f: Vec<T>) -> Result<Self> {
        let dim = u.len();
        let s = Self {
            dim,
            order,
            case,
            u,
            theta,
            indices: enumerate_indices(dim, order),
            f,
        };
        s.check()?;
        Ok(s)
    }

    /// Maxwellian: `f_0 = rho` and every other coefficient zero.
    pub fn equilibrium(order: usize, case: ConstraintCase, rho: T, u: Vec<T>, theta: Vec<Vec<T>>) -> Result<Self> {
        let n = enumerate_indices(u.len(), order).len();
        let mut f = vec![T::zero(); n];
        if n > 0 {
            f[0] = rho;
        }
        Self::new(order, case, u, theta, f)
    }

    pub fn theta_matrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.theta[i][j])
    }

    pub fn density(&self) -> T {
        self.f[0]
    }

    /// Scalar temperature `theta_kk / D`.
    pub fn theta_mean(&self) -> T {
        let tr = (0..self.dim).fold(T::zero(), |s, i| s + self.theta[i][i]);
        tr / T::from_usize_exact(self.dim)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let d = self.dim;
        if d == 0 {
            v.push(Violation::Constraint("dimension must be at least 1".into()));
            return v;
        }
        if self.order < 3 {
            v.push(Violation::OrderTooLow(self.order, 3));
        }
        let expect = enumerate_indices(d, self.order);
        if self.indices != expect {
            v.push(Violation::Constraint("indices must list every |alpha| <= M in graded lexicographic order".into()));
        }
        if self.f.len() != expect.len() {
            v.push(Violation::CoefficientLength {
                expected: expect.len(),
                found: self.f.len(),
            });
        }
        if self.theta.len() != d || self.theta.iter().any(|r| r.len() != d) {
            v.push(Violation::Constraint("theta must be a D x D matrix".into()));
        }
        if !v.is_empty() {
            return v;
        }
        let finite = self.u.iter().chain(self.theta.iter().flatten()).chain(&self.f).all(|x| x.is_finite_val());
        if !finite {
            v.push(Violation::NonFinite("state"));
            return v;
        }
        if !(self.f[0] > T::zero()) {
            v.push(Violation::DensityNonpositive);
        }
        let th = self.theta_matrix();
        if max_abs_t(&(&th - th.transpose())) > T::zero() {
            v.push(Violation::Constraint("theta must be symmetric".into()));
        }
        match self.case {
            ConstraintCase::Classic => {
                let t0 = self.theta[0][0];
                if !(t0 > T::zero()) {
                    v.push(Violation::TemperatureNonpositive);
                }
                let iso = (0..d).all(|i| (0..d).all(|j| self.theta[i][j] == if i == j { t0 } else { T::zero() }));
                if !iso {
                    v.push(Violation::Constraint("classic case needs theta = theta I".into()));
                }
            }
            ConstraintCase::Generalized => {
                if Cholesky::new(th).is_none() {
                    v.push(Violation::TemperatureNotPositiveDefinite);
                }
            }
        }
        if v.is_empty() {
            v.extend(self.constraint_violations());
        }
        v
    }

    fn constraint_violations(&self) -> Vec<Violation> {
        let set = IndexSet::new(self.dim, self.order);
        let th = self.theta_mean().abs();
        let tol = T::lit(1e-12) * self.f[0];
        let mut v = Vec::new();
        for i in 0..self.dim {
            let n = set.position(&MultiIndex::unit(self.dim, i)).expect("grade 1 present");
            if self.f[n].abs() > tol * th.sqrt() {
                v.push(Violation::Constraint(format!("f_e{} must vanish", i + 1)));
            }
        }
        let tol2 = tol * th;
        match self.case {
            ConstraintCase::Classic => {
                let tr = (0..self.dim).fold(T::zero(), |s, i| s + self.f[set.pair(i, i)]);
                if tr.abs() > tol2 * T::from_usize_exact(self.dim) {
                    v.push(Violation::Constraint("sum of f_2e_j must vanish".into()));
                }
            }
            ConstraintCase::Generalized => {
                for i in 0..self.dim {
                    for j in i..self.dim {
                        if self.f[set.pair(i, j)].abs() > tol2 {
                            v.push(Violation::Constraint(format!("f_e{}+e{} must vanish", i + 1, j + 1)));
                        }
                    }
                }
            }
        }
        v
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidState(v))
        }
    }

    /// The unknown vector `w` (see the module docs for its layout).
    pub fn unknowns(&self) -> DVector<T> {
        let set = IndexSet::new(self.dim, self.order);
        let th = self.theta_mean();
        let by_index: Vec<T> = (0..set.len()).map(|n| {
            let a = &set.indices[n];
            match a.order() {
                0 => self.f[0],
                1 => self.u[a.0.iter().position(|&x| x == 1).expect("unit index")],
                2 => {
                    let (i, j) = pair_of(a);
                    match self.case {
                        ConstraintCase::Generalized => self.theta[i][j],
                        ConstraintCase::Classic if i == j => T::lit(0.5) * self.f[0] * th + self.f[n],
                        ConstraintCase::Classic => self.f[n],
                    }
                }
                _ => self.f[n],
            }
        }).collect();
        let perm = system_order(self.dim, self.order);
        DVector::from_fn(set.len(), |r, _| by_index[perm[r]])
    }

    /// Inverse of [`unknowns`](Self::unknowns); validates the result.
    pub fn from_unknowns(dim: usize, order: usize, case: ConstraintCase, w: &DVector<T>) -> Result<Self> {
        let set = IndexSet::new(dim, order);
        if w.len() != set.len() {
            return Err(Error::DimensionMismatch {
                expected: set.len(),
                found: w.len(),
            });
        }
        let mut by_index = DVector::zeros(set.len());
        for (r, &n) in system_order(dim, order).iter().enumerate() {
            by_index[n] = w[r];
        }
        let w = &by_index;
        let mut u = vec![T::zero(); dim];
        let mut theta = vec![vec![T::zero(); dim]; dim];
        let mut f = vec![T::zero(); set.len()];
        f[0] = w[0];
        for i in 0..dim {
            u[i] = w[set.position(&MultiIndex::unit(dim, i)).expect("grade 1 present")];
        }
        for n in 0..set.len() {
            if set.indices[n].order() >= 3 {
                f[n] = w[n];
            }
        }
        match case {
            ConstraintCase::Generalized => {
                for i in 0..dim {
                    for j in 0..dim {
                        theta[i][j] = w[set.pair(i, j)];
                    }
                }
            }
            ConstraintCase::Classic => {
                let sum_g = (0..dim).fold(T::zero(), |s, i| s + w[set.pair(i, i)]);
                let th = T::lit(2.0) * sum_g / (T::from_usize_exact(dim) * w[0]);
                for i in 0..dim {
                    theta[i][i] = th;
                    for j in i..dim {
                        let n = set.pair(i, j);
                        f[n] = if i == j { w[n] - T::lit(0.5) * w[0] * th } else { w[n] };
                    }
                }
            }
        }
        Self::new(order, case, u, theta, f)
    }
}

fn max_abs_t<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |a, x| if x.abs() > a { x.abs() } else { a })
}

/// `(i, j)` with `i <= j` for a grade-2 index `e_i + e_j`.
fn pair_of(a: &MultiIndex) -> (usize, usize) {
    let mut it = a.0.iter().enumerate().flat_map(|(i, &x)| std::iter::repeat_n(i, x as usize));
    let i = it.next().expect("grade 2");
    let j = it.next().expect("grade 2");
    (i, j)
}

/// Enumeration position of each row/unknown of the assembled system.
pub fn system_order(dim: usize, order: usize) -> Vec<usize> {
    let set = IndexSet::new(dim, order);
    let mut out = vec![0];
    out.extend((0..dim).map(|i| set.position(&MultiIndex::unit(dim, i)).expect("grade 1 present")));
    for i in 0..dim {
        out.extend((i..dim).map(|j| set.pair(i, j)));
    }
    out.extend((0..set.len()).filter(|&n| set.indices[n].order() >= 3));
    out
}

fn permute<T: Real>(m: &DMatrix<T>, perm: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(perm.len(), perm.len(), |r, c| m[(perm[r], perm[c])])
}

/// Human-readable names of the unknowns in order.
pub fn unknown_labels(dim: usize, order: usize, case: ConstraintCase) -> Vec<String> {
    let indices = enumerate_indices(dim, order);
    system_order(dim, order)
        .into_iter()
        .map(|n| &indices[n])
        .map(|a| match a.order() {
            0 => "f0".to_string(),
            1 => format!("u{}", a.0.iter().position(|&x| x == 1).expect("unit") + 1),
            2 => {
                let (i, j) = pair_of(a);
                let p = if case == ConstraintCase::Classic { "g" } else { "theta" };
                format!("{p}{}{}", i + 1, j + 1)
            }
            _ => format!("f{a}"),
        })
        .collect()
}

/// `G_alpha = df_alpha + sum_i du_i f_{alpha-e_i} + 1/2 sum_ij dtheta_ij f_{alpha-e_i-e_j}`
/// without constraint checks.
fn g_formula<T: Real>(state: &MomentStateND<T>, set: &IndexSet, du: &[T], dth: &DMatrix<T>, df: &[T]) -> Vec<T> {
    let d = state.dim;
    let half = T::lit(0.5);
    (0..set.len())
        .map(|n| {
            let mut g = df[n];
            for i in 0..d {
                if let Some(m) = set.minus1(n, i) {
                    g += du[i] * state.f[m];
                }
                for j in 0..d {
                    if let Some(m) = set.minus2(n, i, j) {
                        g += half * dth[(i, j)] * state.f[m];
                    }
                }
            }
            g
        })
        .collect()
}

/// Projected derivative coefficients for parameter derivatives `d_u`,
/// `d_theta` and coefficient derivatives `d_f` (in index order).
///
/// The derivatives must respect the active constraints: `d_f` vanishes at
/// grade 1; at grade 2 it vanishes (generalized) or has zero trace
/// (classic, where `d_theta` must also be a multiple of the identity).
pub fn derivative_coeffs<T: Real>(state: &MomentStateND<T>, d_u: &[T], d_theta: &DMatrix<T>, d_f: &[T]) -> Result<Vec<T>> {
    state.check()?;
    let set = IndexSet::new(state.dim, state.order);
    let d = state.dim;
    if d_u.len() != d || d_theta.shape() != (d, d) || d_f.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: d_f.len(),
        });
    }
    let scale = d_f.iter().chain(d_u).chain(d_theta.iter()).fold(T::one(), |m, x| if x.abs() > m { x.abs() } else { m });
    let tol = T::lit(1e-12) * scale;
    let bad = |what: &str| Err(Error::InvalidArgument(format!("derivative violates the constraints: {what}")));
    for i in 0..d {
        if d_f[set.position(&MultiIndex::unit(d, i)).expect("grade 1")].abs() > tol {
            return bad("df at grade 1");
        }
    }
    if max_abs_t(&(d_theta - d_theta.transpose())) > tol {
        return bad("dtheta not symmetric");
    }
    match state.case {
        ConstraintCase::Generalized => {
            for i in 0..d {
                for j in i..d {
                    if d_f[set.pair(i, j)].abs() > tol {
                        return bad("df at grade 2");
                    }
                }
            }
        }
        ConstraintCase::Classic => {
            let tr = (0..d).fold(T::zero(), |s, i| s + d_f[set.pair(i, i)]);
            if tr.abs() > tol {
                return bad("trace of df at grade 2");
            }
            let iso = (0..d).all(|i| (0..d).all(|j| {
                let e = if i == j { d_theta[(0, 0)] } else { T::zero() };
                (d_theta[(i, j)] - e).abs() <= tol
            }));
            if !iso {
                return bad("dtheta not isotropic");
            }
        }
    }
    Ok(g_formula(state, &set, d_u, d_theta, d_f))
}

/// `J_{k,alpha} = u_k G_alpha + (1 - delta_{|alpha|,M}) (alpha_k + 1) G_{alpha+e_k} + sum_l theta_kl G_{alpha-e_l}`
/// for axis `k` in `0..D`.
pub fn convection_coeffs<T: Real>(state: &MomentStateND<T>, g: &[T], k: usize) -> Result<Vec<T>> {
    let set = IndexSet::new(state.dim, state.order);
    if g.len() != set.len() {
        return Err(Error::DimensionMismatch {
            expected: set.len(),
            found: g.len(),
        });
    }
    if k >= state.dim {
        return Err(Error::InvalidArgument(format!("axis {k} out of range for D = {}", state.dim)));
    }
    Ok(j_formula(state, &set, g, k))
}

fn j_formula<T: Real>(state: &MomentStateND<T>, set: &IndexSet, g: &[T], k: usize) -> Vec<T> {
    (0..set.len())
        .map(|n| {
            let a = &set.indices[n];
            let mut j = state.u[k] * g[n];
            if a.order() < state.order {
                let up = set.position(&a.plus(k)).expect("next grade present");
                j += T::from_usize_exact(a.0[k] as usize + 1) * g[up];
            }
            for l in 0..state.dim {
                if let Some(m) = set.minus1(n, l) {
                    j += state.theta[k][l] * g[m];
                }
            }
            j
        })
        .collect()
}

/// Splits a derivative of the unknown vector into `(du, dtheta, df)`.
fn split_unknown_derivative<T: Real>(state: &MomentStateND<T>, set: &IndexSet, dw: &DVector<T>) -> (Vec<T>, DMatrix<T>, Vec<T>) {
    let d = state.dim;
    let mut du = vec![T::zero(); d];
    let mut dth = DMatrix::zeros(d, d);
    let mut df = vec![T::zero(); set.len()];
    df[0] = dw[0];
    for i in 0..d {
        du[i] = dw[set.position(&MultiIndex::unit(d, i)).expect("grade 1")];
    }
    for n in 0..set.len() {
        if set.indices[n].order() >= 3 {
            df[n] = dw[n];
        }
    }
    match state.case {
        ConstraintCase::Generalized => {
            for i in 0..d {
                for j in 0..d {
                    dth[(i, j)] = dw[set.pair(i, j)];
                }
            }
        }
        ConstraintCase::Classic => {
            // g_ii = f0 theta / 2 + f_ii with sum_i f_ii = 0
            let f0 = state.f[0];
            let th = state.theta_mean();
            let dn = T::from_usize_exact(d);
            let sum_dg = (0..d).fold(T::zero(), |s, i| s + dw[set.pair(i, i)]);
            let dtheta = T::lit(2.0) * sum_dg / (dn * f0) - th * dw[0] / f0;
            for i in 0..d {
                dth[(i, i)] = dtheta;
                for j in i..d {
                    let n = set.pair(i, j);
                    df[n] = if i == j { dw[n] - T::lit(0.5) * (th * dw[0] + f0 * dtheta) } else { dw[n] };
                }
            }
        }
    }
    (du, dth, df)
}

/// `D`, `[M_1, ..., M_D]` and the BGK source `-f_alpha / tau` on grades
/// `>= 3`, assembled by probing the derivative and convection recursions.
pub fn assemble_system_nd<T: Real>(state: &MomentStateND<T>, tau: T) -> Result<QuasiLinearSystem<T>> {
    state.check()?;
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument(format!("relaxation time must be positive, got {tau}")));
    }
    let set = IndexSet::new(state.dim, state.order);
    let n = set.len();
    let d = probe(n, |dw| {
        let (du, dth, df) = split_unknown_derivative(state, &set, dw);
        DVector::from_vec(g_formula(state, &set, &du, &dth, &df))
    });
    if d.diagonal().iter().any(|x| *x == T::zero()) {
        return Err(Error::Singular(f64::INFINITY));
    }
    let perm = system_order(state.dim, state.order);
    let mk = (0..state.dim)
        .map(|k| permute(&probe(n, |g| DVector::from_vec(j_formula(state, &set, g.as_slice(), k))), &perm))
        .collect();
    let q = DVector::from_fn(n, |r, _| {
        let m = perm[r];
        if set.indices[m].order() >= 3 {
            -state.f[m] / tau
        } else {
            T::zero()
        }
    });
    QuasiLinearSystem::new(permute(&d, &perm), mk, q)
}

/// Polynomial in `D` variables as a map from exponent to coefficient.
type Poly<T> = HashMap<MultiIndex, T>;

/// `prod_i (sum_j a[i][j] y_j)^{beta_i}`.
fn product_of_linear_powers<T: Real>(a: &DMatrix<T>, beta: &MultiIndex) -> Poly<T> {
    let d = a.ncols();
    let mut p: Poly<T> = HashMap::from([(MultiIndex::zero(d), T::one())]);
    for (i, &b) in beta.0.iter().enumerate() {
        for _ in 0..b {
            let mut next: Poly<T> = HashMap::new();
            for (mono, c) in &p {
                for j in 0..d {
                    let coef = a[(i, j)];
                    if coef != T::zero() {
                        *next.entry(mono.plus(j)).or_insert(T::zero()) += *c * coef;
                    }
                }
            }
            p = next;
        }
    }
    p
}

/// Gram matrix `<H_alpha, H_beta>` of the weighted inner product, up to the
/// common factor `1/m_g`: `alpha! [C^alpha] prod_i (sum_j (Theta^{-1})_ij C_j)^{beta_i}`
/// within a grade and zero across grades.
pub fn gram_matrix<T: Real>(set: &IndexSet, theta: &DMatrix<T>) -> Result<DMatrix<T>> {
    let p = theta.clone().try_inverse().ok_or(Error::Singular(f64::INFINITY))?;
    let n = set.len();
    let mut g = DMatrix::zeros(n, n);
    for b in 0..n {
        let poly = product_of_linear_powers(&p, &set.indices[b]);
        for a in 0..n {
            if set.indices[a].order() != set.indices[b].order() {
                continue;
            }
            if let Some(c) = poly.get(&set.indices[a]) {
                g[(a, b)] = T::lit(set.indices[a].factorial()) * *c;
            }
        }
    }
    Ok(g)
}

/// Convection matrices in an orthonormal basis of the weighted inner
/// product: `L^T M_k L^{-T}` with `G = L L^T`, rows in [`system_order`].
pub fn orthonormal_convection<T: Real>(state: &MomentStateND<T>, sys: &QuasiLinearSystem<T>) -> Result<Vec<DMatrix<T>>> {
    let set = IndexSet::new(state.dim, state.order);
    let g = permute(&gram_matrix(&set, &state.theta_matrix())?, &system_order(state.dim, state.order));
    let chol = Cholesky::new(g).ok_or(Error::Singular(f64::INFINITY))?;
    let l = chol.l();
    let lt = l.transpose();
    let lt_inv = lt.clone().try_inverse().ok_or(Error::Singular(f64::INFINITY))?;
    Ok(sys.mk.iter().map(|m| &lt * m * &lt_inv).collect())
}

/// State seen in rotated coordinates `x' = R x`: `u' = R u`,
/// `Theta' = R Theta R^T` and `f'_beta = sum_alpha f_alpha [y^beta] prod_i (sum_j R_ji y_j)^{alpha_i}`.
pub fn rotate_state<T: Real>(state: &MomentStateND<T>, r: &DMatrix<T>) -> Result<MomentStateND<T>> {
    state.check()?;
    let d = state.dim;
    if r.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.nrows(),
        });
    }
    let set = IndexSet::new(d, state.order);
    let u = r * DVector::from_vec(state.u.clone());
    let th = r * state.theta_matrix() * r.transpose();
    let rt = r.transpose();
    let mut f = vec![T::zero(); set.len()];
    for (a, &fa) in state.f.iter().enumerate() {
        if fa == T::zero() {
            continue;
        }
        for (mono, c) in product_of_linear_powers(&rt, &set.indices[a]) {
            let b = set.position(&mono).expect("same grade");
            f[b] += fa * c;
        }
    }
    // keep the stored tensor exactly symmetric
    let theta = (0..d).map(|i| (0..d).map(|j| T::lit(0.5) * (th[(i, j)] + th[(j, i)])).collect()).collect();
    let mut out = MomentStateND {
        dim: d,
        order: state.order,
        case: state.case,
        u: u.iter().copied().collect(),
        theta,
        indices: set.indices.clone(),
        f,
    };
    // rounding can leave tiny values in constrained slots
    for i in 0..d {
        let n = set.position(&MultiIndex::unit(d, i)).expect("grade 1");
        out.f[n] = T::zero();
    }
    if state.case == ConstraintCase::Generalized {
        for i in 0..d {
            for j in i..d {
                out.f[set.pair(i, j)] = T::zero();
            }
        }
    } else {
        // rotation is isotropic on Theta = theta I; restore exact form
        let t = state.theta[0][0];
        for i in 0..d {
            for j in 0..d {
                out.theta[i][j] = if i == j { t } else { T::zero() };
            }
        }
    }
    out.check()?;
    Ok(out)
}

/// Seeded random state: `f_0` in `[0.5, 2]`, `u` in `[-1, 1]`, temperature
/// scale in `[0.5, 2]` (a random SPD `Theta` in the generalized case) and
/// normalized higher coefficients up to `0.3`.
pub fn random_state_nd<T: Real, R: Rng + ?Sized>(dim: usize, order: usize, case: ConstraintCase, rng: &mut R) -> Result<MomentStateND<T>> {
    let set = IndexSet::new(dim, order);
    let f0: f64 = rng.random_range(0.5..2.0);
    let th: f64 = rng.random_range(0.5..2.0);
    let u: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let theta: Vec<Vec<f64>> = match case {
        ConstraintCase::Classic => (0..dim).map(|i| (0..dim).map(|j| if i == j { th } else { 0.0 }).collect()).collect(),
        ConstraintCase::Generalized => {
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-0.4..0.4));
            let s = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.5;
            let scale = th / (s.trace() / dim as f64);
            let s = s * scale;
            (0..dim).map(|i| (0..dim).map(|j| 0.5 * (s[(i, j)] + s[(j, i)])).collect()).collect()
        }
    };
    let mut f = vec![0.0; set.len()];
    f[0] = f0;
    for n in 1..set.len() {
        let grade = set.indices[n].order();
        if grade >= 3 || (grade == 2 && case == ConstraintCase::Classic) {
            f[n] = rng.random_range(-0.3..0.3) * f0 * th.powf(grade as f64 / 2.0);
        }
    }
    if case == ConstraintCase::Classic {
        let tr = (0..dim).map(|i| f[set.pair(i, i)]).sum::<f64>() / dim as f64;
        for i in 0..dim {
            f[set.pair(i, i)] -= tr;
        }
        if dim == 1 {
            f[set.pair(0, 0)] = 0.0;
        }
    }
    MomentStateND::new(
        order,
        case,
        u.into_iter().map(T::lit).collect(),
        theta.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect(),
        f.into_iter().map(T::lit).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hme1d::{assemble_d, assemble_mmat, build_system_by_deduction, derivative_coeffs_1d, convection_coeffs_1d, regularized_matrix};
    use crate::hyperbolicity::{analyze_default, check_abs_system, symmetry_criterion, AnalyzeOptions};
    use crate::state1d::MomentState1D;
    use crate::system::max_abs;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn enumeration_examples() {
        let one: Vec<Vec<u32>> = enumerate_indices(1, 3).into_iter().map(|a| a.0).collect();
        assert_eq!(one, vec![vec![0], vec![1], vec![2], vec![3]]);
        let two: Vec<Vec<u32>> = enumerate_indices(2, 1).into_iter().map(|a| a.0).collect();
        assert_eq!(two, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate_indices(3, 3).len(), 20);
        for d in 1..=4 {
            for m in 0..=6 {
                let idx = enumerate_indices(d, m);
                assert_eq!(idx.len(), binom(m + d, d));
                for w in idx.windows(2) {
                    assert!((w[0].order(), &w[0].0) < (w[1].order(), &w[1].0));
                }
            }
        }
    }

    #[test]
    fn multi_index_ops() {
        let a = MultiIndex(vec![2, 0, 1]);
        assert_eq!(a.order(), 3);
        assert_eq!(a.plus(1), MultiIndex(vec![2, 1, 1]));
        assert_eq!(a.minus(1), None);
        assert_eq!(a.minus(0), Some(MultiIndex(vec![1, 0, 1])));
        assert_eq!(a.factorial(), 2.0);
        assert_eq!(a.to_string(), "(2,0,1)");
    }

    #[test]
    fn derivative_examples() {
        let s = MomentStateND::equilibrium(4, ConstraintCase::Generalized, 1.7, vec![0.1, 0.2], vec![vec![1.0, 0.2], vec![0.2, 0.8]]).unwrap();
        let n = s.f.len();
        let g = derivative_coeffs(&s, &[0.3, -0.5], &DMatrix::zeros(2, 2), &vec![0.0; n]).unwrap();
        let set = IndexSet::new(2, 4);
        for (m, a) in set.indices.iter().enumerate() {
            let expect: f64 = if *a == MultiIndex::unit(2, 0) {
                1.7 * 0.3
            } else if *a == MultiIndex::unit(2, 1) {
                1.7 * -0.5
            } else {
                0.0
            };
            assert!((g[m] - expect).abs() < 1e-15);
        }
        let z = derivative_coeffs(&s, &[0.0, 0.0], &DMatrix::zeros(2, 2), &vec![0.0; n]).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));

        let mut bad = vec![0.0; n];
        bad[set.pair(0, 1)] = 1.0;
        assert!(derivative_coeffs(&s, &[0.0, 0.0], &DMatrix::zeros(2, 2), &bad).is_err());
    }

    #[test]
    fn one_dimensional_recursions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for m in 3..=8 {
            let nd: MomentStateND<f64> = random_state_nd(1, m, ConstraintCase::Classic, &mut rng).unwrap();
            let s1 = MomentState1D::new(m, nd.f[0], nd.u[0], nd.theta[0][0], nd.f[3..].to_vec()).unwrap();
            let dw: Vec<f64> = (0..=m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut df = dw.clone();
            df[1] = 0.0;
            df[2] = 0.0;
            let g_nd = derivative_coeffs(&nd, &[dw[1]], &DMatrix::from_element(1, 1, dw[2]), &df).unwrap();
            let g_1d = derivative_coeffs_1d(&s1, &DVector::from_vec(dw.clone()));
            for (a, b) in g_nd.iter().zip(g_1d.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
            let j_nd = convection_coeffs(&nd, &dw, 0).unwrap();
            let j_1d = convection_coeffs_1d(nd.u[0], nd.theta[0][0], &DVector::from_vec(dw));
            for (a, b) in j_nd.iter().zip(j_1d.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn convection_top_grade_cutoff() {
        let s = MomentStateND::equilibrium(3, ConstraintCase::Generalized, 1.0, vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let set = IndexSet::new(2, 3);
        let top = set.position(&MultiIndex(vec![0, 3])).unwrap();
        let below = set.position(&MultiIndex(vec![0, 2])).unwrap();
        let mut g = vec![0.0; set.len()];
        g[top] = 1.0;
        let j = convection_coeffs(&s, &g, 1).unwrap();
        // only the (alpha_k + 1) G_{alpha + e_k} term of alpha = (0,2) sees G_(0,3)
        assert_eq!(j[below], 3.0);
        assert!(convection_coeffs(&s, &vec![0.0; set.len()], 0).unwrap().iter().all(|&x| x == 0.0));
        assert!(convection_coeffs(&s, &g, 2).is_err());
    }

    #[test]
    fn reduces_to_1d_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for m in 3..=9 {
            let nd: MomentStateND<f64> = random_state_nd(1, m, ConstraintCase::Classic, &mut rng).unwrap();
            let (rho, th) = (nd.f[0], nd.theta[0][0]);
            let s1 = MomentState1D::new(m, rho, nd.u[0], th, nd.f[3..].to_vec()).unwrap();
            let sys_nd = assemble_system_nd(&nd, 0.7).unwrap();
            let sys_1d = build_system_by_deduction(&s1, 0.7).unwrap();
            // dw_nd = P dw_1d, with g = rho theta / 2
            let mut p = DMatrix::identity(m + 1, m + 1);
            p[(2, 0)] = th / 2.0;
            p[(2, 2)] = rho / 2.0;
            assert!(max_abs(&(&sys_nd.mk[0] - assemble_mmat(nd.u[0], th, m).unwrap())) < 1e-14);
            assert!(max_abs(&(&sys_nd.d * &p - assemble_d(&s1).unwrap())) < 1e-13);
            let a_nd = sys_nd.normal_form().unwrap().remove(0);
            let a = p.clone().try_inverse().unwrap() * a_nd * &p;
            assert!(max_abs(&(a - regularized_matrix(&s1).unwrap())) < 1e-12);
            assert!((sys_nd.q.clone() - sys_1d.q.clone()).amax() < 1e-15);
        }
    }

    #[test]
    fn d_is_lower_triangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in [ConstraintCase::Classic, ConstraintCase::Generalized] {
            for d in 1..=3 {
                for m in 3..=5 {
                    let s: MomentStateND<f64> = random_state_nd(d, m, case, &mut rng).unwrap();
                    let sys = assemble_system_nd(&s, 1.0).unwrap();
                    assert_eq!(sys.d.upper_triangle(), DMatrix::from_diagonal(&sys.d.diagonal()));
                    assert!(sys.d.diagonal().iter().all(|x| x.abs() > 1e-3));
                    assert_eq!(sys.dim(), binom(m + d, d));
                }
            }
        }
    }

    #[test]
    fn unknowns_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for case in [ConstraintCase::Classic, ConstraintCase::Generalized] {
            let s: MomentStateND<f64> = random_state_nd(3, 4, case, &mut rng).unwrap();
            let back = MomentStateND::from_unknowns(3, 4, case, &s.unknowns()).unwrap();
            for (a, b) in back.f.iter().zip(&s.f) {
                assert!((a - b).abs() < 1e-14);
            }
            for i in 0..3 {
                for j in 0..3 {
                    assert!((back.theta[i][j] - s.theta[i][j]).abs() < 1e-14);
                }
            }
        }
        let labels = unknown_labels(2, 3, ConstraintCase::Classic);
        assert_eq!(&labels[..6], &["f0", "u1", "u2", "g11", "g12", "g22"]);
        assert_eq!(labels[6], "f(0,3)");
    }

    #[test]
    fn equilibrium_spectra_are_real() {
        for case in [ConstraintCase::Classic, ConstraintCase::Generalized] {
            let s = MomentStateND::equilibrium(4, case, 1.0, vec![0.3, -0.1], vec![vec![1.2, 0.0], vec![0.0, 1.2]]).unwrap();
            let sys = assemble_system_nd(&s, 1.0).unwrap();
            for m in &sys.mk {
                let r = analyze_default(m).unwrap();
                assert!(r.is_hyperbolic());
                assert!(r.eigenvalues.iter().all(|e: &crate::hyperbolicity::Eigenvalue<f64>| e.re.is_finite()));
            }
        }
    }

    #[test]
    fn symmetric_in_orthonormal_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for case in [ConstraintCase::Classic, ConstraintCase::Generalized] {
            for d in 1..=3 {
                let s: MomentStateND<f64> = random_state_nd(d, 4, case, &mut rng).unwrap();
                let sys = assemble_system_nd(&s, 1.0).unwrap();
                let mt = orthonormal_convection(&s, &sys).unwrap();
                assert!(symmetry_criterion(&mt, 1e-11));
                assert!(!symmetry_criterion(&sys.mk, 1e-11));
            }
        }
    }

    #[test]
    fn gram_is_diagonal_for_isotropic_theta() {
        let set = IndexSet::new(2, 4);
        let g = gram_matrix(&set, &(DMatrix::identity(2, 2) * 2.0)).unwrap();
        for (n, a) in set.indices.iter().enumerate() {
            assert!((g[(n, n)] - a.factorial() * 0.5f64.powi(a.order() as i32)).abs() < 1e-15);
        }
        assert_eq!(max_abs(&(&g - DMatrix::from_diagonal(&g.diagonal()))), 0.0);
    }

    #[test]
    fn both_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in [ConstraintCase::Classic, ConstraintCase::Generalized] {
            for d in 2..=3 {
                for m in 3..=4 {
                    let s: MomentStateND<f64> = random_state_nd(d, m, case, &mut rng).unwrap();
                    let sys = assemble_system_nd(&s, 1.0).unwrap();
                    let rep = check_abs_system(&sys, 5, 3, &AnalyzeOptions::default()).unwrap();
                    assert!(rep.passed(), "{case:?} d={d} m={m}");
                }
            }
        }
    }

    #[test]
    fn rotation_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        for case in [ConstraintCase::Generalized, ConstraintCase::Classic] {
            let s: MomentStateND<f64> = random_state_nd(2, 4, case, &mut rng).unwrap();
            let phi: f64 = 0.7;
            let r = DMatrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
            let sr = rotate_state(&s, &r).unwrap();
            let sys = assemble_system_nd(&s, 1.0).unwrap();
            let sysr = assemble_system_nd(&sr, 1.0).unwrap();
            let n = [0.6, 0.8];
            let nr = &r * DVector::from_vec(n.to_vec());
            let e1 = analyze_default(&sys.combination(&n)).unwrap().real_parts();
            let e2 = analyze_default(&sysr.combination(nr.as_slice())).unwrap().real_parts();
            for (a, b) in e1.iter().zip(&e2) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn validation() {
        let iso = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(MomentStateND::equilibrium(3, ConstraintCase::Classic, 1.0, vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.1, 1.0]]).is_err());
        assert!(MomentStateND::equilibrium(3, ConstraintCase::Generalized, 1.0, vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(MomentStateND::equilibrium(3, ConstraintCase::Generalized, -1.0, vec![0.0, 0.0], iso.clone()).is_err());
        assert!(MomentStateND::equilibrium(2, ConstraintCase::Generalized, 1.0, vec![0.0, 0.0], iso.clone()).is_err());
        let mut s = MomentStateND::equilibrium(3, ConstraintCase::Classic, 1.0, vec![0.0, 0.0], iso).unwrap();
        let set = IndexSet::new(2, 3);
        s.f[set.pair(0, 0)] = 0.2;
        assert!(s.check().is_err());
        s.f[set.pair(1, 1)] = -0.2;
        assert!(s.check().is_ok());
        s.f[1] = 0.1;
        assert!(s.check().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let s = MomentStateND::equilibrium(3, ConstraintCase::Generalized, 1.0, vec![0.0, 0.5], vec![vec![1.0, 0.1], vec![0.1, 2.0]]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains(r#""case":"generalized""#));
        assert!(j.contains(r#""indices":[[0,0],[0,1],[1,0],"#));
        let back: MomentStateND<f64> = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn derivative_is_linear(seed in 0u64..1000, a in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: MomentStateND<f64> = random_state_nd(2, 4, ConstraintCase::Generalized, &mut rng).unwrap();
            let set = IndexSet::new(2, 4);
            let rand_df = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                set.indices.iter().map(|i| if i.order() >= 3 || i.order() == 0 { rng.random_range(-1.0..1.0) } else { 0.0 }).collect()
            };
            let (f1, f2) = (rand_df(&mut rng), rand_df(&mut rng));
            let u1 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let u2 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let t1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
            let t2 = DMatrix::from_row_slice(2, 2, &[-0.1, 0.4, 0.4, 0.5]);
            let g1 = derivative_coeffs(&s, &u1, &t1, &f1).unwrap();
            let g2 = derivative_coeffs(&s, &u2, &t2, &f2).unwrap();
            let f3: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| x + a * y).collect();
            let u3 = [u1[0] + a * u2[0], u1[1] + a * u2[1]];
            let g3 = derivative_coeffs(&s, &u3, &(&t1 + &t2 * a), &f3).unwrap();
            for i in 0..g3.len() {
                prop_assert!((g3[i] - g1[i] - a * g2[i]).abs() < 1e-12);
            }
        }
    }
}
