//! The globally hyperbolic 13-moment system in three dimensions.
//!
//! Unknowns are ordered
//! `(rho, u_1, u_2, u_3, theta_11, theta_22, theta_33, theta_12, theta_13, theta_23, q_1, q_2, q_3)`
//! and the basis functions in the same order are
//! `(w, H_1, H_2, H_3, H_11, H_22, H_33, H_12, H_13, H_23, H_ii1, H_ii2, H_ii3)`.
//! Axes are numbered `1..=3` in the public API.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::scalar::Real;
use crate::system::QuasiLinearSystem;

/// Number of unknowns.
pub const DIM13: usize = 13;

/// Tensor index pairs of the six stored `theta` components.
pub const THETA_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

const RHO: usize = 0;
const U0: usize = 1;
const TH0: usize = 4;
const Q0: usize = 10;

/// `(rho, u_i, theta_ij, q_i)`; the scalar temperature is `theta_kk / 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moment13State<T> {
    pub rho: T,
    pub u: [T; 3],
    /// `(theta_11, theta_22, theta_33, theta_12, theta_13, theta_23)`.
    pub theta: [T; 6],
    pub q: [T; 3],
}

/// Position of `theta_ij` in the unknown vector.
pub fn theta_slot(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    TH0 + THETA_PAIRS.iter().position(|&p| p == (a, b)).expect("indices below 3")
}

impl<T: Real> Moment13State<T> {
    pub fn new(rho: T, u: [T; 3], theta: [T; 6], q: [T; 3]) -> Result<Self> {
        let s = Self { rho, u, theta, q };
        s.check()?;
        Ok(s)
    }

    /// Maxwellian with isotropic temperature `theta` and no heat flux.
    pub fn equilibrium(rho: T, u: [T; 3], theta: T) -> Result<Self> {
        let z = T::zero();
        Self::new(rho, u, [theta, theta, theta, z, z, z], [z; 3])
    }

    /// `theta = theta_kk / 3`.
    pub fn theta_mean(&self) -> T {
        (self.theta[0] + self.theta[1] + self.theta[2]) / T::lit(3.0)
    }

    /// `theta_ij` for tensor indices `0..3`.
    pub fn theta_ij(&self, i: usize, j: usize) -> T {
        self.theta[theta_slot(i, j) - TH0]
    }

    /// Trace-free part `theta_<ij>`.
    pub fn dev(&self, i: usize, j: usize) -> T {
        if i == j {
            self.theta_ij(i, i) - self.theta_mean()
        } else {
            self.theta_ij(i, j)
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let all = std::iter::once(self.rho).chain(self.u).chain(self.theta).chain(self.q);
        if all.into_iter().any(|x| !x.is_finite_val()) {
            v.push(Violation::NonFinite("13-moment state"));
        }
        if !(self.rho > T::zero()) {
            v.push(Violation::DensityNonpositive);
        }
        if !(self.theta_mean() > T::zero()) {
            v.push(Violation::TemperatureNonpositive);
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

    pub fn to_vector(&self) -> DVector<T> {
        let mut w = DVector::zeros(DIM13);
        w[RHO] = self.rho;
        for i in 0..3 {
            w[U0 + i] = self.u[i];
            w[Q0 + i] = self.q[i];
        }
        for (n, &t) in self.theta.iter().enumerate() {
            w[TH0 + n] = t;
        }
        w
    }

    /// Inverse of [`to_vector`](Self::to_vector). Does not validate.
    pub fn from_vector(w: &DVector<T>) -> Result<Self> {
        if w.len() != DIM13 {
            return Err(Error::DimensionMismatch {
                expected: DIM13,
                found: w.len(),
            });
        }
        Ok(Self {
            rho: w[RHO],
            u: [w[U0], w[U0 + 1], w[U0 + 2]],
            theta: std::array::from_fn(|n| w[TH0 + n]),
            q: [w[Q0], w[Q0 + 1], w[Q0 + 2]],
        })
    }
}

/// Seeded test state: `rho, theta` in `[0.5, 2]`, `u` in `[-1, 1]`,
/// trace-free part up to `0.3 theta`, `|q_i| <= 0.5 rho theta^{3/2}`.
pub fn random_state_13<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Moment13State<T> {
    let rho: f64 = rng.random_range(0.5..2.0);
    let th: f64 = rng.random_range(0.5..2.0);
    let u: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let mut d: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.3..0.3) * th);
    let tr = (d[0] + d[1] + d[2]) / 3.0;
    for x in d.iter_mut().take(3) {
        *x -= tr;
    }
    let theta: [f64; 6] = std::array::from_fn(|n| if n < 3 { th + d[n] } else { d[n] });
    let qs = 0.5 * rho * th.powf(1.5);
    let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-qs..qs));
    Moment13State {
        rho: T::lit(rho),
        u: u.map(T::lit),
        theta: theta.map(T::lit),
        q: q.map(T::lit),
    }
}

/// Lower-triangular `D(w)` of the projected time derivative.
pub fn assemble_d13<T: Real>(state: &Moment13State<T>) -> Result<DMatrix<T>> {
    state.check()?;
    let rho = state.rho;
    let half = T::lit(0.5);
    let fifth = T::lit(0.2);
    let mut d = DMatrix::zeros(DIM13, DIM13);
    d[(RHO, RHO)] = T::one();
    for i in 0..3 {
        d[(U0 + i, U0 + i)] = rho;
    }
    for (n, &(i, j)) in THETA_PAIRS.iter().enumerate() {
        let r = TH0 + n;
        if i == j {
            d[(r, RHO)] = half * state.dev(i, i);
            d[(r, r)] = half * rho;
        } else {
            // H_ij and H_ji share one basis slot
            d[(r, RHO)] = state.dev(i, j);
            d[(r, r)] = rho;
        }
    }
    for j in 0..3 {
        for k in 0..3 {
            d[(Q0 + j, U0 + k)] = fifth * rho * state.dev(j, k);
        }
        d[(Q0 + j, Q0 + j)] = fifth;
    }
    Ok(d)
}

/// The convection matrix along axis 1, with `u_1` on the diagonal.
fn m1_matrix<T: Real>(u1: T, theta: T) -> DMatrix<T> {
    let mut m = DMatrix::identity(DIM13, DIM13) * u1;
    let f = |x: f64| T::lit(x);
    let fifth = theta * f(0.2);
    let entries = [
        (0, 1, T::one()),
        (1, 0, theta),
        (1, 4, f(2.0)),
        (2, 7, T::one()),
        (3, 8, T::one()),
        (4, 1, theta),
        (4, 10, f(3.0)),
        (5, 10, T::one()),
        (6, 10, T::one()),
        (7, 2, theta),
        (7, 11, f(2.0)),
        (8, 3, theta),
        (8, 12, f(2.0)),
        (10, 4, fifth * f(3.0)),
        (10, 5, fifth),
        (10, 6, fifth),
        (11, 7, fifth),
        (12, 8, fifth),
    ];
    for (r, c, v) in entries {
        m[(r, c)] = v;
    }
    m
}

/// Unknown-index permutation exchanging spatial axis 1 with axis `k`:
/// component `p[i]` of the permuted vector is component `i` of the original.
pub fn axis_permutation(k: usize) -> Result<[usize; DIM13]> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("axis must be 1, 2 or 3, got {k}")));
    }
    let a = k - 1;
    let swap = |i: usize| match i {
        0 => a,
        x if x == a => 0,
        x => x,
    };
    let mut p = [0usize; DIM13];
    p[RHO] = RHO;
    for i in 0..3 {
        p[U0 + i] = U0 + swap(i);
        p[Q0 + i] = Q0 + swap(i);
    }
    for (n, &(i, j)) in THETA_PAIRS.iter().enumerate() {
        p[TH0 + n] = theta_slot(swap(i), swap(j));
    }
    Ok(p)
}

/// Convection matrix `M_k(w)`, `k` in `1..=3`. `M_1` is the printed matrix;
/// `M_2`, `M_3` are its conjugates under [`axis_permutation`].
pub fn assemble_m13<T: Real>(state: &Moment13State<T>, k: usize) -> Result<DMatrix<T>> {
    let p = axis_permutation(k)?;
    state.check()?;
    let m1 = m1_matrix(state.u[k - 1], state.theta_mean());
    let mut m = DMatrix::zeros(DIM13, DIM13);
    for i in 0..DIM13 {
        for j in 0..DIM13 {
            m[(p[i], p[j])] = m1[(i, j)];
        }
    }
    Ok(m)
}

/// `p(M) = (M - u)[5(M - u)^2 - 7 theta][5(M - u)^4 - 26 theta (M - u)^2 + 15 theta^2]`.
pub fn minimal_polynomial_13<T: Real>(m: &DMatrix<T>, u: T, theta: T) -> DMatrix<T> {
    let n = m.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let x = m - &id * u;
    let x2 = &x * &x;
    let f = |v: f64| T::lit(v);
    let a = &x2 * f(5.0) - &id * (f(7.0) * theta);
    let b = &x2 * &x2 * f(5.0) - &x2 * (f(26.0) * theta) + &id * (f(15.0) * theta * theta);
    x * a * b
}

/// Distinct characteristic speeds along axis `k` with their multiplicities,
/// ascending: `u_k`, `u_k +- sqrt(7 theta / 5)`, `u_k +- sqrt((13 +- sqrt 94) theta / 5)`.
pub fn eigenspeeds_13<T: Real>(state: &Moment13State<T>, k: usize) -> Result<Vec<(T, usize)>> {
    axis_permutation(k)?;
    let th = state.theta_mean();
    if !(th > T::zero()) {
        return Err(Error::InvalidState(vec![Violation::TemperatureNonpositive]));
    }
    let u = state.u[k - 1];
    let f = |v: f64| T::lit(v);
    let s94 = f(94.0).sqrt();
    let c_mid = (f(7.0) * th / f(5.0)).sqrt();
    let c_lo = ((f(13.0) - s94) * th / f(5.0)).sqrt();
    let c_hi = ((f(13.0) + s94) * th / f(5.0)).sqrt();
    Ok(vec![
        (u - c_hi, 1),
        (u - c_mid, 2),
        (u - c_lo, 1),
        (u, 5),
        (u + c_lo, 1),
        (u + c_mid, 2),
        (u + c_hi, 1),
    ])
}

fn check_collision_params<T: Real>(chi23: T, m_g: T) -> Result<()> {
    if !(chi23 > T::zero()) || !(m_g > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "collision constant and molecule mass must be positive, got chi = {chi23}, m_g = {m_g}"
        )));
    }
    Ok(())
}

/// Collision term in the variables of the explicit system (`D^{-1} q`):
/// `-(3 rho chi / m_g) theta_<ij>` on the temperature slots and
/// `-(2 rho chi / m_g) q_j` on the heat-flux slots.
pub fn collision_13<T: Real>(state: &Moment13State<T>, chi23: T, m_g: T) -> Result<DVector<T>> {
    check_collision_params(chi23, m_g)?;
    state.check()?;
    let a = T::lit(3.0) * state.rho * chi23 / m_g;
    let b = T::lit(2.0) * state.rho * chi23 / m_g;
    let mut out = DVector::zeros(DIM13);
    for (n, &(i, j)) in THETA_PAIRS.iter().enumerate() {
        out[TH0 + n] = -a * state.dev(i, j);
    }
    for j in 0..3 {
        out[Q0 + j] = -b * state.q[j];
    }
    Ok(out)
}

/// Collision term as basis coefficients (the source `q` of the quasilinear
/// form): `-(3 rho chi / m_g) (rho theta_<ij> / 2 H_ij + 2/15 q_j H_iij)`
/// collected on the 13 basis slots.
pub fn collision_13_projected<T: Real>(state: &Moment13State<T>, chi23: T, m_g: T) -> Result<DVector<T>> {
    check_collision_params(chi23, m_g)?;
    state.check()?;
    let a = T::lit(3.0) * state.rho * chi23 / m_g;
    let mut out = DVector::zeros(DIM13);
    for (n, &(i, j)) in THETA_PAIRS.iter().enumerate() {
        let w = if i == j { T::lit(0.5) } else { T::one() };
        out[TH0 + n] = -a * w * state.rho * state.dev(i, j);
    }
    for j in 0..3 {
        out[Q0 + j] = -a * T::lit(2.0 / 15.0) * state.q[j];
    }
    Ok(out)
}

/// `D`, `[M_1, M_2, M_3]` and the projected collision source.
pub fn system_13<T: Real>(state: &Moment13State<T>, chi23: T, m_g: T) -> Result<QuasiLinearSystem<T>> {
    let d = assemble_d13(state)?;
    let mk = (1..=3).map(|k| assemble_m13(state, k)).collect::<Result<Vec<_>>>()?;
    let q = collision_13_projected(state, chi23, m_g)?;
    QuasiLinearSystem::new(d, mk, q)
}

/// Time derivative `dw/dt` from the explicit equations.
///
/// `grad[(v, k)]` is the derivative of unknown `v` along axis `k + 1`.
pub fn rhs_explicit_13<T: Real>(state: &Moment13State<T>, grad: &DMatrix<T>, chi23: T, m_g: T) -> Result<DVector<T>> {
    if grad.nrows() != DIM13 || grad.ncols() != 3 {
        return Err(Error::DimensionMismatch {
            expected: DIM13,
            found: grad.nrows(),
        });
    }
    let src = collision_13(state, chi23, m_g)?;
    let rho = state.rho;
    let th = state.theta_mean();
    let u = state.u;
    let f = |v: f64| T::lit(v);
    let r = 0..3;
    let sum = |it: &mut dyn Iterator<Item = T>| it.fold(T::zero(), |a, b| a + b);

    let drho = |k: usize| grad[(RHO, k)];
    let du = |i: usize, k: usize| grad[(U0 + i, k)];
    let dth = |i: usize, j: usize, k: usize| grad[(theta_slot(i, j), k)];
    let dq = |i: usize, k: usize| grad[(Q0 + i, k)];
    let adv = |v: usize| sum(&mut r.clone().map(|k| u[k] * grad[(v, k)]));
    let div_u = sum(&mut r.clone().map(|k| du(k, k)));
    let div_q = sum(&mut r.clone().map(|k| dq(k, k)));

    let mut out = DVector::zeros(DIM13);
    out[RHO] = -adv(RHO) - rho * div_u;
    for i in 0..3 {
        let s = sum(&mut r.clone().map(|k| dth(i, k, k) + state.theta_ij(i, k) / rho * drho(k)));
        out[U0 + i] = -adv(U0 + i) - s;
    }
    let tdu = sum(&mut r.clone().flat_map(|k| r.clone().map(move |l| (k, l))).map(|(k, l)| state.theta_ij(k, l) * du(k, l)));
    for (n, &(i, j)) in THETA_PAIRS.iter().enumerate() {
        let dl = if i == j { T::one() } else { T::zero() };
        let mut s = -adv(TH0 + n) + state.theta_ij(i, j) * div_u;
        s -= f(0.6) * th * (du(i, j) + du(j, i) + dl * div_u);
        let cross = sum(&mut r.clone().map(|k| state.theta_ij(i, k) * du(k, j) + state.theta_ij(j, k) * du(k, i)));
        s -= f(0.4) * (cross + dl * tdu);
        s -= f(0.4) / rho * (dq(i, j) + dq(j, i) + dl * div_q);
        out[TH0 + n] = s + src[TH0 + n];
    }
    for j in 0..3 {
        let mut s = -adv(Q0 + j);
        for i in 0..3 {
            for k in 0..3 {
                s += state.dev(i, j) * state.dev(i, k) * drho(k);
                s += rho * state.theta_ij(i, j) * dth(i, k, k);
            }
            s -= f(2.0) * rho * th * dth(i, j, i);
        }
        s -= f(0.5) * rho * th * sum(&mut r.clone().map(|k| dth(k, k, j)));
        out[Q0 + j] = s + src[Q0 + j];
    }
    Ok(out)
}
