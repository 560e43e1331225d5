//! The 1D moment state `w = (rho, u, theta, f_3, ..., f_M)` and the BGK
//! collision source in coefficient space.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::scalar::Real;

/// Unknowns of the 1D system truncated at order `M`.
///
/// `f[0]` holds `f_3`. The constraints `f_0 = rho`, `f_1 = f_2 = 0` are
/// structural: `f_1`, `f_2` are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState1D<T> {
    #[serde(rename = "M")]
    pub order: usize,
    pub rho: T,
    pub u: T,
    pub theta: T,
    pub f: Vec<T>,
}

impl<T: Real> MomentState1D<T> {
    pub fn new(order: usize, rho: T, u: T, theta: T, f: Vec<T>) -> Result<Self> {
        let s = Self {
            order,
            rho,
            u,
            theta,
            f,
        };
        s.check()?;
        Ok(s)
    }

    /// Local Maxwellian: all `f_alpha = 0` for `alpha >= 3`.
    pub fn equilibrium(order: usize, rho: T, u: T, theta: T) -> Result<Self> {
        Self::new(order, rho, u, theta, vec![T::zero(); order.saturating_sub(2)])
    }

    /// Builds a state from normalized coefficients `g_alpha = f_alpha / (rho theta^{alpha/2})`.
    pub fn from_normalized(order: usize, rho: T, u: T, theta: T, g: &[T]) -> Result<Self> {
        let f = g
            .iter()
            .enumerate()
            .map(|(i, &gi)| gi * rho * theta.powf(T::from_usize_exact(i + 3) * T::lit(0.5)))
            .collect();
        Self::new(order, rho, u, theta, f)
    }

    /// Number of unknowns, `M + 1`.
    pub fn dim(&self) -> usize {
        self.order + 1
    }

    /// Hermite coefficient `f_alpha`, including the structural values and
    /// zero outside `0..=M`.
    #[inline]
    pub fn coeff(&self, alpha: isize) -> T {
        match alpha {
            a if a < 0 => T::zero(),
            0 => self.rho,
            1 | 2 => T::zero(),
            a if (a as usize) <= self.order => self.f[a as usize - 3],
            _ => T::zero(),
        }
    }

    /// `f_alpha / (rho theta^{alpha/2})`.
    pub fn normalized(&self, alpha: usize) -> T {
        self.coeff(alpha as isize) / (self.rho * self.theta.powf(T::from_usize_exact(alpha) * T::lit(0.5)))
    }

    /// All violated invariants; empty when the state is admissible.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.order < 3 {
            v.push(Violation::OrderTooLow(self.order, 3));
        }
        let expected = self.order.saturating_sub(2);
        if self.f.len() != expected {
            v.push(Violation::CoefficientLength {
                expected,
                found: self.f.len(),
            });
        }
        if !(self.rho.is_finite_val() && self.u.is_finite_val() && self.theta.is_finite_val()) {
            v.push(Violation::NonFinite("rho/u/theta"));
        }
        if self.f.iter().any(|x| !x.is_finite_val()) {
            v.push(Violation::NonFinite("f"));
        }
        if !(self.rho > T::zero()) {
            v.push(Violation::DensityNonpositive);
        }
        if !(self.theta > T::zero()) {
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

    /// Unknown vector in the layout `(rho, u, theta, f_3, ..., f_M)`.
    pub fn to_vector(&self) -> DVector<T> {
        let mut w = DVector::zeros(self.dim());
        w[0] = self.rho;
        w[1] = self.u;
        w[2] = self.theta;
        for (i, &x) in self.f.iter().enumerate() {
            w[3 + i] = x;
        }
        w
    }

    /// Inverse of [`to_vector`](Self::to_vector). Does not validate.
    pub fn from_vector(w: &DVector<T>) -> Self {
        let order = w.len() - 1;
        Self {
            order,
            rho: w[0],
            u: w[1],
            theta: w[2],
            f: w.iter().skip(3).copied().collect(),
        }
    }
}

/// BGK source in coefficient space: `q_alpha = -f_alpha / tau` for
/// `alpha >= 3`, zero on the conserved slots.
pub fn bgk_source<T: Real>(state: &MomentState1D<T>, tau: T) -> Result<DVector<T>> {
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument(format!("relaxation time must be positive, got {tau}")));
    }
    state.check()?;
    let mut q = DVector::zeros(state.dim());
    for (i, &f) in state.f.iter().enumerate() {
        q[3 + i] = -f / tau;
    }
    Ok(q)
}

/// Seeded random state: `rho, theta` in `[0.3, 3]`, `u` in `[-2, 2]` and
/// normalized coefficients `f_alpha / (rho theta^{alpha/2})` in `[-0.5, 0.5]`.
pub fn random_state_1d<T: Real, R: Rng + ?Sized>(order: usize, rng: &mut R) -> Result<MomentState1D<T>> {
    let g: Vec<T> = (3..=order).map(|_| T::lit(rng.random_range(-0.5..0.5))).collect();
    let rho = T::lit(rng.random_range(0.3..3.0));
    let u = T::lit(rng.random_range(-2.0..2.0));
    let theta = T::lit(rng.random_range(0.3..3.0));
    MomentState1D::from_normalized(order, rho, u, theta, &g)
}
