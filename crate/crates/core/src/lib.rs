//! Globally hyperbolic moment systems for kinetic equations.
//!
//! The crate assembles the coefficient matrices of Hermite moment systems
//! (Grad's 1D system, its globally hyperbolic regularization, the 13-moment
//! system and the multi-dimensional full-moment systems), analyses their
//! eigenstructure and integrates the 1D system with a finite-volume BGK
//! solver.
//!
//! Everything numeric is generic over [`Real`] (`f64` or `f32`); the
//! aliases at the crate root fix `f64`.

pub mod error;
pub mod hermite;
pub mod hme1d;
pub mod hyperbolicity;
pub mod moment13;
pub mod momentnd;
pub mod scalar;
pub mod solver1d;
pub mod state1d;
pub mod system;

pub use error::{Error, Result, Violation};
pub use scalar::Real;

pub type State1D = state1d::MomentState1D<f64>;
pub type State1DF32 = state1d::MomentState1D<f32>;
pub type System = system::QuasiLinearSystem<f64>;
pub type SystemF32 = system::QuasiLinearSystem<f32>;
pub type BasisParams = hermite::HermiteBasisParams<f64>;
pub type Report = hyperbolicity::HyperbolicityReport<f64>;
pub type ScanResult = hyperbolicity::ScanResult<f64>;
pub type State13 = moment13::Moment13State<f64>;
pub type StateND = momentnd::MomentStateND<f64>;
pub type Grid = solver1d::Grid1D<f64>;
pub type Config = solver1d::SimConfig<f64>;
