//! First-order finite-volume solver for the 1D regularized moment system
//! `dw/dt + A(w) dw/dx = q(w)` with BGK relaxation.
//!
//! Transport uses local Lax-Friedrichs fluctuations on straight-line paths
//! in `w`, with the path integral of `A` taken at the segment midpoint and
//! the dissipation scaled by the largest characteristic speed at the
//! interface. The density row is updated from the flux `rho u` instead, so
//! mass is conserved to round-off. Relaxation is then applied exactly:
//! `f_alpha <- f_alpha exp(-dt / tau)` for `alpha >= 3`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::hermite::hermite_roots;
use crate::hme1d::regularized_matrix;
use crate::scalar::Real;
use crate::state1d::MomentState1D;

pub const DEFAULT_CFL: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Zero-gradient ghost cells.
    Copy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<T> {
    #[serde(rename = "M")]
    pub order: usize,
    pub cfl: T,
    pub tau: T,
    pub t_end: T,
    pub bc: Boundary,
    pub output_stride: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(order: usize, tau: T, t_end: T, bc: Boundary) -> Self {
        Self {
            order,
            cfl: T::lit(DEFAULT_CFL),
            tau,
            t_end,
            bc,
            output_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.order < 3 {
            return bad(format!("order must be at least 3, got {}", self.order));
        }
        if !(self.cfl > T::zero() && self.cfl < T::one()) {
            return bad(format!("cfl must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite_val() {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite_val() {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if self.output_stride == 0 {
            return bad("output_stride must be at least 1".into());
        }
        Ok(())
    }
}

/// Uniform grid of cell averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    pub n_cells: usize,
    pub x_min: T,
    pub x_max: T,
    pub cells: Vec<MomentState1D<T>>,
}

/// Primitive `(rho, u, theta)` of a Maxwellian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive<T> {
    pub rho: T,
    pub u: T,
    pub theta: T,
}

/// Initial data; every cell starts at a local Maxwellian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition<T> {
    Uniform(Primitive<T>),
    /// `rho (1 + amplitude sin(2 pi k (x - x_min) / L))`, as exact cell averages.
    Sine {
        rho: T,
        amplitude: T,
        u: T,
        theta: T,
        wavenumber: usize,
    },
    Riemann {
        x0: T,
        left: Primitive<T>,
        right: Primitive<T>,
    },
}

impl<T: Real> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, cells: Vec<MomentState1D<T>>) -> Result<Self> {
        let g = Self {
            n_cells: cells.len(),
            x_min,
            x_max,
            cells,
        };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_cells < 4 || self.cells.len() != self.n_cells {
            return Err(Error::InvalidArgument(format!("grid needs at least 4 cells, got {}", self.cells.len())));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::InvalidArgument("x_max must exceed x_min".into()));
        }
        let order = self.cells[0].order;
        for (i, c) in self.cells.iter().enumerate() {
            if c.order != order {
                return Err(Error::InvalidArgument(format!("cell {i} has order {}, expected {order}", c.order)));
            }
            c.check()?;
        }
        Ok(())
    }

    pub fn from_initial(order: usize, n_cells: usize, x_min: T, x_max: T, ic: &InitialCondition<T>) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidArgument("grid needs at least 4 cells, got 0".into()));
        }
        let dx = (x_max - x_min) / T::from_usize_exact(n_cells);
        let cells = (0..n_cells)
            .map(|i| {
                let a = x_min + dx * T::from_usize_exact(i);
                let b = a + dx;
                let p = match ic {
                    InitialCondition::Uniform(p) => *p,
                    InitialCondition::Sine {
                        rho,
                        amplitude,
                        u,
                        theta,
                        wavenumber,
                    } => {
                        let k = T::two_pi() * T::from_usize_exact(*wavenumber) / (x_max - x_min);
                        let avg = if *wavenumber == 0 {
                            T::zero()
                        } else {
                            ((k * (a - x_min)).cos() - (k * (b - x_min)).cos()) / (k * dx)
                        };
                        Primitive {
                            rho: *rho * (T::one() + *amplitude * avg),
                            u: *u,
                            theta: *theta,
                        }
                    }
                    InitialCondition::Riemann { x0, left, right } => {
                        if a + dx * T::lit(0.5) < *x0 {
                            *left
                        } else {
                            *right
                        }
                    }
                };
                MomentState1D::equilibrium(order, p.rho, p.u, p.theta)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(x_min, x_max, cells)
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize_exact(self.n_cells)
    }

    pub fn centers(&self) -> Vec<T> {
        let dx = self.dx();
        (0..self.n_cells).map(|i| self.x_min + dx * (T::from_usize_exact(i) + T::lit(0.5))).collect()
    }

    pub fn order(&self) -> usize {
        self.cells[0].order
    }
}

/// Largest root of `He_{M+1}`.
pub fn largest_root<T: Real>(order: usize) -> Result<T> {
    hermite_roots::<T>(order + 1)?
        .last()
        .copied()
        .ok_or_else(|| Error::InvalidArgument("empty root set".into()))
}

/// `|u| + c_max sqrt(theta)`, the spectral radius of the regularized matrix.
pub fn max_wavespeed<T: Real>(state: &MomentState1D<T>) -> Result<T> {
    state.check()?;
    Ok(wavespeed_with(largest_root(state.order)?, state))
}

fn wavespeed_with<T: Real>(c_max: T, s: &MomentState1D<T>) -> T {
    s.u.abs() + c_max * s.theta.sqrt()
}

/// `sum dx (rho, rho u, rho u^2 / 2 + rho theta / 2)`.
pub fn conserved_totals<T: Real>(grid: &Grid1D<T>) -> (T, T, T) {
    let dx = grid.dx();
    let half = T::lit(0.5);
    let (m, p, e) = grid.cells.iter().fold((T::zero(), T::zero(), T::zero()), |(m, p, e), c| {
        (m + c.rho, p + c.rho * c.u, e + half * c.rho * (c.u * c.u + c.theta))
    });
    (m * dx, p * dx, e * dx)
}

/// Largest stable time step `cfl dx / max_i max_wavespeed(w_i)`.
pub fn cfl_bound<T: Real>(grid: &Grid1D<T>, cfl: T) -> Result<T> {
    let c = largest_root(grid.order())?;
    let smax = grid.cells.iter().fold(T::zero(), |m, s| {
        let v = wavespeed_with(c, s);
        if v > m {
            v
        } else {
            m
        }
    });
    if smax > T::zero() {
        Ok(cfl * grid.dx() / smax)
    } else {
        Ok(T::lit(f64::INFINITY))
    }
}

struct Fluctuation<T: Real> {
    minus: DVector<T>,
    plus: DVector<T>,
    rho_flux: T,
}

fn midpoint<T: Real>(l: &MomentState1D<T>, r: &MomentState1D<T>) -> MomentState1D<T> {
    let h = T::lit(0.5);
    MomentState1D {
        order: l.order,
        rho: h * (l.rho + r.rho),
        u: h * (l.u + r.u),
        theta: h * (l.theta + r.theta),
        f: l.f.iter().zip(&r.f).map(|(a, b)| h * (*a + *b)).collect(),
    }
}

fn fluctuation<T: Real>(c_max: T, l: &MomentState1D<T>, r: &MomentState1D<T>) -> Result<Fluctuation<T>> {
    let h = T::lit(0.5);
    let jump = r.to_vector() - l.to_vector();
    let rho_flux_c = h * (l.rho * l.u + r.rho * r.u);
    let (a, s) = if jump.iter().all(|x| *x == T::zero()) {
        (DMatrix::zeros(l.dim(), l.dim()), T::zero())
    } else {
        let mid = midpoint(l, r);
        let s = [l, r, &mid].iter().map(|x| wavespeed_with(c_max, x)).fold(T::zero(), |m, v| if v > m { v } else { m });
        (regularized_matrix(&mid)?, s)
    };
    let aj = &a * &jump;
    let diss = &jump * (h * s);
    Ok(Fluctuation {
        minus: &aj * h - &diss,
        plus: &aj * h + &diss,
        rho_flux: rho_flux_c - h * s * jump[0],
    })
}

/// One transport step followed by exact BGK relaxation.
pub fn step<T: Real>(grid: &Grid1D<T>, config: &SimConfig<T>, dt: T) -> Result<Grid1D<T>> {
    step_numbered(grid, config, dt, 0)
}

fn step_numbered<T: Real>(grid: &Grid1D<T>, config: &SimConfig<T>, dt: T, step_no: usize) -> Result<Grid1D<T>> {
    config.validate()?;
    if grid.order() != config.order {
        return Err(Error::InvalidArgument(format!("grid order {} differs from config order {}", grid.order(), config.order)));
    }
    let bound = cfl_bound(grid, config.cfl)?;
    if !(dt >= T::zero()) || dt > bound {
        return Err(Error::Cfl {
            dt: dt.as_f64(),
            bound: bound.as_f64(),
        });
    }
    let n = grid.n_cells;
    let c_max = largest_root(config.order)?;
    let cells = &grid.cells;
    // interface k sits between cells k-1 and k, k = 0..=n
    let neighbours = |k: usize| -> (&MomentState1D<T>, &MomentState1D<T>) {
        match (k, config.bc) {
            (0, Boundary::Periodic) => (&cells[n - 1], &cells[0]),
            (0, Boundary::Copy) => (&cells[0], &cells[0]),
            (k, Boundary::Periodic) if k == n => (&cells[n - 1], &cells[0]),
            (k, Boundary::Copy) if k == n => (&cells[n - 1], &cells[n - 1]),
            (k, _) => (&cells[k - 1], &cells[k]),
        }
    };
    let flucts = (0..=n)
        .into_par_iter()
        .map(|k| {
            let (l, r) = neighbours(k);
            fluctuation(c_max, l, r)
        })
        .collect::<Result<Vec<_>>>()?;
    let ratio = dt / grid.dx();
    let decay = (-dt / config.tau).exp();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let w = cells[i].to_vector();
        let mut next = &w - (&flucts[i].plus + &flucts[i + 1].minus) * ratio;
        next[0] = w[0] - ratio * (flucts[i + 1].rho_flux - flucts[i].rho_flux);
        for a in 3..next.len() {
            next[a] *= decay;
        }
        let s = MomentState1D::from_vector(&next);
        let v: Vec<Violation> = s.validate();
        if !v.is_empty() {
            return Err(Error::StepProducedInvalidState {
                cell: i,
                step: step_no,
                violations: v,
            });
        }
        out.push(s);
    }
    Ok(Grid1D {
        n_cells: n,
        x_min: grid.x_min,
        x_max: grid.x_max,
        cells: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<T> {
    pub step: usize,
    pub time: T,
    pub grid: Grid1D<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Snapshot<T>>,
    pub dt_history: Vec<T>,
    /// `(time, mass, momentum, energy)` after every step, starting at `t = 0`.
    pub conservation: Vec<[T; 4]>,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &Snapshot<T> {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

/// Advances to `t_end` with `dt = min(cfl_bound, t_end - t)`, recording every
/// `output_stride`-th step and the final state.
pub fn run<T: Real>(config: &SimConfig<T>, initial: Grid1D<T>) -> Result<Trajectory<T>> {
    config.validate()?;
    initial.check()?;
    if initial.order() != config.order {
        return Err(Error::InvalidArgument(format!("grid order {} differs from config order {}", initial.order(), config.order)));
    }
    let totals = |t: T, g: &Grid1D<T>| {
        let (m, p, e) = conserved_totals(g);
        [t, m, p, e]
    };
    let mut traj = Trajectory {
        snapshots: vec![Snapshot {
            step: 0,
            time: T::zero(),
            grid: initial.clone(),
        }],
        dt_history: Vec::new(),
        conservation: vec![totals(T::zero(), &initial)],
    };
    let mut grid = initial;
    let mut t = T::zero();
    let mut n = 0;
    while t < config.t_end {
        let bound = cfl_bound(&grid, config.cfl)?;
        let remaining = config.t_end - t;
        let last = remaining <= bound;
        let dt = if last { remaining } else { bound };
        n += 1;
        grid = step_numbered(&grid, config, dt, n)?;
        t = if last { config.t_end } else { t + dt };
        traj.dt_history.push(dt);
        traj.conservation.push(totals(t, &grid));
        if last || n % config.output_stride == 0 {
            traj.snapshots.push(Snapshot {
                step: n,
                time: t,
                grid: grid.clone(),
            });
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(order: usize, bc: Boundary) -> SimConfig<f64> {
        SimConfig::new(order, 1.0, 0.1, bc)
    }

    #[test]
    fn wavespeed_examples() {
        let s: MomentState1D<f64> = MomentState1D::equilibrium(3, 1.0, 0.0, 1.0).unwrap();
        let c = (3.0 + 6f64.sqrt()).sqrt();
        assert!((max_wavespeed(&s).unwrap() - 2.334414).abs() < 1e-6);
        assert!((max_wavespeed(&s).unwrap() - c).abs() < 1e-13);
        let s: MomentState1D<f64> = MomentState1D::equilibrium(3, 1.0, 1.0, 4.0).unwrap();
        assert!((max_wavespeed(&s).unwrap() - (1.0 + 2.0 * c)).abs() < 1e-13);
        let s: MomentState1D<f64> = MomentState1D::equilibrium(5, 1.0, 5.0, 1e-30).unwrap();
        assert!((max_wavespeed(&s).unwrap() - 5.0).abs() < 1e-12);
        let s: MomentState1D<f64> = MomentState1D::equilibrium(4, 1.0, -0.5, 2.0).unwrap();
        let rho = crate::hyperbolicity::analyze_default(&regularized_matrix(&s).unwrap())
            .unwrap()
            .real_parts()
            .iter()
            .fold(0.0f64, |m, x: &f64| m.max(x.abs()));
        assert!((max_wavespeed(&s).unwrap() - rho).abs() < 1e-10);
    }

    #[test]
    fn totals_examples() {
        let ic: InitialCondition<f64> = InitialCondition::Uniform(Primitive { rho: 1.0, u: 0.0, theta: 1.0 });
        let g = Grid1D::from_initial(3, 100, 0.0, 1.0, &ic).unwrap();
        let (m, p, e) = conserved_totals(&g);
        assert!((m - 1.0).abs() < 1e-14 && p == 0.0 && (e - 0.5).abs() < 1e-14);

        let ic: InitialCondition<f64> = InitialCondition::Sine { rho: 1.0, amplitude: 0.3, u: 0.2, theta: 1.0, wavenumber: 2 };
        let g = Grid1D::from_initial(3, 50, 0.0, 2.0, &ic).unwrap();
        let mut boosted = g.clone();
        for c in &mut boosted.cells {
            c.u += 0.7;
        }
        let (m0, p0, _) = conserved_totals(&g);
        let (m1, p1, _) = conserved_totals(&boosted);
        assert_eq!(m0, m1);
        assert!((p1 - p0 - 0.7 * m0).abs() < 1e-13);
    }

    #[test]
    fn sine_cell_averages_integrate_exactly() {
        let ic: InitialCondition<f64> = InitialCondition::Sine { rho: 2.0, amplitude: 0.5, u: 0.0, theta: 1.0, wavenumber: 3 };
        let g = Grid1D::from_initial(3, 7, -1.0, 2.0, &ic).unwrap();
        assert!((conserved_totals(&g).0 - 6.0).abs() < 1e-13);
    }

    #[test]
    fn constant_states_are_fixed_points() {
        for bc in [Boundary::Periodic, Boundary::Copy] {
            let s = MomentState1D::new(5, 1.3, 0.4, 0.9, vec![0.1, -0.05, 0.02]).unwrap();
            let g = Grid1D::new(0.0, 1.0, vec![s.clone(); 16]).unwrap();
            let c = cfg(5, bc);
            let mut h = g.clone();
            for _ in 0..20 {
                h = step(&h, &c, cfl_bound(&h, c.cfl).unwrap()).unwrap();
            }
            for cell in &h.cells {
                assert_eq!((cell.rho, cell.u, cell.theta), (s.rho, s.u, s.theta));
            }
            let eq = Grid1D::from_initial(5, 16, 0.0, 1.0, &InitialCondition::Uniform(Primitive { rho: 1.3, u: 0.4, theta: 0.9 })).unwrap();
            for tau in [1e-6, 1.0, 1e6] {
                let mut c = c.clone();
                c.tau = tau;
                let next = step(&eq, &c, cfl_bound(&eq, c.cfl).unwrap()).unwrap();
                assert_eq!(next, eq);
            }
        }
    }

    #[test]
    fn relaxation_is_exact_exponential() {
        let s = MomentState1D::new(4, 1.0, 0.0, 1.0, vec![0.2, -0.1]).unwrap();
        let g = Grid1D::new(0.0, 1.0, vec![s; 8]).unwrap();
        let mut c = cfg(4, Boundary::Periodic);
        c.tau = 0.01;
        let dt = cfl_bound(&g, c.cfl).unwrap();
        let next = step(&g, &c, dt).unwrap();
        let e = (-dt / 0.01f64).exp();
        assert!((next.cells[3].f[0] - 0.2 * e).abs() < 1e-15);
        assert!((next.cells[3].f[1] + 0.1 * e).abs() < 1e-15);
    }

    #[test]
    fn rejects_cfl_violation() {
        let g = Grid1D::from_initial(3, 10, 0.0, 1.0, &InitialCondition::Uniform(Primitive { rho: 1.0, u: 0.0, theta: 1.0 })).unwrap();
        let c = cfg(3, Boundary::Periodic);
        let b = cfl_bound(&g, c.cfl).unwrap();
        assert!(matches!(step(&g, &c, b * 1.01), Err(Error::Cfl { .. })));
        assert!(step(&g, &c, b).is_ok());
    }

    #[test]
    fn periodic_mass_is_conserved() {
        let ic: InitialCondition<f64> = InitialCondition::Sine { rho: 1.0, amplitude: 0.4, u: 0.3, theta: 1.0, wavenumber: 1 };
        let mut g: Grid1D<f64> = Grid1D::from_initial(5, 64, 0.0, 1.0, &ic).unwrap();
        let c = SimConfig::new(5, 0.05, 1.0, Boundary::Periodic);
        let (m0, _, _) = conserved_totals(&g);
        for _ in 0..100 {
            let dt = cfl_bound(&g, c.cfl).unwrap();
            let next = step(&g, &c, dt).unwrap();
            let (a, _, _) = conserved_totals(&g);
            let (b, _, _) = conserved_totals(&next);
            assert!((a - b).abs() <= 1e-12 * a);
            g = next;
        }
        assert!((conserved_totals(&g).0 - m0).abs() / m0 < 1e-10);
    }

    #[test]
    fn run_zero_time_returns_initial() {
        let g = Grid1D::from_initial(3, 10, 0.0, 1.0, &InitialCondition::Uniform(Primitive { rho: 1.0, u: 0.0, theta: 1.0 })).unwrap();
        let mut c = cfg(3, Boundary::Copy);
        c.t_end = 0.0;
        let tr = run(&c, g.clone()).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        assert_eq!(tr.snapshots[0].grid, g);
        assert!(tr.dt_history.is_empty());
    }

    #[test]
    fn run_hits_end_time_and_strides() {
        let ic: InitialCondition<f64> = InitialCondition::Sine { rho: 1.0, amplitude: 0.1, u: 0.0, theta: 1.0, wavenumber: 1 };
        let g = Grid1D::from_initial(3, 20, 0.0, 1.0, &ic).unwrap();
        let mut c = cfg(3, Boundary::Periodic);
        c.output_stride = 3;
        let tr = run(&c, g).unwrap();
        assert_eq!(tr.last().time, 0.1);
        assert!(tr.snapshots.iter().skip(1).rev().skip(1).all(|s| s.step % 3 == 0));
        let total: f64 = tr.dt_history.iter().sum();
        assert!((total - 0.1).abs() < 1e-14);
        assert_eq!(tr.conservation.len(), tr.dt_history.len() + 1);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(3, Boundary::Periodic);
        c.cfl = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg(3, Boundary::Periodic);
        c.tau = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(3, Boundary::Periodic);
        c.t_end = -1.0;
        assert!(c.validate().is_err());
        assert!(Grid1D::from_initial(3, 3, 0.0, 1.0, &InitialCondition::Uniform(Primitive { rho: 1.0, u: 0.0, theta: 1.0 })).is_err());
        let g = Grid1D::from_initial(4, 8, 0.0, 1.0, &InitialCondition::Uniform(Primitive { rho: 1.0, u: 0.0, theta: 1.0 })).unwrap();
        assert!(run(&cfg(3, Boundary::Periodic), g).is_err());
    }
}
