//! Real-diagonalizability verdicts for coefficient matrices and
//! quasilinear systems.
//!
//! A matrix is judged hyperbolic when its numerically computed spectrum is
//! real within `tol * scale`, every eigenvalue cluster has a full
//! eigenspace, and the eigenvector matrix has condition number below
//! `cond_cap`. Here `scale = max(1, spectral radius)`.

use nalgebra::{balancing, DMatrix, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hme1d::{assemble_grad_a, regularize};
use crate::scalar::Real;
use crate::state1d::MomentState1D;
use crate::system::{condition_number, max_abs, QuasiLinearSystem};

const MAX_SCHUR_ITER: usize = 2_000;
const SCHUR_RESTARTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Hyperbolic,
    NotHyperbolic,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue<T> {
    pub re: T,
    pub im: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport<T> {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Eigenvalue<T>>,
    pub max_imag: T,
    pub diagonalizable: bool,
    /// Infinite when the spectrum is complex or some eigenvalue is defective.
    pub eigvec_condition: T,
    pub spectral_scale: T,
    pub verdict: Verdict,
}

impl<T: Real> HyperbolicityReport<T> {
    pub fn is_hyperbolic(&self) -> bool {
        self.verdict == Verdict::Hyperbolic
    }

    /// Real parts of the eigenvalues, ascending.
    pub fn real_parts(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|e| e.re).collect()
    }
}

/// Thresholds for [`analyze`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOptions<T> {
    pub tol: T,
    pub cond_cap: T,
}

impl<T: Real> Default for AnalyzeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::default_tol(),
            cond_cap: T::lit(1e8),
        }
    }
}

/// Eigenvalues of a general real matrix, sorted by real part.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.iter().any(|x| !x.is_finite_val()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut b = a.clone();
    balancing::balance_parlett_reinsch(&mut b);
    let mut ev = schur_eigenvalues(b)?;
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(ev)
}

/// Eigenvalues from the real Schur form. nalgebra's deflation test is
/// relative to neighbouring diagonal entries and can stall on clusters near
/// zero, so the threshold is relaxed in steps, seeded orthogonal similarity
/// transforms are tried, and finally the spectrum is shifted away from zero.
fn schur_eigenvalues<T: Real>(b: DMatrix<T>) -> Result<Vec<Eigenvalue<T>>> {
    let n = b.nrows();
    let scale = max_abs(&b);
    for shift in [0.0, 1.0, -1.0, 0.5] {
        let sigma = scale * T::lit(shift);
        let shifted = &b + DMatrix::identity(n, n) * sigma;
        for factor in [1.0, 16.0, 256.0] {
            let eps = T::eps() * T::lit(factor);
            let mut rng = ChaCha8Rng::seed_from_u64(0x5c4u64);
            let mut candidate = shifted.clone();
            for attempt in 0..=SCHUR_RESTARTS {
                if attempt > 0 {
                    let g = DMatrix::from_fn(n, n, |_, _| T::lit(StandardNormal.sample(&mut rng)));
                    let q = g.qr().q();
                    candidate = q.transpose() * &shifted * &q;
                }
                if let Some(s) = Schur::try_new(candidate.clone(), eps, MAX_SCHUR_ITER) {
                    return Ok(s
                        .complex_eigenvalues()
                        .iter()
                        .map(|z| Eigenvalue { re: z.re - sigma, im: z.im })
                        .collect());
                }
            }
        }
    }
    Err(Error::EigenNoConvergence)
}

/// Eigen-analysis with the default thresholds.
pub fn analyze_default<T: Real>(a: &DMatrix<T>) -> Result<HyperbolicityReport<T>> {
    analyze(a, &AnalyzeOptions::default())
}

pub fn analyze<T: Real>(a: &DMatrix<T>, opts: &AnalyzeOptions<T>) -> Result<HyperbolicityReport<T>> {
    let eigenvalues = eigenvalues(a)?;
    let n = eigenvalues.len();
    let radius = eigenvalues
        .iter()
        .map(|e| (e.re * e.re + e.im * e.im).sqrt())
        .fold(T::zero(), |m, x| if x > m { x } else { m });
    let scale = if radius > T::one() { radius } else { T::one() };
    let max_imag = eigenvalues
        .iter()
        .map(|e| e.im.abs())
        .fold(T::zero(), |m, x| if x > m { x } else { m });
    let inf = T::lit(f64::INFINITY);

    let real = max_imag < opts.tol * scale;
    let (diagonalizable, eigvec_condition) = if real && n > 0 {
        match real_eigenbasis(a, &eigenvalues, scale) {
            Some(v) => (true, condition_number(&v)),
            None => (false, inf),
        }
    } else if n == 0 {
        (true, T::one())
    } else {
        (false, inf)
    };

    let verdict = if !real {
        if max_imag < T::lit(1e3) * opts.tol * scale {
            Verdict::Marginal
        } else {
            Verdict::NotHyperbolic
        }
    } else if !diagonalizable {
        Verdict::NotHyperbolic
    } else if eigvec_condition >= opts.cond_cap {
        Verdict::Marginal
    } else {
        Verdict::Hyperbolic
    };

    Ok(HyperbolicityReport {
        eigenvalues,
        max_imag,
        diagonalizable: diagonalizable && eigvec_condition < opts.cond_cap,
        eigvec_condition,
        spectral_scale: scale,
        verdict,
    })
}

/// Unit eigenvectors for a real spectrum, one orthonormal block per
/// eigenvalue cluster, or `None` when some cluster lacks a full eigenspace.
fn real_eigenbasis<T: Real>(a: &DMatrix<T>, ev: &[Eigenvalue<T>], scale: T) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let cluster_tol = T::lit(1e-6) * scale;
    let norm = a.norm();
    let null_tol = T::eps().sqrt() * if norm > T::one() { norm } else { T::one() };

    let mut clusters: Vec<Vec<T>> = Vec::new();
    for e in ev {
        match clusters.last_mut() {
            Some(c) if e.re - *c.last().expect("nonempty cluster") <= cluster_tol => c.push(e.re),
            _ => clusters.push(vec![e.re]),
        }
    }

    let mut basis = DMatrix::zeros(n, n);
    let mut col = 0;
    for c in &clusters {
        let m = c.len();
        let mean = c.iter().fold(T::zero(), |s, &x| s + x) / T::from_usize_exact(m);
        let shifted = a - DMatrix::identity(n, n) * mean;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.as_ref()?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[i]
                .partial_cmp(&svd.singular_values[j])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if svd.singular_values[order[m - 1]] > null_tol {
            return None;
        }
        for &k in order.iter().take(m) {
            basis.set_column(col, &vt.row(k).transpose());
            col += 1;
        }
    }
    Some(basis)
}

/// Outcome of the two hyperbolicity conditions for a quasilinear system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsSystemReport<T> {
    pub d_condition: T,
    pub d_invertible: bool,
    pub directions: Vec<DirectionReport<T>>,
    pub all_directions_hyperbolic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport<T> {
    pub n: Vec<T>,
    pub verdict: Verdict,
    pub max_imag: T,
    pub eigvec_condition: T,
}

impl<T: Real> AbsSystemReport<T> {
    pub fn passed(&self) -> bool {
        self.d_invertible && self.all_directions_hyperbolic
    }
}

/// Checks that `D` is invertible and that `sum_k n_k M_k` is real
/// diagonalizable along every coordinate axis and along `n_directions`
/// seeded random unit directions.
pub fn check_abs_system<T: Real>(
    sys: &QuasiLinearSystem<T>,
    n_directions: usize,
    seed: u64,
    opts: &AnalyzeOptions<T>,
) -> Result<AbsSystemReport<T>> {
    let d_condition = condition_number(&sys.d);
    let d_cap = T::one() / (T::lit(100.0) * T::eps());
    let d_invertible = d_condition.is_finite_val() && d_condition < d_cap;

    let dims = sys.spatial_dims();
    let mut dirs: Vec<Vec<T>> = (0..dims)
        .map(|k| (0..dims).map(|j| if j == k { T::one() } else { T::zero() }).collect())
        .collect();
    dirs.extend(random_unit_vectors(dims, n_directions, seed));

    let mut directions = Vec::with_capacity(dirs.len());
    for n in dirs {
        let r = analyze(&sys.combination(&n), opts)?;
        directions.push(DirectionReport {
            n,
            verdict: r.verdict,
            max_imag: r.max_imag,
            eigvec_condition: r.eigvec_condition,
        });
    }
    let all_directions_hyperbolic = directions.iter().all(|d| d.verdict == Verdict::Hyperbolic);
    Ok(AbsSystemReport {
        d_condition,
        d_invertible,
        directions,
        all_directions_hyperbolic,
    })
}

/// `count` seeded unit vectors in `dims` dimensions, uniform on the sphere.
pub fn random_unit_vectors<T: Real>(dims: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count && dims > 0 {
        let v: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 {
            out.push(v.iter().map(|x| T::lit(x / len)).collect());
        }
    }
    out
}

/// True when every matrix is symmetric to `tol` relative to its largest entry.
pub fn symmetry_criterion<T: Real>(mk_tilde: &[DMatrix<T>], tol: T) -> bool {
    mk_tilde.iter().all(|m| {
        if m.nrows() != m.ncols() {
            return false;
        }
        let s = max_abs(m);
        let s = if s > T::one() { s } else { T::one() };
        max_abs(&(m - m.transpose())) <= tol * s
    })
}

/// Which 1D coefficient matrix a scan evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanTarget {
    Grad,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult<T> {
    pub order: usize,
    pub target: ScanTarget,
    pub g_m1: Vec<T>,
    pub g_m: Vec<T>,
    /// `hyperbolic[i][j]` belongs to `(g_m1[i], g_m[j])`.
    pub hyperbolic: Vec<Vec<bool>>,
    pub max_imag: Vec<Vec<T>>,
}

impl<T: Real> ScanResult<T> {
    pub fn count_hyperbolic(&self) -> usize {
        self.hyperbolic.iter().flatten().filter(|&&h| h).count()
    }

    pub fn len(&self) -> usize {
        self.g_m1.len() * self.g_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid cells of the 4-connected hyperbolic component containing `(i, j)`.
    pub fn component(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let (ni, nj) = (self.g_m1.len(), self.g_m.len());
        if i >= ni || j >= nj || !self.hyperbolic[i][j] {
            return Vec::new();
        }
        let mut seen = vec![vec![false; nj]; ni];
        let mut stack = vec![(i, j)];
        let mut out = Vec::new();
        seen[i][j] = true;
        while let Some((a, b)) = stack.pop() {
            out.push((a, b));
            let mut nb = Vec::with_capacity(4);
            if a > 0 {
                nb.push((a - 1, b));
            }
            if a + 1 < ni {
                nb.push((a + 1, b));
            }
            if b > 0 {
                nb.push((a, b - 1));
            }
            if b + 1 < nj {
                nb.push((a, b + 1));
            }
            for (x, y) in nb {
                if !seen[x][y] && self.hyperbolic[x][y] {
                    seen[x][y] = true;
                    stack.push((x, y));
                }
            }
        }
        out
    }
}

/// State at `rho = theta = 1`, `u = 0` with normalized `f_{M-1} = g_m1`,
/// `f_M = g_m` and all other `f_alpha = 0`. For `M = 3`, `f_{M-1} = f_2` is
/// structurally zero and `g_m1` is ignored.
pub fn scan_state<T: Real>(order: usize, g_m1: T, g_m: T) -> Result<MomentState1D<T>> {
    if order < 3 {
        return Err(Error::InvalidArgument(format!("order must be at least 3, got {order}")));
    }
    let mut f = vec![T::zero(); order - 2];
    f[order - 3] = g_m;
    if order >= 4 {
        f[order - 4] = g_m1;
    }
    MomentState1D::new(order, T::one(), T::zero(), T::one(), f)
}

/// Evaluates the verdict of Grad's or the regularized matrix over a grid of
/// normalized `(f_{M-1}, f_M)`. Grid points are evaluated in parallel.
pub fn scan_grad_region<T: Real>(
    order: usize,
    g_m1: &[T],
    g_m: &[T],
    target: ScanTarget,
    opts: &AnalyzeOptions<T>,
) -> Result<ScanResult<T>> {
    if g_m1.iter().chain(g_m).any(|x| !x.is_finite_val()) {
        return Err(Error::InvalidArgument("scan grid has non-finite values".into()));
    }
    let nj = g_m.len();
    let cells: Vec<(bool, T)> = (0..g_m1.len() * nj)
        .into_par_iter()
        .map(|idx| {
            let s = scan_state(order, g_m1[idx / nj], g_m[idx % nj])?;
            let a = assemble_grad_a(&s)?;
            let a = match target {
                ScanTarget::Grad => a,
                ScanTarget::Regularized => regularize(&a, &s)?,
            };
            let r = analyze(&a, opts)?;
            Ok((r.is_hyperbolic(), r.max_imag))
        })
        .collect::<Result<_>>()?;
    let hyperbolic = cells.chunks(nj.max(1)).map(|c| c.iter().map(|x| x.0).collect()).collect();
    let max_imag = cells.chunks(nj.max(1)).map(|c| c.iter().map(|x| x.1).collect()).collect();
    Ok(ScanResult {
        order,
        target,
        g_m1: g_m1.to_vec(),
        g_m: g_m.to_vec(),
        hyperbolic,
        max_imag,
    })
}

/// `n` equally spaced points on `[lo, hi]`, endpoints included.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_exact(n - 1);
            (0..n).map(|i| lo + step * T::from_usize_exact(i)).collect()
        }
    }
}
