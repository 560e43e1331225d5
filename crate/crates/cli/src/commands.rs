//! Subcommand implementations. Each builds its complete output in memory
//! and hands it to [`output::emit`] or [`output::emit_dir`] at the end.

use std::path::{Path, PathBuf};

use hme_core::hermite::hermite_roots;
use hme_core::hme1d::{assemble_d, assemble_grad_a, assemble_mmat, build_system_by_deduction, regularized_matrix};
use hme_core::hyperbolicity::{
    analyze, check_abs_system, linspace, random_unit_vectors, scan_grad_region, symmetry_criterion, AnalyzeOptions,
    HyperbolicityReport, ScanTarget,
};
use hme_core::moment13::{assemble_d13, assemble_m13, eigenspeeds_13, minimal_polynomial_13, random_state_13, system_13, Moment13State};
use hme_core::momentnd::{assemble_system_nd, orthonormal_convection, random_state_nd, unknown_labels, ConstraintCase, MomentStateND};
use hme_core::solver1d::{run, Boundary, Grid1D, InitialCondition, SimConfig, DEFAULT_CFL};
use hme_core::state1d::MomentState1D;
use hme_core::system::{max_abs, QuasiLinearSystem};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::output::{self, csv_header, csv_matrix, hash_of, json_document, matrix_rows, num, vector_rows};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Grad,
    Regularized,
    #[value(name = "d", alias = "D")]
    D,
    #[value(name = "m", alias = "M")]
    M,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EigTarget {
    Grad,
    Regularized,
    M13,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Relative tolerance of the eigen-analysis verdicts.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed for randomized checks; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (directory for `simulate`); stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    fn options(&self) -> CliResult<AnalyzeOptions<f64>> {
        let mut o = AnalyzeOptions::default();
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::invalid(format!("--tol must be positive, got {t}")));
            }
            o.tol = t;
        }
        Ok(o)
    }

    fn echo(&self, default_format: Format) -> Value {
        json!({
            "tol": self.options().map(|o| o.tol).unwrap_or(f64::NAN),
            "seed": self.seed,
            "format": self.format.unwrap_or(default_format),
        })
    }
}

/// A state file of any of the three families, recognized by its keys.
enum AnyState {
    OneD(MomentState1D<f64>),
    Thirteen(Moment13State<f64>),
    Nd(MomentStateND<f64>),
}

impl AnyState {
    fn layout(&self) -> String {
        match self {
            AnyState::OneD(s) => {
                let mut v = vec!["rho".to_string(), "u".into(), "theta".into()];
                v.extend((3..=s.order).map(|a| format!("f{a}")));
                v.join(" ")
            }
            AnyState::Thirteen(_) => "rho u1 u2 u3 theta11 theta22 theta33 theta12 theta13 theta23 q1 q2 q3".into(),
            AnyState::Nd(s) => unknown_labels(s.dim, s.order, s.case).join(" "),
        }
    }

    fn hash(&self) -> CliResult<String> {
        match self {
            AnyState::OneD(s) => hash_of(s),
            AnyState::Thirteen(s) => hash_of(s),
            AnyState::Nd(s) => hash_of(s),
        }
    }

    fn order_label(&self) -> String {
        match self {
            AnyState::OneD(s) => s.order.to_string(),
            AnyState::Thirteen(_) => "13-moment".into(),
            AnyState::Nd(s) => format!("{} (D = {}, {:?})", s.order, s.dim, s.case).to_lowercase(),
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

fn read_state(path: &Path) -> CliResult<(AnyState, Value)> {
    let v: Value = serde_json::from_str(&read_text(path)?)?;
    let obj = v.as_object().ok_or_else(|| CliError::invalid("state file must hold a JSON object"))?;
    let s = if obj.contains_key("indices") {
        let s: MomentStateND<f64> = serde_json::from_value(v.clone())?;
        s.check()?;
        AnyState::Nd(s)
    } else if obj.contains_key("q") {
        let s: Moment13State<f64> = serde_json::from_value(v.clone())?;
        s.check()?;
        AnyState::Thirteen(s)
    } else {
        let s: MomentState1D<f64> = serde_json::from_value(v.clone())?;
        s.check()?;
        AnyState::OneD(s)
    };
    Ok((s, v))
}

fn read_config<C: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> CliResult<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => Ok(serde_json::from_str(&read_text(p)?)?),
    }
}

fn system_matrices(name_m: &str, sys: &QuasiLinearSystem<f64>) -> CliResult<Vec<(String, DMatrix<f64>)>> {
    let mut out = vec![("D".to_string(), sys.d.clone())];
    let k = sys.mk.len();
    for (i, m) in sys.mk.iter().enumerate() {
        out.push((if k == 1 { name_m.to_string() } else { format!("{name_m}{}", i + 1) }, m.clone()));
    }
    out.push(("q".into(), vector_rows(&sys.q)));
    for (i, a) in sys.normal_form()?.into_iter().enumerate() {
        out.push((if k == 1 { "DinvMD".to_string() } else { format!("DinvMD{}", i + 1) }, a));
    }
    Ok(out)
}

pub struct AssembleArgs {
    pub state: PathBuf,
    pub which: Which,
    pub tau: f64,
    pub chi: f64,
    pub m_g: f64,
    pub common: Common,
}

pub fn assemble(a: &AssembleArgs) -> CliResult<()> {
    let (state, input) = read_state(&a.state)?;
    let unsupported = || CliError::invalid(format!("--which {:?} applies to 1D states only", a.which).to_lowercase());
    let mats: Vec<(String, DMatrix<f64>)> = match (&state, a.which) {
        (AnyState::OneD(s), Which::Grad) => vec![("A".into(), assemble_grad_a(s)?)],
        (AnyState::OneD(s), Which::Regularized) => vec![("Ahat".into(), regularized_matrix(s)?)],
        (AnyState::OneD(s), Which::D) => vec![("D".into(), assemble_d(s)?)],
        (AnyState::OneD(s), Which::M) => vec![("M".into(), assemble_mmat(s.u, s.theta, s.order)?)],
        (AnyState::OneD(s), Which::System) => system_matrices("M", &build_system_by_deduction(s, a.tau)?)?,
        (AnyState::Thirteen(s), Which::D) => vec![("D".into(), assemble_d13(s)?)],
        (AnyState::Thirteen(s), Which::M) => (1..=3).map(|k| Ok((format!("M{k}"), assemble_m13(s, k)?))).collect::<CliResult<_>>()?,
        (AnyState::Thirteen(s), Which::System) => system_matrices("M", &system_13(s, a.chi, a.m_g)?)?,
        (AnyState::Nd(s), Which::D) => vec![("D".into(), assemble_system_nd(s, a.tau)?.d)],
        (AnyState::Nd(s), Which::M) => {
            let sys = assemble_system_nd(s, a.tau)?;
            sys.mk.into_iter().enumerate().map(|(k, m)| (format!("M{}", k + 1), m)).collect()
        }
        (AnyState::Nd(s), Which::System) => system_matrices("M", &assemble_system_nd(s, a.tau)?)?,
        _ => return Err(unsupported()),
    };
    let format = a.common.format.unwrap_or(Format::Csv);
    let config = json!({
        "which": a.which,
        "tau": a.tau,
        "chi": a.chi,
        "m_g": a.m_g,
        "flags": a.common.echo(Format::Csv),
        "state": input,
    });
    let hash = state.hash()?;
    let layout = state.layout();
    let text = match format {
        Format::Csv => {
            let mut s = csv_header(
                "assemble",
                &config,
                &[("M", state.order_label()), ("state_hash", hash), ("layout", format!("rows and columns in order: {layout}"))],
            )?;
            for (name, m) in &mats {
                s.push_str(&csv_matrix(name, m));
            }
            s
        }
        Format::Json => {
            let body: Vec<Value> = mats.iter().map(|(n, m)| json!({"name": n, "rows": matrix_rows(m)})).collect();
            json_document(
                "assemble",
                &config,
                json!({"M": state.order_label(), "state_hash": hash, "layout": layout, "matrices": body}),
            )?
        }
    };
    output::emit(a.common.out.as_deref(), &text)
}

pub struct EigArgs {
    pub state: PathBuf,
    pub target: EigTarget,
    pub direction: Option<Vec<f64>>,
    pub common: Common,
}

fn expand_speeds(s: &[(f64, usize)]) -> Vec<f64> {
    s.iter().flat_map(|&(v, m)| std::iter::repeat_n(v, m)).collect()
}

pub fn eig(a: &EigArgs) -> CliResult<()> {
    let opts = a.common.options()?;
    let (state, input) = read_state(&a.state)?;
    let (matrix, predicted): (DMatrix<f64>, Option<Vec<f64>>) = match (&state, a.target) {
        (AnyState::OneD(s), t @ (EigTarget::Grad | EigTarget::Regularized)) => {
            let m = if t == EigTarget::Grad { assemble_grad_a(s)? } else { regularized_matrix(s)? };
            let roots: Vec<f64> = hermite_roots(s.order + 1)?;
            (m, Some(roots.iter().map(|c| s.u + c * s.theta.sqrt()).collect()))
        }
        (AnyState::Thirteen(s), EigTarget::M13) => {
            let n = a.direction.clone().unwrap_or_else(|| vec![1.0, 0.0, 0.0]);
            if n.len() != 3 || !n.iter().all(|x| x.is_finite()) {
                return Err(CliError::invalid("--direction needs three finite components"));
            }
            let len = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                return Err(CliError::invalid("--direction must be nonzero"));
            }
            let mut m = DMatrix::zeros(13, 13);
            for (k, c) in n.iter().enumerate() {
                m += assemble_m13(s, k + 1)? * (c / len);
            }
            let axis = (0..3).find(|&k| n.iter().enumerate().all(|(j, &x)| if j == k { x > 0.0 } else { x == 0.0 }));
            let predicted = match axis {
                Some(k) => Some(expand_speeds(&eigenspeeds_13(s, k + 1)?)),
                None => None,
            };
            (m, predicted)
        }
        _ => return Err(CliError::invalid("--target must be grad or regularized for 1D states and m13 for 13-moment states")),
    };
    let report: HyperbolicityReport<f64> = analyze(&matrix, &opts)?;
    let format = a.common.format.unwrap_or(Format::Json);
    let config = json!({
        "target": a.target,
        "direction": a.direction,
        "flags": a.common.echo(Format::Json),
        "state": input,
    });
    let hash = state.hash()?;
    let text = match format {
        Format::Json => json_document(
            "eig",
            &config,
            json!({"state_hash": hash, "report": report, "predicted_speeds": predicted}),
        )?,
        Format::Csv => {
            let mut s = csv_header(
                "eig",
                &config,
                &[
                    ("state_hash", hash),
                    ("verdict", serde_json::to_string(&report.verdict)?),
                    ("max_imag", num(report.max_imag)),
                    ("eigvec_condition", num(report.eigvec_condition)),
                ],
            )?;
            s.push_str("re,im,predicted\n");
            for (i, e) in report.eigenvalues.iter().enumerate() {
                let p = predicted.as_ref().and_then(|p| p.get(i)).map(|&x| num(x)).unwrap_or_default();
                s.push_str(&format!("{},{},{}\n", num(e.re), num(e.im), p));
            }
            s
        }
    };
    output::emit(a.common.out.as_deref(), &text)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for Axis {
    fn default() -> Self {
        Self { lo: -1.0, hi: 1.0, n: 21 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(rename = "M")]
    pub order: usize,
    pub target: ScanTarget,
    pub g_m1: Axis,
    pub g_m: Axis,
    pub seed: Option<u64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            order: 3,
            target: ScanTarget::Grad,
            g_m1: Axis::default(),
            g_m: Axis::default(),
            seed: None,
        }
    }
}

pub struct ScanArgs {
    pub config: Option<PathBuf>,
    pub order: Option<usize>,
    pub target: Option<ScanTarget>,
    pub common: Common,
}

pub fn scan(a: &ScanArgs) -> CliResult<()> {
    let opts = a.common.options()?;
    let mut cfg: ScanConfig = read_config(a.config.as_deref())?;
    if let Some(m) = a.order {
        cfg.order = m;
    }
    if let Some(t) = a.target {
        cfg.target = t;
    }
    for ax in [&cfg.g_m1, &cfg.g_m] {
        if ax.n == 0 || !(ax.lo.is_finite() && ax.hi.is_finite()) || ax.lo > ax.hi {
            return Err(CliError::invalid("scan axes need finite lo <= hi and n >= 1"));
        }
    }
    // f_{M-1} = f_2 vanishes structurally at M = 3
    let g_m1 = if cfg.order == 3 { vec![0.0] } else { linspace(cfg.g_m1.lo, cfg.g_m1.hi, cfg.g_m1.n) };
    let g_m = linspace(cfg.g_m.lo, cfg.g_m.hi, cfg.g_m.n);
    let r = scan_grad_region(cfg.order, &g_m1, &g_m, cfg.target, &opts)?;
    let format = a.common.format.unwrap_or(Format::Csv);
    let config = json!({"scan": cfg, "flags": a.common.echo(Format::Csv)});
    let total = r.len();
    let hyperbolic = r.count_hyperbolic();
    let text = match format {
        Format::Csv => {
            let mut s = csv_header(
                "scan",
                &config,
                &[("hyperbolic_points", format!("{hyperbolic} of {total}"))],
            )?;
            s.push_str("gM1,gM,hyperbolic,max_imag\n");
            for (i, x) in r.g_m1.iter().enumerate() {
                for (j, y) in r.g_m.iter().enumerate() {
                    s.push_str(&format!("{},{},{},{}\n", num(*x), num(*y), u8::from(r.hyperbolic[i][j]), num(r.max_imag[i][j])));
                }
            }
            s
        }
        Format::Json => json_document("scan", &config, json!({"hyperbolic_points": hyperbolic, "total_points": total, "result": r}))?,
    };
    output::emit(a.common.out.as_deref(), &text)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Check13Config {
    /// States for the minimal-polynomial and eigenvalue checks.
    pub states: usize,
    /// States for the directional check.
    pub direction_states: usize,
    /// Random unit directions per state.
    pub directions: usize,
    pub seed: u64,
}

impl Default for Check13Config {
    fn default() -> Self {
        Self {
            states: 100,
            direction_states: 20,
            directions: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check13Report {
    pub states: usize,
    /// `max ||p(M_1)||_max / ||M_1||_max^3`.
    pub max_poly_residual: f64,
    pub max_speed_error: f64,
    pub directions_checked: usize,
    pub non_hyperbolic_directions: usize,
    pub poly_passed: bool,
    pub speeds_passed: bool,
    pub directions_passed: bool,
    pub passed: bool,
}

pub const POLY_TOL: f64 = 1e-10;
pub const SPEED_TOL: f64 = 1e-9;

pub fn run_check13(cfg: &Check13Config, opts: &AnalyzeOptions<f64>) -> CliResult<Check13Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_res = 0.0f64;
    let mut max_err = 0.0f64;
    for _ in 0..cfg.states {
        let s: Moment13State<f64> = random_state_13(&mut rng);
        let m1 = assemble_m13(&s, 1)?;
        let p = minimal_polynomial_13(&m1, s.u[0], s.theta_mean());
        max_res = max_res.max(max_abs(&p) / max_abs(&m1).powi(3));
        let got = analyze(&m1, opts)?.real_parts();
        let want = expand_speeds(&eigenspeeds_13(&s, 1)?);
        for (g, w) in got.iter().zip(&want) {
            max_err = max_err.max((g - w).abs());
        }
        if got.len() != want.len() {
            max_err = f64::INFINITY;
        }
    }
    let mut checked = 0;
    let mut bad = 0;
    for i in 0..cfg.direction_states {
        let s: Moment13State<f64> = random_state_13(&mut rng);
        let mk: Vec<DMatrix<f64>> = (1..=3).map(|k| assemble_m13(&s, k)).collect::<Result<_, _>>()?;
        for n in random_unit_vectors::<f64>(3, cfg.directions, cfg.seed.wrapping_add(1 + i as u64)) {
            let m = &mk[0] * n[0] + &mk[1] * n[1] + &mk[2] * n[2];
            checked += 1;
            if !analyze(&m, opts)?.is_hyperbolic() {
                bad += 1;
            }
        }
    }
    let poly_passed = max_res < POLY_TOL;
    let speeds_passed = max_err < SPEED_TOL;
    let directions_passed = bad == 0;
    Ok(Check13Report {
        states: cfg.states,
        max_poly_residual: max_res,
        max_speed_error: max_err,
        directions_checked: checked,
        non_hyperbolic_directions: bad,
        poly_passed,
        speeds_passed,
        directions_passed,
        passed: poly_passed && speeds_passed && directions_passed,
    })
}

pub struct CheckArgs {
    pub config: Option<PathBuf>,
    pub common: Common,
}

fn summary_csv(command: &str, config: &Value, fields: &Value) -> CliResult<String> {
    let mut s = csv_header(command, config, &[])?;
    s.push_str("key,value\n");
    if let Value::Object(m) = fields {
        for (k, v) in m {
            let val = match v {
                Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
                other => other.to_string(),
            };
            s.push_str(&format!("{k},{val}\n"));
        }
    }
    Ok(s)
}

pub fn check13(a: &CheckArgs) -> CliResult<()> {
    let opts = a.common.options()?;
    let mut cfg: Check13Config = read_config(a.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    let report = run_check13(&cfg, &opts)?;
    let config = json!({"check13": cfg, "flags": a.common.echo(Format::Json)});
    let body = serde_json::to_value(&report)?;
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => json_document("check13", &config, json!({"report": body}))?,
        Format::Csv => summary_csv("check13", &config, &body)?,
    };
    output::emit(a.common.out.as_deref(), &text)?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Numerical("13-moment property check failed".into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckNdConfig {
    pub dims: Vec<usize>,
    pub orders: Vec<usize>,
    pub cases: Vec<ConstraintCase>,
    /// Random states per configuration.
    pub states: usize,
    /// Random directions per state, in addition to the coordinate axes.
    pub directions: usize,
    pub seed: u64,
}

impl Default for CheckNdConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 3],
            orders: vec![3, 4, 5],
            cases: vec![ConstraintCase::Classic, ConstraintCase::Generalized],
            states: 20,
            directions: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckNdEntry {
    pub dim: usize,
    #[serde(rename = "M")]
    pub order: usize,
    pub case: ConstraintCase,
    pub states: usize,
    pub failures: usize,
    pub max_d_condition: f64,
    pub max_eigvec_condition: f64,
    pub symmetric: bool,
    pub passed: bool,
}

pub fn run_checknd(cfg: &CheckNdConfig, opts: &AnalyzeOptions<f64>) -> CliResult<Vec<CheckNdEntry>> {
    let mut out = Vec::new();
    for &case in &cfg.cases {
        for &dim in &cfg.dims {
            for &order in &cfg.orders {
                if dim == 0 || order < 3 {
                    return Err(CliError::invalid(format!("checknd needs D >= 1 and M >= 3, got D = {dim}, M = {order}")));
                }
                let tag = (dim as u64) << 32 | (order as u64) << 8 | u64::from(case == ConstraintCase::Generalized);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ tag);
                let mut e = CheckNdEntry {
                    dim,
                    order,
                    case,
                    states: cfg.states,
                    failures: 0,
                    max_d_condition: 0.0,
                    max_eigvec_condition: 0.0,
                    symmetric: true,
                    passed: true,
                };
                for i in 0..cfg.states {
                    let s: MomentStateND<f64> = random_state_nd(dim, order, case, &mut rng)?;
                    let sys = assemble_system_nd(&s, 1.0)?;
                    let r = check_abs_system(&sys, cfg.directions, cfg.seed.wrapping_add(i as u64), opts)?;
                    if !r.passed() {
                        e.failures += 1;
                    }
                    e.max_d_condition = e.max_d_condition.max(r.d_condition);
                    for d in &r.directions {
                        e.max_eigvec_condition = e.max_eigvec_condition.max(d.eigvec_condition);
                    }
                    e.symmetric &= symmetry_criterion(&orthonormal_convection(&s, &sys)?, 1e-10);
                }
                e.passed = e.failures == 0 && e.symmetric;
                out.push(e);
            }
        }
    }
    Ok(out)
}

pub fn checknd(a: &CheckArgs) -> CliResult<()> {
    let opts = a.common.options()?;
    let mut cfg: CheckNdConfig = read_config(a.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    let entries = run_checknd(&cfg, &opts)?;
    let passed = entries.iter().all(|e| e.passed);
    let config = json!({"checknd": cfg, "flags": a.common.echo(Format::Json)});
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => json_document("checknd", &config, json!({"passed": passed, "configurations": entries}))?,
        Format::Csv => {
            let mut s = csv_header("checknd", &config, &[("passed", passed.to_string())])?;
            s.push_str("D,M,case,states,failures,max_d_condition,max_eigvec_condition,symmetric,passed\n");
            for e in &entries {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    e.dim,
                    e.order,
                    serde_json::to_value(e.case)?.as_str().unwrap_or_default(),
                    e.states,
                    e.failures,
                    num(e.max_d_condition),
                    num(e.max_eigvec_condition),
                    e.symmetric,
                    e.passed
                ));
            }
            s
        }
    };
    output::emit(a.common.out.as_deref(), &text)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Numerical("hyperbolicity conditions failed for some configuration".into()))
    }
}

fn default_cfl() -> f64 {
    DEFAULT_CFL
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub tau: f64,
    pub t_end: f64,
    pub bc: Boundary,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    pub n_cells: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub initial: InitialCondition<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn snapshot_csv(config: &Value, step: usize, time: f64, grid: &Grid1D<f64>) -> CliResult<String> {
    let mut s = csv_header("simulate", config, &[("step", step.to_string()), ("time", num(time))])?;
    let mut cols = vec!["x".to_string(), "rho".into(), "u".into(), "theta".into()];
    cols.extend((3..=grid.order()).map(|a| format!("f{a}")));
    s.push_str(&cols.join(","));
    s.push('\n');
    for (x, c) in grid.centers().iter().zip(&grid.cells) {
        let mut row = vec![num(*x), num(c.rho), num(c.u), num(c.theta)];
        row.extend(c.f.iter().map(|&v| num(v)));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    Ok(s)
}

pub struct SimulateArgs {
    pub config: PathBuf,
    pub common: Common,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let out = a.common.out.as_deref().ok_or_else(|| CliError::invalid("simulate needs --out DIR"))?;
    let cfg: SimulateConfig = serde_json::from_str(&read_text(&a.config)?)?;
    let sim = SimConfig {
        order: cfg.order,
        cfl: cfg.cfl,
        tau: cfg.tau,
        t_end: cfg.t_end,
        bc: cfg.bc,
        output_stride: cfg.output_stride,
    };
    sim.validate()?;
    let grid = Grid1D::from_initial(cfg.order, cfg.n_cells, cfg.x_min, cfg.x_max, &cfg.initial)?;
    let traj = run(&sim, grid)?;
    let config = json!({"simulate": cfg, "flags": a.common.echo(Format::Csv)});
    let mut files = Vec::with_capacity(traj.snapshots.len() + 1);
    let mut index = Vec::with_capacity(traj.snapshots.len());
    for snap in &traj.snapshots {
        let name = format!("snapshot_{:06}.csv", snap.step);
        files.push((name.clone(), snapshot_csv(&config, snap.step, snap.time, &snap.grid)?));
        index.push(json!({"file": name, "step": snap.step, "time": snap.time}));
    }
    let conservation: Vec<Value> = traj
        .conservation
        .iter()
        .map(|[t, m, p, e]| json!({"time": t, "mass": m, "momentum": p, "energy": e}))
        .collect();
    let meta = json_document(
        "simulate",
        &config,
        json!({
            "steps": traj.dt_history.len(),
            "snapshots": index,
            "dt_history": traj.dt_history,
            "conservation": conservation,
        }),
    )?;
    files.push(("run.json".into(), meta));
    output::emit_dir(out, &files)
}
