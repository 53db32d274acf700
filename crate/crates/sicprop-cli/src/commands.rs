//! One function per subcommand. Each resolves its parameters (flag, then
//! config file, then default), runs the experiment and returns an
//! [`Outcome`] without touching the filesystem.

use std::f64::consts::PI;
use std::str::FromStr;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use sicprop::dual_oracle::{apply_oracle, overlap_closed_form, overlap_integral, DualAmplitudePair, OracleSpec};
use sicprop::green_calculus::{
    caustic_margin, compose_quadratic, propagate_packet, square_well_green, GaussianPacket, QuadraticGreenForm, SicInterval,
};
use sicprop::hilbert_core::{angle_distance, canonical_angle, mat_exp, unitarity_defect, StateVector, I};
use sicprop::oscillator_basis::{coherent_wavefunction, expand_state, harmonic_eigensystem, ExpansionState, PhysicalParams};
use sicprop::path_integral::{loglog_slope, power_law_exponent, trotter_green, LatticeConfig};
use sicprop::perturbation::{dyson_iterate_with, HamiltonianSplit};
use sicprop::spin_synthesis::{explicit_generator, linear_phase_propagator, quadratic_from_rotations, SpinRegister, SynthesisAngles};
use sicprop::subspace_transfer::{transfer_norm_diagnostics_with, Pipeline};
use sicprop::verify::{run_criterion, CRITERIA};
use sicprop::{LogicalSign, SicError, C64};

use crate::config::{parse_value, resolve, ConfigFile, RunConfig, UsageError};
use crate::output::{num, Outcome, Table};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameter values: exit 2.
    Usage(String),
    /// The experiment could not complete: exit 1.
    Failure(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<SicError> for CliError {
    fn from(e: SicError) -> Self {
        match e {
            SicError::Contract(_) | SicError::Range(_) | SicError::DimensionMismatch { .. } | SicError::Capacity { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Failure(e.to_string()),
        }
    }
}

type CmdResult = Result<Outcome, CliError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignArg(pub LogicalSign);

impl FromStr for SignArg {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s.trim() {
            "+1" | "1" | "+" | "plus" => Ok(Self(LogicalSign::Plus)),
            "-1" | "\u{2212}1" | "-" | "minus" => Ok(Self(LogicalSign::Minus)),
            other => Err(UsageError(format!("sign must be +1 or -1, got '{other}'"))),
        }
    }
}

/// `coherent:beta`, `fock:k` or `gaussian:x0,p0,w`.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Coherent(f64),
    Fock(usize),
    Gaussian { x0: f64, p0: f64, w: f64 },
}

impl FromStr for StateSpec {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| UsageError(format!("state '{s}' needs kind:params")))?;
        match kind {
            "coherent" => Ok(Self::Coherent(parse_value("state", rest)?)),
            "fock" => Ok(Self::Fock(parse_value("state", rest)?)),
            "gaussian" => {
                let v: Vec<f64> = rest.split(',').map(|p| parse_value("state", p.trim())).collect::<Result<_, _>>()?;
                match v[..] {
                    [x0, p0, w] => Ok(Self::Gaussian { x0, p0, w }),
                    _ => Err(UsageError("gaussian state needs x0,p0,w".into())),
                }
            }
            _ => Err(UsageError(format!("unknown state kind '{kind}'"))),
        }
    }
}

impl StateSpec {
    fn label(&self) -> String {
        match self {
            Self::Coherent(b) => format!("coherent:{b}"),
            Self::Fock(k) => format!("fock:{k}"),
            Self::Gaussian { x0, p0, w } => format!("gaussian:{x0},{p0},{w}"),
        }
    }

    fn expand(&self, params: PhysicalParams, levels: usize) -> Result<ExpansionState, CliError> {
        let basis = harmonic_eigensystem(params);
        Ok(match *self {
            Self::Coherent(beta) => expand_state(coherent_wavefunction(params, beta), &basis, levels)?,
            Self::Fock(k) => {
                if k >= levels {
                    return Err(CliError::Usage(format!("fock level {k} needs more than {levels} levels")));
                }
                let mut c = vec![C64::from(0.0); levels];
                c[k] = C64::from(1.0);
                ExpansionState::from_coeffs(basis, c)?
            }
            Self::Gaussian { x0, p0, w } => {
                let g = GaussianPacket::new(x0, p0, w, params.hbar)?;
                expand_state(|x| g.evaluate(x), &basis, levels)?
            }
        })
    }
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, UsageError> {
    let v: Vec<T> = raw.split(',').map(|p| parse_value(key, p.trim())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(UsageError(format!("'{key}' needs at least one value")));
    }
    Ok(v)
}

fn params_map(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn physical(mass: Option<f64>, omega: Option<f64>, hbar: Option<f64>, cfg: &ConfigFile) -> Result<PhysicalParams, CliError> {
    let m = resolve(mass, cfg, "mass", 1.0)?;
    let w = resolve(omega, cfg, "omega", 1.0)?;
    let h = resolve(hbar, cfg, "hbar", 1.0)?;
    Ok(PhysicalParams::new(m, w, h)?)
}

/// Looser than the library guard: `T = 3.14159265` has |sin| = 3.6e-9 and
/// is refused here.
fn check_caustic(interval: &SicInterval, p: &PhysicalParams, run: &RunConfig) -> Result<(), CliError> {
    let margin = caustic_margin(interval, p);
    if margin < run.tol("caustic") {
        let n = (p.omega * interval.effective() / PI).round() as i64;
        return Err(SicError::Caustic { n, margin }.into());
    }
    Ok(())
}

fn check_dim(dim: usize, run: &RunConfig) -> Result<(), CliError> {
    if dim > run.max_dim {
        return Err(CliError::Usage(format!("dimension {dim} exceeds max_dim {}", run.max_dim)));
    }
    Ok(())
}

// ---------------------------------------------------------------- oracle

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Number of qubits.
    #[arg(long)]
    pub n: Option<u32>,
    /// Solution index S marked in the physical copy.
    #[arg(long)]
    pub solution: Option<usize>,
    /// Candidate index x0 marked in the mathematical copy.
    #[arg(long)]
    pub candidate: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// `uniform` or `random` (drawn from the run seed).
    #[arg(long)]
    pub state: Option<String>,
}

pub const ORACLE_KEYS: &[&str] = &["n", "solution", "candidate", "theta", "state"];

pub fn oracle(a: &OracleArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let n = resolve(a.n, cfg, "n", 3)?;
    let solution = resolve(a.solution, cfg, "solution", 5)?;
    let candidate = resolve(a.candidate, cfg, "candidate", 2)?;
    let theta = resolve(a.theta, cfg, "theta", PI / 2.0)?;
    let state = resolve(a.state.clone(), cfg, "state", "uniform".to_string())?;
    let spec = OracleSpec::new(n, solution, candidate, theta)?;
    check_dim(spec.dim(), run)?;
    let psi = match state.as_str() {
        "uniform" => StateVector::uniform(spec.dim())?,
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            StateVector::normalize((0..spec.dim()).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())?
        }
        other => return Err(CliError::Usage(format!("state must be uniform or random, got '{other}'"))),
    };
    let overlap = overlap_integral(&apply_oracle(&DualAmplitudePair::shared(psi.clone())?, &spec)?);
    let closed = overlap_closed_form(&psi, &spec)?;
    let err = (overlap - closed).norm();
    Ok(Outcome {
        command: "oracle",
        params: params_map(&[("n", json!(n)), ("S", json!(solution)), ("x0", json!(candidate)), ("theta", json!(theta)), ("state", json!(state))]),
        result: json!({
            "theta": theta, "n": n, "x0": candidate, "S": solution,
            "overlap_re": overlap.re, "overlap_im": overlap.im,
            "closed_form_re": closed.re, "closed_form_im": closed.im,
            "abs_error": err,
        }),
        passed: err <= run.tol("oracle"),
        table: None,
    })
}

// ---------------------------------------------------------------- synthesize

#[derive(Debug, Clone, Args)]
pub struct SynthesizeArgs {
    /// Register size in spins.
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
}

pub const SYNTHESIZE_KEYS: &[&str] = &["d", "alpha", "beta", "sign"];
const SYNTH_BRUTE_LIMIT: u32 = 10;

pub fn synthesize(a: &SynthesizeArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let d = resolve(a.d, cfg, "d", 4)?;
    let alpha = resolve(a.alpha, cfg, "alpha", 0.3)?;
    let beta = resolve(a.beta, cfg, "beta", 0.05)?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    if d > SYNTH_BRUTE_LIMIT {
        return Err(CliError::Usage(format!("d = {d} exceeds the dense-check limit {SYNTH_BRUTE_LIMIT}")));
    }
    let reg = SpinRegister::new(d)?;
    check_dim(reg.dim(), run)?;
    let built = linear_phase_propagator(reg, alpha, sign).compose(&quadratic_from_rotations(reg, beta, sign)?)?;
    let lin = SynthesisAngles::linear(reg, alpha);
    let quad = SynthesisAngles::quadratic(reg, beta);
    let angles = SynthesisAngles {
        alpha,
        beta,
        theta_list: lin.theta_list.iter().zip(&quad.theta_list).map(|(x, y)| x + y).collect(),
        theta_pairs: quad.theta_pairs.clone(),
    };
    let brute = mat_exp(&explicit_generator(reg, &angles)?, -I * sign.value())?;
    let mut table = Table::new(&["k", "phase_built", "phase_oracle", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for k in 0..reg.dim() {
        let b = canonical_angle(built.total_phase(k));
        let o = brute.get(k, k).arg();
        let diff = angle_distance(b, o);
        worst = worst.max(diff);
        table.push(vec![k.to_string(), num(b), num(o), num(diff)]);
    }
    let defect = unitarity_defect(&built.to_dense());
    Ok(Outcome {
        command: "synthesize",
        params: params_map(&[("d", json!(d)), ("alpha", json!(alpha)), ("beta", json!(beta)), ("sign", json!(sign.to_string()))]),
        result: json!({
            "d": d, "alpha": alpha, "beta": beta, "sign": sign.to_string(),
            "max_phase_error": worst,
            "unitarity_defect": defect,
            "rotation_count": lin.rotation_count() + quad.rotation_count(),
        }),
        passed: worst <= run.tol("synthesis") && defect <= run.tol("synthesis"),
        table: Some(table),
    })
}

// ---------------------------------------------------------------- transfer

#[derive(Debug, Clone, Args)]
pub struct TransferArgs {
    /// Register spins; the register holds 2^ds levels.
    #[arg(long)]
    pub ds: Option<u32>,
    /// 3 or 5 steps.
    #[arg(long)]
    pub pipeline: Option<u8>,
    /// coherent:beta | fock:k | gaussian:x0,p0,w
    #[arg(long, allow_hyphen_values = true)]
    pub state: Option<StateSpec>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
    /// Stored expansion levels of the exact state.
    #[arg(long)]
    pub levels: Option<usize>,
}

pub const TRANSFER_KEYS: &[&str] = &["ds", "pipeline", "state", "alpha", "sign", "levels"];

pub fn transfer(a: &TransferArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let ds = resolve(a.ds, cfg, "ds", 4)?;
    let pipeline = match resolve(a.pipeline, cfg, "pipeline", 3)? {
        3 => Pipeline::ThreeStep,
        5 => Pipeline::FiveStep,
        p => return Err(CliError::Usage(format!("pipeline must be 3 or 5, got {p}"))),
    };
    let state = resolve(a.state.clone(), cfg, "state", StateSpec::Coherent(1.0))?;
    let alpha = resolve(a.alpha, cfg, "alpha", 0.3)?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    let levels = resolve(a.levels, cfg, "levels", 48)?;
    let d1 = levels.next_power_of_two();
    let total = match pipeline {
        Pipeline::ThreeStep => d1 * levels,
        Pipeline::FiveStep => d1 * levels * levels,
    };
    check_dim(total, run)?;
    let expanded = state.expand(PhysicalParams::default(), levels)?;
    let r = transfer_norm_diagnostics_with(&expanded, ds, pipeline, alpha, sign, run.exec())?;
    let mut table = Table::new(&["step", "norm", "fidelity"]);
    for (i, (n, f)) in r.norms.iter().zip(&r.fidelities).enumerate() {
        table.push(vec![(i + 1).to_string(), num(*n), num(*f)]);
    }
    let steps = if pipeline == Pipeline::ThreeStep { 3 } else { 5 };
    Ok(Outcome {
        command: "transfer",
        params: params_map(&[
            ("ds", json!(ds)),
            ("pipeline", json!(steps)),
            ("state", json!(state.label())),
            ("alpha", json!(alpha)),
            ("sign", json!(sign.to_string())),
            ("levels", json!(levels)),
        ]),
        result: json!({
            "ds": ds,
            "norms": r.norms,
            "bound": r.bound,
            "max_norm": r.max_norm,
            "passed": r.passed,
            "nres": r.nres,
            "rotations_per_transfer": r.rotations_per_transfer,
        }),
        passed: r.passed,
        table: Some(table),
    })
}

// ---------------------------------------------------------------- expand

#[derive(Debug, Clone, Args)]
pub struct ExpandArgs {
    /// coherent:beta | fock:k | gaussian:x0,p0,w
    #[arg(long, allow_hyphen_values = true)]
    pub state: Option<StateSpec>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
}

pub const EXPAND_KEYS: &[&str] = &["state", "levels", "mass", "omega", "hbar"];

pub fn expand(a: &ExpandArgs, cfg: &ConfigFile, _run: &RunConfig) -> CmdResult {
    let state = resolve(a.state.clone(), cfg, "state", StateSpec::Coherent(1.0))?;
    let levels = resolve(a.levels, cfg, "levels", 32)?;
    let p = physical(a.mass, a.omega, a.hbar, cfg)?;
    let e = state.expand(p, levels)?;
    let mut table = Table::new(&["k", "re_b", "im_b", "nres"]);
    for (k, b) in e.coeffs().iter().enumerate() {
        table.push(vec![k.to_string(), num(b.re), num(b.im), num(e.residual_norm(k)?)]);
    }
    let norm_sq = e.norm_sq();
    Ok(Outcome {
        command: "expand",
        params: params_map(&[("state", json!(state.label())), ("levels", json!(levels)), ("mass", json!(p.mass)), ("omega", json!(p.omega)), ("hbar", json!(p.hbar))]),
        result: json!({ "levels": levels, "norm_sq": norm_sq, "missing_weight": (1.0 - norm_sq).max(0.0) }),
        passed: norm_sq <= 1.0 + 1e-8,
        table: Some(table),
    })
}

// ---------------------------------------------------------------- green

#[derive(Debug, Clone, Args)]
pub struct GreenArgs {
    /// free | harmonic | driven | well
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
    /// Duration T_m.
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    /// Drive strength for the driven kernel.
    #[arg(long, allow_hyphen_values = true)]
    pub force: Option<f64>,
    /// Well width; the well spans [0, width].
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub images: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

pub const GREEN_KEYS: &[&str] = &["kernel", "sign", "T", "mass", "omega", "hbar", "force", "width", "images", "x_min", "x_max", "points"];

pub fn green(a: &GreenArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let kernel = resolve(a.kernel.clone(), cfg, "kernel", "harmonic".to_string())?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    let t = resolve(a.t, cfg, "T", 1.0)?;
    let p = physical(a.mass, a.omega, a.hbar, cfg)?;
    let force = resolve(a.force, cfg, "force", 0.5)?;
    let width = resolve(a.width, cfg, "width", 4.0)?;
    let images = resolve(a.images, cfg, "images", 50)?;
    let points = resolve(a.points, cfg, "points", 9)?;
    let (lo, hi) = if kernel == "well" { (0.0, width) } else { (-2.0, 2.0) };
    let x_min = resolve(a.x_min, cfg, "x_min", lo)?;
    let x_max = resolve(a.x_max, cfg, "x_max", hi)?;
    if points < 2 || !(x_max > x_min) {
        return Err(CliError::Usage("grid needs at least two points and x_max > x_min".into()));
    }
    let interval = SicInterval::new(t, sign)?;
    if matches!(kernel.as_str(), "harmonic" | "driven") {
        check_caustic(&interval, &p, run)?;
    }
    let form = match kernel.as_str() {
        "free" | "well" => QuadraticGreenForm::free(&interval, &p)?,
        "harmonic" => QuadraticGreenForm::harmonic(&interval, &p)?,
        "driven" => QuadraticGreenForm::driven(&interval, &p, force)?,
        other => return Err(CliError::Usage(format!("kernel must be free, harmonic, driven or well, got '{other}'"))),
    };
    let reversed = form.reversed();
    let xs: Vec<f64> = (0..points).map(|i| x_min + (x_max - x_min) * i as f64 / (points - 1) as f64).collect();
    let mut table = Table::new(&["x_a", "x_b", "re_g", "im_g"]);
    let mut max_abs: f64 = 0.0;
    let mut reversal: f64 = 0.0;
    for &xa in &xs {
        for &xb in &xs {
            let g = if kernel == "well" {
                square_well_green(xa, xb, &interval, &p, width, images)?
            } else {
                let g = form.evaluate(xa, xb)?;
                reversal = reversal.max((reversed.evaluate(xb, xa)? - g.conj()).norm());
                g
            };
            max_abs = max_abs.max(g.norm());
            table.push(vec![num(xa), num(xb), num(g.re), num(g.im)]);
        }
    }
    let margin = match kernel.as_str() {
        "harmonic" | "driven" => json!(caustic_margin(&interval, &p)),
        _ => Value::Null,
    };
    let mut params = vec![("kernel", json!(kernel)), ("sign", json!(sign.to_string())), ("T", json!(t)), ("mass", json!(p.mass)), ("omega", json!(p.omega)), ("hbar", json!(p.hbar)), ("points", json!(points))];
    match kernel.as_str() {
        "driven" => params.push(("force", json!(force))),
        "well" => {
            params.push(("width", json!(width)));
            params.push(("images", json!(images)));
        }
        _ => {}
    }
    let params = params_map(&params);
    let reversal_ok = reversal <= run.tol("green") * max_abs.max(1.0);
    Ok(Outcome {
        command: "green",
        result: json!({ "kernel": kernel, "params": params.clone(), "caustic_margin": margin, "reversal_defect": reversal, "max_abs": max_abs }),
        params,
        passed: reversal_ok,
        table: Some(table),
    })
}

// ---------------------------------------------------------------- compose

#[derive(Debug, Clone, Args)]
pub struct ComposeArgs {
    /// First kernel applied: free:T | harmonic:T | driven:T:f
    #[arg(long, allow_hyphen_values = true)]
    pub first: Option<String>,
    /// Second kernel applied.
    #[arg(long, allow_hyphen_values = true)]
    pub second: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
}

pub const COMPOSE_KEYS: &[&str] = &["first", "second", "sign", "mass", "omega", "hbar"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum KernelSpec {
    Free(f64),
    Harmonic(f64),
    Driven(f64, f64),
}

impl KernelSpec {
    fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64, CliError> {
            let raw = parts.get(i).ok_or_else(|| CliError::Usage(format!("kernel spec '{s}' is incomplete")))?;
            Ok(parse_value("kernel spec", raw)?)
        };
        match (parts[0], parts.len()) {
            ("free", 2) => Ok(Self::Free(num(1)?)),
            ("harmonic", 2) => Ok(Self::Harmonic(num(1)?)),
            ("driven", 3) => Ok(Self::Driven(num(1)?, num(2)?)),
            _ => Err(CliError::Usage(format!("kernel spec '{s}' must be free:T, harmonic:T or driven:T:f"))),
        }
    }

    fn time(self) -> f64 {
        match self {
            Self::Free(t) | Self::Harmonic(t) | Self::Driven(t, _) => t,
        }
    }

    fn with_time(self, t: f64) -> Self {
        match self {
            Self::Free(_) => Self::Free(t),
            Self::Harmonic(_) => Self::Harmonic(t),
            Self::Driven(_, f) => Self::Driven(t, f),
        }
    }

    fn form(self, sign: LogicalSign, p: &PhysicalParams, run: &RunConfig) -> Result<QuadraticGreenForm, CliError> {
        let iv = SicInterval::new(self.time(), sign)?;
        if !matches!(self, Self::Free(_)) {
            check_caustic(&iv, p, run)?;
        }
        Ok(match self {
            Self::Free(_) => QuadraticGreenForm::free(&iv, p)?,
            Self::Harmonic(_) => QuadraticGreenForm::harmonic(&iv, p)?,
            Self::Driven(_, f) => QuadraticGreenForm::driven(&iv, p, f)?,
        })
    }

    /// Same generator on both legs, so the direct form over the summed time exists.
    fn same_generator(self, other: Self) -> bool {
        match (self, other) {
            (Self::Free(_), Self::Free(_)) | (Self::Harmonic(_), Self::Harmonic(_)) => true,
            (Self::Driven(_, f), Self::Driven(_, g)) => f == g,
            _ => false,
        }
    }
}

fn form_json(g: &QuadraticGreenForm) -> Value {
    json!({
        "s_aa": g.s_aa, "s_ab": g.s_ab, "s_bb": g.s_bb,
        "q_a": g.q_a, "q_b": g.q_b, "theta0": g.theta0,
        "prefactor_re": g.prefactor.re, "prefactor_im": g.prefactor.im,
    })
}

pub fn compose(a: &ComposeArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let first_raw = resolve(a.first.clone(), cfg, "first", "harmonic:0.3".to_string())?;
    let second_raw = resolve(a.second.clone(), cfg, "second", "harmonic:0.4".to_string())?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    let p = physical(a.mass, a.omega, a.hbar, cfg)?;
    let (k1, k2) = (KernelSpec::parse(&first_raw)?, KernelSpec::parse(&second_raw)?);
    let (g1, g2) = (k1.form(sign, &p, run)?, k2.form(sign, &p, run)?);
    let composed = compose_quadratic(&g1, &g2)?;
    let (reference, deltas, max_delta) = if k1.same_generator(k2) {
        let direct = k1.with_time(k1.time() + k2.time()).form(sign, &p, run)?;
        let d = json!({
            "s_aa": composed.s_aa - direct.s_aa, "s_ab": composed.s_ab - direct.s_ab, "s_bb": composed.s_bb - direct.s_bb,
            "q_a": composed.q_a - direct.q_a, "q_b": composed.q_b - direct.q_b, "theta0": composed.theta0 - direct.theta0,
            "prefactor": (composed.prefactor - direct.prefactor).norm(),
        });
        let worst = composed.max_param_distance(&direct).max((composed.prefactor - direct.prefactor).norm());
        (form_json(&direct), d, json!(worst))
    } else {
        (Value::Null, Value::Null, Value::Null)
    };
    let passed = max_delta.as_f64().is_none_or(|d| d <= run.tol("compose"));
    Ok(Outcome {
        command: "compose",
        params: params_map(&[("first", json!(first_raw)), ("second", json!(second_raw)), ("sign", json!(sign.to_string())), ("mass", json!(p.mass)), ("omega", json!(p.omega)), ("hbar", json!(p.hbar))]),
        result: json!({ "composed": form_json(&composed), "reference": reference, "deltas": deltas, "max_delta": max_delta }),
        passed,
        table: None,
    })
}

// ---------------------------------------------------------------- pathint

#[derive(Debug, Clone, Args)]
pub struct PathintArgs {
    /// Comma-separated slice counts.
    #[arg(long = "N-list", alias = "n-list")]
    pub n_list: Option<String>,
    /// zero | harmonic | quartic
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Quartic coefficient in lambda x^4.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
}

pub const PATHINT_KEYS: &[&str] = &["N-list", "potential", "T", "lambda", "points", "x_min", "x_max", "sign"];

pub fn pathint(a: &PathintArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let ns: Vec<usize> = list("N-list", &resolve(a.n_list.clone(), cfg, "N-list", "8,16,32,64,128".to_string())?)?;
    let potential = resolve(a.potential.clone(), cfg, "potential", "harmonic".to_string())?;
    let t = resolve(a.t, cfg, "T", 0.5)?;
    let lambda = resolve(a.lambda, cfg, "lambda", 0.1)?;
    let points = resolve(a.points, cfg, "points", 128)?;
    let x_min = resolve(a.x_min, cfg, "x_min", -10.0)?;
    let x_max = resolve(a.x_max, cfg, "x_max", 10.0)?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    check_dim(points, run)?;
    let p = PhysicalParams::default();
    let interval = SicInterval::new(t, sign)?;
    let v: Box<dyn Fn(f64) -> f64> = match potential.as_str() {
        "zero" => Box::new(|_| 0.0),
        "harmonic" => Box::new(|x| 0.5 * x * x),
        "quartic" => Box::new(move |x| lambda * x.powi(4)),
        other => return Err(CliError::Usage(format!("potential must be zero, harmonic or quartic, got '{other}'"))),
    };
    let psi = GaussianPacket::new(1.0, 0.0, 0.5, p.hbar)?;
    let grid = LatticeConfig::new(1, x_min, x_max, points)?;
    let xs = grid.nodes();
    let samples: Vec<C64> = xs.iter().map(|&x| psi.evaluate(x)).collect();
    // reference: analytic packet where one exists, else a 4x finer lattice
    let reference: Vec<C64> = match potential.as_str() {
        "zero" => {
            let out = propagate_packet(&psi, &QuadraticGreenForm::free(&interval, &p)?)?;
            xs.iter().map(|&x| out.evaluate(x)).collect()
        }
        "harmonic" => {
            let out = propagate_packet(&psi, &QuadraticGreenForm::harmonic(&interval, &p)?)?;
            xs.iter().map(|&x| out.evaluate(x)).collect()
        }
        _ => {
            let fine = LatticeConfig::new(4 * ns.iter().max().copied().unwrap_or(1), x_min, x_max, points)?;
            trotter_green(&v, &interval, &p, fine)?.propagate(&samples, run.exec())?
        }
    };
    let mut table = Table::new(&["N", "packet_error", "unitarity_defect"]);
    let mut errs = Vec::with_capacity(ns.len());
    let mut worst_unitarity: f64 = 0.0;
    for &n in &ns {
        let cfg_n = LatticeConfig::new(n, x_min, x_max, points)?;
        let lat = trotter_green(&v, &interval, &p, cfg_n)?;
        let out = lat.propagate(&samples, run.exec())?;
        let err = (out.iter().zip(&reference).map(|(o, r)| (o - r).norm_sqr()).sum::<f64>() * grid.dx()).sqrt();
        worst_unitarity = worst_unitarity.max(lat.unitarity_defect());
        errs.push(err);
        table.push(vec![n.to_string(), num(err), num(lat.unitarity_defect())]);
    }
    let slope = if ns.len() >= 2 && potential != "zero" { Some(loglog_slope(&ns, &errs)?) } else { None };
    let passed = worst_unitarity <= 1e-6
        && match slope {
            Some(s) => (s - 1.0).abs() <= run.tol("pathint_slope"),
            None => errs.iter().all(|&e| e <= run.tol("pathint_free")),
        };
    Ok(Outcome {
        command: "pathint",
        params: params_map(&[
            ("N-list", json!(ns)),
            ("potential", json!(potential)),
            ("T", json!(t)),
            ("lambda", json!(lambda)),
            ("points", json!(points)),
            ("x_min", json!(x_min)),
            ("x_max", json!(x_max)),
            ("sign", json!(sign.to_string())),
        ]),
        result: json!({ "errors": errs, "slope": slope, "max_unitarity_defect": worst_unitarity }),
        passed,
        table: Some(table),
    })
}

// ---------------------------------------------------------------- perturb

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    /// Dyson order; 0 returns the unperturbed propagator.
    #[arg(long)]
    pub order: Option<usize>,
    /// Comma-separated perturbation strengths.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_list: Option<String>,
    #[arg(long)]
    pub fock_dim: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub quad_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<SignArg>,
}

pub const PERTURB_KEYS: &[&str] = &["order", "lambda-list", "fock-dim", "T", "quad-points", "sign"];

pub fn perturb(a: &PerturbArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let order = resolve(a.order, cfg, "order", 1)?;
    let lambdas: Vec<f64> = list("lambda-list", &resolve(a.lambda_list.clone(), cfg, "lambda-list", "0.1,0.05".to_string())?)?;
    let n = resolve(a.fock_dim, cfg, "fock-dim", 40)?;
    let t = resolve(a.t, cfg, "T", 0.5)?;
    let points = resolve(a.quad_points, cfg, "quad-points", 32)?;
    let sign = resolve(a.sign, cfg, "sign", SignArg(LogicalSign::Plus))?.0;
    check_dim(n, run)?;
    let p = PhysicalParams::default();
    let mut table = Table::new(&["lambda", "order", "frob_error", "unitarity_defect"]);
    let mut errs = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let split = HamiltonianSplit::new(sicprop::oscillator_basis::fock_hamiltonian(&p, n), sicprop::oscillator_basis::fock_position(&p, n), lambda, p.hbar)?;
        let exact = mat_exp(&split.full(), -I * sign.value() * t / p.hbar)?;
        let u = dyson_iterate_with(&split, sign, t, order, points, run.exec())?;
        let err = u.distance(&exact)?;
        errs.push(err);
        table.push(vec![num(lambda), order.to_string(), num(err), num(unitarity_defect(&u))]);
    }
    let fit = if lambdas.len() >= 2 && errs.iter().all(|&e| e > 0.0) {
        let abs: Vec<f64> = lambdas.iter().map(|l| l.abs()).collect();
        Some(power_law_exponent(&abs, &errs)?)
    } else {
        None
    };
    let expected = (order + 1) as f64;
    let passed = match fit {
        Some(k) => (k - expected).abs() <= run.tol("perturb_slope"),
        // a single strength gives nothing to fit
        None => true,
    };
    Ok(Outcome {
        command: "perturb",
        params: params_map(&[("order", json!(order)), ("lambda-list", json!(lambdas)), ("fock-dim", json!(n)), ("T", json!(t)), ("quad-points", json!(points)), ("sign", json!(sign.to_string()))]),
        result: json!({ "errors": errs, "fitted_exponent": fit, "expected_exponent": expected }),
        passed,
        table: Some(table),
    })
}

// ---------------------------------------------------------------- verify-all

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Comma-separated criterion ids; all by default.
    #[arg(long)]
    pub only: Option<String>,
    /// Exit 0 when the only failures are the documented known limits.
    #[arg(long)]
    pub allow_known_limits: bool,
}

pub const VERIFY_KEYS: &[&str] = &["only", "allow_known_limits"];

pub fn verify_all(a: &VerifyArgs, cfg: &ConfigFile, run: &RunConfig) -> CmdResult {
    let ids: Vec<u8> = match resolve(a.only.clone(), cfg, "only", String::new())? {
        s if s.is_empty() => (1..=CRITERIA as u8).collect(),
        s => list("only", &s)?,
    };
    let allow = a.allow_known_limits || resolve(None, cfg, "allow_known_limits", false)?;
    let mut table = Table::new(&["id", "name", "passed", "measured", "tolerance", "known_limit"]);
    let mut entries = Vec::with_capacity(ids.len());
    let (mut passed_count, mut blocking) = (0, 0);
    for id in &ids {
        let r = run_criterion(*id, run.seed, run.exec())?;
        if r.passed {
            passed_count += 1;
        } else if !(allow && r.known_limit()) {
            blocking += 1;
        }
        table.push(vec![r.id.to_string(), r.name.to_string(), r.passed.to_string(), num(r.measured), num(r.tolerance), r.known_limit().to_string()]);
        entries.push(json!({
            "id": r.id, "name": r.name, "passed": r.passed,
            "measured": r.measured, "tolerance": r.tolerance,
            "known_limit": r.known_limit(), "detail": r.detail,
        }));
    }
    Ok(Outcome {
        command: "verify-all",
        params: params_map(&[("only", json!(ids)), ("allow_known_limits", json!(allow))]),
        result: json!({ "criteria": entries, "passed_count": passed_count, "failed_count": ids.len() - passed_count }),
        passed: blocking == 0,
        table: Some(table),
    })
}
