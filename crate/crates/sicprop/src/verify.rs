//! Seeded property sweeps for the fourteen acceptance criteria.
//!
//! Every check compares a library construction against a brute-force
//! oracle (dense `mat_exp`, direct quadrature, exact Fock evolution) at the
//! stated tolerance. Criteria in [`KNOWN_LIMITS`] have been analysed as
//! unattainable in double precision; they still run and report honestly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual_oracle::{apply_oracle, oracle_propagator, overlap_closed_form, overlap_integral, DualAmplitudePair, OracleSpec, Target};
use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::green_calculus::{
    compose_quadratic, driven_green, free_green, harmonic_green, mehler_kernel, propagate_packet, quarter_period_conjugation,
    square_well_packet, GaussianPacket, QuadraticGreenForm, QuarterSwap, SicInterval,
};
use crate::hilbert_core::{cis, mat_exp, StateVector, C64, I};
use crate::oscillator_basis::{
    coherent_wavefunction, eigensum_evolution, expand_state, expand_state_on, fock_hamiltonian, fock_position, harmonic_eigensystem,
    square_well_eigensystem, ExpansionState, PhysicalParams,
};
use crate::path_integral::{
    loglog_slope, reversal_pair, reversal_symmetry_check, trotter_green, LatticeConfig, PiecewiseHamiltonian, ReversalMode, TimedepVariant,
};
use crate::perturbation::{dyson_iterate_with, HamiltonianSplit};
use crate::quadrature::Rule;
use crate::spin_synthesis::{
    explicit_generator, linear_phase_propagator, lomso_conjugation_reduce, lomso_rebuild, quadratic_phase_propagator, SpinRegister,
    SynthesisAngles,
};
use crate::subspace_transfer::{chained_transfer, conjugate_linear_spectrum, restricted_action, transfer_norm_diagnostics_with, Pipeline, TargetSpectrum};
use crate::LogicalSign;

pub const CRITERIA: usize = 14;

/// Criteria whose literal tolerance cannot be met; see the criterion detail.
pub const KNOWN_LIMITS: &[u8] = &[6, 13];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CriterionReport {
    pub fn known_limit(&self) -> bool {
        KNOWN_LIMITS.contains(&self.id)
    }
}

const NAMES: [&str; CRITERIA] = [
    "oracle overlap",
    "synthesis eigenphases",
    "multi-spin reduction",
    "transfer pipelines",
    "certified truncation bound",
    "mehler series",
    "green function identities",
    "composition calculus",
    "packet round trips",
    "path integral convergence",
    "time-dependent definitions",
    "perturbation scaling",
    "quarter-period conjugation",
    "square well images",
];

pub fn criterion_name(id: u8) -> Option<&'static str> {
    NAMES.get(usize::from(id).checked_sub(1)?).copied()
}

/// Runs one criterion; library errors become a failed report.
pub fn run_criterion(id: u8, seed: u64, exec: Exec) -> Result<CriterionReport> {
    let name = criterion_name(id).ok_or_else(|| SicError::Range(format!("criterion {id} outside 1..={CRITERIA}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(id) << 32));
    let outcome = match id {
        1 => oracle_overlap(&mut rng),
        2 => synthesis(&mut rng),
        3 => lomso(&mut rng),
        4 => transfer(&mut rng),
        5 => truncation_bound(&mut rng, exec),
        6 => mehler(exec),
        7 => green_identities(&mut rng),
        8 => composition(&mut rng),
        9 => round_trips(&mut rng),
        10 => path_integral(exec),
        11 => timedep(),
        12 => perturbation(exec),
        13 => quarter_period(),
        _ => square_well(exec),
    };
    Ok(match outcome {
        Ok(Check { passed, measured, tolerance, detail }) => CriterionReport { id, name, passed, measured, tolerance, detail },
        Err(e) => CriterionReport { id, name, passed: false, measured: f64::NAN, tolerance: f64::NAN, detail: format!("error: {e}") },
    })
}

pub fn run_all(seed: u64, exec: Exec) -> Vec<CriterionReport> {
    (1..=CRITERIA as u8).map(|id| run_criterion(id, seed, exec).expect("ids in range")).collect()
}

struct Check {
    passed: bool,
    measured: f64,
    tolerance: f64,
    detail: String,
}

impl Check {
    fn at_most(measured: f64, tolerance: f64, detail: String) -> Self {
        Self { passed: measured <= tolerance, measured, tolerance, detail }
    }
}

fn random_sign(rng: &mut ChaCha8Rng) -> LogicalSign {
    if rng.random_bool(0.5) {
        LogicalSign::Plus
    } else {
        LogicalSign::Minus
    }
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Result<StateVector> {
    let amps = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    StateVector::normalize(amps)
}

fn oracle_overlap(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8u32);
        let dim = 1usize << n;
        let solution = rng.random_range(0..dim);
        let candidate = (solution + rng.random_range(1..dim)) % dim;
        let spec = OracleSpec::new(n, solution, candidate, rng.random_range(-PI..PI))?;
        let psi = random_state(rng, dim)?;
        let via_pair = overlap_integral(&apply_oracle(&DualAmplitudePair::shared(psi.clone())?, &spec)?);
        let phys = oracle_propagator(&spec, Target::Solution).apply(&psi)?;
        let math = oracle_propagator(&spec, Target::Candidate).apply(&psi)?;
        let brute = phys.inner(&math)?;
        let closed = overlap_closed_form(&psi, &spec)?;
        worst = worst.max((via_pair - closed).norm()).max((brute - closed).norm());
    }
    let spec = OracleSpec::new(2, 1, 3, PI)?;
    let exact = overlap_integral(&apply_oracle(&DualAmplitudePair::shared(StateVector::uniform(4)?)?, &spec)?);
    worst = worst.max(exact.norm());
    Ok(Check::at_most(worst, 1e-12, format!("100 random specs, n <= 8; uniform N=4 at pi gives |overlap| = {:.1e}", exact.norm())))
}

fn synthesis(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut entry: f64 = 0.0;
    let mut second: f64 = 0.0;
    for d in 2..=6 {
        let reg = SpinRegister::new(d)?;
        for _ in 0..20 {
            let (alpha, beta, sign) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), random_sign(rng));
            let a = sign.value();
            let lin = linear_phase_propagator(reg, alpha, sign);
            let brute = mat_exp(&explicit_generator(reg, &SynthesisAngles::linear(reg, alpha))?, -I * a)?;
            entry = entry.max(lin.max_entry_error(&brute)?);
            let quad = quadratic_phase_propagator(reg, beta, sign);
            let brute = mat_exp(&explicit_generator(reg, &SynthesisAngles::quadratic(reg, beta))?, -I * a)?;
            entry = entry.max(quad.max_entry_error(&brute)?);
            for k in 1..quad.dim() - 1 {
                let diff = quad.phases[k + 1] - 2.0 * quad.phases[k] + quad.phases[k - 1];
                // rounding in phases of size beta k^2 sets the floor
                let scale = 1.0f64.max(quad.phases[k + 1].abs());
                second = second.max((diff + 2.0 * beta * a).abs() / scale);
            }
        }
    }
    let passed = entry <= 1e-10 && second <= 1e-12;
    Ok(Check {
        passed,
        measured: entry,
        tolerance: 1e-10,
        detail: format!("d = 2..6, 20 draws each; worst second-difference defect {second:.1e} relative to phase size (limit 1e-12)"),
    })
}

fn lomso(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in 2..=3u32 {
        let reg = SpinRegister::new(d)?;
        for l in 1..=2usize {
            if l + 1 > d as usize {
                continue;
            }
            for _ in 0..6 {
                let mut spins: Vec<u32> = (1..=d).collect();
                for i in (1..spins.len()).rev() {
                    spins.swap(i, rng.random_range(0..=i));
                }
                spins.truncate(l + 1);
                let theta = rng.random_range(-PI..PI);
                for sign in LogicalSign::both() {
                    let (target, v) = lomso_conjugation_reduce(reg, &spins, theta, sign)?;
                    let rebuilt = lomso_rebuild(reg, spins[l], theta, sign, &v)?;
                    worst = worst.max(target.distance(&rebuilt)?);
                    cases += 1;
                }
            }
        }
    }
    Ok(Check::at_most(worst, 1e-12, format!("{cases} reductions over d in {{2, 3}}, l in {{1, 2}}")))
}

fn transfer(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for ds in 2..=4u32 {
        let k0 = 1usize << ds;
        for _ in 0..8 {
            let target = TargetSpectrum::linear(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0));
            let sign = random_sign(rng);
            let d = k0 + 2;
            let (one, p1) = conjugate_linear_spectrum(ds, d, target, sign)?;
            let (two, p2) = chained_transfer(ds, d, d, target, sign)?;
            for (op, phase) in [(one, p1), (two, p2)] {
                let act = restricted_action(&op, d)?;
                for (k, z) in act.iter().enumerate().take(k0) {
                    worst = worst.max((z * phase.factor() - cis(target.target_phase(k, sign))).norm());
                }
            }
        }
    }
    Ok(Check::at_most(worst, 1e-10, "ds in {2, 3, 4}, 8 random linear spectra each, single and chained legs".into()))
}

fn truncation_bound(rng: &mut ChaCha8Rng, exec: Exec) -> Result<Check> {
    let p = PhysicalParams::default();
    let basis = harmonic_eigensystem(p);
    let levels = 48;
    let mut states: Vec<(String, ExpansionState)> = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        states.push((format!("coherent {beta}"), expand_state(coherent_wavefunction(p, beta), &basis, levels)?));
    }
    for _ in 0..2 {
        let g = GaussianPacket::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..0.9), 1.0)?;
        states.push((format!("gaussian {:.2}", g.center()), expand_state(|x| g.evaluate(x), &basis, levels)?));
    }
    let mut worst_ratio: f64 = 0.0;
    let mut all = true;
    let mut reference = String::new();
    for (label, state) in &states {
        for ds in 2..=4u32 {
            for pipeline in [Pipeline::ThreeStep, Pipeline::FiveStep] {
                let alpha = rng.random_range(-PI..PI);
                let r = transfer_norm_diagnostics_with(state, ds, pipeline, alpha, random_sign(rng), exec)?;
                all &= r.passed;
                if r.bound > 0.0 {
                    worst_ratio = worst_ratio.max(r.max_norm / r.bound);
                }
                if label == "coherent 1" && ds == 4 && pipeline == Pipeline::FiveStep {
                    reference = format!("; coherent beta=1, 2^ds=16: bound {:.6e}, max norm {:.3e}", r.bound, r.max_norm);
                }
            }
        }
    }
    Ok(Check {
        passed: all,
        measured: worst_ratio,
        tolerance: 1.0,
        detail: format!("worst max_norm / bound over {} states, ds 2..4, both pipelines{reference}", states.len()),
    })
}

fn mehler(exec: Exec) -> Result<Check> {
    let mut ss: Vec<C64> = [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9].iter().map(|&s| C64::from(s)).collect();
    ss.extend([0.5, 1.5, 2.5].iter().map(|&phi| C64::from_polar(0.9, phi)));
    let pts = [-3.0, -1.5, 0.0, 1.5, 3.0];
    let mut worst: f64 = 0.0;
    let mut scaled: f64 = 0.0;
    for s in &ss {
        let r = C64::from(s.norm());
        for &x in &pts {
            for &y in &pts {
                let (series, closed) = mehler_kernel(x, y, *s, 200)?;
                worst = worst.max((series - closed).norm() / closed.norm());
                // Cauchy-Schwarz bound on the sum of absolute terms
                let bound = (mehler_kernel(x, x, r, 1)?.1.re * mehler_kernel(y, y, r, 1)?.1.re).sqrt();
                scaled = scaled.max((series - closed).norm() / bound);
            }
        }
    }

    // Abel-regularized eigen-sum against the analytic harmonic kernel,
    // integrated against a packet.
    let p = PhysicalParams::default();
    let basis = harmonic_eigensystem(p);
    let psi = GaussianPacket::new(0.7, -0.4, 0.6, 1.0)?;
    let t = 1.3;
    let s = SicInterval::new(t, LogicalSign::Minus)?;
    let exact = propagate_packet(&psi, &QuadraticGreenForm::harmonic(&s, &p)?)?;
    let state = expand_state_on(|x| psi.evaluate(x), &basis, 120, (-16.0, 16.0), exec)?;
    let evolved = eigensum_evolution(&state, s.sign(), t)?;
    let damping: f64 = 1e-9;
    let damped = ExpansionState::from_coeffs(
        basis,
        evolved.coeffs().iter().enumerate().map(|(k, c)| c * (1.0 - damping).powi(k as i32)).collect(),
    )?;
    let rule = Rule::composite(-10.0, 10.0, 32, 20);
    let mut sq = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        sq += (damped.reconstruct(x)? - exact.evaluate(x)).norm_sqr() * w;
    }
    let packet_err = sq.sqrt();
    let passed = worst <= 1e-10 && packet_err <= 1e-6;
    Ok(Check {
        passed,
        measured: worst,
        tolerance: 1e-10,
        detail: format!(
            "200 terms over |s| <= 0.9, |x|,|y| <= 3; error over the absolute-term bound {scaled:.1e}; \
             relative error is unbounded where the closed form underflows (about 1e-70 at s = -0.9, x = y = 3) \
             and the series tail alone is 1.5e-10 at s = 0.9, x = y = 3; packet-level eigen-sum error {packet_err:.1e} (limit 1e-6)"
        ),
    })
}

fn green_identities(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let p = PhysicalParams::new(rng.random_range(0.5..2.0), rng.random_range(0.3..2.0), rng.random_range(0.5..1.5))?;
        let mut t = rng.random_range(0.2..3.0);
        if (p.omega * t).sin().abs() < 0.05 {
            t += 0.3;
        }
        let f = rng.random_range(-1.0..1.0);
        let (plus, minus) = (SicInterval::new(t, LogicalSign::Plus)?, SicInterval::new(t, LogicalSign::Minus)?);
        let (xa, xb) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let pairs = [
            (free_green(xb, xa, &minus, &p)?, free_green(xa, xb, &plus, &p)?),
            (harmonic_green(xb, xa, &minus, &p)?, harmonic_green(xa, xb, &plus, &p)?),
            (driven_green(xb, xa, &minus, &p, f)?, driven_green(xa, xb, &plus, &p, f)?),
        ];
        for (m, pl) in pairs {
            worst = worst.max((m - pl.conj()).norm());
        }
    }
    let mut quarter: f64 = 0.0;
    for _ in 0..20 {
        let p = PhysicalParams::new(rng.random_range(0.5..2.0), rng.random_range(0.3..2.0), rng.random_range(0.5..1.5))?;
        let s = SicInterval::new(PI / (2.0 * p.omega), LogicalSign::Plus)?;
        let (xa, xb) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let want = (C64::from(p.mass * p.omega) / (I * 2.0 * PI * p.hbar)).sqrt() * (-I * p.mass * p.omega * xa * xb / p.hbar).exp();
        quarter = quarter.max((harmonic_green(xa, xb, &s, &p)? - want).norm());
    }
    let passed = worst <= 1e-12 && quarter <= 1e-12;
    Ok(Check {
        passed,
        measured: worst.max(quarter),
        tolerance: 1e-12,
        detail: format!("40 random kernels of each type; sign-reversal defect {worst:.1e}, quarter-period defect {quarter:.1e}"),
    })
}

fn form_gap(a: &QuadraticGreenForm, b: &QuadraticGreenForm) -> f64 {
    a.max_param_distance(b).max((a.prefactor - b.prefactor).norm())
}

fn composition(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut direct: f64 = 0.0;
    let mut assoc: f64 = 0.0;
    let mut semigroup: f64 = 0.0;
    for _ in 0..30 {
        let p = PhysicalParams::new(rng.random_range(0.5..2.0), rng.random_range(0.3..1.5), 1.0)?;
        let span = 0.9 * PI / p.omega;
        let (t1, t2) = (rng.random_range(0.05..0.45) * span, rng.random_range(0.05..0.45) * span);
        let sign = random_sign(rng);
        let iv = |t: f64| SicInterval::new(t, sign);
        let h1 = QuadraticGreenForm::harmonic(&iv(t1)?, &p)?;
        let h2 = QuadraticGreenForm::harmonic(&iv(t2)?, &p)?;
        let h12 = QuadraticGreenForm::harmonic(&iv(t1 + t2)?, &p)?;
        direct = direct.max(compose_quadratic(&h1, &h2)?.max_param_distance(&h12));

        let f = rng.random_range(-1.0..1.0);
        let t3 = rng.random_range(0.05..0.3) * span;
        let g = [QuadraticGreenForm::driven(&iv(t1)?, &p, f)?, QuadraticGreenForm::free(&iv(t2)?, &p)?, QuadraticGreenForm::harmonic(&iv(t3)?, &p)?];
        let left = compose_quadratic(&compose_quadratic(&g[0], &g[1])?, &g[2])?;
        let right = compose_quadratic(&g[0], &compose_quadratic(&g[1], &g[2])?)?;
        assoc = assoc.max(form_gap(&left, &right));

        let f1 = QuadraticGreenForm::free(&iv(t1)?, &p)?;
        let f2 = QuadraticGreenForm::free(&iv(t2)?, &p)?;
        let f12 = QuadraticGreenForm::free(&iv(t1 + t2)?, &p)?;
        let ff = compose_quadratic(&f1, &f2)?;
        let scale = f12.s_aa.abs().max(f12.prefactor.norm());
        semigroup = semigroup.max(form_gap(&ff, &f12) / scale);
    }
    // free-free composition is exact up to a few ulps of rounding
    let passed = direct <= 1e-9 && assoc <= 1e-9 && semigroup <= 1e-14;
    Ok(Check {
        passed,
        measured: direct.max(assoc),
        tolerance: 1e-9,
        detail: format!("30 draws; direct-form gap {direct:.1e}, associativity gap {assoc:.1e}, free semigroup relative gap {semigroup:.1e}"),
    })
}

fn round_trips(rng: &mut ChaCha8Rng) -> Result<Check> {
    let mut fidelity_gap: f64 = 0.0;
    let mut norm_gap: f64 = 0.0;
    for _ in 0..20 {
        let p = PhysicalParams::new(rng.random_range(0.5..2.0), rng.random_range(0.3..2.0), 1.0)?;
        let psi = GaussianPacket::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.2..1.5), 1.0)?;
        let sign = random_sign(rng);
        let quarter = QuadraticGreenForm::harmonic(&SicInterval::new(PI / (2.0 * p.omega), sign)?, &p)?;
        let mut out = psi;
        for _ in 0..4 {
            out = propagate_packet(&out, &quarter)?;
            norm_gap = norm_gap.max((out.norm_sq() - 1.0).abs());
        }
        fidelity_gap = fidelity_gap.max(1.0 - psi.fidelity(&out));

        let t = rng.random_range(0.1..3.0);
        let s = SicInterval::new(t, sign)?;
        let mut forms = vec![QuadraticGreenForm::free(&s, &p)?];
        if (p.omega * t).sin().abs() > 1e-3 {
            forms.push(QuadraticGreenForm::harmonic(&s, &p)?);
            forms.push(QuadraticGreenForm::driven(&s, &p, rng.random_range(-1.0..1.0))?);
        }
        for g in forms {
            norm_gap = norm_gap.max((propagate_packet(&psi, &g)?.norm_sq() - 1.0).abs());
        }
    }
    let passed = fidelity_gap <= 1e-8 && norm_gap <= 1e-10;
    Ok(Check {
        passed,
        measured: fidelity_gap,
        tolerance: 1e-8,
        detail: format!("20 packets; full-period 1 - fidelity {fidelity_gap:.1e}, worst norm drift {norm_gap:.1e} (limit 1e-10)"),
    })
}

fn path_integral(exec: Exec) -> Result<Check> {
    let p = PhysicalParams::default();
    let s = SicInterval::new(0.5, LogicalSign::Plus)?;
    let psi = GaussianPacket::new(1.0, 0.0, 0.5, 1.0)?;
    let exact = propagate_packet(&psi, &QuadraticGreenForm::harmonic(&s, &p)?)?;
    let ns = [8usize, 16, 32, 64, 128];
    let mut errs = Vec::with_capacity(ns.len());
    for &n in &ns {
        let cfg = LatticeConfig::new(n, -10.0, 10.0, 128)?;
        errs.push(trotter_green(|x| 0.5 * x * x, &s, &p, cfg)?.packet_error(&psi, &exact, exec)?);
    }
    let slope = loglog_slope(&ns, &errs)?;
    let free_exact = propagate_packet(&psi, &QuadraticGreenForm::free(&s, &p)?)?;
    let cfg = LatticeConfig::new(16, -10.0, 10.0, 128)?;
    let free_err = trotter_green(|_| 0.0, &s, &p, cfg)?.packet_error(&psi, &free_exact, exec)?;
    let passed = (slope - 1.0).abs() <= 0.2 && free_err <= 1e-6;
    Ok(Check {
        passed,
        measured: (slope - 1.0).abs(),
        tolerance: 0.2,
        detail: format!("slope {slope:.3} over N = 8..128 (errors {:.2e} .. {:.2e}); zero potential error {free_err:.1e}", errs[0], errs[4]),
    })
}

fn timedep() -> Result<Check> {
    let p = PhysicalParams::default();
    let n_fock = 12;
    let (t_m, f0) = (2.0, 1.5);
    let h0 = fock_hamiltonian(&p, n_fock);
    let x = fock_position(&p, n_fock);
    let ramp = |t: f64| h0.add(&x.scale(C64::from(f0 * t / t_m))).expect("same dims");
    let h = PiecewiseHamiltonian::new(ramp, 0.0, t_m, 1.0)?;
    let (plus, minus) = reversal_pair(&h, TimedepVariant::SignedSchedule, 40)?;
    let signed_global = reversal_symmetry_check(&plus, &minus, ReversalMode::Global)?;
    let (plus, minus) = reversal_pair(&h, TimedepVariant::FixedSchedule, 40)?;
    let fixed_local = reversal_symmetry_check(&plus, &minus, ReversalMode::Local)?;
    let fixed_global = reversal_symmetry_check(&plus, &minus, ReversalMode::Global)?;
    let passed = signed_global <= 1e-10 && fixed_local <= 1e-10 && fixed_global > 1e-3;
    Ok(Check {
        passed,
        measured: signed_global.max(fixed_local),
        tolerance: 1e-10,
        detail: format!(
            "ramped drive, 40 slices: signed schedule global {signed_global:.1e}; fixed schedule local {fixed_local:.1e}, global {fixed_global:.2e} (must exceed 1e-3)"
        ),
    })
}

fn perturbation(exec: Exec) -> Result<Check> {
    let p = PhysicalParams::default();
    let n = 40;
    let t = 0.5;
    let err = |lambda: f64, order: usize| -> Result<f64> {
        let split = HamiltonianSplit::new(fock_hamiltonian(&p, n), fock_position(&p, n), lambda, 1.0)?;
        let exact = mat_exp(&split.full(), -I * t)?;
        dyson_iterate_with(&split, LogicalSign::Plus, t, order, 32, exec)?.distance(&exact)
    };
    let r1 = err(0.1, 1)? / err(0.05, 1)?;
    let r2 = err(0.1, 2)? / err(0.05, 2)?;
    let zero = HamiltonianSplit::new(fock_hamiltonian(&p, n), fock_position(&p, n), 0.0, 1.0)?;
    let u0 = zero.u0(LogicalSign::Minus, t);
    let same = dyson_iterate_with(&zero, LogicalSign::Minus, t, 2, 8, exec)?.matrix() == u0.matrix();
    let passed = (r1 - 4.0).abs() <= 0.5 && (r2 - 8.0).abs() <= 1.5 && same;
    Ok(Check {
        passed,
        measured: (r1 - 4.0).abs(),
        tolerance: 0.5,
        detail: format!("40 Fock levels, t = 0.5: order-1 ratio {r1:.3}, order-2 ratio {r2:.3}; zero perturbation returns U0 exactly: {same}"),
    })
}

fn quarter_period() -> Result<Check> {
    let p = PhysicalParams::default();
    let mut d32: f64 = 0.0;
    let mut d64: f64 = 0.0;
    for swap in [QuarterSwap::PotentialToKinetic, QuarterSwap::KineticToPotential] {
        for sign in LogicalSign::both() {
            d32 = d32.max(quarter_period_conjugation(&p, 0.7, sign, 32, swap)?.defect);
            d64 = d64.max(quarter_period_conjugation(&p, 0.7, sign, 64, swap)?.defect);
        }
    }
    let ratio = d32 / d64;
    Ok(Check {
        passed: ratio >= 2.0,
        measured: ratio,
        tolerance: 2.0,
        detail: format!(
            "low-block defect {d32:.1e} at 32 levels, {d64:.1e} at 64; the ladder-truncated identity is exact on the low block, \
             so both sit at rounding level and cannot halve"
        ),
    })
}

fn square_well(exec: Exec) -> Result<Check> {
    let p = PhysicalParams::default();
    let width = 4.0;
    let basis = square_well_eigensystem(p, 0.0, width)?;
    let mut worst: f64 = 0.0;
    let mut wall: f64 = 0.0;
    for (x0, p0, sign, t) in [(2.0, 0.9, LogicalSign::Minus, 0.4), (1.6, -1.2, LogicalSign::Plus, 0.25), (2.4, 0.0, LogicalSign::Plus, 0.6)] {
        let psi = GaussianPacket::new(x0, p0, 0.2, 1.0)?;
        let s = SicInterval::new(t, sign)?;
        let state = expand_state_on(|x| psi.evaluate(x), &basis, 400, (0.0, width), exec)?;
        let evolved = eigensum_evolution(&state, sign, t)?;
        let rule = Rule::composite(0.0, width, 32, 16);
        let mut sq = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            sq += (square_well_packet(&psi, &s, &p, width, 50, x)? - evolved.reconstruct(x)?).norm_sqr() * w;
        }
        worst = worst.max(sq.sqrt());
        for edge in [0.0, width] {
            wall = wall.max(square_well_packet(&psi, &s, &p, width, 50, edge)?.norm());
        }
    }
    let passed = worst <= 1e-6 && wall <= 1e-10;
    Ok(Check {
        passed,
        measured: worst,
        tolerance: 1e-6,
        detail: format!("three packets, 50 images vs 400 sine levels; worst wall value {wall:.1e}"),
    })
}
