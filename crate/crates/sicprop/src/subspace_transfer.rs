//! Moving register propagators onto another subsystem.
//!
//! Pseudospin pi-rotations swap `|k, u_0>` with `|0, u_k>`; conjugating a
//! diagonal register propagator by their product transfers its spectrum.
//! Finite registers only reach the first `2^ds` levels, and the norm
//! diagnostics here measure what that truncation costs.

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::hilbert_core::{
    cis, fidelity_up_to_phase, Axis, DenseOperator, GlobalPhase, MonomialOperator, StateVector, C64, I,
};
use crate::oscillator_basis::ExpansionState;
use crate::spin_synthesis::{
    linear_global_phase, linear_phase_propagator, quadratic_phase_propagator, DiagonalPhaseProfile, SpinRegister,
};
use crate::LogicalSign;

/// Composite spaces larger than this are refused.
pub const DEFAULT_MAX_COMPOSITE: usize = 1 << 22;
/// Dense pseudospin rotations are only built up to this size.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeSpace {
    dims: Vec<usize>,
}

impl CompositeSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        Self::with_max(dims, DEFAULT_MAX_COMPOSITE)
    }

    pub fn with_max(dims: &[usize], max: usize) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) || dims.contains(&0) {
            return Err(SicError::Contract(format!("need 2 or 3 positive component dims, got {dims:?}")));
        }
        let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        match total {
            Some(t) if t <= max => Ok(Self { dims: dims.to_vec() }),
            _ => Err(SicError::Capacity { requested: total.unwrap_or(usize::MAX), limit: max }),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index, first component most significant.
    pub fn index(&self, multi: &[usize]) -> Result<usize> {
        if multi.len() != self.dims.len() {
            return Err(SicError::DimensionMismatch { expected: self.dims.len(), found: multi.len() });
        }
        multi.iter().zip(&self.dims).try_fold(0usize, |acc, (&i, &d)| {
            if i >= d {
                Err(SicError::Range(format!("component index {i} outside dim {d}")))
            } else {
                Ok(acc * d + i)
            }
        })
    }
}

/// Two distinct basis states spanning an effective spin-1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PseudospinPair {
    pub k: usize,
    pub l: usize,
}

impl PseudospinPair {
    pub fn new(space: &CompositeSpace, k: &[usize], l: &[usize]) -> Result<Self> {
        let (k, l) = (space.index(k)?, space.index(l)?);
        if k == l {
            return Err(SicError::Contract("pseudospin pair needs two different states".into()));
        }
        Ok(Self { k, l })
    }
}

/// `exp(-i angle Q_axis)` on the span of the pair, identity elsewhere.
/// With this sign, angle `-pi` about x sends `|K>` to `+i|L>`.
pub fn pseudospin_rotation(space: &CompositeSpace, pair: PseudospinPair, axis: Axis, angle: f64) -> Result<DenseOperator> {
    let n = space.total();
    if n > DENSE_LIMIT {
        return Err(SicError::Capacity { requested: n, limit: DENSE_LIMIT });
    }
    if pair.k == pair.l || pair.k >= n || pair.l >= n {
        return Err(SicError::Contract("invalid pseudospin pair".into()));
    }
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    // exp(-i angle sigma/2) in the (K, L) basis
    let (kk, kl, lk, ll) = match axis {
        Axis::X => (C64::from(c), -I * s, -I * s, C64::from(c)),
        Axis::Y => (C64::from(c), C64::from(-s), C64::from(s), C64::from(c)),
        Axis::Z => (cis(-angle / 2.0), C64::from(0.0), C64::from(0.0), cis(angle / 2.0)),
    };
    let mut m = DenseOperator::identity(n).into_matrix();
    m[(pair.k, pair.k)] = kk;
    m[(pair.k, pair.l)] = kl;
    m[(pair.l, pair.k)] = lk;
    m[(pair.l, pair.l)] = ll;
    DenseOperator::from_matrix(m)?.into_unitary()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    /// Components 1 and 2.
    L12,
    /// Components 2 and 3.
    L23,
}

/// Product of pi-rotations over `(|k,0>, |0,k>)` for `1 <= k < k_trunc`
/// on the chosen leg, times `exp(-i pi/2 |0,0><0,0|)`. Sends `|j,0>` to
/// `-i|0,j>` for `j < k_trunc` and fixes `|j,0>` otherwise.
pub fn build_transfer_w(space: &CompositeSpace, leg: Leg, k_trunc: usize) -> Result<MonomialOperator> {
    let d = space.dims();
    let (first, left, right) = match (leg, d.len()) {
        (Leg::L12, 2) => (0, 1, 1),
        (Leg::L12, 3) => (0, 1, d[2]),
        (Leg::L23, 3) => (1, d[0], 1),
        (Leg::L23, _) => return Err(SicError::Contract("leg 23 needs a three-component space".into())),
        _ => unreachable!("component count checked at construction"),
    };
    let (da, db) = (d[first], d[first + 1]);
    if k_trunc == 0 || k_trunc > da.min(db) {
        return Err(SicError::Range(format!("truncation {k_trunc} outside 1..={}", da.min(db))));
    }
    let n = da * db;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut phases = vec![C64::from(1.0); n];
    phases[0] = -I;
    for k in 1..k_trunc {
        let (up, down) = (k * db, k);
        perm[up] = down;
        perm[down] = up;
        phases[up] = -I;
        phases[down] = -I;
    }
    Ok(MonomialOperator::new(perm, phases)?.embed(left, right))
}

/// Number of elementary pseudospin rotations in a truncated transfer.
pub fn rotations_per_transfer(k_trunc: usize) -> usize {
    k_trunc.saturating_sub(1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumForm {
    /// `E_k = a k + b`
    Linear { a: f64, b: f64 },
    /// `E_k = a k^2 + b k + c`
    Quadratic { a: f64, b: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpectrum {
    pub form: SpectrumForm,
    pub t_m: f64,
    pub hbar: f64,
}

impl TargetSpectrum {
    pub fn linear(a: f64, b: f64, t_m: f64) -> Self {
        Self { form: SpectrumForm::Linear { a, b }, t_m, hbar: 1.0 }
    }

    pub fn quadratic(a: f64, b: f64, c: f64, t_m: f64) -> Self {
        Self { form: SpectrumForm::Quadratic { a, b, c }, t_m, hbar: 1.0 }
    }

    pub fn energy(&self, k: usize) -> f64 {
        let k = k as f64;
        match self.form {
            SpectrumForm::Linear { a, b } => a * k + b,
            SpectrumForm::Quadratic { a, b, c } => a * k * k + b * k + c,
        }
    }

    /// Phase `-a E_k t / hbar` the propagator should put on level `k`.
    pub fn target_phase(&self, k: usize, sign: LogicalSign) -> f64 {
        -sign.value() * self.energy(k) * self.t_m / self.hbar
    }

    fn check(&self) -> Result<()> {
        let finite = match self.form {
            SpectrumForm::Linear { a, b } => a.is_finite() && b.is_finite(),
            SpectrumForm::Quadratic { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
        };
        if !finite || !self.t_m.is_finite() || !(self.hbar > 0.0) {
            return Err(SicError::Contract("target spectrum coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Register profile carrying the k-dependent part, with its own
    /// global phase removed, plus the constant left over.
    fn register_profile(&self, reg: SpinRegister, sign: LogicalSign) -> Result<(DiagonalPhaseProfile, GlobalPhase)> {
        let scale = self.t_m / self.hbar;
        let (profile, constant) = match self.form {
            SpectrumForm::Linear { a, b } => (linear_phase_propagator(reg, a * scale, sign), b),
            SpectrumForm::Quadratic { a, b, c } => {
                let q = quadratic_phase_propagator(reg, a * scale, sign);
                (q.compose(&linear_phase_propagator(reg, b * scale, sign))?, c)
            }
        };
        let stripped = DiagonalPhaseProfile { phases: profile.phases, global: GlobalPhase::zero() };
        Ok((stripped, GlobalPhase::new(-sign.value() * constant * scale)))
    }
}

/// Transfers the register propagator for `target` onto component 2 of
/// `S_1 (x) S_2` with `dim S_1 = 2^ds`.
///
/// On `|0, u_k>` the result applies `e^{-i a (E_k - E_0') t / hbar}` for
/// `k < 2^ds` and the identity above, where `E_0'` is the constant part of
/// the spectrum. Multiplying by the returned phase restores that constant.
pub fn conjugate_linear_spectrum(ds: u32, d2: usize, target: TargetSpectrum, sign: LogicalSign) -> Result<(MonomialOperator, GlobalPhase)> {
    target.check()?;
    let reg = SpinRegister::new(ds)?;
    let k = reg.dim();
    if d2 < k {
        return Err(SicError::DimensionMismatch { expected: k, found: d2 });
    }
    let space = CompositeSpace::new(&[k, d2])?;
    let w = build_transfer_w(&space, Leg::L12, k)?;
    let (profile, phase) = target.register_profile(reg, sign)?;
    let u = profile.to_monomial().embed(1, d2);
    Ok((w.compose(&u)?.compose(&w.adjoint())?, phase))
}

/// Two-leg transfer onto component 3 of `S_1 (x) S_2 (x) S_3`.
pub fn chained_transfer(ds: u32, d2: usize, d3: usize, target: TargetSpectrum, sign: LogicalSign) -> Result<(MonomialOperator, GlobalPhase)> {
    target.check()?;
    let reg = SpinRegister::new(ds)?;
    let k = reg.dim();
    if d2 < k || d3 < k {
        return Err(SicError::DimensionMismatch { expected: k, found: d2.min(d3) });
    }
    let space = CompositeSpace::new(&[k, d2, d3])?;
    let w12 = build_transfer_w(&space, Leg::L12, k)?;
    let w23 = build_transfer_w(&space, Leg::L23, k)?;
    let (profile, phase) = target.register_profile(reg, sign)?;
    let u = profile.to_monomial().embed(1, d2 * d3);
    let out = w23.compose(&w12)?.compose(&u)?.compose(&w12.adjoint())?.compose(&w23.adjoint())?;
    Ok((out, phase))
}

/// Factors the operator applies to `|0, ..., 0, u_k>`, or an error if it
/// leaks out of that subspace.
pub fn restricted_action(op: &MonomialOperator, last_dim: usize) -> Result<Vec<C64>> {
    (0..last_dim)
        .map(|k| {
            let (to, z) = op.image(k);
            if to != k {
                return Err(SicError::Contract(format!("level {k} leaves the target subspace")));
            }
            Ok(z)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    ThreeStep,
    FiveStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub norms: Vec<f64>,
    pub bound: f64,
    pub max_norm: f64,
    pub passed: bool,
    /// `|<exact|truncated>|` after each step.
    pub fidelities: Vec<f64>,
    pub nres: f64,
    pub rotations_per_transfer: usize,
}

/// Truncated-vs-exact error after every step of a transfer pipeline.
///
/// The exact side uses a register just large enough to hold every stored
/// coefficient; the truncated side uses `2^ds` levels. Global phases are
/// aligned from the register sizes, not fitted.
pub fn transfer_norm_diagnostics(
    state: &ExpansionState,
    ds: u32,
    pipeline: Pipeline,
    alpha: f64,
    sign: LogicalSign,
) -> Result<TransferReport> {
    transfer_norm_diagnostics_with(state, ds, pipeline, alpha, sign, Exec::default())
}

pub fn transfer_norm_diagnostics_with(
    state: &ExpansionState,
    ds: u32,
    pipeline: Pipeline,
    alpha: f64,
    sign: LogicalSign,
    exec: Exec,
) -> Result<TransferReport> {
    let reg_ap = SpinRegister::new(ds)?;
    let k_ap = reg_ap.dim();
    let l = state.l_max();
    if l <= k_ap {
        return Err(SicError::Accuracy {
            what: format!("need more than {k_ap} stored coefficients, have {l}"),
            achieved: l as f64,
        });
    }
    let d1 = l.next_power_of_two();
    let reg_ex = SpinRegister::with_max(d1.trailing_zeros(), 24)?;
    let a = sign.value();
    let align = cis(linear_global_phase(reg_ex, alpha, sign) - linear_global_phase(reg_ap, alpha, sign));

    let tail = match pipeline {
        Pipeline::ThreeStep => l,
        Pipeline::FiveStep => l * l,
    };
    let dims: Vec<usize> = match pipeline {
        Pipeline::ThreeStep => vec![d1, l],
        Pipeline::FiveStep => vec![d1, l, l],
    };
    let space = CompositeSpace::new(&dims)?;
    let u_ex = MonomialOperator::diagonal(
        (0..d1).map(|j| cis(linear_global_phase(reg_ex, alpha, sign) - alpha * a * j as f64)).collect(),
    )
    .embed(1, tail);
    let u_ap = MonomialOperator::diagonal(
        (0..d1).map(|j| cis(linear_global_phase(reg_ap, alpha, sign) - alpha * a * (j % k_ap) as f64)).collect(),
    )
    .embed(1, tail);

    let w12_ex = build_transfer_w(&space, Leg::L12, l)?;
    let w12_ap = build_transfer_w(&space, Leg::L12, k_ap)?;
    // (exact op, truncated op, alignment applied to the truncated state)
    let mut steps: Vec<(MonomialOperator, MonomialOperator, C64)> = Vec::new();
    let one = C64::from(1.0);
    match pipeline {
        Pipeline::ThreeStep => {
            steps.push((w12_ex.adjoint(), w12_ap.adjoint(), one));
            steps.push((u_ex, u_ap, align));
            steps.push((w12_ex, w12_ap, align));
        }
        Pipeline::FiveStep => {
            let w23_ex = build_transfer_w(&space, Leg::L23, l)?;
            let w23_ap = build_transfer_w(&space, Leg::L23, k_ap)?;
            steps.push((w23_ex.adjoint(), w23_ap.adjoint(), one));
            steps.push((w12_ex.adjoint(), w12_ap.adjoint(), one));
            steps.push((u_ex, u_ap, align));
            steps.push((w12_ex, w12_ap, align));
            steps.push((w23_ex, w23_ap, align));
        }
    }

    let mut psi = vec![C64::from(0.0); space.total()];
    psi[..l].copy_from_slice(state.coeffs());
    let mut exact = psi.clone();
    let mut approx = psi;
    let mut norms = Vec::with_capacity(steps.len());
    let mut fidelities = Vec::with_capacity(steps.len());
    for (ex_op, ap_op, phase) in &steps {
        exact = ex_op.apply_slice_with(&exact, exec)?;
        approx = ap_op.apply_slice_with(&approx, exec)?;
        let diff: f64 = exact.iter().zip(&approx).map(|(e, p)| (p * phase - e).norm_sqr()).sum();
        norms.push(diff.sqrt());
        fidelities.push(pair_fidelity(&exact, &approx)?);
    }

    let nres = state.residual_norm(k_ap)?;
    let bound = 2.0 * nres;
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    Ok(TransferReport {
        passed: max_norm <= bound + 1e-12,
        norms,
        bound,
        max_norm,
        fidelities,
        nres,
        rotations_per_transfer: rotations_per_transfer(k_ap),
    })
}

fn pair_fidelity(a: &[C64], b: &[C64]) -> Result<f64> {
    let a = StateVector::normalize(a.to_vec())?;
    let b = StateVector::normalize(b.to_vec())?;
    fidelity_up_to_phase(&a, &b)
}

/// `|| sum_{k >= 2^ds} B_k (1 - e^{-i alpha a k}) |0, u_k> ||`.
pub fn norm3_closed_form(state: &ExpansionState, ds: u32, alpha: f64, sign: LogicalSign) -> f64 {
    let k0 = 1usize << ds;
    let a = sign.value();
    state.coeffs()[k0.min(state.l_max())..]
        .iter()
        .enumerate()
        .map(|(i, b)| (b * (C64::from(1.0) - cis(-alpha * a * (k0 + i) as f64))).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator_basis::{harmonic_eigensystem, PhysicalParams};
    use std::f64::consts::PI;

    use proptest::prelude::*;

    fn space2(d1: usize, d2: usize) -> CompositeSpace {
        CompositeSpace::new(&[d1, d2]).unwrap()
    }

    #[test]
    fn rotation_sign_convention() {
        let s = space2(2, 2);
        let pair = PseudospinPair::new(&s, &[1, 0], &[0, 1]).unwrap();
        assert_eq!(pseudospin_rotation(&s, pair, Axis::X, 0.0).unwrap(), DenseOperator::identity(4));
        let k = StateVector::basis(4, pair.k).unwrap();
        let back = pseudospin_rotation(&s, pair, Axis::X, -PI).unwrap().apply(&k).unwrap();
        assert!((back.amplitudes()[pair.l] - I).norm() < 1e-15);
        let fwd = pseudospin_rotation(&s, pair, Axis::X, PI).unwrap().apply(&k).unwrap();
        assert!((fwd.amplitudes()[pair.l] + I).norm() < 1e-15);
        assert!(PseudospinPair::new(&s, &[1, 1], &[1, 1]).is_err());
    }

    #[test]
    fn disjoint_rotations_commute() {
        let s = space2(4, 4);
        let p1 = PseudospinPair::new(&s, &[1, 0], &[0, 1]).unwrap();
        let p2 = PseudospinPair::new(&s, &[2, 0], &[0, 2]).unwrap();
        let a = pseudospin_rotation(&s, p1, Axis::X, 0.7).unwrap();
        let b = pseudospin_rotation(&s, p2, Axis::Y, -1.3).unwrap();
        assert!(a.commutator(&b).unwrap().frobenius() < 1e-12);
    }

    #[test]
    fn transfer_w_matches_dense_rotation_product() {
        let s = space2(4, 5);
        let w = build_transfer_w(&s, Leg::L12, 3).unwrap();
        let mut dense = DenseOperator::identity(20);
        for k in 1..3 {
            let pair = PseudospinPair::new(&s, &[k, 0], &[0, k]).unwrap();
            dense = dense.mul(&pseudospin_rotation(&s, pair, Axis::X, PI).unwrap()).unwrap();
        }
        let mut diag = vec![C64::from(1.0); 20];
        diag[0] = -I;
        dense = dense.mul(&DenseOperator::diagonal(&diag)).unwrap();
        assert!(w.max_deviation(&dense).unwrap() < 1e-15);
    }

    #[test]
    fn transfer_w_action() {
        let s = space2(8, 8);
        let w = build_transfer_w(&s, Leg::L12, 4).unwrap();
        assert_eq!(w.image(s.index(&[1, 0]).unwrap()), (s.index(&[0, 1]).unwrap(), -I));
        for j in 4..8 {
            let idx = s.index(&[j, 0]).unwrap();
            assert_eq!(w.image(idx), (idx, C64::from(1.0)));
        }
        assert!(w.compose(&w.adjoint()).unwrap().max_deviation(&DenseOperator::identity(64)).unwrap() < 1e-15);
        assert!(build_transfer_w(&s, Leg::L12, 0).is_err());
        assert!(build_transfer_w(&s, Leg::L23, 2).is_err());
    }

    #[test]
    fn full_w_reproduces_exact_action_everywhere() {
        let s = CompositeSpace::new(&[5, 5, 5]).unwrap();
        let w23 = build_transfer_w(&s, Leg::L23, 5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let from = s.index(&[i, j, 0]).unwrap();
                assert_eq!(w23.image(from), (s.index(&[i, 0, j]).unwrap(), -I));
            }
        }
    }

    #[test]
    fn harmonic_target_example() {
        let target = TargetSpectrum::linear(1.0, 0.5, 0.3);
        let (built, phase) = conjugate_linear_spectrum(2, 8, target, LogicalSign::Plus).unwrap();
        let action = restricted_action(&built, 8).unwrap();
        for (k, z) in action.iter().enumerate() {
            let want = if k < 4 { -0.3 * (k as f64 + 0.5) } else { -0.3 * 0.5 };
            assert!((z * phase.factor() - cis(want)).norm() < 1e-12, "k = {k}");
        }
        let (zero, p0) = conjugate_linear_spectrum(3, 8, TargetSpectrum::linear(2.0, 1.0, 0.0), LogicalSign::Minus).unwrap();
        assert!(zero.max_deviation(&DenseOperator::identity(64)).unwrap() < 1e-15);
        assert_eq!(p0.angle(), 0.0);
        assert!(conjugate_linear_spectrum(3, 4, target, LogicalSign::Plus).is_err());
    }

    #[test]
    fn chained_agrees_with_single_leg() {
        let target = TargetSpectrum::linear(0.7, -0.2, 0.9);
        for sign in LogicalSign::both() {
            let (one, p1) = conjugate_linear_spectrum(3, 10, target, sign).unwrap();
            let (two, p2) = chained_transfer(3, 10, 10, target, sign).unwrap();
            let a = restricted_action(&one, 10).unwrap();
            let b = restricted_action(&two, 10).unwrap();
            for k in 0..10 {
                assert!((a[k] * p1.factor() - b[k] * p2.factor()).norm() < 1e-12);
            }
            let s = CompositeSpace::new(&[8, 10, 10]).unwrap();
            for j in 8..10 {
                let idx = s.index(&[0, 0, j]).unwrap();
                assert_eq!(two.image(idx), (idx, C64::from(1.0)));
            }
        }
    }

    #[test]
    fn quadratic_target_is_reached() {
        let target = TargetSpectrum::quadratic(0.11, 0.3, 0.25, 0.8);
        for sign in LogicalSign::both() {
            let (op, phase) = conjugate_linear_spectrum(3, 8, target, sign).unwrap();
            let act = restricted_action(&op, 8).unwrap();
            for (k, z) in act.iter().enumerate() {
                assert!((z * phase.factor() - cis(target.target_phase(k, sign))).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pipeline_is_unitary_dense_check() {
        let (op, _) = conjugate_linear_spectrum(2, 6, TargetSpectrum::linear(1.0, 0.0, 0.4), LogicalSign::Plus).unwrap();
        let d = op.to_dense();
        assert!(crate::hilbert_core::unitarity_defect(&d) < 1e-12);
    }

    #[test]
    fn supported_state_has_zero_norms() {
        let basis = harmonic_eigensystem(PhysicalParams::default());
        let mut c = vec![C64::from(0.0); 20];
        c[1] = C64::new(0.6, 0.0);
        c[3] = C64::new(0.0, 0.8);
        let s = ExpansionState::from_coeffs(basis, c).unwrap();
        for p in [Pipeline::ThreeStep, Pipeline::FiveStep] {
            let r = transfer_norm_diagnostics(&s, 2, p, 0.37, LogicalSign::Minus).unwrap();
            assert!(r.max_norm < 1e-12 && r.passed);
        }
    }

    #[test]
    fn norms_match_closed_forms() {
        let basis = harmonic_eigensystem(PhysicalParams::default());
        let raw: Vec<C64> = (0..24).map(|k| C64::new(1.0 / (1.0 + k as f64), 0.1 * k as f64 % 0.7)).collect();
        let total: f64 = raw.iter().map(|z| z.norm_sqr()).sum();
        let s = ExpansionState::from_coeffs(basis, raw.iter().map(|z| z / total.sqrt()).collect()).unwrap();
        let r = transfer_norm_diagnostics(&s, 3, Pipeline::ThreeStep, 0.9, LogicalSign::Plus).unwrap();
        let nres = s.residual_norm(8).unwrap();
        assert!((r.norms[0] - 2f64.sqrt() * nres).abs() < 1e-12);
        assert!((r.norms[1] - 2f64.sqrt() * nres).abs() < 1e-12);
        assert!((r.norms[2] - norm3_closed_form(&s, 3, 0.9, LogicalSign::Plus)).abs() < 1e-12);
        assert!(r.passed);
        let five = transfer_norm_diagnostics(&s, 3, Pipeline::FiveStep, 0.9, LogicalSign::Plus).unwrap();
        assert!((five.norms[4] - r.norms[2]).abs() < 1e-12);
        assert!(five.passed, "{five:?}");
        assert!(transfer_norm_diagnostics(&s.truncated(8), 3, Pipeline::ThreeStep, 0.9, LogicalSign::Plus).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear_pipelines_hit_target(ds in 2u32..=4, a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..2.0, plus in any::<bool>()) {
            let sign = if plus { LogicalSign::Plus } else { LogicalSign::Minus };
            let target = TargetSpectrum::linear(a, b, t);
            let k0 = 1usize << ds;
            let (op, phase) = conjugate_linear_spectrum(ds, k0 + 3, target, sign).unwrap();
            let act = restricted_action(&op, k0 + 3).unwrap();
            for k in 0..k0 {
                prop_assert!((act[k] * phase.factor() - cis(target.target_phase(k, sign))).norm() < 1e-10);
            }
            for z in &act[k0..] {
                prop_assert!((z - 1.0).norm() < 1e-15);
            }
        }

        #[test]
        fn norms_respect_the_residual_bound(re in prop::collection::vec(-1.0f64..1.0, 40), alpha in -3.0f64..3.0, ds in 2u32..=4) {
            let total: f64 = re.iter().map(|r| r * r).sum::<f64>().max(1e-6);
            let coeffs: Vec<C64> = re.iter().map(|r| C64::from(r / total.sqrt())).collect();
            let s = ExpansionState::from_coeffs(harmonic_eigensystem(PhysicalParams::default()), coeffs).unwrap();
            let r = transfer_norm_diagnostics(&s, ds, Pipeline::ThreeStep, alpha, LogicalSign::Plus).unwrap();
            prop_assert!(r.passed, "{:?}", r);
        }
    }
}
