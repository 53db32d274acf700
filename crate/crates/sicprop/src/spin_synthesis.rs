//! Diagonal propagators on a spin register assembled from elementary
//! z-rotations and zz-couplings.
//!
//! Spin `i` (1-based) is bit `i - 1` of the basis index, with magnetic
//! number `m_i = 1/2 - k_{i-1}`.

use std::f64::consts::PI;

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::hilbert_core::{
    canonical_angle, cis, mat_exp, spin_half, tensor_all, Axis, DenseOperator, GlobalPhase, MonomialOperator, C64,
    I,
};
use crate::LogicalSign;

pub const DEFAULT_MAX_SPINS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinRegister {
    d: u32,
}

impl SpinRegister {
    pub fn new(d: u32) -> Result<Self> {
        Self::with_max(d, DEFAULT_MAX_SPINS)
    }

    pub fn with_max(d: u32, max: u32) -> Result<Self> {
        if d == 0 || d > max {
            return Err(SicError::Range(format!("register size {d} outside 1..={max}")));
        }
        Ok(Self { d })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn dim(&self) -> usize {
        1 << self.d
    }

    /// `m_spin` for basis index `k`.
    pub fn magnetic(&self, k: usize, spin: u32) -> f64 {
        0.5 - ((k >> (spin - 1)) & 1) as f64
    }

    fn check_spin(&self, spin: u32) -> Result<()> {
        if spin == 0 || spin > self.d {
            return Err(SicError::Range(format!("spin {spin} outside 1..={}", self.d)));
        }
        Ok(())
    }

    /// Single-spin operator on `spin`, identity on the rest.
    pub fn spin_operator(&self, spin: u32, axis: Axis) -> Result<DenseOperator> {
        self.check_spin(spin)?;
        let factors: Vec<DenseOperator> = (1..=self.d)
            .rev()
            .map(|s| if s == spin { spin_half(axis) } else { DenseOperator::identity(2) })
            .collect();
        tensor_all(&factors)
    }

    /// Product of z-operators on the listed spins (diagonal, so cheap).
    pub fn zz_product(&self, spins: &[u32]) -> Result<DenseOperator> {
        for &s in spins {
            self.check_spin(s)?;
        }
        let diag: Vec<f64> = (0..self.dim()).map(|k| spins.iter().map(|&s| self.magnetic(k, s)).product()).collect();
        Ok(DenseOperator::real_diagonal(&diag))
    }
}

/// Angles feeding the linear and quadratic constructions.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisAngles {
    pub alpha: f64,
    pub beta: f64,
    /// `theta_list[l - 1]` drives spin `l`.
    pub theta_list: Vec<f64>,
    /// `theta_pairs[j - 1][l - 1]` couples spins `j > l`; other entries are zero.
    pub theta_pairs: Vec<Vec<f64>>,
}

impl SynthesisAngles {
    pub fn linear(reg: SpinRegister, alpha: f64) -> Self {
        let d = reg.d as usize;
        Self {
            alpha,
            beta: 0.0,
            theta_list: (0..d).map(|l| -alpha * (1u64 << l) as f64).collect(),
            theta_pairs: vec![vec![0.0; d]; d],
        }
    }

    /// Pair angles `beta 2^{j+l-2}` plus the single-spin angles that turn
    /// the zz couplings into an exact `k^2` profile.
    pub fn quadratic(reg: SpinRegister, beta: f64) -> Self {
        let d = reg.d as usize;
        let top = ((1u64 << d) - 1) as f64;
        let theta_list = (0..d).map(|l| -beta * top * (1u64 << l) as f64).collect();
        let mut theta_pairs = vec![vec![0.0; d]; d];
        for (j, row) in theta_pairs.iter_mut().enumerate() {
            for (l, t) in row.iter_mut().enumerate().take(j) {
                *t = beta * (1u64 << (j + l)) as f64;
            }
        }
        Self { alpha: 0.0, beta, theta_list, theta_pairs }
    }

    /// Elementary rotations used: one per nonzero single angle and pair.
    pub fn rotation_count(&self) -> usize {
        let singles = self.theta_list.iter().filter(|t| **t != 0.0).count();
        let pairs = self.theta_pairs.iter().flatten().filter(|t| **t != 0.0).count();
        singles + pairs
    }
}

/// `U|k> = e^{i global} e^{i phases[k]} |k>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPhaseProfile {
    pub phases: Vec<f64>,
    pub global: GlobalPhase,
}

impl DiagonalPhaseProfile {
    pub fn identity(dim: usize) -> Self {
        Self { phases: vec![0.0; dim], global: GlobalPhase::zero() }
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    /// Total phase of basis state `k`.
    pub fn total_phase(&self, k: usize) -> f64 {
        self.global.angle() + self.phases[k]
    }

    pub fn factor(&self, k: usize) -> C64 {
        cis(self.total_phase(k))
    }

    pub fn to_dense(&self) -> DenseOperator {
        let diag: Vec<C64> = (0..self.dim()).map(|k| self.factor(k)).collect();
        DenseOperator::diagonal(&diag).into_unitary().expect("phase diagonal is unitary")
    }

    pub fn to_monomial(&self) -> MonomialOperator {
        MonomialOperator::diagonal((0..self.dim()).map(|k| self.factor(k)).collect())
    }

    pub fn compose(&self, other: &DiagonalPhaseProfile) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(SicError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self {
            phases: self.phases.iter().zip(&other.phases).map(|(a, b)| a + b).collect(),
            global: self.global + other.global,
        })
    }

    pub fn inverse(&self) -> Self {
        Self { phases: self.phases.iter().map(|p| -p).collect(), global: -self.global }
    }

    /// Largest circular distance between total phases.
    pub fn max_phase_distance(&self, other: &DiagonalPhaseProfile) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(SicError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok((0..self.dim())
            .map(|k| canonical_angle(self.total_phase(k) - other.total_phase(k)).abs())
            .fold(0.0, f64::max))
    }

    /// Largest entrywise gap to a dense diagonal reference.
    pub fn max_entry_error(&self, dense: &DenseOperator) -> Result<f64> {
        if self.dim() != dense.dim() {
            return Err(SicError::DimensionMismatch { expected: self.dim(), found: dense.dim() });
        }
        Ok((0..self.dim()).map(|k| (self.factor(k) - dense.get(k, k)).norm()).fold(0.0, f64::max))
    }
}

/// `exp(-i theta a I_{spin, axis})` on the full register.
pub fn basic_sic_rotation(reg: SpinRegister, spin: u32, axis: Axis, sign: LogicalSign, theta: f64) -> Result<DenseOperator> {
    reg.check_spin(spin)?;
    let local = mat_exp(&spin_half(axis), -I * theta * sign.value())?;
    let factors: Vec<DenseOperator> = (1..=reg.d)
        .rev()
        .map(|s| if s == spin { local.clone() } else { DenseOperator::identity(2) })
        .collect();
    tensor_all(&factors)?.into_unitary()
}

/// Product of z-rotations with angles `-alpha 2^{l-1}`: phases `-alpha a k`
/// on top of the register-size global phase `alpha a (2^d - 1) / 2`.
pub fn linear_phase_propagator(reg: SpinRegister, alpha: f64, sign: LogicalSign) -> DiagonalPhaseProfile {
    linear_phase_propagator_with(reg, alpha, sign, Exec::default())
}

pub fn linear_phase_propagator_with(reg: SpinRegister, alpha: f64, sign: LogicalSign, exec: Exec) -> DiagonalPhaseProfile {
    let a = sign.value();
    let phases = exec.map_range(reg.dim(), |k| -alpha * a * k as f64);
    DiagonalPhaseProfile { phases, global: GlobalPhase::new(linear_global_phase(reg, alpha, sign)) }
}

/// Unreduced global angle of the linear construction.
pub fn linear_global_phase(reg: SpinRegister, alpha: f64, sign: LogicalSign) -> f64 {
    alpha * sign.value() * (reg.dim() - 1) as f64 / 2.0
}

/// zz couplings `exp(-i a 2 theta_jl I_jz I_lz)` for all `j > l`.
pub fn pair_coupling_propagator(reg: SpinRegister, theta_pairs: &[Vec<f64>], sign: LogicalSign) -> Result<DiagonalPhaseProfile> {
    pair_coupling_propagator_with(reg, theta_pairs, sign, Exec::default())
}

pub fn pair_coupling_propagator_with(
    reg: SpinRegister,
    theta_pairs: &[Vec<f64>],
    sign: LogicalSign,
    exec: Exec,
) -> Result<DiagonalPhaseProfile> {
    let d = reg.d as usize;
    check_pairs(d, theta_pairs)?;
    let a = sign.value();
    let phases = exec.map_range(reg.dim(), |k| {
        let mut acc = 0.0;
        for j in 1..d {
            let mj = reg.magnetic(k, j as u32 + 1);
            for l in 0..j {
                acc += 2.0 * theta_pairs[j][l] * mj * reg.magnetic(k, l as u32 + 1);
            }
        }
        -a * acc
    });
    Ok(DiagonalPhaseProfile { phases, global: GlobalPhase::zero() })
}

fn check_pairs(d: usize, theta_pairs: &[Vec<f64>]) -> Result<()> {
    if theta_pairs.len() != d || theta_pairs.iter().any(|r| r.len() != d) {
        return Err(SicError::DimensionMismatch { expected: d, found: theta_pairs.len() });
    }
    for (j, row) in theta_pairs.iter().enumerate() {
        if row[j..].iter().any(|t| *t != 0.0) {
            return Err(SicError::Contract("pair angles must be strictly lower triangular (j > l)".into()));
        }
    }
    Ok(())
}

/// Single z-rotations with the given angles, as a profile.
pub fn single_spin_profile(reg: SpinRegister, theta_list: &[f64], sign: LogicalSign) -> Result<DiagonalPhaseProfile> {
    if theta_list.len() != reg.d as usize {
        return Err(SicError::DimensionMismatch { expected: reg.d as usize, found: theta_list.len() });
    }
    let a = sign.value();
    let phases = (0..reg.dim())
        .map(|k| -a * theta_list.iter().enumerate().map(|(l, t)| t * reg.magnetic(k, l as u32 + 1)).sum::<f64>())
        .collect();
    Ok(DiagonalPhaseProfile { phases, global: GlobalPhase::zero() })
}

/// `exp(-i beta a k^2)` up to the tracked global phase
/// `beta a sum_{j>=l} 2^{j+l-3}`.
pub fn quadratic_phase_propagator(reg: SpinRegister, beta: f64, sign: LogicalSign) -> DiagonalPhaseProfile {
    let a = sign.value();
    let phases = (0..reg.dim()).map(|k| -beta * a * (k * k) as f64).collect();
    DiagonalPhaseProfile { phases, global: GlobalPhase::new(quadratic_global_phase(reg, beta, sign)) }
}

pub fn quadratic_global_phase(reg: SpinRegister, beta: f64, sign: LogicalSign) -> f64 {
    let d = reg.d as i32;
    let mut s = 0.0;
    for j in 1..=d {
        for l in 1..=j {
            s += 2f64.powi(j + l - 3);
        }
    }
    beta * sign.value() * s
}

/// The same quadratic profile assembled from its elementary pieces.
pub fn quadratic_from_rotations(reg: SpinRegister, beta: f64, sign: LogicalSign) -> Result<DiagonalPhaseProfile> {
    let angles = SynthesisAngles::quadratic(reg, beta);
    let pairs = pair_coupling_propagator(reg, &angles.theta_pairs, sign)?;
    let singles = single_spin_profile(reg, &angles.theta_list, sign)?;
    pairs.compose(&singles)
}

/// Dense generator `sum theta_l I_lz + sum 2 theta_jl I_jz I_lz`.
pub fn explicit_generator(reg: SpinRegister, angles: &SynthesisAngles) -> Result<DenseOperator> {
    let mut g = DenseOperator::zeros(reg.dim());
    for (l, &t) in angles.theta_list.iter().enumerate() {
        if t != 0.0 {
            g = g.add(&reg.spin_operator(l as u32 + 1, Axis::Z)?.scale(C64::from(t)))?;
        }
    }
    for (j, row) in angles.theta_pairs.iter().enumerate() {
        for (l, &t) in row.iter().enumerate().take(j) {
            if t != 0.0 {
                let zz = reg.zz_product(&[j as u32 + 1, l as u32 + 1])?;
                g = g.add(&zz.scale(C64::from(2.0 * t)))?;
            }
        }
    }
    Ok(g)
}

/// Target and conjugator of the multi-spin reduction:
/// `exp(-i theta a 2^l I_{k1 z}...I_{k_{l+1} z}) = V exp(-i theta a I_{k_{l+1} z}) V^dagger`.
pub fn lomso_conjugation_reduce(
    reg: SpinRegister,
    spins: &[u32],
    theta: f64,
    sign: LogicalSign,
) -> Result<(DenseOperator, DenseOperator)> {
    let (&last, lower) = spins
        .split_last()
        .ok_or_else(|| SicError::Contract("need at least one spin index".into()))?;
    for (i, s) in spins.iter().enumerate() {
        reg.check_spin(*s)?;
        if spins[..i].contains(s) {
            return Err(SicError::Contract(format!("spin {s} repeated")));
        }
    }
    let l = lower.len() as i32;
    let a = sign.value();
    let generator = reg.zz_product(spins)?.scale(C64::from(2f64.powi(l)));
    let target = mat_exp(&generator, -I * theta * a)?;

    let y_last = reg.spin_operator(last, Axis::Y)?;
    let half_turn = mat_exp(&y_last, C64::new(0.0, -PI / 2.0))?;
    let mut conjugator = DenseOperator::identity(reg.dim());
    // V = V_{k_l} V_{k_{l-1}} ... V_{k_1}
    for &k in lower.iter().rev() {
        let zy = reg.spin_operator(k, Axis::Z)?.mul(&y_last)?;
        let v = mat_exp(&zy, C64::new(0.0, PI))?.mul(&half_turn)?;
        conjugator = conjugator.mul(&v)?;
    }
    Ok((target, conjugator.into_unitary()?))
}

/// Right-hand side of the reduction for a given conjugator.
pub fn lomso_rebuild(reg: SpinRegister, last: u32, theta: f64, sign: LogicalSign, conjugator: &DenseOperator) -> Result<DenseOperator> {
    let core = basic_sic_rotation(reg, last, Axis::Z, sign, theta)?;
    conjugator.mul(&core)?.mul(&conjugator.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reg(d: u32) -> SpinRegister {
        SpinRegister::new(d).unwrap()
    }

    #[test]
    fn rotation_examples() {
        let r = reg(1);
        let id = basic_sic_rotation(r, 1, Axis::X, LogicalSign::Plus, 0.0).unwrap();
        assert!(id.distance(&DenseOperator::identity(2)).unwrap() < 1e-15);
        let z = basic_sic_rotation(r, 1, Axis::Z, LogicalSign::Plus, PI).unwrap();
        assert!((z.get(0, 0) - cis(-PI / 2.0)).norm() < 1e-15);
        assert!((z.get(1, 1) - cis(PI / 2.0)).norm() < 1e-15);
        assert!(basic_sic_rotation(r, 2, Axis::Z, LogicalSign::Plus, 1.0).is_err());
    }

    #[test]
    fn sign_flip_gives_inverse_rotation() {
        let r = reg(3);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let p = basic_sic_rotation(r, 2, axis, LogicalSign::Plus, 0.77).unwrap();
            let m = basic_sic_rotation(r, 2, axis, LogicalSign::Minus, 0.77).unwrap();
            assert!(m.distance(&p.adjoint()).unwrap() < 1e-14);
        }
    }

    #[test]
    fn linear_two_spin_example() {
        let p = linear_phase_propagator(reg(2), PI / 4.0, LogicalSign::Plus);
        assert_relative_eq!(p.global.angle(), 3.0 * PI / 8.0, epsilon = 1e-15);
        assert_relative_eq!(p.total_phase(3), -3.0 * PI / 8.0, epsilon = 1e-15);
        assert_relative_eq!(p.total_phase(0), p.global.angle());
        let zero = linear_phase_propagator(reg(3), 0.0, LogicalSign::Minus);
        assert_eq!(zero, DiagonalPhaseProfile::identity(8));
    }

    #[test]
    fn linear_equals_tensor_of_rotations() {
        let r = reg(3);
        let alpha = 0.41;
        for sign in LogicalSign::both() {
            let angles = SynthesisAngles::linear(r, alpha);
            let mut u = DenseOperator::identity(8);
            for (l, t) in angles.theta_list.iter().enumerate() {
                u = u.mul(&basic_sic_rotation(r, l as u32 + 1, Axis::Z, sign, *t).unwrap()).unwrap();
            }
            let p = linear_phase_propagator(r, alpha, sign);
            assert!(p.max_entry_error(&u).unwrap() < 1e-14);
        }
    }

    #[test]
    fn pair_coupling_two_spin_example() {
        let pairs = vec![vec![0.0, 0.0], vec![PI, 0.0]];
        let p = pair_coupling_propagator(reg(2), &pairs, LogicalSign::Plus).unwrap();
        let expect = [-PI / 2.0, PI / 2.0, PI / 2.0, -PI / 2.0];
        for (got, want) in p.phases.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-15);
        }
        // bit complement symmetry
        for k in 0..4 {
            assert_relative_eq!(p.phases[k], p.phases[3 - k]);
        }
        let upper = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
        assert!(pair_coupling_propagator(reg(2), &upper, LogicalSign::Plus).is_err());
    }

    #[test]
    fn quadratic_two_spin_example() {
        let beta = 0.37;
        let p = quadratic_phase_propagator(reg(2), beta, LogicalSign::Plus);
        for (k, kk) in [0.0, 1.0, 4.0, 9.0].iter().enumerate() {
            assert_relative_eq!(p.phases[k] - p.phases[0], -beta * kk, epsilon = 1e-15);
        }
        assert_eq!(quadratic_phase_propagator(reg(4), 0.0, LogicalSign::Plus), DiagonalPhaseProfile::identity(16));
    }

    #[test]
    fn quadratic_matches_its_rotation_assembly() {
        for d in 2..=6 {
            for sign in LogicalSign::both() {
                let r = reg(d);
                let built = quadratic_from_rotations(r, 0.173, sign).unwrap();
                let closed = quadratic_phase_propagator(r, 0.173, sign);
                assert!(built.max_phase_distance(&closed).unwrap() < 1e-11, "d = {d}");
            }
        }
    }

    #[test]
    fn lomso_examples() {
        let r = reg(3);
        let (target, v) = lomso_conjugation_reduce(r, &[2], 0.4, LogicalSign::Plus).unwrap();
        assert!(v.distance(&DenseOperator::identity(8)).unwrap() < 1e-15);
        assert!(target.distance(&basic_sic_rotation(r, 2, Axis::Z, LogicalSign::Plus, 0.4).unwrap()).unwrap() < 1e-14);
        assert!(lomso_conjugation_reduce(r, &[1, 1], 0.4, LogicalSign::Plus).is_err());
        for spins in [vec![1, 2], vec![2, 1], vec![1, 3, 2], vec![3, 1, 2]] {
            for sign in LogicalSign::both() {
                let (target, v) = lomso_conjugation_reduce(r, &spins, 0.9, sign).unwrap();
                let rebuilt = lomso_rebuild(r, *spins.last().unwrap(), 0.9, sign, &v).unwrap();
                assert!(target.distance(&rebuilt).unwrap() < 1e-12, "spins {spins:?}");
            }
        }
    }

    #[test]
    fn exec_paths_agree() {
        let r = reg(6);
        let a = linear_phase_propagator_with(r, 0.3, LogicalSign::Minus, Exec::Sequential);
        let b = linear_phase_propagator_with(r, 0.3, LogicalSign::Minus, Exec::Parallel);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn profiles_match_brute_force(d in 2u32..=6, alpha in -2.0f64..2.0, beta in -1.0f64..1.0, plus in any::<bool>()) {
            let sign = if plus { LogicalSign::Plus } else { LogicalSign::Minus };
            let r = reg(d);
            let dim = r.dim() as f64;
            let lin = linear_phase_propagator(r, alpha, sign);
            let brute = mat_exp(&explicit_generator(r, &SynthesisAngles::linear(r, alpha)).unwrap(), -I * sign.value()).unwrap();
            prop_assert!(lin.max_entry_error(&brute).unwrap() <= 1e-10 * dim);
            let quad = quadratic_phase_propagator(r, beta, sign);
            let brute = mat_exp(&explicit_generator(r, &SynthesisAngles::quadratic(r, beta)).unwrap(), -I * sign.value()).unwrap();
            prop_assert!(quad.max_entry_error(&brute).unwrap() <= 1e-10 * dim);
        }

        #[test]
        fn linear_profiles_add(d in 2u32..8, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0) {
            let r = reg(d);
            let s = LogicalSign::Plus;
            let sum = linear_phase_propagator(r, a1, s).compose(&linear_phase_propagator(r, a2, s)).unwrap();
            prop_assert!(sum.max_phase_distance(&linear_phase_propagator(r, a1 + a2, s)).unwrap() < 1e-9);
        }

        #[test]
        fn quadratic_second_difference(d in 2u32..8, beta in -1.0f64..1.0, plus in any::<bool>()) {
            let sign = if plus { LogicalSign::Plus } else { LogicalSign::Minus };
            let p = quadratic_phase_propagator(reg(d), beta, sign);
            for k in 1..p.dim() - 1 {
                let second = p.phases[k + 1] - 2.0 * p.phases[k] + p.phases[k - 1];
                prop_assert!((second + 2.0 * beta * sign.value()).abs() <= 1e-12 * (1.0 + (k * k) as f64 * beta.abs()));
            }
        }

        #[test]
        fn sign_flip_conjugates_profiles(d in 2u32..7, beta in -1.0f64..1.0) {
            let r = reg(d);
            let p = quadratic_phase_propagator(r, beta, LogicalSign::Plus);
            let m = quadratic_phase_propagator(r, beta, LogicalSign::Minus);
            prop_assert!(p.inverse().max_phase_distance(&m).unwrap() < 1e-12);
        }
    }
}
