//! A selective phase oracle tracked in two copies of the same register:
//! a physical vector marked at the solution and a mathematical vector
//! marked at a candidate. Only the physical copy is observable; the
//! overlap of the two is the quantity of interest.

use crate::error::{Result, SicError};
use crate::hilbert_core::{cis, tensor_all, DenseOperator, StateVector, C64};
use crate::LogicalSign;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    n_qubits: u32,
    solution: usize,
    candidate: usize,
    theta: f64,
}

impl OracleSpec {
    pub fn new(n_qubits: u32, solution: usize, candidate: usize, theta: f64) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 24 {
            return Err(SicError::Range(format!("qubit count {n_qubits} outside 1..=24")));
        }
        let dim = 1usize << n_qubits;
        if solution >= dim || candidate >= dim {
            return Err(SicError::Range(format!("indices ({solution}, {candidate}) outside [0, {dim})")));
        }
        if !theta.is_finite() {
            return Err(SicError::Contract("theta must be finite".into()));
        }
        Ok(Self { n_qubits, solution, candidate, theta })
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn n_qubits(&self) -> u32 {
        self.n_qubits
    }

    pub fn solution(&self) -> usize {
        self.solution
    }

    pub fn candidate(&self) -> usize {
        self.candidate
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn target(&self, which: Target) -> usize {
        match which {
            Target::Solution => self.solution,
            Target::Candidate => self.candidate,
        }
    }

    /// Per-qubit signs of the marked index, qubit 1 first: a clear bit
    /// gives `+1`, a set bit `-1`.
    pub fn sign_vector(&self, which: Target) -> Vec<LogicalSign> {
        let t = self.target(which);
        (0..self.n_qubits)
            .map(|b| if t >> b & 1 == 0 { LogicalSign::Plus } else { LogicalSign::Minus })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Solution,
    Candidate,
}

/// Rank-one projector onto the marked basis state, assembled as a tensor
/// product of single-qubit factors `E/2 + a I_z`.
pub fn oracle_diagonal(spec: &OracleSpec, which: Target) -> DenseOperator {
    let signs = spec.sign_vector(which);
    let factors: Vec<DenseOperator> = signs
        .iter()
        .rev()
        .map(|a| {
            let s = a.value();
            DenseOperator::real_diagonal(&[0.5 + 0.5 * s, 0.5 - 0.5 * s])
        })
        .collect();
    tensor_all(&factors).expect("OracleSpec bounds the register size")
}

/// `exp(-i theta D)`, which is the identity with `e^{-i theta}` at the mark.
pub fn oracle_propagator(spec: &OracleSpec, which: Target) -> DenseOperator {
    let mut diag = vec![C64::from(1.0); spec.dim()];
    diag[spec.target(which)] = cis(-spec.theta);
    DenseOperator::diagonal(&diag).into_unitary().expect("diagonal phases are unitary")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualAmplitudePair {
    physical: StateVector,
    math: StateVector,
}

impl DualAmplitudePair {
    pub fn new(physical: StateVector, math: StateVector) -> Result<Self> {
        if physical.dim() != math.dim() {
            return Err(SicError::DimensionMismatch { expected: physical.dim(), found: math.dim() });
        }
        for s in [&physical, &math] {
            if (s.norm() - 1.0).abs() > crate::hilbert_core::NORM_TOL {
                return Err(SicError::Contract("dual pair states must be normalized".into()));
            }
        }
        Ok(Self { physical, math })
    }

    /// Both copies start from the same state.
    pub fn shared(initial: StateVector) -> Result<Self> {
        Self::new(initial.clone(), initial)
    }

    pub fn physical(&self) -> &StateVector {
        &self.physical
    }

    /// The unobservable copy; exposed for overlap arithmetic and tests.
    pub fn math(&self) -> &StateVector {
        &self.math
    }

    pub fn dim(&self) -> usize {
        self.physical.dim()
    }

    /// Outcome probabilities, computed from the physical copy only.
    pub fn measurement_probabilities(&self) -> Vec<f64> {
        self.physical.amplitudes().iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Phases the physical copy at the solution and the math copy at the
/// candidate.
pub fn apply_oracle(pair: &DualAmplitudePair, spec: &OracleSpec) -> Result<DualAmplitudePair> {
    if pair.dim() != spec.dim() {
        return Err(SicError::DimensionMismatch { expected: spec.dim(), found: pair.dim() });
    }
    let mark = |s: &StateVector, idx: usize| -> Result<StateVector> {
        let mut amps = s.amplitudes().to_vec();
        amps[idx] *= cis(-spec.theta);
        StateVector::normalized(amps)
    };
    Ok(DualAmplitudePair {
        physical: mark(&pair.physical, spec.solution)?,
        math: mark(&pair.math, spec.candidate)?,
    })
}

/// `<physical|math>`.
pub fn overlap_integral(pair: &DualAmplitudePair) -> C64 {
    pair.physical.inner(&pair.math).expect("pair dims are equal by construction")
}

/// Closed-form overlap after one oracle on a shared start state, valid
/// when solution and candidate differ.
pub fn overlap_closed_form(initial: &StateVector, spec: &OracleSpec) -> Result<C64> {
    if spec.solution == spec.candidate {
        return Err(SicError::Contract("closed form assumes solution != candidate".into()));
    }
    if initial.dim() != spec.dim() {
        return Err(SicError::DimensionMismatch { expected: spec.dim(), found: initial.dim() });
    }
    let ax = initial.amplitudes()[spec.solution].norm_sqr();
    let as_ = initial.amplitudes()[spec.candidate].norm_sqr();
    let one = C64::from(1.0);
    Ok(one - (one - cis(spec.theta)) * ax - (one - cis(-spec.theta)) * as_)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use proptest::prelude::*;

    #[test]
    fn single_qubit_projector() {
        let spec = OracleSpec::new(1, 1, 0, 0.3).unwrap();
        let d = oracle_diagonal(&spec, Target::Candidate);
        assert_eq!(d, DenseOperator::real_diagonal(&[1.0, 0.0]));
    }

    #[test]
    fn zero_angle_oracle_is_identity() {
        let spec = OracleSpec::new(3, 2, 5, 0.0).unwrap();
        assert_eq!(oracle_propagator(&spec, Target::Solution), DenseOperator::identity(8));
    }

    #[test]
    fn uniform_four_state_overlap_vanishes_at_pi() {
        let spec = OracleSpec::new(2, 1, 3, PI).unwrap();
        let pair = DualAmplitudePair::shared(StateVector::uniform(4).unwrap()).unwrap();
        let out = apply_oracle(&pair, &spec).unwrap();
        assert!(overlap_integral(&out).norm() < 1e-15);
    }

    #[test]
    fn coinciding_marks_keep_copies_equal() {
        let spec = OracleSpec::new(3, 6, 6, 1.1).unwrap();
        let pair = DualAmplitudePair::shared(StateVector::uniform(8).unwrap()).unwrap();
        let out = apply_oracle(&pair, &spec).unwrap();
        assert_eq!(out.physical(), out.math());
    }

    #[test]
    fn pi_oracle_flips_marked_basis_state() {
        let spec = OracleSpec::new(2, 2, 0, PI).unwrap();
        let pair = DualAmplitudePair::shared(StateVector::basis(4, 2).unwrap()).unwrap();
        let out = apply_oracle(&pair, &spec).unwrap();
        assert!((out.physical().amplitudes()[2] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn vanishing_marked_amplitudes_give_unit_overlap() {
        let spec = OracleSpec::new(2, 0, 1, 0.8).unwrap();
        let pair = DualAmplitudePair::shared(StateVector::basis(4, 3).unwrap()).unwrap();
        let out = apply_oracle(&pair, &spec).unwrap();
        assert!((overlap_integral(&out) - 1.0).norm() < 1e-15);
    }

    #[test]
    fn measurement_reads_physical_copy() {
        let spec = OracleSpec::new(1, 0, 1, 0.5).unwrap();
        let pair = DualAmplitudePair::shared(StateVector::uniform(2).unwrap()).unwrap();
        let p = apply_oracle(&pair, &spec).unwrap().measurement_probabilities();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projector_is_idempotent(n in 1u32..6, t in 0usize..64) {
            let spec = OracleSpec::new(n, t % (1 << n), 0, 0.1).unwrap();
            let d = oracle_diagonal(&spec, Target::Solution);
            prop_assert_eq!(d.mul(&d).unwrap(), d.clone());
            prop_assert!((d.trace() - 1.0).norm() < 1e-15);
            let expect = oracle_propagator(&spec, Target::Solution);
            let brute = crate::hilbert_core::mat_exp(&d, C64::new(0.0, -0.1)).unwrap();
            prop_assert!(brute.distance(&expect).unwrap() < 1e-13);
        }

        #[test]
        fn overlap_matches_closed_form(
            n in 1u32..8,
            x in 0usize..256,
            s in 0usize..256,
            theta in -6.3f64..6.3,
            re in prop::collection::vec(-1.0f64..1.0, 256),
            im in prop::collection::vec(-1.0f64..1.0, 256),
        ) {
            let dim = 1usize << n;
            let (x, s) = (x % dim, s % dim);
            prop_assume!(x != s);
            let amps: Vec<C64> = (0..dim).map(|j| C64::new(re[j], im[j])).collect();
            let init = StateVector::normalize(amps).unwrap();
            let spec = OracleSpec::new(n, x, s, theta).unwrap();
            let out = apply_oracle(&DualAmplitudePair::shared(init.clone()).unwrap(), &spec).unwrap();
            let measured = overlap_integral(&out);
            prop_assert!((measured - overlap_closed_form(&init, &spec).unwrap()).norm() < 1e-12);
        }

        #[test]
        fn oracle_sequences_commute(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0, a in 0usize..8, b in 0usize..8) {
            let s1 = OracleSpec::new(3, a, b, t1).unwrap();
            let s2 = OracleSpec::new(3, b, a, t2).unwrap();
            let pair = DualAmplitudePair::shared(StateVector::uniform(8).unwrap()).unwrap();
            let one = apply_oracle(&apply_oracle(&pair, &s1).unwrap(), &s2).unwrap();
            let two = apply_oracle(&apply_oracle(&pair, &s2).unwrap(), &s1).unwrap();
            prop_assert!(one.physical().distance(two.physical()).unwrap() < 1e-12);
            prop_assert!(one.math().distance(two.math()).unwrap() < 1e-12);
        }
    }
}
