//! Dense complex linear algebra: operators, states, Kronecker products,
//! Hermitian matrix exponentials and phase-blind comparisons.
//!
//! Everything here doubles as the brute-force reference that the
//! structured constructions elsewhere in the crate are checked against.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Result, SicError};

/// Largest dimension `tensor` will build unless told otherwise.
pub const DEFAULT_MAX_DIM: usize = 1 << 20;
/// Relative tolerance (per unit dimension) for unitarity and Hermiticity.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Absolute tolerance on the norm of a state flagged as normalized.
pub const NORM_TOL: f64 = 1e-12;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// An overall phase angle kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPhase(f64);

impl GlobalPhase {
    pub fn new(angle: f64) -> Self {
        Self(canonical_angle(angle))
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn angle(self) -> f64 {
        self.0
    }

    pub fn factor(self) -> C64 {
        cis(self.0)
    }

}

impl std::ops::Add for GlobalPhase {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self::new(self.0 + other.0)
    }
}

impl std::ops::Neg for GlobalPhase {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.0)
    }
}

/// Map an angle into (-pi, pi].
pub fn canonical_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Distance between two angles on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    canonical_angle(a - b).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
    normalized: bool,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(SicError::Contract("state dimension must be at least 1".into()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SicError::Contract("state amplitudes must be finite".into()));
        }
        Ok(Self { amps: DVector::from_vec(amps), normalized: false })
    }

    /// Builds a state and asserts it is normalized.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(amps)?;
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(SicError::Contract(format!("state norm {n} is not 1")));
        }
        s.normalized = true;
        Ok(s)
    }

    /// Rescales to unit norm.
    pub fn normalize(amps: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(amps)?;
        let n = s.norm();
        if n == 0.0 {
            return Err(SicError::Contract("cannot normalize the zero vector".into()));
        }
        s.amps /= C64::from(n);
        s.normalized = true;
        Ok(s)
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(SicError::Range(format!("basis index {k} outside dim {dim}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[k] = C64::new(1.0, 0.0);
        Self::normalized(v)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        let a = C64::from(1.0 / (dim as f64).sqrt());
        Self::normalize(vec![a; dim])
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn scaled(&self, z: C64) -> StateVector {
        let normalized = self.normalized && (z.norm() - 1.0).abs() <= NORM_TOL;
        StateVector { amps: &self.amps * z, normalized }
    }

    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.amps - &other.amps).norm())
    }

    fn from_dvector(amps: DVector<C64>, normalized: bool) -> Self {
        Self { amps, normalized }
    }
}

/// A square complex matrix, optionally tagged unitary, with an optional
/// global factor that has been pulled out of the entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    mat: DMatrix<C64>,
    unitary: bool,
    phase_log: Option<C64>,
}

impl DenseOperator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(SicError::Contract(format!(
                "operator must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat, unitary: false, phase_log: None })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim), unitary: true, phase_log: None }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: DMatrix::zeros(dim, dim), unitary: false, phase_log: None }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let v = DVector::from_column_slice(entries);
        Self { mat: DMatrix::from_diagonal(&v), unitary: false, phase_log: None }
    }

    pub fn real_diagonal(entries: &[f64]) -> Self {
        let c: Vec<C64> = entries.iter().map(|&x| C64::from(x)).collect();
        Self::diagonal(&c)
    }

    /// Tags the operator as unitary after checking it.
    pub fn into_unitary(mut self) -> Result<Self> {
        let tol = STRUCTURE_TOL * self.dim() as f64;
        let defect = unitarity_defect(&self);
        if defect > tol {
            return Err(SicError::Contract(format!("unitarity defect {defect:.3e} exceeds {tol:.3e}")));
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn phase_log(&self) -> Option<C64> {
        self.phase_log
    }

    /// Records a global factor that the entries omit.
    pub fn with_phase_log(mut self, factor: C64) -> Self {
        self.phase_log = Some(self.phase_log.map_or(factor, |p| p * factor));
        self
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
            unitary: self.unitary,
            phase_log: self.phase_log.map(|p| p.conj()),
        }
    }

    pub fn mul(&self, rhs: &DenseOperator) -> Result<Self> {
        check_dims(self.dim(), rhs.dim())?;
        let phase_log = match (self.phase_log, rhs.phase_log) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(C64::from(1.0)) * b.unwrap_or(C64::from(1.0))),
        };
        Ok(Self { mat: &self.mat * &rhs.mat, unitary: self.unitary && rhs.unitary, phase_log })
    }

    pub fn sub(&self, rhs: &DenseOperator) -> Result<Self> {
        check_dims(self.dim(), rhs.dim())?;
        Ok(Self { mat: &self.mat - &rhs.mat, unitary: false, phase_log: None })
    }

    pub fn add(&self, rhs: &DenseOperator) -> Result<Self> {
        check_dims(self.dim(), rhs.dim())?;
        Ok(Self { mat: &self.mat + &rhs.mat, unitary: false, phase_log: None })
    }

    pub fn scale(&self, z: C64) -> Self {
        let unitary = self.unitary && (z.norm() - 1.0).abs() <= NORM_TOL;
        Self { mat: &self.mat * z, unitary, phase_log: self.phase_log }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dims(self.dim(), psi.dim())?;
        let out = &self.mat * psi.as_vector();
        Ok(StateVector::from_dvector(out, psi.is_normalized() && self.unitary))
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.norm()
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DenseOperator) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.mat - &other.mat).norm())
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `||A - A^dagger||_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.mat - self.mat.adjoint()).norm()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|r| (0..n).all(|c| r == c || self.mat[(r, c)].norm() <= tol))
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        self.mat.diagonal().iter().copied().collect()
    }

    /// Square sub-block on the index range `[start, start + len)`.
    pub fn block(&self, start: usize, len: usize) -> DMatrix<C64> {
        self.mat.view((start, start), (len, len)).into_owned()
    }

    /// `A B - B A`.
    pub fn commutator(&self, other: &DenseOperator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
            unitary: false,
            phase_log: None,
        })
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SicError::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Kronecker product with `a` as the more significant factor:
/// index `j = j_a * dim_b + j_b`.
pub fn tensor(a: &DenseOperator, b: &DenseOperator) -> Result<DenseOperator> {
    tensor_with_limit(a, b, DEFAULT_MAX_DIM)
}

pub fn tensor_with_limit(a: &DenseOperator, b: &DenseOperator, max_dim: usize) -> Result<DenseOperator> {
    let dim = a
        .dim()
        .checked_mul(b.dim())
        .filter(|&d| d <= max_dim)
        .ok_or(SicError::Capacity { requested: a.dim().saturating_mul(b.dim()), limit: max_dim })?;
    debug_assert!(dim >= 1);
    let phase_log = match (a.phase_log, b.phase_log) {
        (None, None) => None,
        (x, y) => Some(x.unwrap_or(C64::from(1.0)) * y.unwrap_or(C64::from(1.0))),
    };
    Ok(DenseOperator { mat: a.mat.kronecker(&b.mat), unitary: a.unitary && b.unitary, phase_log })
}

/// Kronecker product of a list, first factor most significant.
pub fn tensor_all(factors: &[DenseOperator]) -> Result<DenseOperator> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| SicError::Contract("tensor of an empty list".into()))?;
    rest.iter().try_fold(first.clone(), |acc, f| tensor(&acc, f))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
pub fn hermitian_eigen(h: &DenseOperator) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let tol = STRUCTURE_TOL * h.dim() as f64 * h.frobenius().max(1.0);
    let defect = h.hermiticity_defect();
    if defect > tol {
        return Err(SicError::Contract(format!("operator is not Hermitian (defect {defect:.3e})")));
    }
    // Symmetrize before the decomposition so roundoff in the input does not leak.
    let sym = (h.matrix() + h.matrix().adjoint()) * C64::from(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(h.dim(), h.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

/// `exp(scale * H)` for Hermitian `H`, through its eigendecomposition.
pub fn mat_exp(h: &DenseOperator, scale: C64) -> Result<DenseOperator> {
    let (vals, vecs) = hermitian_eigen(h)?;
    Ok(spectral_exp(&vals, &vecs, scale))
}

/// Rebuilds `V diag(exp(scale * e)) V^dagger` from a stored decomposition.
pub fn spectral_exp(vals: &[f64], vecs: &DMatrix<C64>, scale: C64) -> DenseOperator {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (c, &e) in vals.iter().enumerate() {
        let f = (scale * e).exp();
        for r in 0..n {
            scaled[(r, c)] *= f;
        }
    }
    let mat = scaled * vecs.adjoint();
    let unitary = scale.re == 0.0;
    DenseOperator { mat, unitary, phase_log: None }
}

/// `|<a|b>|` for two normalized states.
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    for s in [a, b] {
        if (s.norm() - 1.0).abs() > 1e-9 {
            return Err(SicError::Contract(format!("fidelity needs normalized states, got norm {}", s.norm())));
        }
    }
    Ok(a.inner(b)?.norm().min(1.0))
}

/// `||U^dagger U - I||_F`.
pub fn unitarity_defect(u: &DenseOperator) -> f64 {
    let n = u.dim();
    (u.matrix().adjoint() * u.matrix() - DMatrix::<C64>::identity(n, n)).norm()
}

/// Basis map `e_j -> phases[j] * e_{perm[j]}`.
///
/// Products of pair swaps and diagonal phases stay in this class, which
/// lets composite-space transfers run far beyond dense sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialOperator {
    perm: Vec<usize>,
    phases: Vec<C64>,
}

impl MonomialOperator {
    pub fn identity(dim: usize) -> Self {
        Self { perm: (0..dim).collect(), phases: vec![C64::from(1.0); dim] }
    }

    pub fn diagonal(phases: Vec<C64>) -> Self {
        Self { perm: (0..phases.len()).collect(), phases }
    }

    pub fn new(perm: Vec<usize>, phases: Vec<C64>) -> Result<Self> {
        if perm.len() != phases.len() {
            return Err(SicError::DimensionMismatch { expected: perm.len(), found: phases.len() });
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(SicError::Contract("monomial map is not a permutation".into()));
            }
        }
        Ok(Self { perm, phases })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Image index and factor of basis vector `j`.
    pub fn image(&self, j: usize) -> (usize, C64) {
        (self.perm[j], self.phases[j])
    }

    /// `self * rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &MonomialOperator) -> Result<Self> {
        check_dims(self.dim(), rhs.dim())?;
        let (perm, phases) = (0..rhs.dim())
            .map(|j| {
                let (k, z) = rhs.image(j);
                let (l, w) = self.image(k);
                (l, w * z)
            })
            .unzip();
        Ok(Self { perm, phases })
    }

    pub fn adjoint(&self) -> Self {
        let mut perm = vec![0; self.dim()];
        let mut phases = vec![C64::from(0.0); self.dim()];
        for j in 0..self.dim() {
            let (k, z) = self.image(j);
            perm[k] = j;
            phases[k] = z.conj();
        }
        Self { perm, phases }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { perm: self.perm.clone(), phases: self.phases.iter().map(|&p| p * z).collect() }
    }

    pub fn apply_slice(&self, psi: &[C64]) -> Result<Vec<C64>> {
        check_dims(self.dim(), psi.len())?;
        let mut out = vec![C64::from(0.0); psi.len()];
        for (j, &a) in psi.iter().enumerate() {
            out[self.perm[j]] += self.phases[j] * a;
        }
        Ok(out)
    }

    /// Gather form of `apply_slice`, split across threads when allowed.
    pub fn apply_slice_with(&self, psi: &[C64], exec: crate::exec::Exec) -> Result<Vec<C64>> {
        check_dims(self.dim(), psi.len())?;
        let mut source = vec![0usize; self.dim()];
        for (j, &p) in self.perm.iter().enumerate() {
            source[p] = j;
        }
        Ok(exec.map_range(self.dim(), |i| {
            let j = source[i];
            self.phases[j] * psi[j]
        }))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let out = self.apply_slice(psi.amplitudes())?;
        Ok(StateVector::from_dvector(DVector::from_vec(out), psi.is_normalized() && self.is_unitary()))
    }

    /// All factors have unit modulus.
    pub fn is_unitary(&self) -> bool {
        self.phases.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12)
    }

    /// `I_left (x) self (x) I_right`.
    pub fn embed(&self, left: usize, right: usize) -> Self {
        let d = self.dim();
        let total = left * d * right;
        let mut perm = Vec::with_capacity(total);
        let mut phases = Vec::with_capacity(total);
        for l in 0..left {
            for j in 0..d {
                for r in 0..right {
                    perm.push((l * d + self.perm[j]) * right + r);
                    phases.push(self.phases[j]);
                }
            }
        }
        Self { perm, phases }
    }

    pub fn to_dense(&self) -> DenseOperator {
        let n = self.dim();
        let mut mat = DMatrix::zeros(n, n);
        for j in 0..n {
            mat[(self.perm[j], j)] = self.phases[j];
        }
        DenseOperator { mat, unitary: self.is_unitary(), phase_log: None }
    }

    /// Largest entrywise deviation from a dense operator of the same size.
    pub fn max_deviation(&self, dense: &DenseOperator) -> Result<f64> {
        check_dims(self.dim(), dense.dim())?;
        Ok((&self.to_dense().mat - dense.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

/// Spin-1/2 operators `I_x, I_y, I_z` (half Pauli matrices) in the basis
/// `|m=+1/2>, |m=-1/2>`.
pub fn spin_half(axis: Axis) -> DenseOperator {
    let z = C64::from(0.0);
    let h = C64::from(0.5);
    let m = match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[z, h, h, z]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[z, -I * 0.5, I * 0.5, z]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
    };
    DenseOperator { mat: m, unitary: false, phase_log: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::from(re)
    }

    fn random_hermitian(dim: usize, seed: &[f64]) -> DenseOperator {
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        let mut it = seed.iter().cycle();
        for r in 0..dim {
            for col in r..dim {
                let re = *it.next().unwrap();
                let im = if r == col { 0.0 } else { *it.next().unwrap() };
                m[(r, col)] = C64::new(re, im);
                m[(col, r)] = C64::new(re, -im);
            }
        }
        DenseOperator::from_matrix(m).unwrap()
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let t = tensor(&DenseOperator::identity(2), &DenseOperator::identity(2)).unwrap();
        assert_eq!(t, DenseOperator::identity(4));
    }

    #[test]
    fn tensor_puts_first_factor_high() {
        let t = tensor(&DenseOperator::real_diagonal(&[1.0, -1.0]), &DenseOperator::identity(2)).unwrap();
        let d: Vec<f64> = t.diagonal_entries().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn tensor_of_swaps_sends_e0_to_e3() {
        let swap = DenseOperator::from_matrix(DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])).unwrap();
        let t = tensor(&swap, &swap).unwrap();
        let out = t.apply(&StateVector::basis(4, 0).unwrap()).unwrap();
        assert_eq!(out.amplitudes()[3], c(1.0));
    }

    #[test]
    fn tensor_refuses_oversized_products() {
        let a = DenseOperator::identity(4);
        let err = tensor_with_limit(&a, &a, 8).unwrap_err();
        assert!(matches!(err, SicError::Capacity { requested: 16, limit: 8 }));
    }

    #[test]
    fn mat_exp_of_zero_is_identity() {
        let e = mat_exp(&DenseOperator::zeros(3), C64::new(0.3, -1.0)).unwrap();
        assert!(e.distance(&DenseOperator::identity(3)).unwrap() < 1e-15);
    }

    #[test]
    fn mat_exp_of_iz_rotation() {
        let e = mat_exp(&DenseOperator::real_diagonal(&[0.5, -0.5]), -I * PI).unwrap();
        assert!(e.is_unitary());
        assert!((e.get(0, 0) - cis(-PI / 2.0)).norm() < 1e-15);
        assert!((e.get(1, 1) - cis(PI / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn mat_exp_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let h = DenseOperator::from_matrix(m).unwrap();
        assert!(matches!(mat_exp(&h, I), Err(SicError::Contract(_))));
    }

    #[test]
    fn unitarity_defect_of_scaled_identity() {
        assert_eq!(unitarity_defect(&DenseOperator::identity(5)), 0.0);
        let two = DenseOperator::identity(2).scale(c(2.0));
        assert_relative_eq!(unitarity_defect(&two), 3.0 * 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn fidelity_basics() {
        let a = StateVector::uniform(4).unwrap();
        assert_relative_eq!(fidelity_up_to_phase(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        let b = a.scaled(cis(1.234));
        assert_relative_eq!(fidelity_up_to_phase(&a, &b).unwrap(), 1.0, epsilon = 1e-15);
        let e0 = StateVector::basis(2, 0).unwrap();
        let e1 = StateVector::basis(2, 1).unwrap();
        assert_eq!(fidelity_up_to_phase(&e0, &e1).unwrap(), 0.0);
        assert!(fidelity_up_to_phase(&e0, &a).is_err());
    }

    #[test]
    fn global_phase_canonical_range() {
        assert_relative_eq!(GlobalPhase::new(3.0 * PI).angle(), PI, epsilon = 1e-12);
        assert_relative_eq!(GlobalPhase::new(-PI).angle(), PI, epsilon = 1e-12);
        assert_relative_eq!(GlobalPhase::new(2.5 * PI).angle(), 0.5 * PI, epsilon = 1e-12);
    }

    #[test]
    fn monomial_round_trip_matches_dense() {
        let a = MonomialOperator::new(vec![2, 0, 1], vec![cis(0.1), cis(0.2), cis(0.3)]).unwrap();
        let b = MonomialOperator::new(vec![1, 2, 0], vec![cis(-0.4), c(1.0), cis(0.7)]).unwrap();
        let ab = a.compose(&b).unwrap().to_dense();
        let dense = a.to_dense().mul(&b.to_dense()).unwrap();
        assert!(ab.distance(&dense).unwrap() < 1e-15);
        let adj = a.adjoint().to_dense();
        assert!(adj.distance(&a.to_dense().adjoint()).unwrap() < 1e-15);
        let emb = a.embed(2, 3).to_dense();
        let kron = tensor_all(&[DenseOperator::identity(2), a.to_dense(), DenseOperator::identity(3)]).unwrap();
        assert!(emb.distance(&kron).unwrap() < 1e-15);
    }

    #[test]
    fn monomial_rejects_repeated_targets() {
        assert!(MonomialOperator::new(vec![0, 0], vec![c(1.0); 2]).is_err());
    }

    proptest! {
        #[test]
        fn tensor_is_associative(n in prop::collection::vec(-64i32..64, 12)) {
            // small integers keep every product exact, so equality is bitwise
            let x: Vec<f64> = n.iter().map(|&v| v as f64 / 8.0).collect();
            let a = random_hermitian(2, &x[0..4]);
            let b = random_hermitian(3, &x[3..9]);
            let cc = random_hermitian(2, &x[6..12]);
            let left = tensor(&tensor(&a, &b).unwrap(), &cc).unwrap();
            let right = tensor(&a, &tensor(&b, &cc).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }

        #[test]
        fn propagator_commutes_with_generator(x in prop::collection::vec(-3.0f64..3.0, 16), t in -5.0f64..5.0) {
            let h = random_hermitian(4, &x);
            let u = mat_exp(&h, -I * t).unwrap();
            prop_assert!(u.commutator(&h).unwrap().frobenius() <= 1e-10);
            prop_assert!(unitarity_defect(&u) <= 1e-10 * 4.0);
            let back = mat_exp(&h, I * t).unwrap();
            prop_assert!(u.mul(&back).unwrap().distance(&DenseOperator::identity(4)).unwrap() <= 1e-12);
        }

        #[test]
        fn fidelity_is_symmetric_and_phase_blind(
            re in prop::collection::vec(-1.0f64..1.0, 6),
            im in prop::collection::vec(-1.0f64..1.0, 6),
            p in -4.0f64..4.0,
            q in -4.0f64..4.0,
        ) {
            let a: Vec<C64> = re.iter().zip(&im).map(|(&r, &i)| C64::new(r, i)).collect();
            let b: Vec<C64> = re.iter().rev().zip(&im).map(|(&r, &i)| C64::new(i + 0.1, r)).collect();
            let a = StateVector::normalize(a).unwrap();
            let b = StateVector::normalize(b).unwrap();
            let f = fidelity_up_to_phase(&a, &b).unwrap();
            prop_assert!((f - fidelity_up_to_phase(&b, &a).unwrap()).abs() < 1e-14);
            let g = fidelity_up_to_phase(&a.scaled(cis(p)), &b.scaled(cis(q))).unwrap();
            prop_assert!((f - g).abs() < 1e-14);
        }
    }
}
