//! One-dimensional eigenbases (harmonic oscillator and infinite square
//! well), expansions of wavefunctions in them, and Fock-space matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::hilbert_core::{cis, DenseOperator, C64, I};
use crate::quadrature::Rule;
use crate::LogicalSign;

/// Highest harmonic level evaluated by the Hermite recurrence.
pub const HERMITE_CAP: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self { mass: 1.0, omega: 1.0, hbar: 1.0 }
    }
}

impl PhysicalParams {
    pub fn new(mass: f64, omega: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0 && omega > 0.0 && hbar > 0.0) || !(mass * omega * hbar).is_finite() {
            return Err(SicError::Contract(format!("m, omega, hbar must be positive, got ({mass}, {omega}, {hbar})")));
        }
        Ok(Self { mass, omega, hbar })
    }

    /// `alpha^2 = m omega / hbar`.
    pub fn alpha_sq(&self) -> f64 {
        self.mass * self.omega / self.hbar
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_sq().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisKind {
    Harmonic,
    SquareWell { x_min: f64, width: f64 },
}

/// Level `k` (0-based, increasing energy) of a 1-D eigenproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSystem {
    pub kind: BasisKind,
    pub params: PhysicalParams,
}

pub fn harmonic_eigensystem(params: PhysicalParams) -> EigenSystem {
    EigenSystem { kind: BasisKind::Harmonic, params }
}

/// Walls at `x_min` and `x_min + width`. Level `k` has quantum number `k + 1`.
pub fn square_well_eigensystem(params: PhysicalParams, x_min: f64, width: f64) -> Result<EigenSystem> {
    if !(width > 0.0) || !x_min.is_finite() {
        return Err(SicError::Contract(format!("well width must be positive, got {width}")));
    }
    Ok(EigenSystem { kind: BasisKind::SquareWell { x_min, width }, params })
}

impl EigenSystem {
    pub fn cap(&self) -> usize {
        match self.kind {
            BasisKind::Harmonic => HERMITE_CAP,
            BasisKind::SquareWell { .. } => usize::MAX / 2,
        }
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k > self.cap() {
            return Err(SicError::Range(format!("level {k} beyond the stability cap {}", self.cap())));
        }
        Ok(())
    }

    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        self.check_level(k)?;
        let p = self.params;
        Ok(match self.kind {
            BasisKind::Harmonic => (k as f64 + 0.5) * p.hbar * p.omega,
            BasisKind::SquareWell { width, .. } => {
                let n = (k + 1) as f64;
                n * n * PI * PI * p.hbar * p.hbar / (2.0 * p.mass * width * width)
            }
        })
    }

    pub fn eigenfunction(&self, k: usize, x: f64) -> Result<f64> {
        self.check_level(k)?;
        Ok(self.eigenfunctions(k + 1, x)?[k])
    }

    /// `u_0(x), ..., u_{count-1}(x)` in one pass.
    pub fn eigenfunctions(&self, count: usize, x: f64) -> Result<Vec<f64>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        self.check_level(count - 1)?;
        let mut out = vec![0.0; count];
        match self.kind {
            BasisKind::Harmonic => {
                let alpha = self.params.alpha();
                let xi = alpha * x;
                out[0] = (alpha / PI.sqrt()).sqrt() * (-0.5 * xi * xi).exp();
                if count > 1 {
                    out[1] = 2f64.sqrt() * xi * out[0];
                }
                for k in 1..count - 1 {
                    let kf = k as f64;
                    out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
                }
            }
            BasisKind::SquareWell { x_min, width } => {
                let y = x - x_min;
                if (0.0..=width).contains(&y) {
                    let norm = (2.0 / width).sqrt();
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = norm * ((k + 1) as f64 * PI * y / width).sin();
                    }
                }
            }
        }
        Ok(out)
    }

    /// Integration window that holds the first `count` levels.
    pub fn default_window(&self, count: usize) -> (f64, f64) {
        match self.kind {
            BasisKind::Harmonic => {
                let half = (2.0 * count as f64 + 1.0).sqrt().max(8.0) + 8.0;
                let x = half / self.params.alpha();
                (-x, x)
            }
            BasisKind::SquareWell { x_min, width } => (x_min, x_min + width),
        }
    }
}

/// Coefficients `B_k` of a state in an eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionState {
    basis: EigenSystem,
    coeffs: Vec<C64>,
}

impl ExpansionState {
    pub fn from_coeffs(basis: EigenSystem, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(SicError::Contract("expansion needs at least one coefficient".into()));
        }
        let total: f64 = coeffs.iter().map(|b| b.norm_sqr()).sum();
        if total > 1.0 + 1e-10 {
            return Err(SicError::Contract(format!("sum |B_k|^2 = {total} exceeds 1")));
        }
        if coeffs.len() > basis.cap() + 1 {
            return Err(SicError::Range(format!("{} levels exceed the basis cap", coeffs.len())));
        }
        Ok(Self { basis, coeffs })
    }

    pub fn basis(&self) -> &EigenSystem {
        &self.basis
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|b| b.norm_sqr()).sum()
    }

    /// `sqrt(sum_{k >= l} |B_k|^2)`, summed from the top for accuracy.
    pub fn residual_norm(&self, l: usize) -> Result<f64> {
        if l > self.l_max() {
            return Err(SicError::Range(format!("cut {l} beyond stored length {}", self.l_max())));
        }
        Ok(self.coeffs[l..].iter().rev().map(|b| b.norm_sqr()).sum::<f64>().sqrt())
    }

    /// `sum_k B_k u_k(x)`.
    pub fn reconstruct(&self, x: f64) -> Result<C64> {
        let u = self.basis.eigenfunctions(self.l_max(), x)?;
        Ok(self.coeffs.iter().zip(&u).map(|(b, u)| b * u).sum())
    }

    /// Drops levels at and above `l`.
    pub fn truncated(&self, l: usize) -> Self {
        Self { basis: self.basis, coeffs: self.coeffs[..l.min(self.l_max())].to_vec() }
    }
}

/// `B_k = int u_k psi dx` on the basis's default window.
pub fn expand_state(psi: impl Fn(f64) -> C64 + Sync, basis: &EigenSystem, count: usize) -> Result<ExpansionState> {
    expand_state_on(psi, basis, count, basis.default_window(count), Exec::default())
}

/// Composite Gauss-Legendre with panel doubling until the coefficients
/// settle to `1e-13`.
pub fn expand_state_on(
    psi: impl Fn(f64) -> C64 + Sync,
    basis: &EigenSystem,
    count: usize,
    window: (f64, f64),
    exec: Exec,
) -> Result<ExpansionState> {
    if count == 0 {
        return Err(SicError::Contract("need at least one level".into()));
    }
    basis.check_level(count - 1)?;
    let project = |panels: usize| -> Result<Vec<C64>> {
        let rule = Rule::composite(window.0, window.1, 48, panels);
        let parts = exec.map_range(rule.len(), |i| {
            let x = rule.nodes[i];
            let f = psi(x) * rule.weights[i];
            basis.eigenfunctions(count, x).map(|u| u.into_iter().map(|u| f * u).collect::<Vec<_>>())
        });
        let mut acc = vec![C64::from(0.0); count];
        for part in parts {
            for (a, p) in acc.iter_mut().zip(part?) {
                *a += p;
            }
        }
        Ok(acc)
    };
    let mut panels = 8;
    let mut prev = project(panels)?;
    let mut change = f64::INFINITY;
    while panels <= 512 {
        panels *= 2;
        let next = project(panels)?;
        change = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prev = next;
        if change < 1e-13 {
            let state = ExpansionState { basis: *basis, coeffs: prev };
            if state.norm_sq() > 1.0 + 1e-8 {
                return Err(SicError::Accuracy { what: "expansion norm exceeds input norm".into(), achieved: state.norm_sq() });
            }
            return Ok(state);
        }
    }
    Err(SicError::Accuracy { what: "expansion coefficients did not settle".into(), achieved: change })
}

/// Multiplies each `B_k` by `exp(-i a E_k t / hbar)`.
pub fn eigensum_evolution(state: &ExpansionState, sign: LogicalSign, t: f64) -> Result<ExpansionState> {
    let a = sign.value();
    let hbar = state.basis.params.hbar;
    let coeffs = state
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, b)| Ok(b * cis(-a * state.basis.eigenvalue(k)? * t / hbar)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExpansionState { basis: state.basis, coeffs })
}

/// Displacement that turns the ground state into the coherent state with
/// real amplitude `beta`.
pub fn coherent_displacement(params: &PhysicalParams, beta: f64) -> f64 {
    2f64.sqrt() * beta / params.alpha()
}

/// Ground state shifted to `x_d = sqrt(2) beta / alpha`.
pub fn coherent_wavefunction(params: PhysicalParams, beta: f64) -> impl Fn(f64) -> C64 + Sync {
    let basis = harmonic_eigensystem(params);
    let shift = coherent_displacement(&params, beta);
    move |x| C64::from(basis.eigenfunction(0, x - shift).unwrap_or(0.0))
}

/// Truncated lowering operator on `n` levels.
pub fn ladder_lowering(n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |r, c| if c == r + 1 { C64::from((c as f64).sqrt()) } else { C64::from(0.0) })
}

/// `x = (a + a^dagger) / (sqrt(2) alpha)`, truncated to `n` levels.
pub fn fock_position(params: &PhysicalParams, n: usize) -> DenseOperator {
    let a = ladder_lowering(n);
    let m = (&a + a.adjoint()) * C64::from(1.0 / (2f64.sqrt() * params.alpha()));
    DenseOperator::from_matrix(m).expect("square")
}

/// `p = i hbar alpha (a^dagger - a) / sqrt(2)`, truncated to `n` levels.
pub fn fock_momentum(params: &PhysicalParams, n: usize) -> DenseOperator {
    let a = ladder_lowering(n);
    let m = (a.adjoint() - &a) * (I * params.hbar * params.alpha() / 2f64.sqrt());
    DenseOperator::from_matrix(m).expect("square")
}

/// `diag((k + 1/2) hbar omega)`.
pub fn fock_hamiltonian(params: &PhysicalParams, n: usize) -> DenseOperator {
    let d: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * params.hbar * params.omega).collect();
    DenseOperator::real_diagonal(&d)
}
