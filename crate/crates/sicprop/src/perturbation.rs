//! Interaction picture and Dyson iteration for sign-carrying propagators.

use nalgebra::DMatrix;

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::green_calculus::SicInterval;
use crate::hilbert_core::{hermitian_eigen, spectral_exp, DenseOperator, C64, I, STRUCTURE_TOL};
use crate::oscillator_basis::PhysicalParams;
use crate::path_integral::{free_step_matrix, LatticeConfig};
use crate::quadrature::Rule;
use crate::LogicalSign;

/// Nested quadrature cost grows as `points^order`.
pub const MAX_ORDER: usize = 3;

/// `H = H0 + lambda H1`, with `H0` diagonalized once.
#[derive(Debug, Clone)]
pub struct HamiltonianSplit {
    h0: DenseOperator,
    h1: DenseOperator,
    lambda: f64,
    hbar: f64,
    vals: Vec<f64>,
    vecs: DMatrix<C64>,
}

impl HamiltonianSplit {
    pub fn new(h0: DenseOperator, h1: DenseOperator, lambda: f64, hbar: f64) -> Result<Self> {
        if h0.dim() != h1.dim() {
            return Err(SicError::DimensionMismatch { expected: h0.dim(), found: h1.dim() });
        }
        for (name, h) in [("H0", &h0), ("H1", &h1)] {
            if h.hermiticity_defect() > STRUCTURE_TOL {
                return Err(SicError::Contract(format!("{name} is not Hermitian")));
            }
        }
        if !(hbar > 0.0) {
            return Err(SicError::Contract("hbar must be positive".into()));
        }
        let (vals, vecs) = hermitian_eigen(&h0)?;
        Ok(Self { h0, h1, lambda, hbar, vals, vecs })
    }

    pub fn h0(&self) -> &DenseOperator {
        &self.h0
    }

    /// `lambda H1`.
    pub fn perturbation(&self) -> DenseOperator {
        self.h1.scale(C64::from(self.lambda))
    }

    pub fn full(&self) -> DenseOperator {
        self.h0.add(&self.perturbation()).expect("dims checked at construction")
    }

    /// `exp(-i a H0 t / hbar)`.
    pub fn u0(&self, sign: LogicalSign, t: f64) -> DenseOperator {
        spectral_exp(&self.vals, &self.vecs, -I * sign.value() * t / self.hbar)
    }
}

/// `U0(t)^dagger (lambda H1) U0(t)`.
pub fn interaction_hamiltonian(split: &HamiltonianSplit, sign: LogicalSign, t: f64) -> DenseOperator {
    let u = split.u0(sign, t);
    let m = u.matrix().adjoint() * split.perturbation().matrix() * u.matrix();
    DenseOperator::from_matrix(m).expect("square")
}

/// `U(t) = U0(t) + c int_0^t U0(t - s) P U(s) ds`, iterated `order` times.
fn iterate(u0: &(dyn Fn(f64) -> DMatrix<C64> + Sync), pert: &DMatrix<C64>, c: C64, t: f64, order: usize, points: usize, exec: Exec) -> DMatrix<C64> {
    let base = u0(t);
    if order == 0 || t == 0.0 {
        return base;
    }
    let rule = Rule::new(0.0, t, points);
    let terms = exec.map_range(rule.len(), |i| {
        let s = rule.nodes[i];
        let inner = iterate(u0, pert, c, s, order - 1, points, Exec::Sequential);
        u0(t - s) * pert * inner * C64::from(rule.weights[i])
    });
    let integral = terms.into_iter().fold(DMatrix::zeros(base.nrows(), base.ncols()), |acc, m| acc + m);
    base + integral * c
}

fn check_order(order: usize, points: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(SicError::Capacity { requested: order, limit: MAX_ORDER });
    }
    if points == 0 {
        return Err(SicError::Contract("need at least one quadrature node".into()));
    }
    Ok(())
}

/// Order-`n` Dyson iterate of the propagator over time `t`.
pub fn dyson_iterate(split: &HamiltonianSplit, sign: LogicalSign, t: f64, order: usize, points: usize) -> Result<DenseOperator> {
    dyson_iterate_with(split, sign, t, order, points, Exec::default())
}

pub fn dyson_iterate_with(split: &HamiltonianSplit, sign: LogicalSign, t: f64, order: usize, points: usize, exec: Exec) -> Result<DenseOperator> {
    check_order(order, points)?;
    if !(t >= 0.0) {
        return Err(SicError::Contract(format!("time must be non-negative, got {t}")));
    }
    let u0 = |s: f64| split.u0(sign, s).into_matrix();
    let c = -I * sign.value() / split.hbar;
    let pert = split.perturbation().into_matrix();
    DenseOperator::from_matrix(iterate(&u0, &pert, c, t, order, points, exec))
}

/// Lattice kernel of `p^2/2m + h1(x)` by Dyson iteration around the free
/// circulant propagator. Entries are `K(x_i, x_j)` with `1/dx` applied.
pub fn green_perturbation_step(
    h1: impl Fn(f64) -> f64,
    interval: &SicInterval,
    params: &PhysicalParams,
    grid: &LatticeConfig,
    order: usize,
    points: usize,
) -> Result<DMatrix<C64>> {
    check_order(order, points)?;
    let a = interval.sign().value();
    let u0 = |s: f64| free_step_matrix(grid, params, a * s);
    let pert = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        grid.points,
        grid.nodes().into_iter().map(|x| C64::from(h1(x))),
    ));
    let c = -I * a / params.hbar;
    let prop = iterate(&u0, &pert, c, interval.t_m(), order, points, Exec::default());
    Ok(prop / C64::from(grid.dx()))
}
