//! Lattice realization of the sign-carrying path integral and the two
//! midpoint schedules for time-dependent Hamiltonians.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::green_calculus::{GaussianPacket, SicInterval};
use crate::hilbert_core::{mat_exp, DenseOperator, C64, I, STRUCTURE_TOL};
use crate::oscillator_basis::PhysicalParams;
use crate::LogicalSign;

pub const MIN_POINTS: usize = 64;
const UNITARITY_LIMIT: f64 = 1e-3;
const TAIL_LIMIT: f64 = 1e-12;

/// Periodic grid `x_i = x_min + i dx`, `dx = (x_max - x_min) / points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    pub slices: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
}

impl LatticeConfig {
    pub fn new(slices: usize, x_min: f64, x_max: f64, points: usize) -> Result<Self> {
        if slices == 0 {
            return Err(SicError::Contract("need at least one slice".into()));
        }
        if points < MIN_POINTS {
            return Err(SicError::Contract(format!("need at least {MIN_POINTS} grid points, got {points}")));
        }
        if !(x_max > x_min) {
            return Err(SicError::Contract(format!("empty grid [{x_min}, {x_max}]")));
        }
        Ok(Self { slices, x_min, x_max, points })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.points as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x_min + i as f64 * self.dx()).collect()
    }

    /// Fraction of `|psi|^2` within four widths of the grid edges.
    pub fn edge_weight(&self, packet: &GaussianPacket) -> f64 {
        let dx = self.dx();
        let margin = 4.0 * packet.width();
        let total = packet.norm_sq();
        let edge: f64 = self
            .nodes()
            .into_iter()
            .filter(|&x| x < self.x_min + margin || x > self.x_max - margin)
            .map(|x| packet.evaluate(x).norm_sqr() * dx)
            .sum();
        edge / total
    }
}

/// Circulant free step over signed time `a eps`, band-limited to the grid.
pub fn free_step_matrix(cfg: &LatticeConfig, params: &PhysicalParams, effective_eps: f64) -> DMatrix<C64> {
    let p = cfg.points;
    let dx = cfg.dx();
    let len = p as f64 * dx;
    let half = (p / 2) as i64;
    let modes: Vec<(f64, C64)> = (0..p as i64)
        .map(|j| {
            let k = 2.0 * PI * (j - half) as f64 / len;
            (k, C64::from_polar(1.0, -params.hbar * k * k * effective_eps / (2.0 * params.mass)))
        })
        .collect();
    let column: Vec<C64> = (0..p)
        .map(|m| modes.iter().map(|&(k, ph)| ph * C64::from_polar(1.0, k * m as f64 * dx)).sum::<C64>() / p as f64)
        .collect();
    DMatrix::from_fn(p, p, |r, s| column[(r + p - s) % p])
}

/// One Trotter step `F(a eps) diag(exp(-i a V eps / hbar))`.
#[derive(Debug, Clone)]
pub struct TrotterLattice {
    cfg: LatticeConfig,
    step: DMatrix<C64>,
    unitarity_defect: f64,
}

/// Builds the lattice for `p^2/2m + V(x)` over the signed interval.
pub fn trotter_green(
    potential: impl Fn(f64) -> f64,
    interval: &SicInterval,
    params: &PhysicalParams,
    cfg: LatticeConfig,
) -> Result<TrotterLattice> {
    let eps = interval.effective() / cfg.slices as f64;
    let free = free_step_matrix(&cfg, params, eps);
    let phases: Vec<C64> = cfg.nodes().into_iter().map(|x| C64::from_polar(1.0, -potential(x) * eps / params.hbar)).collect();
    let step = DMatrix::from_fn(cfg.points, cfg.points, |r, s| free[(r, s)] * phases[s]);
    let gram = step.adjoint() * &step - DMatrix::<C64>::identity(cfg.points, cfg.points);
    let unitarity_defect = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if unitarity_defect > UNITARITY_LIMIT {
        return Err(SicError::Resolution(format!("transfer matrix unitarity defect {unitarity_defect:.2e}")));
    }
    Ok(TrotterLattice { cfg, step, unitarity_defect })
}

impl TrotterLattice {
    pub fn config(&self) -> &LatticeConfig {
        &self.cfg
    }

    pub fn step_matrix(&self) -> &DMatrix<C64> {
        &self.step
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    /// Sampled kernel `K(x_i, x_j) = (step^N)_{ij} / dx`, by repeated squaring.
    pub fn kernel(&self) -> DMatrix<C64> {
        let p = self.cfg.points;
        let mut acc = DMatrix::<C64>::identity(p, p);
        let mut base = self.step.clone();
        let mut n = self.cfg.slices;
        while n > 0 {
            if n & 1 == 1 {
                acc = &base * &acc;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        acc / C64::from(self.cfg.dx())
    }

    /// Applies all slices to grid samples, rows in parallel when allowed.
    pub fn propagate(&self, psi: &[C64], exec: Exec) -> Result<Vec<C64>> {
        let p = self.cfg.points;
        if psi.len() != p {
            return Err(SicError::DimensionMismatch { expected: p, found: psi.len() });
        }
        let mut cur = psi.to_vec();
        let mut next = vec![C64::from(0.0); p];
        for _ in 0..self.cfg.slices {
            exec.fill(&mut next, |r| (0..p).map(|s| self.step[(r, s)] * cur[s]).sum());
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// `sqrt(dx sum |lattice - exact|^2)` for a packet propagated both ways.
    pub fn packet_error(&self, packet: &GaussianPacket, exact: &GaussianPacket, exec: Exec) -> Result<f64> {
        for pk in [packet, exact] {
            let w = self.cfg.edge_weight(pk);
            if w > TAIL_LIMIT {
                return Err(SicError::Resolution(format!("packet weight {w:.2e} reaches the grid edge")));
            }
        }
        let xs = self.cfg.nodes();
        let psi: Vec<C64> = xs.iter().map(|&x| packet.evaluate(x)).collect();
        let out = self.propagate(&psi, exec)?;
        let sq: f64 = xs.iter().zip(&out).map(|(&x, v)| (v - exact.evaluate(x)).norm_sqr()).sum();
        Ok((sq * self.cfg.dx()).sqrt())
    }
}

/// Least-squares exponent `k` in `y ~ x^k`.
pub fn power_law_exponent(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SicError::Contract("need at least two matched points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(SicError::Range("values must be positive for a log fit".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SicError::Contract("abscissae must not all coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Convergence order: minus the exponent of error against slice count.
pub fn loglog_slope(ns: &[usize], errs: &[f64]) -> Result<f64> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    power_law_exponent(&xs, errs).map(|k| -k)
}

/// `H(t)` sampled at slice midpoints.
pub struct PiecewiseHamiltonian<'a> {
    pub h_of_t: Box<dyn Fn(f64) -> DenseOperator + Sync + 'a>,
    pub t0: f64,
    pub t_m: f64,
    pub hbar: f64,
}

impl<'a> PiecewiseHamiltonian<'a> {
    pub fn new(h_of_t: impl Fn(f64) -> DenseOperator + Sync + 'a, t0: f64, t_m: f64, hbar: f64) -> Result<Self> {
        if !(t_m >= 0.0) || !(hbar > 0.0) {
            return Err(SicError::Contract("need T_m >= 0 and hbar > 0".into()));
        }
        Ok(Self { h_of_t: Box::new(h_of_t), t0, t_m, hbar })
    }

    /// The same Hamiltonian starting from another initial time.
    pub fn starting_at(&self, t0: f64) -> PiecewiseHamiltonian<'_> {
        PiecewiseHamiltonian { h_of_t: Box::new(|t| (self.h_of_t)(t)), t0, t_m: self.t_m, hbar: self.hbar }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimedepVariant {
    /// Sample times `t0 + a (j - 1/2) eps`: the schedule itself depends on the sign.
    SignedSchedule,
    /// Sample times `t0 + (j - 1/2) eps` for either sign.
    FixedSchedule,
}

impl TimedepVariant {
    pub fn sample_time(self, h: &PiecewiseHamiltonian, sign: LogicalSign, j: usize, n: usize) -> f64 {
        let eps = h.t_m / n as f64;
        let offset = (j as f64 - 0.5) * eps;
        match self {
            TimedepVariant::SignedSchedule => h.t0 + sign.value() * offset,
            TimedepVariant::FixedSchedule => h.t0 + offset,
        }
    }
}

/// Slice propagators in application order plus their product.
#[derive(Debug, Clone)]
pub struct TimedepPropagator {
    pub slices: Vec<DenseOperator>,
    pub total: DenseOperator,
}

pub fn timedep_sic_propagator(h: &PiecewiseHamiltonian, sign: LogicalSign, variant: TimedepVariant, n: usize) -> Result<TimedepPropagator> {
    if n == 0 {
        return Err(SicError::Contract("need at least one slice".into()));
    }
    let eps = h.t_m / n as f64;
    let mut slices = Vec::with_capacity(n);
    for j in 1..=n {
        let t = variant.sample_time(h, sign, j, n);
        let hj = (h.h_of_t)(t);
        let defect = hj.hermiticity_defect();
        if defect > STRUCTURE_TOL {
            return Err(SicError::Contract(format!("slice Hamiltonian at t = {t} is not Hermitian ({defect:.2e})")));
        }
        slices.push(mat_exp(&hj, -I * sign.value() * eps / h.hbar)?);
    }
    let mut total = DenseOperator::identity(slices[0].dim());
    for s in &slices {
        total = s.mul(&total)?;
    }
    Ok(TimedepPropagator { slices, total })
}

/// The `+1` run from `t0` and the `-1` run whose initial time makes the
/// pair comparable: `t0 + T` for the signed schedule, `t0` for the fixed one.
pub fn reversal_pair(h: &PiecewiseHamiltonian, variant: TimedepVariant, n: usize) -> Result<(TimedepPropagator, TimedepPropagator)> {
    let plus = timedep_sic_propagator(h, LogicalSign::Plus, variant, n)?;
    let minus = match variant {
        TimedepVariant::SignedSchedule => timedep_sic_propagator(&h.starting_at(h.t0 + h.t_m), LogicalSign::Minus, variant, n)?,
        TimedepVariant::FixedSchedule => timedep_sic_propagator(h, LogicalSign::Minus, variant, n)?,
    };
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReversalMode {
    Global,
    Local,
}

/// Frobenius defect of `U(+1) = U(-1)^dagger`, for the full products or the
/// worst matching slice.
pub fn reversal_symmetry_check(plus: &TimedepPropagator, minus: &TimedepPropagator, mode: ReversalMode) -> Result<f64> {
    match mode {
        ReversalMode::Global => plus.total.distance(&minus.total.adjoint()),
        ReversalMode::Local => {
            if plus.slices.len() != minus.slices.len() {
                return Err(SicError::DimensionMismatch { expected: plus.slices.len(), found: minus.slices.len() });
            }
            let mut worst: f64 = 0.0;
            for (p, m) in plus.slices.iter().zip(&minus.slices) {
                worst = worst.max(p.distance(&m.adjoint())?);
            }
            Ok(worst)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green_calculus::{propagate_packet, QuadraticGreenForm};
    use crate::oscillator_basis::{fock_hamiltonian, fock_position};

    fn unit() -> PhysicalParams {
        PhysicalParams::default()
    }

    fn plus(t: f64) -> SicInterval {
        SicInterval::new(t, LogicalSign::Plus).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(LatticeConfig::new(0, -1.0, 1.0, 64).is_err());
        assert!(LatticeConfig::new(4, -1.0, 1.0, 32).is_err());
        assert!(LatticeConfig::new(4, 1.0, 1.0, 64).is_err());
        let c = LatticeConfig::new(4, -2.0, 2.0, 64).unwrap();
        assert_eq!(c.dx(), 4.0 / 64.0);
        assert_eq!(c.nodes().len(), 64);
    }

    #[test]
    fn free_lattice_matches_free_kernel() {
        let cfg = LatticeConfig::new(5, -12.0, 12.0, 256).unwrap();
        let p = unit();
        for sign in LogicalSign::both() {
            let s = SicInterval::new(0.7, sign).unwrap();
            let lat = trotter_green(|_| 0.0, &s, &p, cfg).unwrap();
            assert!(lat.unitarity_defect() < 1e-10);
            let psi = GaussianPacket::new(0.5, 1.0, 0.6, 1.0).unwrap();
            let exact = propagate_packet(&psi, &QuadraticGreenForm::free(&s, &p).unwrap()).unwrap();
            assert!(lat.packet_error(&psi, &exact, Exec::Sequential).unwrap() < 1e-6);
        }
    }

    #[test]
    fn single_slice_is_kinetic_after_potential() {
        let cfg = LatticeConfig::new(1, -6.0, 6.0, 64).unwrap();
        let p = unit();
        let s = plus(0.3);
        let v = |x: f64| 0.5 * x * x;
        let lat = trotter_green(v, &s, &p, cfg).unwrap();
        let free = free_step_matrix(&cfg, &p, 0.3);
        let pot = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            64,
            cfg.nodes().into_iter().map(|x| C64::from_polar(1.0, -v(x) * 0.3)),
        ));
        let want = (free * pot) / C64::from(cfg.dx());
        assert!((lat.kernel() - want).norm() < 1e-12);
    }

    #[test]
    fn kernel_power_agrees_with_vector_propagation() {
        let cfg = LatticeConfig::new(6, -6.0, 6.0, 64).unwrap();
        let lat = trotter_green(|x| 0.1 * x * x, &plus(0.4), &unit(), cfg).unwrap();
        let psi: Vec<C64> = cfg.nodes().into_iter().map(|x| C64::from((-x * x).exp())).collect();
        let via_kernel = lat.kernel() * nalgebra::DVector::from_vec(psi.clone()) * C64::from(cfg.dx());
        let via_steps = lat.propagate(&psi, Exec::Parallel).unwrap();
        for (a, b) in via_kernel.iter().zip(&via_steps) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_lattice_converges_first_order() {
        let p = unit();
        let s = plus(0.5);
        let psi = GaussianPacket::new(1.0, 0.0, 0.5, 1.0).unwrap();
        let exact = propagate_packet(&psi, &QuadraticGreenForm::harmonic(&s, &p).unwrap()).unwrap();
        let ns = [8, 16, 32];
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let cfg = LatticeConfig::new(n, -10.0, 10.0, 128).unwrap();
                trotter_green(|x| 0.5 * x * x, &s, &p, cfg).unwrap().packet_error(&psi, &exact, Exec::Parallel).unwrap()
            })
            .collect();
        let slope = loglog_slope(&ns, &errs).unwrap();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}, errors {errs:?}");
    }

    #[test]
    fn packet_at_edge_is_a_resolution_error() {
        let cfg = LatticeConfig::new(2, -3.0, 3.0, 64).unwrap();
        let lat = trotter_green(|_| 0.0, &plus(0.1), &unit(), cfg).unwrap();
        let psi = GaussianPacket::new(2.5, 0.0, 0.5, 1.0).unwrap();
        assert!(matches!(lat.packet_error(&psi, &psi, Exec::Sequential), Err(SicError::Resolution(_))));
    }

    #[test]
    fn slope_fit() {
        let ns = [8, 16, 32, 64];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 / n as f64).collect();
        assert!((loglog_slope(&ns, &errs).unwrap() - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
    }

    fn ramped(n: usize, f0: f64, t_m: f64) -> impl Fn(f64) -> DenseOperator + Sync {
        let p = unit();
        let h0 = fock_hamiltonian(&p, n);
        let x = fock_position(&p, n);
        move |t| h0.add(&x.scale(C64::from(f0 * t / t_m))).unwrap()
    }

    #[test]
    fn constant_hamiltonian_reduces_to_exponential() {
        let h0 = fock_hamiltonian(&unit(), 8).add(&fock_position(&unit(), 8)).unwrap();
        let h = PiecewiseHamiltonian::new(|_| h0.clone(), 0.2, 0.9, 1.0).unwrap();
        for sign in LogicalSign::both() {
            let want = mat_exp(&h0, -I * sign.value() * 0.9).unwrap();
            for variant in [TimedepVariant::SignedSchedule, TimedepVariant::FixedSchedule] {
                for n in [1, 7] {
                    let u = timedep_sic_propagator(&h, sign, variant, n).unwrap();
                    assert!(u.total.distance(&want).unwrap() < 1e-10);
                }
            }
        }
        let (p, m) = reversal_pair(&h, TimedepVariant::SignedSchedule, 5).unwrap();
        assert!(reversal_symmetry_check(&p, &m, ReversalMode::Global).unwrap() < 1e-10);
    }

    #[test]
    fn schedules_discriminate_under_a_ramp() {
        let h = PiecewiseHamiltonian::new(ramped(12, 1.5, 2.0), 0.0, 2.0, 1.0).unwrap();
        let (p, m) = reversal_pair(&h, TimedepVariant::SignedSchedule, 40).unwrap();
        assert!(reversal_symmetry_check(&p, &m, ReversalMode::Global).unwrap() < 1e-10);
        let (p, m) = reversal_pair(&h, TimedepVariant::FixedSchedule, 40).unwrap();
        assert!(reversal_symmetry_check(&p, &m, ReversalMode::Local).unwrap() < 1e-12);
        assert!(reversal_symmetry_check(&p, &m, ReversalMode::Global).unwrap() > 1e-3);
    }

    #[test]
    fn non_hermitian_slice_is_refused() {
        let bad = DenseOperator::from_matrix(DMatrix::from_fn(2, 2, |r, c| if r < c { C64::from(1.0) } else { C64::from(0.0) })).unwrap();
        let h = PiecewiseHamiltonian::new(move |_| bad.clone(), 0.0, 1.0, 1.0).unwrap();
        assert!(timedep_sic_propagator(&h, LogicalSign::Plus, TimedepVariant::FixedSchedule, 2).is_err());
    }
}
