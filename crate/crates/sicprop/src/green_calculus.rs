//! Coordinate-space kernels of sign-carrying propagators.
//!
//! Every closed form is the ordinary kernel evaluated at the signed time
//! `a T`. Square roots take the principal branch and harmonic kernels are
//! refused within `1e-9` of a caustic instead of guessing a Maslov phase.

use std::f64::consts::PI;

use crate::error::{Result, SicError};
use crate::exec::Exec;
use crate::hilbert_core::{mat_exp, DenseOperator, C64, I};
use crate::oscillator_basis::{fock_momentum, fock_position, EigenSystem, PhysicalParams};
use crate::quadrature::Rule;
use crate::LogicalSign;

pub const CAUSTIC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimePoint {
    pub x: f64,
    pub t: f64,
}

/// A duration together with the sign it runs under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicInterval {
    t_m: f64,
    sign: LogicalSign,
}

impl SicInterval {
    pub fn new(t_m: f64, sign: LogicalSign) -> Result<Self> {
        if !(t_m >= 0.0) || !t_m.is_finite() {
            return Err(SicError::Contract(format!("duration must be finite and non-negative, got {t_m}")));
        }
        Ok(Self { t_m, sign })
    }

    /// Requires `a T_m = t_b - t_a`.
    pub fn between(a: SpacetimePoint, b: SpacetimePoint, sign: LogicalSign) -> Result<Self> {
        let t_m = sign.value() * (b.t - a.t);
        if t_m < 0.0 {
            return Err(SicError::Contract(format!(
                "sign {sign} with t_b - t_a = {} would need a negative duration",
                b.t - a.t
            )));
        }
        Self::new(t_m, sign)
    }

    pub fn t_m(&self) -> f64 {
        self.t_m
    }

    pub fn sign(&self) -> LogicalSign {
        self.sign
    }

    pub fn effective(&self) -> f64 {
        self.sign.value() * self.t_m
    }

    pub fn flipped(&self) -> Self {
        Self { t_m: self.t_m, sign: self.sign.flip() }
    }
}

/// Kernel of a pure potential: a phase times `delta(x_b - x_a)`, kept
/// symbolic and applied by pointwise multiplication.
pub struct PotentialPhaseKernel<V: Fn(f64) -> f64> {
    potential: V,
    interval: SicInterval,
    hbar: f64,
}

pub fn potential_phase_green<V: Fn(f64) -> f64>(potential: V, interval: SicInterval, hbar: f64) -> PotentialPhaseKernel<V> {
    PotentialPhaseKernel { potential, interval, hbar }
}

impl<V: Fn(f64) -> f64> PotentialPhaseKernel<V> {
    /// `-a V(x) T / hbar`.
    pub fn phase(&self, x: f64) -> f64 {
        -(self.potential)(x) * self.interval.effective() / self.hbar
    }

    pub fn factor(&self, x: f64) -> C64 {
        C64::from_polar(1.0, self.phase(x))
    }

    pub fn apply(&self, xs: &[f64], psi: &[C64]) -> Result<Vec<C64>> {
        if xs.len() != psi.len() {
            return Err(SicError::DimensionMismatch { expected: xs.len(), found: psi.len() });
        }
        Ok(xs.iter().zip(psi).map(|(&x, p)| p * self.factor(x)).collect())
    }
}

fn nonzero_time(interval: &SicInterval) -> Result<f64> {
    let tau = interval.effective();
    if tau == 0.0 {
        return Err(SicError::DeltaLimit);
    }
    Ok(tau)
}

fn caustic_guard(theta: f64) -> Result<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    if s.abs() < CAUSTIC_EPS {
        return Err(SicError::Caustic { n: (theta / PI).round() as i64, margin: s.abs() });
    }
    Ok((s, c))
}

/// Distance of `sin(omega a T)` from zero.
pub fn caustic_margin(interval: &SicInterval, params: &PhysicalParams) -> f64 {
    (params.omega * interval.effective()).sin().abs()
}

pub fn free_green(xa: f64, xb: f64, interval: &SicInterval, params: &PhysicalParams) -> Result<C64> {
    QuadraticGreenForm::free(interval, params)?.evaluate(xa, xb)
}

pub fn harmonic_green(xa: f64, xb: f64, interval: &SicInterval, params: &PhysicalParams) -> Result<C64> {
    QuadraticGreenForm::harmonic(interval, params)?.evaluate(xa, xb)
}

/// Kernel of `p^2/2m + m omega^2 x^2 / 2 + f x`.
pub fn driven_green(xa: f64, xb: f64, interval: &SicInterval, params: &PhysicalParams, f: f64) -> Result<C64> {
    QuadraticGreenForm::driven(interval, params, f)?.evaluate(xa, xb)
}

/// Gaussian kernel
/// `pref * exp(i m/(2 hbar) (S_aa xa^2 + 2 S_ab xa xb + S_bb xb^2) + i/hbar (Q_a xa + Q_b xb + Theta_0))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticGreenForm {
    pub m: f64,
    pub hbar: f64,
    pub s_aa: f64,
    pub s_ab: f64,
    pub s_bb: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub theta0: f64,
    pub prefactor: C64,
}

impl QuadraticGreenForm {
    pub fn free(interval: &SicInterval, params: &PhysicalParams) -> Result<Self> {
        let tau = nonzero_time(interval)?;
        let (m, hbar) = (params.mass, params.hbar);
        Ok(Self {
            m,
            hbar,
            s_aa: 1.0 / tau,
            s_ab: -1.0 / tau,
            s_bb: 1.0 / tau,
            q_a: 0.0,
            q_b: 0.0,
            theta0: 0.0,
            prefactor: (C64::from(m) / (I * 2.0 * PI * hbar * tau)).sqrt(),
        })
    }

    pub fn harmonic(interval: &SicInterval, params: &PhysicalParams) -> Result<Self> {
        Self::driven(interval, params, 0.0)
    }

    pub fn driven(interval: &SicInterval, params: &PhysicalParams, f: f64) -> Result<Self> {
        let w = params.omega;
        let theta = w * interval.effective();
        let (s, c) = caustic_guard(theta)?;
        let (m, hbar) = (params.mass, params.hbar);
        let q = f * (c - 1.0) / (w * s);
        Ok(Self {
            m,
            hbar,
            s_aa: w * c / s,
            s_ab: -w / s,
            s_bb: w * c / s,
            q_a: q,
            q_b: q,
            theta0: f * f * (2.0 * c + theta * s - 2.0) / (2.0 * m * w.powi(3) * s),
            prefactor: (C64::from(m * w) / (I * 2.0 * PI * hbar * s)).sqrt(),
        })
    }

    pub fn exponent(&self, xa: f64, xb: f64) -> C64 {
        let quad = self.s_aa * xa * xa + 2.0 * self.s_ab * xa * xb + self.s_bb * xb * xb;
        let lin = self.q_a * xa + self.q_b * xb + self.theta0;
        I * (self.m * quad / (2.0 * self.hbar) + lin / self.hbar)
    }

    pub fn evaluate(&self, xa: f64, xb: f64) -> Result<C64> {
        if self.s_ab == 0.0 {
            return Err(SicError::Contract("S_ab = 0 leaves the kernel undefined".into()));
        }
        Ok(self.prefactor * self.exponent(xa, xb).exp())
    }

    /// Kernel with the sign flipped: `G'(x_b; x_a) = conj(G(x_a; x_b))`.
    pub fn reversed(&self) -> Self {
        Self {
            m: self.m,
            hbar: self.hbar,
            s_aa: -self.s_bb,
            s_ab: -self.s_ab,
            s_bb: -self.s_aa,
            q_a: -self.q_b,
            q_b: -self.q_a,
            theta0: -self.theta0,
            prefactor: self.prefactor.conj(),
        }
    }

    pub fn max_param_distance(&self, other: &Self) -> f64 {
        [
            self.s_aa - other.s_aa,
            self.s_ab - other.s_ab,
            self.s_bb - other.s_bb,
            self.q_a - other.q_a,
            self.q_b - other.q_b,
            self.theta0 - other.theta0,
        ]
        .iter()
        .fold(0.0, |acc: f64, d| acc.max(d.abs()))
    }
}

/// `G''(x_b; x_a) = int G_2(x_b; x_c) G_1(x_c; x_a) dx_c` with `g1` first.
pub fn compose_quadratic(g1: &QuadraticGreenForm, g2: &QuadraticGreenForm) -> Result<QuadraticGreenForm> {
    if (g1.m - g2.m).abs() > 1e-14 * g1.m || (g1.hbar - g2.hbar).abs() > 1e-14 * g1.hbar {
        return Err(SicError::Contract("composed kernels must share m and hbar".into()));
    }
    let d = g1.s_bb + g2.s_aa;
    let scale = g1.s_bb.abs().max(g2.s_aa.abs()).max(1.0);
    if d.abs() <= 1e-12 * scale {
        return Err(SicError::DegenerateComposition(d));
    }
    let (m, hbar) = (g1.m, g1.hbar);
    let qc = g1.q_b + g2.q_a;
    let gauss = (I * 2.0 * PI * hbar / (m * d)).sqrt();
    Ok(QuadraticGreenForm {
        m,
        hbar,
        s_aa: g1.s_aa - g1.s_ab * g1.s_ab / d,
        s_ab: -g1.s_ab * g2.s_ab / d,
        s_bb: g2.s_bb - g2.s_ab * g2.s_ab / d,
        q_a: g1.q_a - g1.s_ab * qc / d,
        q_b: g2.q_b - g2.s_ab * qc / d,
        theta0: g1.theta0 + g2.theta0 - qc * qc / (2.0 * m * d),
        prefactor: g1.prefactor * g2.prefactor * gauss,
    })
}

/// `psi(x) = exp(-A x^2 + B x + C)` with `Re A > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub a: C64,
    pub b: C64,
    pub c: C64,
}

impl GaussianPacket {
    /// Normalized packet centred at `x0` with position spread `w` and mean
    /// momentum `p0`.
    pub fn new(x0: f64, p0: f64, w: f64, hbar: f64) -> Result<Self> {
        if !(w > 0.0) || !x0.is_finite() || !p0.is_finite() {
            return Err(SicError::Contract(format!("packet needs finite centre and positive width, got w = {w}")));
        }
        let a = 1.0 / (4.0 * w * w);
        Ok(Self {
            a: C64::from(a),
            b: C64::new(2.0 * a * x0, p0 / hbar),
            c: C64::from(-a * x0 * x0 - 0.25 * (2.0 * PI * w * w).ln()),
        })
    }

    pub fn from_exponents(a: C64, b: C64, c: C64) -> Result<Self> {
        if !(a.re > 0.0) {
            return Err(SicError::Contract("packet exponent needs Re A > 0".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn evaluate(&self, x: f64) -> C64 {
        (-self.a * x * x + self.b * x + self.c).exp()
    }

    pub fn norm_sq(&self) -> f64 {
        let ra = self.a.re;
        (PI / (2.0 * ra)).sqrt() * (self.b.re * self.b.re / (2.0 * ra) + 2.0 * self.c.re).exp()
    }

    pub fn center(&self) -> f64 {
        self.b.re / (2.0 * self.a.re)
    }

    pub fn width(&self) -> f64 {
        0.5 / self.a.re.sqrt()
    }

    pub fn momentum(&self, hbar: f64) -> f64 {
        hbar * (self.b.im - 2.0 * self.a.im * self.center())
    }

    /// `<self|other>` in closed form.
    pub fn inner(&self, other: &GaussianPacket) -> C64 {
        let a = self.a.conj() + other.a;
        let b = self.b.conj() + other.b;
        (C64::from(PI) / a).sqrt() * (b * b / (a * 4.0) + self.c.conj() + other.c).exp()
    }

    /// `|<self|other>|` after normalizing both.
    pub fn fidelity(&self, other: &GaussianPacket) -> f64 {
        self.inner(other).norm() / (self.norm_sq() * other.norm_sq()).sqrt()
    }
}

/// Gaussian integral of the kernel against the packet.
pub fn propagate_packet(packet: &GaussianPacket, g: &QuadraticGreenForm) -> Result<GaussianPacket> {
    let (m, hbar) = (g.m, g.hbar);
    let alpha = packet.a - I * (m * g.s_aa / (2.0 * hbar));
    if !(alpha.re > 0.0) {
        return Err(SicError::Contract("packet and kernel do not give a convergent integral".into()));
    }
    let beta0 = packet.b + I * (g.q_a / hbar);
    let beta1 = I * (m * g.s_ab / hbar);
    let a = -I * (m * g.s_bb / (2.0 * hbar)) - beta1 * beta1 / (alpha * 4.0);
    let b = I * (g.q_b / hbar) + beta0 * beta1 / (alpha * 2.0);
    let c = packet.c + I * (g.theta0 / hbar) + g.prefactor.ln() + 0.5 * (C64::from(PI) / alpha).ln() + beta0 * beta0 / (alpha * 4.0);
    GaussianPacket::from_exponents(a, b, c)
}

/// `int kernel(x_a) psi(x_a) dx_a` by quadrature.
pub fn apply_kernel_quadrature(kernel: impl Fn(f64) -> Result<C64>, psi: impl Fn(f64) -> C64, rule: &Rule) -> Result<C64> {
    let mut acc = C64::from(0.0);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += kernel(x)? * psi(x) * w;
    }
    Ok(acc)
}

/// Truncated Hermite generating sum and its closed form.
///
/// Series: `sum_{k < terms} H_k(x) H_k(y) s^k / (2^k k!)`.
/// Closed: `(1 - s^2)^{-1/2} exp((2 s x y - s^2 (x^2 + y^2)) / (1 - s^2))`.
pub fn mehler_kernel(x: f64, y: f64, s: C64, terms: usize) -> Result<(C64, C64)> {
    if s.norm() > 1.0 + 1e-15 {
        return Err(SicError::Range(format!("|s| = {} exceeds 1", s.norm())));
    }
    let one_minus = C64::from(1.0) - s * s;
    if one_minus.norm() < 1e-15 {
        if x != y {
            return Err(SicError::Caustic { n: if s.re > 0.0 { 0 } else { 1 }, margin: one_minus.norm() });
        }
        return Err(SicError::Range("series diverges at s = +-1".into()));
    }
    let closed = (s * x * y * 2.0 - s * s * (x * x + y * y)) / one_minus;
    let closed = closed.exp() / one_minus.sqrt();

    let mut series = C64::from(0.0);
    let (mut hx0, mut hx1) = (1.0, 2f64.sqrt() * x);
    let (mut hy0, mut hy1) = (1.0, 2f64.sqrt() * y);
    let mut pow = C64::from(1.0);
    for k in 0..terms {
        series += pow * (hx0 * hy0);
        pow *= s;
        let kf = k as f64 + 1.0;
        let a = (2.0 / (kf + 1.0)).sqrt();
        let b = (kf / (kf + 1.0)).sqrt();
        let (nx, ny) = (a * x * hx1 - b * hx0, a * y * hy1 - b * hy0);
        hx0 = hx1;
        hx1 = nx;
        hy0 = hy1;
        hy1 = ny;
    }
    Ok((series, closed))
}

/// Abel-damped eigen-sum `sum_{k<L} e^{-i a E_k T / hbar} (1 - eps)^k u_k(x_a) u_k(x_b)`.
pub fn eigensum_green(basis: &EigenSystem, interval: &SicInterval, xa: f64, xb: f64, levels: usize, damping: f64) -> Result<C64> {
    if !(0.0..1.0).contains(&damping) {
        return Err(SicError::Range(format!("damping {damping} outside [0, 1)")));
    }
    let ua = basis.eigenfunctions(levels, xa)?;
    let ub = basis.eigenfunctions(levels, xb)?;
    let tau = interval.effective() / basis.params.hbar;
    let mut acc = C64::from(0.0);
    let mut damp = 1.0;
    for k in 0..levels {
        acc += C64::from_polar(damp * ua[k] * ub[k], -basis.eigenvalue(k)? * tau);
        damp *= 1.0 - damping;
    }
    Ok(acc)
}

/// Image sum for walls at `0` and `width`, images `n` in `[-n_images, n_images]`.
pub fn square_well_green(
    xa: f64,
    xb: f64,
    interval: &SicInterval,
    params: &PhysicalParams,
    width: f64,
    n_images: usize,
) -> Result<C64> {
    if !(width > 0.0) {
        return Err(SicError::Contract("well width must be positive".into()));
    }
    for x in [xa, xb] {
        if !(0.0..=width).contains(&x) {
            return Err(SicError::Range(format!("point {x} outside the well [0, {width}]")));
        }
    }
    let g = QuadraticGreenForm::free(interval, params)?;
    let n = n_images as i64;
    let mut acc = C64::from(0.0);
    for j in -n..=n {
        let shift = 2.0 * j as f64 * width;
        acc += g.evaluate(xa, xb + shift)? - g.evaluate(-xa, xb + shift)?;
    }
    Ok(acc)
}

/// Image sum applied to a packet that lives inside the well.
///
/// Each image term is a free evolution of the packet or its mirror, so the
/// sum converges as fast as the packet tails decay. The pointwise kernel
/// only converges conditionally and is unsuitable for this.
pub fn square_well_packet(
    packet: &GaussianPacket,
    interval: &SicInterval,
    params: &PhysicalParams,
    width: f64,
    n_images: usize,
    xb: f64,
) -> Result<C64> {
    if !(width > 0.0) {
        return Err(SicError::Contract("well width must be positive".into()));
    }
    let g = QuadraticGreenForm::free(interval, params)?;
    let direct = propagate_packet(packet, &g)?;
    let mirror = GaussianPacket { b: -packet.b, ..*packet };
    let mirrored = propagate_packet(&mirror, &g)?;
    let n = n_images as i64;
    let mut acc = C64::from(0.0);
    for j in -n..=n {
        let y = xb - 2.0 * j as f64 * width;
        acc += direct.evaluate(y) - mirrored.evaluate(y);
    }
    Ok(acc)
}

/// Grid evaluation of a two-point kernel, rows over `x_b`.
pub fn kernel_grid(
    kernel: impl Fn(f64, f64) -> Result<C64> + Sync,
    xa: &[f64],
    xb: &[f64],
    exec: Exec,
) -> Result<Vec<Vec<C64>>> {
    exec.map_range(xb.len(), |i| xa.iter().map(|&a| kernel(a, xb[i])).collect::<Result<Vec<_>>>())
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct QuarterPeriod {
    pub lhs: DenseOperator,
    pub rhs: DenseOperator,
    /// Frobenius gap on the block `k < n_fock / 2`.
    pub defect: f64,
}

/// Which side of the quarter-period swap to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuarterSwap {
    /// Conjugated potential step equals a kinetic step.
    PotentialToKinetic,
    /// Conjugated kinetic step equals a potential step.
    KineticToPotential,
}

/// `e^{i H t_c} e^{-i a V t/hbar} e^{-i H t_c}` against `e^{-i a T t/hbar}`,
/// with `t_c = pi / (2 omega)` and every operator built from truncated
/// ladder matrices.
pub fn quarter_period_conjugation(params: &PhysicalParams, t_m: f64, sign: LogicalSign, n_fock: usize, swap: QuarterSwap) -> Result<QuarterPeriod> {
    if n_fock < 16 {
        return Err(SicError::Range(format!("need at least 16 Fock levels, got {n_fock}")));
    }
    let x = fock_position(params, n_fock);
    let p = fock_momentum(params, n_fock);
    let v = x.mul(&x)?.scale(C64::from(0.5 * params.mass * params.omega * params.omega));
    let t = p.mul(&p)?.scale(C64::from(0.5 / params.mass));
    let h = t.add(&v)?;
    let tc = PI / (2.0 * params.omega);
    let (inner, outer) = match swap {
        QuarterSwap::PotentialToKinetic => (&v, &t),
        QuarterSwap::KineticToPotential => (&t, &v),
    };
    let step = -I * sign.value() * t_m / params.hbar;
    let fwd = mat_exp(&h, I * tc / params.hbar)?;
    let lhs = fwd.mul(&mat_exp(inner, step)?)?.mul(&fwd.adjoint())?;
    let rhs = mat_exp(outer, step)?;
    let half = n_fock / 2;
    let defect = (lhs.block(0, half) - rhs.block(0, half)).norm();
    Ok(QuarterPeriod { lhs, rhs, defect })
}
