//! Complexified Hamiltonian flow with stability matrix and action.
//!
//! The state `(q, p)` is integrated jointly with the tangent map
//! `M = d(p_t, q_t)/d(p_0, q_0)` and the action `S = ∫ (p q' - H) dt`.
//! Entries follow the `(δp, δq)` ordering:
//!
//! ```text
//! δp_t = M11 δp_0 + M12 δq_0
//! δq_t = M21 δp_0 + M22 δq_0
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::manifold::PhasePoint;
use crate::ode::{self, Flow, Outcome, StepControl};

/// Half the lemniscate constant: `∫_0^1 ds / sqrt(1 - s^4)`.
pub const QUARTIC_PERIOD_INTEGRAL: f64 = 1.311_028_777_146_059_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// `lambda q^4`
    Quartic { lambda: f64 },
    /// `m omega^2 q^2 / 2`; used as an exactly solvable reference.
    Harmonic { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub potential: Potential,
    pub mass: f64,
    pub hbar: f64,
}

impl SystemParams {
    pub fn quartic(lambda: f64, mass: f64, hbar: f64) -> Result<Self> {
        let s = Self {
            potential: Potential::Quartic { lambda },
            mass,
            hbar,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn harmonic(omega: f64, mass: f64, hbar: f64) -> Result<Self> {
        let s = Self {
            potential: Potential::Harmonic { omega },
            mass,
            hbar,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
        };
        match self.potential {
            Potential::Quartic { lambda } if !(lambda > 0.0) => return bad("lambda", lambda),
            Potential::Harmonic { omega } if !(omega > 0.0) => return bad("omega", omega),
            _ => {}
        }
        if !(self.mass > 0.0) {
            return bad("mass", self.mass);
        }
        if !(self.hbar > 0.0) {
            return bad("hbar", self.hbar);
        }
        Ok(())
    }

    #[inline]
    pub fn potential(&self, q: Complex64) -> Complex64 {
        match self.potential {
            Potential::Quartic { lambda } => {
                let q2 = q * q;
                q2 * q2 * lambda
            }
            Potential::Harmonic { omega } => q * q * (0.5 * self.mass * omega * omega),
        }
    }

    #[inline]
    pub fn force(&self, q: Complex64) -> Complex64 {
        match self.potential {
            Potential::Quartic { lambda } => -(q * q * q) * (4.0 * lambda),
            Potential::Harmonic { omega } => -q * (self.mass * omega * omega),
        }
    }

    /// `V''(q)`
    #[inline]
    pub fn curvature(&self, q: Complex64) -> Complex64 {
        match self.potential {
            Potential::Quartic { lambda } => q * q * (12.0 * lambda),
            Potential::Harmonic { omega } => Complex64::new(self.mass * omega * omega, 0.0),
        }
    }

    /// Period of the real orbit with energy `energy > 0`.
    pub fn period(&self, energy: f64) -> Result<f64> {
        if !(energy > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "period needs positive energy, got {energy}"
            )));
        }
        Ok(match self.potential {
            Potential::Quartic { lambda } => {
                let q_max = (energy / lambda).powf(0.25);
                4.0 * q_max * (self.mass / (2.0 * energy)).sqrt() * QUARTIC_PERIOD_INTEGRAL
            }
            Potential::Harmonic { omega } => 2.0 * PI / omega,
        })
    }

    /// Outer turning point `q_max` for a real energy.
    pub fn turning_point(&self, energy: f64) -> f64 {
        match self.potential {
            Potential::Quartic { lambda } => (energy.max(0.0) / lambda).powf(0.25),
            Potential::Harmonic { omega } => {
                (2.0 * energy.max(0.0) / (self.mass * omega * omega)).sqrt()
            }
        }
    }
}

pub fn hamiltonian(pt: &PhasePoint, sys: &SystemParams) -> Complex64 {
    pt.p * pt.p / (2.0 * sys.mass) + sys.potential(pt.q)
}

/// Real energy of a real phase point.
pub fn energy(q: f64, p: f64, sys: &SystemParams) -> f64 {
    hamiltonian(&PhasePoint::real(q, p), sys).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Bound on `|q|` or `|p|` beyond which a trajectory is declared singular.
    pub blowup_threshold: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: 0.05,
            blowup_threshold: 1e8,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidParameter(
                "integrator tolerances and max_step must be positive".into(),
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidParameter("blowup_threshold must be positive".into()));
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

/// 2×2 complex tangent map acting on `(δp, δq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl Stability {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self {
            m11: one,
            m12: zero,
            m21: zero,
            m22: one,
        }
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    /// `(δp_t, δq_t)` for an initial deviation `(δp_0, δq_0)`.
    pub fn apply(&self, dp: Complex64, dq: Complex64) -> (Complex64, Complex64) {
        (self.m11 * dp + self.m12 * dq, self.m21 * dp + self.m22 * dq)
    }

    /// Contraction with coefficients `[c11, c12, c21, c22]`.
    pub fn contract(&self, c: &[Complex64; 4]) -> Complex64 {
        c[0] * self.m11 + c[1] * self.m12 + c[2] * self.m21 + c[3] * self.m22
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Status {
    Ok,
    /// The trajectory escaped past the blow-up threshold (or the step size
    /// collapsed) near `blowup_time`.
    Singular { blowup_time: f64 },
}

impl Status {
    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub point: PhasePoint,
    pub action: Complex64,
}

/// Extra quantities integrated alongside the trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tracking {
    /// Coefficients `c` of a linear functional `l(M) = c · M` whose logarithm is
    /// continued along the path (prefactor branch selection).
    pub log_functional: Option<[Complex64; 4]>,
    /// Keep a sample after every accepted step.
    pub record_path: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub start: PhasePoint,
    pub final_point: PhasePoint,
    pub stability: Stability,
    pub action: Complex64,
    pub status: Status,
    /// Time actually reached.
    pub time: f64,
    /// Unwrapped real phase-plane angle `atan2(q, p)` at the final time,
    /// meaningful for real trajectories (it increases monotonically).
    pub phase_angle: f64,
    /// Continued `log l(M)` when a functional was tracked.
    pub tracked_log: Option<Complex64>,
    pub path: Vec<PathSample>,
}

impl TrajectoryResult {
    pub fn is_ok(&self) -> bool {
        self.status.is_ok()
    }

    /// Number of half-oscillations completed, counted by the crossings of
    /// `p = 0` of the unwrapped phase angle. Transport pathway label for real
    /// trajectories.
    pub fn pathway_label(&self) -> i32 {
        ((self.phase_angle + 0.5 * PI) / PI).floor() as i32
    }
}

const NSTATE: usize = 8;

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Integrates the complexified equations of motion from `start` for a time
/// `t >= 0`.
pub fn propagate(
    start: PhasePoint,
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
) -> TrajectoryResult {
    propagate_with(start, t, sys, opts, &Tracking::default())
}

pub fn propagate_with(
    start: PhasePoint,
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
    tracking: &Tracking,
) -> TrajectoryResult {
    assert!(t >= 0.0, "propagation time must be non-negative");
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let coeffs = tracking.log_functional;
    let l0 = coeffs.map(|c| (c[0] + c[3]).ln()).unwrap_or(zero);
    let pole = PoleChart::new(start, sys);

    let mut st = Chart::Direct([start.q, start.p, one, zero, zero, one, zero, l0]);
    let mut elapsed = 0.0;
    let mut angle = start.q.re.atan2(start.p.re);
    let mut last_raw = angle;
    let mut path = Vec::new();
    let mut status = Status::Ok;
    loop {
        let mut switch = false;
        let first = elapsed == 0.0;
        let rest = t - elapsed;
        let mut note = |time: f64, q: Complex64, p: Complex64, action: Complex64| {
            let raw = q.re.atan2(p.re);
            angle += wrap_angle(raw - last_raw);
            last_raw = raw;
            if tracking.record_path && (first || time > elapsed) {
                path.push(PathSample {
                    t: time,
                    point: PhasePoint::new(q, p),
                    action,
                });
            }
            q.norm() > opts.blowup_threshold || p.norm() > opts.blowup_threshold
        };
        let (next, outcome) = match st {
            Chart::Direct(y0) => {
                let rhs = |y: &[Complex64; NSTATE]| direct_rhs(y, sys, coeffs);
                let observe = |tl: f64, y: &[Complex64; NSTATE]| {
                    if note(elapsed + tl, y[0], y[1], y[6]) {
                        Flow::Stop
                    } else if pole.as_ref().is_some_and(|c| y[0].norm() > c.r_in) {
                        switch = true;
                        Flow::Stop
                    } else {
                        Flow::Continue
                    }
                };
                let (y, tl, out) = ode::integrate(rhs, y0, rest, &opts.control(), observe);
                let next = match (&pole, switch) {
                    (Some(c), true) => Chart::Inverted(c.enter(&y, elapsed + tl)),
                    _ => Chart::Direct(y),
                };
                (next, shift(out, elapsed))
            }
            Chart::Inverted(ref inv) => {
                let c = pole.as_ref().expect("inverted chart without a pole chart");
                let rhs = |y: &[Complex64; NINV]| c.rhs(y, coeffs);
                let mut w_prev = inv.y[0];
                let observe = |tl: f64, y: &[Complex64; NINV]| {
                    let (q, p) = c.point(y);
                    // a pole passed between two steps counts as reached
                    let w_min = closest_to_origin(w_prev, y[0]);
                    w_prev = y[0];
                    let near = w_min * opts.blowup_threshold < 1.0
                        || y[1].norm() * c.mass > opts.blowup_threshold * w_min * w_min;
                    if note(elapsed + tl, q, p, c.action(inv, q, p, elapsed + tl)) || near {
                        Flow::Stop
                    } else if q.norm() < c.r_out {
                        switch = true;
                        Flow::Stop
                    } else {
                        Flow::Continue
                    }
                };
                let (y, tl, out) = ode::integrate(rhs, inv.y, rest, &opts.control(), observe);
                let next = Inverted { y, ..*inv };
                let next = if switch {
                    Chart::Direct(c.leave(&next, elapsed + tl))
                } else {
                    Chart::Inverted(next)
                };
                (next, shift(out, elapsed))
            }
        };
        st = next;
        match outcome {
            Outcome::Done => break,
            Outcome::Stopped(tb) if switch => elapsed = tb,
            Outcome::Stopped(tb) | Outcome::Collapsed(tb) => {
                status = Status::Singular { blowup_time: tb };
                elapsed = tb;
                break;
            }
        }
    }
    let reached = if status == Status::Ok { t } else { elapsed };
    let y = match st {
        Chart::Direct(y) => y,
        Chart::Inverted(inv) => pole.as_ref().unwrap().leave(&inv, reached),
    };
    let stability = Stability {
        m11: y[2],
        m12: y[3],
        m21: y[4],
        m22: y[5],
    };
    let tracked_log = coeffs.map(|c| {
        // modulus from M directly, winding from the integrated logarithm
        let l = stability.contract(&c);
        let principal = l.ln();
        let k = ((y[7].im - principal.im) / (2.0 * PI)).round();
        Complex64::new(principal.re, principal.im + 2.0 * PI * k)
    });
    TrajectoryResult {
        start,
        final_point: PhasePoint::new(y[0], y[1]),
        stability,
        action: y[6],
        status,
        time: reached,
        phase_angle: angle,
        tracked_log,
        path,
    }
}

/// Distance from the origin to the segment `[a, b]`.
fn closest_to_origin(a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    let s = (-(a.re * d.re + a.im * d.im) / len2).clamp(0.0, 1.0);
    (a + d * s).norm()
}

fn shift(out: Outcome, t0: f64) -> Outcome {
    match out {
        Outcome::Done => Outcome::Done,
        Outcome::Stopped(t) => Outcome::Stopped(t0 + t),
        Outcome::Collapsed(t) => Outcome::Collapsed(t0 + t),
    }
}

fn direct_rhs(
    y: &[Complex64; NSTATE],
    sys: &SystemParams,
    coeffs: Option<[Complex64; 4]>,
) -> [Complex64; NSTATE] {
    let inv_m = 1.0 / sys.mass;
    let (q, p) = (y[0], y[1]);
    let k = sys.curvature(q);
    let (m11, m12, m21, m22) = (y[2], y[3], y[4], y[5]);
    // d/dt M = [[0, -V''], [1/m, 0]] M
    let dm = [-k * m21, -k * m22, m11 * inv_m, m12 * inv_m];
    let h = p * p * (0.5 * inv_m) + sys.potential(q);
    let ds = p * p * inv_m - h;
    let dl = match coeffs {
        Some(c) => log_rate(&c, [m11, m12, m21, m22], dm),
        None => Complex64::new(0.0, 0.0),
    };
    [p * inv_m, sys.force(q), dm[0], dm[1], dm[2], dm[3], ds, dl]
}

fn log_rate(c: &[Complex64; 4], m: [Complex64; 4], dm: [Complex64; 4]) -> Complex64 {
    let l = c[0] * m[0] + c[1] * m[1] + c[2] * m[2] + c[3] * m[3];
    (c[0] * dm[0] + c[1] * dm[1] + c[2] * dm[2] + c[3] * dm[3]) / l
}

enum Chart {
    Direct([Complex64; NSTATE]),
    Inverted(Inverted),
}

const NINV: usize = 7;

/// State near a pole of the quartic flow, in `w = 1/q`, `v = p w^2 / m`:
/// `[w, v, dw/dp0, dw/dq0, dv/dp0, dv/dq0, log l]`.
#[derive(Clone, Copy)]
struct Inverted {
    y: [Complex64; NINV],
    /// `p q`, action and time on entry; the action follows from the virial
    /// identity `dS/dt = d(pq)/dt / 3 + E / 3`.
    pq0: Complex64,
    s0: Complex64,
    t0: f64,
}

/// Regular chart around the movable poles `q ~ 1/(t - t*)` of the quartic
/// oscillator. In it `w' = -v`, `v' = -4 E w^3 / m` with the conserved
/// energy `E` of the start point as a parameter, so passing close to a pole
/// costs neither steps nor the cancellation `p^2/2m + λq^4` at large `q`.
struct PoleChart {
    mass: f64,
    lambda: f64,
    energy: Complex64,
    /// `dE/dp0`, `dE/dq0`
    de: [Complex64; 2],
    r_in: f64,
    r_out: f64,
}

impl PoleChart {
    fn new(start: PhasePoint, sys: &SystemParams) -> Option<Self> {
        let Potential::Quartic { lambda } = sys.potential else {
            return None;
        };
        let energy = hamiltonian(&start, sys);
        let scale = (energy.norm() / lambda).powf(0.25).max(1.0);
        Some(Self {
            mass: sys.mass,
            lambda,
            energy,
            de: [start.p / sys.mass, -sys.force(start.q)],
            r_in: 3.0 * scale,
            r_out: 2.0 * scale,
        })
    }

    fn rhs(&self, y: &[Complex64; NINV], coeffs: Option<[Complex64; 4]>) -> [Complex64; NINV] {
        let (w, v) = (y[0], y[1]);
        let a = self.energy / self.mass;
        let w2 = w * w;
        let w3 = w2 * w;
        let dv = [
            -(a * 12.0) * w2 * y[2] - w3 * (self.de[0] * 4.0 / self.mass),
            -(a * 12.0) * w2 * y[3] - w3 * (self.de[1] * 4.0 / self.mass),
        ];
        let dl = match coeffs {
            Some(c) => {
                // M' = [[0, -V''], [1/m, 0]] M holds in any chart
                let (q, _, m) = self.direct(w, v, [y[2], y[3]], [y[4], y[5]]);
                let k = q * q * (12.0 * self.lambda);
                let dm = [-k * m[2], -k * m[3], m[0] / self.mass, m[1] / self.mass];
                log_rate(&c, m, dm)
            }
            None => Complex64::new(0.0, 0.0),
        };
        [-v, -(a * 4.0) * w3, -y[4], -y[5], dv[0], dv[1], dl]
    }

    fn point(&self, y: &[Complex64; NINV]) -> (Complex64, Complex64) {
        let q = y[0].inv();
        (q, y[1] * q * q * self.mass)
    }

    fn action(&self, inv: &Inverted, q: Complex64, p: Complex64, t: f64) -> Complex64 {
        inv.s0 + (p * q - inv.pq0) / 3.0 + self.energy * ((t - inv.t0) / 3.0)
    }

    /// `(q, p, M)` from chart coordinates, `M = [m11, m12, m21, m22]`.
    fn direct(
        &self,
        w: Complex64,
        v: Complex64,
        dw: [Complex64; 2],
        dv: [Complex64; 2],
    ) -> (Complex64, Complex64, [Complex64; 4]) {
        let q = w.inv();
        let q2 = q * q;
        let m = self.mass;
        let dq = |j: usize| -dw[j] * q2;
        let dp = |j: usize| (dv[j] * q2 - v * dw[j] * q2 * q * 2.0) * m;
        (q, v * q2 * m, [dp(0), dp(1), dq(0), dq(1)])
    }

    fn enter(&self, y: &[Complex64; NSTATE], t: f64) -> Inverted {
        let (q, p) = (y[0], y[1]);
        let w = q.inv();
        let w2 = w * w;
        let tw = [-w2 * y[4], -w2 * y[5]];
        let tv = [
            (w2 * y[2] + p * w * tw[0] * 2.0) / self.mass,
            (w2 * y[3] + p * w * tw[1] * 2.0) / self.mass,
        ];
        Inverted {
            y: [w, p * w2 / self.mass, tw[0], tw[1], tv[0], tv[1], y[7]],
            pq0: p * q,
            s0: y[6],
            t0: t,
        }
    }

    fn leave(&self, inv: &Inverted, t: f64) -> [Complex64; NSTATE] {
        let y = &inv.y;
        let (q, p, m) = self.direct(y[0], y[1], [y[2], y[3]], [y[4], y[5]]);
        let s = self.action(inv, q, p, t);
        [q, p, m[0], m[1], m[2], m[3], s, y[6]]
    }
}

/// Real time-reversed propagation: returns the real initial condition whose
/// trajectory reaches `(q, p)` after time `t`.
pub fn propagate_backward_real(
    q: f64,
    p: f64,
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
) -> TrajectoryResult {
    let mut r = propagate(PhasePoint::real(q, -p), t, sys, opts);
    r.final_point.p = -r.final_point.p;
    r
}

/// Replica of a real trajectory on the energy surface `gamma^4 E_0`:
/// `q_E(t/gamma) = gamma q(t)`, `p_E(t/gamma) = gamma^2 p(t)`, `S_E = gamma^3 S`.
pub fn scale_trajectory(path: &[PathSample], gamma: f64) -> Result<Vec<PathSample>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if path.iter().any(|s| !s.point.is_real()) {
        return Err(Error::InvalidParameter(
            "scaling replicas require a real reference trajectory".into(),
        ));
    }
    Ok(path
        .iter()
        .map(|s| PathSample {
            t: s.t / gamma,
            point: PhasePoint::new(s.point.q * gamma, s.point.p * (gamma * gamma)),
            action: s.action * gamma.powi(3),
        })
        .collect())
}
