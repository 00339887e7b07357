//! Two-point boundary value problems on the ket manifold and their Newton
//! solution.
//!
//! The manifold coordinate `u` is the complex initial position; the initial
//! momentum follows from the ket constraint, so each problem is a single
//! complex equation `F(u) = 0` whose derivative comes from the tangent map.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{self, IntegratorOptions, Stability, SystemParams, Tracking, TrajectoryResult};
use crate::error::{Error, Result};
use crate::manifold::{bra_exponent, initial_exponent, manifold_lift, ManifoldCoordinate, PhasePoint, WavePacket};
use crate::wigner::{FoliationSet, Reference};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// What the final point of a saddle trajectory must satisfy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// `q_t = x`
    Wavefunction { x: f64 },
    /// `(p_t, q_t)` on the bra manifold of the packet.
    Overlap { bra: WavePacket },
}

impl Target {
    /// Coefficients of `dF/du` as a linear functional of the tangent map.
    pub fn jacobian_functional(&self, wp: &WavePacket) -> [Complex64; 4] {
        let b = wp.width;
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Target::Wavefunction { .. } => [zero, zero, I * b, Complex64::new(1.0, 0.0)],
            Target::Overlap { bra } => {
                let bs = bra.width.conj();
                [b, -I, I * b * bs, bs]
            }
        }
    }

    pub fn residual_at(&self, pt: &PhasePoint) -> Complex64 {
        match self {
            Target::Wavefunction { x } => pt.q - x,
            Target::Overlap { bra } => {
                bra.width.conj() * (pt.q - bra.q_center) - I * (pt.p - bra.p_center)
            }
        }
    }

    pub fn x(&self) -> Option<f64> {
        match self {
            Target::Wavefunction { x } => Some(*x),
            Target::Overlap { .. } => None,
        }
    }
}

/// A boundary value problem at fixed time for one initial packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpProblem {
    pub wp: WavePacket,
    pub sys: SystemParams,
    pub opts: IntegratorOptions,
    pub t: f64,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub f: Complex64,
    pub df: Complex64,
    /// Propagated with the continued logarithm of `dF/du`.
    pub traj: TrajectoryResult,
}

impl BvpProblem {
    pub fn with_target(&self, target: Target) -> Self {
        Self { target, ..*self }
    }

    /// Tracked logarithm of the prefactor functional along a real reference.
    /// Real trajectories never zero it, so its winding is unambiguous; exposed
    /// saddles take their branch from here rather than from their own complex
    /// path, whose winding jumps wherever the functional vanishes mid-flight.
    pub fn reference_log(&self, reference: &TrajectoryResult) -> Option<Complex64> {
        let tracking = Tracking {
            log_functional: Some(self.target.jacobian_functional(&self.wp)),
            record_path: false,
        };
        dynamics::propagate_with(reference.start, self.t, &self.sys, &self.opts, &tracking).tracked_log
    }

    pub fn residual(&self, u: Complex64) -> Result<Residual> {
        let start = manifold_lift(ManifoldCoordinate(u), &self.wp);
        let c = self.target.jacobian_functional(&self.wp);
        let tracking = Tracking {
            log_functional: Some(c),
            record_path: false,
        };
        let traj = dynamics::propagate_with(start, self.t, &self.sys, &self.opts, &tracking);
        if let dynamics::Status::Singular { blowup_time } = traj.status {
            return Err(Error::SingularTrajectory { blowup_time });
        }
        Ok(Residual {
            f: self.target.residual_at(&traj.final_point),
            df: traj.stability.contract(&c),
            traj,
        })
    }

    /// `Φ` with the contribution proportional to `exp(Φ)`: the initial-state
    /// exponent at the complex start, `i S / hbar`, and for overlaps the bra
    /// exponent at the final position.
    pub fn exponent(&self, u: Complex64, traj: &TrajectoryResult) -> Complex64 {
        let base = initial_exponent(ManifoldCoordinate(u), &self.wp) + I * traj.action / self.wp.hbar;
        match self.target {
            Target::Wavefunction { .. } => base,
            Target::Overlap { bra } => base + bra_exponent(traj.final_point.q, &bra),
        }
    }

    /// Linear prediction of the manifold coordinate solving the problem, from a
    /// real trajectory that need not lie on the manifold.
    pub fn linear_seed(&self, reference: &TrajectoryResult) -> Complex64 {
        let wp = &self.wp;
        let m = &reference.stability;
        let (q_r, p_r) = (reference.start.q, reference.start.p);
        // momentum offset of the manifold point above q_r from the reference
        let c = wp.p_center + I * wp.width * (q_r - wp.q_center) - p_r;
        let z = m.m22 + I * wp.width * m.m21;
        let f_r = self.target.residual_at(&reference.final_point);
        let dq = match self.target {
            Target::Wavefunction { .. } => -(f_r + m.m21 * c) / z,
            Target::Overlap { bra } => {
                let bs = bra.width.conj();
                let df = bs * z - I * (m.m12 + I * wp.width * m.m11);
                -(f_r + c * (bs * m.m21 - I * m.m11)) / df
            }
        };
        q_r + dq
    }
}

pub fn bvp_residual_wavefunction(
    u: Complex64,
    x: f64,
    t: f64,
    wp: &WavePacket,
    sys: &SystemParams,
    opts: &IntegratorOptions,
) -> Result<Residual> {
    BvpProblem {
        wp: *wp,
        sys: *sys,
        opts: *opts,
        t,
        target: Target::Wavefunction { x },
    }
    .residual(u)
}

pub fn bvp_residual_overlap(
    u: Complex64,
    bra: &WavePacket,
    t: f64,
    wp: &WavePacket,
    sys: &SystemParams,
    opts: &IntegratorOptions,
) -> Result<Residual> {
    BvpProblem {
        wp: *wp,
        sys: *sys,
        opts: *opts,
        t,
        target: Target::Overlap { bra: *bra },
    }
    .residual(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_clip: f64,
    pub dedup_radius: f64,
}

impl NewtonOptions {
    /// Defaults with the step clipped to half the packet's position spread.
    pub fn for_packet(wp: &WavePacket) -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            step_clip: 0.5 * wp.sigma_q(),
            dedup_radius: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter < 1 || !(self.step_clip > 0.0) || !(self.dedup_radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad newton options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub u: Complex64,
    pub residual: Residual,
    pub iterations: usize,
    /// `(u, |F|)` per iterate, starting with the seed.
    pub trace: Vec<(Complex64, f64)>,
}

pub fn newton_search(seed: Complex64, problem: &BvpProblem, nopts: &NewtonOptions) -> Result<NewtonReport> {
    let mut u = seed;
    let mut r = problem.residual(u)?;
    let mut trace = vec![(u, r.f.norm())];
    for it in 0..=nopts.max_iter {
        if r.f.norm() < nopts.tol {
            return Ok(NewtonReport {
                u,
                residual: r,
                iterations: it,
                trace,
            });
        }
        if it == nopts.max_iter {
            break;
        }
        if r.df.norm() == 0.0 || !r.df.is_finite() {
            return Err(Error::Divergence {
                iterations: it,
                residual: r.f.norm(),
            });
        }
        let mut du = -r.f / r.df;
        if du.norm() > nopts.step_clip {
            du *= nopts.step_clip / du.norm();
        }
        let mut next = None;
        for _ in 0..=8 {
            match problem.residual(u + du) {
                Ok(nr) => {
                    next = Some(nr);
                    break;
                }
                Err(_) => du *= 0.5,
            }
        }
        let Some(nr) = next else {
            return Err(Error::Divergence {
                iterations: it + 1,
                residual: r.f.norm(),
            });
        };
        u += du;
        r = nr;
        trace.push((u, r.f.norm()));
    }
    Err(Error::Divergence {
        iterations: nopts.max_iter,
        residual: r.f.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exposure {
    Exposed,
    Hidden,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Saddle {
    pub u0: ManifoldCoordinate,
    pub start: PhasePoint,
    pub traj: TrajectoryResult,
    /// Contribution exponent `Φ`; see [`BvpProblem::exponent`].
    pub exponent: Complex64,
    /// `dF/du` at the solution.
    pub jacobian: Complex64,
    pub exposure: Exposure,
    pub foliation_label: Option<i32>,
    pub stokes_excluded: bool,
    pub target: Target,
    pub t: f64,
}

impl Saddle {
    /// Moves the tracked logarithm of the prefactor functional onto the sheet
    /// nearest `anchor` (shifts by whole turns only).
    pub fn align_branch(&mut self, anchor: Complex64) {
        if let Some(l) = self.traj.tracked_log.as_mut() {
            let k = ((l.im - anchor.im) / (2.0 * std::f64::consts::PI)).round();
            l.im -= 2.0 * std::f64::consts::PI * k;
        }
    }

    pub fn from_report(problem: &BvpProblem, rep: NewtonReport, exposure: Exposure, label: Option<i32>) -> Self {
        Self {
            u0: ManifoldCoordinate(rep.u),
            start: rep.residual.traj.start,
            exponent: problem.exponent(rep.u, &rep.residual.traj),
            jacobian: rep.residual.df,
            traj: rep.residual.traj,
            exposure,
            foliation_label: label,
            stokes_excluded: false,
            target: problem.target,
            t: problem.t,
        }
    }

    pub fn u(&self) -> Complex64 {
        self.u0.0
    }

    /// Total complex action `-i hbar Φ`; its imaginary part controls the
    /// magnitude of the contribution (`|exp Φ| = exp(-Im S_tot / hbar)`).
    pub fn total_action(&self, hbar: f64) -> Complex64 {
        -I * hbar * self.exponent
    }
}

impl FoliationSet {
    pub fn problem(&self, target: Target) -> BvpProblem {
        BvpProblem {
            wp: self.wp,
            sys: self.sys,
            opts: self.opts,
            t: self.t,
            target,
        }
    }
}

/// Relative error of the linearized prediction of `s`'s final point from a
/// reference trajectory, `|z_r + M (z_s0 - z_r0) - z_s| / |z_s|` with `z = (p, q)`.
pub fn shadowing_check(s: &Saddle, reference: &TrajectoryResult) -> f64 {
    let m: &Stability = &reference.stability;
    let dp0 = s.start.p - reference.start.p;
    let dq0 = s.start.q - reference.start.q;
    let (dp, dq) = m.apply(dp0, dq0);
    let fin = &s.traj.final_point;
    let ep = reference.final_point.p + dp - fin.p;
    let eq = reference.final_point.q + dq - fin.q;
    let err = (ep.norm_sqr() + eq.norm_sqr()).sqrt();
    if err == 0.0 {
        return 0.0;
    }
    err / (fin.p.norm_sqr() + fin.q.norm_sqr()).sqrt()
}

/// A reference whose Newton search failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedFailure {
    pub label: i32,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposedSearch {
    pub saddles: Vec<Saddle>,
    pub references: Vec<Reference>,
    pub failures: Vec<SeedFailure>,
}

/// Seeds a Newton search from a reference; on failure retries once from a
/// reference a quarter of the crossing interval away.
fn search_from_reference(
    set: &FoliationSet,
    problem: &BvpProblem,
    r: &Reference,
    nopts: &NewtonOptions,
) -> Result<NewtonReport> {
    let first = newton_search(problem.linear_seed(&r.traj), problem, nopts);
    if first.is_ok() {
        return first;
    }
    let (a, b) = r.p_range;
    let p_ref = r.traj.final_point.p.re;
    let shift = 0.25 * (b - a);
    let p_alt = if p_ref + shift <= b { p_ref + shift } else { p_ref - shift };
    if let Some(x) = problem.target.x() {
        let alt = set.reference_at_momentum(x, p_alt, r.p_range);
        if let Ok(rep) = newton_search(problem.linear_seed(&alt.traj), problem, nopts) {
            return Ok(rep);
        }
    }
    first
}

/// Exposed saddles of the wavefunction problem at `x`: one Newton search per
/// foliation reference, deduplicated in the order of the references.
pub fn find_exposed_saddles(set: &FoliationSet, x: f64, nopts: &NewtonOptions) -> ExposedSearch {
    let refs = set.references_at(x);
    find_exposed_from(set, x, refs, nopts)
}

pub fn find_exposed_from(set: &FoliationSet, x: f64, refs: Vec<Reference>, nopts: &NewtonOptions) -> ExposedSearch {
    let problem = set.problem(Target::Wavefunction { x });
    let results: Vec<Result<NewtonReport>> = refs
        .par_iter()
        .map(|r| search_from_reference(set, &problem, r, nopts))
        .collect();
    let mut saddles: Vec<Saddle> = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in refs.iter().zip(results) {
        match res {
            Ok(rep) => {
                if saddles.iter().all(|s| (s.u() - rep.u).norm() >= nopts.dedup_radius) {
                    let mut s = Saddle::from_report(&problem, rep, Exposure::Exposed, Some(r.label));
                    if let Some(l) = problem.reference_log(&r.traj) {
                        s.align_branch(l);
                    }
                    saddles.push(s);
                }
            }
            Err(error) => failures.push(SeedFailure { label: r.label, error }),
        }
    }
    ExposedSearch {
        saddles,
        references: refs,
        failures,
    }
}

/// Exposed saddles of the overlap problem with `bra`, one search per foliation
/// seeded from the band point closest to the bra manifold.
pub fn find_exposed_overlap_saddles(set: &FoliationSet, bra: &WavePacket, nopts: &NewtonOptions) -> ExposedSearch {
    let problem = set.problem(Target::Overlap { bra: *bra });
    let refs = set.overlap_references(bra);
    let results: Vec<Result<NewtonReport>> = refs
        .par_iter()
        .map(|r| newton_search(problem.linear_seed(&r.traj), &problem, nopts))
        .collect();
    let mut saddles: Vec<Saddle> = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in refs.iter().zip(results) {
        match res {
            Ok(rep) => {
                if saddles.iter().all(|s| (s.u() - rep.u).norm() >= nopts.dedup_radius) {
                    let mut s = Saddle::from_report(&problem, rep, Exposure::Exposed, Some(r.label));
                    if let Some(l) = problem.reference_log(&r.traj) {
                        s.align_branch(l);
                    }
                    saddles.push(s);
                }
            }
            Err(error) => failures.push(SeedFailure { label: r.label, error }),
        }
    }
    ExposedSearch {
        saddles,
        references: refs,
        failures,
    }
}
