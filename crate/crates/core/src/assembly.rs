//! Saddle contributions and assembled wavefunctions/overlaps, plus the two
//! real-trajectory approximations: a single linearized Gaussian about the
//! centroid and the off-center expansion about per-foliation references.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dynamics::{self, IntegratorOptions, SystemParams, Tracking, TrajectoryResult};
use crate::error::{Error, Result};
use crate::manifold::{initial_exponent, ManifoldCoordinate, PhasePoint, WavePacket};
use crate::continuation::{resolve_caustics, sweep_saddles, CausticPair, SaddleFamily, SweepOptions};
use crate::saddle::{find_exposed_saddles, Exposure, NewtonOptions, Saddle, Target};
use crate::wigner::{contour_point, wigner_matrix, FoliationSet, Reference};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub total_exponent: Complex64,
    pub prefactor: Complex64,
    pub value: Complex64,
}

impl Contribution {
    fn new(total_exponent: Complex64, prefactor: Complex64) -> Self {
        Self {
            total_exponent,
            prefactor,
            value: prefactor * total_exponent.exp(),
        }
    }

    /// `log10 |value|`, finite even when `value` underflows.
    pub fn log10_magnitude(&self) -> f64 {
        (self.total_exponent.re + self.prefactor.norm().ln()) / std::f64::consts::LN_10
    }
}

fn tracked(traj: &TrajectoryResult) -> Result<Complex64> {
    traj.tracked_log
        .ok_or_else(|| Error::BranchUnresolved("trajectory was propagated without a tracked functional".into()))
}

/// `exp(Φ) (dq_t/du)^{-1/2}` with the root continued from `+1` at `t = 0`.
pub fn saddle_contribution_wavefunction(s: &Saddle) -> Result<Contribution> {
    if !matches!(s.target, Target::Wavefunction { .. }) {
        return Err(Error::InvalidParameter("saddle does not solve a wavefunction problem".into()));
    }
    let log_z = tracked(&s.traj)?;
    Ok(Contribution::new(s.exponent, (-0.5 * log_z).exp()))
}

/// `exp(Φ) sqrt(2 pi hbar / (dF/du))` for an overlap saddle.
pub fn saddle_contribution_overlap(s: &Saddle, hbar: f64) -> Result<Contribution> {
    if !matches!(s.target, Target::Overlap { .. }) {
        return Err(Error::InvalidParameter("saddle does not solve an overlap problem".into()));
    }
    let log_df = tracked(&s.traj)?;
    Ok(Contribution::new(s.exponent, (2.0 * PI * hbar).sqrt() * (-0.5 * log_df).exp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleTerm {
    pub label: Option<i32>,
    pub exposure: Exposure,
    pub excluded: bool,
    pub contribution: Contribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPoint {
    pub x: f64,
    pub psi: Complex64,
    /// All saddles at `x`, including excluded and negligible ones.
    pub terms: Vec<SaddleTerm>,
}

/// Contributions below this fraction of the largest one are dropped.
pub const RELEVANCE_CUTOFF: f64 = 1e-12;

/// Sums non-excluded saddle contributions at every `x`. Terms whose magnitude
/// falls below [`RELEVANCE_CUTOFF`] times the largest magnitude in the table
/// are left out of the sum.
pub fn assemble_wavefunction(samples: &[(f64, Vec<Saddle>)]) -> Result<Vec<AssembledPoint>> {
    let mut table: Vec<AssembledPoint> = samples
        .iter()
        .map(|(x, saddles)| {
            let terms = saddles
                .iter()
                .map(|s| {
                    Ok(SaddleTerm {
                        label: s.foliation_label,
                        exposure: s.exposure,
                        excluded: s.stokes_excluded,
                        contribution: saddle_contribution_wavefunction(s)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AssembledPoint {
                x: *x,
                psi: Complex64::new(0.0, 0.0),
                terms,
            })
        })
        .collect::<Result<_>>()?;
    let max_log = table
        .iter()
        .flat_map(|p| p.terms.iter())
        .filter(|t| !t.excluded)
        .map(|t| t.contribution.log10_magnitude())
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = max_log + RELEVANCE_CUTOFF.log10();
    for p in table.iter_mut() {
        p.psi = p
            .terms
            .iter()
            .filter(|t| !t.excluded && t.contribution.log10_magnitude() >= floor)
            .map(|t| t.contribution.value)
            .sum();
    }
    Ok(table)
}

/// Grid and anchoring of a full GGWPD wavefunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgwpdOptions {
    /// Position where the exposed anchor saddles are collected; families are
    /// continued from here towards both ends of the grid.
    pub x_anchor: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    /// Half-width of the window searched for avoided crossings.
    pub caustic_window: f64,
}

impl Default for GgwpdOptions {
    fn default() -> Self {
        Self {
            x_anchor: 0.0,
            x_min: -16.0,
            x_max: 16.0,
            dx: 0.05,
            caustic_window: 1.0,
        }
    }
}

impl GgwpdOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !(self.x_min <= self.x_anchor && self.x_anchor <= self.x_max) || !(self.caustic_window > 0.0) {
            return Err(Error::InvalidParameter(format!("bad wavefunction grid {self:?}")));
        }
        Ok(())
    }

    /// Samples from the anchor down to `x_min` and from the anchor up to `x_max`.
    pub fn half_grids(&self) -> (Vec<f64>, Vec<f64>) {
        let n_left = ((self.x_anchor - self.x_min) / self.dx + 1e-9).floor() as usize;
        let n_right = ((self.x_max - self.x_anchor) / self.dx + 1e-9).floor() as usize;
        let left = (0..=n_left).map(|k| self.x_anchor - k as f64 * self.dx).collect();
        let right = (0..=n_right).map(|k| self.x_anchor + k as f64 * self.dx).collect();
        (left, right)
    }
}

#[derive(Debug, Clone)]
pub struct GgwpdRun {
    pub anchors: Vec<Saddle>,
    /// Families continued towards `x_min` and towards `x_max`.
    pub left: Vec<SaddleFamily>,
    pub right: Vec<SaddleFamily>,
    pub pairs: Vec<CausticPair>,
    /// Increasing in `x`.
    pub table: Vec<AssembledPoint>,
}

impl GgwpdRun {
    pub fn xs(&self) -> Vec<f64> {
        self.table.iter().map(|p| p.x).collect()
    }

    pub fn psi(&self) -> Vec<Complex64> {
        self.table.iter().map(|p| p.psi).collect()
    }

    pub fn caustics(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.x).collect()
    }
}

/// Exposed saddles of `set` at `x`, plus those of `outer` on pathways that
/// `set` does not have.
pub fn collect_anchors(
    set: &FoliationSet,
    outer: Option<&FoliationSet>,
    x: f64,
    nopts: &NewtonOptions,
) -> Result<Vec<Saddle>> {
    let mut anchors = find_exposed_saddles(set, x, nopts).saddles;
    if anchors.is_empty() {
        return Err(Error::InvalidParameter(format!("no exposed saddle at the anchor x = {x}")));
    }
    if let Some(o) = outer {
        let top = set.foliations.iter().map(|f| f.label).max().unwrap_or(i32::MIN);
        anchors.extend(
            find_exposed_saddles(o, x, nopts)
                .saddles
                .into_iter()
                .filter(|s| s.foliation_label.is_some_and(|l| l > top)),
        );
    }
    Ok(anchors)
}

/// Full GGWPD wavefunction: exposed saddles at the anchor, continued through
/// caustics in both directions, Stokes-filtered, and summed.
///
/// `outer` optionally supplies a wider contour of the same packet and time;
/// pathways it has beyond those of `set` are added as extra anchors (their
/// saddles sit outside `set`'s zone but still reach the far tails), and the
/// sweep re-tests exposure against its references.
pub fn ggwpd_wavefunction(
    set: &FoliationSet,
    outer: Option<&FoliationSet>,
    gopts: &GgwpdOptions,
    nopts: &NewtonOptions,
    sopts: &SweepOptions,
) -> Result<GgwpdRun> {
    gopts.validate()?;
    nopts.validate()?;
    let anchors = collect_anchors(set, outer, gopts.x_anchor, nopts)?;
    let sweep_set = outer.unwrap_or(set);
    let (lx, rx) = gopts.half_grids();
    let mut left = sweep_saddles(sweep_set, &anchors, &lx, nopts, sopts);
    let mut right = sweep_saddles(sweep_set, &anchors, &rx, nopts, sopts);
    let mut pairs = resolve_caustics(&mut left, gopts.caustic_window);
    pairs.extend(resolve_caustics(&mut right, gopts.caustic_window));
    let column = |fams: &[SaddleFamily], k: usize| -> Vec<Saddle> {
        fams.iter().filter_map(|f| f.samples.get(k).map(|s| s.saddle.clone())).collect()
    };
    let mut samples: Vec<(f64, Vec<Saddle>)> = Vec::with_capacity(lx.len() + rx.len());
    for k in (1..lx.len()).rev() {
        samples.push((lx[k], column(&left, k)));
    }
    for (k, &x) in rx.iter().enumerate() {
        samples.push((x, column(&right, k)));
    }
    let table = assemble_wavefunction(&samples)?;
    Ok(GgwpdRun {
        anchors,
        left,
        right,
        pairs,
        table,
    })
}

/// Sum over overlap saddles.
pub fn overlap_semiclassical(saddles: &[Saddle], hbar: f64) -> Result<Complex64> {
    let mut out = Complex64::new(0.0, 0.0);
    for s in saddles.iter().filter(|s| !s.stokes_excluded) {
        out += saddle_contribution_overlap(s, hbar)?.value;
    }
    Ok(out)
}

/// Gaussian carried along the centroid trajectory by the tangent map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolvedGaussian {
    pub q_center: f64,
    pub p_center: f64,
    pub width_t: Complex64,
    /// Constant part of the log-amplitude.
    pub phase_norm: Complex64,
    pub hbar: f64,
}

impl EvolvedGaussian {
    pub fn log_eval(&self, x: f64) -> Complex64 {
        let d = x - self.q_center;
        -self.width_t / (2.0 * self.hbar) * d * d + I * self.p_center / self.hbar * d + self.phase_norm
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.log_eval(x).exp()
    }

    pub fn as_packet(&self) -> Result<WavePacket> {
        WavePacket::new(self.q_center, self.p_center, self.width_t, self.hbar)
    }
}

fn z_functional(wp: &WavePacket) -> [Complex64; 4] {
    let zero = Complex64::new(0.0, 0.0);
    [zero, zero, I * wp.width, Complex64::new(1.0, 0.0)]
}

pub fn lwpd_propagate(wp: &WavePacket, t: f64, sys: &SystemParams, opts: &IntegratorOptions) -> Result<EvolvedGaussian> {
    let tracking = Tracking {
        log_functional: Some(z_functional(wp)),
        record_path: false,
    };
    let r = dynamics::propagate_with(PhasePoint::real(wp.q_center, wp.p_center), t, sys, opts, &tracking);
    let m = r.stability;
    let b = wp.width;
    let z = m.m22 + I * b * m.m21;
    let h = wp.hbar;
    let phase0 = I * (0.5 * wp.p_center * wp.q_center / h) + wp.log_norm();
    Ok(EvolvedGaussian {
        q_center: r.final_point.q.re,
        p_center: r.final_point.p.re,
        width_t: (b * m.m11 - I * m.m12) / z,
        phase_norm: phase0 + I * r.action / h - 0.5 * tracked(&r)?,
        hbar: h,
    })
}

/// Overlap of the classically transported initial Wigner density with the
/// Wigner density of the linearized Gaussian, normalized to 1 at `t = 0`.
/// Monte Carlo over `n_samples` initial conditions.
pub fn lwpd_validity_overlap(
    wp: &WavePacket,
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let g = lwpd_propagate(wp, t, sys, opts)?;
    let wf_t = wigner_matrix(&g.as_packet()?);
    let wf0 = wigner_matrix(wp);
    let h = wp.hbar;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    // radius 1 sigma on the contour parameterization: n_sigma = |v| sqrt(2/hbar)
    let starts: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| {
            let (a, b): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
            let r = (a * a + b * b).sqrt();
            let theta = b.atan2(a);
            let c = contour_point(theta, r, &wf0, h);
            (c.q, c.p)
        })
        .collect();
    let sum: f64 = starts
        .par_iter()
        .map(|&(q, p)| {
            let r = dynamics::propagate(PhasePoint::real(q, p), t, sys, opts);
            (-wf_t.quadratic_form(r.final_point.p.re, r.final_point.q.re) / h).exp()
        })
        .sum();
    // W_L = exp(-Q/hbar)/(pi hbar), and the t = 0 value of the integral is 1/(2 pi hbar)
    Ok(2.0 * sum / n_samples as f64)
}

/// Off-center Gaussian about one real reference: the initial packet expanded
/// about `q_r` is carried by the linearized flow of the reference, keeping the
/// linear term of the expansion. `None` if the local Gaussian is not
/// normalizable.
pub fn offcenter_term(reference: &TrajectoryResult, x: f64, wp: &WavePacket) -> Result<Option<Complex64>> {
    let m = reference.stability;
    let b = wp.width;
    let h = wp.hbar;
    let z = m.m22 + I * b * m.m21;
    let width_t = (b * m.m11 - I * m.m12) / z;
    if !(width_t.re > 0.0) {
        return Ok(None);
    }
    let (q_r, p_r) = (reference.start.q, reference.start.p);
    let (q_rt, p_rt) = (reference.final_point.q, reference.final_point.p);
    let c = wp.p_center + I * b * (q_r - wp.q_center) - p_r;
    let dq0 = (x - q_rt - m.m21 * c) / z;
    let dp0 = c + I * b * dq0;
    let dqt = x - q_rt;
    let dpt = m.m11 * dp0 + m.m12 * dq0;
    let ds = p_rt * dqt - p_r * dq0 + 0.5 * (dpt * dqt - dp0 * dq0);
    let log_z = tracked(reference)?;
    let expo = initial_exponent(ManifoldCoordinate(q_r + dq0), wp) + I * (reference.action + ds) / h;
    Ok(Some((expo - 0.5 * log_z).exp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffcenterPoint {
    pub x: f64,
    pub psi: Complex64,
    /// Foliations skipped at this `x` (non-normalizable local Gaussian).
    pub skipped: Vec<i32>,
}

/// Off-center sum over the foliations covering each `x`.
pub fn offcenter_sum(set: &FoliationSet, xs: &[f64]) -> Result<Vec<OffcenterPoint>> {
    xs.iter()
        .map(|&x| {
            let refs = set.references_at(x);
            offcenter_from_references(&set.wp, &set.sys, &set.opts, set.t, x, &refs)
        })
        .collect()
}

/// Off-center sum over the stationary references in `refs` (see
/// [`Reference::is_stationary`]).
pub fn offcenter_from_references(
    wp: &WavePacket,
    sys: &SystemParams,
    opts: &IntegratorOptions,
    t: f64,
    x: f64,
    refs: &[Reference],
) -> Result<OffcenterPoint> {
    let tracking = Tracking {
        log_functional: Some(z_functional(wp)),
        record_path: false,
    };
    let mut psi = Complex64::new(0.0, 0.0);
    let mut skipped = Vec::new();
    for r in refs.iter().filter(|r| r.is_stationary()) {
        let traj = dynamics::propagate_with(r.start(), t, sys, opts, &tracking);
        match offcenter_term(&traj, x, wp)? {
            Some(v) => psi += v,
            None => skipped.push(r.label),
        }
    }
    Ok(OffcenterPoint { x, psi, skipped })
}
