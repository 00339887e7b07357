//! Wigner density of the initial packet, its classically propagated σ-contours,
//! and the split of the evolved density into transport pathways (foliations).
//!
//! A foliation collects the real initial conditions that reach the final time
//! after the same number of half-oscillations. The count is read off the
//! unwrapped phase angle `atan2(q, p)`, which increases monotonically along any
//! real trajectory, so neighboring foliations are separated by trajectories
//! sitting exactly at a turning point (`p_t = 0`) at the final time. Each
//! foliation is a band of the spiral that the contour encloses; its two sides
//! appear as (up to) two arcs of the contour.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::dynamics::{self, IntegratorOptions, SystemParams, TrajectoryResult};
use crate::error::{Error, Result};
use crate::manifold::{PhasePoint, WavePacket};

/// `W(p, q) = (1/(pi hbar)) exp[-(Δp, Δq) A (Δp, Δq)^T / hbar]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerForm {
    /// Symmetric matrix in `(p, q)` ordering.
    pub a: [[f64; 2]; 2],
    pub p_center: f64,
    pub q_center: f64,
}

impl WignerForm {
    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    /// `(Δp, Δq) A (Δp, Δq)^T`
    pub fn quadratic_form(&self, p: f64, q: f64) -> f64 {
        let dp = p - self.p_center;
        let dq = q - self.q_center;
        self.a[0][0] * dp * dp + 2.0 * self.a[0][1] * dp * dq + self.a[1][1] * dq * dq
    }

    /// Number of standard deviations of the phase point `(p, q)`.
    pub fn n_sigma_of(&self, p: f64, q: f64, hbar: f64) -> f64 {
        (2.0 * self.quadratic_form(p, q) / hbar).sqrt()
    }
}

pub fn wigner_matrix(wp: &WavePacket) -> WignerForm {
    let c = wp.width.re;
    let d = wp.width.im;
    WignerForm {
        a: [[1.0 / c, d / c], [d / c, c + d * d / c]],
        p_center: wp.p_center,
        q_center: wp.q_center,
    }
}

pub fn wigner_eval(p: f64, q: f64, wf: &WignerForm, hbar: f64) -> f64 {
    (-wf.quadratic_form(p, q) / hbar).exp() / (PI * hbar)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourPoint {
    pub theta: f64,
    pub q: f64,
    pub p: f64,
}

/// Point at angle `theta` on the ellipse `(Δp, Δq) A (Δp, Δq)^T = n_sigma^2 hbar / 2`.
pub fn contour_point(theta: f64, n_sigma: f64, wf: &WignerForm, hbar: f64) -> ContourPoint {
    // Cholesky A = R^T R with R upper triangular; Δ = R^{-1} v, |v| = r.
    let r11 = wf.a[0][0].sqrt();
    let r12 = wf.a[0][1] / r11;
    let r22 = (wf.a[1][1] - r12 * r12).sqrt();
    let r = n_sigma * (0.5 * hbar).sqrt();
    let (v1, v2) = (r * theta.cos(), r * theta.sin());
    let dq = v2 / r22;
    let dp = (v1 - r12 * dq) / r11;
    ContourPoint {
        theta,
        q: wf.q_center + dq,
        p: wf.p_center + dp,
    }
}

/// Samples the `n_sigma` contour at `theta_k = 2 pi (k + 1/2) / n_points`,
/// counter-clockwise in the `(p, q)` plane.
///
/// The half-sample offset keeps samples off the axis points of the ellipse,
/// one of which sits exactly on the origin (a fixed point) for the standard
/// 5σ contour.
pub fn sigma_contour(n_sigma: f64, n_points: usize, wf: &WignerForm, hbar: f64) -> Result<Vec<ContourPoint>> {
    if !(n_sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("n_sigma must be positive, got {n_sigma}")));
    }
    if n_points < 16 {
        return Err(Error::InvalidParameter(format!(
            "contour needs at least 16 points, got {n_points}"
        )));
    }
    Ok((0..n_points)
        .map(|k| {
            let theta = 2.0 * PI * (k as f64 + 0.5) / n_points as f64;
            contour_point(theta, n_sigma, wf, hbar)
        })
        .collect())
}

/// Shoelace area of a closed polygon given as `(q, p)` pairs.
pub fn polygon_area(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedPoint {
    pub theta: f64,
    pub q0: f64,
    pub p0: f64,
    pub qt: f64,
    pub pt: f64,
    pub label: i32,
    pub traj: TrajectoryResult,
}

fn evolve_point(c: ContourPoint, t: f64, sys: &SystemParams, opts: &IntegratorOptions) -> EvolvedPoint {
    let traj = dynamics::propagate(PhasePoint::real(c.q, c.p), t, sys, opts);
    EvolvedPoint {
        theta: c.theta,
        q0: c.q,
        p0: c.p,
        qt: traj.final_point.q.re,
        pt: traj.final_point.p.re,
        label: traj.pathway_label(),
        traj,
    }
}

/// Propagates every contour point (in parallel, order preserved).
pub fn propagate_contour(
    contour: &[ContourPoint],
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
) -> Vec<EvolvedPoint> {
    contour
        .par_iter()
        .map(|&c| evolve_point(c, t, sys, opts))
        .collect()
}

/// Contiguous range of contour angles, possibly wrapping through `2 pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaInterval {
    pub lo: f64,
    /// `hi > lo`; may exceed `2 pi` when the arc wraps.
    pub hi: f64,
}

impl ThetaInterval {
    pub fn contains(&self, theta: f64) -> bool {
        let th = if theta < self.lo { theta + 2.0 * PI } else { theta };
        th >= self.lo && th <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foliation {
    /// Half-oscillation count of the pathway; ordinal labels follow it.
    pub label: i32,
    pub arcs: Vec<ThetaInterval>,
    /// Range of final positions covered by the band.
    pub q_t_range: (f64, f64),
}

impl Foliation {
    pub fn covers(&self, x: f64) -> bool {
        x >= self.q_t_range.0 && x <= self.q_t_range.1
    }
}

/// Real reference trajectory of one foliation at a final position.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub label: i32,
    pub x: f64,
    pub q0: f64,
    pub p0: f64,
    /// Final momenta bounding the band's crossing of `q_t = x`.
    pub p_range: (f64, f64),
    /// Number of standard deviations of the initial condition.
    pub n_sigma: f64,
    pub traj: TrajectoryResult,
}

impl Reference {
    pub fn start(&self) -> PhasePoint {
        PhasePoint::real(self.q0, self.p0)
    }

    /// Whether the weight maximum lies strictly inside the crossing. It can sit
    /// on an end only where the crossing was cut at `p = 0`; such a half has
    /// no stationary real point of its own and shares its saddle with the
    /// neighbouring half.
    pub fn is_stationary(&self) -> bool {
        let p = self.traj.final_point.p.re;
        let (a, b) = self.p_range;
        let tol = 1e-6 * (1.0 + a.abs().max(b.abs()));
        p - a > tol && b - p > tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoliationOptions {
    pub n_sigma: f64,
    pub n_points: usize,
    /// Bisection depth used to place label boundaries on the contour.
    pub max_refine: usize,
    /// Contour boundaries are located to this angular accuracy.
    pub theta_tol: f64,
}

impl Default for FoliationOptions {
    fn default() -> Self {
        Self {
            n_sigma: 5.0,
            n_points: 2048,
            max_refine: 60,
            theta_tol: 1e-9,
        }
    }
}

/// Propagated contour with its foliations at one time.
#[derive(Debug, Clone)]
pub struct FoliationSet {
    pub t: f64,
    pub wp: WavePacket,
    pub wf: WignerForm,
    pub sys: SystemParams,
    pub opts: IntegratorOptions,
    pub fopts: FoliationOptions,
    /// Contour samples, refined at foliation boundaries, sorted by angle.
    pub points: Vec<EvolvedPoint>,
    pub foliations: Vec<Foliation>,
}

/// Propagates the contour of `wp` to time `t` and segments it into foliations.
pub fn build_foliations(
    wp: &WavePacket,
    t: f64,
    sys: &SystemParams,
    opts: &IntegratorOptions,
    fopts: &FoliationOptions,
) -> Result<FoliationSet> {
    let wf = wigner_matrix(wp);
    let contour = sigma_contour(fopts.n_sigma, fopts.n_points, &wf, wp.hbar)?;
    let evolved = propagate_contour(&contour, t, sys, opts);
    let mut set = FoliationSet {
        t,
        wp: *wp,
        wf,
        sys: *sys,
        opts: *opts,
        fopts: *fopts,
        points: evolved,
        foliations: Vec::new(),
    };
    segment_foliations(&mut set)?;
    Ok(set)
}

/// Refines the label boundaries of `set.points` and groups arcs of equal label.
pub fn segment_foliations(set: &mut FoliationSet) -> Result<()> {
    if set.points.iter().any(|p| !p.traj.is_ok()) {
        return Err(Error::InvalidParameter(
            "contour trajectories must be regular".into(),
        ));
    }
    let n = set.points.len();
    // locate every boundary between differently labeled neighbors
    let gaps: Vec<usize> = (0..n)
        .filter(|&i| set.points[i].label != set.points[(i + 1) % n].label)
        .collect();
    let refined: Vec<Vec<EvolvedPoint>> = gaps
        .par_iter()
        .map(|&i| refine_boundary(set, &set.points[i], &set.points[(i + 1) % n]))
        .collect::<Result<_>>()?;
    for pts in refined {
        set.points.extend(pts);
    }
    set.points
        .sort_by(|a, b| a.theta.partial_cmp(&b.theta).expect("finite angles"));

    let n = set.points.len();
    let labels: Vec<i32> = set.points.iter().map(|p| p.label).collect();
    let mut foliations: Vec<Foliation> = Vec::new();
    // start the sweep at a label change so no arc straddles index 0
    let start = (0..n).find(|&i| labels[i] != labels[(i + n - 1) % n]);
    let arcs: Vec<(i32, Vec<usize>)> = match start {
        None => vec![(labels[0], (0..n).collect())],
        Some(s) => {
            let mut arcs = Vec::new();
            let mut cur: Vec<usize> = Vec::new();
            for k in 0..n {
                let i = (s + k) % n;
                if !cur.is_empty() && labels[i] != labels[cur[0]] {
                    arcs.push((labels[cur[0]], std::mem::take(&mut cur)));
                }
                cur.push(i);
            }
            arcs.push((labels[cur[0]], cur));
            arcs
        }
    };
    for (label, idx) in arcs {
        let first = &set.points[idx[0]];
        let last = &set.points[*idx.last().expect("non-empty arc")];
        let mut hi = last.theta;
        if hi < first.theta || idx.len() == n {
            hi += if idx.len() == n { 0.0 } else { 2.0 * PI };
        }
        let arc = ThetaInterval {
            lo: first.theta,
            hi: if idx.len() == n { first.theta + 2.0 * PI } else { hi },
        };
        let (mut lo_q, mut hi_q) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &idx {
            lo_q = lo_q.min(set.points[i].qt);
            hi_q = hi_q.max(set.points[i].qt);
        }
        match foliations.iter_mut().find(|f| f.label == label) {
            Some(f) => {
                f.arcs.push(arc);
                f.q_t_range = (f.q_t_range.0.min(lo_q), f.q_t_range.1.max(hi_q));
            }
            None => foliations.push(Foliation {
                label,
                arcs: vec![arc],
                q_t_range: (lo_q, hi_q),
            }),
        }
    }
    foliations.sort_by_key(|f| f.label);
    set.foliations = foliations;
    Ok(())
}

fn refine_boundary(set: &FoliationSet, a: &EvolvedPoint, b: &EvolvedPoint) -> Result<Vec<EvolvedPoint>> {
    let mut lo = a.clone();
    let mut hi = b.clone();
    let mut hi_theta = b.theta;
    if hi_theta < lo.theta {
        hi_theta += 2.0 * PI;
    }
    let mut out = Vec::new();
    let point_at = |theta: f64| {
        let c = contour_point(theta, set.fopts.n_sigma, &set.wf, set.wp.hbar);
        let th = theta.rem_euclid(2.0 * PI);
        let mut e = evolve_point(c, set.t, &set.sys, &set.opts);
        e.theta = th;
        e
    };
    let mut lo_theta = lo.theta;
    for _ in 0..set.fopts.max_refine {
        if hi_theta - lo_theta < set.fopts.theta_tol {
            break;
        }
        let mid_theta = 0.5 * (lo_theta + hi_theta);
        let mid = point_at(mid_theta);
        if !mid.traj.is_ok() {
            return Err(Error::UnresolvedFold {
                theta_lo: lo_theta,
                theta_hi: hi_theta,
            });
        }
        if mid.label == lo.label {
            lo = mid;
            lo_theta = mid_theta;
        } else if mid.label == hi.label {
            hi = mid;
            hi_theta = mid_theta;
        } else {
            // a third label in between: split and refine both halves
            let left = refine_boundary(set, &lo, &mid)?;
            let right = refine_boundary(set, &mid, &hi)?;
            out.extend(left);
            out.push(mid);
            out.extend(right);
            return Ok(out);
        }
    }
    // Contours enclosing the origin cross the cut of the initial angle, where
    // the winding count jumps by a full turn; that is an arc end, not a fold.
    let across_cut = (lo.q0.atan2(lo.p0) - hi.q0.atan2(hi.p0)).abs() > PI;
    if (lo.label - hi.label).abs() > 1 && !across_cut {
        return Err(Error::UnresolvedFold {
            theta_lo: lo_theta.rem_euclid(2.0 * PI),
            theta_hi: hi_theta.rem_euclid(2.0 * PI),
        });
    }
    if lo.theta != a.theta {
        out.push(lo);
    }
    if hi.theta != b.theta {
        out.push(hi);
    }
    Ok(out)
}

impl FoliationSet {
    pub fn foliation(&self, label: i32) -> Option<&Foliation> {
        self.foliations.iter().find(|f| f.label == label)
    }

    fn backward(&self, x: f64, p: f64) -> TrajectoryResult {
        dynamics::propagate_backward_real(x, p, self.t, &self.sys, &self.opts)
    }

    /// Reference through the final point `(x, p)`.
    pub fn reference_at_momentum(&self, x: f64, p: f64, range: (f64, f64)) -> Reference {
        let back = self.backward(x, p);
        let (q0, p0) = (back.final_point.q.re, back.final_point.p.re);
        let traj = dynamics::propagate(PhasePoint::real(q0, p0), self.t, &self.sys, &self.opts);
        Reference {
            label: traj.pathway_label(),
            x,
            q0,
            p0,
            p_range: range,
            n_sigma: self.wf.n_sigma_of(p0, q0, self.wp.hbar),
            traj,
        }
    }

    /// Points where the evolved contour crosses `q_t = x`, as final momenta.
    fn contour_crossings(&self, x: f64) -> Vec<f64> {
        let n = self.points.len();
        let idx: Vec<usize> = (0..n)
            .filter(|&i| {
                let (a, b) = (&self.points[i], &self.points[(i + 1) % n]);
                (a.qt - x) * (b.qt - x) <= 0.0 && a.qt != b.qt
            })
            .collect();
        idx.par_iter()
            .map(|&i| {
                let a = &self.points[i];
                let b = &self.points[(i + 1) % n];
                let mut lo = a.theta;
                let mut hi = b.theta;
                if hi < lo {
                    hi += 2.0 * PI;
                }
                let (mut f_lo, mut p_lo) = (a.qt - x, a.pt);
                let mut p_hi = b.pt;
                for _ in 0..40 {
                    if hi - lo < 1e-12 {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    let c = contour_point(mid, self.fopts.n_sigma, &self.wf, self.wp.hbar);
                    let e = evolve_point(c, self.t, &self.sys, &self.opts);
                    let f = e.qt - x;
                    if f == 0.0 {
                        return e.pt;
                    }
                    if (f < 0.0) == (f_lo < 0.0) {
                        lo = mid;
                        f_lo = f;
                        p_lo = e.pt;
                    } else {
                        hi = mid;
                        p_hi = e.pt;
                    }
                }
                0.5 * (p_lo + p_hi)
            })
            .collect()
    }

    /// One real reference per band crossing of the line `q_t = x`: the initial
    /// condition of highest Wigner weight on that crossing.
    pub fn references_at(&self, x: f64) -> Vec<Reference> {
        let mut cuts = self.contour_crossings(x);
        if cuts.is_empty() {
            return Vec::new();
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite momenta"));
        if cuts[0] < 0.0 && *cuts.last().unwrap() > 0.0 {
            // labels change where the line meets p = 0
            cuts.push(0.0);
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let limit = 0.5 * self.fopts.n_sigma * self.fopts.n_sigma * self.wp.hbar;
        let gaps: Vec<(f64, f64)> = cuts
            .windows(2)
            .map(|w| (w[0], w[1]))
            .filter(|(a, b)| b - a > 1e-9 * (1.0 + a.abs().max(b.abs())))
            .collect();
        let mut refs: Vec<Reference> = gaps
            .par_iter()
            .filter_map(|&(a, b)| {
                let mid = 0.5 * (a + b);
                let back = self.backward(x, mid);
                let (q0, p0) = (back.final_point.q.re, back.final_point.p.re);
                if self.wf.quadratic_form(p0, q0) > limit {
                    return None;
                }
                let best = self.maximize_weight(x, a, b);
                Some(self.reference_at_momentum(x, best, (a, b)))
            })
            .collect();
        refs.sort_by(|a, b| a.p_range.0.partial_cmp(&b.p_range.0).unwrap());
        refs
    }

    /// Golden-section search for the final momentum in `[a, b]` whose backward
    /// image has the largest initial Wigner weight.
    fn maximize_weight(&self, x: f64, a: f64, b: f64) -> f64 {
        let cost = |p: f64| {
            let back = self.backward(x, p);
            self.wf.quadratic_form(back.final_point.p.re, back.final_point.q.re)
        };
        // coarse scan guards against a non-unimodal profile
        let n = 8;
        let mut best = (0.5 * (a + b), f64::INFINITY);
        for k in 0..=n {
            let p = a + (b - a) * (k as f64) / (n as f64);
            let c = cost(p);
            if c < best.1 {
                best = (p, c);
            }
        }
        let h = (b - a) / n as f64;
        let (mut lo, mut hi) = ((best.0 - h).max(a), (best.0 + h).min(b));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (cost(x1), cost(x2));
        for _ in 0..40 {
            if hi - lo < 1e-8 * (1.0 + b.abs().max(a.abs())) {
                break;
            }
            if f1 < f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = cost(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = cost(x2);
            }
        }
        let p = 0.5 * (lo + hi);
        if cost(p) <= best.1 {
            p
        } else {
            best.0
        }
    }

    /// One reference per foliation for an overlap with `bra`: the band point
    /// (from a polar grid filling the contour) whose final point is closest to
    /// the bra manifold.
    pub fn overlap_references(&self, bra: &WavePacket) -> Vec<Reference> {
        let (nr, nth) = (24usize, 160usize);
        let cells: Vec<(f64, f64)> = (0..nr)
            .flat_map(|i| {
                let s = self.fopts.n_sigma * (i as f64 + 0.5) / nr as f64;
                (0..nth).map(move |j| (s, 2.0 * PI * (j as f64 + 0.5) / nth as f64))
            })
            .collect();
        let evolved: Vec<(f64, EvolvedPoint)> = cells
            .par_iter()
            .map(|&(s, th)| {
                let c = contour_point(th, s, &self.wf, self.wp.hbar);
                let e = evolve_point(c, self.t, &self.sys, &self.opts);
                let res = bra.width.conj() * (e.qt - bra.q_center)
                    - num_complex::Complex64::new(0.0, 1.0) * (e.pt - bra.p_center);
                (res.norm(), e)
            })
            .collect();
        let mut best: Vec<(f64, &EvolvedPoint, f64)> = Vec::new();
        for (i, (r, e)) in evolved.iter().enumerate() {
            let s = cells[i].0;
            match best.iter_mut().find(|b| b.1.label == e.label) {
                Some(b) if *r < b.0 => *b = (*r, e, s),
                Some(_) => {}
                None => best.push((*r, e, s)),
            }
        }
        best.sort_by_key(|b| b.1.label);
        best.into_iter()
            .map(|(_, e, s)| Reference {
                label: e.label,
                x: e.qt,
                q0: e.q0,
                p0: e.p0,
                p_range: (e.pt, e.pt),
                n_sigma: s,
                traj: e.traj.clone(),
            })
            .collect()
    }

    /// Best reference of foliation `label` at `x`.
    pub fn select_reference(&self, label: i32, x: f64) -> Result<Reference> {
        self.references_at(x)
            .into_iter()
            .filter(|r| r.label == label)
            .min_by(|a, b| a.n_sigma.partial_cmp(&b.n_sigma).unwrap())
            .ok_or(Error::NotCovering { label, x })
    }

    /// Real references spread over the band of `label`: contour points of
    /// the foliation's arcs at evenly spaced angles.
    pub fn spread_references(&self, label: i32, count: usize) -> Vec<Reference> {
        let Some(f) = self.foliation(label) else {
            return Vec::new();
        };
        let total: f64 = f.arcs.iter().map(|a| a.width()).sum();
        (0..count)
            .filter_map(|k| {
                let mut s = total * (k as f64 + 0.5) / count as f64;
                for arc in &f.arcs {
                    if s <= arc.width() {
                        let th = arc.lo + s;
                        let c = contour_point(th, self.fopts.n_sigma, &self.wf, self.wp.hbar);
                        let e = evolve_point(c, self.t, &self.sys, &self.opts);
                        return Some(Reference {
                            label: e.label,
                            x: e.qt,
                            q0: e.q0,
                            p0: e.p0,
                            p_range: (e.pt, e.pt),
                            n_sigma: self.fopts.n_sigma,
                            traj: e.traj,
                        });
                    }
                    s -= arc.width();
                }
                None
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn par() -> WavePacket {
        WavePacket::new(0.0, 20.0, Complex64::new(32.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn matrix_examples() {
        let a = wigner_matrix(&par());
        assert_eq!(a.a, [[1.0 / 32.0, 0.0], [0.0, 32.0]]);
        let one = WavePacket::new(0.0, 0.0, Complex64::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(wigner_matrix(&one).a, [[1.0, 0.0], [0.0, 1.0]]);
        let chirp = WavePacket::new(0.0, 0.0, Complex64::new(1.0, 1.0), 1.0).unwrap();
        let w = wigner_matrix(&chirp);
        assert_eq!(w.a, [[1.0, 1.0], [1.0, 2.0]]);
        assert_abs_diff_eq!(w.det(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn density_normalized_and_peaked() {
        let wf = wigner_matrix(&par());
        assert_abs_diff_eq!(wigner_eval(20.0, 0.0, &wf, 1.0), 1.0 / PI, epsilon = 1e-15);
        // ±8σ box around the centroid: σ_p = 4, σ_q = 1/8
        let (np, nq) = (801, 801);
        let (hp, hq) = (64.0 / (np - 1) as f64, 2.0 / (nq - 1) as f64);
        let mut s = 0.0;
        for i in 0..np {
            for j in 0..nq {
                let p = -12.0 + i as f64 * hp;
                let q = -1.0 + j as f64 * hq;
                s += wigner_eval(p, q, &wf, 1.0) * hp * hq;
            }
        }
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn one_sigma_contour_axes() {
        let wf = wigner_matrix(&par());
        let right = contour_point(0.0, 1.0, &wf, 1.0);
        assert_abs_diff_eq!(right.p, 24.0, epsilon = 1e-12);
        assert_abs_diff_eq!(right.q, 0.0, epsilon = 1e-12);
        let top = contour_point(0.5 * PI, 1.0, &wf, 1.0);
        assert_abs_diff_eq!(top.p, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(top.q, 0.125, epsilon = 1e-12);
        let five = contour_point(0.5 * PI, 5.0, &wf, 1.0);
        assert_abs_diff_eq!(five.q, 0.625, epsilon = 1e-12);
    }

    #[test]
    fn contour_points_share_quadratic_form() {
        let wp = WavePacket::new(0.3, 2.0, Complex64::new(2.0, -0.6), 0.5).unwrap();
        let wf = wigner_matrix(&wp);
        let pts = sigma_contour(3.0, 64, &wf, wp.hbar).unwrap();
        for c in &pts {
            assert_abs_diff_eq!(wf.quadratic_form(c.p, c.q), 9.0 * 0.25, epsilon = 1e-12);
        }
        assert!(sigma_contour(3.0, 8, &wf, 1.0).is_err());
        assert!(sigma_contour(0.0, 64, &wf, 1.0).is_err());
    }

    #[test]
    fn contour_is_counter_clockwise_in_p_q() {
        let wf = wigner_matrix(&par());
        let pts = sigma_contour(1.0, 64, &wf, 1.0).unwrap();
        let mut s = 0.0;
        for i in 0..pts.len() {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            s += a.p * b.q - b.p * a.q;
        }
        assert!(s > 0.0);
    }

    #[test]
    fn zero_time_single_foliation() {
        let sys = SystemParams::quartic(0.05, 1.0, 1.0).unwrap();
        let fopts = FoliationOptions {
            n_points: 256,
            ..Default::default()
        };
        let set = build_foliations(&par(), 0.0, &sys, &IntegratorOptions::default(), &fopts).unwrap();
        assert_eq!(set.foliations.len(), 1);
        let f = &set.foliations[0];
        assert!((f.q_t_range.0 + 0.625).abs() < 1e-3 && (f.q_t_range.1 - 0.625).abs() < 1e-3);
        let refs = set.references_at(0.2);
        assert_eq!(refs.len(), 1);
        // the weight-maximizing point on q = 0.2 is (0.2, 20)
        assert_abs_diff_eq!(refs[0].q0, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(refs[0].p0, 20.0, epsilon = 1e-6);
        assert!(set.select_reference(0, 0.7).is_err());
    }
}
