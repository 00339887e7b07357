//! Continuation of saddle families in the final position, caustic and Stokes
//! handling, and the singularity map of the manifold.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{self, Status};
use crate::error::{Error, Result};
use crate::manifold::{manifold_lift, ManifoldCoordinate};
use crate::saddle::{newton_search, BvpProblem, Exposure, NewtonOptions, Saddle, Target};
use crate::wigner::{FoliationSet, Reference};

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySample {
    pub x: f64,
    pub saddle: Saddle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleFamily {
    /// Foliation label of the anchor saddle.
    pub label: i32,
    pub samples: Vec<FamilySample>,
    /// Where the exposure first flips along the sweep.
    pub caustic_x: Option<f64>,
    /// Where Stokes exclusion begins.
    pub stokes_x: Option<f64>,
    /// Last good position and cause when continuation stopped early.
    pub terminated: Option<(f64, Error)>,
}

impl SaddleFamily {
    pub fn xs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn at(&self, x: f64) -> Option<&Saddle> {
        self.samples.iter().find(|s| s.x == x).map(|s| &s.saddle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Smallest substep before a family is abandoned.
    pub min_dx: f64,
    /// A corrector step may move `u` by at most this fraction of the predicted
    /// increment (plus a small absolute allowance).
    pub corrector_ratio: f64,
    /// Re-test exposure from real references at every sample.
    pub retest_exposure: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            min_dx: 1e-6,
            corrector_ratio: 0.5,
            retest_exposure: true,
        }
    }
}

/// Whether a real-seeded search from any of `refs` reaches `u`.
pub fn reached_from(
    problem: &BvpProblem,
    refs: &[Reference],
    u: Complex64,
    nopts: &NewtonOptions,
) -> bool {
    refs.iter().any(|r| {
        newton_search(problem.linear_seed(&r.traj), problem, nopts)
            .map(|rep| (rep.u - u).norm() < nopts.dedup_radius.max(1e3 * nopts.tol))
            .unwrap_or(false)
    })
}

/// Carries the prefactor branch from `prev` to `next` by continuity: the
/// Gaussian integral is analytic in `x` even where the time-tracked winding of
/// the complex path jumps.
fn align_branch(prev: &Saddle, next: &mut Saddle) {
    if let Some(a) = prev.traj.tracked_log {
        next.align_branch(a);
    }
}

/// One continuation step from `(x0, s0)` to `x1`, halving the step on failure.
fn continue_to(
    set: &FoliationSet,
    s0: &Saddle,
    x0: f64,
    x1: f64,
    nopts: &NewtonOptions,
    sopts: &SweepOptions,
) -> Result<Saddle> {
    let mut cur = s0.clone();
    let mut x = x0;
    let mut h = x1 - x0;
    while x != x1 {
        if (x1 - x).abs() <= h.abs() {
            h = x1 - x;
        }
        if h.abs() < sopts.min_dx {
            return Err(Error::Divergence {
                iterations: 0,
                residual: f64::NAN,
            });
        }
        let xn = x + h;
        let problem = set.problem(Target::Wavefunction { x: xn });
        // dq_t/du = dF/du, so du/dx = 1/dF
        let du = h / cur.jacobian;
        let pred = cur.u() + du;
        let ok = newton_search(pred, &problem, nopts).ok().filter(|rep| {
            (rep.u - pred).norm() <= sopts.corrector_ratio * du.norm() + 10.0 * nopts.tol
        });
        match ok {
            Some(rep) => {
                let mut next = Saddle::from_report(&problem, rep, cur.exposure, cur.foliation_label);
                align_branch(&cur, &mut next);
                cur = next;
                x = xn;
                h *= 2.0;
            }
            None => h *= 0.5,
        }
    }
    Ok(cur)
}

/// Follows every anchor saddle along `x_grid` (which starts at the anchors'
/// position). Exposure is re-tested at each sample from the real references of
/// the family's foliation.
pub fn sweep_saddles(
    set: &FoliationSet,
    anchors: &[Saddle],
    x_grid: &[f64],
    nopts: &NewtonOptions,
    sopts: &SweepOptions,
) -> Vec<SaddleFamily> {
    let refs: Vec<Vec<Reference>> = if sopts.retest_exposure {
        x_grid.iter().map(|&x| set.references_at(x)).collect()
    } else {
        vec![Vec::new(); x_grid.len()]
    };
    anchors
        .par_iter()
        .map(|a| sweep_one(set, a, x_grid, &refs, nopts, sopts))
        .collect()
}

fn sweep_one(
    set: &FoliationSet,
    anchor: &Saddle,
    x_grid: &[f64],
    refs: &[Vec<Reference>],
    nopts: &NewtonOptions,
    sopts: &SweepOptions,
) -> SaddleFamily {
    let label = anchor.foliation_label.unwrap_or(-1);
    let mut fam = SaddleFamily {
        label,
        samples: Vec::new(),
        caustic_x: None,
        stokes_x: None,
        terminated: None,
    };
    let x0 = anchor.target.x().expect("wavefunction anchor");
    let mut cur = anchor.clone();
    let mut x_prev = x0;
    for (k, &x) in x_grid.iter().enumerate() {
        if x != x_prev {
            match continue_to(set, &cur, x_prev, x, nopts, sopts) {
                Ok(s) => cur = s,
                Err(e) => {
                    fam.terminated = Some((x_prev, e));
                    break;
                }
            }
        }
        if sopts.retest_exposure {
            let own: Vec<Reference> = refs[k].iter().filter(|r| r.label == label).cloned().collect();
            let problem = set.problem(Target::Wavefunction { x });
            cur.exposure = if reached_from(&problem, &own, cur.u(), nopts) {
                Exposure::Exposed
            } else {
                Exposure::Hidden
            };
        }
        if fam.caustic_x.is_none() {
            if let Some(last) = fam.samples.last() {
                if last.saddle.exposure != cur.exposure {
                    fam.caustic_x = Some(0.5 * (last.x + x));
                }
            }
        }
        fam.samples.push(FamilySample { x, saddle: cur.clone() });
        x_prev = x;
    }
    fam
}

/// Avoided crossing of two families: the interior minimum of `|u1 - u2|` on
/// their common grid where both flip exposure within `window` of it.
pub fn detect_caustic(f1: &SaddleFamily, f2: &SaddleFamily, window: f64) -> Option<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = f1
        .samples
        .iter()
        .filter_map(|a| {
            f2.samples
                .iter()
                .find(|b| b.x == a.x)
                .map(|b| (a.x, (a.saddle.u() - b.saddle.u()).norm()))
        })
        .collect();
    if pairs.len() < 3 {
        return None;
    }
    let flips = |f: &SaddleFamily, xc: f64| {
        f.samples.windows(2).any(|w| {
            w[0].saddle.exposure != w[1].saddle.exposure
                && (0.5 * (w[0].x + w[1].x) - xc).abs() <= window
        })
    };
    let mut best: Option<(f64, f64)> = None;
    for i in 1..pairs.len() - 1 {
        let (x, d) = pairs[i];
        if d <= pairs[i - 1].1 && d <= pairs[i + 1].1 && flips(f1, x) && flips(f2, x) {
            // parabolic refinement of the minimum position
            let (xa, da) = pairs[i - 1];
            let (xb, db) = pairs[i + 1];
            let denom = da - 2.0 * d + db;
            let xc = if denom > 0.0 && (xb - x - (x - xa)).abs() < 1e-12 * (1.0 + x.abs()) {
                x + 0.5 * (xb - x) * (da - db) / denom
            } else {
                x
            };
            if best.is_none_or(|b| d < b.1) {
                best = Some((xc, d));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesResolution {
    pub kept: i32,
    pub excluded: i32,
    pub x_cross: f64,
}

/// Resolves a caustic pair: beyond the crossing of the real parts of the total
/// actions (`Re S = hbar Im Φ`), on the side where both are hidden, the member
/// whose `Im S` decreases away from the caustic is excluded. Returns `None`
/// (neither excluded) when no crossing is found within `window`.
pub fn stokes_filter(
    f1: &mut SaddleFamily,
    f2: &mut SaddleFamily,
    caustic_x: f64,
    window: f64,
) -> Option<StokesResolution> {
    let common: Vec<(f64, Complex64, Complex64)> = f1
        .samples
        .iter()
        .filter_map(|a| {
            f2.samples
                .iter()
                .find(|b| b.x == a.x)
                .map(|b| (a.x, a.saddle.exponent, b.saddle.exponent))
        })
        .filter(|(x, _, _)| (x - caustic_x).abs() <= window)
        .collect();
    // forbidden side: where both members are hidden
    let hidden_at = |f: &SaddleFamily, x: f64| f.at(x).is_some_and(|s| s.exposure == Exposure::Hidden);
    let side = {
        let beyond: Vec<f64> = common
            .iter()
            .map(|c| c.0)
            .filter(|&x| hidden_at(f1, x) && hidden_at(f2, x))
            .collect();
        let mean = beyond.iter().sum::<f64>() / beyond.len().max(1) as f64;
        if beyond.is_empty() {
            return None;
        }
        (mean - caustic_x).signum()
    };
    let mut best: Option<f64> = None;
    for w in common.windows(2) {
        let d0 = w[0].1.im - w[0].2.im;
        let d1 = w[1].1.im - w[1].2.im;
        if d0 == 0.0 || d0 * d1 < 0.0 {
            let xc = if d0 == d1 { w[0].0 } else { w[0].0 + (w[1].0 - w[0].0) * d0 / (d0 - d1) };
            if best.is_none_or(|b| (xc - caustic_x).abs() < (b - caustic_x).abs()) {
                best = Some(xc);
            }
        }
    }
    let x_cross = best?;
    // Im S = -hbar Re Φ: decreasing Im S away from the caustic means a growing
    // contribution. Compare the mean slope of Re Φ on the forbidden side.
    let slope = |f: &SaddleFamily| {
        let pts: Vec<(f64, f64)> = f
            .samples
            .iter()
            .filter(|s| (s.x - x_cross) * side > 0.0 && (s.x - caustic_x).abs() <= window)
            .map(|s| (s.x, s.saddle.exponent.re))
            .collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        (b.1 - a.1) / (b.0 - a.0) * side
    };
    let (s1, s2) = (slope(f1), slope(f2));
    let (kept, excluded) = if s1 > s2 { (f2, f1) } else { (f1, f2) };
    excluded.stokes_x = Some(x_cross);
    for s in excluded.samples.iter_mut() {
        if (s.x - x_cross) * side > 0.0 {
            s.saddle.stokes_excluded = true;
        }
    }
    Some(StokesResolution {
        kept: kept.label,
        excluded: excluded.label,
        x_cross,
    })
}

/// Two families meeting at an avoided crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausticPair {
    pub labels: (i32, i32),
    pub x: f64,
    /// Smallest `|u1 - u2|` along the grid.
    pub gap: f64,
    pub resolution: Option<StokesResolution>,
}

/// Pairs families by their avoided crossings and applies the Stokes rule to
/// each pair. A family joins at most one pair, closest caustic first.
pub fn resolve_caustics(families: &mut [SaddleFamily], window: f64) -> Vec<CausticPair> {
    let n = families.len();
    let mut cands = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some((xc, gap)) = detect_caustic(&families[i], &families[j], window) {
                cands.push((gap, i, j, xc));
            }
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut used = vec![false; n];
    let mut out = Vec::new();
    for (gap, i, j, xc) in cands {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        let (a, b) = families.split_at_mut(j);
        let res = stokes_filter(&mut a[i], &mut b[0], xc, window);
        out.push(CausticPair {
            labels: (a[i].label, b[0].label),
            x: xc,
            gap,
            resolution: res,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    /// Real part of the final position.
    Ok(f64),
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityMap {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
    pub t: f64,
    /// Row-major, `im` index outer.
    pub cells: Vec<Cell>,
}

impl SingularityMap {
    pub fn cell_center(&self, i_re: usize, i_im: usize) -> Complex64 {
        let dr = (self.re_range.1 - self.re_range.0) / self.n_re as f64;
        let di = (self.im_range.1 - self.im_range.0) / self.n_im as f64;
        Complex64::new(
            self.re_range.0 + (i_re as f64 + 0.5) * dr,
            self.im_range.0 + (i_im as f64 + 0.5) * di,
        )
    }

    pub fn index_of(&self, u: Complex64) -> Result<(usize, usize)> {
        let fr = (u.re - self.re_range.0) / (self.re_range.1 - self.re_range.0);
        let fi = (u.im - self.im_range.0) / (self.im_range.1 - self.im_range.0);
        if !(0.0..=1.0).contains(&fr) || !(0.0..=1.0).contains(&fi) {
            return Err(Error::OutsideWindow);
        }
        Ok((
            ((fr * self.n_re as f64) as usize).min(self.n_re - 1),
            ((fi * self.n_im as f64) as usize).min(self.n_im - 1),
        ))
    }

    pub fn get(&self, i_re: usize, i_im: usize) -> Cell {
        self.cells[i_im * self.n_re + i_re]
    }

    pub fn singular_count(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Singular)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapWindow {
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl Default for MapWindow {
    fn default() -> Self {
        Self {
            re_range: (-8.0, 8.0),
            im_range: (-1.0, 1.0),
            n_re: 1000,
            n_im: 1000,
        }
    }
}

pub fn grid_singularity_map(window: &MapWindow, problem: &BvpProblem) -> Result<SingularityMap> {
    let w = window;
    if !(w.re_range.1 > w.re_range.0) || !(w.im_range.1 > w.im_range.0) || w.n_re == 0 || w.n_im == 0 {
        return Err(Error::InvalidParameter(format!("invalid map window {w:?}")));
    }
    let mut map = SingularityMap {
        re_range: w.re_range,
        im_range: w.im_range,
        n_re: w.n_re,
        n_im: w.n_im,
        t: problem.t,
        cells: Vec::new(),
    };
    map.cells = (0..w.n_re * w.n_im)
        .into_par_iter()
        .map(|k| {
            let u = map.cell_center(k % w.n_re, k / w.n_re);
            let start = manifold_lift(ManifoldCoordinate(u), &problem.wp);
            let r = dynamics::propagate(start, problem.t, &problem.sys, &problem.opts);
            match r.status {
                Status::Ok => Cell::Ok(r.final_point.q.re),
                Status::Singular { .. } => Cell::Singular,
            }
        })
        .collect();
    Ok(map)
}

/// Whether the segment from each saddle's `u0` straight down to the real axis
/// avoids singular cells. `Err(OutsideWindow)` for saddles the map misses.
pub fn classical_zone_check(saddles: &[Saddle], map: &SingularityMap) -> Vec<Result<bool>> {
    saddles
        .iter()
        .map(|s| {
            let u = s.u();
            let (ir, ii) = map.index_of(u)?;
            let (_, i0) = map.index_of(Complex64::new(u.re, 0.0))?;
            let (lo, hi) = if ii <= i0 { (ii, i0) } else { (i0, ii) };
            Ok((lo..=hi).all(|k| matches!(map.get(ir, k), Cell::Ok(_))))
        })
        .collect()
}
