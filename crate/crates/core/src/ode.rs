//! Embedded Dormand–Prince 5(4) stepper for autonomous complex systems.
//!
//! Only autonomous right-hand sides are needed here, so the nodes `c_i` never
//! appear.

use num_complex::Complex64;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// Returned by the per-step observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Outcome {
    /// Reached the requested end time.
    Done,
    /// The observer asked to stop at the given time.
    Stopped(f64),
    /// The step size fell below the representable increment at the given time.
    Collapsed(f64),
}

fn axpy<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        let s = h * c;
        for i in 0..N {
            out[i] += k[i] * s;
        }
    }
    out
}

/// Integrates `y' = f(y)` from `t = 0` to `t_end`, calling `observe` after every
/// accepted step (and once at `t = 0`). Returns the final state and outcome.
pub(crate) fn integrate<const N: usize, F, O>(
    f: F,
    y0: [Complex64; N],
    t_end: f64,
    ctl: &StepControl,
    mut observe: O,
) -> ([Complex64; N], f64, Outcome)
where
    F: Fn(&[Complex64; N]) -> [Complex64; N],
    O: FnMut(f64, &[Complex64; N]) -> Flow,
{
    let mut y = y0;
    let mut t = 0.0;
    if observe(t, &y) == Flow::Stop {
        return (y, t, Outcome::Stopped(t));
    }
    if t_end <= 0.0 {
        return (y, t, Outcome::Done);
    }
    let mut k1 = f(&y);
    // initial step from the derivative scale
    let mut h = {
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for i in 0..N {
            let sc = ctl.abs_tol + ctl.rel_tol * y[i].norm();
            d0 = d0.max(y[i].norm() / sc);
            d1 = d1.max(k1[i].norm() / sc);
        }
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(ctl.max_step).min(t_end)
    };
    let mut steps = 0usize;
    let mut err_prev = 1e-4f64;
    loop {
        if steps >= ctl.max_steps {
            return (y, t, Outcome::Collapsed(t));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = f(&axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&axpy(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y_new = axpy(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = f(&y_new);

        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = ctl.abs_tol + ctl.rel_tol * y[i].norm().max(y_new[i].norm());
            let r = e.norm() / sc;
            if !r.is_finite() || !y_new[i].is_finite() {
                finite = false;
            }
            err = err.max(r);
        }
        steps += 1;

        if finite && err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            if observe(t, &y) == Flow::Stop {
                return (y, t, Outcome::Stopped(t));
            }
            if last {
                return (y, t, Outcome::Done);
            }
            // PI controller
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            err_prev = err.max(1e-4);
            h = (h * fac.clamp(0.2, 5.0)).min(ctl.max_step);
        } else {
            let fac = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.25 };
            h *= fac;
        }
        if h <= 4.0 * f64::EPSILON * t.abs().max(1e-300) || h < 1e-300 {
            return (y, t, Outcome::Collapsed(t));
        }
    }
}
