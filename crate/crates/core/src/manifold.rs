//! Gaussian wave packets and their Lagrangian manifolds.
//!
//! A packet is `phi(x) = N exp[-b/(2 hbar) (x-q)^2 + i p/hbar (x-q) + i/(2 hbar) p q]`
//! with `N = [(b + b*)/(2 pi hbar)]^(1/4)`. Its ket manifold is the complex line
//! `b (Q - q) + i (P - p) = 0`, parameterized here by the complex position `Q`.
//!
//! Coherent states in quadrature form are the special case `b = 1` with `hbar`
//! replaced by the inverse boson number; see [`WavePacket::coherent_state`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Parameters of a normalized Gaussian wave packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacket {
    pub q_center: f64,
    pub p_center: f64,
    /// Complex width `b = c + i d`, `c > 0`.
    pub width: Complex64,
    pub hbar: f64,
}

impl WavePacket {
    pub fn new(q_center: f64, p_center: f64, width: Complex64, hbar: f64) -> Result<Self> {
        let wp = Self {
            q_center,
            p_center,
            width,
            hbar,
        };
        wp.validate()?;
        Ok(wp)
    }

    /// Quadrature form of a Glauber coherent state with `<x> = q`, `<p> = p` and
    /// effective Planck constant `hbar_eff` (inverse boson number).
    pub fn coherent_state(q: f64, p: f64, hbar_eff: f64) -> Result<Self> {
        Self::new(q, p, Complex64::new(1.0, 0.0), hbar_eff)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.re > 0.0) || !self.width.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wave packet width must have positive real part, got {}",
                self.width
            )));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "hbar must be positive, got {}",
                self.hbar
            )));
        }
        if !self.q_center.is_finite() || !self.p_center.is_finite() {
            return Err(Error::InvalidParameter("non-finite centroid".into()));
        }
        Ok(())
    }

    /// Standard deviation of `|phi|^2` in position.
    pub fn sigma_q(&self) -> f64 {
        (self.hbar / (2.0 * self.width.re)).sqrt()
    }

    /// `(1/4) log[(b + b*)/(2 pi hbar)]`.
    pub fn log_norm(&self) -> f64 {
        0.25 * (2.0 * self.width.re / (2.0 * PI * self.hbar)).ln()
    }
}

/// A point of complexified phase space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub q: Complex64,
    pub p: Complex64,
}

impl PhasePoint {
    pub fn new(q: Complex64, p: Complex64) -> Self {
        Self { q, p }
    }

    pub fn real(q: f64, p: f64) -> Self {
        Self {
            q: Complex64::new(q, 0.0),
            p: Complex64::new(p, 0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    pub fn is_real(&self) -> bool {
        self.q.im == 0.0 && self.p.im == 0.0
    }
}

/// Free coordinate on a ket manifold: the complex initial position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldCoordinate(pub Complex64);

impl ManifoldCoordinate {
    pub fn new(re: f64, im: f64) -> Self {
        Self(Complex64::new(re, im))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl From<Complex64> for ManifoldCoordinate {
    fn from(u: Complex64) -> Self {
        Self(u)
    }
}

/// Point of the ket manifold with complex position `u`.
pub fn manifold_lift(u: ManifoldCoordinate, wp: &WavePacket) -> PhasePoint {
    let u = u.0;
    PhasePoint {
        q: u,
        p: wp.p_center + I * wp.width * (u - wp.q_center),
    }
}

/// Ket-manifold residual `b (Q - q) + i (P - p)`.
pub fn ket_residual(pt: &PhasePoint, wp: &WavePacket) -> Complex64 {
    wp.width * (pt.q - wp.q_center) + I * (pt.p - wp.p_center)
}

/// Bra-manifold residual `b* (Q - q) - i (P - p)`; zero iff `pt` lies on the
/// dual manifold of `wp_bra`.
pub fn dual_residual(pt: &PhasePoint, wp_bra: &WavePacket) -> Complex64 {
    wp_bra.width.conj() * (pt.q - wp_bra.q_center) - I * (pt.p - wp_bra.p_center)
}

/// `log phi(u)` continued to complex argument.
pub fn initial_exponent(u: ManifoldCoordinate, wp: &WavePacket) -> Complex64 {
    let d = u.0 - wp.q_center;
    let h = wp.hbar;
    -wp.width / (2.0 * h) * d * d
        + I * wp.p_center / h * d
        + I * (0.5 * wp.p_center * wp.q_center / h)
        + wp.log_norm()
}

/// `log phi*_beta(x)` continued to complex `x` (analytic in `x`, conjugated
/// coefficients). Used for bra packets.
pub fn bra_exponent(x: Complex64, wp_bra: &WavePacket) -> Complex64 {
    let d = x - wp_bra.q_center;
    let h = wp_bra.hbar;
    -wp_bra.width.conj() / (2.0 * h) * d * d
        - I * wp_bra.p_center / h * d
        - I * (0.5 * wp_bra.p_center * wp_bra.q_center / h)
        + wp_bra.log_norm()
}

pub fn wavepacket_eval(x: f64, wp: &WavePacket) -> Complex64 {
    initial_exponent(ManifoldCoordinate::new(x, 0.0), wp).exp()
}

/// Closed-form `<phi_beta|phi_alpha>`.
pub fn gaussian_overlap(bra: &WavePacket, ket: &WavePacket) -> Complex64 {
    // integrand exponent: -A/2 x^2 + B x + C
    let h = ket.hbar;
    let a = (bra.width.conj() + ket.width) / h;
    let b = (bra.width.conj() * bra.q_center + ket.width * ket.q_center) / h
        + I * (ket.p_center - bra.p_center) / h;
    let c = -bra.width.conj() / (2.0 * h) * bra.q_center * bra.q_center
        - ket.width / (2.0 * h) * ket.q_center * ket.q_center
        + I * (bra.p_center * bra.q_center - ket.p_center * ket.q_center) / h
        - I * (0.5 * bra.p_center * bra.q_center / h)
        + I * (0.5 * ket.p_center * ket.q_center / h)
        + bra.log_norm()
        + ket.log_norm();
    // Re a > 0 so the principal root is the convergent one.
    (2.0 * PI / a).sqrt() * (b * b / (2.0 * a) + c).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn par() -> WavePacket {
        WavePacket::new(0.0, 20.0, Complex64::new(32.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn lift_at_centroid() {
        let pt = manifold_lift(ManifoldCoordinate::new(0.0, 0.0), &par());
        assert_eq!(pt.q, Complex64::new(0.0, 0.0));
        assert_eq!(pt.p, Complex64::new(20.0, 0.0));
    }

    #[test]
    fn lift_imaginary_offset() {
        let pt = manifold_lift(ManifoldCoordinate::new(0.0, 0.1), &par());
        assert_abs_diff_eq!(pt.p.re, 16.8, epsilon = 1e-14);
        assert_abs_diff_eq!(pt.p.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn dual_residual_examples() {
        let wp = par();
        assert_eq!(dual_residual(&PhasePoint::real(0.0, 20.0), &wp), Complex64::new(0.0, 0.0));
        assert_eq!(dual_residual(&PhasePoint::real(1.0, 20.0), &wp), Complex64::new(32.0, 0.0));
        assert_eq!(dual_residual(&PhasePoint::real(0.0, 21.0), &wp), Complex64::new(0.0, -1.0));
    }

    #[test]
    fn dual_manifold_meets_ket_manifold_in_isolated_points() {
        // chirped packet: residual along the ket manifold is linear in u with
        // slope b* + b, so it has exactly one zero.
        let wp = WavePacket::new(0.3, -1.0, Complex64::new(2.0, 0.7), 1.0).unwrap();
        let r = |u: Complex64| dual_residual(&manifold_lift(u.into(), &wp), &wp);
        let slope = r(Complex64::new(1.0, 0.0)) - r(Complex64::new(0.0, 0.0));
        assert_abs_diff_eq!(slope.re, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(slope.im, 0.0, epsilon = 1e-12);
        assert!(r(Complex64::new(0.3, 0.0)).norm() < 1e-14);
        assert!(r(Complex64::new(0.3, 0.01)).norm() > 1e-3);
    }

    #[test]
    fn initial_exponent_at_centroid() {
        let v = initial_exponent(ManifoldCoordinate::new(0.0, 0.0), &par());
        let expect = 0.25 * (64.0 / (2.0 * PI)).ln();
        assert_abs_diff_eq!(v.re, expect, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn peak_and_symmetry() {
        let wp = par();
        let peak = wavepacket_eval(0.0, &wp).norm();
        assert_abs_diff_eq!(peak, (64.0 / (2.0 * PI)).powf(0.25), epsilon = 1e-14);
        let r = wavepacket_eval(0.05, &wp) / wavepacket_eval(-0.05, &wp);
        assert_abs_diff_eq!(r.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn normalized_on_grid() {
        let wp = par();
        let s = wp.sigma_q();
        let n = 4001;
        let dx = 20.0 * s / (n - 1) as f64;
        let norm: f64 = (0..n)
            .map(|k| wavepacket_eval(-10.0 * s + k as f64 * dx, &wp).norm_sqr() * dx)
            .sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn overlap_closed_form_matches_quadrature() {
        let a = WavePacket::new(0.2, 1.5, Complex64::new(1.3, 0.4), 0.7).unwrap();
        let b = WavePacket::new(-0.4, 0.5, Complex64::new(0.8, -0.2), 0.7).unwrap();
        let n = 40001;
        let (lo, hi) = (-15.0, 15.0);
        let dx = (hi - lo) / (n - 1) as f64;
        let num: Complex64 = (0..n)
            .map(|k| {
                let x = lo + k as f64 * dx;
                wavepacket_eval(x, &b).conj() * wavepacket_eval(x, &a) * dx
            })
            .sum();
        let exact = gaussian_overlap(&b, &a);
        assert!((num - exact).norm() < 1e-10, "{num} vs {exact}");
        let one = gaussian_overlap(&a, &a);
        assert!((one - 1.0).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_normalizable_width() {
        assert!(WavePacket::new(0.0, 0.0, Complex64::new(0.0, 1.0), 1.0).is_err());
        assert!(WavePacket::new(0.0, 0.0, Complex64::new(1.0, 0.0), 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn lift_satisfies_ket_constraint(re in -10.0f64..10.0, im in -2.0f64..2.0,
                                         c in 0.1f64..50.0, d in -5.0f64..5.0) {
            let wp = WavePacket::new(0.7, -3.0, Complex64::new(c, d), 1.0).unwrap();
            let pt = manifold_lift(ManifoldCoordinate::new(re, im), &wp);
            let scale = 1.0 + wp.width.norm() * (re.abs() + im.abs());
            proptest::prop_assert!(ket_residual(&pt, &wp).norm() < 1e-13 * scale);
        }

        #[test]
        fn exponent_matches_eval(x in -1.0f64..1.0, c in 0.5f64..40.0, d in -3.0f64..3.0) {
            let wp = WavePacket::new(0.1, 5.0, Complex64::new(c, d), 1.0).unwrap();
            let a = initial_exponent(ManifoldCoordinate::new(x, 0.0), &wp).exp();
            let b = wavepacket_eval(x, &wp);
            proptest::prop_assert!((a - b).norm() <= 1e-13 * (1.0 + b.norm()));
        }
    }
}
