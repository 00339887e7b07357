//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ggwpd_core::dynamics::SystemParams;
use ggwpd_core::manifold::WavePacket;
use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// The standard packet: centroid (0, 20), width 32, hbar = 1.
pub fn standard_packet() -> WavePacket {
    WavePacket::new(0.0, 20.0, Complex64::new(32.0, 0.0), 1.0).unwrap()
}

pub fn standard_quartic() -> SystemParams {
    SystemParams::quartic(0.05, 1.0, 1.0).unwrap()
}

/// Central period of the standard packet (energy 200).
pub fn standard_tau() -> f64 {
    standard_quartic().period(200.0).unwrap()
}

/// Initial packet written out from its definition:
/// `N exp(-b (x-q)^2 / 2h + i p (x-q) / h + i p q / 2h)`.
pub fn packet_value(x: f64, q: f64, p: f64, b: Complex64, h: f64) -> Complex64 {
    let n = (2.0 * b.re / (2.0 * PI * h)).powf(0.25);
    let d = x - q;
    n * (-b / (2.0 * h) * d * d + I * p * d / h + I * p * q / (2.0 * h)).exp()
}

/// Harmonic evolution of the packet by the Mehler kernel, with the Gaussian
/// integral over the initial position done in closed form. Valid for
/// `0 < omega t < pi`, where the kernel's root is the principal one.
pub fn mehler_evolved(x: f64, t: f64, omega: f64, m: f64, q: f64, p: f64, b: Complex64, h: f64) -> Complex64 {
    let (s, c) = (omega * t).sin_cos();
    assert!(s > 0.0, "oracle restricted to 0 < omega t < pi");
    let k = m * omega / (h * s);
    // integrand exp(-A y^2 + B y + C) in the initial position y
    let a = b / (2.0 * h) - I * k * c / 2.0;
    let bb = b * q / h + I * p / h - I * k * x;
    let cc = -b * q * q / (2.0 * h) - I * p * q / (2.0 * h) + I * k * c * x * x / 2.0;
    let n = (2.0 * b.re / (2.0 * PI * h)).powf(0.25);
    let kernel = (Complex64::new(k / (2.0 * PI), 0.0) / I).sqrt();
    kernel * n * (PI / a).sqrt() * (bb * bb / (4.0 * a) + cc).exp()
}

/// Relative L2 distance of two sample vectors.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}
