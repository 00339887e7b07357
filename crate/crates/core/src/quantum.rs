//! Grid solution of the time-dependent Schrödinger equation (Strang split
//! operator with a spectral kinetic step) and comparison metrics.

use std::f64::consts::PI;
use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dynamics::SystemParams;
use crate::error::{Error, Result};
use crate::manifold::{wavepacket_eval, WavePacket};

/// Wavefunction samples `psi(x_min + k dx)`, `k = 0..n`, on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<Complex64>,
    pub hbar: f64,
}

impl GridWavefunction {
    /// Samples `wp` on `n` points covering `[x_min, x_max)`.
    pub fn from_packet(wp: &WavePacket, x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) || n < 2 {
            return Err(Error::InvalidParameter(format!("bad grid [{x_min}, {x_max}) with {n} points")));
        }
        let dx = (x_max - x_min) / n as f64;
        Ok(Self {
            x_min,
            dx,
            values: (0..n).map(|k| wavepacket_eval(x_min + k as f64 * dx, wp)).collect(),
            hbar: wp.hbar,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.x(k)).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude among the `width` points at either end of the grid.
    pub fn edge_amplitude(&self, width: usize) -> f64 {
        let n = self.len();
        let w = width.min(n / 2);
        self.values[..w]
            .iter()
            .chain(self.values[n - w..].iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Angular wavenumbers in FFT order.
    fn wavenumbers(&self) -> Vec<f64> {
        let n = self.len();
        let dk = 2.0 * PI / (n as f64 * self.dx);
        (0..n)
            .map(|j| if j <= n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect()
    }

    fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        FftPlanner::new().plan_fft_forward(self.len()).process(&mut buf);
        buf
    }

    /// Trigonometric interpolation at arbitrary `x` (exact for band-limited data).
    pub fn interpolate(&self, xs: &[f64]) -> Vec<Complex64> {
        let n = self.len();
        let spec = self.spectrum();
        let k = self.wavenumbers();
        let scale = 1.0 / n as f64;
        xs.iter()
            .map(|&x| {
                let s = x - self.x_min;
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    // split the Nyquist term symmetrically so the result stays smooth
                    let w = if n % 2 == 0 && j == n / 2 { 0.5 } else { 1.0 };
                    acc += spec[j] * Complex64::from_polar(w, k[j] * s);
                    if w == 0.5 {
                        acc += spec[j] * Complex64::from_polar(0.5, -k[j] * s);
                    }
                }
                acc * scale
            })
            .collect()
    }

    pub fn expect_position(&self) -> f64 {
        (0..self.len())
            .map(|k| self.x(k) * self.values[k].norm_sqr())
            .sum::<f64>()
            * self.dx
            / self.norm_sqr()
    }

    pub fn expect_momentum(&self) -> f64 {
        let spec = self.spectrum();
        let k = self.wavenumbers();
        let (num, den) = spec
            .iter()
            .zip(&k)
            .fold((0.0, 0.0), |(a, b), (c, kk)| (a + kk * c.norm_sqr(), b + c.norm_sqr()));
        self.hbar * num / den
    }

    pub fn expect_energy(&self, sys: &SystemParams) -> f64 {
        let spec = self.spectrum();
        let k = self.wavenumbers();
        let (kin, den) = spec.iter().zip(&k).fold((0.0, 0.0), |(a, b), (c, kk)| {
            (a + (self.hbar * kk).powi(2) / (2.0 * sys.mass) * c.norm_sqr(), b + c.norm_sqr())
        });
        let pot: f64 = (0..self.len())
            .map(|j| sys.potential(Complex64::new(self.x(j), 0.0)).re * self.values[j].norm_sqr())
            .sum::<f64>()
            * self.dx;
        kin / den + pot / self.norm_sqr()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,re_psi,im_psi")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", self.x(k), v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, hbar: f64) -> Result<Self> {
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Io(format!("line {}: {e}", i + 1)))?;
            if f.len() != 3 {
                return Err(Error::Io(format!("line {}: expected 3 columns", i + 1)));
            }
            xs.push(f[0]);
            values.push(Complex64::new(f[1], f[2]));
        }
        if xs.len() < 2 {
            return Err(Error::Io("need at least two rows".into()));
        }
        Ok(Self {
            x_min: xs[0],
            dx: (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64,
            values,
            hbar,
        })
    }

    /// Little-endian layout: `x_min: f64, dx: f64, n: u64`, then `n` pairs
    /// `(re, im)` of `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.x_min.to_le_bytes())?;
        w.write_all(&self.dx.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, hbar: f64) -> Result<Self> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let x_min = f64::from_le_bytes(next(&mut r)?);
        let dx = f64::from_le_bytes(next(&mut r)?);
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let re = f64::from_le_bytes(next(&mut r)?);
            let im = f64::from_le_bytes(next(&mut r)?);
            values.push(Complex64::new(re, im));
        }
        Ok(Self { x_min, dx, values, hbar })
    }
}

/// Edge amplitude above which the grid is considered too small.
pub const EDGE_LIMIT: f64 = 1e-10;

/// Operator splitting used by [`split_operator_propagate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitScheme {
    /// Second order, `V/2 T V/2`.
    #[default]
    Strang,
    /// Fourth order triple-jump composition of three Strang steps.
    Yoshida4,
}

impl SplitScheme {
    /// Kinetic fractions `b_j` and potential fractions `a_j` of one step,
    /// applied as `V(a_0) T(b_0) V(a_1) ... T(b_m) V(a_{m+1})`.
    fn coefficients(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            SplitScheme::Strang => (vec![1.0], vec![0.5, 0.5]),
            SplitScheme::Yoshida4 => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c / (2.0 - c);
                (
                    vec![w1, w0, w1],
                    vec![0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1],
                )
            }
        }
    }
}

/// Strang splitting `V/2 T V/2` with `ceil(t / dt)` equal steps.
pub fn split_operator_propagate(
    psi0: &GridWavefunction,
    t: f64,
    dt: f64,
    sys: &SystemParams,
) -> Result<GridWavefunction> {
    split_operator_propagate_with(psi0, t, dt, sys, SplitScheme::Strang)
}

pub fn split_operator_propagate_with(
    psi0: &GridWavefunction,
    t: f64,
    dt: f64,
    sys: &SystemParams,
    scheme: SplitScheme,
) -> Result<GridWavefunction> {
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("need t >= 0 and dt > 0, got t = {t}, dt = {dt}")));
    }
    sys.validate()?;
    let edge = psi0.edge_amplitude(4);
    if edge > EDGE_LIMIT {
        return Err(Error::DomainTooSmall {
            amplitude: edge,
            limit: EDGE_LIMIT,
        });
    }
    let mut psi = psi0.clone();
    if t == 0.0 {
        return Ok(psi);
    }
    let n = psi.len();
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let hbar = psi.hbar;
    let (b, a) = scheme.coefficients();
    let pot: Vec<f64> = (0..n).map(|k| sys.potential(Complex64::new(psi.x(k), 0.0)).re).collect();
    let v_phase = |frac: f64| -> Vec<Complex64> {
        pot.iter().map(|v| Complex64::from_polar(1.0, -frac * v * h / hbar)).collect()
    };
    let inv_n = 1.0 / n as f64;
    let k = psi.wavenumbers();
    let t_phase = |frac: f64| -> Vec<Complex64> {
        k.iter()
            .map(|k| Complex64::from_polar(inv_n, -frac * hbar * k * k * h / (2.0 * sys.mass)))
            .collect()
    };
    let kin: Vec<Vec<Complex64>> = b.iter().map(|&f| t_phase(f)).collect();
    let m = a.len() - 1;
    // interior potential factors, plus the merged last/first factor between steps
    let inner: Vec<Vec<Complex64>> = a[1..m].iter().map(|&f| v_phase(f)).collect();
    let first = v_phase(a[0]);
    let last = v_phase(a[m]);
    let merged = v_phase(a[m] + a[0]);
    let mut planner = FftPlanner::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let v = &mut psi.values;
    let mul = |v: &mut [Complex64], f: &[Complex64]| {
        for (x, y) in v.iter_mut().zip(f) {
            *x *= y;
        }
    };
    mul(v, &first);
    for step in 0..steps {
        for (j, kj) in kin.iter().enumerate() {
            fwd.process_with_scratch(v, &mut scratch);
            mul(v, kj);
            inv.process_with_scratch(v, &mut scratch);
            if j + 1 < kin.len() {
                mul(v, &inner[j]);
            }
        }
        mul(v, if step + 1 == steps { &last } else { &merged });
    }
    let edge = psi.edge_amplitude(4);
    if edge > EDGE_LIMIT {
        return Err(Error::DomainTooSmall {
            amplitude: edge,
            limit: EDGE_LIMIT,
        });
    }
    Ok(psi)
}

/// `<a|b>` on a common grid.
pub fn overlap_numeric(a: &GridWavefunction, b: &GridWavefunction) -> Result<Complex64> {
    if a.len() != b.len()
        || (a.x_min - b.x_min).abs() > 1e-12 * (1.0 + a.x_min.abs())
        || (a.dx - b.dx).abs() > 1e-12 * a.dx
    {
        return Err(Error::GridMismatch(format!(
            "({}, {}, {}) vs ({}, {}, {})",
            a.x_min,
            a.dx,
            a.len(),
            b.x_min,
            b.dx,
            b.len()
        )));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        * a.dx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    /// Relative L2 error over all samples outside the caustic windows.
    pub global_l2: f64,
    /// Relative L2 error over samples with `|psi_q| > central_fraction * max`
    /// outside the caustic windows.
    pub central_l2: f64,
    /// As `central_l2` but with no windows removed.
    pub central_l2_unwindowed: f64,
    /// Largest `|log10|psi_sc| - log10|psi_q||` over tail samples, compared on
    /// local envelopes.
    pub tail_log_max: f64,
    pub tail_log_mean: f64,
    pub n_central: usize,
    pub n_tail: usize,
    pub excluded_windows: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub central_fraction: f64,
    pub tail_floor: f64,
    pub caustic_half_width: f64,
    /// Half-width of the running-maximum window defining the local envelope.
    pub envelope_half_width: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            central_fraction: 0.1,
            tail_floor: 1e-6,
            caustic_half_width: 0.5,
            envelope_half_width: 0.25,
        }
    }
}

fn envelope(xs: &[f64], amp: &[f64], half: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut lo = 0;
    let mut hi = 0;
    for i in 0..xs.len() {
        while xs[lo] < xs[i] - half {
            lo += 1;
        }
        while hi + 1 < xs.len() && xs[hi + 1] <= xs[i] + half {
            hi += 1;
        }
        out.push(amp[lo..=hi].iter().cloned().fold(0.0, f64::max));
    }
    out
}

/// Compares semiclassical samples `psi_sc` at increasing positions `xs` with
/// the grid solution. Tail log errors use running-maximum envelopes so that
/// interference nodes do not dominate.
pub fn compare_metrics(
    xs: &[f64],
    psi_sc: &[Complex64],
    psi_q: &GridWavefunction,
    caustics: &[f64],
    copts: &CompareOptions,
) -> CompareReport {
    let q = psi_q.interpolate(xs);
    let qa: Vec<f64> = q.iter().map(|v| v.norm()).collect();
    let sa: Vec<f64> = psi_sc.iter().map(|v| v.norm()).collect();
    let max = qa.iter().cloned().fold(0.0, f64::max);
    let windows: Vec<(f64, f64)> = caustics
        .iter()
        .map(|c| (c - copts.caustic_half_width, c + copts.caustic_half_width))
        .collect();
    let in_window = |x: f64| windows.iter().any(|(a, b)| x >= *a && x <= *b);
    let (mut num, mut den, mut cnum, mut cden, mut unum, mut uden) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut n_central = 0;
    for i in 0..xs.len() {
        let d = (psi_sc[i] - q[i]).norm_sqr();
        let central = qa[i] > copts.central_fraction * max;
        if central {
            unum += d;
            uden += q[i].norm_sqr();
        }
        if in_window(xs[i]) {
            continue;
        }
        num += d;
        den += q[i].norm_sqr();
        if central {
            cnum += d;
            cden += q[i].norm_sqr();
            n_central += 1;
        }
    }
    let eq = envelope(xs, &qa, copts.envelope_half_width);
    let es = envelope(xs, &sa, copts.envelope_half_width);
    let mut tmax: f64 = 0.0;
    let mut tsum = 0.0;
    let mut n_tail = 0;
    for i in 0..xs.len() {
        if eq[i] > copts.central_fraction * max || eq[i] < copts.tail_floor * max {
            continue;
        }
        if in_window(xs[i]) {
            continue;
        }
        let e = if es[i] > 0.0 { (es[i].log10() - eq[i].log10()).abs() } else { f64::INFINITY };
        tmax = tmax.max(e);
        tsum += e;
        n_tail += 1;
    }
    let rel = |a: f64, b: f64| if b > 0.0 { (a / b).sqrt() } else { 0.0 };
    CompareReport {
        global_l2: rel(num, den),
        central_l2: rel(cnum, cden),
        central_l2_unwindowed: rel(unum, uden),
        tail_log_max: tmax,
        tail_log_mean: if n_tail > 0 { tsum / n_tail as f64 } else { 0.0 },
        n_central,
        n_tail,
        excluded_windows: windows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::gaussian_overlap;
    use approx::assert_abs_diff_eq;

    fn par() -> WavePacket {
        WavePacket::new(0.0, 20.0, Complex64::new(32.0, 0.0), 1.0).unwrap()
    }

    #[test]
    fn zero_time_identity() {
        let psi = GridWavefunction::from_packet(&par(), -30.0, 30.0, 1 << 12).unwrap();
        let sys = SystemParams::quartic(0.05, 1.0, 1.0).unwrap();
        assert_eq!(split_operator_propagate(&psi, 0.0, 1e-3, &sys).unwrap(), psi);
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn overlaps_match_closed_form() {
        let a = GridWavefunction::from_packet(&par(), -30.0, 30.0, 1 << 12).unwrap();
        assert_abs_diff_eq!((overlap_numeric(&a, &a).unwrap() - 1.0).norm(), 0.0, epsilon = 1e-12);
        let beta = WavePacket::new(0.1, 18.0, Complex64::new(20.0, 3.0), 1.0).unwrap();
        let b = GridWavefunction::from_packet(&beta, -30.0, 30.0, 1 << 12).unwrap();
        let exact = gaussian_overlap(&beta, &par());
        assert!((overlap_numeric(&b, &a).unwrap() - exact).norm() < 1e-10);
        let c = GridWavefunction::from_packet(&beta, -30.0, 30.0, 1 << 11).unwrap();
        assert!(matches!(overlap_numeric(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let psi = GridWavefunction::from_packet(&par(), -0.2, 0.2, 256).unwrap();
        let sys = SystemParams::quartic(0.05, 1.0, 1.0).unwrap();
        assert!(matches!(
            split_operator_propagate(&psi, 0.1, 1e-3, &sys),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn interpolation_reproduces_band_limited_samples() {
        let wp = WavePacket::new(0.0, 2.0, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let psi = GridWavefunction::from_packet(&wp, -15.0, 15.0, 512).unwrap();
        let xs = [0.0123, -1.7, 3.33];
        for (x, v) in xs.iter().zip(psi.interpolate(&xs)) {
            assert!((v - wavepacket_eval(*x, &wp)).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_period_returns_with_phase() {
        // after one period a coherent state returns up to the zero-point phase -pi
        let sys = SystemParams::harmonic(1.0, 1.0, 1.0).unwrap();
        let wp = WavePacket::new(1.0, 0.5, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let psi = GridWavefunction::from_packet(&wp, -15.0, 15.0, 512).unwrap();
        let out = split_operator_propagate(&psi, 2.0 * PI, 2e-4, &sys).unwrap();
        let err: f64 = out
            .values
            .iter()
            .zip(&psi.values)
            .map(|(a, b)| (a + b).norm_sqr())
            .sum::<f64>()
            * psi.dx;
        assert!(err.sqrt() < 1e-6, "{}", err.sqrt());
        // FFT round trips carry a small coherent norm gain (~1e-16 each)
        let steps = (2.0 * PI / 2e-4).ceil();
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 2e-12 * steps / 1e4);
    }

    #[test]
    fn identical_inputs_compare_to_zero() {
        let psi = GridWavefunction::from_packet(&par(), -30.0, 30.0, 1 << 12).unwrap();
        let xs: Vec<f64> = (0..200).map(|k| -1.0 + 0.01 * k as f64).collect();
        let sc = psi.interpolate(&xs);
        let r = compare_metrics(&xs, &sc, &psi, &[], &CompareOptions::default());
        assert!(r.global_l2 < 1e-12 && r.central_l2 < 1e-12 && r.tail_log_max < 1e-10);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let psi = GridWavefunction::from_packet(&par(), -2.0, 2.0, 64).unwrap();
        let mut buf = Vec::new();
        psi.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 64 * 16);
        assert_eq!(GridWavefunction::read_binary(&buf[..], 1.0).unwrap(), psi);
        let mut csv = Vec::new();
        psi.write_csv(&mut csv).unwrap();
        let back = GridWavefunction::read_csv(&csv[..], 1.0).unwrap();
        assert_eq!(back.values, psi.values);
        assert!((back.dx - psi.dx).abs() < 1e-14);
    }
}
