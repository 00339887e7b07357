//! Run configuration: a TOML file whose every table and key is optional.
//! Missing keys take the standard-packet defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use ggwpd_core::assembly::GgwpdOptions;
use ggwpd_core::continuation::{MapWindow, SweepOptions};
use ggwpd_core::dynamics::{energy, IntegratorOptions, SystemParams};
use ggwpd_core::manifold::WavePacket;
use ggwpd_core::quantum::{CompareOptions, SplitScheme};
use ggwpd_core::saddle::NewtonOptions;
use ggwpd_core::wigner::FoliationOptions;
use num_complex::Complex64;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub packet: PacketConfig,
    pub system: SystemConfig,
    /// Propagation time in units of the central trajectory's period.
    pub t_over_tau: f64,
    pub contour: ContourConfig,
    pub grid: GridConfig,
    pub newton: NewtonConfig,
    pub integrator: IntegratorConfig,
    pub sweep: SweepConfig,
    pub map: MapConfig,
    pub quantum: QuantumConfig,
    pub overlap: OverlapConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            packet: PacketConfig::default(),
            system: SystemConfig::default(),
            t_over_tau: 3.0,
            contour: ContourConfig::default(),
            grid: GridConfig::default(),
            newton: NewtonConfig::default(),
            integrator: IntegratorConfig::default(),
            sweep: SweepConfig::default(),
            map: MapConfig::default(),
            quantum: QuantumConfig::default(),
            overlap: OverlapConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub q: f64,
    pub p: f64,
    pub width_re: f64,
    pub width_im: f64,
    pub hbar: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self {
            q: 0.0,
            p: 20.0,
            width_re: 32.0,
            width_im: 0.0,
            hbar: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Quartic,
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub potential: PotentialKind,
    pub lambda: f64,
    pub omega: f64,
    pub mass: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            potential: PotentialKind::Quartic,
            lambda: 0.05,
            omega: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourConfig {
    pub n_sigma: f64,
    pub n_points: usize,
    /// Wider contour whose extra pathways join the full wavefunction; 0 disables.
    pub outer_n_sigma: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        Self {
            n_sigma: 5.0,
            n_points: 2048,
            outer_n_sigma: 9.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub x_anchor: f64,
    pub caustic_window: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GgwpdOptions::default();
        Self {
            x_min: g.x_min,
            x_max: g.x_max,
            dx: g.dx,
            x_anchor: g.x_anchor,
            caustic_window: g.caustic_window,
        }
    }
}

/// Newton options; absent values follow the packet-scaled defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub step_clip: Option<f64>,
    pub dedup_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub blowup_threshold: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let o = IntegratorOptions::default();
        Self {
            rel_tol: o.rel_tol,
            abs_tol: o.abs_tol,
            max_step: o.max_step,
            blowup_threshold: o.blowup_threshold,
            max_steps: o.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_dx: f64,
    pub corrector_ratio: f64,
    pub retest_exposure: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let s = SweepOptions::default();
        Self {
            min_dx: s.min_dx,
            corrector_ratio: s.corrector_ratio,
            retest_exposure: s.retest_exposure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub n_re: usize,
    pub n_im: usize,
    /// Final position whose residual problem the map belongs to.
    pub x: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        let w = MapWindow::default();
        Self {
            re_min: w.re_range.0,
            re_max: w.re_range.1,
            im_min: w.im_range.0,
            im_max: w.im_range.1,
            n_re: 400,
            n_im: 200,
            x: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Strang,
    Yoshida4,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
    pub scheme: SchemeKind,
    pub central_fraction: f64,
    pub tail_floor: f64,
    pub caustic_half_width: f64,
    pub lwpd_samples: usize,
}

impl Default for QuantumConfig {
    fn default() -> Self {
        let c = CompareOptions::default();
        Self {
            x_min: -30.0,
            x_max: 30.0,
            n_points: 1 << 14,
            dt: 2.5e-4,
            scheme: SchemeKind::Yoshida4,
            central_fraction: c.central_fraction,
            tail_floor: c.tail_floor,
            caustic_half_width: c.caustic_half_width,
            lwpd_samples: 20_000,
        }
    }
}

/// The bra packet of the overlap command; its width defaults to the ket's.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapConfig {
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub width_re: Option<f64>,
    pub width_im: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn packet(&self) -> Result<WavePacket, String> {
        let p = &self.packet;
        WavePacket::new(p.q, p.p, Complex64::new(p.width_re, p.width_im), p.hbar).map_err(|e| e.to_string())
    }

    pub fn bra(&self) -> Result<WavePacket, String> {
        let ket = self.packet()?;
        let o = &self.overlap;
        WavePacket::new(
            o.q.unwrap_or(ket.q_center),
            o.p.unwrap_or(ket.p_center),
            Complex64::new(o.width_re.unwrap_or(ket.width.re), o.width_im.unwrap_or(ket.width.im)),
            ket.hbar,
        )
        .map_err(|e| e.to_string())
    }

    pub fn system(&self) -> Result<SystemParams, String> {
        let s = &self.system;
        let h = self.packet.hbar;
        match s.potential {
            PotentialKind::Quartic => SystemParams::quartic(s.lambda, s.mass, h),
            PotentialKind::Harmonic => SystemParams::harmonic(s.omega, s.mass, h),
        }
        .map_err(|e| e.to_string())
    }

    /// Period of the trajectory started at the packet center.
    pub fn tau(&self) -> Result<f64, String> {
        let sys = self.system()?;
        sys.period(energy(self.packet.q, self.packet.p, &sys)).map_err(|e| e.to_string())
    }

    pub fn time(&self) -> Result<f64, String> {
        if !(self.t_over_tau >= 0.0) {
            return Err(format!("t_over_tau must be non-negative, got {}", self.t_over_tau));
        }
        Ok(self.t_over_tau * self.tau()?)
    }

    pub fn integrator(&self) -> Result<IntegratorOptions, String> {
        let i = &self.integrator;
        let o = IntegratorOptions {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step,
            blowup_threshold: i.blowup_threshold,
            max_steps: i.max_steps,
        };
        o.validate().map_err(|e| e.to_string())?;
        Ok(o)
    }

    pub fn foliation(&self, n_sigma: f64) -> Result<FoliationOptions, String> {
        if !(n_sigma > 0.0) || self.contour.n_points < 8 {
            return Err(format!(
                "contour needs n_sigma > 0 and at least 8 points, got {n_sigma} and {}",
                self.contour.n_points
            ));
        }
        Ok(FoliationOptions {
            n_sigma,
            n_points: self.contour.n_points,
            ..FoliationOptions::default()
        })
    }

    pub fn newton(&self) -> Result<NewtonOptions, String> {
        let mut o = NewtonOptions::for_packet(&self.packet()?);
        let n = &self.newton;
        o.tol = n.tol.unwrap_or(o.tol);
        o.max_iter = n.max_iter.unwrap_or(o.max_iter);
        o.step_clip = n.step_clip.unwrap_or(o.step_clip);
        o.dedup_radius = n.dedup_radius.unwrap_or(o.dedup_radius);
        o.validate().map_err(|e| e.to_string())?;
        Ok(o)
    }

    pub fn sweep(&self) -> Result<SweepOptions, String> {
        let s = &self.sweep;
        if !(s.min_dx > 0.0 && s.corrector_ratio > 0.0) {
            return Err(format!("invalid sweep options {s:?}"));
        }
        Ok(SweepOptions {
            min_dx: s.min_dx,
            corrector_ratio: s.corrector_ratio,
            retest_exposure: s.retest_exposure,
        })
    }

    pub fn ggwpd(&self) -> Result<GgwpdOptions, String> {
        let g = &self.grid;
        let o = GgwpdOptions {
            x_anchor: g.x_anchor,
            x_min: g.x_min,
            x_max: g.x_max,
            dx: g.dx,
            caustic_window: g.caustic_window,
        };
        o.validate().map_err(|e| e.to_string())?;
        Ok(o)
    }

    pub fn map_window(&self) -> MapWindow {
        let m = &self.map;
        MapWindow {
            re_range: (m.re_min, m.re_max),
            im_range: (m.im_min, m.im_max),
            n_re: m.n_re,
            n_im: m.n_im,
        }
    }

    pub fn scheme(&self) -> SplitScheme {
        match self.quantum.scheme {
            SchemeKind::Strang => SplitScheme::Strang,
            SchemeKind::Yoshida4 => SplitScheme::Yoshida4,
        }
    }

    pub fn compare(&self) -> CompareOptions {
        let q = &self.quantum;
        CompareOptions {
            central_fraction: q.central_fraction,
            tail_floor: q.tail_floor,
            caustic_half_width: q.caustic_half_width,
            ..CompareOptions::default()
        }
    }

    /// Checks every derived option so that a bad config fails before any work.
    pub fn validate(&self) -> Result<(), String> {
        self.packet()?;
        self.bra()?;
        self.system()?;
        self.time()?;
        self.integrator()?;
        self.foliation(self.contour.n_sigma)?;
        // compared with n_sigma only by the commands that build the outer set
        if !(self.contour.outer_n_sigma >= 0.0) {
            return Err(format!("outer_n_sigma must be 0 or positive, got {}", self.contour.outer_n_sigma));
        }
        self.newton()?;
        self.sweep()?;
        self.ggwpd()?;
        let q = &self.quantum;
        if !(q.x_max > q.x_min && q.n_points >= 16 && q.dt > 0.0) {
            return Err(format!("invalid quantum grid {q:?}"));
        }
        Ok(())
    }
}
