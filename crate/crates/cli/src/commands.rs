//! The pipeline stages behind each subcommand. Every command writes CSV
//! tables into the output directory and a short summary to stdout.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use ggwpd_core::assembly::{
    collect_anchors, ggwpd_wavefunction, lwpd_propagate, lwpd_validity_overlap, offcenter_sum, overlap_semiclassical,
    saddle_contribution_overlap, saddle_contribution_wavefunction, AssembledPoint,
};
use ggwpd_core::continuation::{grid_singularity_map, resolve_caustics, sweep_saddles, CausticPair, Cell, SaddleFamily};
use ggwpd_core::dynamics::{propagate, IntegratorOptions, SystemParams};
use ggwpd_core::manifold::{PhasePoint, WavePacket};
use ggwpd_core::quantum::{compare_metrics, overlap_numeric, split_operator_propagate_with, GridWavefunction};
use ggwpd_core::saddle::{find_exposed_overlap_saddles, find_exposed_saddles, shadowing_check, Exposure, NewtonOptions, Target};
use ggwpd_core::wigner::{build_foliations, FoliationSet};
use num_complex::Complex64;

use crate::config::RunConfig;
use crate::table::Table;
use crate::Failure;

pub struct Context<'a> {
    cfg: &'a RunConfig,
    wp: WavePacket,
    sys: SystemParams,
    t: f64,
    opts: IntegratorOptions,
    nopts: NewtonOptions,
    seed: u64,
}

fn exposure_name(e: Exposure) -> &'static str {
    match e {
        Exposure::Exposed => "exposed",
        Exposure::Hidden => "hidden",
    }
}

fn log10_abs(v: Complex64) -> f64 {
    v.norm().log10()
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig, seed: u64) -> Result<Self, Failure> {
        fn c<T>(r: Result<T, String>) -> Result<T, Failure> {
            r.map_err(Failure::Config)
        }
        Ok(Self {
            cfg,
            wp: c(cfg.packet())?,
            sys: c(cfg.system())?,
            t: c(cfg.time())?,
            opts: c(cfg.integrator())?,
            nopts: c(cfg.newton())?,
            seed,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn set(&self, n_sigma: f64) -> Result<FoliationSet, Failure> {
        let fopts = self.cfg.foliation(n_sigma).map_err(Failure::Config)?;
        Ok(build_foliations(&self.wp, self.t, &self.sys, &self.opts, &fopts)?)
    }

    fn outer(&self) -> Result<Option<FoliationSet>, Failure> {
        let s = self.cfg.contour.outer_n_sigma;
        if s == 0.0 {
            Ok(None)
        } else if s <= self.cfg.contour.n_sigma {
            Err(Failure::Config(format!(
                "outer_n_sigma ({s}) must exceed n_sigma ({}) or be 0",
                self.cfg.contour.n_sigma
            )))
        } else {
            self.set(s).map(Some)
        }
    }

    /// Timestamps live only here, never in the data files.
    pub fn log_run(&self, command: &str, elapsed: Duration) -> Result<(), Failure> {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut f = OpenOptions::new().create(true).append(true).open(self.path("run.log"))?;
        writeln!(
            f,
            "unix_time={stamp} command={command} t_over_tau={} elapsed_s={:.3}",
            self.cfg.t_over_tau,
            elapsed.as_secs_f64()
        )?;
        Ok(())
    }

    pub fn singmap(&self) -> Result<(), Failure> {
        let window = self.cfg.map_window();
        let problem = ggwpd_core::saddle::BvpProblem {
            wp: self.wp,
            sys: self.sys,
            opts: self.opts,
            t: self.t,
            target: Target::Wavefunction { x: self.cfg.map.x },
        };
        let map = grid_singularity_map(&window, &problem)?;
        let mut table = Table::new(&["re_u0", "im_u0", "singular", "re_x"]);
        for i_im in 0..map.n_im {
            for i_re in 0..map.n_re {
                let u = map.cell_center(i_re, i_im);
                match map.get(i_re, i_im) {
                    Cell::Ok(x) => table.row(&[&u.re, &u.im, &0, &x]),
                    Cell::Singular => table.row(&[&u.re, &u.im, &1, &"nan"]),
                }
            }
        }
        table.write(&self.path("singmap.csv"))?;
        self.write_raster(&map)?;
        println!(
            "singmap: {} of {} cells singular at t = {:.6}",
            map.singular_count(),
            map.cells.len(),
            self.t
        );
        Ok(())
    }

    /// Grayscale PGM of `Re x` (folded into bands of unit width), singular
    /// cells black; top row is the largest `Im u0`.
    fn write_raster(&self, map: &ggwpd_core::continuation::SingularityMap) -> Result<(), Failure> {
        let mut bytes = format!("P5\n{} {}\n255\n", map.n_re, map.n_im).into_bytes();
        for i_im in (0..map.n_im).rev() {
            for i_re in 0..map.n_re {
                bytes.push(match map.get(i_re, i_im) {
                    Cell::Singular => 0,
                    Cell::Ok(x) => 32 + (x.rem_euclid(1.0) * 223.0) as u8,
                });
            }
        }
        std::fs::write(self.path("singmap.pgm"), bytes)?;
        Ok(())
    }

    pub fn foliate(&self, x: Option<f64>) -> Result<(), Failure> {
        let set = self.set(self.cfg.contour.n_sigma)?;
        let mut fol = Table::new(&["label", "arcs", "theta_width", "q_t_min", "q_t_max"]);
        for f in &set.foliations {
            let width: f64 = f.arcs.iter().map(|a| a.width()).sum();
            fol.row(&[&f.label, &f.arcs.len(), &width, &f.q_t_range.0, &f.q_t_range.1]);
        }
        fol.write(&self.path("foliations.csv"))?;

        let mut contour = Table::new(&["theta", "q0", "p0", "qt", "pt", "label"]);
        for p in &set.points {
            contour.row(&[&p.theta, &p.q0, &p.p0, &p.qt, &p.pt, &p.label]);
        }
        contour.write(&self.path("contour.csv"))?;

        // the same contour carried by the central tangent map
        let center = propagate(PhasePoint::real(self.wp.q_center, self.wp.p_center), self.t, &self.sys, &self.opts);
        let (qc, pc) = (center.final_point.q.re, center.final_point.p.re);
        let mut lin = Table::new(&["theta", "q", "p"]);
        for p in &set.points {
            let (dp, dq) = center.stability.apply(
                Complex64::new(p.p0 - self.wp.p_center, 0.0),
                Complex64::new(p.q0 - self.wp.q_center, 0.0),
            );
            lin.row(&[&p.theta, &(qc + dq.re), &(pc + dp.re)]);
        }
        lin.write(&self.path("lwpd_contour.csv"))?;
        let validity = lwpd_validity_overlap(&self.wp, self.t, &self.sys, &self.opts, self.cfg.quantum.lwpd_samples, self.seed)?;
        println!(
            "foliate: {} foliations on the {}σ contour at t = {:.6}; LWPD density overlap {validity:.4}",
            set.foliations.len(),
            self.cfg.contour.n_sigma,
            self.t
        );
        if let Some(x) = x {
            self.write_saddles(&set, &[x])?;
        }
        Ok(())
    }

    pub fn saddles(&self, xs: &[f64]) -> Result<(), Failure> {
        let set = self.set(self.cfg.contour.n_sigma)?;
        self.write_saddles(&set, xs)
    }

    fn write_saddles(&self, set: &FoliationSet, xs: &[f64]) -> Result<(), Failure> {
        let mut table = Table::new(&[
            "x", "label", "re_u0", "im_u0", "re_qt", "im_qt", "re_pt", "im_pt", "re_action", "im_action", "re_psi",
            "im_psi", "log10_abs", "shadowing",
        ]);
        let mut total = 0;
        for &x in xs {
            let found = find_exposed_saddles(set, x, &self.nopts);
            for s in &found.saddles {
                let label = s.foliation_label.unwrap_or(-1);
                let c = saddle_contribution_wavefunction(s)?;
                let shadow = found
                    .references
                    .iter()
                    .find(|r| r.label == label)
                    .map_or(f64::NAN, |r| shadowing_check(s, &r.traj));
                let (u, f, a) = (s.u(), s.traj.final_point, s.traj.action);
                table.row(&[
                    &x, &label, &u.re, &u.im, &f.q.re, &f.q.im, &f.p.re, &f.p.im, &a.re, &a.im, &c.value.re,
                    &c.value.im, &c.log10_magnitude(), &shadow,
                ]);
            }
            total += found.saddles.len();
            if xs.len() == 1 {
                println!("saddles: {} exposed saddles at x = {x}", found.saddles.len());
                for f in &found.failures {
                    eprintln!("  search from foliation {} failed: {}", f.label, f.error);
                }
            }
        }
        if xs.len() > 1 {
            println!("saddles: {total} exposed saddles over {} positions", xs.len());
        }
        table.write(&self.path("saddles.csv"))?;
        Ok(())
    }

    fn write_families(&self, name: &str, families: &[&SaddleFamily]) -> Result<(), Failure> {
        let mut table = Table::new(&[
            "label", "x", "re_u0", "im_u0", "exposure", "excluded", "re_action", "im_action", "re_psi", "im_psi",
            "log10_abs",
        ]);
        for f in families {
            for s in &f.samples {
                let d = &s.saddle;
                let c = saddle_contribution_wavefunction(d)?;
                let a = d.total_action(self.wp.hbar);
                table.row(&[
                    &f.label,
                    &s.x,
                    &d.u().re,
                    &d.u().im,
                    &exposure_name(d.exposure),
                    &(d.stokes_excluded as u8),
                    &a.re,
                    &a.im,
                    &c.value.re,
                    &c.value.im,
                    &c.log10_magnitude(),
                ]);
            }
        }
        table.write(&self.path(name))?;
        Ok(())
    }

    fn write_caustics(&self, pairs: &[CausticPair]) -> Result<(), Failure> {
        let mut table = Table::new(&["label_a", "label_b", "x", "gap", "kept", "excluded", "x_cross"]);
        for p in pairs {
            let (kept, excluded, cross) = match p.resolution {
                Some(r) => (r.kept.to_string(), r.excluded.to_string(), r.x_cross.to_string()),
                None => ("".into(), "".into(), "".into()),
            };
            table.row(&[&p.labels.0, &p.labels.1, &p.x, &p.gap, &kept, &excluded, &cross]);
        }
        table.write(&self.path("caustics.csv"))?;
        Ok(())
    }

    pub fn sweep(&self, xs: &[f64]) -> Result<(), Failure> {
        let set = self.set(self.cfg.contour.n_sigma)?;
        let outer = self.outer()?;
        let anchors = collect_anchors(&set, outer.as_ref(), xs[0], &self.nopts)?;
        let sopts = self.cfg.sweep().map_err(Failure::Config)?;
        let mut families = sweep_saddles(outer.as_ref().unwrap_or(&set), &anchors, xs, &self.nopts, &sopts);
        let pairs = resolve_caustics(&mut families, self.cfg.grid.caustic_window);
        self.write_families("families.csv", &families.iter().collect::<Vec<_>>())?;
        self.write_caustics(&pairs)?;
        println!("sweep: {} families, {} caustic pairs", families.len(), pairs.len());
        for p in &pairs {
            println!("  families {:?} meet at x = {:.3}", p.labels, p.x);
        }
        for f in families.iter().filter(|f| f.terminated.is_some()) {
            let (x, e) = f.terminated.as_ref().unwrap();
            eprintln!("  family {} stopped at x = {x}: {e}", f.label);
        }
        Ok(())
    }

    fn write_wavefn(&self, table: &[AssembledPoint]) -> Result<(), Failure> {
        let mut out = Table::new(&["x", "re_psi", "im_psi", "log10_abs", "terms"]);
        for p in table {
            let used = p.terms.iter().filter(|t| !t.excluded).count();
            out.row(&[&p.x, &p.psi.re, &p.psi.im, &log10_abs(p.psi), &used]);
        }
        out.write(&self.path("wavefn.csv"))?;
        Ok(())
    }

    fn semiclassical(&self) -> Result<(FoliationSet, ggwpd_core::assembly::GgwpdRun), Failure> {
        let set = self.set(self.cfg.contour.n_sigma)?;
        let outer = self.outer()?;
        let gopts = self.cfg.ggwpd().map_err(Failure::Config)?;
        let sopts = self.cfg.sweep().map_err(Failure::Config)?;
        let run = ggwpd_wavefunction(&set, outer.as_ref(), &gopts, &self.nopts, &sopts)?;
        self.write_wavefn(&run.table)?;
        let fams: Vec<&SaddleFamily> = run.left.iter().chain(&run.right).collect();
        self.write_families("families.csv", &fams)?;
        self.write_caustics(&run.pairs)?;
        Ok((set, run))
    }

    pub fn wavefn(&self) -> Result<(), Failure> {
        let (_, run) = self.semiclassical()?;
        println!(
            "wavefn: {} samples from {} anchor saddles, {} caustic pairs",
            run.table.len(),
            run.anchors.len(),
            run.pairs.len()
        );
        Ok(())
    }

    fn quantum(&self) -> Result<GridWavefunction, Failure> {
        let q = &self.cfg.quantum;
        let psi0 = GridWavefunction::from_packet(&self.wp, q.x_min, q.x_max, q.n_points)?;
        Ok(split_operator_propagate_with(&psi0, self.t, q.dt, &self.sys, self.cfg.scheme())?)
    }

    pub fn compare(&self) -> Result<(), Failure> {
        let (set, run) = self.semiclassical()?;
        let q = self.quantum()?;
        let xs = run.xs();
        let psi_q = q.interpolate(&xs);
        let g = lwpd_propagate(&self.wp, self.t, &self.sys, &self.opts)?;
        let oc = offcenter_sum(&set, &xs)?;
        let mut table = Table::new(&[
            "x", "re_sc", "im_sc", "re_q", "im_q", "re_lwpd", "im_lwpd", "re_offcenter", "im_offcenter",
        ]);
        for (k, p) in run.table.iter().enumerate() {
            let l = g.eval(p.x);
            table.row(&[
                &p.x, &p.psi.re, &p.psi.im, &psi_q[k].re, &psi_q[k].im, &l.re, &l.im, &oc[k].psi.re, &oc[k].psi.im,
            ]);
        }
        table.write(&self.path("compare.csv"))?;
        q.write_csv(std::io::BufWriter::new(std::fs::File::create(self.path("quantum.csv"))?))?;
        q.write_binary(std::io::BufWriter::new(std::fs::File::create(self.path("quantum.bin"))?))?;

        let rep = compare_metrics(&xs, &run.psi(), &q, &run.caustics(), &self.cfg.compare());
        let rel = |v: &[Complex64]| -> f64 {
            let num: f64 = v.iter().zip(&psi_q).map(|(a, b)| (a - b).norm_sqr()).sum();
            let den: f64 = psi_q.iter().map(|b| b.norm_sqr()).sum();
            (num / den).sqrt()
        };
        let lwpd_l2 = rel(&xs.iter().map(|&x| g.eval(x)).collect::<Vec<_>>());
        let oc_l2 = rel(&oc.iter().map(|p| p.psi).collect::<Vec<_>>());
        let windows: Vec<String> = rep.excluded_windows.iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
        let report = format!(
            "global_l2 = {}\ncentral_l2 = {}\ncentral_l2_unwindowed = {}\ntail_log_max = {}\ntail_log_mean = {}\n\
             n_central = {}\nn_tail = {}\nexcluded_windows = [{}]\nlwpd_global_l2 = {lwpd_l2}\noffcenter_global_l2 = {oc_l2}\n\
             quantum_norm = {}\ncentral_pass = {}\ntail_pass = {}\n",
            rep.global_l2,
            rep.central_l2,
            rep.central_l2_unwindowed,
            rep.tail_log_max,
            rep.tail_log_mean,
            rep.n_central,
            rep.n_tail,
            windows.join(", "),
            q.norm_sqr(),
            rep.central_l2 < 0.05,
            rep.tail_log_max < 0.5,
        );
        std::fs::write(self.path("report.toml"), &report)?;
        print!("compare:\n{report}");
        Ok(())
    }

    pub fn overlap(&self) -> Result<(), Failure> {
        let bra = self.cfg.bra().map_err(Failure::Config)?;
        let set = self.set(self.cfg.contour.n_sigma)?;
        let found = find_exposed_overlap_saddles(&set, &bra, &self.nopts);
        let mut table = Table::new(&["label", "re_u0", "im_u0", "re_term", "im_term", "log10_abs"]);
        for s in &found.saddles {
            let c = saddle_contribution_overlap(s, self.wp.hbar)?;
            table.row(&[&s.foliation_label.unwrap_or(-1), &s.u().re, &s.u().im, &c.value.re, &c.value.im, &c.log10_magnitude()]);
        }
        table.write(&self.path("overlap_saddles.csv"))?;
        let sc = overlap_semiclassical(&found.saddles, self.wp.hbar)?;
        let q = self.quantum()?;
        let b = GridWavefunction::from_packet(&bra, q.x_min, q.x_min + q.dx * q.len() as f64, q.len())?;
        let exact = overlap_numeric(&b, &q)?;
        let report = format!(
            "saddles = {}\nre_semiclassical = {}\nim_semiclassical = {}\nre_quantum = {}\nim_quantum = {}\nrelative_error = {}\n",
            found.saddles.len(),
            sc.re,
            sc.im,
            exact.re,
            exact.im,
            (sc - exact).norm() / exact.norm()
        );
        std::fs::write(self.path("overlap.toml"), &report)?;
        print!("overlap:\n{report}");
        Ok(())
    }
}
