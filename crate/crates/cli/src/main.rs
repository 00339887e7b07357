//! `ggwpd`: runs each stage of the semiclassical pipeline from a TOML run
//! configuration and writes its data tables as CSV.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "ggwpd", version, about = "Gaussian wave packet propagation through complex saddle trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Propagation time in central periods (overrides `t_over_tau`).
    #[arg(long, global = true)]
    t_over_tau: Option<f64>,
    /// Contour size in standard deviations (overrides `contour.n_sigma`).
    #[arg(long, global = true)]
    nsigma: Option<f64>,
    /// Seed of the sampling estimators.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Singularity map of the initial manifold: Re x_t over a grid of u0.
    Singmap,
    /// Propagated Wigner contour, its foliations and the linearized contour.
    Foliate {
        /// Also locate the exposed saddles at this final position.
        #[arg(long)]
        x: Option<f64>,
    },
    /// Exposed saddles at one position or along a range `a:b[:dx]`.
    Saddles {
        #[arg(long, conflicts_with = "x_range", required_unless_present = "x_range")]
        x: Option<f64>,
        #[arg(long)]
        x_range: Option<String>,
    },
    /// Continues the exposed saddles at `a` along `a:b[:dx]` and resolves caustics.
    Sweep {
        #[arg(long)]
        x_range: String,
    },
    /// Full semiclassical wavefunction on the configured grid.
    Wavefn,
    /// Semiclassical, linearized, off-center and split-operator wavefunctions
    /// with the comparison metrics.
    Compare,
    /// Overlap with a second packet `q,p[,width_re[,width_im]]`.
    Overlap {
        #[arg(long)]
        beta: Option<String>,
    },
}

/// Failures sorted by exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ggwpd_core::Error> for Failure {
    fn from(e: ggwpd_core::Error) -> Self {
        match e {
            ggwpd_core::Error::InvalidParameter(m) => Failure::Config(m),
            ggwpd_core::Error::Io(m) => Failure::Numerical(format!("i/o: {m}")),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

/// `a:b` or `a:b:dx`; `dx` defaults to the grid step and takes the sign of `b - a`.
fn parse_range(s: &str, default_dx: f64) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bad range {s:?}: {e}")))?;
    let (a, b, dx) = match parts[..] {
        [a, b] => (a, b, default_dx),
        [a, b, dx] => (a, b, dx),
        _ => return Err(Failure::Config(format!("range {s:?} must be a:b or a:b:dx"))),
    };
    if !(dx.abs() > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Failure::Config(format!("bad range {s:?}")));
    }
    let n = ((b - a).abs() / dx.abs() + 1e-9).floor() as usize;
    let step = dx.abs() * (b - a).signum();
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}

fn parse_beta(s: &str, cfg: &mut RunConfig) -> Result<(), Failure> {
    let v: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bad --beta {s:?}: {e}")))?;
    if !(2..=4).contains(&v.len()) {
        return Err(Failure::Config(format!("--beta takes q,p[,width_re[,width_im]], got {s:?}")));
    }
    cfg.overlap.q = Some(v[0]);
    cfg.overlap.p = Some(v[1]);
    cfg.overlap.width_re = v.get(2).copied().or(cfg.overlap.width_re);
    cfg.overlap.width_im = v.get(3).copied().or(cfg.overlap.width_im);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    if let Some(r) = c.t_over_tau {
        cfg.t_over_tau = r;
    }
    if let Some(s) = c.nsigma {
        cfg.contour.n_sigma = s;
    }
    if let Command::Overlap { beta: Some(b) } = &cli.command {
        parse_beta(b, &mut cfg)?;
    }
    cfg.validate().map_err(Failure::Config)?;
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let ctx = commands::Context::new(&cfg, c.seed)?;
    let started = std::time::Instant::now();
    let name = match &cli.command {
        Command::Singmap => {
            ctx.singmap()?;
            "singmap"
        }
        Command::Foliate { x } => {
            ctx.foliate(*x)?;
            "foliate"
        }
        Command::Saddles { x, x_range } => {
            let xs = match (x, x_range) {
                (Some(x), _) => vec![*x],
                (None, Some(r)) => parse_range(r, cfg.grid.dx)?,
                (None, None) => unreachable!("clap requires one of --x, --x-range"),
            };
            ctx.saddles(&xs)?;
            "saddles"
        }
        Command::Sweep { x_range } => {
            ctx.sweep(&parse_range(x_range, cfg.grid.dx)?)?;
            "sweep"
        }
        Command::Wavefn => {
            ctx.wavefn()?;
            "wavefn"
        }
        Command::Compare => {
            ctx.compare()?;
            "compare"
        }
        Command::Overlap { .. } => {
            ctx.overlap()?;
            "overlap"
        }
    };
    ctx.log_run(name, started.elapsed())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}
