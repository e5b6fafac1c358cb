use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pkl_bench::e2e::{construct_certificate, end_to_end_bound_with, ConstructParams, Mode};
use pkl_bench::report::{
    figures_data, sosdist_table, table_vrd, write_figures_csv, write_sosdist_csv, write_vrd_csv,
};
use pkl_bench::{read_poly, BenchError, Result, RunConfig};
use pkl_core::expkernel::{
    build_exp_approx, kernel_degree_formula, kernel_degree_upper_bound, schedule, KernelSpec,
};
use pkl_core::kernel_op::{
    approx_identity_bound, approx_identity_bound_detailed, identity_bound_terms, measured_identity_error,
    multivariate_error_bound,
};
use pkl_core::oracle::grid_oracle;
use pkl_sdp::{compute_vrd, lasserre_bound};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "pkl", version, about = "Polynomial kernel certificates, Lasserre bounds and kernel tables")]
struct Cli {
    /// SDP backend: `native` or `external:<program>`.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Solver tolerance; defaults to PKL_SOLVER_TOL or 1e-8.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct KernelArgs {
    #[arg(long, default_value_t = 0.15)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 1.1)]
    radius: f64,
}

impl From<KernelArgs> for ConstructParams {
    fn from(k: KernelArgs) -> Self {
        ConstructParams { sigma: k.sigma, delta: k.delta, radius: k.radius }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Kernel-built certificate of a lower bound on the box.
    Certify {
        #[arg(short = 'f', long = "poly")]
        poly: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Certified lower bound at relative accuracy `eps`.
    Bound {
        #[arg(short = 'f', long = "poly")]
        poly: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Mode::Arithmetic)]
        mode: Mode,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Kernel schedule and approximate-identity bounds.
    Kernel {
        #[arg(long)]
        r: Option<u64>,
        #[arg(long)]
        d: u32,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, value_enum, default_value_t = Mode::Arithmetic)]
        mode: Mode,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    /// Polynomial approximation of exp(-t) on [0, b].
    Expapprox {
        #[arg(long)]
        b: f64,
        #[arg(long)]
        delta: f64,
    },
    /// One v_{r,d} cell as JSON, or the table as CSV.
    Vrd {
        #[arg(long)]
        r: Option<u32>,
        #[arg(long)]
        d: Option<u32>,
        #[arg(long, default_value_t = 8)]
        rmax: u32,
        #[arg(long, default_value_t = 4)]
        dmax: u32,
        /// Also write the 1/v, v r/d, v (r/d)² series here.
        #[arg(long)]
        figures: Option<PathBuf>,
    },
    /// Lasserre lower bound at level r.
    Lasserre {
        #[arg(short = 'f', long = "poly")]
        poly: PathBuf,
        #[arg(long)]
        r: u32,
    },
    /// Distance from 1 - x² to SOS polynomials of degree r.
    Sosdist {
        #[arg(long, default_value_t = 4)]
        rmin: u32,
        #[arg(long, default_value_t = 24)]
        rmax: u32,
        #[arg(long, default_value_t = 2)]
        step: u32,
    },
    /// Grid estimate of min and max on the box.
    Oracle {
        #[arg(short = 'f', long = "poly")]
        poly: PathBuf,
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout()),
    })
}

fn write_json<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<()> {
    let mut w = output(cfg)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn kernel_report(r: Option<u64>, d: u32, n: u32, mode: Mode, k: KernelArgs) -> Result<serde_json::Value> {
    match mode {
        Mode::Arithmetic => {
            let r = r.ok_or_else(|| BenchError::Precondition("arithmetic mode needs --r".into()))?;
            let s = schedule(r, d)?;
            let eps = approx_identity_bound(r as f64, d);
            let per_k: Vec<f64> = (1..=d).map(|k| approx_identity_bound_detailed(r as f64, k)).collect();
            Ok(json!({
                "mode": "arithmetic",
                "schedule": s,
                "kernel_degree_formula": kernel_degree_formula(r, d)?,
                "kernel_degree_bound": kernel_degree_upper_bound(r),
                "degree_104r": 104 * r,
                "identity_bound": eps,
                "identity_bound_detailed": per_k,
                "product_bound": multivariate_error_bound(eps, n)?,
            }))
        }
        Mode::Construct => {
            let kernel = KernelSpec::schedule_off(k.sigma, k.delta, k.radius, d)?;
            let mut rows = Vec::new();
            for k in 1..=d {
                let terms = identity_bound_terms(&kernel, k)?;
                let measured = measured_identity_error(&kernel, k as usize)?;
                rows.push(json!({"k": k, "bound": terms, "measured": measured}));
            }
            Ok(json!({
                "mode": "construct",
                "flag": "schedule-off",
                "sigma": kernel.sigma,
                "delta": kernel.delta,
                "radius": kernel.radius,
                "b": kernel.b,
                "kernel_degree": kernel.kernel_degree,
                "exp_approx": kernel.s.summary(),
                "identity": rows,
            }))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::new(cli.backend, cli.tol, cli.out)?;
    match cli.command {
        Command::Certify { poly, kernel } => {
            let f = read_poly(&poly)?;
            write_json(&cfg, &construct_certificate(&f, kernel.into())?)
        }
        Command::Bound { poly, eps, mode, kernel } => {
            let f = read_poly(&poly)?;
            write_json(&cfg, &end_to_end_bound_with(&f, eps, mode, kernel.into())?)
        }
        Command::Kernel { r, d, n, mode, kernel } => write_json(&cfg, &kernel_report(r, d, n, mode, kernel)?),
        Command::Expapprox { b, delta } => write_json(&cfg, &build_exp_approx(b, delta)?.summary()),
        Command::Vrd { r, d, rmax, dmax, figures } => {
            let backend = cfg.backend()?;
            match (r, d) {
                (Some(r), Some(d)) => write_json(&cfg, &compute_vrd(r, d, backend.as_ref())?),
                (None, None) => {
                    let cells = table_vrd(rmax, dmax, backend.as_ref())?;
                    write_vrd_csv(&cells, output(&cfg)?)?;
                    if let Some(p) = figures {
                        write_figures_csv(&figures_data(&cells), File::create(p)?)?;
                    }
                    Ok(())
                }
                _ => Err(BenchError::Precondition("--r and --d go together".into())),
            }
        }
        Command::Lasserre { poly, r } => {
            let f = read_poly(&poly)?;
            let backend = cfg.backend()?;
            write_json(&cfg, &lasserre_bound(&f, r, backend.as_ref())?)
        }
        Command::Sosdist { rmin, rmax, step } => {
            let backend = cfg.backend()?;
            let t = sosdist_table(rmin, rmax, step, backend.as_ref())?;
            let summary = json!({"slope": t.slope, "points": t.rows.len()});
            write_sosdist_csv(&t, output(&cfg)?)?;
            if cfg.out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
            Ok(())
        }
        Command::Oracle { poly, grid } => {
            let f = read_poly(&poly)?;
            write_json(&cfg, &grid_oracle(&f, grid)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
