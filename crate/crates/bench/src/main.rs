use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pnk_bench::config::{build_problem, ExperimentConfig, Method, ProblemSpec};
use pnk_bench::mm::{write_dense, write_sparse};
use pnk_bench::runner::{run_experiment, summary_fields, SUMMARY_HEADER};
use pnk_bench::stability::{
    iterate_factors, stability_report, write_closed_loop_csv, write_projected_csv, DEFAULT_NMAX,
};
use pnk_core::pnk::{pnk_solve, PnkConfig};

#[derive(Parser)]
#[command(
    name = "pnk",
    version,
    about = "Low-rank Riccati solvers: problem generation and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Laplacian3d,
    Synthetic,
}

#[derive(Subcommand)]
enum Command {
    /// Write A.mtx, B.mtx and C.mtx for a generated problem.
    Gen {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long)]
        n0: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one experiment config.
    Solve { config: PathBuf },
    /// Run several configs and collect their summaries.
    Bench {
        configs: Vec<PathBuf>,
        /// Combined summary, one row per config.
        #[arg(long, default_value = "bench_summary.csv")]
        out: PathBuf,
    },
    /// Closed-loop spectra along a projected Newton run.
    Stability {
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NMAX)]
        nmax: usize,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen {
            kind,
            n0,
            p,
            q,
            seed,
            out,
        } => {
            let spec = match kind {
                Kind::Laplacian3d => ProblemSpec::Laplacian3d {
                    n0,
                    p,
                    q,
                    c_equals_bt: false,
                },
                Kind::Synthetic => ProblemSpec::Synthetic { n0, p, q },
            };
            let problem = build_problem(&spec, seed)?;
            fs::create_dir_all(&out)?;
            write_sparse(&out.join("A.mtx"), &problem.a)?;
            write_dense(&out.join("B.mtx"), &problem.b)?;
            write_dense(&out.join("C.mtx"), &problem.c)?;
            println!("wrote n = {} problem to {}", problem.a.n(), out.display());
        }
        Command::Solve { config } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let outcome = run_experiment(&cfg)?;
            let s = &outcome.summary;
            println!(
                "{}: converged={} newton_steps={} basis_dim={} memory={} rank={} rel_res={:.3e} seconds={:.2}",
                s.method.name(),
                outcome.converged,
                s.newton_steps,
                s.basis_dim,
                s.memory_vectors,
                s.rank,
                s.rel_res,
                s.seconds
            );
        }
        Command::Bench { configs, out } => {
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(std::iter::once("config").chain(SUMMARY_HEADER))?;
            for path in &configs {
                let cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
                let outcome = run_experiment(&cfg).with_context(|| format!("running {}", path.display()))?;
                let fields = summary_fields(&outcome.summary);
                w.write_record(std::iter::once(path.display().to_string()).chain(fields))?;
                eprintln!("{}: rel_res {:.3e}", path.display(), outcome.summary.rel_res);
            }
            w.flush()?;
        }
        Command::Stability { config, nmax } => {
            let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if !matches!(cfg.method, Method::PnkEk | Method::PnkRk) {
                anyhow::bail!("stability needs a pnk_ek or pnk_rk config");
            }
            let problem = build_problem(&cfg.problem, cfg.seed)?;
            let n = problem.a.n();
            if n > nmax {
                anyhow::bail!("n = {n} exceeds --nmax {nmax}");
            }
            let pc = PnkConfig {
                record_iterates: true,
                ..cfg.pnk_config()
            };
            let (_, report) = pnk_solve(&problem.a, &problem.b, &problem.c, None, &pc)?;
            let factors = iterate_factors(&report, n)?;
            let rep = stability_report(&problem.a, &problem.b, &factors, nmax)?;
            fs::create_dir_all(&cfg.out_dir)?;
            write_closed_loop_csv(&cfg.out_dir.join("closed_loop.csv"), &rep)?;
            write_projected_csv(&cfg.out_dir.join("projected.csv"), &report, problem.a.norm1())?;
            let worst = rep.abscissae.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!("{} iterates, largest closed-loop abscissa {worst:.3e}", factors.len());
        }
    }
    Ok(())
}
