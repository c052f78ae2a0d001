use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qosdiff::cli::{self, Figure, ReproduceOptions, THREADS_ENV};
use qosdiff::optimizer::ArchKind;
use qosdiff::scenario::{load_with, Overrides, DEFAULT_BEST_EFFORT_BUDGET};
use qosdiff::Error;

#[derive(Parser)]
#[command(name = "qosdiff", version, about = "Delay- and price-differentiated cloud service menus")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Built-in scenario: paper-low or paper-high.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Architecture: sms, pbs, hybrid or od.
    #[arg(long, global = true)]
    arch: Option<ArchKind>,
    /// Number of SLAs.
    #[arg(long = "L", global = true)]
    l: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Stop the exact search at a node budget and report the incumbent.
    #[arg(long, global = true)]
    best_effort: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize the menu at every grid load.
    Optimize,
    /// Closed-form bounds and the hyperexponential sweep.
    Bounds,
    /// Simulate the scenario's system.
    Simulate {
        /// Compare simulated waits with the formulas and fail on a mismatch.
        #[arg(long)]
        validate: bool,
    },
    /// Exhaustive misreport scan of the optimizer's menus.
    Dsic,
    /// Emit the data behind one figure, or all of them.
    Reproduce {
        /// fig3, fig4, fig6, fig7, fig8, fig9, appendix or all.
        figure: String,
        /// Search node budget per load for L >= 4.
        #[arg(long, default_value_t = DEFAULT_BEST_EFFORT_BUDGET)]
        budget: u64,
    },
}

fn run(args: Args) -> qosdiff::Result<()> {
    if let Some(n) = cli::thread_count(args.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    if let Cmd::Reproduce { figure, budget } = &args.command {
        let figures: Vec<Figure> = if figure == "all" { Figure::ALL.to_vec() } else { vec![figure.parse()?] };
        let opts = ReproduceOptions {
            out_dir: args.out.clone().unwrap_or_else(|| PathBuf::from("results")),
            max_l: args.l,
            budget: *budget,
        };
        for fig in figures {
            let (table, written) = cli::cmd_reproduce(fig, &opts)?;
            println!("{fig}: {} rows -> {}", table.rows.len(), written.tables[0].display());
        }
        return Ok(());
    }

    let overrides = Overrides {
        arch: args.arch,
        l: args.l,
        seed: args.seed,
        best_effort: args.best_effort,
        out_dir: args.out.clone(),
    };
    let preset = match (&args.scenario, &args.preset) {
        (None, None) => Some("paper-low"),
        (_, p) => p.as_deref(),
    };
    let sc = load_with(args.scenario.as_deref(), preset, &overrides)?;
    match args.command {
        Cmd::Optimize => {
            let out = cli::cmd_optimize(&sc)?;
            let b = &out.best;
            println!(
                "best gamma {:.4} at lambda {} (revenue {:.4}, delays {:?}, prices {:?}{})",
                b.gamma,
                b.load,
                b.revenue,
                b.delays.0,
                b.menu.prices(),
                if b.best_effort { ", best effort" } else { "" }
            );
            println!("wrote {}", out.written.summary.display());
        }
        Cmd::Bounds => {
            let out = cli::cmd_bounds(&sc)?;
            println!("PBS upper bound {:.6}", out.pbs_upper);
            for (phi0, k) in &out.kappa {
                println!("SMS lower bound {k:.6} at phi0_hat {phi0}");
            }
            println!(
                "hyperexponential sweep: min A {:.4}, min kappa {:.4}",
                out.hyper_min_residual, out.hyper_min_kappa
            );
        }
        Cmd::Simulate { validate } => {
            let out = cli::cmd_simulate(&sc, validate)?;
            for (c, p) in out.report.classes.iter().zip(&out.predicted) {
                println!("class {}: wait {:.5} +- {:.5} (formula {:.5})", c.class, c.mean_wait, c.wait_ci, p);
            }
            if out.validation_pass == Some(true) {
                println!("validation passed");
            }
        }
        Cmd::Dsic => {
            let out = cli::cmd_dsic(&sc)?;
            let pairs: usize = out.rows.iter().map(|r| r.report.pairs_checked).sum();
            println!("{} menus truthful ({pairs} report pairs checked)", out.rows.len());
        }
        Cmd::Reproduce { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
