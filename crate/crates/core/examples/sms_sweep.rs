//! Sweeps the per-server load for the separated-module architecture and
//! prints the revenue ratio at every grid point.
//!
//! Usage: cargo run --release --example sms_sweep -- [L] [delta] [budget]
//!
//! With a candidate budget the search stops early and flags its result as
//! best effort.

use std::time::Instant;

use qosdiff::model::TypePopulation;
use qosdiff::optimizer::{best_row, default_load_grid, sweep_load, ArchKind, SearchOptions};
use qosdiff::{ServiceDist, WtpModel};

fn main() -> qosdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let l: usize = args.next().map_or(2, |a| a.parse().expect("L must be an integer"));
    let delta: f64 = args.next().map_or(0.02, |a| a.parse().expect("delta must be a number"));
    let opts = match args.next() {
        Some(b) => SearchOptions::best_effort(b.parse().expect("budget must be an integer")),
        None => SearchOptions::exact(),
    };

    let model = WtpModel::reference();
    let template = TypePopulation::grid(50, delta, 1e-6, 1.0)?;
    let dist = ServiceDist::exponential(1.0)?;
    let start = Instant::now();
    let rows = sweep_load(&model, &template, 100, l, ArchKind::Sms, &dist, &default_load_grid(), &opts)?;
    println!("{:>6} {:>8} {:>10} {:>24} {:>6}", "lambda", "gamma", "phi_2", "cuts", "exact");
    for row in &rows {
        match &row.result {
            Some(r) => println!(
                "{:>6.2} {:>8.4} {:>10.5} {:>24} {:>6}",
                row.load,
                r.gamma,
                r.menu.delays().get(1).copied().unwrap_or(f64::NAN),
                format!("{:?}", r.segmentation.cuts()),
                !r.best_effort
            ),
            None => println!("{:>6.2} {:>8} ({})", row.load, "-", row.gap.as_deref().unwrap_or("")),
        }
    }
    if let Some(best) = best_row(&rows) {
        println!("best gamma {:.4} at lambda {:.2}", best.result.as_ref().unwrap().gamma, best.load);
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
