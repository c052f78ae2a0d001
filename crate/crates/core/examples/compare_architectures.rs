//! Best revenue ratio of every architecture for one number of SLAs.
//!
//! Usage: cargo run --release --example compare_architectures -- [L]
//!
//! Priority scheduling only stays feasible at very low loads, so it gets its
//! own fine grid.

use qosdiff::optimizer::{default_load_grid, od_revenue, optimize_hybrid, optimize_pbs, optimize_sms};
use qosdiff::queueing::od_max_load;
use qosdiff::{ServiceDist, TypePopulation, WtpModel};

fn main() -> qosdiff::Result<()> {
    let l: usize = std::env::args().nth(1).map_or(3, |a| a.parse().expect("L must be an integer"));
    let model = WtpModel::reference();
    let dist = ServiceDist::exponential(1.0)?;
    let template = TypePopulation::grid(50, 0.02, 1e-6, 1.0)?;
    let grid = default_load_grid();

    let od = od_revenue(100, &model, &dist)?;
    println!("on demand: revenue {od:.4} at load {:.6}", od_max_load(0.05, &dist)?);

    let sms = grid
        .iter()
        .filter_map(|&x| optimize_sms(&model, &template.with_total_rate(x * 100.0).ok()?, 100, l, &dist).ok())
        .max_by(|a, b| a.gamma.total_cmp(&b.gamma));
    if let Some(r) = sms {
        println!("separated modules: gamma {:.4} at load {:.2}, servers {:?}", r.gamma, r.load, r.architecture.arch);
    }

    let hyb = optimize_hybrid(&model, &template, 100, l, &dist, &grid)?;
    println!("hybrid: gamma {:.4} at load {:.2}, servers {:?}", hyb.gamma, hyb.load, hyb.architecture.arch);

    let fine: Vec<f64> = (0..=25).map(|i| 0.04 + 0.0005 * i as f64).collect();
    match optimize_pbs(&model, &template, 100, l, &dist, &fine) {
        Ok(r) => println!("priority scheduling: gamma {:.4} at load {:.4}", r.gamma, r.load),
        Err(e) => println!("priority scheduling: {e}"),
    }
    Ok(())
}
