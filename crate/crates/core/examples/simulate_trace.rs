//! Simulates a small hybrid system and prints the first jobs of its trace
//! along with per-class statistics.
//!
//! Usage: cargo run --release --example simulate_trace -- [round-robin]

use qosdiff::optimizer::{Architecture, ArchitectureConfig};
use qosdiff::simulator::simulate_traced;
use qosdiff::{Dispatch, ServiceDist, SimConfig};

fn main() -> qosdiff::Result<()> {
    let dispatch = match std::env::args().nth(1).as_deref() {
        Some("round-robin") => Dispatch::RoundRobin,
        _ => Dispatch::Random,
    };
    let arch = ArchitectureConfig::new(Architecture::Hybrid { first: 2, second: 3 }, ServiceDist::exponential(1.0)?)?;
    let rates = [0.8, 0.6, 0.9];
    let cfg = SimConfig { measured_jobs: 200_000, replications: 4, dispatch, ..SimConfig::default() };
    let (report, trace) = simulate_traced(&arch, &rates, &cfg)?;

    println!("{:>6} {:>5} {:>6} {:>10} {:>10}", "job", "class", "server", "arrival", "start");
    for r in trace.iter().take(12) {
        println!("{:>6} {:>5} {:>6} {:>10.4} {:>10.4}", r.job, r.class, r.server, r.arrival, r.start);
    }
    println!("{} jobs traced", trace.len());
    for c in &report.classes {
        println!(
            "class {}: wait {:.4} +- {:.4}, queue {:.4}, Little gap {:.2e}",
            c.class, c.mean_wait, c.wait_ci, c.mean_queue, c.little_gap
        );
    }
    println!("utilization {:.4?} (offered {:.4})", report.utilization, report.offered_load);
    Ok(())
}
