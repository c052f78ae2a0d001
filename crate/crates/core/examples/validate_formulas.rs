//! Simulates a few small systems and compares the measured mean waits with
//! the M/G/1 formulas.
//!
//! Usage: cargo run --release --example validate_formulas -- [measured_jobs] [replications]

use std::time::Instant;

use qosdiff::optimizer::{Architecture, ArchitectureConfig};
use qosdiff::simulator::{predict_delays, validate_formulas, DEFAULT_TOLERANCE};
use qosdiff::{ServiceDist, SimConfig};

fn main() -> qosdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let measured_jobs: u64 = args.next().map_or(1_000_000, |a| a.parse().expect("job count"));
    let replications: usize = args.next().map_or(10, |a| a.parse().expect("replication count"));
    let cfg = SimConfig { measured_jobs, replications, ..SimConfig::default() };
    let exp = ServiceDist::exponential(1.0)?;

    let cases = [
        ("M/M/1", Architecture::OnDemand { servers: 1 }, vec![0.5]),
        ("two priority classes", Architecture::Pbs { servers: 1 }, vec![0.2, 0.2]),
        ("four FCFS modules", Architecture::Sms { partition: vec![21, 24, 28, 27] }, vec![0.96, 1.68, 3.36, 6.0]),
        ("hybrid", Architecture::Hybrid { first: 51, second: 49 }, vec![2.4, 1.2, 2.2, 4.2]),
    ];
    for (name, arch, rates) in cases {
        let start = Instant::now();
        let predicted = predict_delays(&arch, &rates, &exp)?;
        let v = validate_formulas(
            &ArchitectureConfig::new(arch, exp.clone())?,
            &rates,
            &cfg,
            &predicted.0,
            DEFAULT_TOLERANCE,
        )?;
        println!("{name} ({:.1?})", start.elapsed());
        for r in &v.rows {
            println!(
                "  class {}: simulated {:.5} +- {:.5}, formula {:.5}, off by {:.2}%",
                r.class,
                r.simulated,
                r.ci,
                r.predicted,
                100.0 * r.relative_deviation
            );
        }
        for c in &v.report.classes {
            println!("  class {}: Little gap {:.2e} +- {:.2e}", c.class, c.little_gap, c.little_ci);
        }
        println!(
            "  utilization {:.5} +- {:.5}, offered {:.5}",
            v.report.mean_utilization, v.report.utilization_ci, v.report.offered_load
        );
    }
    Ok(())
}
