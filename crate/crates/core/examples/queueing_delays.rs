//! Expected waiting times under FCFS, non-preemptive priority and the hybrid
//! split, for exponential and hyperexponential service.

use qosdiff::queueing::{fcfs_delay, hybrid_delays, od_max_load, priority_delays};
use qosdiff::ServiceDist;

fn main() -> qosdiff::Result<()> {
    let exp = ServiceDist::exponential(1.0)?;
    let hyper = ServiceDist::two_branch_unit_mean(0.75, 0.5)?;

    for (name, dist) in [("exponential", &exp), ("hyperexponential", &hyper)] {
        println!("{name}: E[S^2]/(2E[S]) = {:.4}", dist.residual_term());
        for lambda in [0.1, 0.3, 0.5, 0.8] {
            println!("  FCFS at load {lambda}: {:.4}", fcfs_delay(lambda, dist)?);
        }
        let classes = [0.1, 0.2, 0.3];
        println!("  priority {classes:?}: {:.4?}", priority_delays(&classes, dist)?.0);
        // First entry is the dedicated FCFS pool, the rest share one priority queue.
        println!("  hybrid {classes:?}: {:.4?}", hybrid_delays(&classes, dist)?.0);
        println!("  largest on-demand load meeting T = 0.05: {:.6}", od_max_load(0.05, dist)?);
    }
    match fcfs_delay(1.0, &exp) {
        Err(e) => println!("load 1: {e}"),
        Ok(t) => println!("load 1: {t}"),
    }
    Ok(())
}
