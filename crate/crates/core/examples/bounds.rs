//! Closed-form revenue bounds: the priority-scheduling ceiling, the
//! separated-module floor, and both under hyperexponential service.

use qosdiff::optimizer::{hyper_bound_sweep, pbs_upper_bound, sms_lower_bound_beta3};
use qosdiff::ServiceDist;

fn main() -> qosdiff::Result<()> {
    let t = 0.05;
    let exp = ServiceDist::exponential(1.0)?;
    println!("priority scheduling ceiling 1 + T/A: {:.4}", pbs_upper_bound(t, &exp)?);
    for phi0 in [0.5, 0.55, 0.8, 1.05] {
        println!("separated-module floor at phi0_hat {phi0}: {:.4}", sms_lower_bound_beta3(t, phi0, &exp)?);
    }

    let means: Vec<f64> = (0..16).map(|i| 0.2 + 0.05 * i as f64).collect();
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "mean1", "mean2", "A", "ceiling", "floor");
    for r in hyper_bound_sweep(t, 0.5, 0.75, &means)? {
        println!("{:>6.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4}", r.mean1, r.mean2, r.residual, r.pbs_bound, r.kappa);
    }
    Ok(())
}
