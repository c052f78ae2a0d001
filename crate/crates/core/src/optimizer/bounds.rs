//! Closed-form revenue bounds relative to on-demand service.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::{required_servers_fractional, ServiceDist};

/// Upper bound `1 + T/A` on the PBS revenue ratio.
pub fn pbs_upper_bound(t: f64, dist: &ServiceDist) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("T must be > 0 (got {t})")));
    }
    Ok(1.0 + t / dist.residual_term())
}

/// Revenue ratio of a two-SLA SMS menu with fractional server counts.
///
/// Types with `alpha > alpha_split` get on-demand service; the rest share a
/// second SLA with delay `phi2`, priced at the split type's WTP. Each module
/// gets exactly the servers its delay needs.
pub fn sms_lower_bound(
    model: &WtpModel,
    population: &TypePopulation,
    alpha_split: f64,
    phi2: f64,
    dist: &ServiceDist,
) -> Result<f64> {
    if !(alpha_split > population.alpha_min() && alpha_split < population.alpha_max()) {
        return Err(Error::Domain(format!(
            "split type {alpha_split} must lie strictly between {} and {}",
            population.alpha_min(),
            population.alpha_max()
        )));
    }
    let t = model.on_demand_delay();
    if !(phi2 > t) {
        return Err(Error::Domain(format!("second SLA delay {phi2} must exceed T = {t}")));
    }
    let share1: f64 =
        population.types().iter().zip(population.probs()).filter(|(c, _)| c.alpha > alpha_split).map(|(_, p)| p).sum();
    let rate1 = population.total_rate() * share1;
    let rate2 = population.total_rate() - rate1;
    let m1 = required_servers_fractional(rate1, t, dist)?;
    let m2 = required_servers_fractional(rate2, phi2, dist)?;
    let s = dist.mean();
    let revenue = (model.price() * rate1 + model.wtp(alpha_split, phi2)? * rate2) * s;
    let od = (m1 + m2) * model.price() * s * t / (dist.residual_term() + t * s);
    Ok(revenue / od)
}

/// Closed-form lower bound on the SMS revenue ratio for `beta = 3` with the
/// market split in half at the type whose zero-value delay is `phi0_hat`.
pub fn sms_lower_bound_beta3(t: f64, phi0_hat: f64, dist: &ServiceDist) -> Result<f64> {
    if !(t > 0.0 && phi0_hat > t) {
        return Err(Error::Domain(format!("need phi0_hat > T > 0 (got T = {t}, phi0_hat = {phi0_hat})")));
    }
    let a = dist.residual_term();
    Ok(1.875 * (1.0 + a / t) / (2.0 + a / t + 2.0 * a / phi0_hat))
}

/// One point of the two-branch hyperexponential sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub weight1: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub residual: f64,
    pub pbs_bound: f64,
    pub kappa: f64,
}

/// Bounds for unit-mean two-branch hyperexponential service as the first
/// branch mean varies; the second branch mean keeps the overall mean at 1.
pub fn hyper_bound_sweep(t: f64, phi0_hat: f64, weight1: f64, means1: &[f64]) -> Result<Vec<BoundRow>> {
    means1
        .iter()
        .map(|&mean1| {
            let dist = ServiceDist::two_branch_unit_mean(weight1, mean1)?;
            let ServiceDist::HyperExponential { branches } = &dist else {
                unreachable!("two_branch_unit_mean builds a hyperexponential");
            };
            Ok(BoundRow {
                weight1,
                mean1,
                mean2: branches[1].mean,
                residual: dist.residual_term(),
                pbs_bound: pbs_upper_bound(t, &dist)?,
                kappa: sms_lower_bound_beta3(t, phi0_hat, &dist)?,
            })
        })
        .collect()
}
