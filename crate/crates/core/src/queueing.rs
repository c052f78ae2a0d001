//! Service-time distributions and closed-form M/G/1 waiting times.
//!
//! Every delay here is an expected *waiting* time (arrival to service start).
//! Arrival rates are per server. With unit mean service time the per-server
//! arrival rate equals the per-server load.

use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loads within this distance of 1 are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Tolerance for weights summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One exponential phase of a hyperexponential distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub weight: f64,
    pub mean: f64,
}

/// Service-time distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDist {
    Exponential {
        mean: f64,
    },
    /// Mixture of exponentials; each branch is given by its weight and mean.
    HyperExponential {
        branches: Vec<Branch>,
    },
}

impl ServiceDist {
    pub fn exponential(mean: f64) -> Result<Self> {
        let d = ServiceDist::Exponential { mean };
        d.validate()?;
        Ok(d)
    }

    /// Hyperexponential from `(weight, branch_mean)` pairs.
    pub fn hyperexponential(branches: &[(f64, f64)]) -> Result<Self> {
        let d = ServiceDist::HyperExponential {
            branches: branches.iter().map(|&(weight, mean)| Branch { weight, mean }).collect(),
        };
        d.validate()?;
        Ok(d)
    }

    /// Hyperexponential from `(weight, rate)` pairs; branch mean is `1/rate`.
    pub fn hyperexponential_from_rates(branches: &[(f64, f64)]) -> Result<Self> {
        let mut converted = Vec::with_capacity(branches.len());
        for &(w, rate) in branches {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::InvalidParameter(format!("branch rate must be > 0 (got {rate})")));
            }
            converted.push((w, 1.0 / rate));
        }
        ServiceDist::hyperexponential(&converted)
    }

    /// Two-branch hyperexponential with unit overall mean.
    ///
    /// The second branch mean is `(1 - w1 * m1) / (1 - w1)`.
    pub fn two_branch_unit_mean(weight1: f64, mean1: f64) -> Result<Self> {
        if !(weight1 > 0.0 && weight1 < 1.0) {
            return Err(Error::InvalidParameter(format!("first weight must lie in (0, 1) (got {weight1})")));
        }
        let weight2 = 1.0 - weight1;
        let mean2 = (1.0 - weight1 * mean1) / weight2;
        if !(mean1 > 0.0 && mean2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "no unit-mean two-branch mixture with weight {weight1} and first mean {mean1}"
            )));
        }
        ServiceDist::hyperexponential(&[(weight1, mean1), (weight2, mean2)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceDist::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::InvalidParameter(format!("exponential mean must be > 0 (got {mean})")));
                }
            }
            ServiceDist::HyperExponential { branches } => {
                if branches.is_empty() {
                    return Err(Error::InvalidParameter("hyperexponential needs at least one branch".into()));
                }
                let mut sum = 0.0;
                for (i, b) in branches.iter().enumerate() {
                    if !(b.weight > 0.0 && b.weight <= 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "branch {} weight must lie in (0, 1] (got {})",
                            i + 1,
                            b.weight
                        )));
                    }
                    if !(b.mean.is_finite() && b.mean > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "branch {} mean must be > 0 (got {})",
                            i + 1,
                            b.mean
                        )));
                    }
                    sum += b.weight;
                }
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidParameter(format!("branch weights sum to {sum}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            ServiceDist::Exponential { mean } => *mean,
            ServiceDist::HyperExponential { branches } => branches.iter().map(|b| b.weight * b.mean).sum(),
        }
    }

    /// `E[x^2]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            ServiceDist::Exponential { mean } => 2.0 * mean * mean,
            ServiceDist::HyperExponential { branches } => {
                branches.iter().map(|b| 2.0 * b.mean * b.mean * b.weight).sum()
            }
        }
    }

    /// `A = E[x^2] / 2`, the residual-work constant.
    pub fn residual_term(&self) -> f64 {
        0.5 * self.second_moment()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDist::Exponential { mean } => exp_sample(rng, *mean),
            ServiceDist::HyperExponential { branches } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for b in branches {
                    acc += b.weight;
                    if u < acc {
                        return exp_sample(rng, b.mean);
                    }
                }
                exp_sample(rng, branches[branches.len() - 1].mean)
            }
        }
    }

    pub(crate) fn moments(&self) -> Moments {
        Moments { residual: self.residual_term(), mean: self.mean() }
    }
}

fn exp_sample<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("positive rate").sample(rng)
}

/// First two moments in the form the delay formulas use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Moments {
    pub residual: f64,
    pub mean: f64,
}

impl Moments {
    #[inline]
    pub fn stable(&self, lambda: f64) -> bool {
        lambda * self.mean < 1.0 - STABILITY_MARGIN
    }

    /// FCFS waiting time, or `None` when unstable.
    #[inline]
    pub fn fcfs(&self, lambda: f64) -> Option<f64> {
        let rho = lambda * self.mean;
        (rho < 1.0 - STABILITY_MARGIN).then(|| self.residual * lambda / (1.0 - rho))
    }

    /// Non-preemptive priority waiting times, highest priority first.
    pub fn priority(&self, class_lambdas: &[f64], out: &mut Vec<f64>) -> bool {
        out.clear();
        let total: f64 = class_lambdas.iter().sum();
        if !self.stable(total) {
            return false;
        }
        let work = self.residual * total;
        let mut before = 0.0;
        for &l in class_lambdas {
            let after = before + l * self.mean;
            out.push(work / ((1.0 - before) * (1.0 - after)));
            before = after;
        }
        true
    }
}

/// Expected waiting times `t_1..t_L`, one per SLA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DelayVector(pub Vec<f64>);

impl Deref for DelayVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DelayVector {
    fn from(v: Vec<f64>) -> Self {
        DelayVector(v)
    }
}

pub fn second_moment(dist: &ServiceDist) -> f64 {
    dist.second_moment()
}

pub fn residual_term(dist: &ServiceDist) -> f64 {
    dist.residual_term()
}

fn check_rate(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("arrival rate must be >= 0 (got {lambda})")));
    }
    Ok(())
}

/// M/G/1 FCFS waiting time at per-server arrival rate `lambda`.
pub fn fcfs_delay(lambda: f64, dist: &ServiceDist) -> Result<f64> {
    check_rate(lambda)?;
    let mo = dist.moments();
    mo.fcfs(lambda).ok_or(Error::Unstable { load: lambda * mo.mean })
}

/// Non-preemptive priority waiting times at a single server; class 1 has the
/// highest priority.
pub fn priority_delays(class_lambdas: &[f64], dist: &ServiceDist) -> Result<DelayVector> {
    if class_lambdas.is_empty() {
        return Err(Error::InvalidParameter("need at least one priority class".into()));
    }
    for &l in class_lambdas {
        check_rate(l)?;
    }
    let mo = dist.moments();
    let mut out = Vec::with_capacity(class_lambdas.len());
    if !mo.priority(class_lambdas, &mut out) {
        let load = class_lambdas.iter().sum::<f64>() * mo.mean;
        return Err(Error::Unstable { load });
    }
    Ok(DelayVector(out))
}

/// Delays of SLAs `2..L` on the shared priority pool of the hybrid
/// architecture. `class_lambdas[0]` is SLA 2's per-server rate.
pub fn hybrid_delays(class_lambdas: &[f64], dist: &ServiceDist) -> Result<DelayVector> {
    priority_delays(class_lambdas, dist)
}

/// Largest per-server arrival rate whose FCFS waiting time equals `t`.
pub fn od_max_load(t: f64, dist: &ServiceDist) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("delay must be > 0 (got {t})")));
    }
    let mo = dist.moments();
    Ok(t / (mo.residual + t * mo.mean))
}

/// Fractional server count that brings an SLA's FCFS wait exactly to `sla_delay`.
pub fn required_servers_fractional(sla_rate: f64, sla_delay: f64, dist: &ServiceDist) -> Result<f64> {
    if !(sla_rate > 0.0) {
        return Err(Error::Domain(format!("SLA arrival rate must be > 0 (got {sla_rate})")));
    }
    if !(sla_delay > 0.0) {
        return Err(Error::Domain(format!("SLA delay must be > 0 (got {sla_delay})")));
    }
    let mo = dist.moments();
    Ok(sla_rate * (sla_delay * mo.mean + mo.residual) / sla_delay)
}
