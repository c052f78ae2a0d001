//! Priority-based sharing: all servers shared, SLA index is the priority class.

use rayon::prelude::*;

use super::{
    assemble, check_dist, check_order, check_shape, for_each_interior, pick, Architecture, ArchitectureConfig,
    Candidate, Evaluation, Infeasibility, OptResult,
};
use crate::error::{Error, Result};
use crate::mechanism::{arrival_rates, prices_unchecked, Segmentation};
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::ServiceDist;

/// Evaluates PBS on `m` servers at the population's total rate.
pub fn evaluate_pbs(
    model: &WtpModel,
    population: &TypePopulation,
    m: usize,
    cuts: &[usize],
    dist: &ServiceDist,
) -> Result<Evaluation> {
    check_dist(population, dist)?;
    let arch = ArchitectureConfig::new(Architecture::Pbs { servers: m }, dist.clone())?;
    let seg = Segmentation::from_cuts(population.len(), cuts)?;
    let per_server: Vec<f64> = arrival_rates(population, &seg).iter().map(|r| r / m as f64).collect();
    let mo = dist.moments();
    let mut delays = Vec::new();
    if !mo.priority(&per_server, &mut delays) {
        let load = per_server.iter().sum::<f64>() * mo.mean;
        return Ok(Evaluation::Infeasible(Infeasibility::Unstable { sla: 1, load }));
    }
    if let Err(why) = check_order(model.on_demand_delay(), &delays) {
        return Ok(Evaluation::Infeasible(why));
    }
    Ok(Evaluation::Feasible(Box::new(assemble(model, population, seg, delays, arch, false)?)))
}

/// Exact PBS optimum over cut tuples and a grid of per-server loads.
///
/// Ties go to the smaller load, then the lexicographically smaller cuts.
pub fn optimize_pbs(
    model: &WtpModel,
    template: &TypePopulation,
    m: usize,
    l: usize,
    dist: &ServiceDist,
    loads: &[f64],
) -> Result<OptResult> {
    check_dist(template, dist)?;
    check_shape(template, m, l)?;
    let pops = super::hybrid::populations(template, m, loads)?;
    let n = template.len();
    let mo = dist.moments();
    let t = model.on_demand_delay();
    let s = template.mean_service();
    let k = l - 1;
    let jobs: Vec<(usize, usize)> =
        (0..loads.len()).flat_map(|i| (1..=if k == 0 { 1 } else { n - k }).map(move |f| (i, f))).collect();
    let best = jobs
        .into_par_iter()
        .map(|(li, first)| {
            let pop = &pops[li];
            let probs = pop.probs();
            let alphas: Vec<f64> = pop.types().iter().map(|c| c.alpha).collect();
            let mut best: Option<Candidate> = None;
            let mut per_server = Vec::with_capacity(l);
            let mut delays = Vec::with_capacity(l);
            let mut thresholds = Vec::with_capacity(l + 1);
            for_each_interior(n, k, first, |interior| {
                per_server.clear();
                thresholds.clear();
                let mut lo = 0;
                for &hi in interior.iter().chain(std::iter::once(&n)) {
                    per_server.push(pop.total_rate() * probs[lo..hi].iter().sum::<f64>() / m as f64);
                    thresholds.push(alphas[lo]);
                    lo = hi;
                }
                thresholds.push(pop.alpha_min());
                if !mo.priority(&per_server, &mut delays) || check_order(t, &delays).is_err() {
                    return;
                }
                delays[0] = t;
                let prices = prices_unchecked(model, &thresholds, &delays);
                let value: f64 = prices.iter().zip(&per_server).map(|(p, r)| p * r * m as f64 * s).sum();
                let mut key = vec![li];
                key.extend(interior.iter().map(|b| b + 1));
                best = pick(best.take(), Some(Candidate { value, key }));
            });
            best
        })
        .reduce(|| None, pick);
    let best = best.ok_or_else(|| {
        Error::NoFeasibleCandidate(format!(
            "no PBS configuration with L = {l} on {m} servers is feasible on the load grid"
        ))
    })?;
    evaluate_pbs(model, &pops[best.key[0]], m, &best.key[1..], dist)?
        .into_feasible()
        .ok_or_else(|| Error::NoFeasibleCandidate("search winner failed re-evaluation".into()))
}
