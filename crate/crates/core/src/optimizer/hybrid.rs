//! Hybrid: a dedicated FCFS pool for SLA 1 plus a shared priority pool for
//! SLAs `2..L`.
//!
//! For fixed cuts every delay of SLAs `2..L` grows as the first pool takes
//! servers from the second, and revenue falls with each such delay, so the
//! smallest feasible first pool is optimal.

use rayon::prelude::*;

use super::{
    assemble, check_dist, check_order, check_shape, for_each_interior, min_servers_for_delay, pick, Architecture,
    ArchitectureConfig, Candidate, Evaluation, Infeasibility, OptResult,
};
use crate::error::{Error, Result};
use crate::mechanism::{arrival_rates, prices_unchecked, Segmentation};
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::ServiceDist;

pub fn evaluate_hybrid(
    model: &WtpModel,
    population: &TypePopulation,
    first: usize,
    second: usize,
    cuts: &[usize],
    dist: &ServiceDist,
) -> Result<Evaluation> {
    check_dist(population, dist)?;
    if cuts.is_empty() {
        return Err(Error::Precondition("the hybrid architecture needs L >= 2".into()));
    }
    let arch = ArchitectureConfig::new(Architecture::Hybrid { first, second }, dist.clone())?;
    let seg = Segmentation::from_cuts(population.len(), cuts)?;
    let rates = arrival_rates(population, &seg);
    let mo = dist.moments();
    let Some(t1) = mo.fcfs(rates[0] / first as f64) else {
        return Ok(Evaluation::Infeasible(Infeasibility::Unstable { sla: 1, load: rates[0] / first as f64 * mo.mean }));
    };
    let shared: Vec<f64> = rates[1..].iter().map(|r| r / second as f64).collect();
    let mut rest = Vec::new();
    if !mo.priority(&shared, &mut rest) {
        let load = shared.iter().sum::<f64>() * mo.mean;
        return Ok(Evaluation::Infeasible(Infeasibility::Unstable { sla: 2, load }));
    }
    let mut delays = vec![t1];
    delays.extend(rest);
    if let Err(why) = check_order(model.on_demand_delay(), &delays) {
        return Ok(Evaluation::Infeasible(why));
    }
    Ok(Evaluation::Feasible(Box::new(assemble(model, population, seg, delays, arch, false)?)))
}

pub(crate) fn populations(template: &TypePopulation, m: usize, loads: &[f64]) -> Result<Vec<TypePopulation>> {
    if loads.is_empty() {
        return Err(Error::InvalidParameter("load grid is empty".into()));
    }
    loads
        .iter()
        .map(|&x| {
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::InvalidParameter(format!("grid loads must lie in (0, 1) (got {x})")));
            }
            template.with_total_rate(x * m as f64)
        })
        .collect()
}

/// Exact hybrid optimum over the first-pool size, cut tuples and a load grid.
///
/// Ties go to the smaller load, then smaller `(m_1, m_2)`, then smaller cuts.
pub fn optimize_hybrid(
    model: &WtpModel,
    template: &TypePopulation,
    m: usize,
    l: usize,
    dist: &ServiceDist,
    loads: &[f64],
) -> Result<OptResult> {
    check_dist(template, dist)?;
    check_shape(template, m, l)?;
    if l < 2 {
        return Err(Error::Precondition("the hybrid architecture needs L >= 2".into()));
    }
    let pops = populations(template, m, loads)?;
    let n = template.len();
    let mo = dist.moments();
    let t = model.on_demand_delay();
    let s = template.mean_service();
    let k = l - 1;
    let jobs: Vec<(usize, usize)> = (0..loads.len()).flat_map(|i| (1..=n - k).map(move |f| (i, f))).collect();
    let best = jobs
        .into_par_iter()
        .map(|(li, first)| {
            let pop = &pops[li];
            let probs = pop.probs();
            let alphas: Vec<f64> = pop.types().iter().map(|c| c.alpha).collect();
            let mut best: Option<Candidate> = None;
            let mut rates = Vec::with_capacity(l);
            let mut thresholds = Vec::with_capacity(l + 1);
            let mut shared = Vec::with_capacity(l);
            let mut delays = Vec::with_capacity(l);
            for_each_interior(n, k, first, |interior| {
                rates.clear();
                thresholds.clear();
                let mut lo = 0;
                for &hi in interior.iter().chain(std::iter::once(&n)) {
                    rates.push(pop.total_rate() * probs[lo..hi].iter().sum::<f64>());
                    thresholds.push(alphas[lo]);
                    lo = hi;
                }
                thresholds.push(pop.alpha_min());
                let m1_min = min_servers_for_delay(&mo, rates[0], t);
                for m1 in m1_min..m {
                    let m2 = m - m1;
                    shared.clear();
                    shared.extend(rates[1..].iter().map(|r| r / m2 as f64));
                    let mut rest = Vec::with_capacity(k);
                    if !mo.priority(&shared, &mut rest) {
                        break;
                    }
                    delays.clear();
                    delays.push(t);
                    delays.extend_from_slice(&rest);
                    if check_order(t, &delays).is_err() {
                        continue;
                    }
                    let prices = prices_unchecked(model, &thresholds, &delays);
                    let value: f64 = prices.iter().zip(&rates).map(|(p, r)| p * r * s).sum();
                    let mut key = vec![li, m1, m2];
                    key.extend(interior.iter().map(|b| b + 1));
                    best = pick(best.take(), Some(Candidate { value, key }));
                    break;
                }
            });
            best
        })
        .reduce(|| None, pick);
    let best = best.ok_or_else(|| {
        Error::NoFeasibleCandidate(format!(
            "no hybrid configuration with L = {l} on {m} servers is feasible on the load grid"
        ))
    })?;
    evaluate_hybrid(model, &pops[best.key[0]], best.key[1], best.key[2], &best.key[3..], dist)?
        .into_feasible()
        .ok_or_else(|| Error::NoFeasibleCandidate("search winner failed re-evaluation".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> ServiceDist {
        ServiceDist::exponential(1.0).unwrap()
    }

    #[test]
    fn reference_configuration() {
        let model = WtpModel::reference();
        let pop = TypePopulation::grid(50, 0.02, 1e-6, 10.0).unwrap();
        let r = evaluate_hybrid(&model, &pop, 51, 49, &[13, 19, 30], &exp1()).unwrap().into_feasible().unwrap();
        for (got, want) in r.delays[1..].iter().zip([0.1590, 0.1709, 0.1973]) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
        for (got, want) in r.menu.prices().iter().zip([1.0, 0.9063, 0.8963, 0.8889]) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
        assert!((r.revenue - 9.193).abs() < 0.01);
    }

    #[test]
    fn needs_two_slas() {
        let model = WtpModel::reference();
        let pop = TypePopulation::grid(50, 0.02, 1e-6, 10.0).unwrap();
        assert!(evaluate_hybrid(&model, &pop, 51, 49, &[], &exp1()).is_err());
        assert!(optimize_hybrid(&model, &pop, 100, 1, &exp1(), &[0.1]).is_err());
    }

    #[test]
    fn rejects_bad_grid() {
        let model = WtpModel::reference();
        let pop = TypePopulation::grid(50, 0.02, 1e-6, 10.0).unwrap();
        assert!(optimize_hybrid(&model, &pop, 100, 2, &exp1(), &[]).is_err());
        assert!(optimize_hybrid(&model, &pop, 100, 2, &exp1(), &[1.2]).is_err());
    }
}
