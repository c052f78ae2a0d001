//! Separated modules: one FCFS pool per SLA.
//!
//! For a fixed cut tuple the revenue only depends on the delays of SLAs
//! `2..L`, so SLA 1 takes every server the other modules leave over and the
//! search runs over `m_2..m_L` alone. Within that space the last module gets
//! as many servers as its ordering constraint allows, since revenue strictly
//! falls as its delay grows. Branches are cut with a bound built from the
//! smallest delays the remaining servers could reach; the bound is valid
//! because total price reduction is non-decreasing in every SLA delay.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use super::{
    assemble, check_dist, check_order, check_shape, for_each_interior, min_servers_for_delay, min_stable, pick,
    Architecture, ArchitectureConfig, Candidate, Evaluation, Infeasibility, OptResult, SearchOptions, DELAY_TOL,
};
use crate::error::{Error, Result};
use crate::mechanism::Segmentation;
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::{Moments, ServiceDist};

/// Evaluates one SMS configuration: `partition` is `m_1..m_L` and `cuts` the
/// 1-based first type of SLAs `2..L`.
pub fn evaluate_sms(
    model: &WtpModel,
    population: &TypePopulation,
    partition: &[usize],
    cuts: &[usize],
    dist: &ServiceDist,
) -> Result<Evaluation> {
    check_dist(population, dist)?;
    if partition.len() != cuts.len() + 1 {
        return Err(Error::Precondition(format!(
            "{} modules need {} cuts (got {})",
            partition.len(),
            partition.len() - 1,
            cuts.len()
        )));
    }
    let arch = ArchitectureConfig::new(Architecture::Sms { partition: partition.to_vec() }, dist.clone())?;
    let seg = Segmentation::from_cuts(population.len(), cuts)?;
    let rates = crate::mechanism::arrival_rates(population, &seg);
    let mo = dist.moments();
    let mut delays = Vec::with_capacity(rates.len());
    for (l, (&r, &k)) in rates.iter().zip(partition).enumerate() {
        match mo.fcfs(r / k as f64) {
            Some(t) => delays.push(t),
            None => {
                return Ok(Evaluation::Infeasible(Infeasibility::Unstable { sla: l + 1, load: r / k as f64 * mo.mean }))
            }
        }
    }
    if let Err(why) = check_order(model.on_demand_delay(), &delays) {
        return Ok(Evaluation::Infeasible(why));
    }
    Ok(Evaluation::Feasible(Box::new(assemble(model, population, seg, delays, arch, false)?)))
}

/// Exact SMS optimum over all partitions of `m` servers and all cut tuples.
pub fn optimize_sms(
    model: &WtpModel,
    population: &TypePopulation,
    m: usize,
    l: usize,
    dist: &ServiceDist,
) -> Result<OptResult> {
    optimize_sms_with(model, population, m, l, dist, &SearchOptions::exact())
}

/// SMS optimum with search limits.
///
/// For `L >= 3` a deterministic local search first produces an incumbent; the
/// exact branch-and-bound then either proves it optimal or improves on it.
/// When a limit stops the exact phase, the incumbent is returned with
/// `best_effort` set if the options allow it, otherwise the call fails with
/// [`Error::BudgetExceeded`].
pub fn optimize_sms_with(
    model: &WtpModel,
    population: &TypePopulation,
    m: usize,
    l: usize,
    dist: &ServiceDist,
    opts: &SearchOptions,
) -> Result<OptResult> {
    check_dist(population, dist)?;
    check_shape(population, m, l)?;
    let ctx = Ctx::new(model, population, m, l, dist);
    let seed = if l >= 3 || opts.best_effort { ctx.local_search() } else { None };
    let (exact, complete, evaluated) = ctx.exact(seed.clone(), opts);
    let best = pick(seed, exact);
    if !complete && !opts.best_effort {
        return Err(Error::BudgetExceeded { evaluated });
    }
    let best = best.ok_or_else(|| {
        Error::NoFeasibleCandidate(format!(
            "no SMS configuration with L = {l} on {m} servers meets the delay rules at total rate {}",
            population.total_rate()
        ))
    })?;
    let (partition, cuts) = best.key.split_at(l);
    let mut result = evaluate_sms(model, population, partition, cuts, dist)?
        .into_feasible()
        .ok_or_else(|| Error::NoFeasibleCandidate("search winner failed re-evaluation".into()))?;
    result.best_effort = !complete;
    Ok(result)
}

struct Ctx<'a> {
    model: &'a WtpModel,
    mo: Moments,
    t: f64,
    p: f64,
    s: f64,
    m: usize,
    l: usize,
    n: usize,
    alphas: Vec<f64>,
    probs: &'a [f64],
    total: f64,
}

/// Per cut tuple quantities, indexed by 0-based SLA.
struct Tuple<'b> {
    interior: &'b [usize],
    rates: Vec<f64>,
    /// `R_l`: total rate of SLAs `l..L`.
    tail: Vec<f64>,
    alpha_hat: Vec<f64>,
    min_servers: Vec<usize>,
    /// `sum of min_servers[l..]` for `l >= 1`.
    min_after: Vec<usize>,
    m1: usize,
    full_value: f64,
}

/// Relative slack on pruning so that rounding in the bound never discards a
/// candidate that ties the incumbent.
const PRUNE_SLACK: f64 = 1e-12;

fn prunable(bound: f64, incumbent: f64) -> bool {
    bound < incumbent - PRUNE_SLACK * (1.0 + incumbent.abs())
}

impl<'a> Ctx<'a> {
    fn new(model: &'a WtpModel, population: &'a TypePopulation, m: usize, l: usize, dist: &ServiceDist) -> Self {
        Ctx {
            model,
            mo: dist.moments(),
            t: model.on_demand_delay(),
            p: model.price(),
            s: population.mean_service(),
            m,
            l,
            n: population.len(),
            alphas: population.types().iter().map(|t| t.alpha).collect(),
            probs: population.probs(),
            total: population.total_rate(),
        }
    }

    fn wait(&self, rate: f64, k: usize) -> f64 {
        self.mo.fcfs(rate / k as f64).unwrap_or(f64::INFINITY)
    }

    fn drop(&self, alpha: f64, from: f64, to: f64) -> f64 {
        self.model.wtp_unchecked(alpha, from) - self.model.wtp_unchecked(alpha, to)
    }

    fn tuple<'b>(&self, interior: &'b [usize]) -> Option<Tuple<'b>> {
        let l = interior.len() + 1;
        let mut bounds = Vec::with_capacity(l + 1);
        bounds.push(0);
        bounds.extend_from_slice(interior);
        bounds.push(self.n);
        let rates: Vec<f64> =
            bounds.windows(2).map(|w| self.total * self.probs[w[0]..w[1]].iter().sum::<f64>()).collect();
        let mut tail = vec![0.0; l + 1];
        for k in (0..l).rev() {
            tail[k] = tail[k + 1] + rates[k];
        }
        let alpha_hat: Vec<f64> = bounds[..l].iter().map(|&b| self.alphas[b]).collect();
        let m1 = min_servers_for_delay(&self.mo, rates[0], self.t);
        let mut min_servers = vec![m1];
        min_servers.extend(rates[1..].iter().map(|&r| min_stable(&self.mo, r)));
        let mut min_after = vec![0; l + 1];
        for k in (1..l).rev() {
            min_after[k] = min_after[k + 1] + min_servers[k];
        }
        if m1 + min_after[1] > self.m {
            return None;
        }
        let full_value = self.s * self.p * rates.iter().sum::<f64>();
        Some(Tuple { interior, rates, tail, alpha_hat, min_servers, min_after, m1, full_value })
    }

    /// Smallest price reduction the SLAs `from..L` can still incur given the
    /// previous delay and the servers left for them.
    fn lower_cost(&self, tp: &Tuple, from: usize, prev: f64, avail: usize) -> f64 {
        let mut lower = prev;
        let mut cost = 0.0;
        for k in from..tp.rates.len() {
            let most = avail - (tp.min_after[from] - tp.min_servers[k]);
            let phi = lower.max(self.wait(tp.rates[k], most));
            cost += tp.tail[k] * self.drop(tp.alpha_hat[k], lower, phi);
            lower = phi;
        }
        cost
    }

    /// Best partition for a cut tuple, if any reaches `incumbent`.
    fn search_tuple(&self, interior: &[usize], incumbent: f64, count: &mut u64) -> Option<Candidate> {
        *count += 1;
        let tp = self.tuple(interior)?;
        if tp.rates.len() == 1 {
            return Some(Candidate { value: tp.full_value, key: vec![self.m] });
        }
        let avail = self.m - tp.m1;
        if prunable(tp.full_value - self.s * self.lower_cost(&tp, 1, self.t, avail), incumbent) {
            return None;
        }
        let mut state = Search { incumbent, best: None, parts: Vec::with_capacity(tp.rates.len()) };
        self.descend(&tp, 1, self.t, 0, 0.0, &mut state, count);
        state.best
    }

    #[allow(clippy::too_many_arguments)]
    fn descend(&self, tp: &Tuple, k: usize, prev: f64, used: usize, cost: f64, st: &mut Search, count: &mut u64) {
        *count += 1;
        let avail = self.m - tp.m1 - used;
        let rate = tp.rates[k];
        let above = |mk: usize| self.wait(rate, mk) - prev > DELAY_TOL;
        let lo = tp.min_servers[k];
        let l = tp.rates.len();
        if k + 1 == l {
            if lo > avail || !above(lo) {
                return;
            }
            // Largest count that keeps this SLA strictly slower than the previous one.
            let mk = if above(avail) {
                avail
            } else {
                let (mut good, mut bad) = (lo, avail);
                while bad - good > 1 {
                    let mid = good + (bad - good) / 2;
                    if above(mid) {
                        good = mid;
                    } else {
                        bad = mid;
                    }
                }
                good
            };
            let tk = self.wait(rate, mk);
            let value = tp.full_value - self.s * (cost + tp.tail[k] * self.drop(tp.alpha_hat[k], prev, tk));
            if value < st.incumbent {
                return;
            }
            let mut key = Vec::with_capacity(2 * l - 1);
            key.push(self.m - used - mk);
            key.extend_from_slice(&st.parts);
            key.push(mk);
            key.extend(tp.interior.iter().map(|b| b + 1));
            let cand = Candidate { value, key };
            if st.best.as_ref().is_none_or(|b| cand.beats(b)) {
                st.incumbent = st.incumbent.max(value);
                st.best = Some(cand);
            }
            return;
        }
        let hi = avail - tp.min_after[k + 1];
        for mk in lo..=hi {
            let tk = self.wait(rate, mk);
            if !(tk - prev > DELAY_TOL) {
                if tk.is_finite() {
                    break;
                }
                continue;
            }
            let c = cost + tp.tail[k] * self.drop(tp.alpha_hat[k], prev, tk);
            let bound = tp.full_value - self.s * (c + self.lower_cost(tp, k + 1, tk, avail - mk));
            if prunable(bound, st.incumbent) {
                continue;
            }
            st.parts.push(mk);
            self.descend(tp, k + 1, tk, used + mk, c, st, count);
            st.parts.pop();
        }
    }

    /// Branch-and-bound over every cut tuple, parallel over the first cut.
    /// Returns the best candidate strictly needed to beat or tie `seed`,
    /// whether the search ran to completion, and the search nodes visited.
    ///
    /// A node budget is split evenly over the first-cut chunks so that where
    /// the search stops does not depend on scheduling.
    fn exact(&self, seed: Option<Candidate>, opts: &SearchOptions) -> (Option<Candidate>, bool, u64) {
        let start = Instant::now();
        let evaluated = AtomicU64::new(0);
        let stop = AtomicBool::new(false);
        let floor = seed.as_ref().map_or(f64::NEG_INFINITY, |c| c.value);
        let k = self.l - 1;
        let firsts: Vec<usize> = if k == 0 { vec![1] } else { (1..=self.n - k).collect() };
        let chunk_budget = opts.max_candidates.map(|b| (b / firsts.len() as u64).max(1));
        let best = firsts
            .into_par_iter()
            .map(|first| {
                let mut best: Option<Candidate> = None;
                let mut incumbent = floor;
                let mut count = 0u64;
                let mut halted = false;
                for_each_interior(self.n, k, first, |interior| {
                    if halted || stop.load(Ordering::Relaxed) {
                        return;
                    }
                    if chunk_budget.is_some_and(|b| count >= b) || opts.time_limit.is_some_and(|d| start.elapsed() > d)
                    {
                        halted = true;
                        stop.store(true, Ordering::Relaxed);
                        return;
                    }
                    if let Some(c) = self.search_tuple(interior, incumbent, &mut count) {
                        incumbent = incumbent.max(c.value);
                        best = pick(best.take(), Some(c));
                    }
                });
                evaluated.fetch_add(count, Ordering::Relaxed);
                best
            })
            .reduce(|| None, pick);
        let complete = !stop.load(Ordering::Relaxed);
        (best, complete, evaluated.load(Ordering::Relaxed))
    }

    /// Deterministic local search over cut tuples: grow the `L - 1` solution
    /// by one cut, then move single cuts by up to three positions while that
    /// improves revenue.
    fn local_search(&self) -> Option<Candidate> {
        let mut count = 0u64;
        let mut best: Option<(Vec<usize>, Candidate)> = None;
        if self.l == 1 {
            self.consider_into(Vec::new(), &mut best, &mut count);
            return best.map(|(_, c)| c);
        }
        for cut in 1..self.n {
            self.consider_into(vec![cut], &mut best, &mut count);
        }
        for level in 3..=self.l {
            let base = match &best {
                Some((b, _)) => b.clone(),
                None => evenly_spaced(self.n, level - 2),
            };
            let mut next: Option<(Vec<usize>, Candidate)> = None;
            for cut in 1..self.n {
                if base.contains(&cut) {
                    continue;
                }
                let mut interior = base.clone();
                interior.push(cut);
                interior.sort_unstable();
                self.consider_into(interior, &mut next, &mut count);
            }
            if next.is_none() {
                self.consider_into(evenly_spaced(self.n, level - 1), &mut next, &mut count);
            }
            self.climb(&mut next, &mut count);
            best = next;
        }
        best.map(|(_, c)| c)
    }

    fn consider_into(&self, interior: Vec<usize>, best: &mut Option<(Vec<usize>, Candidate)>, count: &mut u64) {
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1.value);
        if let Some(c) = self.search_tuple(&interior, floor, count) {
            if best.as_ref().is_none_or(|b| c.beats(&b.1)) {
                *best = Some((interior, c));
            }
        }
    }

    fn climb(&self, best: &mut Option<(Vec<usize>, Candidate)>, count: &mut u64) {
        const MAX_ROUNDS: usize = 200;
        for _ in 0..MAX_ROUNDS {
            let Some((centre, _)) = best.clone() else { return };
            for i in 0..centre.len() {
                for d in [-3i64, -2, -1, 1, 2, 3] {
                    let moved = centre[i] as i64 + d;
                    if moved < 1 || moved > self.n as i64 - 1 {
                        continue;
                    }
                    let mut interior = centre.clone();
                    interior[i] = moved as usize;
                    if interior.windows(2).any(|w| w[1] <= w[0]) {
                        continue;
                    }
                    self.consider_into(interior, best, count);
                }
            }
            if best.as_ref().is_some_and(|b| b.0 == centre) {
                return;
            }
        }
    }
}

struct Search {
    incumbent: f64,
    best: Option<Candidate>,
    parts: Vec<usize>,
}

fn evenly_spaced(n: usize, k: usize) -> Vec<usize> {
    (1..=k).map(|i| (i * n / (k + 1)).clamp(i, n - 1 - (k - i))).collect()
}
