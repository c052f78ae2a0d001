//! Brute-force references for the optimizer tests.
//!
//! Everything here is written from the model definitions alone: full
//! enumeration of server splits and cut tuples, waiting times from the
//! textbook M/M/1 and non-preemptive priority formulas with exponential unit
//! service (`A = 1`), and prices from the indifference of every segment's
//! most sensitive type.

#![allow(dead_code)]

pub mod checks;
pub mod oracle_run;

use qosdiff::model::{CustomerType, TypePopulation, WtpModel};
use rand::Rng;

pub const TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct Instance {
    pub p: f64,
    pub t: f64,
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub probs: Vec<f64>,
    pub m: usize,
    pub loads: Vec<f64>,
}

impl Instance {
    pub fn model(&self) -> WtpModel {
        WtpModel::new(self.p, self.t, self.beta).unwrap()
    }

    pub fn population(&self, total_rate: f64) -> TypePopulation {
        let types = self.alphas.iter().map(|&a| CustomerType::new(a).unwrap()).collect();
        TypePopulation::new(types, self.probs.clone(), total_rate, 1.0).unwrap()
    }

    fn u(&self, alpha: f64, phi: f64) -> f64 {
        self.p * (1.0 - (alpha * (phi - self.t)).powf(self.beta))
    }

    /// Segment rates and most sensitive type for 0-based segment starts.
    fn segments(&self, total: f64, starts: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.alphas.len();
        let mut rates = Vec::new();
        let mut heads = Vec::new();
        for (i, &b) in starts.iter().enumerate() {
            let e = starts.get(i + 1).copied().unwrap_or(n);
            rates.push(total * self.probs[b..e].iter().sum::<f64>());
            heads.push(self.alphas[b]);
        }
        (rates, heads)
    }

    /// Revenue of a feasible delay vector, `None` when the ordering rules fail.
    fn revenue(&self, rates: &[f64], heads: &[f64], delays: &[f64]) -> Option<f64> {
        if delays.iter().any(|d| !d.is_finite()) || delays[0] > self.t + TOL {
            return None;
        }
        if delays.len() > 1 && !(delays[1] - self.t > TOL) {
            return None;
        }
        if (2..delays.len()).any(|l| !(delays[l] - delays[l - 1] > TOL)) {
            return None;
        }
        let mut price = self.p;
        let mut total = price * rates[0];
        let mut prev = self.t;
        for l in 1..delays.len() {
            price -= self.u(heads[l], prev) - self.u(heads[l], delays[l]);
            total += price * rates[l];
            prev = delays[l];
        }
        Some(total)
    }
}

fn fcfs(lambda: f64) -> f64 {
    if lambda < 1.0 - 1e-9 {
        lambda / (1.0 - lambda)
    } else {
        f64::INFINITY
    }
}

fn priority(lambdas: &[f64]) -> Vec<f64> {
    let total: f64 = lambdas.iter().sum();
    let mut above = 0.0;
    lambdas
        .iter()
        .map(|&x| {
            let before = above;
            above += x;
            if total < 1.0 - 1e-9 {
                total / ((1.0 - before) * (1.0 - above))
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Every strictly increasing `k`-tuple from `lo..hi`.
pub fn tuples(k: usize, lo: usize, hi: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in lo..hi {
        for mut rest in tuples(k - 1, first + 1, hi) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Every way to write `m` as `parts` positive integers.
pub fn compositions(m: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return if m >= 1 { vec![vec![m]] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 1..m {
        for mut rest in compositions(m - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// An enumerated candidate: revenue and its tie-break key.
#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub value: f64,
    pub key: Vec<usize>,
}

/// All feasible candidates, best first (higher value, then smaller key).
fn ranked(mut all: Vec<Best>) -> Vec<Best> {
    all.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.key.cmp(&b.key)));
    all
}

fn starts_of(cuts: &[usize]) -> Vec<usize> {
    let mut s = vec![0];
    s.extend_from_slice(cuts);
    s
}

/// SMS at total rate `total`; key is partition then 1-based cuts.
pub fn sms(inst: &Instance, l: usize, total: f64) -> Vec<Best> {
    let n = inst.alphas.len();
    let mut all = Vec::new();
    for cuts in tuples(l - 1, 1, n) {
        let (rates, heads) = inst.segments(total, &starts_of(&cuts));
        for part in compositions(inst.m, l) {
            let delays: Vec<f64> = rates.iter().zip(&part).map(|(r, &k)| fcfs(r / k as f64)).collect();
            if let Some(v) = inst.revenue(&rates, &heads, &delays) {
                let mut key = part.clone();
                key.extend(cuts.iter().map(|c| c + 1));
                all.push(Best { value: v, key });
            }
        }
    }
    ranked(all)
}

/// PBS over the load grid; key is load index then 1-based cuts.
pub fn pbs(inst: &Instance, l: usize) -> Vec<Best> {
    let n = inst.alphas.len();
    let mut all = Vec::new();
    for (li, &load) in inst.loads.iter().enumerate() {
        let total = load * inst.m as f64;
        for cuts in tuples(l - 1, 1, n) {
            let (rates, heads) = inst.segments(total, &starts_of(&cuts));
            let per: Vec<f64> = rates.iter().map(|r| r / inst.m as f64).collect();
            if let Some(v) = inst.revenue(&rates, &heads, &priority(&per)) {
                let mut key = vec![li];
                key.extend(cuts.iter().map(|c| c + 1));
                all.push(Best { value: v, key });
            }
        }
    }
    ranked(all)
}

/// Hybrid over the load grid and every first-pool size; key is load index,
/// pool sizes, then 1-based cuts.
pub fn hybrid(inst: &Instance, l: usize) -> Vec<Best> {
    let n = inst.alphas.len();
    let mut all = Vec::new();
    for (li, &load) in inst.loads.iter().enumerate() {
        let total = load * inst.m as f64;
        for cuts in tuples(l - 1, 1, n) {
            let (rates, heads) = inst.segments(total, &starts_of(&cuts));
            for first in 1..inst.m {
                let second = inst.m - first;
                let mut delays = vec![fcfs(rates[0] / first as f64)];
                let shared: Vec<f64> = rates[1..].iter().map(|r| r / second as f64).collect();
                delays.extend(priority(&shared));
                if let Some(v) = inst.revenue(&rates, &heads, &delays) {
                    let mut key = vec![li, first, second];
                    key.extend(cuts.iter().map(|c| c + 1));
                    all.push(Best { value: v, key });
                }
            }
        }
    }
    ranked(all)
}

/// Whether `(value, key)` is an optimum of `ranked`: the value matches the
/// best to within rounding and the key is the best key, or the best is tied
/// with this key's own enumerated value.
pub fn agrees(ranked: &[Best], value: f64, key: &[usize]) -> Result<(), String> {
    let Some(top) = ranked.first() else {
        return Err(format!("oracle finds nothing feasible but the optimizer returned {value} at {key:?}"));
    };
    let scale = 1e-9 * (1.0 + top.value.abs());
    if (value - top.value).abs() > scale {
        return Err(format!("optimizer {value} at {key:?}, oracle {} at {:?}", top.value, top.key));
    }
    if top.key == key {
        return Ok(());
    }
    match ranked.iter().find(|b| b.key == key) {
        Some(mine) if (mine.value - top.value).abs() <= scale => Ok(()),
        _ => Err(format!("optimizer key {key:?} differs from oracle key {:?} without a tie", top.key)),
    }
}

/// Random tiny instance: `n` types, `m` servers, loads from `load_range`.
pub fn random_instance<R: Rng>(rng: &mut R, n: usize, m: usize, load_range: (f64, f64), loads: usize) -> Instance {
    let t = rng.random_range(0.03..0.08);
    let beta = [2.0, 3.0, 4.0][rng.random_range(0..3)];
    let mut offsets: Vec<f64> = (0..n).map(|_| rng.random_range(0.005..1.5)).collect();
    offsets.sort_by(f64::total_cmp);
    for i in 1..n {
        if offsets[i] <= offsets[i - 1] * (1.0 + 1e-6) {
            offsets[i] = offsets[i - 1] * 1.01;
        }
    }
    let alphas: Vec<f64> = offsets.iter().map(|o| 1.0 / o).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / sum).collect();
    let rest: f64 = probs[..n - 1].iter().sum();
    probs[n - 1] = 1.0 - rest;
    let loads = (0..loads).map(|_| rng.random_range(load_range.0..load_range.1)).collect();
    Instance { p: 1.0, t, beta, alphas, probs, m, loads }
}
