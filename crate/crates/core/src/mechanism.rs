//! SLA menus, market segmentation, optimal truthful prices and revenue.
//!
//! Types are indexed most delay-sensitive first, so SLA 1 (on-demand) serves
//! a prefix of the type list and SLA `L` a suffix. A segmentation is stored as
//! block boundaries over that list; the threshold type of SLA `l` is the most
//! sensitive type of its block.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TypePopulation, WtpModel};

/// Surplus differences at or below this are ties.
pub const TIE_TOL: f64 = 1e-12;

/// A menu of `L` (delay, price) pairs together with the thresholds
/// `alpha_hat_1 .. alpha_hat_{L+1}` that define its allocation rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaMenu {
    delays: Vec<f64>,
    prices: Vec<f64>,
    thresholds: Vec<f64>,
}

impl SlaMenu {
    /// Builds a menu, checking that delays start at `T` and strictly increase,
    /// prices start at `p` and strictly decrease, and thresholds decrease.
    pub fn new(model: &WtpModel, delays: Vec<f64>, prices: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        check_delays(model, &delays)?;
        check_thresholds(&thresholds, delays.len())?;
        if prices.len() != delays.len() {
            return Err(Error::Precondition(format!("{} delays but {} prices", delays.len(), prices.len())));
        }
        if (prices[0] - model.price()).abs() > TIE_TOL {
            return Err(Error::Precondition(format!(
                "first price must equal the on-demand price {} (got {})",
                model.price(),
                prices[0]
            )));
        }
        if let Some(i) = prices.windows(2).position(|w| !(w[1] < w[0])) {
            return Err(Error::Precondition(format!("prices must strictly decrease (SLA {} to {})", i + 1, i + 2)));
        }
        Ok(SlaMenu { delays, prices, thresholds })
    }

    /// Menu with the truthful revenue-maximizing prices for the given
    /// thresholds and delays.
    pub fn priced(model: &WtpModel, thresholds: Vec<f64>, delays: Vec<f64>) -> Result<Self> {
        let prices = optimal_prices(model, &thresholds, &delays)?;
        SlaMenu::new(model, delays, prices, thresholds)
    }

    /// The one-SLA (pure on-demand) menu.
    pub fn on_demand(model: &WtpModel, population: &TypePopulation) -> Self {
        SlaMenu {
            delays: vec![model.on_demand_delay()],
            prices: vec![model.price()],
            thresholds: vec![population.alpha_max(), population.alpha_min()],
        }
    }

    /// Assembles a menu without validation; the optimizer produces menus whose
    /// later prices can round to equal values.
    pub(crate) fn from_parts(delays: Vec<f64>, prices: Vec<f64>, thresholds: Vec<f64>) -> Self {
        SlaMenu { delays, prices, thresholds }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// SLA (1-based) that the menu's allocation rule gives to a customer
    /// reporting type `alpha`: the `l` with `alpha` in
    /// `(alpha_hat_{l+1}, alpha_hat_l]`, the last SLA also taking its lower end.
    pub fn allocate(&self, alpha: f64) -> usize {
        1 + self.thresholds[1..self.len()].iter().filter(|&&a| alpha <= a).count()
    }

    /// Copy with price `l` (1-based) shifted by `delta`. The result may break
    /// the price ordering; it exists to probe truthfulness.
    pub fn with_price_shift(&self, l: usize, delta: f64) -> Result<Self> {
        if l == 0 || l > self.len() {
            return Err(Error::Index { index: l, len: self.len() });
        }
        let mut out = self.clone();
        out.prices[l - 1] += delta;
        Ok(out)
    }
}

fn check_delays(model: &WtpModel, delays: &[f64]) -> Result<()> {
    if delays.is_empty() {
        return Err(Error::Precondition("a menu needs at least one SLA".into()));
    }
    if (delays[0] - model.on_demand_delay()).abs() > TIE_TOL {
        return Err(Error::Precondition(format!(
            "first SLA delay must equal T = {} (got {})",
            model.on_demand_delay(),
            delays[0]
        )));
    }
    if let Some(i) = delays.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(format!("delays must strictly increase (SLA {} to {})", i + 1, i + 2)));
    }
    Ok(())
}

fn check_thresholds(thresholds: &[f64], l: usize) -> Result<()> {
    if thresholds.len() != l + 1 {
        return Err(Error::Precondition(format!("{} SLAs need {} thresholds (got {})", l, l + 1, thresholds.len())));
    }
    if thresholds.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::Precondition("thresholds must be finite and positive".into()));
    }
    // The last block may hold a single type, so only the final step may tie.
    for (i, w) in thresholds.windows(2).enumerate() {
        let ok = if i + 2 == thresholds.len() { w[1] <= w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::Precondition(format!("thresholds must decrease (positions {} and {})", i + 1, i + 2)));
        }
    }
    Ok(())
}

/// Contiguous blocks of the ordered type list, one per SLA.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    /// `0 = b_0 < b_1 < .. < b_L = n`; SLA `l` holds types `b_{l-1} .. b_l`.
    bounds: Vec<usize>,
}

impl Segmentation {
    /// From the 1-based first type index of SLAs `2..L`.
    pub fn from_cuts(n: usize, cuts: &[usize]) -> Result<Self> {
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(0);
        bounds.extend(cuts.iter().map(|&c| c.wrapping_sub(1)));
        bounds.push(n);
        if cuts.iter().any(|&c| c < 2 || c > n) {
            return Err(Error::Precondition(format!("cut indices must lie in 2..={n} (got {cuts:?})")));
        }
        Segmentation::from_bounds(bounds)
    }

    pub fn from_bounds(bounds: Vec<usize>) -> Result<Self> {
        if bounds.len() < 2 || bounds[0] != 0 {
            return Err(Error::Precondition(format!("invalid block bounds {bounds:?}")));
        }
        if bounds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(format!("every SLA needs at least one type (bounds {bounds:?})")));
        }
        Ok(Segmentation { bounds })
    }

    /// Everything in one SLA.
    pub fn single(n: usize) -> Self {
        Segmentation { bounds: vec![0, n] }
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_types(&self) -> usize {
        self.bounds[self.bounds.len() - 1]
    }

    pub fn bounds(&self) -> &[usize] {
        &self.bounds
    }

    /// 1-based first type index of every SLA (`i_1 = 1, i_2, .., i_L`).
    pub fn starts(&self) -> Vec<usize> {
        self.bounds[..self.len()].iter().map(|b| b + 1).collect()
    }

    /// 1-based first type index of SLAs `2..L`.
    pub fn cuts(&self) -> Vec<usize> {
        self.bounds[1..self.len()].iter().map(|b| b + 1).collect()
    }

    /// 0-based type indices in SLA `l` (1-based).
    pub fn members(&self, l: usize) -> Range<usize> {
        self.bounds[l - 1]..self.bounds[l]
    }

    /// SLA (1-based) of the 0-based type index.
    pub fn sla_of(&self, type_idx: usize) -> usize {
        self.bounds[1..].partition_point(|&b| b <= type_idx) + 1
    }

    /// `alpha_hat_1 .. alpha_hat_{L+1}` over the population's types.
    pub fn thresholds(&self, population: &TypePopulation) -> Vec<f64> {
        let mut out: Vec<f64> = self.bounds[..self.len()].iter().map(|&b| population.alpha(b)).collect();
        out.push(population.alpha_min());
        out
    }
}

/// `u(alpha, phi_l) - p_l` for SLA `l` (1-based).
pub fn surplus(model: &WtpModel, alpha: f64, menu: &SlaMenu, l: usize) -> Result<f64> {
    if l == 0 || l > menu.len() {
        return Err(Error::Index { index: l, len: menu.len() });
    }
    Ok(model.wtp(alpha, menu.delays[l - 1])? - menu.prices[l - 1])
}

/// Surplus-maximizing SLA (1-based); ties go to the largest index.
pub fn assign_sla(model: &WtpModel, alpha: f64, menu: &SlaMenu) -> usize {
    let s: Vec<f64> = (0..menu.len()).map(|i| model.wtp_unchecked(alpha, menu.delays[i]) - menu.prices[i]).collect();
    let best = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    s.iter().rposition(|&v| v >= best - TIE_TOL).map_or(1, |i| i + 1)
}

/// Segmentation induced by surplus-maximizing assignment.
///
/// Fails with [`Error::Structure`] when the assigned SLAs are not contiguous,
/// non-decreasing blocks covering every SLA.
pub fn segment(model: &WtpModel, population: &TypePopulation, menu: &SlaMenu) -> Result<Segmentation> {
    let assigned: Vec<usize> = population.types().iter().map(|t| assign_sla(model, t.alpha, menu)).collect();
    if assigned[0] != 1 {
        return Err(Error::Structure(format!("most sensitive type is assigned SLA {}, not 1", assigned[0])));
    }
    let mut bounds = vec![0];
    for (i, w) in assigned.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::Structure(format!(
                "type {} gets SLA {} but less sensitive type {} gets SLA {}",
                i + 1,
                w[0],
                i + 2,
                w[1]
            )));
        }
        if w[1] > w[0] + 1 {
            return Err(Error::Structure(format!("no type is assigned SLA {}", w[0] + 1)));
        }
        if w[1] == w[0] + 1 {
            bounds.push(i + 1);
        }
    }
    let last = assigned[assigned.len() - 1];
    if last != menu.len() {
        return Err(Error::Structure(format!("no type is assigned SLA {}", last + 1)));
    }
    bounds.push(population.len());
    Segmentation::from_bounds(bounds)
}

/// Per-SLA arrival rates `Lambda_l = Lambda * sum of P(alpha)` over each block.
pub fn arrival_rates(population: &TypePopulation, seg: &Segmentation) -> Vec<f64> {
    let probs = population.probs();
    (1..=seg.len()).map(|l| population.total_rate() * probs[seg.members(l)].iter().sum::<f64>()).collect()
}

/// Largest prices keeping every threshold type indifferent between adjoining
/// SLAs: `p_1 = p`, `p_l = p_{l-1} - (u(a_l, phi_{l-1}) - u(a_l, phi_l))`.
pub fn optimal_prices(model: &WtpModel, thresholds: &[f64], delays: &[f64]) -> Result<Vec<f64>> {
    check_delays(model, delays)?;
    check_thresholds(thresholds, delays.len())?;
    Ok(prices_unchecked(model, thresholds, delays))
}

pub(crate) fn prices_unchecked(model: &WtpModel, thresholds: &[f64], delays: &[f64]) -> Vec<f64> {
    let mut prices = Vec::with_capacity(delays.len());
    prices.push(model.price());
    for l in 1..delays.len() {
        let a = thresholds[l];
        let drop = model.wtp_unchecked(a, delays[l - 1]) - model.wtp_unchecked(a, delays[l]);
        prices.push(prices[l - 1] - drop);
    }
    prices
}

/// Revenue per unit time, `sum_l p_l * Lambda_l * s`.
pub fn revenue(prices: &[f64], rates: &[f64], mean_service: f64) -> Result<f64> {
    if prices.len() != rates.len() {
        return Err(Error::Precondition(format!("{} prices but {} rates", prices.len(), rates.len())));
    }
    Ok(prices.iter().zip(rates).map(|(p, r)| p * r * mean_service).sum())
}

/// One profitable misreport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsicViolation {
    /// 1-based index of the customer's true type.
    pub true_type: usize,
    /// 1-based index of the type it reports instead.
    pub reported_type: usize,
    /// Surplus gained over truthful reporting.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsicReport {
    pub truthful: bool,
    pub worst_violation: f64,
    pub violations: Vec<DsicViolation>,
    pub pairs_checked: usize,
}

/// Exhaustive misreport scan over every (true type, reported type) pair.
///
/// The allocation rule is the menu's own thresholds; a customer of type `a`
/// reporting `a'` receives SLA `menu.allocate(a')` and compares that surplus
/// against the one from reporting `a`.
pub fn verify_dsic(model: &WtpModel, population: &TypePopulation, menu: &SlaMenu) -> DsicReport {
    let types = population.types();
    let outcome: Vec<usize> = types.iter().map(|t| menu.allocate(t.alpha)).collect();
    let per_type: Vec<Vec<DsicViolation>> = types
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let value = |l: usize| model.wtp_unchecked(t.alpha, menu.delays[l - 1]) - menu.prices[l - 1];
            let honest = value(outcome[i]);
            outcome
                .iter()
                .enumerate()
                .filter_map(|(j, &l)| {
                    let gain = value(l) - honest;
                    (gain > TIE_TOL).then_some(DsicViolation { true_type: i + 1, reported_type: j + 1, gain })
                })
                .collect()
        })
        .collect();
    let violations: Vec<DsicViolation> = per_type.into_iter().flatten().collect();
    let worst_violation = violations.iter().map(|v| v.gain).fold(0.0, f64::max);
    DsicReport {
        truthful: violations.is_empty(),
        worst_violation,
        violations,
        pairs_checked: types.len() * types.len(),
    }
}
