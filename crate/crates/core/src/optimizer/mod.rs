//! Revenue-maximizing menus for the three serving architectures.
//!
//! Every search enumerates market segmentations as cut tuples over the
//! ordered type list and, for SMS, server partitions. For a fixed candidate
//! the SLA delays are pinned to the actual waiting times and prices follow
//! from [`optimal_prices`](crate::mechanism::optimal_prices). Reductions keep
//! the highest revenue and break exact ties toward the lexicographically
//! smallest key, so results do not depend on the number of worker threads.

mod bounds;
mod hybrid;
mod pbs;
mod sms;
mod sweep;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{arrival_rates, prices_unchecked, Segmentation, SlaMenu};
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::{DelayVector, Moments, ServiceDist};

pub use bounds::{hyper_bound_sweep, pbs_upper_bound, sms_lower_bound, sms_lower_bound_beta3, BoundRow};
pub use hybrid::{evaluate_hybrid, optimize_hybrid};
pub use pbs::{evaluate_pbs, optimize_pbs};
pub use sms::{evaluate_sms, optimize_sms, optimize_sms_with};
pub use sweep::{best_row, default_load_grid, sweep_load, SweepRow};

/// Absolute slack used in every delay comparison of the feasibility test.
pub const DELAY_TOL: f64 = 1e-12;

/// Server arrangement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    /// Everyone gets on-demand service from one FCFS pool.
    #[serde(rename = "od")]
    OnDemand { servers: usize },
    /// One FCFS module per SLA.
    Sms { partition: Vec<usize> },
    /// One shared pool with SLA index as non-preemptive priority.
    Pbs { servers: usize },
    /// FCFS pool for SLA 1 and a shared priority pool for SLAs `2..L`.
    Hybrid { first: usize, second: usize },
}

impl Architecture {
    pub fn servers(&self) -> usize {
        match self {
            Architecture::OnDemand { servers } | Architecture::Pbs { servers } => *servers,
            Architecture::Sms { partition } => partition.iter().sum(),
            Architecture::Hybrid { first, second } => first + second,
        }
    }

    pub fn kind(&self) -> ArchKind {
        match self {
            Architecture::OnDemand { .. } => ArchKind::Od,
            Architecture::Sms { .. } => ArchKind::Sms,
            Architecture::Pbs { .. } => ArchKind::Pbs,
            Architecture::Hybrid { .. } => ArchKind::Hybrid,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Architecture::OnDemand { servers } | Architecture::Pbs { servers } => *servers > 0,
            Architecture::Sms { partition } => !partition.is_empty() && partition.iter().all(|&k| k > 0),
            Architecture::Hybrid { first, second } => *first > 0 && *second > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("server counts must be positive: {self:?}")))
        }
    }
}

/// Architecture family without server counts, as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchKind {
    Od,
    Sms,
    Pbs,
    Hybrid,
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArchKind::Od => "od",
            ArchKind::Sms => "sms",
            ArchKind::Pbs => "pbs",
            ArchKind::Hybrid => "hybrid",
        })
    }
}

impl FromStr for ArchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "od" => Ok(ArchKind::Od),
            "sms" => Ok(ArchKind::Sms),
            "pbs" => Ok(ArchKind::Pbs),
            "hybrid" => Ok(ArchKind::Hybrid),
            other => Err(Error::InvalidParameter(format!("unknown architecture {other:?} (od|sms|pbs|hybrid)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureConfig {
    #[serde(flatten)]
    pub arch: Architecture,
    pub dist: ServiceDist,
}

impl ArchitectureConfig {
    pub fn new(arch: Architecture, dist: ServiceDist) -> Result<Self> {
        arch.validate()?;
        dist.validate()?;
        Ok(ArchitectureConfig { arch, dist })
    }
}

/// An evaluated, feasible menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub menu: SlaMenu,
    pub segmentation: Segmentation,
    pub architecture: ArchitectureConfig,
    /// Per-SLA arrival rates.
    pub rates: Vec<f64>,
    /// Actual expected waiting times; `delays[0] <= T` while the menu quotes `T`.
    pub delays: DelayVector,
    /// Per-server load `Lambda / m`.
    pub load: f64,
    pub revenue: f64,
    /// Revenue over the on-demand revenue of the same servers.
    pub gamma: f64,
    /// Set when the result comes from the local search without an optimality proof.
    pub best_effort: bool,
}

/// Why a candidate configuration was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    Unstable { sla: usize, load: f64 },
    OnDemandTooSlow { t1: f64 },
    NotSlowerThanOnDemand { t2: f64 },
    DelaysNotIncreasing { sla: usize },
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasibility::Unstable { sla, load } => write!(f, "SLA {sla} queue unstable at per-server load {load}"),
            Infeasibility::OnDemandTooSlow { t1 } => write!(f, "on-demand wait {t1} exceeds T"),
            Infeasibility::NotSlowerThanOnDemand { t2 } => write!(f, "SLA 2 wait {t2} is not above T"),
            Infeasibility::DelaysNotIncreasing { sla } => write!(f, "SLA {sla} wait does not exceed SLA {}", sla - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Feasible(Box<OptResult>),
    Infeasible(Infeasibility),
}

impl Evaluation {
    pub fn feasible(&self) -> Option<&OptResult> {
        match self {
            Evaluation::Feasible(r) => Some(r),
            Evaluation::Infeasible(_) => None,
        }
    }

    pub fn into_feasible(self) -> Option<OptResult> {
        match self {
            Evaluation::Feasible(r) => Some(*r),
            Evaluation::Infeasible(_) => None,
        }
    }
}

/// Limits for the SMS search. Without limits the search is exact and may
/// take arbitrarily long for large `L`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchOptions {
    /// Maximum number of search nodes (cut tuples and partial partitions) the
    /// exact phase may visit.
    pub max_candidates: Option<u64>,
    pub time_limit: Option<Duration>,
    /// Return the local-search incumbent, flagged, instead of failing when a
    /// limit is hit.
    pub best_effort: bool,
}

impl SearchOptions {
    pub fn exact() -> Self {
        SearchOptions::default()
    }

    pub fn best_effort(max_candidates: u64) -> Self {
        SearchOptions { max_candidates: Some(max_candidates), time_limit: None, best_effort: true }
    }
}

/// On-demand revenue of `m` servers: every server runs at the load whose
/// FCFS wait is exactly `T`.
pub fn od_revenue(m: usize, model: &WtpModel, dist: &ServiceDist) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one server".into()));
    }
    let mo = dist.moments();
    let t = model.on_demand_delay();
    Ok(m as f64 * model.price() * mo.mean * t / (mo.residual + t * mo.mean))
}

/// Evaluates pure on-demand service of the population on `m` servers.
pub fn evaluate_od(model: &WtpModel, population: &TypePopulation, m: usize, dist: &ServiceDist) -> Result<Evaluation> {
    check_dist(population, dist)?;
    let arch = ArchitectureConfig::new(Architecture::OnDemand { servers: m }, dist.clone())?;
    let mo = dist.moments();
    let rate = population.total_rate();
    let Some(t1) = mo.fcfs(rate / m as f64) else {
        return Ok(Evaluation::Infeasible(Infeasibility::Unstable { sla: 1, load: rate / m as f64 * mo.mean }));
    };
    if t1 > model.on_demand_delay() + DELAY_TOL {
        return Ok(Evaluation::Infeasible(Infeasibility::OnDemandTooSlow { t1 }));
    }
    let seg = Segmentation::single(population.len());
    Ok(Evaluation::Feasible(Box::new(assemble(model, population, seg, vec![t1], arch, false)?)))
}

pub(crate) fn check_dist(population: &TypePopulation, dist: &ServiceDist) -> Result<()> {
    dist.validate()?;
    if (dist.mean() - population.mean_service()).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "service distribution mean {} differs from the population mean service time {}",
            dist.mean(),
            population.mean_service()
        )));
    }
    Ok(())
}

pub(crate) fn check_shape(population: &TypePopulation, m: usize, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    if m < l {
        return Err(Error::Precondition(format!("need at least L = {l} servers (got {m})")));
    }
    if population.len() < l {
        return Err(Error::Precondition(format!("need at least L = {l} types (got {})", population.len())));
    }
    Ok(())
}

/// Applies the ordering rules `t_1 <= T < t_2 < .. < t_L`.
pub(crate) fn check_order(t: f64, delays: &[f64]) -> std::result::Result<(), Infeasibility> {
    if delays[0] > t + DELAY_TOL {
        return Err(Infeasibility::OnDemandTooSlow { t1: delays[0] });
    }
    if delays.len() > 1 && !(delays[1] - t > DELAY_TOL) {
        return Err(Infeasibility::NotSlowerThanOnDemand { t2: delays[1] });
    }
    for l in 2..delays.len() {
        if !(delays[l] - delays[l - 1] > DELAY_TOL) {
            return Err(Infeasibility::DelaysNotIncreasing { sla: l + 1 });
        }
    }
    Ok(())
}

/// Builds the result for a feasible candidate from its actual waiting times.
pub(crate) fn assemble(
    model: &WtpModel,
    population: &TypePopulation,
    seg: Segmentation,
    actual: Vec<f64>,
    architecture: ArchitectureConfig,
    best_effort: bool,
) -> Result<OptResult> {
    let rates = arrival_rates(population, &seg);
    let thresholds = seg.thresholds(population);
    let mut quoted = actual.clone();
    quoted[0] = model.on_demand_delay();
    let prices = prices_unchecked(model, &thresholds, &quoted);
    let s = population.mean_service();
    let revenue: f64 = prices.iter().zip(&rates).map(|(p, r)| p * r * s).sum();
    let m = architecture.arch.servers();
    let gamma = revenue / od_revenue(m, model, &architecture.dist)?;
    Ok(OptResult {
        menu: SlaMenu::from_parts(quoted, prices, thresholds),
        segmentation: seg,
        architecture,
        rates,
        delays: DelayVector(actual),
        load: population.total_rate() / m as f64,
        revenue,
        gamma,
        best_effort,
    })
}

/// Search candidate: objective value plus a tie-break key compared
/// lexicographically (smaller wins).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate {
    pub value: f64,
    pub key: Vec<usize>,
}

impl Candidate {
    pub fn beats(&self, other: &Candidate) -> bool {
        match self.value.partial_cmp(&other.value) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => self.key < other.key,
            _ => false,
        }
    }
}

pub(crate) fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.beats(&a) { b } else { a }),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Every interior bound tuple `1 <= b_1 < .. < b_{k} <= n - 1` with a fixed
/// first element, in lexicographic order.
pub(crate) fn for_each_interior(n: usize, k: usize, first: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 {
        f(&[]);
        return;
    }
    let mut cur: Vec<usize> = (0..k).map(|i| first + i).collect();
    if cur[k - 1] > n - 1 {
        return;
    }
    loop {
        f(&cur);
        // Advance the rightmost position that still has room.
        let mut i = k;
        loop {
            if i == 1 {
                return;
            }
            i -= 1;
            if cur[i] < n - 1 - (k - 1 - i) {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Smallest server count that keeps a queue with total rate `rate` stable.
pub(crate) fn min_stable(mo: &Moments, rate: f64) -> usize {
    let mut k = ((rate * mo.mean).floor() as usize).max(1);
    while !mo.stable(rate / k as f64) {
        k += 1;
    }
    while k > 1 && mo.stable(rate / (k - 1) as f64) {
        k -= 1;
    }
    k
}

/// Smallest stable server count whose FCFS wait is at most `target`.
pub(crate) fn min_servers_for_delay(mo: &Moments, rate: f64, target: f64) -> usize {
    let ok = |k: usize| mo.fcfs(rate / k as f64).is_some_and(|t| t <= target + DELAY_TOL);
    let guess = rate * (target * mo.mean + mo.residual) / target;
    let mut k = (guess.floor() as usize).max(min_stable(mo, rate));
    while !ok(k) {
        k += 1;
    }
    while k > 1 && ok(k - 1) {
        k -= 1;
    }
    k
}
