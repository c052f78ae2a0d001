//! Discrete-event simulation of the serving architectures.
//!
//! Jobs arrive as one Poisson stream and pick their SLA class with
//! probability `Lambda_l / Lambda`. Each server is a single non-preemptive
//! queue; a dispatcher sends every job to one server of its class's group,
//! uniformly at random or in cyclic order. Priority groups serve the lowest
//! waiting class index first and FCFS within a class.
//!
//! Replication `r` draws from stream `r` of a ChaCha8 generator keyed by the
//! master seed, so results are reproducible and independent of how many
//! replications run in parallel.

mod engine;
mod stats;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{Architecture, ArchitectureConfig};
use crate::queueing::{DelayVector, ServiceDist};

pub use engine::{TraceRecord, QUEUE_GUARD};

/// Default relative tolerance of [`validate_formulas`].
pub const DEFAULT_TOLERANCE: f64 = 0.03;

/// Smallest warmup used when none is configured.
pub const MIN_WARMUP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispatch {
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    /// Arrivals discarded before measuring; `None` picks [`default_warmup`].
    #[serde(default)]
    pub warmup_jobs: Option<u64>,
    pub measured_jobs: u64,
    pub replications: usize,
    pub dispatch: Dispatch,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 1, warmup_jobs: None, measured_jobs: 1_000_000, replications: 10, dispatch: Dispatch::Random }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.measured_jobs == 0 {
            return Err(Error::Simulation("measured_jobs must be positive".into()));
        }
        if self.replications == 0 {
            return Err(Error::Simulation("replications must be positive".into()));
        }
        Ok(())
    }
}

/// Per-class results, averaged over replications with 95% half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// 1-based SLA class.
    pub class: usize,
    pub mean_wait: f64,
    pub wait_ci: f64,
    /// Arrivals per unit time inside the measurement window.
    pub arrival_rate: f64,
    /// Completions per unit time inside the measurement window.
    pub throughput: f64,
    /// Time-average number of waiting jobs of this class over all servers.
    pub mean_queue: f64,
    pub queue_ci: f64,
    /// Mean of `arrival_rate * mean_wait - mean_queue` per replication.
    pub little_gap: f64,
    pub little_ci: f64,
    pub jobs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub classes: Vec<ClassReport>,
    /// Busy fraction per server, averaged over replications.
    pub utilization: Vec<f64>,
    pub mean_utilization: f64,
    pub utilization_ci: f64,
    /// Offered load per server, `sum Lambda_l * s / servers`.
    pub offered_load: f64,
    pub jobs_simulated: u64,
    pub replications: usize,
    pub warmup_jobs: u64,
}

/// Server groups implied by an architecture, plus the group of every class.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub groups: Vec<Group>,
    pub class_group: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub servers: usize,
    pub priority: bool,
    /// Contiguous, ascending 0-based classes served.
    pub classes: Vec<usize>,
}

impl Layout {
    fn new(arch: &Architecture, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Simulation("need at least one class".into()));
        }
        let all: Vec<usize> = (0..classes).collect();
        let groups = match arch {
            Architecture::OnDemand { servers } => vec![Group { servers: *servers, priority: false, classes: all }],
            Architecture::Pbs { servers } => vec![Group { servers: *servers, priority: true, classes: all }],
            Architecture::Sms { partition } => {
                if partition.len() != classes {
                    return Err(Error::Simulation(format!("{} modules for {classes} classes", partition.len())));
                }
                partition
                    .iter()
                    .enumerate()
                    .map(|(c, &k)| Group { servers: k, priority: false, classes: vec![c] })
                    .collect()
            }
            Architecture::Hybrid { first, second } => {
                if classes < 2 {
                    return Err(Error::Simulation("the hybrid architecture needs at least two classes".into()));
                }
                vec![
                    Group { servers: *first, priority: false, classes: vec![0] },
                    Group { servers: *second, priority: true, classes: (1..classes).collect() },
                ]
            }
        };
        if groups.iter().any(|g| g.servers == 0) {
            return Err(Error::Simulation("every server group needs at least one server".into()));
        }
        let mut class_group = vec![0; classes];
        for (g, group) in groups.iter().enumerate() {
            for &c in &group.classes {
                class_group[c] = g;
            }
        }
        Ok(Layout { groups, class_group })
    }

    fn servers(&self) -> usize {
        self.groups.iter().map(|g| g.servers).sum()
    }

    /// Per-server class rates of every group.
    fn group_rates(&self, rates: &[f64]) -> Vec<Vec<f64>> {
        self.groups.iter().map(|g| g.classes.iter().map(|&c| rates[c] / g.servers as f64).collect()).collect()
    }
}

fn check_rates(rates: &[f64]) -> Result<()> {
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || !(rates.iter().sum::<f64>() > 0.0) {
        return Err(Error::Simulation(format!("class rates must be non-negative with a positive sum (got {rates:?})")));
    }
    Ok(())
}

/// Analytic waiting time of every class under the architecture.
pub fn predict_delays(arch: &Architecture, class_rates: &[f64], dist: &ServiceDist) -> Result<DelayVector> {
    check_rates(class_rates)?;
    let layout = Layout::new(arch, class_rates.len())?;
    let mo = dist.moments();
    let mut out = vec![0.0; class_rates.len()];
    for (group, per_server) in layout.groups.iter().zip(layout.group_rates(class_rates)) {
        if group.priority {
            let mut d = Vec::new();
            if !mo.priority(&per_server, &mut d) {
                return Err(Error::Unstable { load: per_server.iter().sum::<f64>() * mo.mean });
            }
            for (&c, t) in group.classes.iter().zip(d) {
                out[c] = t;
            }
        } else {
            let lambda: f64 = per_server.iter().sum();
            let t = mo.fcfs(lambda).ok_or(Error::Unstable { load: lambda * mo.mean })?;
            for &c in &group.classes {
                out[c] = t;
            }
        }
    }
    Ok(DelayVector(out))
}

/// Warmup of [`MIN_WARMUP`] arrivals or ten relaxation times of the most
/// loaded queue, whichever is longer.
pub fn default_warmup(arch: &Architecture, class_rates: &[f64], dist: &ServiceDist) -> Result<u64> {
    check_rates(class_rates)?;
    let layout = Layout::new(arch, class_rates.len())?;
    let mo = dist.moments();
    let rho = layout.group_rates(class_rates).iter().map(|r| r.iter().sum::<f64>() * mo.mean).fold(0.0, f64::max);
    if !(rho < 1.0) {
        return Err(Error::Unstable { load: rho });
    }
    let scv = dist.second_moment() / (mo.mean * mo.mean) - 1.0;
    let relax = mo.mean * (1.0 + scv) / (2.0 * (1.0 - rho.sqrt()).powi(2));
    let total: f64 = class_rates.iter().sum();
    Ok(MIN_WARMUP.max((10.0 * relax * total).ceil() as u64))
}

pub fn simulate(arch: &ArchitectureConfig, class_rates: &[f64], cfg: &SimConfig) -> Result<SimReport> {
    run(arch, class_rates, cfg, false).map(|(r, _)| r)
}

/// Like [`simulate`], also returning the per-job trace of replication 0 in
/// service-start order.
pub fn simulate_traced(
    arch: &ArchitectureConfig,
    class_rates: &[f64],
    cfg: &SimConfig,
) -> Result<(SimReport, Vec<TraceRecord>)> {
    run(arch, class_rates, cfg, true)
}

fn run(
    arch: &ArchitectureConfig,
    class_rates: &[f64],
    cfg: &SimConfig,
    traced: bool,
) -> Result<(SimReport, Vec<TraceRecord>)> {
    cfg.validate()?;
    arch.dist.validate()?;
    check_rates(class_rates)?;
    let layout = Layout::new(&arch.arch, class_rates.len())?;
    // Rejects unstable queues before any event is simulated.
    predict_delays(&arch.arch, class_rates, &arch.dist)?;
    let warmup = match cfg.warmup_jobs {
        Some(w) => w,
        None => default_warmup(&arch.arch, class_rates, &arch.dist)?,
    };
    let reps: Vec<(engine::RepStats, Vec<TraceRecord>)> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let rep = engine::Replication {
                layout: &layout,
                rates: class_rates,
                dist: &arch.dist,
                dispatch: cfg.dispatch,
                warmup,
                measured: cfg.measured_jobs,
                rng,
            };
            let mut trace = Vec::new();
            let want = traced && r == 0;
            let stats = rep.run(want.then_some(&mut trace))?;
            Ok((stats, trace))
        })
        .collect::<Result<_>>()?;

    let classes = class_rates.len();
    let servers = layout.servers();
    let mut class_reports = Vec::with_capacity(classes);
    for c in 0..classes {
        let waits: Vec<f64> = reps
            .iter()
            .map(|(s, _)| if s.measured[c] > 0 { s.wait_sum[c] / s.measured[c] as f64 } else { 0.0 })
            .collect();
        let queues: Vec<f64> = reps.iter().map(|(s, _)| s.queue_area[c] / s.window).collect();
        let arrivals: Vec<f64> = reps.iter().map(|(s, _)| s.measured[c] as f64 / s.window).collect();
        let through: Vec<f64> = reps.iter().map(|(s, _)| s.departures[c] as f64 / s.window).collect();
        let gaps: Vec<f64> = (0..reps.len()).map(|r| arrivals[r] * waits[r] - queues[r]).collect();
        let (mean_wait, wait_ci) = stats::mean_ci(&waits);
        let (mean_queue, queue_ci) = stats::mean_ci(&queues);
        let (little_gap, little_ci) = stats::mean_ci(&gaps);
        class_reports.push(ClassReport {
            class: c + 1,
            mean_wait,
            wait_ci,
            arrival_rate: stats::mean_ci(&arrivals).0,
            throughput: stats::mean_ci(&through).0,
            mean_queue,
            queue_ci,
            little_gap,
            little_ci,
            jobs: reps.iter().map(|(s, _)| s.measured[c]).sum(),
        });
    }
    let utilization: Vec<f64> =
        (0..servers).map(|i| reps.iter().map(|(s, _)| s.busy[i] / s.window).sum::<f64>() / reps.len() as f64).collect();
    let per_rep_util: Vec<f64> =
        reps.iter().map(|(s, _)| s.busy.iter().sum::<f64>() / (s.window * servers as f64)).collect();
    let (mean_utilization, utilization_ci) = stats::mean_ci(&per_rep_util);
    let report = SimReport {
        classes: class_reports,
        utilization,
        mean_utilization,
        utilization_ci,
        offered_load: class_rates.iter().sum::<f64>() * arch.dist.mean() / servers as f64,
        jobs_simulated: (warmup + cfg.measured_jobs) * cfg.replications as u64,
        replications: cfg.replications,
        warmup_jobs: warmup,
    };
    let trace = reps.into_iter().next().map(|(_, t)| t).unwrap_or_default();
    Ok((report, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub class: usize,
    pub predicted: f64,
    pub simulated: f64,
    pub ci: f64,
    pub relative_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub tolerance: f64,
    pub pass: bool,
    pub report: SimReport,
}

/// Simulates and compares every class's mean wait with `predicted`.
///
/// A class passes when its relative deviation is within `tolerance`. Classes
/// with zero predicted wait pass when the simulated wait is also zero.
pub fn validate_formulas(
    arch: &ArchitectureConfig,
    class_rates: &[f64],
    cfg: &SimConfig,
    predicted: &[f64],
    tolerance: f64,
) -> Result<ValidationReport> {
    if predicted.len() != class_rates.len() {
        return Err(Error::Simulation(format!("{} predictions for {} classes", predicted.len(), class_rates.len())));
    }
    let report = simulate(arch, class_rates, cfg)?;
    let rows: Vec<ValidationRow> = report
        .classes
        .iter()
        .zip(predicted)
        .map(|(c, &p)| {
            let dev = if p == 0.0 { c.mean_wait.abs() } else { (c.mean_wait - p).abs() / p };
            ValidationRow {
                class: c.class,
                predicted: p,
                simulated: c.mean_wait,
                ci: c.wait_ci,
                relative_deviation: dev,
                pass: dev <= tolerance,
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.pass);
    Ok(ValidationReport { rows, tolerance, pass, report })
}
