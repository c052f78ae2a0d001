//! Commands behind the `qosdiff` binary.
//!
//! Every command writes its tables as CSV into the scenario's output
//! directory plus a JSON summary `<command>.json` carrying the scenario hash,
//! `git describe` of the working tree and the wall time. Floats are written
//! in shortest round-trip form, so a CSV row can be compared bit for bit with
//! a recomputation from the same scenario.
//!
//! Trace files (`trace.csv`) have one row per job of replication 0 in
//! service-start order: `job,class,server,arrival,start`, with 1-based class,
//! 0-based server index across all server groups and times in service units.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mechanism::{verify_dsic, DsicReport};
use crate::model::TypePopulation;
use crate::optimizer::{
    best_row, evaluate_hybrid, evaluate_sms, hyper_bound_sweep, pbs_upper_bound, sms_lower_bound,
    sms_lower_bound_beta3, sweep_load, ArchKind, Architecture, ArchitectureConfig, OptResult, SearchOptions, SweepRow,
};
use crate::queueing::od_max_load;
use crate::scenario::{preset, Scenario, DEFAULT_BEST_EFFORT_BUDGET};
use crate::simulator::{predict_delays, simulate_traced, validate_formulas, TraceRecord, DEFAULT_TOLERANCE};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "QOSDIFF_THREADS";

/// Upward price shift used to probe truthfulness.
pub const PRICE_PROBE: f64 = 0.01;

/// Files written by one command.
#[derive(Debug, Clone, Default)]
pub struct Written {
    pub tables: Vec<PathBuf>,
    pub summary: PathBuf,
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn git_describe() -> String {
    Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

struct Run {
    command: String,
    out: PathBuf,
    started: Instant,
    tables: Vec<PathBuf>,
}

impl Run {
    fn new(command: &str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Run { command: command.into(), out: out.to_path_buf(), started: Instant::now(), tables: Vec::new() })
    }

    fn table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.out.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.tables.push(path.clone());
        Ok(path)
    }

    fn finish(self, hash: Option<String>, canonical: Option<&str>, payload: Value) -> Result<Written> {
        let summary = self.out.join(format!("{}.json", self.command));
        let doc = json!({
            "command": self.command,
            "provenance": {
                "scenario_hash": hash,
                "scenario": canonical,
                "git_describe": git_describe(),
                "wall_time_secs": self.started.elapsed().as_secs_f64(),
                "crate_version": env!("CARGO_PKG_VERSION"),
            },
            "tables": self.tables.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "result": payload,
        });
        fs::write(&summary, serde_json::to_string_pretty(&doc)?)?;
        Ok(Written { tables: self.tables, summary })
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn numbered(prefix: &str, from: usize, to: usize) -> Vec<String> {
    (from..=to).map(|l| format!("{prefix}_{l}")).collect()
}

fn servers_field(arch: &Architecture) -> String {
    match arch {
        Architecture::OnDemand { servers } | Architecture::Pbs { servers } => servers.to_string(),
        Architecture::Sms { partition } => partition.iter().map(usize::to_string).collect::<Vec<_>>().join(" "),
        Architecture::Hybrid { first, second } => format!("{first} {second}"),
    }
}

/// Zero-value delays of the first type of SLAs `2..L`.
fn cut_phi0(sc: &Scenario, r: &OptResult) -> Vec<f64> {
    r.menu.thresholds()[1..r.menu.len()].iter().map(|a| 1.0 / a + sc.model.on_demand_delay()).collect()
}

fn sweep_header(l: usize) -> Vec<String> {
    let mut h = header(&["lambda", "gamma", "revenue"]);
    h.extend(numbered("phi", 1, l));
    h.extend(numbered("p", 1, l));
    h.extend(numbered("cut_phi0", 2, l));
    h.extend(header(&["servers", "best_effort", "note"]));
    h
}

fn sweep_record(sc: &Scenario, l: usize, row: &SweepRow) -> Vec<String> {
    let mut rec = vec![fmt_f(row.load)];
    match &row.result {
        Some(r) => {
            rec.push(fmt_f(r.gamma));
            rec.push(fmt_f(r.revenue));
            rec.extend(r.delays.0.iter().map(|&x| fmt_f(x)));
            rec.extend(r.menu.prices().iter().map(|&x| fmt_f(x)));
            rec.extend(cut_phi0(sc, r).into_iter().map(fmt_f));
            rec.push(servers_field(&r.architecture.arch));
            rec.push(r.best_effort.to_string());
            rec.push(String::new());
        }
        None => {
            rec.extend(std::iter::repeat_n(String::new(), 2 + 3 * l - 1 + 2));
            rec.push(row.gap.clone().unwrap_or_default());
        }
    }
    rec
}

fn search_options(sc: &Scenario, l: usize) -> SearchOptions {
    let mut opts = sc.search.clone();
    if opts.best_effort && opts.max_candidates.is_none() && opts.time_limit.is_none() && l >= 4 {
        opts.max_candidates = Some(DEFAULT_BEST_EFFORT_BUDGET);
    }
    opts
}

/// Optimizes every grid load. With a single SLA the only sensible operating
/// point is the load at which on-demand service just keeps `T`, so the grid
/// is replaced by that load.
pub fn optimize_rows(sc: &Scenario, arch: ArchKind, l: usize) -> Result<Vec<SweepRow>> {
    let loads = if l == 1 {
        vec![od_max_load(sc.model.on_demand_delay(), &sc.dist)? * sc.dist.mean()]
    } else {
        sc.loads.clone()
    };
    let arch = if l == 1 { ArchKind::Od } else { arch };
    sweep_load(&sc.model, &sc.population, sc.m, l, arch, &sc.dist, &loads, &search_options(sc, l))
}

#[derive(Debug, Clone)]
pub struct OptimizeOutput {
    pub rows: Vec<SweepRow>,
    pub best: OptResult,
    pub written: Written,
}

/// Runs the scenario's optimizer over its load grid. Writes
/// `optimize.csv` (one row per load) and `optimize.json` with the best result.
pub fn cmd_optimize(sc: &Scenario) -> Result<OptimizeOutput> {
    let mut run = Run::new("optimize", &sc.out_dir)?;
    let rows = optimize_rows(sc, sc.arch, sc.l)?;
    let records: Vec<Vec<String>> = rows.iter().map(|r| sweep_record(sc, sc.l, r)).collect();
    run.table("optimize.csv", &sweep_header(sc.l), &records)?;
    let best = best_row(&rows).and_then(|r| r.result.clone()).ok_or_else(|| {
        Error::NoFeasibleCandidate(format!("no feasible {} menu with L = {} at any grid load", sc.arch, sc.l))
    })?;
    let gaps: Vec<Value> =
        rows.iter().filter(|r| r.result.is_none()).map(|r| json!({ "lambda": r.load, "reason": r.gap })).collect();
    let payload = json!({ "arch": sc.arch.to_string(), "L": sc.l, "m": sc.m, "best": best, "gaps": gaps });
    let written = run.finish(Some(sc.hash()), Some(&sc.canonical), payload)?;
    Ok(OptimizeOutput { rows, best, written })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsOutput {
    pub pbs_upper: f64,
    pub od_load: f64,
    /// `(phi0_hat, closed-form kappa)` pairs.
    pub kappa: Vec<(f64, f64)>,
    /// General two-SLA bound at the median type of the scenario population.
    pub sms_general: Option<f64>,
    pub hyper_min_kappa: f64,
    pub hyper_min_residual: f64,
    #[serde(skip)]
    pub written: Written,
}

/// Weight and first-branch means of the hyperexponential bound sweep.
pub const HYPER_WEIGHT: f64 = 0.75;

pub fn hyper_means() -> Vec<f64> {
    (0..16).map(|i| 0.2 + 0.05 * i as f64).collect()
}

/// Closed-form bounds for the scenario's service distribution plus the
/// hyperexponential sweep. Writes `bounds.csv` and `bounds_hyper.csv`.
pub fn cmd_bounds(sc: &Scenario) -> Result<BoundsOutput> {
    let mut run = Run::new("bounds", &sc.out_dir)?;
    let t = sc.model.on_demand_delay();
    let pbs_upper = pbs_upper_bound(t, &sc.dist)?;
    let od_load = od_max_load(t, &sc.dist)? * sc.dist.mean();
    let median = sc.population.len() / 2;
    let split = sc.population.alpha(median);
    let phi0_split = 1.0 / split + t;
    let mut kappa = vec![(0.5, sms_lower_bound_beta3(t, 0.5, &sc.dist)?)];
    if (phi0_split - 0.5).abs() > 1e-12 {
        kappa.push((phi0_split, sms_lower_bound_beta3(t, phi0_split, &sc.dist)?));
    }
    let sms_general = if sc.population.len() >= 3 {
        let pop = sc.population_at(0.1)?;
        Some(sms_lower_bound(&sc.model, &pop, split, (phi0_split + t) / 2.0, &sc.dist)?)
    } else {
        None
    };
    let mut rows = vec![
        vec!["lambda_od".into(), String::new(), fmt_f(od_load)],
        vec!["pbs_upper_bound".into(), String::new(), fmt_f(pbs_upper)],
    ];
    for (phi0, k) in &kappa {
        rows.push(vec!["kappa_closed_form".into(), fmt_f(*phi0), fmt_f(*k)]);
    }
    if let Some(g) = sms_general {
        rows.push(vec!["sms_lower_bound_general".into(), fmt_f(phi0_split), fmt_f(g)]);
    }
    run.table("bounds.csv", &header(&["quantity", "phi0_hat", "value"]), &rows)?;

    let sweep = hyper_bound_sweep(t, 0.5, HYPER_WEIGHT, &hyper_means())?;
    let hyper_rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            vec![
                fmt_f(r.weight1),
                fmt_f(r.mean1),
                fmt_f(r.mean2),
                fmt_f(r.residual),
                fmt_f(r.pbs_bound),
                fmt_f(r.kappa),
            ]
        })
        .collect();
    run.table("bounds_hyper.csv", &header(&["weight1", "mean1", "mean2", "A", "pbs_bound", "kappa"]), &hyper_rows)?;
    let hyper_min_kappa = sweep.iter().map(|r| r.kappa).fold(f64::INFINITY, f64::min);
    let hyper_min_residual = sweep.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let mut out = BoundsOutput {
        pbs_upper,
        od_load,
        kappa,
        sms_general,
        hyper_min_kappa,
        hyper_min_residual,
        written: Written::default(),
    };
    out.written = run.finish(Some(sc.hash()), Some(&sc.canonical), serde_json::to_value(&out)?)?;
    Ok(out)
}

/// The system `simulate` runs: the scenario's explicit one, else the
/// optimizer's menu at `simulation.load`, else at the best grid load.
pub fn simulation_target(sc: &Scenario) -> Result<(ArchitectureConfig, Vec<f64>, Option<OptResult>)> {
    if let Some(sys) = &sc.system {
        return Ok((ArchitectureConfig::new(sys.arch.clone(), sc.dist.clone())?, sys.rates.clone(), None));
    }
    let rows = match sc.sim_load {
        Some(load) => {
            let mut at = sc.clone();
            at.loads = vec![load];
            optimize_rows(&at, sc.arch, sc.l)?
        }
        None => optimize_rows(sc, sc.arch, sc.l)?,
    };
    let best = best_row(&rows)
        .and_then(|r| r.result.clone())
        .ok_or_else(|| Error::NoFeasibleCandidate("nothing feasible to simulate".into()))?;
    Ok((best.architecture.clone(), best.rates.clone(), Some(best)))
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub arch: ArchitectureConfig,
    pub rates: Vec<f64>,
    pub predicted: Vec<f64>,
    pub report: crate::simulator::SimReport,
    /// Set when `--validate` was requested.
    pub validation_pass: Option<bool>,
    pub written: Written,
}

/// Simulates the target system. Writes `simulate.csv` (per class),
/// `simulate_servers.csv` and optionally `trace.csv`. With `validate`, fails
/// with a simulation error when any class misses its prediction by more
/// than the default tolerance; the tables are written either way.
pub fn cmd_simulate(sc: &Scenario, validate: bool) -> Result<SimulateOutput> {
    let mut run = Run::new("simulate", &sc.out_dir)?;
    let (arch, rates, source) = simulation_target(sc)?;
    let predicted = predict_delays(&arch.arch, &rates, &arch.dist)?.0;
    let (report, trace, validation) = if validate {
        let v = validate_formulas(&arch, &rates, &sc.sim, &predicted, DEFAULT_TOLERANCE)?;
        let trace = if sc.trace { simulate_traced(&arch, &rates, &sc.sim)?.1 } else { Vec::new() };
        (v.report.clone(), trace, Some(v))
    } else {
        let (r, t) = simulate_traced(&arch, &rates, &sc.sim)?;
        (r, if sc.trace { t } else { Vec::new() }, None)
    };

    let class_rows: Vec<Vec<String>> = report
        .classes
        .iter()
        .zip(&predicted)
        .map(|(c, &p)| {
            let dev = if p > 0.0 { (c.mean_wait - p).abs() / p } else { c.mean_wait.abs() };
            vec![
                c.class.to_string(),
                fmt_f(rates[c.class - 1]),
                fmt_f(c.arrival_rate),
                fmt_f(c.throughput),
                fmt_f(c.mean_wait),
                fmt_f(c.wait_ci),
                fmt_f(p),
                fmt_f(dev),
                fmt_f(c.mean_queue),
                fmt_f(c.queue_ci),
                fmt_f(c.little_gap),
                fmt_f(c.little_ci),
                c.jobs.to_string(),
            ]
        })
        .collect();
    run.table(
        "simulate.csv",
        &header(&[
            "class",
            "offered_rate",
            "arrival_rate",
            "throughput",
            "mean_wait",
            "wait_ci",
            "predicted_wait",
            "relative_deviation",
            "mean_queue",
            "queue_ci",
            "little_gap",
            "little_ci",
            "jobs",
        ]),
        &class_rows,
    )?;
    let server_rows: Vec<Vec<String>> =
        report.utilization.iter().enumerate().map(|(i, &u)| vec![i.to_string(), fmt_f(u)]).collect();
    run.table("simulate_servers.csv", &header(&["server", "utilization"]), &server_rows)?;
    if sc.trace {
        write_trace(&mut run, &trace)?;
    }

    let pass = validation.as_ref().map(|v| v.pass);
    let payload = json!({
        "architecture": arch,
        "rates": rates,
        "predicted": predicted,
        "report": report,
        "validation": validation.as_ref().map(|v| json!({ "tolerance": v.tolerance, "pass": v.pass, "rows": v.rows })),
        "menu": source.as_ref().map(|r| &r.menu),
        "load": source.as_ref().map(|r| r.load),
    });
    let written = run.finish(Some(sc.hash()), Some(&sc.canonical), payload)?;
    if let Some(v) = &validation {
        if !v.pass {
            let worst = v.rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
            return Err(Error::Simulation(format!(
                "simulated waits deviate from the formulas by up to {:.2}% (tolerance {:.0}%); see {}",
                100.0 * worst,
                100.0 * v.tolerance,
                written.summary.display()
            )));
        }
    }
    Ok(SimulateOutput { arch, rates, predicted, report, validation_pass: pass, written })
}

fn write_trace(run: &mut Run, trace: &[TraceRecord]) -> Result<()> {
    let path = run.out.join("trace.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    run.tables.push(path);
    Ok(())
}

/// Misreport scan of one optimizer menu, plus whether raising each price by
/// [`PRICE_PROBE`] is caught.
#[derive(Debug, Clone, Serialize)]
pub struct DsicRow {
    pub load: f64,
    pub report: DsicReport,
    /// Entry `l - 1` is true when raising `p_l` produces a violation.
    pub probe_detected: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct DsicOutput {
    pub rows: Vec<DsicRow>,
    pub written: Written,
}

pub fn dsic_row(sc: &Scenario, r: &OptResult) -> Result<DsicRow> {
    let pop: TypePopulation = sc.population_at(r.load)?;
    let report = verify_dsic(&sc.model, &pop, &r.menu);
    let probe_detected = (1..=r.menu.len())
        .map(|l| Ok(!verify_dsic(&sc.model, &pop, &r.menu.with_price_shift(l, PRICE_PROBE)?).truthful))
        .collect::<Result<_>>()?;
    Ok(DsicRow { load: r.load, report, probe_detected })
}

/// Scans every optimizer menu of the scenario's sweep for profitable
/// misreports. Writes `dsic.csv`. Fails with a precondition error when a
/// menu is not truthful.
pub fn cmd_dsic(sc: &Scenario) -> Result<DsicOutput> {
    let mut run = Run::new("dsic", &sc.out_dir)?;
    let sweep = optimize_rows(sc, sc.arch, sc.l)?;
    let rows: Vec<DsicRow> =
        sweep.iter().filter_map(|s| s.result.as_ref()).map(|r| dsic_row(sc, r)).collect::<Result<_>>()?;
    let mut h = header(&["lambda", "pairs_checked", "violations", "worst_gain", "truthful"]);
    h.extend(numbered("probe_detected", 1, sc.l));
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|d| {
            let mut rec = vec![
                fmt_f(d.load),
                d.report.pairs_checked.to_string(),
                d.report.violations.len().to_string(),
                fmt_f(d.report.worst_violation),
                d.report.truthful.to_string(),
            ];
            rec.extend(d.probe_detected.iter().map(bool::to_string));
            rec
        })
        .collect();
    run.table("dsic.csv", &h, &records)?;
    let untruthful: Vec<f64> = rows.iter().filter(|d| !d.report.truthful).map(|d| d.load).collect();
    let written = run.finish(Some(sc.hash()), Some(&sc.canonical), serde_json::to_value(&rows)?)?;
    if !untruthful.is_empty() {
        return Err(Error::Precondition(format!("menus at loads {untruthful:?} admit profitable misreports")));
    }
    Ok(DsicOutput { rows, written })
}

/// Data sets behind the reproduction figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Residual constant `A` across the hyperexponential sweep.
    Fig3,
    /// Closed-form SMS bound across the same sweep.
    Fig4,
    /// Best revenue ratio and its load per `L`.
    Fig6,
    /// Revenue ratio against load per `L`.
    Fig7,
    /// Prices against load for `L = 2, 3, 4`.
    Fig8,
    /// Delays and segment boundaries against load for `L = 2, 3`.
    Fig9,
    /// Hybrid over SMS revenue per `L`, plus the fixed-configuration replay.
    Appendix,
}

impl Figure {
    pub const ALL: [Figure; 7] =
        [Figure::Fig3, Figure::Fig4, Figure::Fig6, Figure::Fig7, Figure::Fig8, Figure::Fig9, Figure::Appendix];

    fn default_max_l(self) -> usize {
        match self {
            Figure::Fig3 | Figure::Fig4 => 0,
            Figure::Fig6 | Figure::Fig7 => 6,
            Figure::Fig8 | Figure::Appendix => 4,
            Figure::Fig9 => 3,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Appendix => "appendix",
        })
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.to_string() == s.to_ascii_lowercase()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown figure {s:?} (expected fig3, fig4, fig6, fig7, fig8, fig9 or appendix)"
            ))
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub out_dir: PathBuf,
    /// Largest `L`; each figure has its own default.
    pub max_l: Option<usize>,
    /// Node budget per load for `L >= 4`.
    pub budget: u64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { out_dir: PathBuf::from("results"), max_l: None, budget: DEFAULT_BEST_EFFORT_BUDGET }
    }
}

/// One figure's table.
#[derive(Debug, Clone)]
pub struct FigureTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl FigureTable {
    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

const GRIDS: [(&str, f64); 2] = [("paper-low", 0.02), ("paper-high", 0.04)];

fn figure_scenario(name: &str, l: usize, budget: u64) -> Result<Scenario> {
    let mut sc = preset(name)?;
    sc.l = l;
    if l >= 4 {
        sc.search = SearchOptions::best_effort(budget);
    }
    Ok(sc)
}

/// `(delta, L, scenario, rows)` per sweep.
type Sweeps = Vec<(f64, usize, Scenario, Vec<SweepRow>)>;

/// SMS sweeps for every `L` in `ls` on the given presets.
fn sms_sweeps(grids: &[(&str, f64)], ls: &[usize], budget: u64) -> Result<Sweeps> {
    let mut out = Vec::new();
    for &(name, delta) in grids {
        for &l in ls {
            let sc = figure_scenario(name, l, budget)?;
            let rows = optimize_rows(&sc, ArchKind::Sms, l)?;
            out.push((delta, l, sc, rows));
        }
    }
    Ok(out)
}

fn opt_field(r: Option<&OptResult>, f: impl Fn(&OptResult) -> f64) -> String {
    r.map(|r| fmt_f(f(r))).unwrap_or_default()
}

/// Builds one figure's table without writing it.
pub fn figure_table(fig: Figure, opts: &ReproduceOptions) -> Result<FigureTable> {
    let max_l = opts.max_l.unwrap_or(fig.default_max_l());
    match fig {
        Figure::Fig3 | Figure::Fig4 => {
            let sc = preset("paper-low")?;
            let sweep = hyper_bound_sweep(sc.model.on_demand_delay(), 0.5, HYPER_WEIGHT, &hyper_means())?;
            let (name, pick): (&str, fn(&crate::optimizer::BoundRow) -> f64) =
                if fig == Figure::Fig3 { ("A", |r| r.residual) } else { ("kappa", |r| r.kappa) };
            Ok(FigureTable {
                header: header(&["weight1", "mean1", "mean2", name]),
                rows: sweep
                    .iter()
                    .map(|r| vec![fmt_f(r.weight1), fmt_f(r.mean1), fmt_f(r.mean2), fmt_f(pick(r))])
                    .collect(),
            })
        }
        Figure::Fig6 | Figure::Fig7 => {
            let ls: Vec<usize> = (2..=max_l.max(2)).collect();
            let sweeps = sms_sweeps(&GRIDS, &ls, opts.budget)?;
            if fig == Figure::Fig6 {
                let rows = sweeps
                    .iter()
                    .map(|(delta, l, _, rows)| {
                        let best = best_row(rows);
                        let r = best.and_then(|b| b.result.as_ref());
                        vec![
                            fmt_f(*delta),
                            l.to_string(),
                            opt_field(r, |r| r.gamma),
                            best.map(|b| fmt_f(b.load)).unwrap_or_default(),
                            rows.iter().any(|x| x.result.as_ref().is_some_and(|r| r.best_effort)).to_string(),
                        ]
                    })
                    .collect();
                Ok(FigureTable { header: header(&["delta", "L", "gamma", "lambda", "best_effort"]), rows })
            } else {
                let mut rows = Vec::new();
                for (delta, l, _, sweep) in &sweeps {
                    for row in sweep {
                        let r = row.result.as_ref();
                        rows.push(vec![
                            fmt_f(*delta),
                            l.to_string(),
                            fmt_f(row.load),
                            opt_field(r, |r| r.gamma),
                            r.map(|r| r.best_effort.to_string()).unwrap_or_default(),
                        ]);
                    }
                }
                Ok(FigureTable { header: header(&["delta", "L", "lambda", "gamma", "best_effort"]), rows })
            }
        }
        Figure::Fig8 | Figure::Fig9 => {
            let ls: Vec<usize> = (2..=max_l.max(2)).collect();
            let sweeps = sms_sweeps(&GRIDS[..1], &ls, opts.budget)?;
            let mut h = header(&["L", "lambda", "gamma"]);
            if fig == Figure::Fig8 {
                h.extend(numbered("p", 1, max_l));
            } else {
                h.extend(numbered("phi", 1, max_l));
                h.extend(numbered("cut_phi0", 2, max_l));
            }
            h.push("best_effort".into());
            let mut rows = Vec::new();
            for (_, l, sc, sweep) in &sweeps {
                for row in sweep {
                    let r = row.result.as_ref();
                    let mut rec = vec![l.to_string(), fmt_f(row.load), opt_field(r, |r| r.gamma)];
                    let pad = |v: Vec<f64>, len: usize| -> Vec<String> {
                        (0..len).map(|i| v.get(i).map(|&x| fmt_f(x)).unwrap_or_default()).collect()
                    };
                    if fig == Figure::Fig8 {
                        rec.extend(pad(r.map(|r| r.menu.prices().to_vec()).unwrap_or_default(), max_l));
                    } else {
                        rec.extend(pad(r.map(|r| r.delays.0.clone()).unwrap_or_default(), max_l));
                        rec.extend(pad(r.map(|r| cut_phi0(sc, r)).unwrap_or_default(), max_l - 1));
                    }
                    rec.push(r.map(|r| r.best_effort.to_string()).unwrap_or_default());
                    rows.push(rec);
                }
            }
            Ok(FigureTable { header: h, rows })
        }
        Figure::Appendix => {
            let mut rows = vec![replay_row()?];
            for (name, delta) in GRIDS {
                for l in 2..=max_l.max(2) {
                    let sc = figure_scenario(name, l, opts.budget)?;
                    let sms_rows = optimize_rows(&sc, ArchKind::Sms, l)?;
                    let hyb_rows = optimize_rows(&sc, ArchKind::Hybrid, l)?;
                    let sms = best_row(&sms_rows).and_then(|b| b.result.as_ref());
                    let hyb = best_row(&hyb_rows).and_then(|b| b.result.as_ref());
                    let ratio = match (sms, hyb) {
                        (Some(s), Some(h)) => fmt_f(h.revenue / s.revenue),
                        _ => String::new(),
                    };
                    rows.push(vec![
                        "optimal".into(),
                        fmt_f(delta),
                        l.to_string(),
                        opt_field(sms, |r| r.load),
                        opt_field(sms, |r| r.revenue),
                        opt_field(hyb, |r| r.load),
                        opt_field(hyb, |r| r.revenue),
                        ratio,
                        sms.is_some_and(|r| r.best_effort).to_string(),
                    ]);
                }
            }
            Ok(FigureTable {
                header: header(&[
                    "kind",
                    "delta",
                    "L",
                    "sms_lambda",
                    "sms_revenue",
                    "hybrid_lambda",
                    "hybrid_revenue",
                    "gamma_hat",
                    "best_effort",
                ]),
                rows,
            })
        }
    }
}

/// Fixed four-SLA configurations on the low-tolerance grid: SMS with
/// partition (21, 24, 28, 27) at total rate 12 and hybrid with pools (51, 49)
/// at total rate 10.
pub fn replay() -> Result<(OptResult, OptResult)> {
    let sc = preset("paper-low")?;
    let sms_pop = sc.population.with_total_rate(12.0)?;
    let hyb_pop = sc.population.with_total_rate(10.0)?;
    let sms = evaluate_sms(&sc.model, &sms_pop, &[21, 24, 28, 27], &[5, 12, 26], &sc.dist)?
        .into_feasible()
        .ok_or_else(|| Error::NoFeasibleCandidate("replayed SMS configuration is infeasible".into()))?;
    let hyb = evaluate_hybrid(&sc.model, &hyb_pop, 51, 49, &[13, 19, 30], &sc.dist)?
        .into_feasible()
        .ok_or_else(|| Error::NoFeasibleCandidate("replayed hybrid configuration is infeasible".into()))?;
    Ok((sms, hyb))
}

fn replay_row() -> Result<Vec<String>> {
    let (sms, hyb) = replay()?;
    Ok(vec![
        "replay".into(),
        fmt_f(0.02),
        "4".into(),
        fmt_f(sms.load),
        fmt_f(sms.revenue),
        fmt_f(hyb.load),
        fmt_f(hyb.revenue),
        fmt_f(hyb.revenue / sms.revenue),
        "false".into(),
    ])
}

/// Writes `<figure>.csv` and `reproduce_<figure>.json`.
pub fn cmd_reproduce(fig: Figure, opts: &ReproduceOptions) -> Result<(FigureTable, Written)> {
    let mut run = Run::new(&format!("reproduce_{fig}"), &opts.out_dir)?;
    let table = figure_table(fig, opts)?;
    run.table(&format!("{fig}.csv"), &table.header, &table.rows)?;
    let payload =
        json!({ "figure": fig.to_string(), "max_L": opts.max_l, "budget": opts.budget, "rows": table.rows.len() });
    let written = run.finish(None, None, payload)?;
    Ok((table, written))
}

/// Worker threads from the flag, then [`THREADS_ENV`], then rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = flag {
        return if n > 0 { Ok(Some(n)) } else { Err(Error::InvalidParameter("--threads must be positive".into())) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer (got {v:?})"))),
        },
        Err(_) => Ok(None),
    }
}
