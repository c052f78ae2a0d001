//! Scenario files: a TOML key tree describing one experiment.
//!
//! ```toml
//! preset = "paper-low"        # optional base, overridden key by key
//! arch = "sms"                # od | sms | pbs | hybrid
//! L = 2
//! m = 100
//! loads = [0.05, 0.06, 0.07]  # per-server loads; default 0.05..=0.30 step 0.01
//!
//! [wtp]
//! p = 1.0
//! T = 0.05
//! beta = 3.0
//!
//! [population]                # grid form ...
//! n = 50
//! delta = 0.02
//! epsilon = 1e-6
//! # ... or an explicit list, most delay-sensitive first:
//! # types = [{ alpha = 20.0, prob = 0.5 }, { phi0 = 0.55, prob = 0.5 }]
//!
//! [service]
//! kind = "exponential"        # or "hyperexponential" with branches = [{ weight, mean }, ..]
//! mean = 1.0
//!
//! [search]
//! best_effort = false
//! max_candidates = 50000000
//! time_limit_secs = 600
//!
//! [simulation]
//! seed = 1
//! measured_jobs = 1000000
//! replications = 10
//! dispatch = "random"         # or "round-robin"
//! # warmup_jobs = 100000
//! # load = 0.1                # optimize at this load and simulate the result
//! # trace = true
//! # system = { arch = "pbs", servers = 1, rates = [0.2, 0.2] }
//!
//! [output]
//! dir = "results"
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{CustomerType, TypePopulation, WtpModel, DEFAULT_EPSILON};
use crate::optimizer::{default_load_grid, ArchKind, Architecture, SearchOptions};
use crate::queueing::ServiceDist;
use crate::simulator::{Dispatch, SimConfig};

/// Names accepted by `preset`.
pub const PRESETS: [&str; 2] = ["paper-low", "paper-high"];

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "paper-low" => Some("arch = \"sms\"\nL = 2\nm = 100\n[population]\nn = 50\ndelta = 0.02\n"),
        "paper-high" => Some("arch = \"sms\"\nL = 2\nm = 100\n[population]\nn = 50\ndelta = 0.04\n"),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    // Resolved before deserialization; kept so the key is accepted.
    #[allow(dead_code)]
    preset: Option<String>,
    arch: Option<String>,
    #[serde(rename = "L")]
    l: Option<usize>,
    m: Option<usize>,
    loads: Option<Vec<f64>>,
    wtp: Option<RawWtp>,
    population: Option<RawPopulation>,
    service: Option<ServiceDist>,
    search: Option<RawSearch>,
    simulation: Option<RawSim>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWtp {
    p: Option<f64>,
    #[serde(rename = "T")]
    t: Option<f64>,
    beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPopulation {
    n: Option<usize>,
    delta: Option<f64>,
    epsilon: Option<f64>,
    types: Option<Vec<RawType>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawType {
    alpha: Option<f64>,
    phi0: Option<f64>,
    prob: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    best_effort: Option<bool>,
    max_candidates: Option<u64>,
    time_limit_secs: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    seed: Option<u64>,
    warmup_jobs: Option<u64>,
    measured_jobs: Option<u64>,
    replications: Option<usize>,
    dispatch: Option<Dispatch>,
    load: Option<f64>,
    trace: Option<bool>,
    system: Option<RawSystem>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    arch: String,
    servers: Option<usize>,
    partition: Option<Vec<usize>>,
    first: Option<usize>,
    second: Option<usize>,
    rates: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// An explicit system for `simulate`: architecture and per-class rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSystem {
    pub arch: Architecture,
    pub rates: Vec<f64>,
}

/// A fully validated scenario with defaults filled in.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: WtpModel,
    /// Types and probabilities; the total rate is set per grid load.
    pub population: TypePopulation,
    pub dist: ServiceDist,
    pub arch: ArchKind,
    pub l: usize,
    pub m: usize,
    pub loads: Vec<f64>,
    pub search: SearchOptions,
    pub sim: SimConfig,
    pub sim_load: Option<f64>,
    pub trace: bool,
    pub system: Option<SimSystem>,
    pub out_dir: PathBuf,
    /// Effective key tree after presets and overrides.
    pub canonical: String,
}

impl Scenario {
    /// SHA-256 of the effective key tree, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Population scaled to `load` per server on `m` servers.
    pub fn population_at(&self, load: f64) -> Result<TypePopulation> {
        self.population.with_total_rate(load * self.m as f64)
    }
}

/// Command-line overrides applied on top of the file or preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub arch: Option<ArchKind>,
    pub l: Option<usize>,
    pub seed: Option<u64>,
    pub best_effort: bool,
    pub out_dir: Option<PathBuf>,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_with(Some(path), None, &Overrides::default())
}

pub fn preset(name: &str) -> Result<Scenario> {
    load_with(None, Some(name), &Overrides::default())
}

/// Loads a scenario from a file, a preset name, or both (the file wins).
pub fn load_with(path: Option<&Path>, preset_name: Option<&str>, overrides: &Overrides) -> Result<Scenario> {
    let label = path.map_or_else(|| PathBuf::from(preset_name.unwrap_or("<defaults>")), Path::to_path_buf);
    let mut tree = Table::new();
    let file_tree = match path {
        Some(p) => Some(parse(&std::fs::read_to_string(p)?, p)?),
        None => None,
    };
    let base: Option<String> = preset_name
        .map(str::to_string)
        .or_else(|| file_tree.as_ref().and_then(|t| t.get("preset")).and_then(Value::as_str).map(str::to_string));
    if let Some(name) = base {
        let text = preset_text(&name).ok_or_else(|| Error::Parse {
            path: label.clone(),
            message: format!("unknown preset {name:?} (expected one of {})", PRESETS.join(", ")),
        })?;
        merge(&mut tree, parse(text, &label)?);
        if let Some(t) = file_tree {
            merge(&mut tree, t);
        }
        tree.insert("preset".into(), Value::String(name));
    } else if let Some(t) = file_tree {
        merge(&mut tree, t);
    }
    if let Some(a) = overrides.arch {
        tree.insert("arch".into(), Value::String(a.to_string()));
    }
    if let Some(l) = overrides.l {
        tree.insert("L".into(), Value::Integer(l as i64));
    }
    if let Some(seed) = overrides.seed {
        section(&mut tree, "simulation").insert("seed".into(), Value::Integer(seed as i64));
    }
    if overrides.best_effort {
        section(&mut tree, "search").insert("best_effort".into(), Value::Boolean(true));
    }
    if let Some(dir) = &overrides.out_dir {
        section(&mut tree, "output").insert("dir".into(), Value::String(dir.display().to_string()));
    }
    // The output directory does not affect any result, so it stays out of the hash.
    let mut hashed = tree.clone();
    hashed.remove("output");
    let canonical =
        toml::to_string(&hashed).map_err(|e| Error::Parse { path: label.clone(), message: e.to_string() })?;
    let raw: Raw = Raw::deserialize(tree).map_err(|e| Error::Parse { path: label.clone(), message: e.to_string() })?;
    resolve(raw, canonical)
}

fn parse(text: &str, path: &Path) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

fn section<'t>(tree: &'t mut Table, key: &str) -> &'t mut Table {
    let entry = tree.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
    if !entry.is_table() {
        *entry = Value::Table(Table::new());
    }
    entry.as_table_mut().expect("just made a table")
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn resolve(raw: Raw, canonical: String) -> Result<Scenario> {
    let mut bad: Vec<String> = Vec::new();

    let w = raw.wtp.unwrap_or(RawWtp { p: None, t: None, beta: None });
    let model = keep(&mut bad, WtpModel::new(w.p.unwrap_or(1.0), w.t.unwrap_or(0.05), w.beta.unwrap_or(3.0)));

    let dist = raw.service.unwrap_or(ServiceDist::Exponential { mean: 1.0 });
    let dist_ok = keep(&mut bad, dist.validate()).is_some();

    let arch = match raw.arch.as_deref().unwrap_or("sms").parse::<ArchKind>() {
        Ok(a) => a,
        Err(e) => {
            bad.push(e.to_string());
            ArchKind::Sms
        }
    };
    let l = raw.l.unwrap_or(2);
    let m = raw.m.unwrap_or(100);
    if l == 0 {
        bad.push("L must be at least 1".into());
    }
    if m < l.max(1) {
        bad.push(format!("m = {m} must be at least L = {l}"));
    }
    if arch == ArchKind::Hybrid && l < 2 {
        bad.push("the hybrid architecture needs L >= 2".into());
    }

    let loads = raw.loads.unwrap_or_else(default_load_grid);
    if loads.is_empty() {
        bad.push("loads must not be empty".into());
    }
    for &x in &loads {
        if !(x > 0.0 && x < 1.0) {
            bad.push(format!("load {x} must lie in (0, 1)"));
        }
    }

    let mean = if dist_ok { dist.mean() } else { 1.0 };
    let population = match raw.population {
        Some(RawPopulation { types: Some(list), n, delta, epsilon }) => {
            if n.is_some() || delta.is_some() || epsilon.is_some() {
                bad.push("population: give either n/delta/epsilon or types, not both".into());
            }
            let t = w.t.unwrap_or(0.05);
            let mut types = Vec::new();
            let mut probs = Vec::new();
            for (i, ty) in list.iter().enumerate() {
                let ct = match (ty.alpha, ty.phi0) {
                    (Some(a), None) => CustomerType::new(a),
                    (None, Some(phi0)) => CustomerType::from_zero_value_offset(phi0 - t),
                    _ => Err(Error::InvalidParameter(format!("type {} needs exactly one of alpha or phi0", i + 1))),
                };
                match ct {
                    Ok(c) => types.push(c),
                    Err(e) => bad.push(e.to_string()),
                }
                probs.push(ty.prob);
            }
            if types.len() == list.len() {
                keep(&mut bad, TypePopulation::new(types, probs, 1.0, mean))
            } else {
                None
            }
        }
        other => {
            let (n, delta, epsilon) = other.map_or((None, None, None), |p| (p.n, p.delta, p.epsilon));
            let grid =
                TypePopulation::grid(n.unwrap_or(50), delta.unwrap_or(0.02), epsilon.unwrap_or(DEFAULT_EPSILON), 1.0)
                    .and_then(|g| TypePopulation::new(g.types().to_vec(), g.probs().to_vec(), 1.0, mean));
            keep(&mut bad, grid)
        }
    };
    if let Some(p) = &population {
        if p.len() < l {
            bad.push(format!("L = {l} needs at least {l} types (got {})", p.len()));
        }
    }

    let s = raw.search.unwrap_or(RawSearch { best_effort: None, max_candidates: None, time_limit_secs: None });
    let best_effort = s.best_effort.unwrap_or(false);
    let search = SearchOptions {
        max_candidates: s.max_candidates.or(best_effort.then_some(DEFAULT_BEST_EFFORT_BUDGET)),
        time_limit: match s.time_limit_secs {
            Some(x) if x > 0.0 && x.is_finite() => Some(Duration::from_secs_f64(x)),
            Some(x) => {
                bad.push(format!("search.time_limit_secs must be positive (got {x})"));
                None
            }
            None => None,
        },
        best_effort,
    };

    let r = raw.simulation.unwrap_or(RawSim {
        seed: None,
        warmup_jobs: None,
        measured_jobs: None,
        replications: None,
        dispatch: None,
        load: None,
        trace: None,
        system: None,
    });
    let defaults = SimConfig::default();
    let sim = SimConfig {
        seed: r.seed.unwrap_or(defaults.seed),
        warmup_jobs: r.warmup_jobs,
        measured_jobs: r.measured_jobs.unwrap_or(defaults.measured_jobs),
        replications: r.replications.unwrap_or(defaults.replications),
        dispatch: r.dispatch.unwrap_or(defaults.dispatch),
    };
    keep(&mut bad, sim.validate());
    if let Some(x) = r.load {
        if !(x > 0.0 && x < 1.0) {
            bad.push(format!("simulation.load {x} must lie in (0, 1)"));
        }
    }
    let system = r.system.and_then(|sys| match system_arch(&sys) {
        Ok(arch) => Some(SimSystem { arch, rates: sys.rates }),
        Err(e) => {
            bad.push(e.to_string());
            None
        }
    });

    let out_dir = raw.output.and_then(|o| o.dir).unwrap_or_else(|| PathBuf::from("results"));

    match (model, population) {
        (Some(model), Some(population)) if bad.is_empty() => Ok(Scenario {
            model,
            population,
            dist,
            arch,
            l,
            m,
            loads,
            search,
            sim,
            sim_load: r.load,
            trace: r.trace.unwrap_or(false),
            system,
            out_dir,
            canonical,
        }),
        _ => Err(Error::Validation(bad)),
    }
}

fn keep<T>(bad: &mut Vec<String>, r: Result<T>) -> Option<T> {
    r.map_err(|e| bad.push(e.to_string())).ok()
}

/// Node budget used by `best_effort` when none is configured.
pub const DEFAULT_BEST_EFFORT_BUDGET: u64 = 10_000_000;

fn system_arch(sys: &RawSystem) -> Result<Architecture> {
    let need = |v: Option<usize>, key: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("simulation.system.{key} is required for arch {:?}", sys.arch)))
    };
    let arch = match sys.arch.parse::<ArchKind>()? {
        ArchKind::Od => Architecture::OnDemand { servers: need(sys.servers, "servers")? },
        ArchKind::Pbs => Architecture::Pbs { servers: need(sys.servers, "servers")? },
        ArchKind::Sms => Architecture::Sms {
            partition: sys.partition.clone().ok_or_else(|| {
                Error::InvalidParameter("simulation.system.partition is required for arch \"sms\"".into())
            })?,
        },
        ArchKind::Hybrid => {
            Architecture::Hybrid { first: need(sys.first, "first")?, second: need(sys.second, "second")? }
        }
    };
    if sys.rates.is_empty() || sys.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::InvalidParameter("simulation.system.rates must be non-negative numbers".into()));
    }
    Ok(arch)
}
