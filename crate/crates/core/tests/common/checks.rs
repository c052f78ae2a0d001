//! One function per acceptance criterion. Each returns a one-line summary on
//! success and the first discrepancy on failure.

use std::time::Instant;

use qosdiff::cli::{dsic_row, replay};
use qosdiff::mechanism::{assign_sla, optimal_prices, revenue, verify_dsic};
use qosdiff::model::TypePopulation;
use qosdiff::optimizer::{
    best_row, default_load_grid, evaluate_pbs, evaluate_sms, hyper_bound_sweep, optimize_hybrid, optimize_pbs,
    optimize_sms, optimize_sms_with, pbs_upper_bound, sms_lower_bound_beta3, sweep_load, ArchKind, Architecture,
    ArchitectureConfig, OptResult, SearchOptions, SweepRow,
};
use qosdiff::queueing::od_max_load;
use qosdiff::scenario::{preset, Scenario, DEFAULT_BEST_EFFORT_BUDGET};
use qosdiff::simulator::{predict_delays, simulate, validate_formulas};
use qosdiff::{Error, ServiceDist, SimConfig, SlaMenu, WtpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle_run::{hybrid_case, pbs_case, run, sms_case};
use super::tuples;

pub type Check = Result<String, String>;

fn exp1() -> ServiceDist {
    ServiceDist::exponential(1.0).unwrap()
}

fn near(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{name} = {got:.6}, expected {want} +- {tol}"))
    }
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

pub fn closed_form_constants() -> Check {
    let start = Instant::now();
    let t = 0.05;
    let lambda_od = od_max_load(t, &exp1()).map_err(e)?;
    near("lambda_od", lambda_od, 0.047619, 1e-6)?;
    near("PBS bound", pbs_upper_bound(t, &exp1()).map_err(e)?, 1.05, 1e-12)?;
    for (phi0, want, tol) in [(0.5, 1.514, 0.001), (0.55, 1.536, 0.002), (1.05, 1.647, 0.002)] {
        near(&format!("kappa'({phi0})"), sms_lower_bound_beta3(t, phi0, &exp1()).map_err(e)?, want, tol)?;
    }
    let means: Vec<f64> = (0..16).map(|i| 0.2 + 0.05 * i as f64).collect();
    let sweep = hyper_bound_sweep(t, 0.5, 0.75, &means).map_err(e)?;
    let min_a = sweep.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    let min_k = sweep.iter().map(|r| r.kappa).fold(f64::INFINITY, f64::min);
    if !(min_a > 1.0) {
        return Err(format!("hyperexponential sweep has A = {min_a} <= 1"));
    }
    if min_k < 1.515 - 0.001 {
        return Err(format!("hyperexponential sweep min kappa' = {min_k:.4} < 1.515 - 0.001"));
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!(
        "lambda_od {lambda_od:.6}, PBS bound 1.05, hyper min A {min_a:.4}, min kappa' {min_k:.4} ({elapsed:.1?})"
    ))
}

pub fn replayed_configurations() -> Check {
    let start = Instant::now();
    let (sms, hyb) = replay().map_err(e)?;
    for (l, (&got, want)) in sms.menu.delays().iter().zip([0.05, 0.07527, 0.1364, 0.2857]).enumerate() {
        near(&format!("SMS phi_{}", l + 1), got, want, 5e-4)?;
    }
    for (l, (&got, want)) in sms.menu.prices().iter().zip([1.0, 0.9685, 0.9095, 0.8099]).enumerate() {
        near(&format!("SMS p_{}", l + 1), got, want, 5e-4)?;
    }
    for (l, (&got, want)) in hyb.delays.0[1..].iter().zip([0.1590, 0.1709, 0.1973]).enumerate() {
        near(&format!("hybrid t_{}", l + 2), got, want, 5e-4)?;
    }
    for (l, (&got, want)) in hyb.menu.prices().iter().zip([1.0, 0.9063, 0.8963, 0.8889]).enumerate() {
        near(&format!("hybrid p_{}", l + 1), got, want, 5e-4)?;
    }
    let ratio = hyb.revenue / sms.revenue;
    near("revenue ratio", ratio, 0.8753, 0.005)?;
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 1.0 {
        return Err(format!("took {elapsed:.1?}"));
    }
    Ok(format!("SMS revenue {:.4}, hybrid revenue {:.4}, ratio {ratio:.4} ({elapsed:.1?})", sms.revenue, hyb.revenue))
}

fn sms_sweep(sc: &Scenario, l: usize) -> Result<Vec<SweepRow>, String> {
    let opts = if l >= 4 { SearchOptions::best_effort(DEFAULT_BEST_EFFORT_BUDGET) } else { SearchOptions::exact() };
    sweep_load(&sc.model, &sc.population, sc.m, l, ArchKind::Sms, &sc.dist, &sc.loads, &opts).map_err(e)
}

fn at(rows: &[SweepRow], load: f64) -> Result<&OptResult, String> {
    rows.iter()
        .find(|r| (r.load - load).abs() < 1e-9)
        .and_then(|r| r.result.as_ref())
        .ok_or_else(|| format!("no feasible menu at lambda {load}"))
}

/// Best revenue ratio per `L = 2..=max_l` on one preset.
pub fn gamma_by_l(name: &str, max_l: usize) -> Result<Vec<(usize, f64, f64, bool)>, String> {
    let sc = preset(name).map_err(e)?;
    (2..=max_l)
        .map(|l| {
            let rows = sms_sweep(&sc, l)?;
            let best = best_row(&rows).ok_or_else(|| format!("{name}, L = {l}: nothing feasible"))?;
            let r = best.result.as_ref().unwrap();
            Ok((l, r.gamma, best.load, rows.iter().any(|x| x.result.as_ref().is_some_and(|r| r.best_effort))))
        })
        .collect()
}

pub fn optimizer_reproduction() -> Check {
    let start = Instant::now();
    let low = preset("paper-low").map_err(e)?;
    let rows = sms_sweep(&low, 2)?;
    let best = best_row(&rows).ok_or("nothing feasible at L = 2")?;
    let g_low = best.result.as_ref().unwrap().gamma;
    near("gamma(L=2, delta=0.02)", g_low, 1.825, 0.02)?;
    near("best load (delta=0.02)", best.load, 0.1, 1e-9)?;
    near("phi_2(0.10)", at(&rows, 0.10)?.menu.delays()[1], 0.1836, 0.001)?;
    let r12 = at(&rows, 0.12)?;
    near("phi_2(0.12)", r12.menu.delays()[1], 0.2228, 0.001)?;
    near("p_2(0.12)", r12.menu.prices()[1], 0.1149, 0.002)?;
    let high = preset("paper-high").map_err(e)?;
    let rows = sms_sweep(&high, 2)?;
    let g_high = best_row(&rows).and_then(|b| b.result.as_ref()).ok_or("nothing feasible")?.gamma;
    near("gamma(L=2, delta=0.04)", g_high, 2.291, 0.02)?;

    let mut series = Vec::new();
    for name in ["paper-low", "paper-high"] {
        let by_l = gamma_by_l(name, 6)?;
        for w in by_l.windows(2) {
            if w[1].1 < w[0].1 - 1e-12 {
                return Err(format!(
                    "{name}: gamma falls from {:.4} at L = {} to {:.4} at L = {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                ));
            }
        }
        let text: Vec<String> =
            by_l.iter().map(|(l, g, _, be)| format!("{l}:{g:.4}{}", if *be { "*" } else { "" })).collect();
        series.push(format!("{name} {}", text.join(" ")));
    }
    Ok(format!(
        "gamma(L=2) {g_low:.4} at 0.10 / {g_high:.4}; by L (* = best effort) {} ({:.1?})",
        series.join("; "),
        start.elapsed()
    ))
}

pub fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let a = run(11, 20, (0.01, 0.3), &[2], sms_case)?;
    let b = run(12, 20, (0.005, 0.06), &[2], pbs_case)?;
    let c = run(13, 20, (0.01, 0.3), &[2], hybrid_case)?;
    Ok(format!("20 feasible instances each; {a} SMS, {b} PBS, {c} hybrid instances checked ({:.1?})", start.elapsed()))
}

pub fn dsic_suite() -> Check {
    let start = Instant::now();
    let mut menus = 0;
    let mut probes = 0;
    let mut first_price_caught = 0;
    for name in ["paper-low", "paper-high"] {
        for l in 2..=4 {
            let mut sc = preset(name).map_err(e)?;
            sc.l = l;
            for row in sms_sweep(&sc, l)? {
                let Some(r) = row.result else { continue };
                let d = dsic_row(&sc, &r).map_err(e)?;
                if !d.report.truthful {
                    return Err(format!(
                        "{name}, L = {l}, lambda {}: {} violations, worst gain {}",
                        r.load,
                        d.report.violations.len(),
                        d.report.worst_violation
                    ));
                }
                if d.report.pairs_checked != 2500 {
                    return Err(format!("only {} pairs checked", d.report.pairs_checked));
                }
                for (i, &caught) in d.probe_detected.iter().enumerate().skip(1) {
                    if !caught {
                        return Err(format!("{name}, L = {l}, lambda {}: raising p_{} is not caught", r.load, i + 1));
                    }
                    probes += 1;
                }
                first_price_caught += usize::from(d.probe_detected[0]);
                menus += 1;
            }
        }
    }
    Ok(format!(
        "{menus} menus truthful over 2500 pairs each; {probes}/{probes} raised threshold prices p_2..p_L caught; \
         raising the fixed on-demand price p_1 caught on {first_price_caught}/{menus} ({:.1?})",
        start.elapsed()
    ))
}

/// The WTP drop between two delays is larger for a more sensitive type.
pub fn wtp_difference_ordering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20_000 {
        let t = rng.random_range(0.01..0.1);
        let beta = rng.random_range(2.0..5.0);
        let model = WtpModel::new(1.0, t, beta).map_err(e)?;
        let lo_alpha = rng.random_range(0.5..20.0);
        let hi_alpha = lo_alpha * rng.random_range(1.01..3.0);
        let span = 1.0 / hi_alpha;
        let phi = t + rng.random_range(0.0..0.9) * span;
        let phi2 = phi + rng.random_range(0.01..0.99) * (t + span - phi);
        let drop = |a: f64| model.wtp(a, phi).unwrap() - model.wtp(a, phi2).unwrap();
        if !(drop(hi_alpha) > drop(lo_alpha)) {
            return Err(format!("WTP drop not larger for alpha {hi_alpha} than {lo_alpha} on [{phi}, {phi2}]"));
        }
    }
    Ok("20000 samples".into())
}

/// Under any priced menu, a more sensitive type never picks a slower SLA.
pub fn assignment_monotonicity() -> Check {
    let model = WtpModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let l = rng.random_range(2..=5);
        let mut delays = vec![0.05];
        for _ in 1..l {
            let prev = *delays.last().unwrap();
            delays.push(prev + rng.random_range(0.01..0.2));
        }
        let mut prices = vec![1.0];
        for _ in 1..l {
            let prev = *prices.last().unwrap();
            prices.push(prev - rng.random_range(0.001..0.3));
        }
        let thresholds = (0..=l).map(|i| 200.0 / (1 + i) as f64).collect();
        let menu = SlaMenu::new(&model, delays, prices, thresholds).map_err(e)?;
        let mut last = 0;
        for i in 0..400 {
            let alpha = 200.0 * (0.98f64).powi(i);
            let sla = assign_sla(&model, alpha, &menu);
            if sla < last {
                return Err(format!("alpha {alpha} picks SLA {sla} after a more sensitive type picked {last}"));
            }
            last = sla;
        }
    }
    Ok("500 random menus x 400 types".into())
}

/// Quoting a slower delay than the actual wait never raises revenue.
pub fn delay_tightness() -> Check {
    let model = WtpModel::reference();
    let pop = TypePopulation::grid(50, 0.02, 1e-6, 12.0).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    let mut candidates = 0;
    while candidates < 100 {
        let l = rng.random_range(2..=4);
        let mut cuts: Vec<usize> = (0..l - 1).map(|_| rng.random_range(2..=50)).collect();
        cuts.sort_unstable();
        cuts.dedup();
        if cuts.len() != l - 1 {
            continue;
        }
        let mut part: Vec<usize> = (0..l).map(|_| rng.random_range(5..40)).collect();
        let sum: usize = part.iter().sum();
        if sum > 100 {
            continue;
        }
        part[0] += 100 - sum;
        let Some(r) = evaluate_sms(&model, &pop, &part, &cuts, &exp1()).map_err(e)?.into_feasible() else { continue };
        candidates += 1;
        let base = r.revenue;
        for k in 1..l {
            for slack in [0.01, 0.1] {
                let mut quoted = r.menu.delays().to_vec();
                quoted[k] += slack;
                if k + 1 < l && quoted[k] >= quoted[k + 1] {
                    continue;
                }
                let prices = optimal_prices(&model, r.menu.thresholds(), &quoted).map_err(e)?;
                let slack_revenue = revenue(&prices, &r.rates, 1.0).map_err(e)?;
                if slack_revenue > base + 1e-12 {
                    return Err(format!(
                        "slack {slack} on SLA {} of {part:?}/{cuts:?} raises revenue to {slack_revenue} from {base}",
                        k + 1
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{candidates} feasible candidates, {checked} slack menus"))
}

/// Every feasible PBS configuration stays below `1 + T/A`.
pub fn pbs_bound_holds() -> Check {
    let model = WtpModel::reference();
    let bound = pbs_upper_bound(0.05, &exp1()).map_err(e)?;
    let loads: Vec<f64> = (0..=25).map(|i| 0.04 + 0.0005 * i as f64).collect();
    let mut feasible = 0;
    let mut worst: f64 = 0.0;
    for delta in [0.02, 0.04] {
        let template = TypePopulation::grid(50, delta, 1e-6, 1.0).map_err(e)?;
        for &load in &loads {
            let pop = template.with_total_rate(load * 100.0).map_err(e)?;
            for k in 1..=2 {
                for interior in tuples(k, 2, 51) {
                    if let Some(r) = evaluate_pbs(&model, &pop, 100, &interior, &exp1()).map_err(e)?.into_feasible() {
                        feasible += 1;
                        worst = worst.max(r.gamma);
                        if r.gamma > bound + 1e-12 {
                            return Err(format!("gamma {} exceeds {bound} at load {load}, cuts {interior:?}", r.gamma));
                        }
                    }
                }
            }
        }
    }
    if feasible == 0 {
        return Err("no feasible PBS configuration enumerated".into());
    }
    Ok(format!("{feasible} feasible configurations, max gamma {worst:.5} <= {bound}"))
}

/// With two SLAs the hybrid and SMS architectures coincide.
pub fn hybrid_equals_sms() -> Check {
    let model = WtpModel::reference();
    let mut compared = 0;
    for delta in [0.02, 0.04] {
        let template = TypePopulation::grid(50, delta, 1e-6, 1.0).map_err(e)?;
        for load in default_load_grid() {
            let pop = template.with_total_rate(load * 100.0).map_err(e)?;
            let sms = optimize_sms(&model, &pop, 100, 2, &exp1());
            let hyb = optimize_hybrid(&model, &template, 100, 2, &exp1(), &[load]);
            match (sms, hyb) {
                (Ok(s), Ok(h)) => {
                    if (s.gamma - h.gamma).abs() > 1e-9 {
                        return Err(format!("delta {delta}, load {load}: SMS {} vs hybrid {}", s.gamma, h.gamma));
                    }
                    compared += 1;
                }
                (Err(Error::NoFeasibleCandidate(_)), Err(Error::NoFeasibleCandidate(_))) => {}
                (s, h) => return Err(format!("delta {delta}, load {load}: SMS {s:?} vs hybrid {h:?}")),
            }
        }
    }
    Ok(format!("{compared} loads agree within 1e-9"))
}

/// Optimizer and simulator outputs do not depend on the worker count.
pub fn thread_determinism() -> Check {
    let model = WtpModel::reference();
    let template = TypePopulation::grid(50, 0.02, 1e-6, 1.0).map_err(e)?;
    let pop = template.with_total_rate(11.0).map_err(e)?;
    let loads = [0.044, 0.046, 0.048, 0.05];
    let sim_arch = ArchitectureConfig::new(Architecture::Pbs { servers: 2 }, exp1()).map_err(e)?;
    let sim_cfg =
        SimConfig { measured_jobs: 20_000, warmup_jobs: Some(2_000), replications: 4, ..SimConfig::default() };
    let work = || -> Result<_, Error> {
        Ok((
            optimize_sms(&model, &pop, 100, 3, &exp1())?,
            optimize_sms_with(&model, &pop, 100, 5, &exp1(), &SearchOptions::best_effort(200_000))?,
            optimize_pbs(&model, &template, 100, 3, &exp1(), &loads)?,
            optimize_hybrid(&model, &template, 100, 3, &exp1(), &default_load_grid())?,
            simulate(&sim_arch, &[0.3, 0.4], &sim_cfg)?,
        ))
    };
    let mut first = None;
    for threads in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e)?;
        let out = pool.install(work).map_err(e)?;
        match &first {
            None => first = Some(out),
            Some(f) if *f == out => {}
            Some(_) => return Err(format!("results with {threads} threads differ from 1 thread")),
        }
    }
    Ok("SMS (exact and budgeted), PBS, hybrid and simulator identical on 1, 2, 3, 8 threads".into())
}

pub fn property_suites() -> Check {
    let start = Instant::now();
    let parts = [
        ("WTP drop ordering", wtp_difference_ordering()),
        ("assignment monotonicity", assignment_monotonicity()),
        ("delay tightness", delay_tightness()),
        ("PBS bound", pbs_bound_holds()),
        ("hybrid=SMS", hybrid_equals_sms()),
        ("determinism", thread_determinism()),
    ];
    let mut notes = Vec::new();
    for (name, r) in parts {
        match r {
            Ok(s) => notes.push(format!("{name}: {s}")),
            Err(msg) => return Err(format!("{name}: {msg}")),
        }
    }
    Ok(format!("{} ({:.1?})", notes.join("; "), start.elapsed()))
}

pub struct SimCase {
    pub name: &'static str,
    pub arch: Architecture,
    pub rates: Vec<f64>,
    /// Classes compared with `targets`, 1-based.
    pub classes: Vec<usize>,
    pub targets: Vec<f64>,
    pub tolerance: f64,
}

pub fn simulation_cases() -> Vec<SimCase> {
    vec![
        SimCase {
            name: "M/M/1",
            arch: Architecture::OnDemand { servers: 1 },
            rates: vec![0.5],
            classes: vec![1],
            targets: vec![1.0],
            tolerance: 0.02,
        },
        SimCase {
            name: "two-class priority",
            arch: Architecture::Pbs { servers: 1 },
            rates: vec![0.2, 0.2],
            classes: vec![1, 2],
            targets: vec![0.4 / 0.8, 0.4 / (0.8 * 0.6)],
            tolerance: 0.03,
        },
        SimCase {
            name: "SMS modules",
            arch: Architecture::Sms { partition: vec![21, 24, 28, 27] },
            rates: vec![0.96, 1.68, 3.36, 6.0],
            classes: vec![4],
            targets: vec![0.2857],
            tolerance: 0.03,
        },
        SimCase {
            name: "hybrid",
            arch: Architecture::Hybrid { first: 51, second: 49 },
            rates: vec![2.4, 1.2, 2.2, 4.2],
            classes: vec![2, 3, 4],
            targets: vec![0.1590, 0.1709, 0.1973],
            tolerance: 0.03,
        },
    ]
}

pub fn simulation_validation() -> Check {
    let start = Instant::now();
    let cfg = SimConfig::default();
    if cfg.measured_jobs < 1_000_000 || cfg.replications < 10 {
        return Err("default simulation is smaller than 1e6 jobs x 10 replications".into());
    }
    let mut notes = Vec::new();
    for case in simulation_cases() {
        let arch = ArchitectureConfig::new(case.arch.clone(), exp1()).map_err(e)?;
        let predicted = predict_delays(&case.arch, &case.rates, &exp1()).map_err(e)?.0;
        let v = validate_formulas(&arch, &case.rates, &cfg, &predicted, case.tolerance).map_err(e)?;
        if !v.pass {
            let worst = v.rows.iter().map(|r| r.relative_deviation).fold(0.0, f64::max);
            return Err(format!("{}: waits off the formulas by up to {:.2}%", case.name, 100.0 * worst));
        }
        let mut worst: f64 = 0.0;
        for (&c, &target) in case.classes.iter().zip(&case.targets) {
            let got = v.report.classes[c - 1].mean_wait;
            let dev = (got - target).abs() / target;
            worst = worst.max(dev);
            if dev > case.tolerance {
                return Err(format!("{} class {c}: {got:.5} vs {target} ({:.2}%)", case.name, 100.0 * dev));
            }
        }
        for c in &v.report.classes {
            if c.little_gap.abs() > c.little_ci + 1e-12 {
                return Err(format!(
                    "{} class {}: Little gap {:.3e} outside +- {:.3e}",
                    case.name, c.class, c.little_gap, c.little_ci
                ));
            }
        }
        let r = &v.report;
        if (r.mean_utilization - r.offered_load).abs() > r.utilization_ci + 1e-12 {
            return Err(format!(
                "{}: utilization {:.5} +- {:.5} vs offered load {:.5}",
                case.name, r.mean_utilization, r.utilization_ci, r.offered_load
            ));
        }
        notes.push(format!("{} {:.2}%", case.name, 100.0 * worst));
    }
    Ok(format!(
        "worst deviation per case: {}; Little and utilization within CIs ({:.1?})",
        notes.join(", "),
        start.elapsed()
    ))
}

/// A preset scenario at one grid load, for tests that need a single population.
pub fn preset_at(name: &str, load: f64) -> TypePopulation {
    preset(name).unwrap().population_at(load).unwrap()
}

/// DSIC scan of every grid menu for one preset and `L`; for integration tests.
pub fn dsic_all(name: &str, l: usize) -> Vec<(f64, bool, Vec<bool>)> {
    let mut sc = preset(name).unwrap();
    sc.l = l;
    sms_sweep(&sc, l)
        .unwrap()
        .into_iter()
        .filter_map(|r| r.result)
        .map(|r| {
            let d = dsic_row(&sc, &r).unwrap();
            let pop = sc.population_at(r.load).unwrap();
            assert_eq!(verify_dsic(&sc.model, &pop, &r.menu).truthful, d.report.truthful);
            (r.load, d.report.truthful, d.probe_detected)
        })
        .collect()
}
