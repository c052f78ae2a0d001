//! Random-instance driver comparing the optimizers with full enumeration.

use qosdiff::optimizer::{optimize_hybrid, optimize_pbs, optimize_sms, Architecture, OptResult};
use qosdiff::{Error, ServiceDist};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{agrees, random_instance, Instance};

pub fn exp1() -> ServiceDist {
    ServiceDist::exponential(1.0).unwrap()
}

fn load_index(inst: &Instance, r: &OptResult) -> usize {
    inst.loads
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - r.load).abs().total_cmp(&(b.1 - r.load).abs()))
        .map(|(i, _)| i)
        .unwrap()
}

fn key_of(inst: &Instance, r: &OptResult) -> Vec<usize> {
    let cuts = r.segmentation.cuts();
    let mut key = match &r.architecture.arch {
        Architecture::Sms { partition } => partition.clone(),
        Architecture::Pbs { .. } => vec![load_index(inst, r)],
        Architecture::Hybrid { first, second } => vec![load_index(inst, r), *first, *second],
        Architecture::OnDemand { .. } => unreachable!(),
    };
    key.extend(cuts);
    key
}

/// Runs `check` on random instances until `want` of them have a feasible
/// optimum at `L = 2`; every instance, feasible or not, must agree with the
/// oracle. Returns the number of instances checked.
pub fn run(
    seed: u64,
    want: usize,
    load_range: (f64, f64),
    levels: &[usize],
    mut check: impl FnMut(&Instance, usize) -> Result<bool, String>,
) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut feasible = 0;
    for attempt in 0..500 {
        let n = rng.random_range(2..=5);
        let m = rng.random_range(2..=8);
        let inst = random_instance(&mut rng, n, m, load_range, 3);
        for &l in levels {
            if l > n || l > m {
                continue;
            }
            match check(&inst, l) {
                Ok(true) if l == 2 => feasible += 1,
                Ok(_) => {}
                Err(msg) => return Err(format!("instance {attempt} (L = {l}): {msg}\n{inst:?}")),
            }
        }
        if feasible >= want {
            return Ok(attempt + 1);
        }
    }
    Err(format!("only {feasible} feasible instances in 500 attempts"))
}

pub fn sms_case(inst: &Instance, l: usize) -> Result<bool, String> {
    let total = inst.loads[0] * inst.m as f64;
    let ranked = super::sms(inst, l, total);
    match optimize_sms(&inst.model(), &inst.population(total), inst.m, l, &exp1()) {
        Ok(r) => agrees(&ranked, r.revenue, &key_of(inst, &r)).map(|_| true),
        Err(Error::NoFeasibleCandidate(_)) if ranked.is_empty() => Ok(false),
        Err(e) => Err(format!("optimizer failed: {e}; oracle has {} candidates", ranked.len())),
    }
}

pub fn pbs_case(inst: &Instance, l: usize) -> Result<bool, String> {
    let ranked = super::pbs(inst, l);
    match optimize_pbs(&inst.model(), &inst.population(1.0), inst.m, l, &exp1(), &inst.loads) {
        Ok(r) => agrees(&ranked, r.revenue, &key_of(inst, &r)).map(|_| true),
        Err(Error::NoFeasibleCandidate(_)) if ranked.is_empty() => Ok(false),
        Err(e) => Err(format!("optimizer failed: {e}; oracle has {} candidates", ranked.len())),
    }
}

pub fn hybrid_case(inst: &Instance, l: usize) -> Result<bool, String> {
    let ranked = super::hybrid(inst, l);
    match optimize_hybrid(&inst.model(), &inst.population(1.0), inst.m, l, &exp1(), &inst.loads) {
        Ok(r) => agrees(&ranked, r.revenue, &key_of(inst, &r)).map(|_| true),
        Err(Error::NoFeasibleCandidate(_)) if ranked.is_empty() => Ok(false),
        Err(e) => Err(format!("optimizer failed: {e}; oracle has {} candidates", ranked.len())),
    }
}
