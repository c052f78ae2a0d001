//! Load sweeps: one optimization per per-server load on a fixed server count.

use super::{evaluate_od, optimize_hybrid, optimize_pbs, optimize_sms_with, ArchKind, OptResult, SearchOptions};
use crate::error::{Error, Result};
use crate::model::{TypePopulation, WtpModel};
use crate::queueing::ServiceDist;

/// Per-server loads 0.05, 0.06, .., 0.30.
pub fn default_load_grid() -> Vec<f64> {
    (5..=30).map(|i| i as f64 / 100.0).collect()
}

/// One grid point; `result` is `None` and `gap` says why when nothing is feasible.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub load: f64,
    pub result: Option<OptResult>,
    pub gap: Option<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_load(
    model: &WtpModel,
    template: &TypePopulation,
    m: usize,
    l: usize,
    arch: ArchKind,
    dist: &ServiceDist,
    loads: &[f64],
    opts: &SearchOptions,
) -> Result<Vec<SweepRow>> {
    loads
        .iter()
        .map(|&load| {
            if !(load > 0.0 && load < 1.0) {
                return Err(Error::InvalidParameter(format!("grid loads must lie in (0, 1) (got {load})")));
            }
            let pop = template.with_total_rate(load * m as f64)?;
            let outcome = match arch {
                ArchKind::Sms => optimize_sms_with(model, &pop, m, l, dist, opts),
                ArchKind::Pbs => optimize_pbs(model, &pop, m, l, dist, &[load]),
                ArchKind::Hybrid => optimize_hybrid(model, &pop, m, l, dist, &[load]),
                ArchKind::Od => evaluate_od(model, &pop, m, dist).and_then(|e| match e.into_feasible() {
                    Some(r) => Ok(r),
                    None => Err(Error::NoFeasibleCandidate(format!("on-demand service cannot keep T at load {load}"))),
                }),
            };
            match outcome {
                Ok(r) => Ok(SweepRow { load, result: Some(r), gap: None }),
                Err(Error::NoFeasibleCandidate(why)) => Ok(SweepRow { load, result: None, gap: Some(why) }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Row with the highest revenue ratio; the smaller load wins ties.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().filter(|r| r.result.is_some()).fold(None, |best: Option<&SweepRow>, r| match best {
        Some(b) if b.result.as_ref().map(|x| x.gamma) >= r.result.as_ref().map(|x| x.gamma) => Some(b),
        _ => Some(r),
    })
}
