//! Prices a three-SLA menu from its thresholds and delays, shows which SLA
//! every type picks, and checks that no type gains by misreporting.

use qosdiff::mechanism::{arrival_rates, assign_sla, revenue, segment, verify_dsic};
use qosdiff::{Segmentation, SlaMenu, TypePopulation, WtpModel};

fn main() -> qosdiff::Result<()> {
    let model = WtpModel::reference();
    let pop = TypePopulation::grid(50, 0.02, 1e-6, 12.0)?;
    let seg = Segmentation::from_cuts(pop.len(), &[10, 25])?;
    let menu = SlaMenu::priced(&model, seg.thresholds(&pop), vec![0.05, 0.12, 0.25])?;
    println!("delays {:?}", menu.delays());
    println!("prices {:.4?}", menu.prices());

    for i in [0, 8, 9, 23, 24, 49] {
        let a = pop.alpha(i);
        println!("type {:>2} (phi0 {:.3}) picks SLA {}", i + 1, 1.0 / a + 0.05, assign_sla(&model, a, &menu));
    }
    let chosen = segment(&model, &pop, &menu)?;
    let rates = arrival_rates(&pop, &chosen);
    println!("segments start at {:?}, rates {:.3?}", chosen.cuts(), rates);
    println!("revenue {:.4}", revenue(menu.prices(), &rates, pop.mean_service())?);

    let report = verify_dsic(&model, &pop, &menu);
    println!("truthful: {} over {} report pairs", report.truthful, report.pairs_checked);
    let probe = verify_dsic(&model, &pop, &menu.with_price_shift(2, 0.01)?);
    println!("after raising p_2 by 0.01: truthful {}, worst gain {:.4}", probe.truthful, probe.worst_violation);
    Ok(())
}
