//! Evaluates one fixed four-SLA configuration under separated modules and
//! under the hybrid split, and compares their revenue.

use qosdiff::cli::replay;

fn main() -> qosdiff::Result<()> {
    let (sms, hyb) = replay()?;
    for (name, r) in [("separated modules, Lambda = 12", &sms), ("hybrid, Lambda = 10", &hyb)] {
        println!("{name}");
        println!("  cuts     {:?}", r.segmentation.cuts());
        println!("  rates    {:.3?}", r.rates);
        println!("  waits    {:.4?}", r.delays.0);
        println!("  prices   {:.4?}", r.menu.prices());
        println!("  revenue  {:.4} (gamma {:.4})", r.revenue, r.gamma);
    }
    println!("hybrid / separated revenue: {:.4}", hyb.revenue / sms.revenue);
    Ok(())
}
