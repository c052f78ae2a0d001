//! Writes the data table behind one figure and prints it.
//!
//! Usage: cargo run --release --example reproduce_figure -- [figure] [max L]
//!
//! Figures: fig3, fig4, fig6, fig7, fig8, fig9, appendix.

use qosdiff::cli::{cmd_reproduce, Figure, ReproduceOptions};
use qosdiff::scenario::DEFAULT_BEST_EFFORT_BUDGET;

fn main() -> qosdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let fig: Figure = args.next().as_deref().unwrap_or("fig3").parse()?;
    let opts = ReproduceOptions {
        out_dir: std::env::temp_dir().join("qosdiff-figures"),
        max_l: args.next().map(|a| a.parse().expect("L must be an integer")),
        budget: DEFAULT_BEST_EFFORT_BUDGET,
    };
    let (table, written) = cmd_reproduce(fig, &opts)?;
    println!("{}", table.header.join(","));
    for row in &table.rows {
        println!("{}", row.join(","));
    }
    println!("wrote {}", written.tables[0].display());
    Ok(())
}
