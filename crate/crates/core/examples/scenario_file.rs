//! Loads a scenario file, or a preset, and runs the optimize command on it.
//!
//! Usage: cargo run --release --example scenario_file -- [path.toml]

use qosdiff::cli::cmd_optimize;
use qosdiff::scenario::{load_scenario, preset};

fn main() -> qosdiff::Result<()> {
    let mut sc = match std::env::args().nth(1) {
        Some(path) => load_scenario(path.as_ref())?,
        None => {
            let mut sc = preset("paper-high")?;
            sc.loads = vec![0.1, 0.11, 0.12, 0.13, 0.14];
            sc
        }
    };
    if sc.out_dir.as_os_str().is_empty() || sc.out_dir == std::path::Path::new("results") {
        sc.out_dir = std::env::temp_dir().join("qosdiff-scenario-example");
    }
    println!("scenario {}", sc.hash());
    println!("{}", sc.canonical);
    let out = cmd_optimize(&sc)?;
    for row in &out.rows {
        match &row.result {
            Some(r) => println!("lambda {:.2}: gamma {:.4}, prices {:.4?}", row.load, r.gamma, r.menu.prices()),
            None => println!("lambda {:.2}: {}", row.load, row.gap.as_deref().unwrap_or("infeasible")),
        }
    }
    println!("tables in {}", sc.out_dir.display());
    Ok(())
}
