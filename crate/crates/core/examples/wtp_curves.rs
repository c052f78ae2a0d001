//! Willingness to pay against delay for a few customer types.
//!
//! Usage: cargo run --example wtp_curves -- [beta]

use qosdiff::{CustomerType, WtpModel};

fn main() -> qosdiff::Result<()> {
    let beta: f64 = std::env::args().nth(1).map_or(3.0, |a| a.parse().expect("beta must be a number"));
    let model = WtpModel::new(1.0, 0.05, beta)?;
    // Zero-value delays 0.1, 0.3, 0.55 and 1.05.
    let types: Vec<CustomerType> =
        [0.05, 0.25, 0.5, 1.0].iter().map(|&o| CustomerType::from_zero_value_offset(o)).collect::<Result<_, _>>()?;

    print!("{:>6}", "phi");
    for t in &types {
        print!("{:>10}", format!("phi0={:.2}", t.phi0(&model)));
    }
    println!();
    for i in 0..=20 {
        let phi = 0.05 + 0.05 * i as f64;
        print!("{phi:>6.2}");
        for t in &types {
            // Past its zero-value delay a type would not buy at any price.
            let u = if phi <= t.phi0(&model) { model.wtp(t.alpha, phi)? } else { f64::NAN };
            print!("{u:>10.4}");
        }
        println!();
    }
    Ok(())
}
