//! Hedges' bias correction J(v) and the inverse pooled-SD moments built on it.
//!
//! cargo run --example bias_correction

use wscov::special::{bias_correction, inv_sd_mean, inv_sd_variance, inv_var_mean};
use wscov::Dof;

fn main() -> wscov::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12}", "v", "J(v)", "1-3/(4v-1)", "E(1/s)", "E(1/s^2)", "Var(1/s)");
    for v in [3u32, 5, 10, 20, 38, 57, 100, 500, 10_000] {
        let d = Dof::new(v)?;
        let classical = 1.0 - 3.0 / (4.0 * f64::from(v) - 1.0);
        println!(
            "{v:>6} {:>12.9} {:>12.9} {:>12.9} {:>12.9} {:>12.3e}",
            bias_correction(d),
            classical,
            inv_sd_mean(d, 1.0)?,
            inv_var_mean(d, 1.0)?,
            inv_sd_variance(d, 1.0)?,
        );
    }
    // v = 2 has a finite J but no finite E(1/s^2).
    let two = Dof::new(2)?;
    println!("J(2) = {:.15} (1/sqrt(pi) = {:.15})", bias_correction(two), 1.0 / std::f64::consts::PI.sqrt());
    println!("E(1/s^2) at v = 2: {}", inv_var_mean(two, 1.0).unwrap_err());
    Ok(())
}
