//! Covariance of g across two outcomes measured on overlapping subjects.
//!
//! cargo run --example two_outcome_covariance

use wscov::engine::{cov_g_two_outcomes, k_full_overlap, var_g_two_group};
use wscov::{
    assemble_cov_matrix, AssembleOptions, GroupSummary, Method, Mode, MultiOutcomeStudy, OutcomeLink,
    PooledGroups, TwoGroup, TwoOutcomeStudy,
};

fn arm_pair(n: u32, delta: f64, sigma: f64) -> wscov::Result<TwoGroup> {
    TwoGroup::new(GroupSummary::new(n, delta * sigma, sigma)?, GroupSummary::new(n, 0.0, sigma)?)
}

fn main() -> wscov::Result<()> {
    let n = 20;
    let (y1, y2) = (arm_pair(n, 0.4, 1.0)?, arm_pair(n, 0.6, 1.0)?);
    let v = y1.degrees_of_freedom();
    println!("n = {n} per arm, v = {v}, full-overlap k = 2/v = {:.6}", k_full_overlap(v));

    println!("{:>5} {:>12}", "rho", "Cov(g1, g2)");
    for rho in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let link = OutcomeLink {
            rho,
            overlap_t: n,
            overlap_c: n,
            k_factor: None,
        };
        let study = TwoOutcomeStudy::new(y1, y2, link)?;
        println!("{rho:>5} {:>12.6}", cov_g_two_outcomes(&study, 0.4, 0.6, 1.0, 1.0)?);
    }

    // One outcome paired with itself reduces to the two-group variance.
    let same = TwoOutcomeStudy::new(
        y1,
        y1,
        OutcomeLink {
            rho: 1.0,
            overlap_t: n,
            overlap_c: n,
            k_factor: None,
        },
    )?;
    println!(
        "self-covariance {:.12} vs var_g_two_group {:.12}",
        cov_g_two_outcomes(&same, 0.4, 0.4, 1.0, 1.0)?,
        var_g_two_group(0.4, n, n, v)?
    );

    // Three outcomes; the y1-y3 pair shares only half the subjects, so it
    // needs an explicit k.
    let y3 = arm_pair(n, 0.1, 2.0)?;
    let study = MultiOutcomeStudy::new(vec![y1, y2, y3], |a, b| {
        Ok(match (a, b) {
            (0, 1) => OutcomeLink { rho: 0.5, overlap_t: n, overlap_c: n, k_factor: None },
            (1, 2) => OutcomeLink { rho: 0.2, overlap_t: n, overlap_c: n, k_factor: None },
            _ => OutcomeLink { rho: 0.4, overlap_t: n / 2, overlap_c: n / 2, k_factor: Some(0.013) },
        })
    })?;
    let (effects, cov) = assemble_cov_matrix(&study.into(), Method::TwoOutcome, &AssembleOptions::new(Mode::Truth))?;
    println!("g = {:?}", effects.g);
    for r in 0..cov.dim() {
        let row: Vec<String> = (0..cov.dim()).map(|c| format!("{:>10.6}", cov.get(r, c))).collect();
        println!("{}", row.join(" "));
    }
    Ok(())
}
