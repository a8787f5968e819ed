//! Simulated k factors for partially overlapping outcomes, fed back into the
//! analytic covariance.
//!
//! cargo run --release --example estimate_k

use wscov::engine::{cov_g_two_outcomes, k_full_overlap};
use wscov::mc_oracle::estimate_k;
use wscov::{GroupSummary, OutcomeLink, PooledGroups, SimConfig, TwoGroup, TwoOutcomeStudy};

fn main() -> wscov::Result<()> {
    let n = 20;
    let outcome = |d: f64| TwoGroup::new(GroupSummary::new(n, d, 1.0)?, GroupSummary::new(n, 0.0, 1.0)?);
    let (y1, y2) = (outcome(0.4)?, outcome(0.6)?);
    println!("full-overlap k = 2/v = {:.6}", k_full_overlap(y1.degrees_of_freedom()));
    println!("{:>8} {:>10} {:>10} {:>12}", "overlap", "k", "se", "Cov(g1, g2)");
    for overlap in [0, 5, 10, 15, 20] {
        let link = OutcomeLink {
            rho: 0.6,
            overlap_t: overlap,
            overlap_c: overlap,
            k_factor: None,
        };
        let study = TwoOutcomeStudy::new(y1, y2, link)?;
        let k = estimate_k(&SimConfig::new(study.into(), 50_000, u64::from(overlap))?)?;
        // With no shared subjects the true k is 0 and the estimate is noise
        // around it.
        let with_k = TwoOutcomeStudy::new(y1, y2, OutcomeLink { k_factor: Some(k.value.max(0.0)), ..link })?;
        println!(
            "{overlap:>8} {:>10.6} {:>10.6} {:>12.6}",
            k.value,
            k.std_error,
            cov_g_two_outcomes(&with_k, 0.4, 0.6, 1.0, 1.0)?
        );
    }
    Ok(())
}
