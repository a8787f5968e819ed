//! Shared-control covariance: the Wei-style and the novel approximation side
//! by side, and a full matrix for a four-arm trial.
//!
//! cargo run --example multi_arm_methods

use wscov::engine::{cov_g_multiarm_novel, cov_g_multiarm_wei, cov_md_shared_control};
use wscov::{assemble_cov_matrix, AssembleOptions, Dof, GroupSummary, Method, Mode, MultiArmStudy};

fn main() -> wscov::Result<()> {
    println!("Cov(MD_k, MD_k') = sigma^2/n_c = {} for sigma = 1, n_c = 20", cov_md_shared_control(1.0, 20)?);

    println!("\nnull design, three groups of n:");
    println!("{:>5} {:>5} {:>10} {:>10} {:>8}", "n", "v", "wei", "novel", "gap");
    for n in [20u32, 51, 168] {
        let v = Dof::new(3 * n - 3)?;
        let wei = cov_g_multiarm_wei(0.0, 0.0, n, v)?;
        let novel = cov_g_multiarm_novel(0.0, 0.0, n, v)?;
        println!("{n:>5} {v:>5} {wei:>10.6} {novel:>10.6} {:>7.2}%", 100.0 * (wei - novel) / wei);
    }

    let control = GroupSummary::new(30, 10.0, 2.1)?;
    let arms = vec![
        GroupSummary::new(28, 11.2, 2.4)?,
        GroupSummary::new(31, 10.4, 1.9)?,
        GroupSummary::new(29, 12.0, 2.2)?,
    ];
    let study = MultiArmStudy::from_summaries(control, arms)?;
    for method in [Method::MultiArmNovel, Method::MultiArmWei] {
        let (effects, cov) = assemble_cov_matrix(&study.clone().into(), method, &AssembleOptions::new(Mode::Plugin))?;
        println!("\n{method}: g = {:.4?}, v = {}", effects.g, effects.dof[0]);
        for r in 0..cov.dim() {
            let row: Vec<String> = (0..cov.dim()).map(|c| format!("{:>9.5}", cov.get(r, c))).collect();
            println!("  {}", row.join(" "));
        }
        println!("  eigenvalues {:.5?}", cov.eigenvalues());
    }
    Ok(())
}
