//! Reading study summaries from CSV and writing one JSON record per study,
//! the same path the `compute` command takes.
//!
//! cargo run --example csv_compute

use wscov::tables::{read_multiarm, read_multioutcome, read_pairs, result_record};
use wscov::{assemble_cov_matrix, AssembleOptions, Method, Mode};

const ARMS: &str = "\
study_id,arm_id,n,mean,sd
trial-a,control,40,5.1,1.9
trial-a,low,38,5.9,2.0
trial-a,high,41,6.6,2.2
trial-b,control,25,0.0,1.0
trial-b,drug,24,0.45,1.1
";

const OUTCOMES: &str = "\
study_id,outcome_id,arm,n,mean,sd
cohort,pain,t,30,3.2,1.5
cohort,pain,c,30,4.0,1.4
cohort,function,t,30,61.0,12.0
cohort,function,c,30,55.5,11.0
";

const PAIRS: &str = "\
study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c
cohort,pain,function,-0.45,30,30
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let options = AssembleOptions::new(Mode::Plugin);
    for record in read_multiarm(ARMS.as_bytes())? {
        let study = record.to_study(Mode::Plugin)?;
        let (effects, cov) = assemble_cov_matrix(&study.into(), Method::MultiArmNovel, &options)?;
        println!(
            "{}",
            result_record(&record.study_id, &record.arm_ids, Method::MultiArmNovel, Mode::Plugin, &effects, &cov)
        );
    }

    let studies = read_multioutcome(OUTCOMES.as_bytes())?;
    let pairs = read_pairs(PAIRS.as_bytes())?;
    pairs.check_against(&studies)?;
    for record in &studies {
        let (effects, cov) = assemble_cov_matrix(&record.to_study(&pairs)?.into(), Method::TwoOutcome, &options)?;
        println!(
            "{}",
            result_record(&record.study_id, &record.outcome_ids, Method::TwoOutcome, Mode::Plugin, &effects, &cov)
        );
    }

    // Schema problems carry the line and column.
    let bad = "study_id,arm_id,n,mean,sd\nx,control,1,0.0,1.0\nx,t,10,0.2,1.0\n";
    println!("rejected: {}", read_multiarm(bad.as_bytes()).unwrap_err());
    Ok(())
}
