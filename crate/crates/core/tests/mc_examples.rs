//! Simulation checks of individual operations, each at 3 Monte Carlo
//! standard errors.

use wscov::engine::{
    cov_g_multiarm_novel, cov_g_two_outcomes, k_full_overlap, var_g_multiarm_novel, var_g_two_group,
};
use wscov::mc_oracle::{
    collect, compare, empirical_cov_g, empirical_cov_md, empirical_g_moments, estimate_k, full_overlap_design,
    pooled_sd_moments, validate, Sample,
};
use wscov::special::{bias_correction, inv_sd_mean, inv_sd_variance};
use wscov::{
    assemble_cov_matrix, AssembleOptions, CovMatrix, Dof, Generator, GroupSummary, McEstimate, Method, Mode,
    MultiArmStudy, OutcomeLink, PooledGroups, SimConfig, TwoGroup, TwoOutcomeStudy,
};

const TOL: f64 = 3.0;

fn dof(v: u32) -> Dof {
    Dof::new(v).unwrap()
}

fn multiarm(sigma: f64, means: &[f64], sizes: &[u32]) -> MultiArmStudy {
    let control = GroupSummary::new(sizes[0], 0.0, sigma).unwrap();
    let arms = means
        .iter()
        .zip(&sizes[1..])
        .map(|(&m, &n)| GroupSummary::new(n, m, sigma).unwrap())
        .collect();
    MultiArmStudy::new(control, arms, sigma).unwrap()
}

#[track_caller]
fn assert_within(est: McEstimate, target: f64) {
    assert!(
        est.within(target, TOL),
        "{} +- {} vs {target}: z = {:.2}",
        est.value,
        est.std_error,
        est.z_score(target)
    );
}

#[test]
fn inverse_sd_moments_at_v20() {
    let study = multiarm(1.0, &[0.0], &[11, 11]);
    assert_eq!(study.degrees_of_freedom(), dof(20));
    let m = pooled_sd_moments(&SimConfig::new(study.into(), 1_000_000, 60).unwrap()).unwrap();
    assert_within(m.inv_sd_mean, inv_sd_mean(dof(20), 1.0).unwrap());
    assert_within(m.inv_sd_variance, inv_sd_variance(dof(20), 1.0).unwrap());
}

#[test]
fn hedges_g_mean_is_delta() {
    let study = multiarm(1.0, &[0.5], &[10, 10]);
    let m = empirical_g_moments(&SimConfig::new(study.into(), 1_000_000, 204).unwrap());
    assert_within(m.mean(0), 0.5);
}

#[test]
fn var_g_two_group_against_simulation() {
    let mut failures = Vec::new();
    for (i, (n, delta)) in [(10u32, 0.0), (10, 0.8), (50, 0.0), (50, 0.8)].into_iter().enumerate() {
        let study = multiarm(1.0, &[delta], &[n, n]);
        let est = empirical_cov_g(&SimConfig::new(study.into(), 100_000, 214 + i as u64).unwrap()).get(0, 0);
        let formula = var_g_two_group(delta, n, n, dof(2 * n - 2)).unwrap();
        if !est.within(formula, TOL) {
            failures.push(format!("n={n} delta={delta}: z = {:.2}", est.z_score(formula)));
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn estimate_k_full_overlap_v38() {
    let study = full_overlap_design(20, 0.6, 0.4, 0.6).unwrap();
    let est = estimate_k(&SimConfig::new(study.into(), 100_000, 244).unwrap()).unwrap();
    assert_within(est, k_full_overlap(dof(38)));
}

#[test]
fn cov_g_two_outcomes_point_value_against_simulation() {
    let study = full_overlap_design(20, 0.5, 0.4, 0.6).unwrap();
    let formula = cov_g_two_outcomes(&study, 0.4, 0.6, 1.0, 1.0).unwrap();
    assert!((formula - 0.0488).abs() < 5e-5);
    let est = empirical_cov_g(&SimConfig::new(study.into(), 1_000_000, 254).unwrap()).get(1, 0);
    assert_within(est, formula);
}

#[test]
fn shared_control_covariance_under_shifted_exponential() {
    let study = multiarm(1.0, &[0.3, 0.7], &[10, 10, 10]);
    let config = SimConfig::with_generator(study.into(), 100_000, 264, Generator::ShiftedExponential).unwrap();
    assert_within(empirical_cov_md(&config).get(1, 0), 0.1);
}

#[test]
fn cov_g_multiarm_novel_point_value_against_simulation() {
    let formula = cov_g_multiarm_novel(0.5, 0.3, 20, dof(57)).unwrap();
    assert!((formula - 0.0500).abs() < 5e-5);
    let study = multiarm(1.0, &[0.5, 0.3], &[20, 20, 20]);
    let est = empirical_cov_g(&SimConfig::new(study.into(), 1_000_000, 293).unwrap()).get(1, 0);
    assert_within(est, formula);
}

#[test]
fn var_g_multiarm_novel_against_simulation() {
    let study = multiarm(1.0, &[0.5, 0.3], &[20, 20, 20]);
    let est = empirical_cov_g(&SimConfig::new(study.into(), 100_000, 304).unwrap()).get(0, 0);
    assert_within(est, var_g_multiarm_novel(0.5, 20, 20, dof(57)).unwrap());
}

fn md_moments(config: &SimConfig) -> wscov::mc_oracle::BatchMoments {
    collect(config, config.design.dim(), |sample, out| match sample {
        Sample::TwoOutcome(s) => {
            out[0] = s.outcome_j.mean_difference();
            out[1] = s.outcome_jprime.mean_difference();
        }
        Sample::MultiArm(s) => {
            for (o, arm) in out.iter_mut().zip(&s.arms) {
                *o = arm.mean - s.control.mean;
            }
        }
    })
}

#[test]
fn uncorrelated_outcomes_have_uncorrelated_mean_differences() {
    let study = full_overlap_design(20, 0.0, 0.4, 0.6).unwrap();
    let m = md_moments(&SimConfig::new(study.into(), 100_000, 371).unwrap());
    let corr = m.estimate(|a| a.cov(0, 1) / (a.cov(0, 0) * a.cov(1, 1)).sqrt());
    assert_within(corr, 0.0);
}

#[test]
fn null_multiarm_simulation_moments() {
    let (sigma, n_c) = (2.0, 15u32);
    let study = multiarm(sigma, &[0.0, 0.0, 0.0], &[n_c, 12, 18, 15]);
    let v = study.degrees_of_freedom().as_f64();
    let config = SimConfig::new(study.into(), 100_000, 381).unwrap();
    let m = md_moments(&config);
    for k in 0..3 {
        assert_within(m.mean(k), 0.0);
    }
    assert_within(m.cov(2, 0), sigma * sigma / f64::from(n_c));
    let sd = pooled_sd_moments(&config).unwrap();
    assert_within(sd.var_variance, 2.0 * sigma.powi(4) / v);
}

#[test]
fn null_design_off_diagonal_matches_both_predictions() {
    let study = multiarm(1.0, &[0.0, 0.0], &[20, 20, 20]);
    let est = empirical_cov_g(&SimConfig::new(study.into(), 100_000, 391).unwrap()).get(1, 0);
    let j2 = bias_correction(dof(57)).powi(2);
    assert_within(est, 1.0 / 20.0);
    assert_within(est, j2 / 20.0);
}

#[test]
fn standard_error_scales_with_inverse_root_replicates() {
    let study = multiarm(1.0, &[0.4, 0.2], &[20, 20, 20]);
    let se = |r: usize| empirical_cov_g(&SimConfig::new(study.clone().into(), r, 392).unwrap()).get(1, 0).std_error;
    let (s1, s2, s4) = (se(50_000), se(100_000), se(200_000));
    let half = std::f64::consts::FRAC_1_SQRT_2;
    assert!(((s2 / s1) / half - 1.0).abs() < 0.2, "doubling: {s1} -> {s2}");
    assert!(((s4 / s1) / 0.5 - 1.0).abs() < 0.2, "quadrupling: {s1} -> {s4}");
}

#[test]
fn half_overlap_k_is_finite_positive_and_reusable() {
    let outcome = |d: f64| {
        TwoGroup::new(GroupSummary::new(20, d, 1.0).unwrap(), GroupSummary::new(20, 0.0, 1.0).unwrap()).unwrap()
    };
    let link = OutcomeLink {
        rho: 0.6,
        overlap_t: 10,
        overlap_c: 10,
        k_factor: None,
    };
    let study = TwoOutcomeStudy::new(outcome(0.4), outcome(0.6), link).unwrap();
    let k = estimate_k(&SimConfig::new(study.into(), 100_000, 402).unwrap()).unwrap();
    assert!(k.value.is_finite() && k.value > 0.0 && k.std_error > 0.0);
    // With half the subjects shared, k sits below the full-overlap 2/38.
    assert!(k.value < k_full_overlap(dof(38)));
    let supplied = TwoOutcomeStudy::new(outcome(0.4), outcome(0.6), OutcomeLink { k_factor: Some(k.value), ..link })
        .unwrap();
    let (_, cov) = assemble_cov_matrix(&supplied.into(), Method::TwoOutcome, &AssembleOptions::new(Mode::Truth)).unwrap();
    assert!(cov.get(1, 0) > 0.0);
}

#[test]
fn validate_flags_a_perturbed_formula() {
    let study = multiarm(1.0, &[0.2, 0.4], &[20, 20, 20]);
    let config = SimConfig::new(study.clone().into(), 20_000, 7).unwrap();
    let empirical = empirical_cov_g(&config);
    let (_, novel) =
        assemble_cov_matrix(&study.into(), Method::MultiArmNovel, &AssembleOptions::new(Mode::Truth)).unwrap();
    // Shift the off-diagonal by 10 standard errors.
    let shift = 10.0 * empirical.get(1, 0).std_error;
    let perturbed = CovMatrix::from_lower_fn(2, |r, c| novel.get(r, c) + if r != c { shift } else { 0.0 });
    let entries = compare(&[(Method::MultiArmNovel, perturbed)], &empirical, TOL);
    let off = entries.iter().find(|e| (e.row, e.col) == (1, 0)).unwrap();
    assert!(!off.checks[0].pass);
    assert!(off.checks[0].z.abs() > 5.0);
}

#[test]
fn validate_novel_on_null_design() {
    let study = multiarm(1.0, &[0.0, 0.0], &[20, 20, 20]);
    let report = validate(&SimConfig::new(study.into(), 100_000, 411).unwrap(), &[Method::MultiArmNovel], TOL).unwrap();
    assert!(report.passed(), "{report}");
}

#[test]
fn validate_two_outcome_full_overlap() {
    let study = full_overlap_design(20, 0.5, 0.4, 0.6).unwrap();
    let report = validate(&SimConfig::new(study.into(), 100_000, 412).unwrap(), &[Method::TwoOutcome], TOL).unwrap();
    assert!(report.passed(), "{report}");
}
