//! Analytic effect sizes and delta-method covariances.
//!
//! Two designs are covered:
//!
//! * multiple outcomes measured on (partly) the same treatment and control
//!   subjects, with within-subject correlation `rho` between outcomes;
//! * several treatment arms compared against one shared control arm.
//!
//! Every covariance here is a first-order (delta-method) approximation in
//! the population standardized differences `delta = (mu_t - mu_c) / sigma`.
//! Its error relative to the exact finite-sample moment is O(1/v).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc_oracle::{self, SimConfig};
use crate::model::{
    CovMatrix, EffectVector, Mode, MultiArmStudy, MultiOutcomeStudy, PooledGroups,
    TwoOutcomeStudy,
};
use crate::special::{bias_correction, inv_sd_variance, Dof};

/// Which covariance approximation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Multiple outcomes, one treatment and one control.
    #[serde(rename = "two-outcome")]
    TwoOutcome,
    /// Shared control, delta method in (MD, 1/s_p, MD') with exact inverse moments.
    #[serde(rename = "wei")]
    MultiArmWei,
    /// Shared control, delta method in (MD, s_p^2, MD').
    #[serde(rename = "novel")]
    MultiArmNovel,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::TwoOutcome => "two-outcome",
            Method::MultiArmWei => "wei",
            Method::MultiArmNovel => "novel",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-outcome" => Ok(Method::TwoOutcome),
            "wei" => Ok(Method::MultiArmWei),
            "novel" => Ok(Method::MultiArmNovel),
            other => Err(Error::Invalid(format!(
                "unknown method '{other}' (expected novel, wei or two-outcome)"
            ))),
        }
    }
}

/// A study in either supported design.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    MultiArm(MultiArmStudy),
    MultiOutcome(MultiOutcomeStudy),
}

impl Design {
    pub fn kind(&self) -> &'static str {
        match self {
            Design::MultiArm(_) => "multi-arm",
            Design::MultiOutcome(_) => "multi-outcome",
        }
    }
}

impl From<MultiArmStudy> for Design {
    fn from(s: MultiArmStudy) -> Self {
        Design::MultiArm(s)
    }
}

impl From<MultiOutcomeStudy> for Design {
    fn from(s: MultiOutcomeStudy) -> Self {
        Design::MultiOutcome(s)
    }
}

impl From<TwoOutcomeStudy> for Design {
    fn from(s: TwoOutcomeStudy) -> Self {
        Design::MultiOutcome(s.into())
    }
}

/// Monte Carlo budget for resolving an unknown k factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KEstimation {
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleOptions {
    pub mode: Mode,
    /// When set, a partially overlapping pair with no supplied k gets a
    /// simulated k instead of a [`Error::KRequired`] failure.
    pub k_estimation: Option<KEstimation>,
}

impl AssembleOptions {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            k_estimation: None,
        }
    }
}

fn check_positive(op: &'static str, name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(op, format!("{name} must be finite and > 0, got {x}")))
    }
}

fn check_count(op: &'static str, name: &str, n: u32) -> Result<()> {
    if n == 0 {
        Err(domain(op, format!("{name} must be >= 1")))
    } else {
        Ok(())
    }
}

fn check_finite(op: &'static str, name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(domain(op, format!("{name} must be finite, got {x}")))
    }
}

/// Hedges' g: `J(v) (mean_t - mean_c) / s_pooled`.
pub fn hedges_g(mean_t: f64, mean_c: f64, s_pooled: f64, v: Dof) -> Result<f64> {
    check_positive("hedges_g", "s_pooled", s_pooled)?;
    check_finite("hedges_g", "mean_t", mean_t)?;
    check_finite("hedges_g", "mean_c", mean_c)?;
    Ok(bias_correction(v) * (mean_t - mean_c) / s_pooled)
}

/// `J(v)^2 (1/n_t + 1/n_c + delta^2 / (2v))`.
pub fn var_g_two_group(delta: f64, n_t: u32, n_c: u32, v: Dof) -> Result<f64> {
    check_finite("var_g_two_group", "delta", delta)?;
    check_count("var_g_two_group", "n_t", n_t)?;
    check_count("var_g_two_group", "n_c", n_c)?;
    let j = bias_correction(v);
    let inv_n = 1.0 / f64::from(n_t) + 1.0 / f64::from(n_c);
    Ok(j * j * (inv_n + delta * delta / (2.0 * v.as_f64())))
}

/// Covariance of the two mean differences, from the subjects both
/// outcomes share.
pub fn cov_md_two_outcomes(study: &TwoOutcomeStudy, sigma_j: f64, sigma_jprime: f64) -> f64 {
    let (a, b, l) = (&study.outcome_j, &study.outcome_jprime, &study.link);
    let shared_t = f64::from(l.overlap_t) / (f64::from(a.treatment.n) * f64::from(b.treatment.n));
    let shared_c = f64::from(l.overlap_c) / (f64::from(a.control.n) * f64::from(b.control.n));
    l.rho * (shared_t + shared_c) * sigma_j * sigma_jprime
}

/// `Cov(s_jp^2, s_j'p^2) = rho^2 sigma_j^2 sigma_j'^2 k`.
pub fn cov_pooledvar_two_outcomes(rho: f64, sigma_j: f64, sigma_jprime: f64, k_factor: f64) -> f64 {
    rho * rho * sigma_j * sigma_j * sigma_jprime * sigma_jprime * k_factor
}

/// k under full overlap: `2 / v`, which makes `Cov(s_p^2, s_p^2)` at
/// `rho = 1` equal `Var(s_p^2) = 2 sigma^4 / v`.
pub fn k_full_overlap(v: Dof) -> f64 {
    2.0 / v.as_f64()
}

/// Resolves k from the study alone: an explicit value, else the full
/// overlap closed form. `None` when neither applies.
pub fn resolve_k(study: &TwoOutcomeStudy) -> Option<f64> {
    study.link.k_factor.or_else(|| {
        study
            .is_full_overlap()
            .then(|| k_full_overlap(study.outcome_j.degrees_of_freedom()))
    })
}

/// `Cov(g_j, g_j')` between two outcomes of one study.
///
/// ```text
/// rho J(v_j) J(v_j') ( n_jj'^t / (n_j^t n_j'^t) + n_jj'^c / (n_j^c n_j'^c)
///                      + rho k delta_j delta_j' / 4 )
/// ```
///
/// At `rho = 0` the result is exactly zero and k is not needed.
pub fn cov_g_two_outcomes(
    study: &TwoOutcomeStudy,
    delta_j: f64,
    delta_jprime: f64,
    sigma_j: f64,
    sigma_jprime: f64,
) -> Result<f64> {
    study.check()?;
    check_positive("cov_g_two_outcomes", "sigma_j", sigma_j)?;
    check_positive("cov_g_two_outcomes", "sigma_jprime", sigma_jprime)?;
    check_finite("cov_g_two_outcomes", "delta_j", delta_j)?;
    check_finite("cov_g_two_outcomes", "delta_jprime", delta_jprime)?;
    let rho = study.link.rho;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let k = resolve_k(study).ok_or(Error::KRequired)?;
    let j_a = bias_correction(study.outcome_j.degrees_of_freedom());
    let j_b = bias_correction(study.outcome_jprime.degrees_of_freedom());
    let scale = sigma_j * sigma_jprime;
    let cov_md = cov_md_two_outcomes(study, sigma_j, sigma_jprime);
    let cov_var = cov_pooledvar_two_outcomes(rho, sigma_j, sigma_jprime, k);
    Ok(j_a * j_b * (cov_md / scale + delta_j * delta_jprime / (4.0 * scale * scale) * cov_var))
}

/// `Cov(MD^k, MD^k') = sigma^2 / n_c` for two arms sharing one control.
/// Holds for any distribution with variance `sigma^2`.
pub fn cov_md_shared_control(sigma: f64, n_c: u32) -> Result<f64> {
    check_positive("cov_md_shared_control", "sigma", sigma)?;
    if n_c < 2 {
        return Err(domain("cov_md_shared_control", format!("n_c must be >= 2, got {n_c}")));
    }
    Ok(sigma * sigma / f64::from(n_c))
}

/// Wei-style covariance between two distinct arms:
/// `J^2 (delta_k delta_k' (v/(v-2) - 1/J^2) + 1/(n_c J^2))`.
pub fn cov_g_multiarm_wei(delta_k: f64, delta_kprime: f64, n_c: u32, v: Dof) -> Result<f64> {
    check_finite("cov_g_multiarm_wei", "delta_k", delta_k)?;
    check_finite("cov_g_multiarm_wei", "delta_kprime", delta_kprime)?;
    check_count("cov_g_multiarm_wei", "n_c", n_c)?;
    let excess = inv_sd_variance(v, 1.0)?;
    let j2 = bias_correction(v).powi(2);
    Ok(j2 * delta_k * delta_kprime * excess + 1.0 / f64::from(n_c))
}

/// Wei-style variance: `(1/n_tk + 1/n_c) + J^2 delta^2 (v/(v-2) - 1/J^2)`.
pub fn var_g_multiarm_wei(delta_k: f64, n_tk: u32, n_c: u32, v: Dof) -> Result<f64> {
    check_finite("var_g_multiarm_wei", "delta_k", delta_k)?;
    check_count("var_g_multiarm_wei", "n_tk", n_tk)?;
    check_count("var_g_multiarm_wei", "n_c", n_c)?;
    let excess = inv_sd_variance(v, 1.0)?;
    let j2 = bias_correction(v).powi(2);
    Ok(1.0 / f64::from(n_tk) + 1.0 / f64::from(n_c) + j2 * delta_k * delta_k * excess)
}

/// Covariance between two distinct arms: `J^2 (delta_k delta_k' / (2v) + 1/n_c)`.
pub fn cov_g_multiarm_novel(delta_k: f64, delta_kprime: f64, n_c: u32, v: Dof) -> Result<f64> {
    check_finite("cov_g_multiarm_novel", "delta_k", delta_k)?;
    check_finite("cov_g_multiarm_novel", "delta_kprime", delta_kprime)?;
    check_count("cov_g_multiarm_novel", "n_c", n_c)?;
    let j2 = bias_correction(v).powi(2);
    Ok(j2 * (delta_k * delta_kprime / (2.0 * v.as_f64()) + 1.0 / f64::from(n_c)))
}

/// Same form as [`var_g_two_group`] with the multi-arm dof.
pub fn var_g_multiarm_novel(delta_k: f64, n_tk: u32, n_c: u32, v: Dof) -> Result<f64> {
    var_g_two_group(delta_k, n_tk, n_c, v)
}

/// Computes the effect vector and within-study covariance matrix of a study.
///
/// In truth mode `delta = (mu_t - mu_c) / sigma` with the supplied common
/// SD. In plugin mode `delta = g / J(v)` and sigma is the pooled SD.
pub fn assemble_cov_matrix(
    design: &Design,
    method: Method,
    options: &AssembleOptions,
) -> Result<(EffectVector, CovMatrix)> {
    match (design, method) {
        (Design::MultiArm(study), Method::MultiArmWei | Method::MultiArmNovel) => {
            assemble_multiarm(study, method, options.mode)
        }
        (Design::MultiOutcome(study), Method::TwoOutcome) => assemble_multioutcome(study, options),
        (d, m) => Err(Error::MethodMismatch {
            method: m.tag(),
            design: d.kind(),
        }),
    }
}

fn assemble_multiarm(
    study: &MultiArmStudy,
    method: Method,
    mode: Mode,
) -> Result<(EffectVector, CovMatrix)> {
    study.check()?;
    let v = study.degrees_of_freedom();
    let j = bias_correction(v);
    let sigma = match mode {
        Mode::Truth => study.sigma,
        Mode::Plugin => study.pooled_sd(),
    };
    let g = study
        .arms
        .iter()
        .map(|arm| hedges_g(arm.mean, study.control.mean, sigma, v))
        .collect::<Result<Vec<f64>>>()?;
    let delta: Vec<f64> = match mode {
        Mode::Truth => study
            .arms
            .iter()
            .map(|arm| (arm.mean - study.control.mean) / sigma)
            .collect(),
        Mode::Plugin => g.iter().map(|gk| gk / j).collect(),
    };
    let n_c = study.control.n;
    let cov = CovMatrix::validated(study.n_arms(), |r, c| {
        let n_r = study.arms[r].n;
        match (method, r == c) {
            (Method::MultiArmWei, true) => var_g_multiarm_wei(delta[r], n_r, n_c, v),
            (Method::MultiArmWei, false) => cov_g_multiarm_wei(delta[r], delta[c], n_c, v),
            (_, true) => var_g_multiarm_novel(delta[r], n_r, n_c, v),
            (_, false) => cov_g_multiarm_novel(delta[r], delta[c], n_c, v),
        }
    })?;
    let effects = EffectVector {
        dof: vec![v; g.len()],
        j_factor: vec![j; g.len()],
        g,
    };
    Ok((effects, cov))
}

fn assemble_multioutcome(
    study: &MultiOutcomeStudy,
    options: &AssembleOptions,
) -> Result<(EffectVector, CovMatrix)> {
    let outcomes = study.outcomes();
    let mut g = Vec::with_capacity(outcomes.len());
    let mut dof = Vec::with_capacity(outcomes.len());
    let mut j_factor = Vec::with_capacity(outcomes.len());
    let mut sigma = Vec::with_capacity(outcomes.len());
    let mut delta = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let v = o.degrees_of_freedom();
        let j = bias_correction(v);
        let s = match options.mode {
            Mode::Truth => o.common_sd()?,
            Mode::Plugin => o.pooled_sd(),
        };
        let gk = hedges_g(o.treatment.mean, o.control.mean, s, v)?;
        delta.push(match options.mode {
            Mode::Truth => o.mean_difference() / s,
            Mode::Plugin => gk / j,
        });
        g.push(gk);
        dof.push(v);
        j_factor.push(j);
        sigma.push(s);
    }
    let cov = CovMatrix::validated(outcomes.len(), |r, c| {
        if r == c {
            let o = &outcomes[r];
            return var_g_two_group(delta[r], o.treatment.n, o.control.n, dof[r]);
        }
        let mut pair = study.pair(r, c);
        if pair.link.rho != 0.0 && resolve_k(&pair).is_none() {
            let budget = options.k_estimation.ok_or(Error::KRequired)?;
            let config = SimConfig::new(pair.into(), budget.replicates, budget.seed)?;
            pair.link.k_factor = Some(mc_oracle::estimate_k(&config)?.value.max(0.0));
        }
        cov_g_two_outcomes(&pair, delta[r], delta[c], sigma[r], sigma[c])
    })?;
    Ok((EffectVector { g, dof, j_factor }, cov))
}
