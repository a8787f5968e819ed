//! Simulation ground truth for every moment the analytic engines approximate.
//!
//! Raw per-subject data are drawn under the normal models (or a shifted
//! exponential alternative for the shared-control check), summarized per
//! arm, and the resulting statistics are accumulated in 100 equal batches.
//! Standard errors come from a leave-one-batch-out jackknife.
//!
//! Each replicate owns a ChaCha8 stream keyed by the master seed and
//! selected by the replicate index, so results depend only on
//! `(master_seed, replicates, design)`, never on thread scheduling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::engine::{self, AssembleOptions, Design, KEstimation, Method};
use crate::error::{domain, Error, Result};
use crate::model::{
    CovMatrix, GroupSummary, Mode, MultiArmStudy, OutcomeLink, PooledGroups, TwoGroup,
    TwoOutcomeStudy,
};
use crate::special::bias_correction;

pub const MIN_REPLICATES: usize = 100;
pub const BATCHES: usize = 100;

/// Distribution of individual outcomes around their arm mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    #[default]
    Normal,
    /// `mu + sigma (E - 1)` with `E ~ Exp(1)`: mean `mu`, variance `sigma^2`,
    /// skewness 2. Multi-arm designs only.
    ShiftedExponential,
}

/// Population design to simulate from.
#[derive(Debug, Clone, PartialEq)]
pub enum SimDesign {
    TwoOutcome(TwoOutcomeStudy),
    MultiArm(MultiArmStudy),
}

impl From<TwoOutcomeStudy> for SimDesign {
    fn from(s: TwoOutcomeStudy) -> Self {
        SimDesign::TwoOutcome(s)
    }
}

impl From<MultiArmStudy> for SimDesign {
    fn from(s: MultiArmStudy) -> Self {
        SimDesign::MultiArm(s)
    }
}

impl SimDesign {
    pub fn to_design(&self) -> Design {
        match self {
            SimDesign::TwoOutcome(s) => (*s).into(),
            SimDesign::MultiArm(s) => s.clone().into(),
        }
    }

    /// Number of effect sizes per replicate.
    pub fn dim(&self) -> usize {
        match self {
            SimDesign::TwoOutcome(_) => 2,
            SimDesign::MultiArm(s) => s.n_arms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: SimDesign,
    pub replicates: usize,
    pub master_seed: u64,
    pub generator: Generator,
}

impl SimConfig {
    pub fn new(design: SimDesign, replicates: usize, master_seed: u64) -> Result<Self> {
        Self::with_generator(design, replicates, master_seed, Generator::Normal)
    }

    pub fn with_generator(
        design: SimDesign,
        replicates: usize,
        master_seed: u64,
        generator: Generator,
    ) -> Result<Self> {
        if replicates < MIN_REPLICATES {
            return Err(Error::Invalid(format!(
                "at least {MIN_REPLICATES} replicates are required, got {replicates}"
            )));
        }
        match &design {
            SimDesign::TwoOutcome(s) => {
                s.check()?;
                if generator != Generator::Normal {
                    return Err(Error::Invalid(
                        "two-outcome designs can only be simulated with the normal generator".into(),
                    ));
                }
            }
            SimDesign::MultiArm(s) => s.check()?,
        }
        Ok(Self {
            design,
            replicates,
            master_seed,
            generator,
        })
    }
}

/// A Monte Carlo estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
}

impl McEstimate {
    /// `(analytic - value) / std_error`.
    pub fn z_score(&self, analytic: f64) -> f64 {
        let diff = analytic - self.value;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn within(&self, analytic: f64, tolerance_se: f64) -> bool {
        self.z_score(analytic).abs() <= tolerance_se
    }
}

/// Full square matrix of estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct McMatrix {
    dim: usize,
    entries: Vec<McEstimate>,
}

impl McMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> McEstimate {
        self.entries[row * self.dim + col]
    }
}

/// Counter-based stream for one replicate.
pub fn replicate_rng(master_seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate_index);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Running {
    n: u32,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / f64::from(self.n);
        self.m2 += d * (x - self.mean);
    }

    fn summary(&self) -> GroupSummary {
        GroupSummary {
            n: self.n,
            mean: self.mean,
            sd: (self.m2 / f64::from(self.n - 1)).sqrt(),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, generator: Generator) -> f64 {
    match generator {
        Generator::Normal => rng.sample(StandardNormal),
        Generator::ShiftedExponential => {
            let e: f64 = rng.sample(Exp1);
            e - 1.0
        }
    }
}

fn simulate_arm(rng: &mut ChaCha8Rng, n: u32, mean: f64, sd: f64, generator: Generator) -> GroupSummary {
    let mut acc = Running::default();
    for _ in 0..n {
        acc.push(mean + sd * draw(rng, generator));
    }
    acc.summary()
}

/// Two arms of two outcomes where the first `overlap` subjects carry both
/// outcomes with correlation `rho`; everyone else carries one outcome.
fn simulate_linked_arms(
    rng: &mut ChaCha8Rng,
    a: &GroupSummary,
    b: &GroupSummary,
    overlap: u32,
    rho: f64,
) -> (GroupSummary, GroupSummary) {
    let resid = (1.0 - rho * rho).max(0.0).sqrt();
    let (mut x, mut y) = (Running::default(), Running::default());
    for _ in 0..overlap {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        x.push(a.mean + a.sd * z1);
        y.push(b.mean + b.sd * (rho * z1 + resid * z2));
    }
    for _ in overlap..a.n {
        let z: f64 = rng.sample(StandardNormal);
        x.push(a.mean + a.sd * z);
    }
    for _ in overlap..b.n {
        let z: f64 = rng.sample(StandardNormal);
        y.push(b.mean + b.sd * z);
    }
    (x.summary(), y.summary())
}

/// One replicate of a two-outcome design, returned as sample summaries with
/// the truth link (rho, overlaps, k) carried over.
pub fn simulate_two_outcome_study(config: &SimConfig, replicate_index: u64) -> Result<TwoOutcomeStudy> {
    let SimDesign::TwoOutcome(truth) = &config.design else {
        return Err(Error::Invalid("configuration does not describe a two-outcome design".into()));
    };
    if !(truth.link.rho.abs() <= 1.0) {
        return Err(domain("simulate_two_outcome_study", format!("|rho| must be <= 1, got {}", truth.link.rho)));
    }
    Ok(two_outcome_replicate(truth, config.master_seed, replicate_index))
}

fn two_outcome_replicate(truth: &TwoOutcomeStudy, seed: u64, index: u64) -> TwoOutcomeStudy {
    let mut rng = replicate_rng(seed, index);
    let (a, b, l) = (&truth.outcome_j, &truth.outcome_jprime, &truth.link);
    let (ta, tb) = simulate_linked_arms(&mut rng, &a.treatment, &b.treatment, l.overlap_t, l.rho);
    let (ca, cb) = simulate_linked_arms(&mut rng, &a.control, &b.control, l.overlap_c, l.rho);
    TwoOutcomeStudy {
        outcome_j: TwoGroup {
            treatment: ta,
            control: ca,
        },
        outcome_jprime: TwoGroup {
            treatment: tb,
            control: cb,
        },
        link: *l,
    }
}

/// One replicate of a multi-arm design; `sigma` of the result is the
/// sample pooled SD.
pub fn simulate_multiarm_study(config: &SimConfig, replicate_index: u64) -> Result<MultiArmStudy> {
    let SimDesign::MultiArm(truth) = &config.design else {
        return Err(Error::Invalid("configuration does not describe a multi-arm design".into()));
    };
    Ok(multiarm_replicate(truth, config.master_seed, replicate_index, config.generator))
}

fn multiarm_replicate(truth: &MultiArmStudy, seed: u64, index: u64, generator: Generator) -> MultiArmStudy {
    let mut rng = replicate_rng(seed, index);
    let sigma = truth.sigma;
    let control = simulate_arm(&mut rng, truth.control.n, truth.control.mean, sigma, generator);
    let arms = truth
        .arms
        .iter()
        .map(|a| simulate_arm(&mut rng, a.n, a.mean, sigma, generator))
        .collect();
    let mut study = MultiArmStudy {
        control,
        arms,
        sigma,
    };
    study.sigma = study.pooled_sd();
    study
}

/// A simulated replicate of either design.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    TwoOutcome(TwoOutcomeStudy),
    MultiArm(MultiArmStudy),
}

pub fn simulate(config: &SimConfig, replicate_index: u64) -> Sample {
    match &config.design {
        SimDesign::TwoOutcome(t) => Sample::TwoOutcome(two_outcome_replicate(t, config.master_seed, replicate_index)),
        SimDesign::MultiArm(t) => {
            Sample::MultiArm(multiarm_replicate(t, config.master_seed, replicate_index, config.generator))
        }
    }
}

/// Running mean vector and co-moment matrix of a vector statistic.
#[derive(Debug, Clone)]
pub struct Accumulator {
    count: f64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl Accumulator {
    fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn push(&mut self, x: &[f64], scratch: &mut [f64]) {
        let d = self.dim();
        self.count += 1.0;
        for ((s, &xi), m) in scratch.iter_mut().zip(x).zip(self.mean.iter_mut()) {
            *s = xi - *m;
            *m += *s / self.count;
        }
        for (i, &xi) in x.iter().enumerate() {
            let after = xi - self.mean[i];
            for (c, &s) in self.comoment[i * d..(i + 1) * d].iter_mut().zip(scratch.iter()) {
                *c += after * s;
            }
        }
    }

    fn merge(&self, other: &Self) -> Self {
        if self.count == 0.0 {
            return other.clone();
        }
        if other.count == 0.0 {
            return self.clone();
        }
        let d = self.dim();
        let count = self.count + other.count;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        let w = self.count * other.count / count;
        let mean = (0..d).map(|i| self.mean[i] + delta[i] * other.count / count).collect();
        let comoment = (0..d * d)
            .map(|ij| self.comoment[ij] + other.comoment[ij] + delta[ij / d] * delta[ij % d] * w)
            .collect();
        Self {
            count,
            mean,
            comoment,
        }
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    /// Unbiased sample covariance of components `i` and `j`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.comoment[i * self.dim() + j] / (self.count - 1.0)
    }
}

/// Per-batch accumulators of one simulation run.
#[derive(Debug, Clone)]
pub struct BatchMoments {
    batches: Vec<Accumulator>,
    total: Accumulator,
    // leave-one-batch-out accumulators
    jackknife: Vec<Accumulator>,
    replicates: usize,
}

impl BatchMoments {
    fn from_batches(batches: Vec<Accumulator>, replicates: usize) -> Self {
        let b = batches.len();
        let dim = batches[0].dim();
        let mut prefix = Vec::with_capacity(b + 1);
        prefix.push(Accumulator::new(dim));
        for acc in &batches {
            let next = prefix.last().unwrap().merge(acc);
            prefix.push(next);
        }
        let mut suffix = vec![Accumulator::new(dim); b + 1];
        for i in (0..b).rev() {
            suffix[i] = batches[i].merge(&suffix[i + 1]);
        }
        let jackknife = (0..b).map(|i| prefix[i].merge(&suffix[i + 1])).collect();
        Self {
            total: prefix[b].clone(),
            batches,
            jackknife,
            replicates,
        }
    }

    pub fn total(&self) -> &Accumulator {
        &self.total
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }

    /// Point estimate on all replicates with a delete-one-batch jackknife
    /// standard error.
    pub fn estimate(&self, f: impl Fn(&Accumulator) -> f64) -> McEstimate {
        let b = self.jackknife.len() as f64;
        let loo: Vec<f64> = self.jackknife.iter().map(&f).collect();
        let mean = loo.iter().sum::<f64>() / b;
        let ss: f64 = loo.iter().map(|x| (x - mean).powi(2)).sum();
        McEstimate {
            value: f(&self.total),
            std_error: ((b - 1.0) / b * ss).sqrt(),
            replicates: self.replicates,
        }
    }

    pub fn mean(&self, i: usize) -> McEstimate {
        self.estimate(|a| a.mean(i))
    }

    pub fn cov(&self, i: usize, j: usize) -> McEstimate {
        self.estimate(|a| a.cov(i, j))
    }

    pub fn cov_matrix(&self) -> McMatrix {
        let dim = self.total.dim();
        let mut entries = vec![McEstimate::default(); dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let e = self.cov(i, j);
                entries[i * dim + j] = e;
                entries[j * dim + i] = e;
            }
        }
        McMatrix { dim, entries }
    }
}

/// Runs every replicate of `config` and accumulates `statistic(sample)`, a
/// vector of length `dim`, in [`BATCHES`] contiguous batches.
pub fn collect<F>(config: &SimConfig, dim: usize, statistic: F) -> BatchMoments
where
    F: Fn(&Sample, &mut [f64]) + Sync,
{
    let r = config.replicates;
    let batches: Vec<Accumulator> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (b * r / BATCHES, (b + 1) * r / BATCHES);
            let mut acc = Accumulator::new(dim);
            let mut stat = vec![0.0; dim];
            let mut scratch = vec![0.0; dim];
            for idx in lo..hi {
                let sample = simulate(config, idx as u64);
                statistic(&sample, &mut stat);
                acc.push(&stat, &mut scratch);
            }
            acc
        })
        .collect();
    BatchMoments::from_batches(batches, r)
}

fn g_statistic(design: &SimDesign) -> impl Fn(&Sample, &mut [f64]) + Sync {
    // v is fixed by the design, so J is computed once.
    let j = match design {
        SimDesign::TwoOutcome(t) => [
            bias_correction(t.outcome_j.degrees_of_freedom()),
            bias_correction(t.outcome_jprime.degrees_of_freedom()),
        ],
        SimDesign::MultiArm(m) => [bias_correction(m.degrees_of_freedom()); 2],
    };
    move |sample, out| match sample {
        Sample::TwoOutcome(s) => {
            out[0] = j[0] * s.outcome_j.mean_difference() / s.outcome_j.pooled_sd();
            out[1] = j[1] * s.outcome_jprime.mean_difference() / s.outcome_jprime.pooled_sd();
        }
        Sample::MultiArm(s) => {
            for (o, arm) in out.iter_mut().zip(&s.arms) {
                *o = j[0] * (arm.mean - s.control.mean) / s.sigma;
            }
        }
    }
}

/// Simulated Hedges' g vectors: their means and covariances.
pub fn empirical_g_moments(config: &SimConfig) -> BatchMoments {
    collect(config, config.design.dim(), g_statistic(&config.design))
}

/// Sample covariance matrix of the per-replicate g vectors.
pub fn empirical_cov_g(config: &SimConfig) -> McMatrix {
    empirical_g_moments(config).cov_matrix()
}

/// Sample covariance matrix of the per-replicate mean differences.
pub fn empirical_cov_md(config: &SimConfig) -> McMatrix {
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
    .cov_matrix()
}

/// Simulated moments of the pooled SD of a multi-arm design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledSdMoments {
    /// E(s_p^2)
    pub var_mean: McEstimate,
    /// Var(s_p^2)
    pub var_variance: McEstimate,
    /// E(1/s_p)
    pub inv_sd_mean: McEstimate,
    /// Var(1/s_p)
    pub inv_sd_variance: McEstimate,
    /// E(1/s_p^2)
    pub inv_var_mean: McEstimate,
}

pub fn pooled_sd_moments(config: &SimConfig) -> Result<PooledSdMoments> {
    if !matches!(config.design, SimDesign::MultiArm(_)) {
        return Err(Error::Invalid("pooled SD moments need a multi-arm design".into()));
    }
    let m = collect(config, 3, |sample, out| {
        if let Sample::MultiArm(s) = sample {
            let var = s.sigma * s.sigma;
            out[0] = var;
            out[1] = 1.0 / s.sigma;
            out[2] = 1.0 / var;
        }
    });
    Ok(PooledSdMoments {
        var_mean: m.mean(0),
        var_variance: m.cov(0, 0),
        inv_sd_mean: m.mean(1),
        inv_sd_variance: m.cov(1, 1),
        inv_var_mean: m.mean(2),
    })
}

/// Estimates k from `Cov(s_jp^2, s_j'p^2) / (rho^2 sigma_j^2 sigma_j'^2)`,
/// with the sigmas taken as the truth pooled SDs of each outcome.
pub fn estimate_k(config: &SimConfig) -> Result<McEstimate> {
    let SimDesign::TwoOutcome(truth) = &config.design else {
        return Err(Error::Invalid("k is only defined for two-outcome designs".into()));
    };
    let rho = truth.link.rho;
    if rho == 0.0 {
        return Err(Error::Unidentifiable);
    }
    let scale = rho * rho * truth.outcome_j.pooled_sd().powi(2) * truth.outcome_jprime.pooled_sd().powi(2);
    let m = collect(config, 2, |sample, out| {
        if let Sample::TwoOutcome(s) = sample {
            out[0] = s.outcome_j.pooled_sd().powi(2);
            out[1] = s.outcome_jprime.pooled_sd().powi(2);
        }
    });
    Ok(m.estimate(|a| a.cov(0, 1) / scale))
}

/// Checks of one covariance entry against one method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodCheck {
    pub method: Method,
    pub analytic: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryReport {
    pub row: usize,
    pub col: usize,
    pub empirical: McEstimate,
    pub checks: Vec<MethodCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub design: &'static str,
    pub replicates: usize,
    pub master_seed: u64,
    pub tolerance_se: f64,
    pub entries: Vec<EntryReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.checks.iter().all(|c| c.pass))
    }

    pub fn methods(&self) -> Vec<Method> {
        self.entries
            .first()
            .map(|e| e.checks.iter().map(|c| c.method).collect())
            .unwrap_or_default()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# design={} replicates={} seed={} tolerance_se={}",
            self.design, self.replicates, self.master_seed, self.tolerance_se
        )?;
        write!(f, "row col empirical std_error")?;
        for m in self.methods() {
            write!(f, " {m}_analytic {m}_z {m}_pass")?;
        }
        writeln!(f)?;
        for e in &self.entries {
            write!(
                f,
                "{} {} {:.16e} {:.16e}",
                e.row, e.col, e.empirical.value, e.empirical.std_error
            )?;
            for c in &e.checks {
                write!(f, " {:.16e} {:.4} {}", c.analytic, c.z, if c.pass { "pass" } else { "FAIL" })?;
            }
            writeln!(f)?;
        }
        writeln!(f, "overall {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

/// Compares analytic matrices with an empirical one entry by entry over the
/// lower triangle.
pub fn compare(
    analytic: &[(Method, CovMatrix)],
    empirical: &McMatrix,
    tolerance_se: f64,
) -> Vec<EntryReport> {
    let mut entries = Vec::new();
    for row in 0..empirical.dim() {
        for col in 0..=row {
            let est = empirical.get(row, col);
            let checks = analytic
                .iter()
                .map(|(method, m)| {
                    let value = m.get(row, col);
                    let z = est.z_score(value);
                    MethodCheck {
                        method: *method,
                        analytic: value,
                        z,
                        pass: z.abs() <= tolerance_se,
                    }
                })
                .collect();
            entries.push(EntryReport {
                row,
                col,
                empirical: est,
                checks,
            });
        }
    }
    entries
}

/// Analytic covariance matrices of `config.design` (truth mode) under each
/// method, checked against the simulated covariance of g.
pub fn validate(config: &SimConfig, methods: &[Method], tolerance_se: f64) -> Result<ValidationReport> {
    if !(tolerance_se > 0.0) {
        return Err(domain("validate", format!("tolerance must be > 0, got {tolerance_se}")));
    }
    if methods.is_empty() {
        return Err(Error::Invalid("at least one method is required".into()));
    }
    let design = config.design.to_design();
    let options = AssembleOptions {
        mode: Mode::Truth,
        k_estimation: Some(KEstimation {
            replicates: config.replicates,
            seed: config.master_seed,
        }),
    };
    let analytic = methods
        .iter()
        .map(|&m| engine::assemble_cov_matrix(&design, m, &options).map(|(_, c)| (m, c)))
        .collect::<Result<Vec<_>>>()?;
    let empirical = empirical_cov_g(config);
    Ok(ValidationReport {
        design: design.kind(),
        replicates: config.replicates,
        master_seed: config.master_seed,
        tolerance_se,
        entries: compare(&analytic, &empirical, tolerance_se),
    })
}

/// Two-outcome truth design with equal arm sizes, unit SDs, and full
/// overlap.
pub fn full_overlap_design(n: u32, rho: f64, delta_j: f64, delta_jprime: f64) -> Result<TwoOutcomeStudy> {
    let outcome = |d: f64| TwoGroup::new(GroupSummary::new(n, d, 1.0)?, GroupSummary::new(n, 0.0, 1.0)?);
    TwoOutcomeStudy::new(
        outcome(delta_j)?,
        outcome(delta_jprime)?,
        OutcomeLink {
            rho,
            overlap_t: n,
            overlap_c: n,
            k_factor: None,
        },
    )
}
