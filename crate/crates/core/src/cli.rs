//! `wscov compute | simulate | validate`.
//!
//! Exit codes: 0 success, 1 validation failure, 2 input error, 3
//! computation error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use crate::engine::{self, AssembleOptions, KEstimation, Method};
use crate::error::Error;
use crate::mc_oracle::{self, Generator, Sample, SimConfig, SimDesign};
use crate::model::{GroupSummary, Mode, MultiArmStudy, OutcomeLink, TwoGroup, TwoOutcomeStudy};
use crate::tables::{self, MultiArmRecord, MultiOutcomeRecord, PairRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

const DEFAULT_REPLICATES: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "wscov", version, about = "Within-study covariance of Hedges' g")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Covariance matrices for every study in a summary table.
    Compute(ComputeArgs),
    /// Simulate a truth design: per-replicate summaries or empirical moments.
    Simulate(SimulateArgs),
    /// Check analytic matrices against simulation.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scenario {
    MultiArm,
    MultiOutcome,
}

impl Scenario {
    fn tag(self) -> &'static str {
        match self {
            Scenario::MultiArm => "multi-arm",
            Scenario::MultiOutcome => "multi-outcome",
        }
    }

    fn default_methods(self) -> Vec<Method> {
        match self {
            Scenario::MultiArm => vec![Method::MultiArmNovel, Method::MultiArmWei],
            Scenario::MultiOutcome => vec![Method::TwoOutcome],
        }
    }

    fn accepts(self, m: Method) -> bool {
        matches!(
            (self, m),
            (Scenario::MultiArm, Method::MultiArmNovel | Method::MultiArmWei)
                | (Scenario::MultiOutcome, Method::TwoOutcome)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Truth,
    Plugin,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Truth => Mode::Truth,
            ModeArg::Plugin => Mode::Plugin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Summaries,
    Matrix,
}

#[derive(Debug, clap::Args)]
struct ComputeArgs {
    #[arg(long)]
    studies: PathBuf,
    /// Outcome pairs table; required for multi-outcome studies.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Scenario,
    /// Defaults to novel for multi-arm and two-outcome for multi-outcome.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long, value_enum, default_value = "plugin")]
    mode: ModeArg,
    /// Simulation budget for pairs with partial overlap and no k.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "summaries")]
    emit: Emit,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Where to write the pairs table for multi-outcome summaries.
    #[arg(long)]
    pairs_output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Repeatable or comma-separated; defaults to every method that fits
    /// the scenario.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    method: Vec<Method>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3.0)]
    tolerance_se: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn computation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPUTATION,
            message: message.into(),
        }
    }
}

impl From<tables::TableError> for Failure {
    fn from(e: tables::TableError) -> Self {
        Failure::input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Compute(a) => compute(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Validate(a) => validate(&a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("wscov: {}", f.message);
            f.code
        }
    }
}

fn open_input(path: &Path, what: &str) -> CliResult<File> {
    File::open(path).map_err(|e| Failure::input(format!("cannot read {what} '{}': {e}", path.display())))
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::input(format!("cannot create '{}': {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_failure(e: io::Error) -> Failure {
    Failure::input(format!("write failed: {e}"))
}

fn write_lines(path: Option<&Path>, lines: &[String]) -> CliResult<()> {
    let mut out = open_output(path)?;
    for line in lines {
        writeln!(out, "{line}").map_err(write_failure)?;
    }
    out.flush().map_err(write_failure)
}

fn study_failure(study_id: &str, e: Error) -> Failure {
    let msg = format!("study '{study_id}': {e}");
    match e {
        Error::Invalid(_) => Failure::input(msg),
        _ => Failure::computation(msg),
    }
}

fn compute(args: &ComputeArgs) -> CliResult<i32> {
    let method = args.method.unwrap_or(args.scenario.default_methods()[0]);
    if !args.scenario.accepts(method) {
        return Err(Failure::input(format!(
            "method {method} does not apply to the {} scenario",
            args.scenario.tag()
        )));
    }
    let mode = Mode::from(args.mode);
    let mut options = AssembleOptions::new(mode);
    if let Some(replicates) = args.replicates {
        if replicates < mc_oracle::MIN_REPLICATES {
            return Err(Failure::input(format!(
                "--replicates must be >= {}, got {replicates}",
                mc_oracle::MIN_REPLICATES
            )));
        }
        options.k_estimation = Some(KEstimation {
            replicates,
            seed: args.seed,
        });
    }

    let studies = open_input(&args.studies, "studies")?;
    // (study id, labels, design), all parsed before any engine call.
    let designs: Vec<(String, Vec<String>, engine::Design)> = match args.scenario {
        Scenario::MultiArm => {
            if args.pairs.is_some() {
                return Err(Failure::input("--pairs only applies to the multi-outcome scenario"));
            }
            tables::read_multiarm(studies)?
                .into_iter()
                .map(|r| {
                    let study = r.to_study(mode).map_err(|e| study_failure(&r.study_id, e))?;
                    Ok((r.study_id, r.arm_ids, study.into()))
                })
                .collect::<CliResult<_>>()?
        }
        Scenario::MultiOutcome => {
            let pairs_path = args
                .pairs
                .as_deref()
                .ok_or_else(|| Failure::input("the multi-outcome scenario needs --pairs"))?;
            let records = tables::read_multioutcome(studies)?;
            let pairs = tables::read_pairs(open_input(pairs_path, "pairs")?)?;
            pairs.check_against(&records)?;
            records
                .into_iter()
                .map(|r| {
                    let study = r.to_study(&pairs).map_err(|e| study_failure(&r.study_id, e))?;
                    Ok((r.study_id, r.outcome_ids, study.into()))
                })
                .collect::<CliResult<_>>()?
        }
    };

    let mut lines = Vec::with_capacity(designs.len());
    for (id, labels, design) in &designs {
        let (effects, cov) =
            engine::assemble_cov_matrix(design, method, &options).map_err(|e| study_failure(id, e))?;
        lines.push(tables::result_record(id, labels, method, mode, &effects, &cov));
    }
    write_lines(args.output.as_deref(), &lines)?;
    Ok(EXIT_OK)
}

/// Simulation configuration file (TOML). The `scenario` key selects the
/// layout; unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
enum ConfigFile {
    MultiArm(MultiArmConfig),
    MultiOutcome(MultiOutcomeConfig),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiArmConfig {
    replicates: Option<usize>,
    seed: Option<u64>,
    sigma: f64,
    #[serde(default)]
    generator: GeneratorName,
    control: ArmConfig,
    arms: Vec<ArmConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArmConfig {
    id: Option<String>,
    n: u32,
    mean: f64,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum GeneratorName {
    #[default]
    Normal,
    ShiftedExponential,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiOutcomeConfig {
    replicates: Option<usize>,
    seed: Option<u64>,
    rho: f64,
    overlap_t: u32,
    overlap_c: u32,
    k: Option<f64>,
    outcomes: Vec<OutcomeConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutcomeConfig {
    id: String,
    sigma: f64,
    treatment: GroupConfig,
    control: GroupConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupConfig {
    n: u32,
    mean: f64,
}

/// A parsed configuration: truth design plus labels and file defaults.
#[derive(Debug)]
struct Loaded {
    scenario: Scenario,
    design: SimDesign,
    generator: Generator,
    labels: Vec<String>,
    replicates: Option<usize>,
    seed: Option<u64>,
}

fn config_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::input(format!("config '{}': {e}", path.display()))
}

fn load_config(path: &Path) -> CliResult<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| config_error(path, e))?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| config_error(path, e))?;
    let bad = |e: Error| config_error(path, e);
    match file {
        ConfigFile::MultiArm(c) => {
            let group = |a: &ArmConfig| GroupSummary::new(a.n, a.mean, c.sigma);
            let control = group(&c.control).map_err(bad)?;
            let arms = c.arms.iter().map(group).collect::<crate::Result<Vec<_>>>().map_err(bad)?;
            let study = MultiArmStudy::new(control, arms, c.sigma).map_err(bad)?;
            let labels = c
                .arms
                .iter()
                .enumerate()
                .map(|(i, a)| a.id.clone().unwrap_or_else(|| format!("arm{}", i + 1)))
                .collect::<Vec<_>>();
            if labels.iter().any(|l| l == tables::CONTROL_ARM) {
                return Err(config_error(path, "arm id 'control' is reserved"));
            }
            Ok(Loaded {
                scenario: Scenario::MultiArm,
                design: study.into(),
                generator: match c.generator {
                    GeneratorName::Normal => Generator::Normal,
                    GeneratorName::ShiftedExponential => Generator::ShiftedExponential,
                },
                labels,
                replicates: c.replicates,
                seed: c.seed,
            })
        }
        ConfigFile::MultiOutcome(c) => {
            let [a, b] = c.outcomes.as_slice() else {
                return Err(config_error(
                    path,
                    format!("simulation needs exactly 2 outcomes, got {}", c.outcomes.len()),
                ));
            };
            if a.id == b.id {
                return Err(config_error(path, "outcome ids must differ"));
            }
            let outcome = |o: &OutcomeConfig| -> crate::Result<TwoGroup> {
                TwoGroup::new(
                    GroupSummary::new(o.treatment.n, o.treatment.mean, o.sigma)?,
                    GroupSummary::new(o.control.n, o.control.mean, o.sigma)?,
                )
            };
            let link = OutcomeLink {
                rho: c.rho,
                overlap_t: c.overlap_t,
                overlap_c: c.overlap_c,
                k_factor: c.k,
            };
            let study = TwoOutcomeStudy::new(outcome(a).map_err(bad)?, outcome(b).map_err(bad)?, link)
                .map_err(bad)?;
            Ok(Loaded {
                scenario: Scenario::MultiOutcome,
                design: study.into(),
                generator: Generator::Normal,
                labels: vec![a.id.clone(), b.id.clone()],
                replicates: c.replicates,
                seed: c.seed,
            })
        }
    }
}

fn sim_config(loaded: &Loaded, replicates: Option<usize>, seed: Option<u64>) -> CliResult<SimConfig> {
    let replicates = replicates.or(loaded.replicates).unwrap_or(DEFAULT_REPLICATES);
    let seed = seed.or(loaded.seed).unwrap_or(0);
    SimConfig::with_generator(loaded.design.clone(), replicates, seed, loaded.generator)
        .map_err(|e| Failure::input(e.to_string()))
}

fn replicate_id(index: usize, replicates: usize) -> String {
    let width = (replicates - 1).max(1).to_string().len();
    format!("rep{index:0width$}")
}

fn simulate(args: &SimulateArgs) -> CliResult<i32> {
    let loaded = load_config(&args.config)?;
    let config = sim_config(&loaded, args.replicates, args.seed)?;
    match args.emit {
        Emit::Matrix => {
            if args.pairs_output.is_some() {
                return Err(Failure::input("--pairs-output only applies to --emit summaries"));
            }
            let moments = mc_oracle::empirical_g_moments(&config);
            let means: Vec<_> = (0..config.design.dim()).map(|i| moments.mean(i)).collect();
            let line = tables::empirical_record(
                loaded.scenario.tag(),
                config.replicates,
                config.master_seed,
                &loaded.labels,
                &means,
                &moments.cov_matrix(),
            );
            write_lines(args.output.as_deref(), &[line])?;
        }
        Emit::Summaries => {
            let samples: Vec<Sample> = (0..config.replicates)
                .into_par_iter()
                .map(|i| mc_oracle::simulate(&config, i as u64))
                .collect();
            let ids: Vec<String> = (0..config.replicates).map(|i| replicate_id(i, config.replicates)).collect();
            match &config.design {
                SimDesign::MultiArm(_) => {
                    if args.pairs_output.is_some() {
                        return Err(Failure::input("--pairs-output only applies to the multi-outcome scenario"));
                    }
                    let records: Vec<MultiArmRecord> = samples
                        .into_iter()
                        .zip(ids)
                        .map(|(s, study_id)| match s {
                            Sample::MultiArm(s) => MultiArmRecord {
                                study_id,
                                arm_ids: loaded.labels.clone(),
                                control: s.control,
                                arms: s.arms,
                            },
                            Sample::TwoOutcome(_) => unreachable!("multi-arm design"),
                        })
                        .collect();
                    let mut out = open_output(args.output.as_deref())?;
                    tables::write_multiarm(&mut out, &records).map_err(write_failure)?;
                    out.flush().map_err(write_failure)?;
                }
                SimDesign::TwoOutcome(truth) => {
                    let pairs_path = args.pairs_output.as_deref().ok_or_else(|| {
                        Failure::input("multi-outcome summaries need --pairs-output for the pairs table")
                    })?;
                    let records: Vec<MultiOutcomeRecord> = samples
                        .into_iter()
                        .zip(&ids)
                        .map(|(s, study_id)| match s {
                            Sample::TwoOutcome(s) => MultiOutcomeRecord {
                                study_id: study_id.clone(),
                                outcome_ids: loaded.labels.clone(),
                                outcomes: vec![s.outcome_j, s.outcome_jprime],
                            },
                            Sample::MultiArm(_) => unreachable!("two-outcome design"),
                        })
                        .collect();
                    let mut out = open_output(args.output.as_deref())?;
                    tables::write_multioutcome(&mut out, &records).map_err(write_failure)?;
                    out.flush().map_err(write_failure)?;

                    let (a, b) = (loaded.labels[0].as_str(), loaded.labels[1].as_str());
                    let rows: Vec<PairRow<'_>> = ids.iter().map(|id| (id.as_str(), a, b, truth.link)).collect();
                    let mut pairs = open_output(Some(pairs_path))?;
                    tables::write_pairs(&mut pairs, &rows).map_err(write_failure)?;
                    pairs.flush().map_err(write_failure)?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn validate(args: &ValidateArgs) -> CliResult<i32> {
    if !(args.tolerance_se > 0.0 && args.tolerance_se.is_finite()) {
        return Err(Failure::input(format!(
            "--tolerance-se must be finite and > 0, got {}",
            args.tolerance_se
        )));
    }
    let loaded = load_config(&args.config)?;
    let mut methods = if args.method.is_empty() {
        loaded.scenario.default_methods()
    } else {
        args.method.clone()
    };
    methods.dedup();
    if let Some(m) = methods.iter().find(|m| !loaded.scenario.accepts(**m)) {
        return Err(Failure::input(format!(
            "method {m} does not apply to the {} scenario",
            loaded.scenario.tag()
        )));
    }
    let config = sim_config(&loaded, args.replicates, args.seed)?;
    let report = mc_oracle::validate(&config, &methods, args.tolerance_se)
        .map_err(|e| Failure::computation(e.to_string()))?;
    let text = report.to_string();
    print!("{text}");
    if let Some(p) = &args.output {
        fs::write(p, &text).map_err(|e| Failure::input(format!("cannot write '{}': {e}", p.display())))?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VALIDATION_FAILED })
}
