//! Comma-separated study tables and line-delimited JSON result records.
//!
//! Input schemas (header row required, columns in any order, unknown
//! columns rejected):
//!
//! ```text
//! multi-arm studies:      study_id,arm_id,n,mean,sd        (arm_id "control" reserved)
//! multi-outcome studies:  study_id,outcome_id,arm,n,mean,sd (arm is "t" or "c")
//! outcome pairs:          study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c[,k]
//! ```
//!
//! Every real number written by this module uses 17 significant digits.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use crate::engine::Method;
use crate::model::{common_sd, CovMatrix, EffectVector, GroupSummary, Mode, MultiArmStudy, MultiOutcomeStudy, OutcomeLink, TwoGroup};

pub const CONTROL_ARM: &str = "control";

pub const MULTIARM_COLUMNS: [&str; 5] = ["study_id", "arm_id", "n", "mean", "sd"];
pub const MULTIOUTCOME_COLUMNS: [&str; 6] = ["study_id", "outcome_id", "arm", "n", "mean", "sd"];
pub const PAIRS_COLUMNS: [&str; 7] = ["study_id", "outcome_a", "outcome_b", "rho", "overlap_t", "overlap_c", "k"];
const PAIRS_OPTIONAL: [&str; 1] = ["k"];

/// A schema or content problem in an input table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableError {
    pub table: &'static str,
    /// 1-based line number in the file, header included.
    pub line: Option<u64>,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for TableError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} table", self.table)?;
        if let Some(line) = self.line {
            write!(f, ", line {line}")?;
        }
        if let Some(col) = &self.column {
            write!(f, ", column '{col}'")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for TableError {}

type TableResult<T> = std::result::Result<T, TableError>;

/// Formats a real with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    name: &'static str,
    index: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(name: &'static str, input: impl Read, required: &[&str], optional: &[&str]) -> TableResult<Self> {
        let err = |line, column: Option<String>, message: String| TableError {
            table: name,
            line,
            column,
            message,
        };
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let header = reader.headers().map_err(|e| err(Some(1), None, e.to_string()))?.clone();
        let mut index = HashMap::new();
        for (i, col) in header.iter().enumerate() {
            if !required.contains(&col) && !optional.contains(&col) {
                return Err(err(Some(1), Some(col.to_string()), "unknown column".into()));
            }
            if index.insert(col.to_string(), i).is_some() {
                return Err(err(Some(1), Some(col.to_string()), "duplicate column".into()));
            }
        }
        if let Some(missing) = required.iter().find(|c| !index.contains_key(**c)) {
            return Err(err(Some(1), Some(missing.to_string()), "required column is missing".into()));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line());
                err(line, None, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Self { name, index, rows })
    }

    fn error(&self, line: u64, column: &str, message: impl Into<String>) -> TableError {
        TableError {
            table: self.name,
            line: Some(line),
            column: (!column.is_empty()).then(|| column.to_string()),
            message: message.into(),
        }
    }

    fn field<'r>(&self, row: &'r (u64, csv::StringRecord), column: &str) -> Option<&'r str> {
        self.index.get(column).and_then(|&i| row.1.get(i))
    }

    fn text(&self, row: &(u64, csv::StringRecord), column: &str) -> TableResult<String> {
        match self.field(row, column) {
            Some(s) if !s.is_empty() => Ok(s.to_string()),
            _ => Err(self.error(row.0, column, "value is empty")),
        }
    }

    fn count(&self, row: &(u64, csv::StringRecord), column: &str) -> TableResult<u32> {
        let s = self.text(row, column)?;
        s.parse().map_err(|_| self.error(row.0, column, format!("'{s}' is not a nonnegative integer")))
    }

    fn real(&self, row: &(u64, csv::StringRecord), column: &str) -> TableResult<f64> {
        let s = self.text(row, column)?;
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.error(row.0, column, format!("'{s}' is not a finite number"))),
        }
    }

    fn optional_real(&self, row: &(u64, csv::StringRecord), column: &str) -> TableResult<Option<f64>> {
        match self.field(row, column) {
            None | Some("") => Ok(None),
            Some(_) => self.real(row, column).map(Some),
        }
    }

    fn group(&self, row: &(u64, csv::StringRecord)) -> TableResult<GroupSummary> {
        let n = self.count(row, "n")?;
        if n < 2 {
            return Err(self.error(row.0, "n", format!("group size must be >= 2, got {n}")));
        }
        let mean = self.real(row, "mean")?;
        let sd = self.real(row, "sd")?;
        if sd <= 0.0 {
            return Err(self.error(row.0, "sd", format!("sd must be > 0, got {sd}")));
        }
        Ok(GroupSummary { n, mean, sd })
    }
}

/// Keeps first-appearance order of study ids.
struct Grouped<T> {
    order: Vec<String>,
    items: HashMap<String, T>,
}

impl<T: Default> Grouped<T> {
    fn new() -> Self {
        Self {
            order: Vec::new(),
            items: HashMap::new(),
        }
    }

    fn entry(&mut self, id: &str) -> &mut T {
        if !self.items.contains_key(id) {
            self.order.push(id.to_string());
        }
        self.items.entry(id.to_string()).or_default()
    }

    fn into_ordered(mut self) -> Vec<(String, T)> {
        self.order
            .into_iter()
            .map(|id| {
                let item = self.items.remove(&id).expect("ordered ids are present");
                (id, item)
            })
            .collect()
    }
}

/// One multi-arm study as read from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiArmRecord {
    pub study_id: String,
    pub arm_ids: Vec<String>,
    pub control: GroupSummary,
    pub arms: Vec<GroupSummary>,
}

impl MultiArmRecord {
    /// In truth mode every arm must report the same SD, which becomes sigma;
    /// in plugin mode sigma is the pooled SD.
    pub fn to_study(&self, mode: Mode) -> crate::Result<MultiArmStudy> {
        match mode {
            Mode::Plugin => MultiArmStudy::from_summaries(self.control, self.arms.clone()),
            Mode::Truth => {
                let groups: Vec<&GroupSummary> = self.arms.iter().chain([&self.control]).collect();
                let sigma = common_sd(groups)?;
                MultiArmStudy::new(self.control, self.arms.clone(), sigma)
            }
        }
    }
}

#[derive(Default)]
struct ArmRows {
    control: Option<GroupSummary>,
    arms: Vec<(String, GroupSummary)>,
    seen: HashSet<String>,
    first_line: u64,
}

pub fn read_multiarm(input: impl Read) -> TableResult<Vec<MultiArmRecord>> {
    let table = Table::read("studies", input, &MULTIARM_COLUMNS, &[])?;
    let mut studies: Grouped<ArmRows> = Grouped::new();
    for row in &table.rows {
        let study_id = table.text(row, "study_id")?;
        let arm_id = table.text(row, "arm_id")?;
        let group = table.group(row)?;
        let entry = studies.entry(&study_id);
        if entry.first_line == 0 {
            entry.first_line = row.0;
        }
        if !entry.seen.insert(arm_id.clone()) {
            return Err(table.error(row.0, "arm_id", format!("arm '{arm_id}' repeated in study '{study_id}'")));
        }
        if arm_id == CONTROL_ARM {
            entry.control = Some(group);
        } else {
            entry.arms.push((arm_id, group));
        }
    }
    studies
        .into_ordered()
        .into_iter()
        .map(|(study_id, rows)| {
            let control = rows.control.ok_or_else(|| {
                table.error(rows.first_line, "arm_id", format!("study '{study_id}' has no control arm"))
            })?;
            if rows.arms.is_empty() {
                return Err(table.error(rows.first_line, "arm_id", format!("study '{study_id}' has no treatment arm")));
            }
            let (arm_ids, arms) = rows.arms.into_iter().unzip();
            Ok(MultiArmRecord {
                study_id,
                arm_ids,
                control,
                arms,
            })
        })
        .collect()
}

/// One multi-outcome study as read from a table.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiOutcomeRecord {
    pub study_id: String,
    pub outcome_ids: Vec<String>,
    pub outcomes: Vec<TwoGroup>,
}

#[derive(Default)]
struct OutcomeRows {
    // outcome id -> (treatment, control)
    outcomes: Vec<(String, Option<GroupSummary>, Option<GroupSummary>)>,
    first_line: u64,
}

pub fn read_multioutcome(input: impl Read) -> TableResult<Vec<MultiOutcomeRecord>> {
    let table = Table::read("studies", input, &MULTIOUTCOME_COLUMNS, &[])?;
    let mut studies: Grouped<OutcomeRows> = Grouped::new();
    for row in &table.rows {
        let study_id = table.text(row, "study_id")?;
        let outcome_id = table.text(row, "outcome_id")?;
        let arm = table.text(row, "arm")?;
        let group = table.group(row)?;
        let entry = studies.entry(&study_id);
        if entry.first_line == 0 {
            entry.first_line = row.0;
        }
        let pos = match entry.outcomes.iter().position(|o| o.0 == outcome_id) {
            Some(p) => p,
            None => {
                entry.outcomes.push((outcome_id.clone(), None, None));
                entry.outcomes.len() - 1
            }
        };
        let slot = match arm.as_str() {
            "t" => &mut entry.outcomes[pos].1,
            "c" => &mut entry.outcomes[pos].2,
            other => return Err(table.error(row.0, "arm", format!("arm must be 't' or 'c', got '{other}'"))),
        };
        if slot.replace(group).is_some() {
            return Err(table.error(
                row.0,
                "arm",
                format!("arm '{arm}' of outcome '{outcome_id}' repeated in study '{study_id}'"),
            ));
        }
    }
    studies
        .into_ordered()
        .into_iter()
        .map(|(study_id, rows)| {
            let mut outcome_ids = Vec::new();
            let mut outcomes = Vec::new();
            for (id, t, c) in rows.outcomes {
                let (Some(treatment), Some(control)) = (t, c) else {
                    return Err(table.error(
                        rows.first_line,
                        "arm",
                        format!("outcome '{id}' of study '{study_id}' needs both a 't' and a 'c' row"),
                    ));
                };
                outcome_ids.push(id);
                outcomes.push(TwoGroup { treatment, control });
            }
            Ok(MultiOutcomeRecord {
                study_id,
                outcome_ids,
                outcomes,
            })
        })
        .collect()
}

/// Pair links keyed by `(study_id, outcome_a, outcome_b)` with `a < b`
/// lexically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairsTable {
    links: HashMap<(String, String, String), (u64, OutcomeLink)>,
}

fn pair_key(study: &str, a: &str, b: &str) -> (String, String, String) {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (study.to_string(), lo.to_string(), hi.to_string())
}

impl PairsTable {
    pub fn get(&self, study: &str, a: &str, b: &str) -> Option<OutcomeLink> {
        self.links.get(&pair_key(study, a, b)).map(|x| x.1)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Checks that every row refers to an outcome that exists.
    pub fn check_against(&self, studies: &[MultiOutcomeRecord]) -> TableResult<()> {
        let known: HashMap<&str, &MultiOutcomeRecord> = studies.iter().map(|s| (s.study_id.as_str(), s)).collect();
        for ((study, a, b), (line, _)) in &self.links {
            let err = |msg: String| TableError {
                table: "pairs",
                line: Some(*line),
                column: None,
                message: msg,
            };
            let rec = known.get(study.as_str()).ok_or_else(|| err(format!("unknown study '{study}'")))?;
            for o in [a, b] {
                if !rec.outcome_ids.contains(o) {
                    return Err(err(format!("study '{study}' has no outcome '{o}'")));
                }
            }
        }
        Ok(())
    }
}

pub fn read_pairs(input: impl Read) -> TableResult<PairsTable> {
    let required: Vec<&str> = PAIRS_COLUMNS.iter().copied().filter(|c| !PAIRS_OPTIONAL.contains(c)).collect();
    let table = Table::read("pairs", input, &required, &PAIRS_OPTIONAL)?;
    let mut out = PairsTable::default();
    for row in &table.rows {
        let study = table.text(row, "study_id")?;
        let a = table.text(row, "outcome_a")?;
        let b = table.text(row, "outcome_b")?;
        if a == b {
            return Err(table.error(row.0, "outcome_b", "a pair needs two distinct outcomes"));
        }
        let rho = table.real(row, "rho")?;
        if rho.abs() > 1.0 {
            return Err(table.error(row.0, "rho", format!("rho must lie in [-1, 1], got {rho}")));
        }
        let k_factor = table.optional_real(row, "k")?;
        if k_factor.is_some_and(|k| k < 0.0) {
            return Err(table.error(row.0, "k", "k must be >= 0"));
        }
        let link = OutcomeLink {
            rho,
            overlap_t: table.count(row, "overlap_t")?,
            overlap_c: table.count(row, "overlap_c")?,
            k_factor,
        };
        if out.links.insert(pair_key(&study, &a, &b), (row.0, link)).is_some() {
            return Err(table.error(row.0, "", format!("pair ({a}, {b}) repeated in study '{study}'")));
        }
    }
    Ok(out)
}

impl MultiOutcomeRecord {
    /// Attaches pair links. A missing pair is an error rather than an
    /// implicit zero correlation.
    pub fn to_study(&self, pairs: &PairsTable) -> crate::Result<MultiOutcomeStudy> {
        MultiOutcomeStudy::new(self.outcomes.clone(), |a, b| {
            let (ia, ib) = (&self.outcome_ids[a], &self.outcome_ids[b]);
            pairs.get(&self.study_id, ia, ib).ok_or_else(|| {
                crate::Error::Invalid(format!(
                    "study '{}' has no pairs row for outcomes '{ia}' and '{ib}'",
                    self.study_id
                ))
            })
        })
    }
}

pub fn write_multiarm(out: &mut impl Write, records: &[MultiArmRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", MULTIARM_COLUMNS.join(","))?;
    for r in records {
        let rows = r.arm_ids.iter().map(String::as_str).zip(&r.arms).chain([(CONTROL_ARM, &r.control)]);
        for (id, g) in rows {
            writeln!(out, "{},{},{},{},{}", r.study_id, id, g.n, fmt17(g.mean), fmt17(g.sd))?;
        }
    }
    Ok(())
}

pub fn write_multioutcome(out: &mut impl Write, records: &[MultiOutcomeRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", MULTIOUTCOME_COLUMNS.join(","))?;
    for r in records {
        for (id, o) in r.outcome_ids.iter().zip(&r.outcomes) {
            for (arm, g) in [("t", &o.treatment), ("c", &o.control)] {
                writeln!(out, "{},{},{},{},{},{}", r.study_id, id, arm, g.n, fmt17(g.mean), fmt17(g.sd))?;
            }
        }
    }
    Ok(())
}

/// One pairs row: `(study_id, outcome_a, outcome_b, link)`.
pub type PairRow<'a> = (&'a str, &'a str, &'a str, OutcomeLink);

pub fn write_pairs(out: &mut impl Write, rows: &[PairRow<'_>]) -> std::io::Result<()> {
    writeln!(out, "{}", PAIRS_COLUMNS.join(","))?;
    for (study, a, b, l) in rows {
        let k = l.k_factor.map(fmt17).unwrap_or_default();
        writeln!(out, "{study},{a},{b},{},{},{},{k}", fmt17(l.rho), l.overlap_t, l.overlap_c)?;
    }
    Ok(())
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_reals(xs: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = xs.into_iter().map(fmt17).collect();
    format!("[{}]", items.join(","))
}

fn json_strs(xs: &[String]) -> String {
    let items: Vec<String> = xs.iter().map(|s| json_str(s)).collect();
    format!("[{}]", items.join(","))
}

/// One computed study as a single JSON line (no trailing newline).
pub fn result_record(
    study_id: &str,
    labels: &[String],
    method: Method,
    mode: Mode,
    effects: &EffectVector,
    cov: &CovMatrix,
) -> String {
    let v: Vec<String> = effects.dof.iter().map(|d| d.to_string()).collect();
    format!(
        "{{\"study_id\":{},\"method\":{},\"mode\":{},\"labels\":{},\"g\":{},\"v\":[{}],\"j\":{},\"dim\":{},\"cov\":{}}}",
        json_str(study_id),
        json_str(method.tag()),
        json_str(match mode {
            Mode::Truth => "truth",
            Mode::Plugin => "plugin",
        }),
        json_strs(labels),
        json_reals(effects.g.iter().copied()),
        v.join(","),
        json_reals(effects.j_factor.iter().copied()),
        cov.dim(),
        json_reals(cov.to_row_major()),
    )
}

/// Aggregated simulation output as a single JSON line.
pub fn empirical_record(
    scenario: &str,
    replicates: usize,
    seed: u64,
    labels: &[String],
    mean_g: &[crate::McEstimate],
    cov: &crate::McMatrix,
) -> String {
    let d = cov.dim();
    let cells = || (0..d).flat_map(move |r| (0..d).map(move |c| cov.get(r, c)));
    format!(
        "{{\"scenario\":{},\"replicates\":{replicates},\"seed\":{seed},\"labels\":{},\"mean_g\":{},\"mean_g_se\":{},\"dim\":{d},\"cov\":{},\"cov_se\":{}}}",
        json_str(scenario),
        json_strs(labels),
        json_reals(mean_g.iter().map(|e| e.value)),
        json_reals(mean_g.iter().map(|e| e.std_error)),
        json_reals(cells().map(|e| e.value)),
        json_reals(cells().map(|e| e.std_error)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_multiarm_in_first_appearance_order() {
        let csv = "study_id,arm_id,n,mean,sd\n\
                   s2,control,10,0.0,1.0\n\
                   s2,hi,10,0.5,1.0\n\
                   s1,lo,12,0.2,1.1\n\
                   s1,control,11,0.1,0.9\n\
                   s1,hi,13,0.4,1.2\n";
        let studies = read_multiarm(csv.as_bytes()).unwrap();
        assert_eq!(studies.len(), 2);
        assert_eq!(studies[0].study_id, "s2");
        assert_eq!(studies[1].arm_ids, vec!["lo", "hi"]);
        assert_eq!(studies[1].control.n, 11);
    }

    #[test]
    fn column_order_is_free() {
        let csv = "sd,mean,n,arm_id,study_id\n1,0,5,control,a\n1,1,5,t,a\n";
        let s = read_multiarm(csv.as_bytes()).unwrap();
        assert_eq!(s[0].arms[0].mean, 1.0);
    }

    #[test]
    fn rejects_unknown_and_missing_columns() {
        let unknown = "study_id,arm_id,n,mean,sd,notes\n";
        let e = read_multiarm(unknown.as_bytes()).unwrap_err();
        assert_eq!(e.column.as_deref(), Some("notes"));
        let missing = "study_id,arm_id,n,mean\n";
        let e = read_multiarm(missing.as_bytes()).unwrap_err();
        assert_eq!(e.column.as_deref(), Some("sd"));
    }

    #[test]
    fn single_subject_arm_cites_row() {
        let csv = "study_id,arm_id,n,mean,sd\ns,control,10,0,1\ns,t,1,0.5,1\n";
        let e = read_multiarm(csv.as_bytes()).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert_eq!(e.column.as_deref(), Some("n"));
        assert!(e.to_string().contains("line 3"));
    }

    #[test]
    fn structural_errors() {
        let no_control = "study_id,arm_id,n,mean,sd\ns,t,10,0,1\n";
        assert!(read_multiarm(no_control.as_bytes()).unwrap_err().message.contains("no control"));
        let only_control = "study_id,arm_id,n,mean,sd\ns,control,10,0,1\n";
        assert!(read_multiarm(only_control.as_bytes()).is_err());
        let dup = "study_id,arm_id,n,mean,sd\ns,control,10,0,1\ns,t,10,0,1\ns,t,10,0,1\n";
        assert_eq!(read_multiarm(dup.as_bytes()).unwrap_err().line, Some(4));
        let bad_num = "study_id,arm_id,n,mean,sd\ns,control,10,abc,1\n";
        assert_eq!(read_multiarm(bad_num.as_bytes()).unwrap_err().column.as_deref(), Some("mean"));
        let fractional_n = "study_id,arm_id,n,mean,sd\ns,control,10.5,0,1\n";
        assert!(read_multiarm(fractional_n.as_bytes()).is_err());
        let zero_sd = "study_id,arm_id,n,mean,sd\ns,control,10,0,0\n";
        assert!(read_multiarm(zero_sd.as_bytes()).is_err());
    }

    #[test]
    fn reads_multioutcome_and_pairs() {
        let studies = "study_id,outcome_id,arm,n,mean,sd\n\
                       s,a,t,20,0.4,1\ns,a,c,20,0,1\ns,b,t,20,0.6,1\ns,b,c,20,0,1\n";
        let pairs = "study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c\ns,b,a,0.5,20,20\n";
        let recs = read_multioutcome(studies.as_bytes()).unwrap();
        let p = read_pairs(pairs.as_bytes()).unwrap();
        p.check_against(&recs).unwrap();
        let link = p.get("s", "a", "b").unwrap();
        assert_eq!(link.rho, 0.5);
        assert_eq!(link.k_factor, None);
        let study = recs[0].to_study(&p).unwrap();
        assert_eq!(study.outcomes().len(), 2);
    }

    #[test]
    fn multioutcome_errors() {
        let half = "study_id,outcome_id,arm,n,mean,sd\ns,a,t,20,0.4,1\n";
        assert!(read_multioutcome(half.as_bytes()).is_err());
        let bad_arm = "study_id,outcome_id,arm,n,mean,sd\ns,a,x,20,0.4,1\n";
        assert_eq!(read_multioutcome(bad_arm.as_bytes()).unwrap_err().column.as_deref(), Some("arm"));

        let studies = "study_id,outcome_id,arm,n,mean,sd\n\
                       s,a,t,20,0.4,1\ns,a,c,20,0,1\ns,b,t,20,0.6,1\ns,b,c,20,0,1\n";
        let recs = read_multioutcome(studies.as_bytes()).unwrap();
        let none = read_pairs("study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c\n".as_bytes()).unwrap();
        assert!(recs[0].to_study(&none).is_err());
        let unknown = read_pairs("study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c\ns,a,z,0.5,20,20\n".as_bytes()).unwrap();
        assert!(unknown.check_against(&recs).is_err());
        let rho = "study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c\ns,a,b,1.5,20,20\n";
        assert!(read_pairs(rho.as_bytes()).is_err());
        let with_k = "study_id,outcome_a,outcome_b,rho,overlap_t,overlap_c,k\ns,a,b,0.5,10,10,0.03\n";
        assert_eq!(read_pairs(with_k.as_bytes()).unwrap().get("s", "b", "a").unwrap().k_factor, Some(0.03));
    }

    #[test]
    fn multiarm_writer_round_trips() {
        let recs = vec![MultiArmRecord {
            study_id: "r0".into(),
            arm_ids: vec!["a".into(), "b".into()],
            control: GroupSummary { n: 20, mean: 0.1 + 0.2, sd: 1.0 / 3.0 },
            arms: vec![
                GroupSummary { n: 21, mean: -1e-17, sd: 2.5 },
                GroupSummary { n: 22, mean: 12345.678901234567, sd: 1e-3 },
            ],
        }];
        let mut buf = Vec::new();
        write_multiarm(&mut buf, &recs).unwrap();
        let back = read_multiarm(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn fmt17_has_seventeen_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt17(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn result_record_is_valid_json() {
        let eff = EffectVector {
            g: vec![0.25, -0.5],
            dof: vec![crate::Dof::new(38).unwrap(); 2],
            j_factor: vec![0.98; 2],
        };
        let cov = CovMatrix::from_lower_fn(2, |r, c| if r == c { 0.1 } else { 0.05 });
        let line = result_record("s\"1", &["a".into(), "b".into()], Method::MultiArmNovel, Mode::Plugin, &eff, &cov);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["study_id"], "s\"1");
        assert_eq!(v["method"], "novel");
        assert_eq!(v["cov"].as_array().unwrap().len(), 4);
        assert_eq!(v["cov"][1].as_f64().unwrap(), 0.05);
        assert_eq!(v["v"][0], 38);
    }
}
