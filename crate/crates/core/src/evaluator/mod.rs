//! Scoring under the all-subproblems-pass rule, error and precision
//! histograms, and deterministic report files.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::corpus::{DomainLabel, Problem};
use crate::grounding::{stat_category, Deviation, ErrorClass, StatCategory};

pub use report::{render_markdown, table_row, write_report, Report, ReportContext, ResultsFile, REPORT_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no result for subproblem `{subproblem}` of problem `{problem}`")]
    IncompleteResults { problem: String, subproblem: String },
    #[error("result for `{0}` does not match any expected subproblem")]
    UnexpectedResult(String),
    #[error("more than one result for `{0}`")]
    DuplicateResult(String),
    #[error("result for `{0}` has passed={1} but error class {2}")]
    InconsistentResult(String, bool, ErrorClass),
    #[error("negative deviation {0}")]
    NegativeDeviation(f64),
    #[error("deviation is NaN")]
    NanDeviation,
    #[error("I/O error at {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("malformed results file {path}: {detail}")]
    ResultsFormat { path: std::path::PathBuf, detail: String },
}

/// Outcome of one subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubResult {
    pub problem_id: String,
    pub subproblem_id: String,
    pub domain: DomainLabel,
    pub passed: bool,
    pub error_class: ErrorClass,
    pub deviations: Vec<Deviation>,
    pub rounds_used: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedProblem {
    pub domain: DomainLabel,
    pub subproblems: Vec<String>,
}

/// Which subproblems a complete result set must cover.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedShape {
    pub problems: BTreeMap<String, ExpectedProblem>,
}

impl ExpectedShape {
    pub fn from_problems<'a>(problems: impl IntoIterator<Item = &'a Problem>) -> Self {
        Self {
            problems: problems
                .into_iter()
                .map(|p| {
                    (
                        p.id.clone(),
                        ExpectedProblem {
                            domain: p.domain.clone(),
                            subproblems: p.subproblems.iter().map(|s| s.id.clone()).collect(),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub main_solved: u64,
    pub main_total: u64,
    pub sub_solved: u64,
    pub sub_total: u64,
}

impl Tally {
    pub fn main_fraction(&self) -> String {
        format!("{}/{}", self.main_solved, self.main_total)
    }

    pub fn sub_fraction(&self) -> String {
        format!("{}/{}", self.sub_solved, self.sub_total)
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, o: Self) {
        self.main_solved += o.main_solved;
        self.main_total += o.main_total;
        self.sub_solved += o.sub_solved;
        self.sub_total += o.sub_total;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBoard {
    pub per_domain: BTreeMap<DomainLabel, Tally>,
    pub total: Tally,
}

fn check_result(r: &SubResult) -> Result<(), EvalError> {
    if r.passed != (r.error_class == ErrorClass::None) {
        return Err(EvalError::InconsistentResult(r.subproblem_id.clone(), r.passed, r.error_class));
    }
    Ok(())
}

/// Scores `results`: a main problem is solved iff every one of its
/// subproblems passed.
pub fn score(results: &[SubResult], expected: &ExpectedShape) -> Result<ScoreBoard, EvalError> {
    let mut by_id: BTreeMap<&str, &SubResult> = BTreeMap::new();
    for r in results {
        check_result(r)?;
        let known = expected
            .problems
            .get(&r.problem_id)
            .is_some_and(|p| p.domain == r.domain && p.subproblems.contains(&r.subproblem_id));
        if !known {
            return Err(EvalError::UnexpectedResult(r.subproblem_id.clone()));
        }
        if by_id.insert(&r.subproblem_id, r).is_some() {
            return Err(EvalError::DuplicateResult(r.subproblem_id.clone()));
        }
    }
    let mut board = ScoreBoard::default();
    for (pid, p) in &expected.problems {
        let mut t = Tally { main_total: 1, sub_total: p.subproblems.len() as u64, ..Tally::default() };
        for sid in &p.subproblems {
            let r = by_id
                .get(sid.as_str())
                .ok_or_else(|| EvalError::IncompleteResults { problem: pid.clone(), subproblem: sid.clone() })?;
            t.sub_solved += r.passed as u64;
        }
        t.main_solved = (t.sub_solved == t.sub_total) as u64;
        *board.per_domain.entry(p.domain.clone()).or_default() += t;
    }
    for t in board.per_domain.values() {
        board.total += *t;
    }
    Ok(board)
}

/// Failure counts by domain and class, plus the semantic versus
/// execution-failure split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub by_domain: BTreeMap<DomainLabel, BTreeMap<ErrorClass, u64>>,
    pub by_class: BTreeMap<ErrorClass, u64>,
    pub semantic: u64,
    pub execution_failure: u64,
}

impl ErrorHistogram {
    pub fn failures(&self) -> u64 {
        self.by_class.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_class.is_empty()
    }
}

/// Counts failing results only.
pub fn error_histogram(results: &[SubResult]) -> ErrorHistogram {
    let mut h = ErrorHistogram::default();
    for r in results.iter().filter(|r| !r.passed) {
        *h.by_domain.entry(r.domain.clone()).or_default().entry(r.error_class).or_default() += 1;
        *h.by_class.entry(r.error_class).or_default() += 1;
        match stat_category(r.error_class) {
            StatCategory::Semantic => h.semantic += 1,
            StatCategory::ExecutionFailure => h.execution_failure += 1,
            // A failing result with class none is inconsistent; score()
            // rejects it, the histogram counts it as an execution failure.
            StatCategory::Pass => h.execution_failure += 1,
        }
    }
    h
}

pub const BIN_COUNT: usize = 13;

/// Lower edges of bins 1..=12: 1e-10, 1e-9, ..., 1e1.
const EDGES: [f64; 12] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1];

pub const BIN_LABELS: [&str; BIN_COUNT] = [
    "<1e-10", "1e-10", "1e-9", "1e-8", "1e-7", "1e-6", "1e-5", "1e-4", "1e-3", "1e-2", "1e-1", "1e0", ">=1e1",
];

/// Bin index for a deviation: 0 below 1e-10, 11 decades, 12 at or above 10
/// (including infinity). A value equal to an edge belongs to the bin above.
pub fn deviation_bin(d: f64) -> Result<usize, EvalError> {
    if d.is_nan() {
        return Err(EvalError::NanDeviation);
    }
    if d < 0.0 {
        return Err(EvalError::NegativeDeviation(d));
    }
    Ok(EDGES.iter().take_while(|&&edge| edge <= d).count())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionHistogram {
    pub bins: [u64; BIN_COUNT],
}

impl PrecisionHistogram {
    pub fn record(&mut self, d: f64) -> Result<(), EvalError> {
        self.bins[deviation_bin(d)?] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub total: PrecisionHistogram,
    pub per_domain: BTreeMap<DomainLabel, PrecisionHistogram>,
}

/// Bins every recorded deviation, from passing and failing results alike.
pub fn precision_histogram(results: &[SubResult]) -> Result<PrecisionReport, EvalError> {
    let mut out = PrecisionReport::default();
    for r in results {
        for d in &r.deviations {
            out.total.record(d.0)?;
            out.per_domain.entry(r.domain.clone()).or_default().record(d.0)?;
        }
    }
    Ok(out)
}

/// Domains in canonical order: those with problems, plus any extras.
pub(crate) fn domains_of(board: &ScoreBoard, extra: impl IntoIterator<Item = DomainLabel>) -> Vec<DomainLabel> {
    let mut set: BTreeSet<DomainLabel> = board.per_domain.keys().cloned().collect();
    set.extend(extra);
    set.into_iter().collect()
}
