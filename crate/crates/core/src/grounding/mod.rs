//! Syntactic grounding: run candidate chains, classify the outcome, and let
//! the debugger repair syntax and import failures only.
//!
//! Candidate code is never executed in-process. Each attempt writes an
//! `input.json` into a fresh scratch directory and hands it to a [`Runner`],
//! which must print one JSON record on stdout (see [`wire`]).

mod runner;
pub mod wire;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatClient};
use crate::corpus::EvalCase;
use crate::prompts::{tags, Asset};
use crate::pysrc;
use crate::student::Candidate;

pub use runner::{Canned, CannedRunner, Invocation, ProcessRunner, Runner};
pub use wire::{canned, Deviation, RunnerInput, RunnerOutput, WireCase, PROTOCOL_VERSION};

pub const DEFAULT_DEBUG_ROUNDS: u32 = 3;
pub const TRACEBACK_CAP: usize = 4000;

#[derive(Debug, thiserror::Error)]
pub enum GroundingError {
    #[error("cannot start runner {program}: {source}")]
    RunnerSpawn { program: PathBuf, source: std::io::Error },
    #[error("runner reported unknown phase `{0}`")]
    UnknownPhase(String),
    #[error("candidate chain is empty")]
    EmptyChain,
    #[error("debug rounds must be at least 1")]
    InvalidRounds,
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// A failure inside [`ground_loop`], with the reports gathered so far.
#[derive(Debug, thiserror::Error)]
#[error("{source} (after {} report(s))", reports.len())]
pub struct GroundLoopError {
    #[source]
    pub source: GroundingError,
    pub reports: Vec<RunReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    None,
    SyntaxError,
    ImportError,
    RuntimeException,
    AssertionMismatch,
    Timeout,
    RunnerCrash,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 7] = [
        ErrorClass::None,
        ErrorClass::SyntaxError,
        ErrorClass::ImportError,
        ErrorClass::RuntimeException,
        ErrorClass::AssertionMismatch,
        ErrorClass::Timeout,
        ErrorClass::RunnerCrash,
    ];

    /// Only these classes are handed to the debugger.
    pub fn repair_eligible(self) -> bool {
        matches!(self, ErrorClass::SyntaxError | ErrorClass::ImportError)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::None => "none",
            ErrorClass::SyntaxError => "syntax_error",
            ErrorClass::ImportError => "import_error",
            ErrorClass::RuntimeException => "runtime_exception",
            ErrorClass::AssertionMismatch => "assertion_mismatch",
            ErrorClass::Timeout => "timeout",
            ErrorClass::RunnerCrash => "runner_crash",
        }
    }
}

impl std::fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coarse split used by error histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatCategory {
    Pass,
    Semantic,
    ExecutionFailure,
}

pub fn stat_category(class: ErrorClass) -> StatCategory {
    match class {
        ErrorClass::None => StatCategory::Pass,
        ErrorClass::AssertionMismatch => StatCategory::Semantic,
        _ => StatCategory::ExecutionFailure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Load,
    Call,
    Compare,
    None,
}

impl Phase {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "load" => Phase::Load,
            "call" => Phase::Call,
            "compare" => Phase::Compare,
            "none" => Phase::None,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub index: usize,
    pub pass: bool,
    pub deviation: Option<Deviation>,
}

/// Outcome of executing one candidate chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: Status,
    pub error_class: ErrorClass,
    pub phase: Phase,
    pub exception_type: Option<String>,
    pub traceback_excerpt: String,
    pub case_results: Vec<CaseResult>,
    pub wall_ms: u64,
    /// Generation round of the candidate under test.
    pub generation_round: u32,
}

impl RunReport {
    fn failure(class: ErrorClass, excerpt: String, wall_ms: u64, generation_round: u32) -> Self {
        Self {
            status: Status::Fail,
            error_class: class,
            phase: Phase::None,
            exception_type: None,
            traceback_excerpt: tail(&excerpt, TRACEBACK_CAP),
            case_results: vec![],
            wall_ms,
            generation_round,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Deviations of every case that reached comparison.
    pub fn deviations(&self) -> Vec<f64> {
        self.case_results.iter().filter_map(|c| c.deviation.map(|d| d.0)).collect()
    }
}

/// Last `cap` characters of `text`.
pub fn tail(text: &str, cap: usize) -> String {
    let n = text.chars().count();
    if n <= cap {
        text.to_string()
    } else {
        text.chars().skip(n - cap).collect()
    }
}

/// Maps a parsed runner record to an error class.
pub fn classify_run(raw: &RunnerOutput) -> Result<ErrorClass, GroundingError> {
    let phase = Phase::parse(&raw.phase).ok_or_else(|| GroundingError::UnknownPhase(raw.phase.clone()))?;
    Ok(match phase {
        Phase::Load => match raw.exception_type.as_deref() {
            Some("SyntaxError" | "IndentationError" | "TabError") => ErrorClass::SyntaxError,
            Some("ImportError" | "ModuleNotFoundError") => ErrorClass::ImportError,
            _ => ErrorClass::RuntimeException,
        },
        Phase::Call => ErrorClass::RuntimeException,
        Phase::Compare => ErrorClass::AssertionMismatch,
        Phase::None => {
            if raw.case_results.iter().all(|c| c.pass) {
                ErrorClass::None
            } else {
                ErrorClass::AssertionMismatch
            }
        }
    })
}

/// Converts a runner's stdout into a report, turning protocol violations
/// into `runner_crash`.
fn report_from_output(stdout: &[u8], n_cases: usize, generation_round: u32) -> RunReport {
    let crash = |detail: String| RunReport::failure(ErrorClass::RunnerCrash, detail, 0, generation_round);
    let raw: RunnerOutput = match serde_json::from_slice(stdout) {
        Ok(r) => r,
        Err(e) => {
            return crash(format!("unparsable runner output ({e}):\n{}", String::from_utf8_lossy(stdout)));
        }
    };
    if raw.v != PROTOCOL_VERSION {
        return crash(format!("runner speaks protocol v{}, engine expects v{PROTOCOL_VERSION}", raw.v));
    }
    let class = match classify_run(&raw) {
        Ok(c) => c,
        Err(e) => return crash(e.to_string()),
    };
    let mut seen = vec![false; n_cases];
    for c in &raw.case_results {
        if c.index >= n_cases || std::mem::replace(&mut seen[c.index], true) {
            return crash(format!("runner reported invalid or repeated case index {}", c.index));
        }
    }
    if class == ErrorClass::None && seen.iter().any(|s| !s) {
        return crash("runner reported success without a result for every case".into());
    }
    if raw.phase == "compare" && raw.case_results.iter().all(|c| c.pass) {
        return crash("runner reported a compare failure but every case passed".into());
    }
    let mut case_results: Vec<CaseResult> = raw
        .case_results
        .into_iter()
        .map(|c| CaseResult { index: c.index, pass: c.pass, deviation: c.deviation })
        .collect();
    case_results.sort_by_key(|c| c.index);
    let traceback = match &raw.exception_type {
        Some(exc) if !raw.traceback.contains(exc.as_str()) => format!("{}\n{exc}", raw.traceback),
        _ => raw.traceback,
    };
    RunReport {
        status: if class == ErrorClass::None { Status::Pass } else { Status::Fail },
        error_class: class,
        phase: Phase::parse(&raw.phase).unwrap_or(Phase::None),
        exception_type: raw.exception_type,
        traceback_excerpt: tail(&traceback, TRACEBACK_CAP),
        case_results,
        wall_ms: raw.wall_ms,
        generation_round,
    }
}

#[derive(Debug, Clone)]
pub struct Limits {
    pub timeout_s: u64,
    /// Extra wall-clock time granted beyond `timeout_s` before the engine
    /// kills the runner.
    pub grace: Duration,
    /// Parent of per-execution scratch directories; the system temp dir when
    /// unset.
    pub scratch_root: Option<PathBuf>,
}

impl Default for Limits {
    fn default() -> Self {
        Self { timeout_s: 60, grace: Duration::from_secs(2), scratch_root: None }
    }
}

impl Limits {
    pub fn with_timeout(timeout_s: u64) -> Self {
        Self { timeout_s, ..Self::default() }
    }

    pub fn deadline(&self) -> Duration {
        Duration::from_secs(self.timeout_s) + self.grace
    }
}

/// Runs `chain` (in step order) against `suite`.
pub fn execute_chain(
    chain: &[Candidate],
    suite: &[EvalCase],
    runner: &dyn Runner,
    limits: &Limits,
) -> Result<RunReport, GroundingError> {
    let last = chain.last().ok_or(GroundingError::EmptyChain)?;
    let round = last.generation_round;
    let code = chain.iter().map(|c| c.code.trim_end()).collect::<Vec<_>>().join("\n\n\n") + "\n";
    let input = RunnerInput { v: PROTOCOL_VERSION, code, cases: suite.to_vec(), timeout_s: limits.timeout_s };

    let scratch = match &limits.scratch_root {
        Some(root) => {
            std::fs::create_dir_all(root).map_err(|source| GroundingError::Io { path: root.clone(), source })?;
            tempfile::Builder::new().prefix("run-").tempdir_in(root)
        }
        None => tempfile::Builder::new().prefix("run-").tempdir(),
    }
    .map_err(|source| GroundingError::Io { path: limits.scratch_root.clone().unwrap_or_default(), source })?;
    let input_path = scratch.path().join("input.json");
    let bytes = serde_json::to_vec(&input).expect("runner input serializes");
    std::fs::write(&input_path, bytes).map_err(|source| GroundingError::Io { path: input_path.clone(), source })?;

    let report = match runner.invoke(&input_path, scratch.path(), limits.deadline())? {
        Invocation::TimedOut { elapsed_ms } => RunReport::failure(
            ErrorClass::Timeout,
            format!("runner exceeded the {:.1}s deadline", limits.deadline().as_secs_f64()),
            elapsed_ms,
            round,
        ),
        Invocation::Completed { stdout, stderr, exit_code: Some(0) } => {
            let mut r = report_from_output(&stdout, suite.len(), round);
            if r.error_class == ErrorClass::RunnerCrash && !stderr.is_empty() {
                r.traceback_excerpt =
                    tail(&format!("{}\n{}", r.traceback_excerpt, String::from_utf8_lossy(&stderr)), TRACEBACK_CAP);
            }
            r
        }
        Invocation::Completed { stdout, stderr, exit_code } => {
            let status = exit_code.map_or("a signal".to_string(), |c| format!("status {c}"));
            RunReport::failure(
                ErrorClass::RunnerCrash,
                format!(
                    "runner exited with {status}\n{}\n{}",
                    String::from_utf8_lossy(&stderr),
                    String::from_utf8_lossy(&stdout)
                ),
                0,
                round,
            )
        }
    };
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Passed,
    NotRepairable,
    RoundsExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundingOutcome {
    pub final_candidate: Candidate,
    pub reports: Vec<RunReport>,
    pub rounds_used: u32,
    pub terminal_reason: TerminalReason,
}

impl GroundingOutcome {
    pub fn last_report(&self) -> &RunReport {
        self.reports.last().expect("at least one report")
    }
}

/// Executes `prior_chain + candidate` and repairs syntax or import failures
/// with the debugger, up to `k` rounds.
#[allow(clippy::too_many_arguments)]
pub fn ground_loop(
    candidate: Candidate,
    prior_chain: &[Candidate],
    suite: &[EvalCase],
    k: u32,
    client: &ChatClient,
    runner: &dyn Runner,
    limits: &Limits,
) -> Result<GroundingOutcome, GroundLoopError> {
    let mut reports = Vec::new();
    if k == 0 {
        return Err(GroundLoopError { source: GroundingError::InvalidRounds, reports });
    }
    let mut current = candidate;
    let mut rounds_used = 0;
    let mut chain: Vec<Candidate> = prior_chain.to_vec();
    loop {
        chain.push(current.clone());
        let report = execute_chain(&chain, suite, runner, limits);
        chain.pop();
        let report = match report {
            Ok(r) => r,
            Err(source) => return Err(GroundLoopError { source, reports }),
        };
        let class = report.error_class;
        reports.push(report);
        let terminal = if class == ErrorClass::None {
            Some(TerminalReason::Passed)
        } else if !class.repair_eligible() {
            Some(TerminalReason::NotRepairable)
        } else if rounds_used >= k {
            Some(TerminalReason::RoundsExhausted)
        } else {
            None
        };
        if let Some(terminal_reason) = terminal {
            return Ok(GroundingOutcome { final_candidate: current, reports, rounds_used, terminal_reason });
        }

        let last = reports.last().expect("just pushed");
        let error = match &last.exception_type {
            Some(exc) => format!("{exc}\n{}", last.traceback_excerpt),
            None => last.traceback_excerpt.clone(),
        };
        let messages = Asset::Debugger.render(&[
            ("header", &current.signature.header_text),
            ("code", &current.code),
            ("error", &error),
        ]);
        let response = match client.ask(tags::DEBUGGER, messages) {
            Ok(r) => r,
            Err(e) => return Err(GroundLoopError { source: e.into(), reports }),
        };
        let code = pysrc::first_fenced_block(&response).unwrap_or_else(|| response.trim().to_string());
        current = Candidate::new(code, &current.signature.clone(), &current.subproblem.clone(), current.generation_round + 1);
        rounds_used += 1;
    }
}
