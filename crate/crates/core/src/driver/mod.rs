//! End-to-end orchestration: configuration, strategies, per-problem
//! pipelines and whole-corpus runs.

mod config;
mod run;
mod solve;

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;
use crate::corpus::{BucketingError, CorpusError};
use crate::evaluator::EvalError;
use crate::grounding::GroundLoopError;
use crate::student::StudentError;
use crate::teacher::TeacherError;

pub use config::{PipelineConfig, RunnerConfig, SummarySource};
pub use run::{run_corpus, teacher_phase, MemorySource, ProblemSummary, RunManifest, RunOutcome};
pub use solve::{run_baseline, solve_problem, solve_with, ProblemResult, Services, StepRecord, SHARED_COMPONENTS};

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("corpus has no test problems")]
    NoTestProblems,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Bucketing(#[from] BucketingError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Student(StudentError),
    #[error(transparent)]
    Grounding(GroundLoopError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<StudentError> for DriverError {
    fn from(e: StudentError) -> Self {
        match e {
            StudentError::Backend(b) => DriverError::Backend(b),
            other => DriverError::Student(other),
        }
    }
}

impl DriverError {
    /// Process exit code: 2 for configuration or corpus problems, 1 for
    /// everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::ConfigInvalid(_) | DriverError::NoTestProblems | DriverError::Corpus(_) => 2,
            DriverError::Teacher(TeacherError::MemoryFormat { .. } | TeacherError::ProvenanceViolation(_)) => 2,
            DriverError::Backend(BackendError::CredentialMissing(_)) => 2,
            _ => 1,
        }
    }
}

/// A generation policy. All strategies share grounding and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Mosaic,
    Direct,
    Cot,
    SelfPlanning,
    Analogical,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Mosaic, Strategy::Direct, Strategy::Cot, Strategy::SelfPlanning, Strategy::Analogical];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Mosaic => "mosaic",
            Strategy::Direct => "direct",
            Strategy::Cot => "cot",
            Strategy::SelfPlanning => "self_planning",
            Strategy::Analogical => "analogical",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected mosaic, direct, cot, self_planning or analogical)"))
    }
}

#[cfg(test)]
mod tests;
