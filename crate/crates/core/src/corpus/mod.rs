//! The portable problem corpus.
//!
//! A corpus directory holds one JSON record per problem under `problems/`
//! and a `manifest.json` listing which problem ids belong to the validation
//! and test splits:
//!
//! ```text
//! corpus/
//!   manifest.json          {"validation": ["11"], "test": ["12", "13"]}
//!   problems/11.json       {"id": "11", "domain": "physics", ...}
//!   problems/12.json
//! ```
//!
//! Field names match the Rust field names of [`Problem`], [`SubProblem`],
//! [`FunctionSignature`], [`EvalCase`] and [`TargetValue`]. Only validation
//! problems may carry `ground_truth_code`.

mod bucketing;
mod domain;
mod select;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use bucketing::{assign_domain, BucketingError, DomainAssignment, DomainMode};
pub use domain::{DomainLabel, InvalidDomainLabel, CANONICAL_DOMAINS};
pub use select::{select_teacher_exemplars, Exemplar, ExemplarSelection};
pub use types::{
    DType, Datum, EvalCase, FunctionSignature, IoTest, Problem, Split, SubProblem, TargetValue,
    ValueKind, DEFAULT_ATOL, DEFAULT_RTOL,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus at {0} contains no problem files")]
    CorpusEmpty(PathBuf),
    #[error("schema violation in {file}: field `{field}`: {detail}")]
    SchemaViolation { file: PathBuf, field: String, detail: String },
    #[error("duplicate problem id `{0}`")]
    DuplicateId(String),
    #[error("problem `{0}` appears in both validation and test splits")]
    SplitOverlap(String),
    #[error("teacher fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("selected exemplar `{0}` belongs to the test split")]
    NonOverlapViolation(String),
    #[error("corpus has no validation split")]
    NoValidationSplit,
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CorpusError {
    fn schema(file: impl Into<PathBuf>, field: impl Into<String>, detail: impl Into<String>) -> Self {
        Self::SchemaViolation { file: file.into(), field: field.into(), detail: detail.into() }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

/// The on-disk `manifest.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

/// An immutable, validated problem corpus.
///
/// Problems are sorted by id and subproblems by step index, so iteration order
/// is stable regardless of directory listing order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    problems: Vec<Problem>,
    split: BTreeMap<String, Split>,
    domains: BTreeSet<DomainLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub problems: usize,
    pub subproblems: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub problems: usize,
    pub subproblems: usize,
    pub domains: usize,
    pub validation: SplitCounts,
    pub test: SplitCounts,
    pub per_domain: BTreeMap<DomainLabel, SplitCounts>,
}

impl Corpus {
    /// Builds a corpus from in-memory parts, enforcing every invariant that
    /// [`load_corpus`] enforces.
    pub fn new(
        mut problems: Vec<Problem>,
        split: BTreeMap<String, Split>,
    ) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for p in &problems {
            if !seen.insert(p.id.clone()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        for p in &mut problems {
            p.subproblems.sort_by_key(|s| s.step_index);
        }
        problems.sort_by(|a, b| a.id.cmp(&b.id));
        for p in &problems {
            let file = PathBuf::from(format!("problems/{}.json", p.id));
            let Some(tag) = split.get(&p.id) else {
                return Err(CorpusError::schema(file, "split", "problem is not listed in manifest.json"));
            };
            validate_problem(p, *tag).map_err(|(field, detail)| CorpusError::schema(&file, field, detail))?;
        }
        if let Some(extra) = split.keys().find(|id| !seen.contains(*id)) {
            return Err(CorpusError::schema(
                "manifest.json",
                "split",
                format!("lists `{extra}` but no such problem file exists"),
            ));
        }
        let domains = problems.iter().map(|p| p.domain.clone()).collect();
        Ok(Self { problems, split, domains })
    }

    pub fn problems(&self) -> &[Problem] {
        &self.problems
    }

    pub fn domains(&self) -> &BTreeSet<DomainLabel> {
        &self.domains
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.problems[i])
    }

    pub fn split_of(&self, problem_id: &str) -> Option<Split> {
        self.split.get(problem_id).copied()
    }

    pub fn split_map(&self) -> &BTreeMap<String, Split> {
        &self.split
    }

    pub fn problems_in(&self, split: Split) -> impl Iterator<Item = &Problem> {
        self.problems.iter().filter(move |p| self.split.get(&p.id) == Some(&split))
    }

    pub fn stats(&self) -> CorpusStats {
        let mut stats = CorpusStats { domains: self.domains.len(), ..Default::default() };
        for p in &self.problems {
            let n = p.subproblems.len();
            stats.problems += 1;
            stats.subproblems += n;
            let bucket = match self.split[&p.id] {
                Split::Validation => &mut stats.validation,
                Split::Test => &mut stats.test,
            };
            bucket.problems += 1;
            bucket.subproblems += n;
            let d = stats.per_domain.entry(p.domain.clone()).or_default();
            d.problems += 1;
            d.subproblems += n;
        }
        stats
    }

    pub fn split_manifest(&self) -> SplitManifest {
        let mut manifest = SplitManifest::default();
        for (id, split) in &self.split {
            match split {
                Split::Validation => manifest.validation.push(id.clone()),
                Split::Test => manifest.test.push(id.clone()),
            }
        }
        manifest
    }

    /// Hex SHA-256 over the canonical JSON form of every problem record and
    /// the split manifest.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let manifest = serde_json::to_vec(&self.split_manifest()).expect("manifest serializes");
        hasher.update(&manifest);
        for p in &self.problems {
            let value = serde_json::to_value(p).expect("problem serializes");
            hasher.update(value.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn validate_problem(p: &Problem, split: Split) -> Result<(), (String, String)> {
    let err = |field: &str, detail: String| Err((field.to_string(), detail));
    if p.id.is_empty() {
        return err("id", "empty problem id".into());
    }
    if p.subproblems.is_empty() {
        return err("subproblems", "problem has no subproblems".into());
    }
    let mut defined: Vec<&str> = Vec::new();
    let mut sub_ids = HashSet::new();
    for (i, sub) in p.subproblems.iter().enumerate() {
        let at = |f: &str| format!("subproblems[{i}].{f}");
        if sub.step_index as usize != i + 1 {
            return err(&at("step_index"), format!("expected step {}, found {}", i + 1, sub.step_index));
        }
        if sub.id.is_empty() || !sub_ids.insert(sub.id.as_str()) {
            return err(&at("id"), format!("empty or repeated subproblem id `{}`", sub.id));
        }
        if let Err(detail) = sub.signature.check() {
            return err(&at("signature"), detail);
        }
        defined.push(sub.signature.name.as_str());
        if sub.eval_suite.is_empty() {
            return err(&at("eval_suite"), "evaluation suite is empty".into());
        }
        match (split, &sub.ground_truth_code) {
            (Split::Validation, None) => {
                return err(&at("ground_truth_code"), "validation subproblem lacks ground truth".into())
            }
            (Split::Test, Some(_)) => {
                return err(&at("ground_truth_code"), "test subproblem carries ground truth".into())
            }
            _ => {}
        }
        for (j, case) in sub.eval_suite.iter().enumerate() {
            let field = at(&format!("eval_suite[{j}]"));
            if !defined.contains(&case.entry.as_str()) {
                return err(&field, format!("entry `{}` is not defined at or before this step", case.entry));
            }
            if !(case.rtol >= 0.0 && case.atol >= 0.0) {
                return err(&field, "tolerances must be non-negative".into());
            }
            for v in case.args.iter().chain(std::iter::once(&case.expected)) {
                v.validate().map_err(|d| (field.clone(), d))?;
            }
        }
        if let Some(io_tests) = &sub.io_tests {
            for (j, t) in io_tests.iter().enumerate() {
                let field = at(&format!("io_tests[{j}]"));
                for v in t.args.iter().chain(std::iter::once(&t.expected)) {
                    v.validate().map_err(|d| (field.clone(), d))?;
                }
                if sub.eval_suite.iter().any(|c| c.args == t.args && c.expected == t.expected) {
                    return err(&field, "visible io test duplicates a hidden evaluation case".into());
                }
            }
        }
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, rel: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CorpusError::schema(rel, field, e.into_inner().to_string())
    })
}

/// Loads and validates a corpus directory.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let root = path.as_ref();
    let problems_dir = root.join("problems");
    let mut files: Vec<PathBuf> = match fs::read_dir(&problems_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(CorpusError::io(&problems_dir, e)),
    };
    if files.is_empty() {
        return Err(CorpusError::CorpusEmpty(root.to_path_buf()));
    }
    files.sort();

    let manifest: SplitManifest = read_json(&root.join("manifest.json"), Path::new("manifest.json"))?;
    let mut split = BTreeMap::new();
    for id in &manifest.validation {
        split.insert(id.clone(), Split::Validation);
    }
    for id in &manifest.test {
        if split.insert(id.clone(), Split::Test) == Some(Split::Validation) {
            return Err(CorpusError::SplitOverlap(id.clone()));
        }
    }

    let mut problems = Vec::with_capacity(files.len());
    for file in &files {
        let rel = file.strip_prefix(root).unwrap_or(file).to_path_buf();
        let problem: Problem = read_json(file, &rel)?;
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if stem != problem.id {
            return Err(CorpusError::schema(rel, "id", format!("file name says `{stem}`, record says `{}`", problem.id)));
        }
        problems.push(problem);
    }
    Corpus::new(problems, split)
}

/// Writes `corpus` in the directory layout read by [`load_corpus`].
pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let root = path.as_ref();
    let problems_dir = root.join("problems");
    fs::create_dir_all(&problems_dir).map_err(|e| CorpusError::io(&problems_dir, e))?;
    let write = |file: PathBuf, bytes: Vec<u8>| fs::write(&file, bytes).map_err(|e| CorpusError::io(&file, e));
    let mut manifest = serde_json::to_vec_pretty(&corpus.split_manifest()).expect("manifest serializes");
    manifest.push(b'\n');
    write(root.join("manifest.json"), manifest)?;
    for p in corpus.problems() {
        let mut bytes = serde_json::to_vec_pretty(p).expect("problem serializes");
        bytes.push(b'\n');
        write(problems_dir.join(format!("{}.json", p.id)), bytes)?;
    }
    Ok(())
}
