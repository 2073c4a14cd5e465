use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{solve_with, ProblemResult, Services, SHARED_COMPONENTS};
use super::{DriverError, PipelineConfig, Strategy};
use crate::backend::ChatClient;
use crate::corpus::{assign_domain, select_teacher_exemplars, Corpus, DomainAssignment, DomainLabel, Split};
use crate::evaluator::{write_report, ExpectedShape, Report, ReportContext, ResultsFile, SubResult};
use crate::prompts::asset_versions;
use crate::teacher::{distill, DomainMemory, TeacherReport, TeacherSettings};

/// How the mosaic strategy gets its guidance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MemorySource {
    /// Run the teacher phase now and save the result under `<out>/memory`.
    Build,
    /// Load templates written by an earlier `teacher-build`.
    Load(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem_id: String,
    pub domain: DomainLabel,
    pub solved: bool,
    pub sub_passed: usize,
    pub sub_total: usize,
    pub zero_shot: bool,
}

impl From<&ProblemResult> for ProblemSummary {
    fn from(r: &ProblemResult) -> Self {
        Self {
            problem_id: r.problem_id.clone(),
            domain: r.domain.clone(),
            solved: r.solved(),
            sub_passed: r.sub_results.iter().filter(|s| s.passed).count(),
            sub_total: r.sub_results.len(),
            zero_shot: r.zero_shot,
        }
    }
}

/// Everything needed to replay a run given its transcript. Timestamps live
/// here and never in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub strategy: Strategy,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: PipelineConfig,
    pub corpus_digest: String,
    pub asset_versions: BTreeMap<String, u32>,
    pub runner: String,
    pub transcript: Option<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
    pub shared_components: Vec<String>,
    pub domain_assignments: Vec<DomainAssignment>,
    /// Mosaic only: domains solved without a guidance template.
    pub zero_shot_domains: Vec<DomainLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<TeacherReport>,
    pub problems: Vec<ProblemSummary>,
    pub notes: Vec<String>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub results: Vec<SubResult>,
    pub problems: Vec<ProblemResult>,
    pub report: Report,
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DriverError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| DriverError::Io { path: path.into(), source })
}

/// Runs the teacher phase over `corpus`. Makes backend calls only; nothing
/// is executed.
pub fn teacher_phase(
    corpus: &Corpus,
    config: &PipelineConfig,
    client: &ChatClient,
) -> Result<(DomainMemory, TeacherReport), DriverError> {
    let selection = match select_teacher_exemplars(corpus, config.teacher_fraction, config.seed) {
        Ok(s) => s,
        Err(crate::corpus::CorpusError::NoValidationSplit) => {
            tracing::warn!("corpus has no validation problems; every domain runs without guidance");
            let report = TeacherReport { uncovered: corpus.domains().iter().cloned().collect(), ..Default::default() };
            return Ok((DomainMemory::default(), report));
        }
        Err(e) => return Err(e.into()),
    };
    let settings = TeacherSettings { mode: config.reflection_mode, max_iters: config.reflection_max_iters };
    let (memory, report) = distill(&selection, settings, client)?;
    memory.check_provenance(corpus)?;
    Ok((memory, report))
}

/// Runs one strategy over the test split and writes `report.json`,
/// `report.md`, `results.json` and `manifest.json` into `out_dir`.
///
/// On an infrastructure failure the manifest is still written, with status
/// `failed` and the problems finished so far.
pub fn run_corpus(
    corpus: &Corpus,
    config: &PipelineConfig,
    strategy: Strategy,
    services: Services<'_>,
    memory_source: MemorySource,
    out_dir: &Path,
) -> Result<RunOutcome, DriverError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| DriverError::Io { path: out_dir.into(), source })?;
    let test: Vec<_> = corpus.problems_in(Split::Test).collect();
    if test.is_empty() {
        return Err(DriverError::NoTestProblems);
    }

    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        strategy,
        status: "running".into(),
        error: None,
        config: config.clone(),
        corpus_digest: corpus.digest(),
        asset_versions: asset_versions(),
        runner: services.runner.describe(),
        transcript: services.client.transcript().path().map(Path::to_path_buf),
        started_at: now(),
        finished_at: String::new(),
        shared_components: SHARED_COMPONENTS.iter().map(|s| s.to_string()).collect(),
        domain_assignments: vec![],
        zero_shot_domains: vec![],
        memory: None,
        teacher: None,
        problems: vec![],
        notes: vec![
            "decoding parameters (temperature, max_tokens) are engineering defaults"
                .into(),
        ],
    };
    let fail = |manifest: &mut RunManifest, e: DriverError| -> DriverError {
        manifest.status = "failed".into();
        manifest.error = Some(e.to_string());
        manifest.finished_at = now();
        let _ = write_json(&out_dir.join("manifest.json"), manifest);
        e
    };

    let memory = if strategy == Strategy::Mosaic {
        let loaded = match &memory_source {
            MemorySource::Load(dir) => DomainMemory::load(dir)
                .and_then(|m| m.check_provenance(corpus).map(|_| m))
                .map(|m| (m, None, format!("loaded from {}", dir.display())))
                .map_err(DriverError::from),
            MemorySource::Build => teacher_phase(corpus, config, services.client).and_then(|(m, report)| {
                let dir = out_dir.join("memory");
                m.save(&dir)?;
                Ok((m, Some(report), format!("built into {}", dir.display())))
            }),
        };
        match loaded {
            Ok((m, report, how)) => {
                manifest.teacher = report;
                manifest.memory = Some(how);
                m
            }
            Err(e) => return Err(fail(&mut manifest, e)),
        }
    } else {
        DomainMemory::default()
    };

    let known: BTreeSet<DomainLabel> = corpus.domains().clone();
    let mut assignments = Vec::with_capacity(test.len());
    for p in &test {
        match assign_domain(p, config.domain_assignment, &known, Some(services.client)) {
            Ok(a) => assignments.push(a),
            Err(crate::corpus::BucketingError::UnparsableClassification(answer)) => {
                tracing::warn!(problem = %p.id, %answer, "classification unparsable; keeping the stored label");
                manifest.notes.push(format!("problem {}: classification unparsable, stored label kept", p.id));
                assignments.push(DomainAssignment {
                    problem_id: p.id.clone(),
                    label: p.domain.clone(),
                    mode: config.domain_assignment,
                });
            }
            Err(e) => return Err(fail(&mut manifest, e.into())),
        }
    }
    if strategy == Strategy::Mosaic {
        let zero: BTreeSet<DomainLabel> =
            assignments.iter().filter(|a| memory.get(&a.label).is_none()).map(|a| a.label.clone()).collect();
        manifest.zero_shot_domains = zero.into_iter().collect();
    }
    manifest.domain_assignments = assignments.clone();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel_problems)
        .build()
        .map_err(|e| fail(&mut manifest, DriverError::ConfigInvalid(e.to_string())))?;
    let outcomes: Vec<Result<ProblemResult, DriverError>> = pool.install(|| {
        test.par_iter()
            .zip(assignments.par_iter())
            .map(|(p, a)| solve_with(strategy, p, &a.label, config, &memory, services))
            .collect()
    });
    let mut problems = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok(r) => problems.push(r),
            Err(e) if first_error.is_none() => first_error = Some(e),
            Err(e) => tracing::error!(error = %e, "additional problem failure"),
        }
    }
    manifest.problems = problems.iter().map(ProblemSummary::from).collect();
    if let Some(e) = first_error {
        return Err(fail(&mut manifest, e));
    }

    let results: Vec<SubResult> = problems.iter().flat_map(|p| p.sub_results.iter().cloned()).collect();
    let results_file = ResultsFile {
        context: ReportContext {
            strategy: strategy.as_str().into(),
            corpus_digest: Some(manifest.corpus_digest.clone()),
            config: config.report_snapshot(),
            asset_versions: manifest.asset_versions.clone(),
        },
        expected: ExpectedShape::from_problems(test.iter().copied()),
        results: results.clone(),
    };
    let written = results_file
        .save(out_dir.join("results.json"))
        .and_then(|_| results_file.evaluate())
        .and_then(|report| write_report(&report, out_dir).map(|_| report));
    let report = match written {
        Ok(r) => r,
        Err(e) => return Err(fail(&mut manifest, e.into())),
    };
    manifest.status = "complete".into();
    manifest.finished_at = now();
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome { results, problems, report, manifest, out_dir: out_dir.to_path_buf() })
}
