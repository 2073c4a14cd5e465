//! Teacher phase: turn validation ground truth into per-domain guidance.
//!
//! For each selected exemplar the teacher asks the model to explain the
//! reference code as numbered steps ([`derive_rationale`]), refines those
//! steps into pseudocode under a critique loop ([`self_reflect`]) and collects
//! the results into one [`GuidanceTemplate`] per domain
//! ([`build_guidance_template`]). Nothing here executes code.

mod memory;
mod reflect;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatClient};
use crate::corpus::{DomainLabel, Exemplar, ExemplarSelection, FunctionSignature};
use crate::prompts::{numbered_steps, tags, Asset};

pub use memory::DomainMemory;
pub use reflect::{parse_critique, self_reflect, Critique, ReflectionMode, ReflectionOutcome, Verdict};

pub const DEFAULT_REFLECTION_ITERS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum TeacherError {
    #[error("exemplar `{0}` has no ground-truth code")]
    MissingGroundTruth(String),
    #[error("no numbered steps in rationale response for `{exemplar}`")]
    RationaleParse { exemplar: String, response: String },
    #[error("critique response has no APPROVED or REVISE verdict")]
    CritiqueParse { response: String },
    #[error("max_iters must be at least 1")]
    ZeroIterations,
    #[error("cannot build a guidance template from zero exemplars")]
    EmptyExemplarSet,
    #[error("exemplar `{exemplar}` belongs to {found}, template is for {expected}")]
    DomainMismatch { exemplar: String, expected: DomainLabel, found: DomainLabel },
    #[error("template provenance id `{0}` is not a validation subproblem")]
    ProvenanceViolation(String),
    #[error("memory file {path}: {detail}")]
    MemoryFormat { path: std::path::PathBuf, detail: String },
    #[error("I/O error at {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Ordered solution steps explaining one exemplar's reference code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rationale {
    pub steps: Vec<String>,
    /// Exemplar subproblem id.
    pub source: String,
}

impl Rationale {
    pub fn numbered(&self) -> String {
        self.steps.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n")
    }
}

/// Asks the model to explain `exemplar`'s ground truth as numbered steps.
pub fn derive_rationale(exemplar: &Exemplar, client: &ChatClient) -> Result<Rationale, TeacherError> {
    let code = exemplar
        .sub
        .ground_truth_code
        .as_deref()
        .ok_or_else(|| TeacherError::MissingGroundTruth(exemplar.id().to_string()))?;
    let messages = Asset::TeacherRationale.render(&[
        ("main", &exemplar.main_statement),
        ("step", &exemplar.sub.step_statement),
        ("header", &exemplar.sub.signature.header_text),
        ("code", code),
    ]);
    let response = client.ask(tags::TEACHER_RATIONALE, messages)?;
    let steps = numbered_steps(&response);
    if steps.is_empty() {
        return Err(TeacherError::RationaleParse { exemplar: exemplar.id().to_string(), response });
    }
    Ok(Rationale { steps, source: exemplar.id().to_string() })
}

/// One worked example inside a guidance template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateExemplar {
    pub statement: String,
    pub pseudocode: String,
    pub signature: FunctionSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub exemplar_id: String,
    pub problem_id: String,
    pub iterations: u32,
    pub converged: bool,
}

/// Few-shot material for one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidanceTemplate {
    pub domain: DomainLabel,
    pub exemplars: Vec<TemplateExemplar>,
    pub provenance: Vec<Provenance>,
}

impl GuidanceTemplate {
    /// Renders the exemplars as few-shot blocks for the rationale agent.
    pub fn render_examples(&self) -> String {
        let mut out = String::new();
        for (i, ex) in self.exemplars.iter().enumerate() {
            out.push_str(&format!(
                "=== Worked example {} ({}) ===\nStep:\n{}\n\nFunction header:\n{}\n\nPseudocode:\n{}\n\n",
                i + 1,
                self.domain,
                ex.statement.trim(),
                ex.signature.header_text.trim_end(),
                ex.pseudocode.trim()
            ));
        }
        out
    }
}

/// An exemplar together with its refined pseudocode.
#[derive(Debug, Clone)]
pub struct RefinedExemplar {
    pub exemplar: Exemplar,
    pub pseudocode: String,
    pub iterations: u32,
    pub converged: bool,
}

/// Builds the template for `domain` and stores it in `memory`, replacing any
/// previous template for that domain.
pub fn build_guidance_template(
    domain: &DomainLabel,
    mut refined: Vec<RefinedExemplar>,
    memory: &mut DomainMemory,
) -> Result<GuidanceTemplate, TeacherError> {
    if refined.is_empty() {
        return Err(TeacherError::EmptyExemplarSet);
    }
    if let Some(stray) = refined.iter().find(|r| &r.exemplar.domain != domain) {
        return Err(TeacherError::DomainMismatch {
            exemplar: stray.exemplar.id().to_string(),
            expected: domain.clone(),
            found: stray.exemplar.domain.clone(),
        });
    }
    refined.sort_by(|a, b| {
        (&a.exemplar.problem_id, a.exemplar.sub.step_index).cmp(&(&b.exemplar.problem_id, b.exemplar.sub.step_index))
    });
    let template = GuidanceTemplate {
        domain: domain.clone(),
        exemplars: refined
            .iter()
            .map(|r| TemplateExemplar {
                statement: r.exemplar.sub.step_statement.clone(),
                pseudocode: r.pseudocode.clone(),
                signature: r.exemplar.sub.signature.clone(),
            })
            .collect(),
        provenance: refined
            .iter()
            .map(|r| Provenance {
                exemplar_id: r.exemplar.id().to_string(),
                problem_id: r.exemplar.problem_id.clone(),
                iterations: r.iterations,
                converged: r.converged,
            })
            .collect(),
    };
    memory.insert(template.clone());
    Ok(template)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TeacherSettings {
    pub mode: ReflectionMode,
    pub max_iters: u32,
}

impl Default for TeacherSettings {
    fn default() -> Self {
        Self { mode: ReflectionMode::Whole, max_iters: DEFAULT_REFLECTION_ITERS }
    }
}

/// An exemplar the teacher had to drop, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedExemplar {
    pub exemplar_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeacherReport {
    pub skipped: Vec<SkippedExemplar>,
    pub unconverged: Vec<String>,
    /// Domains left without a template.
    pub uncovered: Vec<DomainLabel>,
}

/// Runs the whole teacher phase over a selection.
///
/// Exemplars whose responses cannot be parsed are skipped and reported;
/// backend failures abort the phase.
pub fn distill(
    selection: &ExemplarSelection,
    settings: TeacherSettings,
    client: &ChatClient,
) -> Result<(DomainMemory, TeacherReport), TeacherError> {
    let mut memory = DomainMemory::default();
    let mut report = TeacherReport { uncovered: selection.uncovered.clone(), ..Default::default() };
    for (domain, exemplars) in &selection.by_domain {
        let mut refined = Vec::new();
        for ex in exemplars {
            let outcome = derive_rationale(ex, client)
                .and_then(|r| self_reflect(&r, ex, settings.mode, settings.max_iters, client));
            match outcome {
                Ok(o) => {
                    if !o.converged {
                        report.unconverged.push(ex.id().to_string());
                    }
                    refined.push(RefinedExemplar {
                        exemplar: ex.clone(),
                        pseudocode: o.pseudocode,
                        iterations: o.iterations,
                        converged: o.converged,
                    });
                }
                Err(e @ (TeacherError::RationaleParse { .. } | TeacherError::CritiqueParse { .. })) => {
                    tracing::warn!(exemplar = ex.id(), error = %e, "skipping exemplar");
                    report.skipped.push(SkippedExemplar { exemplar_id: ex.id().to_string(), reason: e.to_string() });
                }
                Err(e) => return Err(e),
            }
        }
        if refined.is_empty() {
            report.uncovered.push(domain.clone());
        } else {
            build_guidance_template(domain, refined, &mut memory)?;
        }
    }
    report.uncovered.sort();
    Ok((memory, report))
}
