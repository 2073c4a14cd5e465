use serde::{Deserialize, Serialize};

use super::{Rationale, TeacherError};
use crate::backend::ChatClient;
use crate::corpus::Exemplar;
use crate::prompts::{tags, Asset};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectionMode {
    /// One critique of the whole rationale per iteration.
    #[default]
    Whole,
    /// One critique per rationale step per iteration.
    Stepwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Approved,
    Revise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Critique {
    pub verdict: Verdict,
    pub issues: Vec<String>,
    pub iteration: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionOutcome {
    pub pseudocode: String,
    pub log: Vec<Critique>,
    pub iterations: u32,
    /// False when `max_iters` ran out before an approval.
    pub converged: bool,
}

/// Reads a critique verdict. The first line that is exactly `APPROVED` or
/// starts with `REVISE` decides; issue text follows `REVISE:` and any
/// subsequent lines.
pub fn parse_critique(response: &str, iteration: u32) -> Result<Critique, TeacherError> {
    let lines: Vec<&str> = response.lines().collect();
    for (i, raw) in lines.iter().enumerate() {
        let line = raw.trim().trim_matches(|c| c == '*' || c == '`');
        if line.trim_end_matches(['.', '!']) == "APPROVED" {
            return Ok(Critique { verdict: Verdict::Approved, issues: vec![], iteration });
        }
        if let Some(rest) = line.strip_prefix("REVISE") {
            let mut issues: Vec<String> = Vec::new();
            let first = rest.trim_start_matches([':', ' ', '-']).trim();
            if !first.is_empty() {
                issues.push(first.to_string());
            }
            for extra in &lines[i + 1..] {
                let item = extra.trim().trim_start_matches(['-', '*', ' ']).trim();
                if !item.is_empty() {
                    issues.push(item.to_string());
                }
            }
            if issues.is_empty() {
                issues.push("reviewer requested a revision without details".into());
            }
            return Ok(Critique { verdict: Verdict::Revise, issues, iteration });
        }
    }
    Err(TeacherError::CritiqueParse { response: response.to_string() })
}

fn feedback_block(issues: &[String]) -> String {
    if issues.is_empty() {
        return String::new();
    }
    let mut out = String::from("\nReviewer feedback to address:\n");
    for issue in issues {
        out.push_str("- ");
        out.push_str(issue);
        out.push('\n');
    }
    out
}

/// Refines `rationale` into pseudocode under a critique loop.
///
/// Each iteration issues one refinement call, then critiques the result: once
/// in whole mode, or once per rationale step in stepwise mode. The loop ends at
/// the first iteration whose critiques all approve, or after `max_iters`.
pub fn self_reflect(
    rationale: &Rationale,
    exemplar: &Exemplar,
    mode: ReflectionMode,
    max_iters: u32,
    client: &ChatClient,
) -> Result<ReflectionOutcome, TeacherError> {
    if max_iters == 0 {
        return Err(TeacherError::ZeroIterations);
    }
    let code = exemplar
        .sub
        .ground_truth_code
        .as_deref()
        .ok_or_else(|| TeacherError::MissingGroundTruth(exemplar.id().to_string()))?;
    let step = exemplar.sub.step_statement.as_str();
    let header = exemplar.sub.signature.header_text.as_str();
    let rationale_text = rationale.numbered();

    let mut log = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut pseudocode = String::new();
    for iteration in 1..=max_iters {
        let feedback = feedback_block(&pending);
        let messages = Asset::TeacherRefine.render(&[
            ("step", step),
            ("header", header),
            ("rationale", &rationale_text),
            ("feedback", &feedback),
        ]);
        pseudocode = client.ask(tags::TEACHER_REFINE, messages)?.trim().to_string();

        let critiques = match mode {
            ReflectionMode::Whole => {
                let messages = Asset::TeacherCritique.render(&[
                    ("step", step),
                    ("code", code),
                    ("rationale", &rationale_text),
                    ("pseudocode", &pseudocode),
                ]);
                vec![parse_critique(&client.ask(tags::TEACHER_CRITIQUE, messages)?, iteration)?]
            }
            ReflectionMode::Stepwise => {
                let mut out = Vec::with_capacity(rationale.steps.len());
                for (i, rstep) in rationale.steps.iter().enumerate() {
                    let number = (i + 1).to_string();
                    let messages = Asset::TeacherCritiqueStep.render(&[
                        ("step", step),
                        ("code", code),
                        ("pseudocode", &pseudocode),
                        ("step_number", &number),
                        ("rationale_step", rstep),
                    ]);
                    out.push(parse_critique(&client.ask(tags::TEACHER_CRITIQUE, messages)?, iteration)?);
                }
                out
            }
        };
        let approved = critiques.iter().all(|c| c.verdict == Verdict::Approved);
        pending = critiques.iter().flat_map(|c| c.issues.iter().cloned()).collect();
        log.extend(critiques);
        if approved {
            return Ok(ReflectionOutcome { pseudocode, log, iterations: iteration, converged: true });
        }
    }
    Ok(ReflectionOutcome { pseudocode, log, iterations: max_iters, converged: false })
}
