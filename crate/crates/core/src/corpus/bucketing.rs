use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DomainLabel, Problem};
use crate::backend::{BackendError, ChatClient};
use crate::prompts::{tags, Asset};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// Use the label stored with the problem.
    #[default]
    Passthrough,
    /// Ask the model to pick a label. Mislabelled problems get the wrong
    /// guidance, which costs accuracy, so this is opt-in.
    ModelClassify,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainAssignment {
    pub problem_id: String,
    pub label: DomainLabel,
    pub mode: DomainMode,
}

#[derive(Debug, thiserror::Error)]
pub enum BucketingError {
    #[error("problem `{0}` has no domain label")]
    MissingDomainLabel(String),
    #[error("model_classify mode requires a backend")]
    BackendRequired,
    #[error("classification response names no known domain: {0:?}")]
    UnparsableClassification(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Assigns `problem` to a domain, either by trusting its stored label or by
/// asking the model to choose from `known`.
pub fn assign_domain(
    problem: &Problem,
    mode: DomainMode,
    known: &BTreeSet<DomainLabel>,
    backend: Option<&ChatClient>,
) -> Result<DomainAssignment, BucketingError> {
    let label = match mode {
        DomainMode::Passthrough => {
            if problem.domain.as_str().is_empty() {
                return Err(BucketingError::MissingDomainLabel(problem.id.clone()));
            }
            problem.domain.clone()
        }
        DomainMode::ModelClassify => {
            let client = backend.ok_or(BucketingError::BackendRequired)?;
            let domains = known.iter().map(|d| d.as_str()).collect::<Vec<_>>().join(", ");
            let messages = Asset::Bucketing.render(&[("domains", &domains), ("statement", &problem.main_statement)]);
            let answer = client.ask(tags::BUCKETING, messages)?;
            parse_label(&answer, known).ok_or(BucketingError::UnparsableClassification(answer))?
        }
    };
    Ok(DomainAssignment { problem_id: problem.id.clone(), label, mode })
}

/// First known label appearing as a whole word in `answer`, case-insensitively.
fn parse_label(answer: &str, known: &BTreeSet<DomainLabel>) -> Option<DomainLabel> {
    let lowered = answer.to_lowercase();
    lowered
        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
        .filter(|w| !w.is_empty())
        .find_map(|w| known.iter().find(|d| d.as_str() == w).cloned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::problem;

    fn known() -> BTreeSet<DomainLabel> {
        ["physics", "chemistry", "biology"].iter().map(|d| DomainLabel::new(*d).unwrap()).collect()
    }

    #[test]
    fn passthrough_returns_stored_label() {
        let p = problem("p", "physics", 1, false);
        let a = assign_domain(&p, DomainMode::Passthrough, &known(), None).unwrap();
        assert_eq!(a.label, DomainLabel::physics());
        assert_eq!(a.mode, DomainMode::Passthrough);
    }

    #[test]
    fn model_classify_parses_scripted_answer() {
        let p = problem("p", "physics", 1, false);
        let client = ChatClient::scripted(|_| Ok("Chemistry".into()));
        let a = assign_domain(&p, DomainMode::ModelClassify, &known(), Some(&client)).unwrap();
        assert_eq!(a.label, DomainLabel::chemistry());
        assert_eq!(client.transcript().count_tag(tags::BUCKETING), 1);
    }

    #[test]
    fn unknown_label_is_unparsable() {
        let p = problem("p", "physics", 1, false);
        let client = ChatClient::scripted(|_| Ok("astrology".into()));
        let err = assign_domain(&p, DomainMode::ModelClassify, &known(), Some(&client)).unwrap_err();
        assert!(matches!(err, BucketingError::UnparsableClassification(s) if s == "astrology"));
    }

    #[test]
    fn classify_without_backend_is_an_error() {
        let p = problem("p", "physics", 1, false);
        assert!(matches!(
            assign_domain(&p, DomainMode::ModelClassify, &known(), None),
            Err(BucketingError::BackendRequired)
        ));
    }
}
