//! A deterministic stand-in model for running the pipeline without network
//! access: examples, tests and smoke runs.
//!
//! [`OfflineModel`] answers every agent tag with a well-formed response.
//! Code responses implement whichever function header the prompt asks for,
//! with a body chosen by a caller-supplied hook (default: `return None`).
//! The numbers it produces are meaningless; it exists to exercise the
//! plumbing.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::backend::{BackendError, ChatClient, ChatRequest, ModelSettings, Transcript};
use crate::prompts::tags;
use crate::pysrc;

type BodyHook = dyn Fn(&str, &ChatRequest) -> Option<String> + Send + Sync;
type Rule = dyn Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync;

/// Rule-based responder keyed on request tags.
#[derive(Clone)]
pub struct OfflineModel {
    body: Arc<BodyHook>,
    rules: BTreeMap<String, Arc<Rule>>,
}

impl Default for OfflineModel {
    fn default() -> Self {
        Self { body: Arc::new(|_, _| None), rules: BTreeMap::new() }
    }
}

impl std::fmt::Debug for OfflineModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfflineModel").field("rules", &self.rules.keys().collect::<Vec<_>>()).finish()
    }
}

impl OfflineModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the function body (indented lines, without the `def`) for a
    /// function name. Returning `None` falls back to `return None`.
    pub fn with_body<F>(mut self, hook: F) -> Self
    where
        F: Fn(&str, &ChatRequest) -> Option<String> + Send + Sync + 'static,
    {
        self.body = Arc::new(hook);
        self
    }

    /// Replaces the built-in answer for one tag.
    pub fn with_rule<F>(mut self, tag: &str, rule: F) -> Self
    where
        F: Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    {
        self.rules.insert(tag.to_string(), Arc::new(rule));
        self
    }

    /// Wraps the model in a client with an in-memory transcript.
    pub fn client(self) -> ChatClient {
        self.client_with(Arc::new(Transcript::in_memory()), ModelSettings::default())
    }

    pub fn client_with(self, transcript: Arc<Transcript>, settings: ModelSettings) -> ChatClient {
        let provider = crate::backend::FnProvider::new(move |req: &ChatRequest| self.respond(req));
        ChatClient::new(Arc::new(provider), transcript, settings)
    }

    pub fn respond(&self, req: &ChatRequest) -> Result<String, BackendError> {
        if let Some(rule) = self.rules.get(&req.tag) {
            return rule(req);
        }
        let text = req.prompt_text();
        Ok(match req.tag.as_str() {
            tags::BUCKETING => first_allowed_domain(&text).unwrap_or_else(|| "unknown".into()),
            tags::TEACHER_RATIONALE => {
                "1. Read the inputs and check their shapes.\n2. Compute the quantity defined in the step.\n3. Return the result.".into()
            }
            tags::TEACHER_REFINE => {
                "1. Validate the inputs.\n2. Evaluate the defining formula element-wise.\n3. Return the value with the declared shape.".into()
            }
            tags::TEACHER_CRITIQUE => "APPROVED".into(),
            tags::STUDENT_PLAN | tags::BASELINE_PLAN => {
                "1. Unpack the arguments.\n2. Apply the formula for this step.\n3. Return the result.".into()
            }
            tags::BASELINE_RECALL => "A related problem computes a closed-form expression and returns it.".into(),
            tags::STUDENT_SUMMARY => match target_def(&text) {
                Some((name, _)) => format!("Computes {name} from its inputs."),
                None => "Computes the requested quantity.".into(),
            },
            tags::STUDENT_CODE | tags::BASELINE_CODE | tags::DEBUGGER => match target_def(&text) {
                Some((name, decl)) => {
                    let body = (self.body)(&name, req).unwrap_or_else(|| "    return None".into());
                    format!("```python\n{decl}\n{}\n```", body.trim_end())
                }
                None => "```python\npass\n```".into(),
            },
            other => return Err(BackendError::Scripted(format!("offline model has no rule for tag `{other}`"))),
        })
    }
}

/// The declaration following the last "Function header" marker: its name
/// and the verbatim `def ...:` line(s).
fn target_def(prompt: &str) -> Option<(String, String)> {
    let at = prompt.rfind("Function header").unwrap_or(0);
    let tail = &prompt[at..];
    let def = pysrc::top_level_defs(tail).into_iter().next()?;
    let lines: Vec<&str> = tail.lines().skip(def.line).collect();
    let end = lines.iter().position(|l| l.trim_end().ends_with(':'))?;
    Some((def.name, lines[..=end].join("\n")))
}

fn first_allowed_domain(prompt: &str) -> Option<String> {
    let line = prompt.lines().find_map(|l| l.strip_prefix("Allowed domain labels:"))?;
    line.split(',').map(str::trim).find(|s| !s.is_empty()).map(str::to_string)
}
