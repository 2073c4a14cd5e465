//! Student phase agents: planning, coding and function summaries.
//!
//! Agents see a subproblem only through a [`TaskView`], which carries the
//! statement, background, header and visible I/O examples but not the
//! evaluation suite or any reference code.

mod ccw;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, ChatClient};
use crate::corpus::{FunctionSignature, IoTest, Problem, SubProblem};
use crate::prompts::{numbered_steps, tags, Asset};
use crate::pysrc;
use crate::teacher::GuidanceTemplate;

pub use ccw::{append_ccw, cap_summary, CcwEntry, CcwMode, ConsolidatedContextWindow, SUMMARY_CAP};

#[derive(Debug, thiserror::Error)]
pub enum StudentError {
    #[error("no numbered plan steps in response for `{subproblem}`")]
    PlanParse { subproblem: String, response: String },
    #[error("plan belongs to `{plan}`, not `{subproblem}`")]
    PlanMismatch { plan: String, subproblem: String },
    #[error("no fenced code block in response for `{subproblem}`")]
    CodeExtraction { subproblem: String, response: String },
    #[error("expected one `{expected}` taking {arity} parameters, found {found:?}")]
    SignatureMismatch { expected: String, arity: usize, found: Vec<String> },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl StudentError {
    /// Errors caused by the model's output rather than the infrastructure.
    pub fn is_candidate_level(&self) -> bool {
        !matches!(self, StudentError::Backend(_) | StudentError::PlanMismatch { .. })
    }
}

/// What a generation agent may see of one step.
#[derive(Debug, Clone, Copy)]
pub struct TaskView<'a> {
    pub problem_id: &'a str,
    pub subproblem_id: &'a str,
    pub step_index: u32,
    pub main_statement: &'a str,
    pub step_statement: &'a str,
    pub background: &'a str,
    pub signature: &'a FunctionSignature,
    pub io_tests: Option<&'a [IoTest]>,
}

impl<'a> TaskView<'a> {
    pub fn new(problem: &'a Problem, sub: &'a SubProblem) -> Self {
        Self {
            problem_id: &problem.id,
            subproblem_id: &sub.id,
            step_index: sub.step_index,
            main_statement: &problem.main_statement,
            step_statement: &sub.step_statement,
            background: &sub.background,
            signature: &sub.signature,
            io_tests: sub.io_tests.as_deref(),
        }
    }

    /// Background block for prompts; empty when there is none.
    pub fn background_block(&self) -> String {
        if self.background.trim().is_empty() {
            String::new()
        } else {
            format!("\nBackground:\n{}\n", self.background.trim())
        }
    }

    pub fn io_tests_block(&self) -> String {
        let Some(tests) = self.io_tests.filter(|t| !t.is_empty()) else {
            return String::new();
        };
        let mut out = String::from("\n=== Visible examples (your function must reproduce them) ===\n");
        for t in tests {
            let args: Vec<String> = t.args.iter().map(|a| a.to_python_literal()).collect();
            out.push_str(&format!(
                "{}({}) -> {}\n",
                self.signature.name,
                args.join(", "),
                t.expected.to_python_literal()
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub referenced_functions: BTreeSet<String>,
    pub subproblem: String,
}

impl Plan {
    pub fn numbered(&self) -> String {
        self.steps.iter().enumerate().map(|(i, s)| format!("{}. {}", i + 1, s)).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOutcome {
    pub plan: Plan,
    /// Functions the plan calls that neither the window nor the current
    /// step provides. Recorded, never fatal.
    pub unknown_dependencies: Vec<String>,
}

/// Python builtins and common library names that plans may call freely.
const KNOWN_CALLABLES: &[&str] = &[
    "abs", "all", "any", "bool", "complex", "dict", "divmod", "enumerate", "filter", "float", "int", "isinstance",
    "len", "list", "map", "max", "min", "pow", "print", "range", "reversed", "round", "set", "sorted", "str",
    "sum", "tuple", "type", "zip", "exp", "log", "sqrt", "sin", "cos", "tan", "arctan", "arctan2", "kron",
    "zeros", "ones", "eye", "array", "dot", "matmul", "norm", "eig", "eigh", "inv", "solve", "trace", "transpose",
    "reshape", "linspace", "arange", "mean", "std", "var", "argmax", "argmin", "fft", "ifft", "integrate",
    "quad", "odeint", "solve_ivp", "minimize", "interp", "conj", "real", "imag", "outer", "einsum", "e", "i",
];

fn identifiers(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|w| !w.is_empty())
}

/// Asks the rationale agent for a numbered plan for one step.
pub fn plan_subproblem(
    task: &TaskView<'_>,
    template: Option<&GuidanceTemplate>,
    ccw: &ConsolidatedContextWindow,
    client: &ChatClient,
) -> Result<PlanOutcome, StudentError> {
    let examples = template.map(|t| t.render_examples()).unwrap_or_default();
    let context = ccw.render();
    let background = task.background_block();
    let messages = Asset::StudentPlan.render(&[
        ("examples", &examples),
        ("context", &context),
        ("main", task.main_statement),
        ("step", task.step_statement),
        ("background", &background),
        ("header", &task.signature.header_text),
    ]);
    let response = client.ask(tags::STUDENT_PLAN, messages)?;
    let steps = numbered_steps(&response);
    if steps.is_empty() {
        return Err(StudentError::PlanParse { subproblem: task.subproblem_id.to_string(), response });
    }
    let current = task.signature.name.as_str();
    let known = |name: &str| name == current || ccw.contains(name);
    let text = steps.join("\n");
    let referenced_functions: BTreeSet<String> =
        identifiers(&text).filter(|w| known(w)).map(str::to_string).collect();
    let unknown: BTreeSet<String> = pysrc::called_identifiers(&text)
        .into_iter()
        .filter(|n| !known(n) && !KNOWN_CALLABLES.contains(&n.as_str()))
        .collect();
    for name in &unknown {
        tracing::warn!(subproblem = task.subproblem_id, function = %name, "plan references an unknown function");
    }
    Ok(PlanOutcome {
        plan: Plan { steps, referenced_functions, subproblem: task.subproblem_id.to_string() },
        unknown_dependencies: unknown.into_iter().collect(),
    })
}

/// Generated code for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub code: String,
    pub signature: FunctionSignature,
    pub subproblem: String,
    /// 0 for the initial generation, incremented by each repair.
    pub generation_round: u32,
    /// False for salvaged text that does not define the required function.
    pub signature_ok: bool,
}

impl Candidate {
    /// Wraps code, recording whether it defines the required function.
    pub fn new(code: String, signature: &FunctionSignature, subproblem: &str, generation_round: u32) -> Self {
        let signature_ok = check_signature(&code, signature).is_ok();
        Self { code, signature: signature.clone(), subproblem: subproblem.to_string(), generation_round, signature_ok }
    }

    /// Candidate built from a response that failed extraction or the
    /// signature check, so the grounding loop can still try to repair it.
    pub fn salvage(response: &str, signature: &FunctionSignature, subproblem: &str) -> Self {
        let code = pysrc::first_fenced_block(response).unwrap_or_else(|| response.trim().to_string());
        Self::new(code, signature, subproblem, 0)
    }
}

/// Checks that `code` has exactly one top-level `def` of the signature's
/// name, with the declared arity. Helper functions are allowed.
pub fn check_signature(code: &str, signature: &FunctionSignature) -> Result<(), StudentError> {
    let defs = pysrc::top_level_defs(code);
    let matching: Vec<_> = defs.iter().filter(|d| d.name == signature.name).collect();
    if matching.len() == 1 && matching[0].arity == signature.arity {
        return Ok(());
    }
    Err(StudentError::SignatureMismatch {
        expected: signature.name.clone(),
        arity: signature.arity,
        found: defs.iter().map(|d| format!("{}/{}", d.name, d.arity)).collect(),
    })
}

/// Asks the coding agent to implement `plan`.
pub fn generate_code(
    plan: &Plan,
    task: &TaskView<'_>,
    ccw: &ConsolidatedContextWindow,
    client: &ChatClient,
) -> Result<Candidate, (StudentError, Option<String>)> {
    if plan.subproblem != task.subproblem_id {
        return Err((
            StudentError::PlanMismatch { plan: plan.subproblem.clone(), subproblem: task.subproblem_id.to_string() },
            None,
        ));
    }
    let context = ccw.render();
    let io_tests = task.io_tests_block();
    let messages = Asset::StudentCode.render(&[
        ("context", &context),
        ("plan", &plan.numbered()),
        ("header", &task.signature.header_text),
        ("io_tests", &io_tests),
    ]);
    let response = client.ask(tags::STUDENT_CODE, messages).map_err(|e| (e.into(), None))?;
    code_from_response(response, task)
}

/// Extracts and checks a candidate from a generation response. On failure
/// the raw response is handed back for salvage.
pub fn code_from_response(response: String, task: &TaskView<'_>) -> Result<Candidate, (StudentError, Option<String>)> {
    let Some(code) = pysrc::first_fenced_block(&response) else {
        return Err((
            StudentError::CodeExtraction { subproblem: task.subproblem_id.to_string(), response: response.clone() },
            Some(response),
        ));
    };
    if let Err(e) = check_signature(&code, task.signature) {
        return Err((e, Some(response)));
    }
    Ok(Candidate::new(code, task.signature, task.subproblem_id, 0))
}

/// One-sentence summary of a candidate for the context window.
///
/// With a client the model is asked; otherwise, or if the call fails or
/// returns nothing, the first docstring sentence is used, else
/// `Implements <name>.`.
pub fn summarize_function(candidate: &Candidate, client: Option<&ChatClient>) -> String {
    if let Some(client) = client {
        let messages = Asset::StudentSummary.render(&[("code", &candidate.code), ("name", &candidate.signature.name)]);
        match client.ask(tags::STUDENT_SUMMARY, messages) {
            Ok(text) if !text.trim().is_empty() => return cap_summary(&text),
            Ok(_) => {}
            Err(e) => tracing::warn!(error = %e, "summary call failed, using docstring"),
        }
    }
    fallback_summary(candidate)
}

fn fallback_summary(candidate: &Candidate) -> String {
    let name = &candidate.signature.name;
    pysrc::top_level_defs(&candidate.code)
        .into_iter()
        .find(|d| &d.name == name)
        .and_then(|d| d.docstring)
        .and_then(|doc| pysrc::first_sentence(&doc))
        .map(|s| cap_summary(&s))
        .unwrap_or_else(|| format!("Implements {name}."))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::problem;
    use crate::corpus::TargetValue;

    fn ket_sig() -> FunctionSignature {
        FunctionSignature::from_header("def ket(dim, args):\n    '''Return a basis vector.'''").unwrap()
    }

    fn task_for<'a>(p: &'a Problem, step: usize) -> TaskView<'a> {
        TaskView::new(p, &p.subproblems[step])
    }

    #[test]
    fn plan_with_three_steps_and_no_warnings() {
        let p = problem("p", "physics", 2, false);
        let task = task_for(&p, 0);
        let name = task.signature.name.clone();
        let client = ChatClient::scripted(move |_| Ok(format!("1. read inputs\n2. call {name}(x) recursively\n3. return")));
        let out = plan_subproblem(&task, None, &ConsolidatedContextWindow::new(CcwMode::Headers), &client).unwrap();
        assert_eq!(out.plan.steps.len(), 3);
        assert!(out.unknown_dependencies.is_empty());
        assert_eq!(out.plan.referenced_functions.len(), 1);
    }

    #[test]
    fn plan_references_prior_function_from_window() {
        let p = problem("p", "physics", 2, false);
        let first = &p.subproblems[0].signature;
        let ccw = ConsolidatedContextWindow::new(CcwMode::Headers).append(first, "First step.", "");
        let prior = first.name.clone();
        let client = ChatClient::scripted(move |_| Ok(format!("1. call {prior}(a)\n2. use mystery_fn(b)")));
        let out = plan_subproblem(&task_for(&p, 1), None, &ccw, &client).unwrap();
        assert!(out.plan.referenced_functions.contains(&first.name));
        assert_eq!(out.unknown_dependencies, ["mystery_fn"]);
    }

    #[test]
    fn plan_without_steps_is_a_parse_error() {
        let p = problem("p", "physics", 1, false);
        let client = ChatClient::scripted(|_| Ok("just do it".into()));
        let err = plan_subproblem(&task_for(&p, 0), None, &ConsolidatedContextWindow::default(), &client).unwrap_err();
        assert!(matches!(err, StudentError::PlanParse { .. }));
    }

    fn plan_for(task: &TaskView<'_>) -> Plan {
        Plan { steps: vec!["do it".into()], referenced_functions: BTreeSet::new(), subproblem: task.subproblem_id.into() }
    }

    #[test]
    fn generated_code_is_accepted_when_signature_matches() {
        let p = problem("p", "physics", 1, false);
        let task = task_for(&p, 0);
        let name = task.signature.name.clone();
        let client = ChatClient::scripted(move |_| Ok(format!("Here:\n```python\ndef {name}(x):\n    return x\n```")));
        let c = generate_code(&plan_for(&task), &task, &ConsolidatedContextWindow::default(), &client).unwrap();
        assert_eq!(c.generation_round, 0);
        assert!(c.signature_ok);
    }

    #[test]
    fn prose_only_response_fails_extraction() {
        let p = problem("p", "physics", 1, false);
        let task = task_for(&p, 0);
        let client = ChatClient::scripted(|_| Ok("I would compute it.".into()));
        let (err, raw) = generate_code(&plan_for(&task), &task, &ConsolidatedContextWindow::default(), &client).unwrap_err();
        assert!(matches!(err, StudentError::CodeExtraction { .. }));
        assert_eq!(raw.as_deref(), Some("I would compute it."));
    }

    #[test]
    fn wrong_name_is_a_signature_mismatch() {
        let sig = ket_sig();
        let code = "def ket_vector(dim, args):\n    return 0";
        assert!(matches!(check_signature(code, &sig), Err(StudentError::SignatureMismatch { .. })));
        assert!(check_signature("def ket(dim):\n    return 0", &sig).is_err());
        assert!(check_signature("def helper(a):\n    pass\n\ndef ket(dim, args):\n    return helper(dim)", &sig).is_ok());
    }

    #[test]
    fn code_prompt_excludes_eval_suite_and_includes_io_tests() {
        let mut p = problem("p", "physics", 1, false);
        p.subproblems[0].eval_suite[0].expected = TargetValue::scalar_float(424242.5);
        p.subproblems[0].io_tests =
            Some(vec![IoTest { args: vec![TargetValue::scalar_int(3)], expected: TargetValue::scalar_int(9) }]);
        let task = task_for(&p, 0);
        let client = ChatClient::scripted(|_| Ok("no code".into()));
        let _ = generate_code(&plan_for(&task), &task, &ConsolidatedContextWindow::default(), &client);
        let prompt = client.transcript().entries()[0].request.prompt_text();
        assert!(!prompt.contains("424242.5"));
        assert!(prompt.contains("(3) -> 9"));
    }

    #[test]
    fn summary_fallbacks() {
        let with_doc = Candidate::new(
            "def ket(dim, args):\n    '''Return the j-th basis vector. Supports lists.'''\n    return 0".into(),
            &ket_sig(),
            "p.1",
            0,
        );
        assert_eq!(summarize_function(&with_doc, None), "Return the j-th basis vector.");
        let bare = Candidate::new("def ket(dim, args):\n    return 0".into(), &ket_sig(), "p.1", 0);
        assert_eq!(summarize_function(&bare, None), "Implements ket.");
    }

    #[test]
    fn model_summary_is_capped() {
        let c = Candidate::new("def ket(dim, args):\n    return 0".into(), &ket_sig(), "p.1", 0);
        let client = ChatClient::scripted(|_| Ok(format!("{}.", "very long words ".repeat(25))));
        let s = summarize_function(&c, Some(&client));
        assert!(s.chars().count() <= SUMMARY_CAP);
        assert!(!s.contains('\n'));
    }

    #[test]
    fn salvage_keeps_raw_text() {
        let c = Candidate::salvage("def ket(dim args):\n  oops", &ket_sig(), "p.1");
        assert!(!c.signature_ok);
        assert!(c.code.starts_with("def ket"));
    }
}
