use serde::{Deserialize, Serialize};

use super::{DriverError, PipelineConfig, Strategy, SummarySource};
use crate::backend::ChatClient;
use crate::corpus::{DomainLabel, Problem, SubProblem};
use crate::evaluator::SubResult;
use crate::grounding::{ground_loop, Deviation, GroundingOutcome, Limits, Runner, RunReport, TerminalReason};
use crate::prompts::{tags, Asset};
use crate::student::{
    code_from_response, generate_code, plan_subproblem, summarize_function, Candidate, ConsolidatedContextWindow,
    Plan, StudentError, TaskView,
};
use crate::teacher::DomainMemory;

/// Code paths every strategy shares, recorded in manifests.
pub const SHARED_COMPONENTS: [&str; 2] = ["grounding::ground_loop", "evaluator::score"];

/// What happened at one step, beyond its [`SubResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub subproblem_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plan: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_dependencies: Vec<String>,
    /// Candidate-level generation problems that were recovered from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub terminal_reason: TerminalReason,
    pub rounds_used: u32,
    pub reports: Vec<RunReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemResult {
    pub problem_id: String,
    pub domain: DomainLabel,
    pub sub_results: Vec<SubResult>,
    pub steps: Vec<StepRecord>,
    /// Final candidate of every step, in step order.
    pub chain: Vec<Candidate>,
    /// True when a mosaic run had no guidance template for the domain.
    pub zero_shot: bool,
}

impl ProblemResult {
    pub fn solved(&self) -> bool {
        self.sub_results.iter().all(|r| r.passed)
    }
}

/// Shared handles for one run.
#[derive(Clone, Copy)]
pub struct Services<'a> {
    pub client: &'a ChatClient,
    pub runner: &'a dyn Runner,
}

fn limits(config: &PipelineConfig) -> Limits {
    Limits::with_timeout(config.timeout_s)
}

/// Grounds a candidate and turns the outcome into a result. Every strategy
/// ends each step here.
fn ground_step(
    problem: &Problem,
    sub: &SubProblem,
    candidate: Candidate,
    chain: &[Candidate],
    config: &PipelineConfig,
    services: Services<'_>,
) -> Result<(GroundingOutcome, SubResult), DriverError> {
    let outcome = ground_loop(
        candidate,
        chain,
        &sub.eval_suite,
        config.k_debug_rounds,
        services.client,
        services.runner,
        &limits(config),
    )
    .map_err(DriverError::Grounding)?;
    let last = outcome.last_report();
    let result = SubResult {
        problem_id: problem.id.clone(),
        subproblem_id: sub.id.clone(),
        domain: problem.domain.clone(),
        passed: last.passed(),
        error_class: last.error_class,
        deviations: last.deviations().into_iter().map(Deviation).collect(),
        rounds_used: outcome.rounds_used,
    };
    Ok((outcome, result))
}

/// Turns a failed generation into a salvaged candidate, or an abort for
/// infrastructure errors.
fn recover(
    err: StudentError,
    raw: Option<String>,
    task: &TaskView<'_>,
    warnings: &mut Vec<String>,
) -> Result<Candidate, DriverError> {
    if !err.is_candidate_level() {
        return Err(err.into());
    }
    warnings.push(err.to_string());
    Ok(Candidate::salvage(raw.as_deref().unwrap_or(""), task.signature, task.subproblem_id))
}

/// Solves one problem with the full pipeline: plan, code and ground each
/// step in order, threading a fresh context window through the steps.
/// A failing step still joins the chain so later steps can call it.
pub fn solve_problem(
    problem: &Problem,
    domain: &DomainLabel,
    config: &PipelineConfig,
    memory: &DomainMemory,
    services: Services<'_>,
) -> Result<ProblemResult, DriverError> {
    let template = memory.get(domain);
    let mut ccw = ConsolidatedContextWindow::new(config.ccw_mode);
    let mut out = ProblemResult {
        problem_id: problem.id.clone(),
        domain: problem.domain.clone(),
        sub_results: vec![],
        steps: vec![],
        chain: vec![],
        zero_shot: template.is_none(),
    };
    for sub in &problem.subproblems {
        let task = TaskView::new(problem, sub);
        let mut warnings = Vec::new();
        let (plan, unknown) = match plan_subproblem(&task, template, &ccw, services.client) {
            Ok(o) => (o.plan, o.unknown_dependencies),
            Err(StudentError::PlanParse { response, .. }) => {
                warnings.push("plan had no numbered steps; using the raw response".into());
                let text = response.trim();
                let step = if text.is_empty() { "Implement the function as specified." } else { text };
                let plan = Plan {
                    steps: vec![step.to_string()],
                    referenced_functions: Default::default(),
                    subproblem: sub.id.clone(),
                };
                (plan, vec![])
            }
            Err(e) => return Err(e.into()),
        };
        let candidate = match generate_code(&plan, &task, &ccw, services.client) {
            Ok(c) => c,
            Err((e, raw)) => recover(e, raw, &task, &mut warnings)?,
        };
        let (outcome, result) = ground_step(problem, sub, candidate, &out.chain, config, services)?;
        let final_candidate = outcome.final_candidate.clone();
        let summary_client = (config.summaries == SummarySource::Model).then_some(services.client);
        let summary = summarize_function(&final_candidate, summary_client);
        ccw = ccw.append(&sub.signature, &summary, &final_candidate.code);
        out.steps.push(StepRecord {
            subproblem_id: sub.id.clone(),
            plan: plan.steps,
            unknown_dependencies: unknown,
            warnings,
            terminal_reason: outcome.terminal_reason,
            rounds_used: outcome.rounds_used,
            reports: outcome.reports,
            summary: Some(summary),
        });
        out.sub_results.push(result);
        out.chain.push(final_candidate);
    }
    Ok(out)
}

fn prior_code(chain: &[Candidate]) -> String {
    if chain.is_empty() {
        return "# (no earlier steps)".into();
    }
    chain.iter().map(|c| c.code.trim_end()).collect::<Vec<_>>().join("\n\n")
}

/// Solves one problem with a baseline generation policy. Grounding and
/// scoring are the same as for the full pipeline.
pub fn run_baseline(
    strategy: Strategy,
    problem: &Problem,
    config: &PipelineConfig,
    services: Services<'_>,
) -> Result<ProblemResult, DriverError> {
    if strategy == Strategy::Mosaic {
        return Err(DriverError::ConfigInvalid("run_baseline needs a baseline strategy".into()));
    }
    let client = services.client;
    let mut out = ProblemResult {
        problem_id: problem.id.clone(),
        domain: problem.domain.clone(),
        sub_results: vec![],
        steps: vec![],
        chain: vec![],
        zero_shot: false,
    };
    for sub in &problem.subproblems {
        let task = TaskView::new(problem, sub);
        let background = task.background_block();
        let base = [
            ("main", task.main_statement),
            ("step", task.step_statement),
            ("background", background.as_str()),
            ("header", task.signature.header_text.as_str()),
        ];
        let mut plan_steps = Vec::new();
        let response = match strategy {
            Strategy::Direct => client.ask(tags::BASELINE_CODE, Asset::BaselineDirect.render(&base))?,
            Strategy::Cot => client.ask(tags::BASELINE_CODE, Asset::BaselineCot.render(&base))?,
            Strategy::SelfPlanning => {
                let context = prior_code(&out.chain);
                let mut vars = base.to_vec();
                vars.push(("context", &context));
                let plan = client.ask(tags::BASELINE_PLAN, Asset::BaselinePlan.render(&vars))?;
                plan_steps = crate::prompts::numbered_steps(&plan);
                let plan_text = if plan_steps.is_empty() { plan.trim().to_string() } else { plan_steps.join("\n") };
                client.ask(
                    tags::BASELINE_CODE,
                    Asset::BaselinePlanCode.render(&[
                        ("context", &context),
                        ("step", task.step_statement),
                        ("plan", &plan_text),
                        ("header", &task.signature.header_text),
                    ]),
                )?
            }
            Strategy::Analogical => {
                let recalled = client.ask(tags::BASELINE_RECALL, Asset::BaselineRecall.render(&base))?;
                let mut vars = base.to_vec();
                vars.push(("recalled", recalled.trim()));
                client.ask(tags::BASELINE_CODE, Asset::BaselineAnalogicalCode.render(&vars))?
            }
            Strategy::Mosaic => unreachable!("rejected above"),
        };
        let mut warnings = Vec::new();
        let candidate = match code_from_response(response, &task) {
            Ok(c) => c,
            Err((e, raw)) => recover(e, raw, &task, &mut warnings)?,
        };
        let (outcome, result) = ground_step(problem, sub, candidate, &out.chain, config, services)?;
        out.steps.push(StepRecord {
            subproblem_id: sub.id.clone(),
            plan: plan_steps,
            unknown_dependencies: vec![],
            warnings,
            terminal_reason: outcome.terminal_reason,
            rounds_used: outcome.rounds_used,
            reports: outcome.reports,
            summary: None,
        });
        out.sub_results.push(result);
        out.chain.push(outcome.final_candidate);
    }
    Ok(out)
}

/// Dispatches to [`solve_problem`] or [`run_baseline`].
pub fn solve_with(
    strategy: Strategy,
    problem: &Problem,
    domain: &DomainLabel,
    config: &PipelineConfig,
    memory: &DomainMemory,
    services: Services<'_>,
) -> Result<ProblemResult, DriverError> {
    match strategy {
        Strategy::Mosaic => solve_problem(problem, domain, config, memory, services),
        other => run_baseline(other, problem, config, services),
    }
}
