use super::*;
use crate::corpus::test_support::corpus;
use crate::corpus::Split;
use crate::evaluator::ResultsFile;
use crate::grounding::{canned, Canned, CannedRunner, ErrorClass, TerminalReason};
use crate::offline::OfflineModel;
use crate::prompts::tags;

fn config() -> PipelineConfig {
    PipelineConfig { summaries: SummarySource::Docstring, ..Default::default() }
}

fn mini() -> crate::corpus::Corpus {
    corpus(&[("v1", "physics", 2, true), ("t1", "physics", 3, false), ("t2", "chemistry", 2, false)])
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.as_str()));
    }
    assert!("mosaic2".parse::<Strategy>().is_err());
}

#[test]
fn solve_problem_threads_chain_and_context() {
    let c = mini();
    let client = OfflineModel::new().client();
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let services = Services { client: &client, runner: &runner };
    let p = c.problem("t1").unwrap();
    let r = solve_problem(p, &p.domain, &config(), &Default::default(), services).unwrap();
    assert!(r.solved() && r.zero_shot);
    assert_eq!(r.chain.len(), 3);
    // step n executes the n-1 earlier functions plus its own
    let inputs = runner.inputs();
    assert_eq!(inputs.len(), 3);
    assert!(inputs[2].code.contains("def ft1_1(x)") && inputs[2].code.contains("def ft1_3(x)"));
    // the third plan prompt lists both earlier headers
    let plans: Vec<_> = client.transcript().entries().into_iter().filter(|e| e.request.tag == tags::STUDENT_PLAN).collect();
    let last = plans[2].request.prompt_text();
    assert!(last.contains("def ft1_1(x)") && last.contains("def ft1_2(x)"));
    assert!(!plans[0].request.prompt_text().contains("def ft1_1(x):\n    '''Compute ft1_1.'''\n# "));
}

#[test]
fn failing_step_is_scored_but_later_steps_still_run() {
    let c = mini();
    let client = OfflineModel::new().client();
    let runner = CannedRunner::outputs([canned::pass(1), canned::mismatch(1, &[0], 0.5), canned::pass(1)]);
    let services = Services { client: &client, runner: &runner };
    let p = c.problem("t1").unwrap();
    let r = solve_problem(p, &p.domain, &config(), &Default::default(), services).unwrap();
    assert!(!r.solved());
    assert_eq!(r.sub_results.iter().map(|s| s.passed).collect::<Vec<_>>(), [true, false, true]);
    assert_eq!(r.sub_results[1].error_class, ErrorClass::AssertionMismatch);
    assert_eq!(r.steps[1].terminal_reason, TerminalReason::NotRepairable);
    assert_eq!(client.transcript().count_tag(tags::DEBUGGER), 0);
}

#[test]
fn every_strategy_uses_the_same_grounding() {
    let c = mini();
    let p = c.problem("t2").unwrap();
    for s in Strategy::ALL {
        let client = OfflineModel::new().client();
        let runner = CannedRunner::new([
            Canned::Stdout(canned::load_error("SyntaxError")),
            Canned::Stdout(canned::pass(1)),
        ]);
        let services = Services { client: &client, runner: &runner };
        let r = solve_with(s, p, &p.domain, &config(), &Default::default(), services).unwrap();
        assert_eq!(r.steps[0].rounds_used, 1, "{s}");
        assert_eq!(client.transcript().count_tag(tags::DEBUGGER), 1, "{s}");
        assert!(r.solved(), "{s}");
    }
}

#[test]
fn baselines_make_the_expected_calls() {
    let c = mini();
    let p = c.problem("t2").unwrap();
    let expect = [
        (Strategy::Direct, [0, 0, 2]),
        (Strategy::Cot, [0, 0, 2]),
        (Strategy::SelfPlanning, [2, 0, 2]),
        (Strategy::Analogical, [0, 2, 2]),
    ];
    for (s, [plan, recall, code]) in expect {
        let client = OfflineModel::new().client();
        let runner = CannedRunner::outputs([canned::pass(1)]);
        run_baseline(s, p, &config(), Services { client: &client, runner: &runner }).unwrap();
        let t = client.transcript();
        assert_eq!(
            [t.count_tag(tags::BASELINE_PLAN), t.count_tag(tags::BASELINE_RECALL), t.count_tag(tags::BASELINE_CODE)],
            [plan, recall, code],
            "{s}"
        );
    }
}

#[test]
fn unextractable_code_is_salvaged_and_scored() {
    let c = mini();
    let p = c.problem("t2").unwrap();
    let client = OfflineModel::new().with_rule(tags::STUDENT_CODE, |_| Ok("I cannot help.".into())).client();
    let runner = CannedRunner::outputs([canned::load_error("SyntaxError")]);
    let r = solve_problem(
        p,
        &p.domain,
        &config(),
        &Default::default(),
        Services { client: &client, runner: &runner },
    )
    .unwrap();
    assert!(!r.solved());
    assert!(!r.steps[0].warnings.is_empty());
}

#[test]
fn backend_failure_aborts_the_problem() {
    let c = mini();
    let p = c.problem("t2").unwrap();
    let client = OfflineModel::new()
        .with_rule(tags::STUDENT_PLAN, |_| Err(crate::backend::BackendError::Scripted("down".into())))
        .client();
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let err = solve_problem(p, &p.domain, &config(), &Default::default(), Services { client: &client, runner: &runner })
        .unwrap_err();
    assert!(matches!(err, DriverError::Backend(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn run_corpus_writes_all_artifacts() {
    let c = mini();
    let dir = tempfile::tempdir().unwrap();
    let client = OfflineModel::new().client();
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let services = Services { client: &client, runner: &runner };
    let cfg = PipelineConfig { teacher_fraction: 1.0, ..config() };
    let out = run_corpus(&c, &cfg, Strategy::Mosaic, services, MemorySource::Build, dir.path()).unwrap();
    for f in ["report.json", "report.md", "results.json", "manifest.json", "memory/physics.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(out.report.scoreboard.total.main_solved, 2);
    assert_eq!(out.manifest.zero_shot_domains, vec![crate::corpus::DomainLabel::chemistry()]);
    assert_eq!(out.manifest.status, "complete");
    // validation problems are never solved
    assert!(out.problems.iter().all(|p| c.split_of(&p.problem_id) == Some(Split::Test)));
    // results re-score to the same report
    let reread = ResultsFile::load(dir.path().join("results.json")).unwrap().evaluate().unwrap();
    assert_eq!(reread, out.report);
}

#[test]
fn loaded_memory_is_used_without_teacher_calls() {
    let c = mini();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = PipelineConfig { teacher_fraction: 1.0, ..config() };
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let first = OfflineModel::new().client();
    run_corpus(&c, &cfg, Strategy::Mosaic, Services { client: &first, runner: &runner }, MemorySource::Build, a.path())
        .unwrap();
    let second = OfflineModel::new().client();
    let src = MemorySource::Load(a.path().join("memory"));
    let out = run_corpus(&c, &cfg, Strategy::Mosaic, Services { client: &second, runner: &runner }, src, b.path())
        .unwrap();
    assert_eq!(second.transcript().count_tag(tags::TEACHER_RATIONALE), 0);
    assert!(out.problems.iter().any(|p| !p.zero_shot));
}

#[test]
fn infrastructure_failure_leaves_failed_manifest() {
    let c = mini();
    let dir = tempfile::tempdir().unwrap();
    let client = OfflineModel::new()
        .with_rule(tags::BASELINE_CODE, |_| Err(crate::backend::BackendError::Scripted("quota".into())))
        .client();
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let err = run_corpus(
        &c,
        &config(),
        Strategy::Direct,
        Services { client: &client, runner: &runner },
        MemorySource::Build,
        dir.path(),
    )
    .unwrap_err();
    assert!(matches!(err, DriverError::Backend(_)));
    let m: RunManifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m.status, "failed");
    assert!(m.error.unwrap().contains("quota"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn corpus_without_validation_runs_zero_shot() {
    let c = corpus(&[("t1", "physics", 1, false)]);
    let dir = tempfile::tempdir().unwrap();
    let client = OfflineModel::new().client();
    let runner = CannedRunner::outputs([canned::pass(1)]);
    let out =
        run_corpus(&c, &config(), Strategy::Mosaic, Services { client: &client, runner: &runner }, MemorySource::Build, dir.path())
            .unwrap();
    assert_eq!(out.manifest.zero_shot_domains.len(), 1);
    assert_eq!(client.transcript().count_tag(tags::TEACHER_RATIONALE), 0);
}

#[test]
fn parallel_run_matches_serial_scores() {
    let c = mini();
    let score = |n: usize| {
        let dir = tempfile::tempdir().unwrap();
        let client = OfflineModel::new().client();
        let runner = CannedRunner::outputs([canned::pass(1)]);
        let cfg = PipelineConfig { parallel_problems: n, ..config() };
        run_corpus(&c, &cfg, Strategy::Cot, Services { client: &client, runner: &runner }, MemorySource::Build, dir.path())
            .unwrap()
            .report
            .scoreboard
    };
    assert_eq!(score(1), score(3));
}
