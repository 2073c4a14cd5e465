//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line; run
//! with `cargo test --test acceptance -- --nocapture` to see them all.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sciagent::corpus::{
    select_teacher_exemplars, Corpus, CorpusError, DomainLabel, EvalCase, Exemplar, FunctionSignature, Problem,
    Split, SubProblem, TargetValue, DEFAULT_ATOL, DEFAULT_RTOL,
};
use sciagent::driver::{solve_problem, PipelineConfig, Services, SummarySource};
use sciagent::evaluator::{
    deviation_bin, error_histogram, precision_histogram, score, ExpectedProblem, ExpectedShape, SubResult, Tally,
    BIN_COUNT,
};
use sciagent::grounding::{
    canned, ground_loop, stat_category, Canned, CannedRunner, Deviation, ErrorClass, Limits, StatCategory,
    TerminalReason,
};
use sciagent::offline::OfflineModel;
use sciagent::prompts::tags;
use sciagent::student::{Candidate, CcwMode};
use sciagent::teacher::{self_reflect, DomainMemory, Rationale, ReflectionMode};

/// Runs `check`, prints the verdict line and re-raises any failure.
fn criterion(n: u32, title: &str, limit: Duration, check: impl FnOnce() -> String) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check));
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) if elapsed < limit => {
            println!("criterion {n}: PASS  {title} ({detail}; {elapsed:.2?} < {limit:?})");
        }
        Ok(detail) => {
            println!("criterion {n}: FAIL  {title} ({detail}; took {elapsed:.2?}, limit {limit:?})");
            panic!("criterion {n} exceeded its time limit");
        }
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            println!("criterion {n}: FAIL  {title} ({msg})");
            std::panic::resume_unwind(e);
        }
    }
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus")
}

fn label(s: &str) -> DomainLabel {
    DomainLabel::new(s).unwrap()
}

const DOMAINS: [&str; 5] = ["physics", "chemistry", "biology", "materials", "mathematics"];

fn sub(problem: &str, step: u32, name: &str, statement: &str, ground_truth: bool) -> SubProblem {
    SubProblem {
        id: format!("{problem}.{step}"),
        step_index: step,
        step_statement: statement.to_string(),
        background: String::new(),
        signature: FunctionSignature::from_header(format!("def {name}(x):\n    '''Transform x.'''")).unwrap(),
        io_tests: None,
        eval_suite: vec![EvalCase {
            entry: name.to_string(),
            args: vec![TargetValue::scalar_float(1.0)],
            expected: TargetValue::scalar_float(1.0),
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            setup: None,
        }],
        ground_truth_code: ground_truth.then(|| format!("def {name}(x):\n    return x\n")),
    }
}

fn result(problem: &str, sub: usize, domain: &str, class: ErrorClass) -> SubResult {
    SubResult {
        problem_id: problem.to_string(),
        subproblem_id: format!("{problem}.{sub}"),
        domain: label(domain),
        passed: class == ErrorClass::None,
        error_class: class,
        deviations: vec![],
        rounds_used: 0,
    }
}

const FAILURE_CLASSES: [ErrorClass; 6] = [
    ErrorClass::SyntaxError,
    ErrorClass::ImportError,
    ErrorClass::RuntimeException,
    ErrorClass::AssertionMismatch,
    ErrorClass::Timeout,
    ErrorClass::RunnerCrash,
];

#[test]
fn criterion_1_replayed_runs_are_byte_identical() {
    criterion(1, "deterministic end-to-end replay", Duration::from_secs(10), || {
        let dir = fixture();
        let out = tempfile::tempdir().unwrap();
        let run = |name: &str| {
            let target = out.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_sciagent"))
                .args(["run", "--strategy", "mosaic"])
                .arg("--corpus")
                .arg(&dir)
                .arg("--config")
                .arg(dir.join("config.toml"))
                .arg("--replay")
                .arg(dir.join("transcript.jsonl"))
                .arg("--out")
                .arg(&target)
                .output()
                .unwrap();
            assert!(status.status.success(), "run failed: {}", String::from_utf8_lossy(&status.stderr));
            target
        };
        let (a, b) = (run("a"), run("b"));
        for f in ["report.json", "report.md"] {
            let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
            assert!(!x.is_empty(), "{f} is empty");
            assert_eq!(x, y, "{f} differs between runs");
        }
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
        let total = &report["scoreboard"]["total"];
        // planted: energy misses its target, compressibility needs one repair
        assert_eq!((total["main_solved"].as_u64(), total["main_total"].as_u64()), (Some(1), Some(2)));
        assert_eq!((total["sub_solved"].as_u64(), total["sub_total"].as_u64()), (Some(4), Some(5)));
        "report.json and report.md identical; main 1/2, sub 4/5".into()
    });
}

#[test]
fn criterion_2_context_window_discipline() {
    criterion(2, "context window discipline", Duration::from_secs(5), || {
        let names: Vec<String> = (1..=4).map(|i| format!("chain_step_{i}")).collect();
        let problem = Problem {
            id: "c1".into(),
            domain: label("physics"),
            main_statement: "Apply four successive transformations to a signal.".into(),
            subproblems: (1..=4u32)
                .map(|i| sub("c1", i, &names[i as usize - 1], &format!("Apply transformation number {i}."), false))
                .collect(),
        };
        let marker = |name: &str| format!("BODY_MARKER_{name}");
        for mode in [CcwMode::Headers, CcwMode::FullCode, CcwMode::None] {
            let client = OfflineModel::new()
                .with_body(move |name, _| Some(format!("    # BODY_MARKER_{name}\n    return x")))
                .client();
            let runner = CannedRunner::outputs([canned::pass(1)]);
            let config = PipelineConfig { ccw_mode: mode, summaries: SummarySource::Model, ..Default::default() };
            solve_problem(&problem, &problem.domain, &config, &DomainMemory::default(), Services {
                client: &client,
                runner: &runner,
            })
            .unwrap();
            let entries = client.transcript().entries();
            for tag in [tags::STUDENT_PLAN, tags::STUDENT_CODE] {
                let prompts: Vec<String> =
                    entries.iter().filter(|e| e.request.tag == tag).map(|e| e.request.prompt_text()).collect();
                assert_eq!(prompts.len(), 4, "{mode:?} {tag}");
                for (i, prompt) in prompts.iter().enumerate() {
                    for prior in &names[..i] {
                        let header = format!("def {prior}(x):");
                        let (has_header, has_marker) = (prompt.contains(&header), prompt.contains(&marker(prior)));
                        match mode {
                            CcwMode::Headers => assert!(has_header && !has_marker, "{tag} step {}: {prior}", i + 1),
                            CcwMode::FullCode => assert!(has_marker, "{tag} step {}: {prior} body missing", i + 1),
                            CcwMode::None => assert!(!has_header && !has_marker, "{tag} step {}: {prior}", i + 1),
                        }
                    }
                    assert!(!prompt.contains("BODY_MARKER_") || mode == CcwMode::FullCode);
                }
            }
        }
        "headers: all prior headers, no markers; full_code: markers; none: neither".into()
    });
}

#[test]
fn criterion_3_grounding_state_machine() {
    criterion(3, "grounding loop state machine", Duration::from_secs(5), || {
        let signature = FunctionSignature::from_header("def f(x):\n    '''Transform x.'''").unwrap();
        let candidate = Candidate::new("def f(x):\n    return x\n".into(), &signature, "g.1", 0);
        let suite = sub("g", 1, "f", "Transform.", false).eval_suite;
        let limits = Limits::with_timeout(5);
        let run = |k: u32, reactions: Vec<Canned>| {
            let client = OfflineModel::new().client();
            let runner = CannedRunner::new(reactions);
            let outcome = ground_loop(candidate.clone(), &[], &suite, k, &client, &runner, &limits).unwrap();
            (outcome, client.transcript().count_tag(tags::DEBUGGER), runner.invocations())
        };

        let (o, debugger, _) = run(3, vec![Canned::Stdout(canned::pass(1))]);
        assert_eq!((o.rounds_used, o.reports.len(), debugger), (0, 1, 0), "(a) pass at round 0");
        assert_eq!(o.terminal_reason, TerminalReason::Passed);

        let (o, debugger, _) =
            run(3, vec![Canned::Stdout(canned::load_error("SyntaxError")), Canned::Stdout(canned::pass(1))]);
        assert_eq!((o.rounds_used, debugger, o.reports.len()), (1, 1, 2), "(b) one repair");
        assert_eq!(o.reports[0].error_class, ErrorClass::SyntaxError);
        assert!(o.last_report().passed());

        let (o, debugger, runs) = run(3, vec![Canned::Stdout(canned::mismatch(1, &[0], 0.25))]);
        assert_eq!(debugger, 0, "(c) mismatch must not reach the debugger");
        assert_eq!((runs, o.terminal_reason), (1, TerminalReason::NotRepairable));
        assert_eq!(o.last_report().error_class, ErrorClass::AssertionMismatch);

        let (o, debugger, _) = run(3, vec![Canned::Stdout(canned::load_error("SyntaxError"))]);
        assert_eq!((o.reports.len(), o.rounds_used, debugger), (4, 3, 3), "(d) exhaustion");
        assert_eq!(o.terminal_reason, TerminalReason::RoundsExhausted);
        "pass@0, 1 repair, 0 debugger calls on mismatch, 4 reports at k=3".into()
    });
}

/// Independent recount: walks the expected shape and looks every result up
/// by id.
fn brute_force_tally(results: &[SubResult], shape: &ExpectedShape) -> (BTreeMap<DomainLabel, Tally>, Tally) {
    let mut per_domain: BTreeMap<DomainLabel, Tally> = BTreeMap::new();
    for (pid, p) in &shape.problems {
        let t = per_domain.entry(p.domain.clone()).or_default();
        t.main_total += 1;
        let mut all = true;
        for sid in &p.subproblems {
            t.sub_total += 1;
            let passed = results.iter().any(|r| &r.problem_id == pid && &r.subproblem_id == sid && r.passed);
            if passed {
                t.sub_solved += 1;
            } else {
                all = false;
            }
        }
        if all {
            t.main_solved += 1;
        }
    }
    let mut total = Tally::default();
    for t in per_domain.values() {
        total.main_solved += t.main_solved;
        total.main_total += t.main_total;
        total.sub_solved += t.sub_solved;
        total.sub_total += t.sub_total;
    }
    (per_domain, total)
}

fn random_results(rng: &mut ChaCha8Rng, problems: usize, fail_rate: f64) -> (Vec<SubResult>, ExpectedShape) {
    let mut results = Vec::new();
    let mut shape = ExpectedShape::default();
    for p in 0..problems {
        let pid = format!("r{p}");
        let domain = DOMAINS[rng.gen_range(0..DOMAINS.len())];
        let n = rng.gen_range(1..=6);
        let mut subs = Vec::new();
        for s in 1..=n {
            let class =
                if rng.gen_bool(fail_rate) { FAILURE_CLASSES[rng.gen_range(0..6)] } else { ErrorClass::None };
            results.push(result(&pid, s, domain, class));
            subs.push(format!("{pid}.{s}"));
        }
        shape.problems.insert(pid, ExpectedProblem { domain: label(domain), subproblems: subs });
    }
    (results, shape)
}

/// Builds results matching one domain's (main solved, main total, sub solved,
/// sub total) row: solved problems get a single passing step, the rest share
/// the remaining steps with at least one failure each.
fn table_domain(domain: &str, row: (u64, u64, u64, u64), results: &mut Vec<SubResult>, shape: &mut ExpectedShape) {
    let (main_solved, main_total, sub_solved, sub_total) = row;
    let unsolved = (main_total - main_solved) as usize;
    let mut steps: Vec<Vec<ErrorClass>> = vec![vec![ErrorClass::None]; main_solved as usize];
    let mut rest = vec![vec![ErrorClass::AssertionMismatch]; unsolved];
    let mut extra_pass = sub_solved - main_solved;
    let mut extra_fail = (sub_total - main_solved) - (sub_solved - main_solved) - unsolved as u64;
    let mut i = 0;
    while extra_pass + extra_fail > 0 {
        if extra_pass > 0 {
            rest[i % unsolved].push(ErrorClass::None);
            extra_pass -= 1;
        } else {
            rest[i % unsolved].push(ErrorClass::RuntimeException);
            extra_fail -= 1;
        }
        i += 1;
    }
    steps.extend(rest);
    for (p, classes) in steps.iter().enumerate() {
        let pid = format!("{domain}-{p}");
        let mut subs = Vec::new();
        for (s, class) in classes.iter().enumerate() {
            results.push(result(&pid, s + 1, domain, *class));
            subs.push(format!("{pid}.{}", s + 1));
        }
        shape.problems.insert(pid, ExpectedProblem { domain: label(domain), subproblems: subs });
    }
}

#[test]
fn criterion_4_scoring_oracle() {
    criterion(4, "scoring oracle and reference table", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let problems = rng.gen_range(1..=12);
            let rate = rng.gen_range(0.0..0.6);
            let (results, shape) = random_results(&mut rng, problems, rate);
            let board = score(&results, &shape).unwrap();
            let (per_domain, total) = brute_force_tally(&results, &shape);
            assert_eq!(board.per_domain, per_domain);
            assert_eq!(board.total, total);
        }

        // (main solved, main total, sub solved, sub total) per domain
        let rows = [
            ("physics", (4, 30, 56, 145)),
            ("chemistry", (2, 7, 14, 42)),
            ("biology", (0, 7, 7, 25)),
            ("materials", (3, 11, 26, 50)),
            ("mathematics", (3, 10, 10, 24)),
        ];
        let (mut results, mut shape) = (Vec::new(), ExpectedShape::default());
        for (domain, row) in rows {
            table_domain(domain, row, &mut results, &mut shape);
        }
        let board = score(&results, &shape).unwrap();
        for (domain, (ms, mt, ss, st)) in rows {
            let t = board.per_domain[&label(domain)];
            assert_eq!((t.main_solved, t.main_total, t.sub_solved, t.sub_total), (ms, mt, ss, st), "{domain}");
        }
        assert_eq!(board.total.main_fraction(), "12/65", "main total");
        assert_eq!(
            board.total.sub_fraction(),
            "113/283",
            "sub total: the per-domain subproblem counts 145+42+25+50+24 sum to {}, not 283",
            board.total.sub_total
        );
        "1000 random fixtures match recount; table totals 12/65 and 113/283".into()
    });
}

/// Bin from the decimal exponent of the shortest round-trip representation.
fn oracle_bin(d: f64) -> usize {
    if d.is_infinite() {
        return BIN_COUNT - 1;
    }
    if d == 0.0 {
        return 0;
    }
    let text = format!("{d:e}");
    let exponent: i32 = text.split('e').nth(1).unwrap().parse().unwrap();
    (exponent + 11).clamp(0, 12) as usize
}

#[test]
fn criterion_5_precision_bins() {
    criterion(5, "precision bins", Duration::from_secs(5), || {
        let below = |x: f64| f64::from_bits(x.to_bits() - 1);
        let above = |x: f64| f64::from_bits(x.to_bits() + 1);
        let edges = [
            (0.0, 0),
            (1e-10, 1),
            (below(1e-7), 3),
            (1e-7, 4),
            (1.0, 11),
            (10.0, 12),
            (above(10.0), 12),
            (f64::INFINITY, 12),
        ];
        for (d, bin) in edges {
            assert_eq!(deviation_bin(d).unwrap(), bin, "deviation {d:e}");
            assert_eq!(oracle_bin(d), bin, "oracle disagrees at {d:e}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut expected = [0u64; BIN_COUNT];
        let mut results = Vec::new();
        for i in 0..10_000 {
            let d = match rng.gen_range(0..20) {
                0 => 0.0,
                1 => f64::INFINITY,
                2 => 10f64.powi(rng.gen_range(-10..=1)),
                _ => 10f64.powf(rng.gen_range(-13.0..3.0)),
            };
            expected[oracle_bin(d)] += 1;
            let mut r = result(&format!("q{i}"), 1, DOMAINS[i % 5], ErrorClass::None);
            r.deviations = vec![Deviation(d)];
            results.push(r);
        }
        let hist = precision_histogram(&results).unwrap();
        assert_eq!(hist.total.bins, expected);
        assert_eq!(hist.total.bins.iter().sum::<u64>(), 10_000);
        "8 edge values and 10^4 random deviations match".into()
    });
}

#[test]
fn criterion_6_error_taxonomy() {
    criterion(6, "error taxonomy", Duration::from_secs(5), || {
        let expected = [
            (ErrorClass::None, StatCategory::Pass),
            (ErrorClass::SyntaxError, StatCategory::ExecutionFailure),
            (ErrorClass::ImportError, StatCategory::ExecutionFailure),
            (ErrorClass::RuntimeException, StatCategory::ExecutionFailure),
            (ErrorClass::AssertionMismatch, StatCategory::Semantic),
            (ErrorClass::Timeout, StatCategory::ExecutionFailure),
            (ErrorClass::RunnerCrash, StatCategory::ExecutionFailure),
        ];
        assert_eq!(expected.len(), ErrorClass::ALL.len());
        for (class, category) in expected {
            assert_eq!(stat_category(class), category, "{class}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let n = rng.gen_range(1..=15);
            let (results, _) = random_results(&mut rng, n, 0.5);
            let h = error_histogram(&results);
            let failing: Vec<&SubResult> = results.iter().filter(|r| !r.passed).collect();
            let semantic = failing.iter().filter(|r| r.error_class == ErrorClass::AssertionMismatch).count() as u64;
            assert_eq!(h.by_class.values().sum::<u64>(), failing.len() as u64);
            assert_eq!(h.by_domain.values().flat_map(|m| m.values()).sum::<u64>(), failing.len() as u64);
            assert_eq!((h.semantic, h.execution_failure), (semantic, failing.len() as u64 - semantic));
        }
        "7 classes mapped; 500 random histograms conserve failures".into()
    });
}

#[test]
fn criterion_7_teacher_properties() {
    criterion(7, "teacher properties", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for c in 0..200 {
            let n = rng.gen_range(1..=20);
            let mut problems = Vec::new();
            let mut split = BTreeMap::new();
            for p in 0..n {
                let id = format!("k{c}p{p}");
                let validation = rng.gen_bool(0.3);
                let steps = rng.gen_range(1..=4);
                let domain = DOMAINS[rng.gen_range(0..DOMAINS.len())];
                problems.push(Problem {
                    id: id.clone(),
                    domain: label(domain),
                    main_statement: "Fixture problem.".into(),
                    subproblems: (1..=steps)
                        .map(|s| sub(&id, s, &format!("{id}_f{s}"), "Step.", validation))
                        .collect(),
                });
                split.insert(id, if validation { Split::Validation } else { Split::Test });
            }
            let corpus = Corpus::new(problems, split.clone()).unwrap();
            let fraction = rng.gen_range(0.01..=1.0);
            match select_teacher_exemplars(&corpus, fraction, rng.gen()) {
                Ok(selection) => {
                    for (domain, exemplars) in &selection.by_domain {
                        assert!(!exemplars.is_empty());
                        for ex in exemplars {
                            assert_eq!(split[&ex.problem_id], Split::Validation, "{} leaked from test", ex.id());
                            assert_eq!(&ex.domain, domain);
                        }
                    }
                    checked += 1;
                }
                Err(CorpusError::NoValidationSplit) => assert!(split.values().all(|s| *s == Split::Test)),
                Err(e) => panic!("unexpected selection error: {e}"),
            }
        }

        let problem = Problem {
            id: "t1".into(),
            domain: label("physics"),
            main_statement: "Fixture.".into(),
            subproblems: vec![sub("t1", 1, "f", "Step.", true)],
        };
        let exemplar = Exemplar {
            problem_id: "t1".into(),
            domain: label("physics"),
            main_statement: problem.main_statement.clone(),
            sub: problem.subproblems[0].clone(),
        };
        let steps = 3u32;
        let rationale = Rationale { steps: (1..=steps).map(|i| format!("step {i}")).collect(), source: "t1.1".into() };
        let iters = 3u32;
        for (mode, per_iter) in [(ReflectionMode::Whole, 1), (ReflectionMode::Stepwise, steps)] {
            let client =
                OfflineModel::new().with_rule(tags::TEACHER_CRITIQUE, |_| Ok("REVISE:\n- keep going".into())).client();
            let out = self_reflect(&rationale, &exemplar, mode, iters, &client).unwrap();
            assert_eq!(out.iterations, iters);
            let t = client.transcript();
            assert_eq!(t.count_tag(tags::TEACHER_REFINE), iters as usize, "{mode:?}");
            assert_eq!(t.count_tag(tags::TEACHER_CRITIQUE), (iters * per_iter) as usize, "{mode:?}");
        }
        format!("{checked} corpora without overlap; critique calls = iterations (whole), iterations x steps (stepwise)")
    });
}
