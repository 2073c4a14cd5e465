//! Score a hand-built result set and render the report: the all-steps rule
//! for main problems, the failure taxonomy and the precision histogram.
//!
//! ```text
//! cargo run --example scoring_report
//! ```

use sciagent::corpus::DomainLabel;
use sciagent::evaluator::{render_markdown, ExpectedProblem, ExpectedShape, ReportContext, ResultsFile, SubResult};
use sciagent::grounding::{Deviation, ErrorClass};

/// Error class and deviation of one step; `None` when never compared.
type Step = (ErrorClass, Option<f64>);

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problems: [(&str, &str, &[Step]); 4] = [
        ("osc", "physics", &[(ErrorClass::None, Some(0.0)), (ErrorClass::None, Some(3e-9))]),
        ("spin", "physics", &[(ErrorClass::None, Some(0.0)), (ErrorClass::AssertionMismatch, Some(0.4))]),
        ("gas", "chemistry", &[(ErrorClass::SyntaxError, None), (ErrorClass::None, Some(2e-6))]),
        ("cell", "biology", &[(ErrorClass::Timeout, None), (ErrorClass::AssertionMismatch, Some(f64::INFINITY))]),
    ];

    let mut file = ResultsFile {
        context: ReportContext { strategy: "handmade".into(), ..Default::default() },
        expected: ExpectedShape::default(),
        results: vec![],
    };
    for (pid, domain, steps) in problems {
        let domain = DomainLabel::new(domain)?;
        let mut subs = Vec::new();
        for (i, (class, deviation)) in steps.iter().enumerate() {
            let sid = format!("{pid}.{}", i + 1);
            file.results.push(SubResult {
                problem_id: pid.into(),
                subproblem_id: sid.clone(),
                domain: domain.clone(),
                passed: *class == ErrorClass::None,
                error_class: *class,
                deviations: deviation.map(Deviation).into_iter().collect(),
                rounds_used: 0,
            });
            subs.push(sid);
        }
        file.expected.problems.insert(pid.into(), ExpectedProblem { domain, subproblems: subs });
    }

    let report = file.evaluate()?;
    let total = report.scoreboard.total;
    println!("main {} sub {}", total.main_fraction(), total.sub_fraction());
    println!("semantic failures {} execution failures {}\n", report.errors.semantic, report.errors.execution_failure);
    print!("{}", render_markdown(&report));

    // a result set missing a step cannot be scored
    file.results.pop();
    println!("\nwith one result dropped: {}", file.evaluate().unwrap_err());
    Ok(())
}
