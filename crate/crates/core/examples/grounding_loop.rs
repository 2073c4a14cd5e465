//! The debugger loop against scripted runner reports: which failures it
//! repairs, which it leaves alone, and when it gives up.
//!
//! ```text
//! cargo run --example grounding_loop
//! ```

use sciagent::corpus::{EvalCase, FunctionSignature, TargetValue, DEFAULT_ATOL, DEFAULT_RTOL};
use sciagent::grounding::{canned, ground_loop, CannedRunner, Limits};
use sciagent::offline::OfflineModel;
use sciagent::prompts::tags;
use sciagent::student::Candidate;

const K: u32 = 3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sig = FunctionSignature::from_header("def half(x):\n    '''Half of x.'''")?;
    let suite = vec![EvalCase {
        entry: "half".into(),
        args: vec![TargetValue::scalar_float(3.0)],
        expected: TargetValue::scalar_float(1.5),
        rtol: DEFAULT_RTOL,
        atol: DEFAULT_ATOL,
        setup: None,
    }];
    let scenarios: [(&str, Vec<String>); 4] = [
        ("syntax error, then fixed", vec![canned::load_error("SyntaxError"), canned::pass(1)]),
        ("wrong answer", vec![canned::mismatch(1, &[0], 0.25)]),
        ("runtime exception", vec![canned::call_error("ZeroDivisionError")]),
        ("import error every round", vec![canned::load_error("ModuleNotFoundError")]),
    ];

    for (label, outputs) in scenarios {
        let client = OfflineModel::new().with_body(|_, _| Some("    return x / 2".into())).client();
        let runner = CannedRunner::outputs(outputs);
        let candidate = Candidate::new("def half(x):\n    return x / 2\n".into(), &sig, "h.1", 0);
        let outcome = ground_loop(candidate, &[], &suite, K, &client, &runner, &Limits::with_timeout(5))?;
        let classes: Vec<&str> = outcome.reports.iter().map(|r| r.error_class.as_str()).collect();
        println!(
            "{label:<26} {:?} after {} repair round(s), {} debugger call(s), runs: {}",
            outcome.terminal_reason,
            outcome.rounds_used,
            client.transcript().count_tag(tags::DEBUGGER),
            classes.join(" -> ")
        );
    }
    Ok(())
}
