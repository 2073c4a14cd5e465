//! One step, three candidates: the runner input the engine writes for a
//! basis-ket function, and how three runner reports are classified.
//!
//! ```text
//! cargo run --example ket_walkthrough
//! ```

use sciagent::corpus::{EvalCase, FunctionSignature, TargetValue, DEFAULT_ATOL, DEFAULT_RTOL};
use sciagent::evaluator::deviation_bin;
use sciagent::grounding::{canned, execute_chain, stat_category, CannedRunner, Limits};
use sciagent::student::Candidate;

const HEADER: &str = "def ket(dim, args):\n    '''Input:\n    dim: int or list, dimension of the ket\n    args: int or list, the i-th basis vector\n    Output:\n    out: dim dimensional array of float\n    '''";

// Tensor product of unit vectors, one per subsystem.
const CORRECT: &str = "def ket(dim, args):
    import numpy as np
    if isinstance(args, int):
        args = [args]
    if isinstance(dim, int):
        dim = [dim] * len(args)
    out = np.array([1.0])
    for d, j in zip(dim, args):
        unit = np.zeros(d)
        unit[j] = 1.0
        out = np.kron(out, unit)
    return out.reshape(-1, 1)
";

// Treats a list of indices as one position in a dim-sized vector.
const NAIVE: &str = "def ket(dim, args):
    import numpy as np
    out = np.zeros(dim)
    out[args] = 1.0
    return out.reshape(-1, 1)
";

const UNTERMINATED: &str = "def ket(dim, args):
    '''Build the ket.
    return None
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sig = FunctionSignature::from_header(HEADER)?;
    // ket(2, [1, 1]) is |11>, the last basis vector of a two-qubit space
    let suite = vec![EvalCase {
        entry: "ket".into(),
        args: vec![TargetValue::scalar_int(2), TargetValue::int_array(vec![2], vec![1, 1])],
        expected: TargetValue::float_array(vec![4, 1], vec![0.0, 0.0, 0.0, 1.0]),
        rtol: DEFAULT_RTOL,
        atol: DEFAULT_ATOL,
        setup: None,
    }];

    // What a real runner would see. The naive version yields a 2x1 vector
    // with two ones, which a comparing runner reports as an infinite deviation.
    let attempts = [
        ("correct", CORRECT, canned::pass(1)),
        ("naive", NAIVE, canned::mismatch(1, &[0], f64::INFINITY)),
        ("unterminated", UNTERMINATED, canned::load_error("SyntaxError")),
    ];
    let runner = CannedRunner::outputs(attempts.iter().map(|a| a.2.clone()));
    let limits = Limits::with_timeout(10);

    for (i, (label, code, _)) in attempts.iter().enumerate() {
        let candidate = Candidate::new(code.to_string(), &sig, "ket.1", 0);
        let report = execute_chain(&[candidate], &suite, &runner, &limits)?;
        if i == 0 {
            let input = &runner.inputs()[0];
            println!("runner input:\n{}\n", serde_json::to_string_pretty(input)?);
        }
        let bins: Vec<String> = report
            .deviations()
            .into_iter()
            .map(|d| deviation_bin(d).map(|b| format!("{d:e} -> bin {b}")))
            .collect::<Result<_, _>>()?;
        println!(
            "{label:<13} phase {:?} class {} ({:?}) exception {} deviations [{}]",
            report.phase,
            report.error_class,
            stat_category(report.error_class),
            report.exception_type.as_deref().unwrap_or("-"),
            bins.join(", ")
        );
        println!("{:<13} eligible for debugger repair: {}", "", report.error_class.repair_eligible());
    }
    Ok(())
}
