//! Solve one multi-step problem under each context-window mode and show what
//! the final step's coding prompt says about the earlier steps.
//!
//! ```text
//! cargo run --example ccw_ablation
//! ```

use std::path::Path;

use sciagent::corpus::load_corpus;
use sciagent::driver::{solve_problem, PipelineConfig, Services, SummarySource};
use sciagent::grounding::{canned, CannedRunner};
use sciagent::offline::OfflineModel;
use sciagent::prompts::tags;
use sciagent::student::CcwMode;
use sciagent::teacher::DomainMemory;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus");
    let corpus = load_corpus(&fixture)?;
    let problem = corpus.problem("p201").expect("fixture problem");
    let memory = DomainMemory::default();

    for mode in [CcwMode::Headers, CcwMode::FullCode, CcwMode::None] {
        let config = PipelineConfig { ccw_mode: mode, summaries: SummarySource::Model, ..Default::default() };
        let client = OfflineModel::new()
            .with_body(|name, _| (name == "angular_frequency").then(|| "    return (k / m) ** 0.5".to_string()))
            .client();
        let runner = CannedRunner::outputs([canned::pass(1)]);
        let result = solve_problem(problem, &problem.domain, &config, &memory, Services { client: &client, runner: &runner })?;

        let prompts: Vec<String> = client
            .transcript()
            .entries()
            .into_iter()
            .filter(|e| e.request.tag == tags::STUDENT_CODE)
            .map(|e| e.request.prompt_text())
            .collect();
        let last = prompts.last().expect("one coding prompt per step");
        println!("=== {mode:?}: solved {} ({} summary calls) ===", result.solved(), client.transcript().count_tag(tags::STUDENT_SUMMARY));
        println!("earlier headers visible: {}", last.contains("def angular_frequency") && last.contains("def period"));
        println!("earlier bodies visible:  {}", last.contains("(k / m) ** 0.5"));
        // every chain still executes the earlier functions verbatim
        let executed = runner.inputs().pop().expect("ran").code;
        println!("executed chain defines angular_frequency: {}\n", executed.contains("def angular_frequency"));
    }
    Ok(())
}
