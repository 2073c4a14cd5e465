//! Distill guidance templates from the validation split of the mini corpus
//! with an offline model, once with whole-rationale critique and once with
//! per-step critique, and compare what each costs.
//!
//! ```text
//! cargo run --example teacher_distillation
//! ```

use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};

use sciagent::corpus::{load_corpus, select_teacher_exemplars};
use sciagent::offline::OfflineModel;
use sciagent::prompts::tags;
use sciagent::teacher::{distill, DomainMemory, ReflectionMode, TeacherSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus");
    let corpus = load_corpus(&fixture)?;
    let selection = select_teacher_exemplars(&corpus, 1.0, 7)?;
    for (domain, exemplars) in &selection.by_domain {
        let ids: Vec<&str> = exemplars.iter().map(|e| e.id()).collect();
        println!("exemplars for {domain}: {}", ids.join(", "));
    }
    for domain in &selection.uncovered {
        println!("no validation material for {domain}; it will run zero-shot");
    }

    for mode in [ReflectionMode::Whole, ReflectionMode::Stepwise] {
        // the reviewer asks for one revision, then approves everything
        let critiques = AtomicU32::new(0);
        let client = OfflineModel::new()
            .with_rule(tags::TEACHER_CRITIQUE, move |_| {
                Ok(if critiques.fetch_add(1, Ordering::SeqCst) == 0 {
                    "REVISE: name the array shape returned by each step".to_string()
                } else {
                    "APPROVED".to_string()
                })
            })
            .client();
        let settings = TeacherSettings { mode, max_iters: 3 };
        let (memory, report) = distill(&selection, settings, &client)?;
        let t = client.transcript();
        println!(
            "\n{mode:?}: rationale {} critique {} refine {} calls, {} template(s), {} unconverged",
            t.count_tag(tags::TEACHER_RATIONALE),
            t.count_tag(tags::TEACHER_CRITIQUE),
            t.count_tag(tags::TEACHER_REFINE),
            memory.len(),
            report.unconverged.len()
        );

        let dir = tempfile::tempdir()?;
        memory.save(dir.path())?;
        let reloaded = DomainMemory::load(dir.path())?;
        memory.check_provenance(&corpus)?;
        for domain in reloaded.domains() {
            let template = reloaded.get(domain).expect("listed domain");
            for p in &template.provenance {
                println!("  {domain}: {} after {} iteration(s)", p.exemplar_id, p.iterations);
            }
        }
        if mode == ReflectionMode::Whole {
            let first = reloaded.domains().next().and_then(|d| reloaded.get(d)).expect("one template");
            println!("\nfew-shot block handed to the student:\n{}", first.render_examples());
        }
    }
    Ok(())
}
