//! Record a run against the mini corpus, then replay it from the transcript
//! and check that the reports are byte-identical.
//!
//! ```text
//! cargo run --example record_replay            # record into a temp dir
//! cargo run --example record_replay -- --write # refresh fixtures/mini-corpus/transcript.jsonl
//! ```
//!
//! Every strategy is recorded into the same transcript, so the fixture can
//! replay any of them.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use sciagent::backend::{BackendMode, Transcript};
use sciagent::corpus::load_corpus;
use sciagent::driver::{run_corpus, MemorySource, PipelineConfig, Services, Strategy};
use sciagent::grounding::ProcessRunner;
use sciagent::offline::OfflineModel;
use sciagent::prompts::tags;

/// Offline answers for the mini corpus. `energy` carries a planted error the
/// debugger must not touch; `compressibility` first comes back unloadable.
fn mini_model() -> OfflineModel {
    OfflineModel::new().with_body(|name, req| {
        let body = match name {
            "angular_frequency" => "    import math\n    return math.sqrt(k / m)",
            "period" => "    import math\n    return 2 * math.pi / angular_frequency(k, m)",
            "energy" => "    # WRONG: drops the factor one half\n    return k * amplitude ** 2",
            "ideal_pressure" => "    R = 8.314462618\n    return n * R * T / V",
            "compressibility" if req.tag == tags::DEBUGGER => {
                "    R = 8.314462618\n    return p * V / (n * R * T)"
            }
            "compressibility" => "    R = 8.314462618\n    return p * V / (n * R * T  # BROKEN",
            _ => return None,
        };
        Some(body.to_string())
    })
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let write = std::env::args().any(|a| a == "--write");
    let fixture = fixture_dir();
    let corpus = load_corpus(&fixture)?;
    let config = PipelineConfig::load(fixture.join("config.toml"))?;
    let runner_cfg = config.runner.clone().expect("fixture config names a runner");
    let runner = ProcessRunner::new(runner_cfg.program, runner_cfg.args);
    let scratch = tempfile::tempdir()?;

    let transcript_path = if write { fixture.join("transcript.jsonl") } else { scratch.path().join("recorded.jsonl") };
    let _ = std::fs::remove_file(&transcript_path);
    let transcript = Arc::new(Transcript::to_file(&transcript_path)?);
    let client = mini_model().client_with(transcript, config.backend.model_settings());
    for strategy in Strategy::ALL {
        let out = scratch.path().join("record").join(strategy.as_str());
        let o = run_corpus(&corpus, &config, strategy, Services { client: &client, runner: &runner }, MemorySource::Build, &out)?;
        println!("recorded {strategy:<13} main {} sub {}", o.report.scoreboard.total.main_fraction(), o.report.scoreboard.total.sub_fraction());
    }
    println!("{} exchanges -> {}", client.transcript().len(), transcript_path.display());

    let mut replay_cfg = config.clone();
    replay_cfg.backend.mode = BackendMode::Scripted;
    replay_cfg.backend.replay = Some(transcript_path.clone());
    let replayer = replay_cfg.backend.connect(Arc::new(Transcript::in_memory()))?;
    for strategy in Strategy::ALL {
        let out = scratch.path().join("replay").join(strategy.as_str());
        run_corpus(&corpus, &replay_cfg, strategy, Services { client: &replayer, runner: &runner }, MemorySource::Build, &out)?;
        for file in ["report.json", "report.md"] {
            let a = std::fs::read(scratch.path().join("record").join(strategy.as_str()).join(file))?;
            let b = std::fs::read(out.join(file))?;
            assert_eq!(a, b, "{strategy} {file} differs after replay");
        }
    }
    println!("replay reproduced every report byte for byte");
    Ok(())
}
