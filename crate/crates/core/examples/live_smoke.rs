//! Run the mosaic strategy on the mini corpus against a live
//! chat-completions endpoint and keep the transcript for later replay.
//!
//! ```text
//! MOSAIC_API_KEY=... MOSAIC_ENDPOINT=https://host/v1/chat/completions \
//!     MOSAIC_MODEL=some-model cargo run --example live_smoke
//! ```
//!
//! Without a key or endpoint it prints what is missing and exits cleanly.
//! The fixture runner only looks for planted markers, so the scores say
//! nothing about the model; the point is the round trip.

use std::path::Path;
use std::sync::Arc;

use sciagent::backend::{BackendMode, Transcript, API_KEY_ENV};
use sciagent::corpus::load_corpus;
use sciagent::driver::{run_corpus, MemorySource, PipelineConfig, Services, Strategy};
use sciagent::grounding::ProcessRunner;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = std::env::var("MOSAIC_ENDPOINT").ok();
    if std::env::var_os(API_KEY_ENV).is_none() || endpoint.is_none() {
        println!("skipping: set {API_KEY_ENV} and MOSAIC_ENDPOINT to talk to a live model");
        return Ok(());
    }

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini-corpus");
    let corpus = load_corpus(&fixture)?;
    let mut config = PipelineConfig::load(fixture.join("config.toml"))?;
    config.backend.mode = BackendMode::Live;
    config.backend.endpoint = endpoint;
    config.backend.replay = None;
    if let Ok(model) = std::env::var("MOSAIC_MODEL") {
        config.backend.model_id = model;
    }
    config.validate()?;

    let out = tempfile::Builder::new().prefix("live-smoke-").tempdir()?.keep();
    let transcript = Arc::new(Transcript::to_file(out.join("transcript.jsonl"))?);
    let client = config.backend.connect(transcript)?;
    let runner_cfg = config.runner.clone().expect("fixture config names a runner");
    let runner = ProcessRunner::new(runner_cfg.program, runner_cfg.args);

    let outcome = run_corpus(
        &corpus,
        &config,
        Strategy::Mosaic,
        Services { client: &client, runner: &runner },
        MemorySource::Build,
        &out.join("run"),
    )?;
    let total = outcome.report.scoreboard.total;
    println!("main {} sub {}", total.main_fraction(), total.sub_fraction());
    println!("{} exchanges recorded under {}", client.transcript().len(), out.display());
    Ok(())
}
