use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use sciagent::backend::{BackendMode, ChatClient, Transcript};
use sciagent::corpus::load_corpus;
use sciagent::driver::{run_corpus, teacher_phase, DriverError, MemorySource, PipelineConfig, Services, Strategy};
use sciagent::evaluator::{render_markdown, write_report, ResultsFile};
use sciagent::grounding::ProcessRunner;

#[derive(Parser)]
#[command(name = "sciagent", version, about = "Generate, ground and score chained scientific code")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distil per-domain guidance from the validation split.
    TeacherBuild {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory; templates go to `<out>/memory`.
        #[arg(long, default_value = "out/teacher")]
        out: PathBuf,
    },
    /// Solve the test split with one strategy and write a report.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strategy: Strategy,
        /// Answer model calls from a recorded transcript instead of the network.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Output directory (default `out/<strategy>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Load templates from a `teacher-build` memory directory.
        #[arg(long)]
        memory: Option<PathBuf>,
    },
    /// Score a results file and print the tables.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
    },
    /// Score a results file and write `report.json` and `report.md`.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn connect(config: &PipelineConfig, out: &Path) -> Result<ChatClient, DriverError> {
    let transcript = Transcript::to_file(out.join("transcript.jsonl"))?;
    Ok(config.backend.connect(Arc::new(transcript))?)
}

fn execute(cli: Cli) -> Result<(), DriverError> {
    match cli.command {
        Command::TeacherBuild { corpus, config, out } => {
            let corpus = load_corpus(corpus)?;
            let config = PipelineConfig::load(config)?;
            let client = connect(&config, &out)?;
            let (memory, report) = teacher_phase(&corpus, &config, &client)?;
            let dir = out.join("memory");
            memory.save(&dir)?;
            println!("wrote {} template(s) to {}", memory.len(), dir.display());
            for d in &report.uncovered {
                println!("no template for domain {d}");
            }
            for s in &report.skipped {
                println!("skipped exemplar {}: {}", s.exemplar_id, s.reason);
            }
        }
        Command::Run { corpus, config, strategy, replay, out, memory } => {
            let corpus = load_corpus(corpus)?;
            let mut config = PipelineConfig::load(config)?;
            if let Some(path) = replay {
                config.backend.mode = BackendMode::Scripted;
                config.backend.replay = Some(path);
            }
            let runner_config = config
                .runner
                .clone()
                .ok_or_else(|| DriverError::ConfigInvalid("no [runner] table configured".into()))?;
            let runner = ProcessRunner::new(runner_config.program, runner_config.args);
            let out = out.unwrap_or_else(|| Path::new("out").join(strategy.as_str()));
            let client = connect(&config, &out)?;
            let source = memory.map_or(MemorySource::Build, MemorySource::Load);
            let outcome = run_corpus(&corpus, &config, strategy, Services { client: &client, runner: &runner }, source, &out)?;
            let total = outcome.report.scoreboard.total;
            println!(
                "{strategy}: main {} sub {} -> {}",
                total.main_fraction(),
                total.sub_fraction(),
                out.display()
            );
        }
        Command::Evaluate { results } => {
            let report = ResultsFile::load(results)?.evaluate()?;
            print!("{}", render_markdown(&report));
        }
        Command::Report { results, out } => {
            let report = ResultsFile::load(results)?.evaluate()?;
            let (json, md) = write_report(&report, out)?;
            println!("wrote {} and {}", json.display(), md.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
