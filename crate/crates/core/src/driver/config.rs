use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::backend::BackendConfig;
use crate::corpus::DomainMode;
use crate::grounding::DEFAULT_DEBUG_ROUNDS;
use crate::student::CcwMode;
use crate::teacher::{ReflectionMode, DEFAULT_REFLECTION_ITERS};

/// Where context-window summaries come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    /// One model call per accepted function.
    #[default]
    Model,
    /// First docstring sentence, no model call.
    Docstring,
}

/// The `[runner]` table: the executable that speaks the runner protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunnerConfig {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

/// Pipeline settings, read from a TOML file.
///
/// ```toml
/// k_debug_rounds = 3
/// ccw_mode = "headers"
///
/// [backend]
/// mode = "live"
/// endpoint = "https://api.example.com/v1/chat/completions"
/// model_id = "gpt-4o"
///
/// [runner]
/// program = "python3"
/// args = ["shim.py"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub k_debug_rounds: u32,
    pub reflection_mode: ReflectionMode,
    pub reflection_max_iters: u32,
    pub ccw_mode: CcwMode,
    pub teacher_fraction: f64,
    pub seed: u64,
    pub timeout_s: u64,
    pub parallel_problems: usize,
    pub domain_assignment: DomainMode,
    pub summaries: SummarySource,
    pub backend: BackendConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runner: Option<RunnerConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k_debug_rounds: DEFAULT_DEBUG_ROUNDS,
            reflection_mode: ReflectionMode::Whole,
            reflection_max_iters: DEFAULT_REFLECTION_ITERS,
            ccw_mode: CcwMode::Headers,
            teacher_fraction: 0.05,
            seed: 1993,
            timeout_s: 60,
            parallel_problems: 1,
            domain_assignment: DomainMode::Passthrough,
            summaries: SummarySource::Model,
            backend: BackendConfig::default(),
            runner: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        let config: Self = toml::from_str(text).map_err(|e| DriverError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. A runner program given as a relative path with
    /// a directory component is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, DriverError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DriverError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            DriverError::ConfigInvalid(d) => DriverError::ConfigInvalid(format!("{}: {d}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(runner) = &mut config.runner {
            let p = &runner.program;
            if p.is_relative() && p.components().count() > 1 {
                runner.program = absolute(&base.join(p));
            }
        }
        if let Some(replay) = &mut config.backend.replay {
            if replay.is_relative() {
                *replay = absolute(&base.join(&*replay));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::ConfigInvalid(m.to_string()));
        if self.k_debug_rounds == 0 {
            return bad("k_debug_rounds must be at least 1");
        }
        if self.reflection_max_iters == 0 {
            return bad("reflection_max_iters must be at least 1");
        }
        if !(self.teacher_fraction > 0.0 && self.teacher_fraction <= 1.0) {
            return bad("teacher_fraction must lie in (0, 1]");
        }
        if self.timeout_s == 0 {
            return bad("timeout_s must be at least 1");
        }
        if self.parallel_problems == 0 {
            return bad("parallel_problems must be at least 1");
        }
        if self.backend.temperature.is_nan() || self.backend.temperature < 0.0 {
            return bad("backend.temperature must be nonnegative");
        }
        if self.backend.max_tokens == 0 {
            return bad("backend.max_tokens must be positive");
        }
        Ok(())
    }

    /// The config as recorded in reports: the replay path is an input
    /// location, not a setting, so it is dropped.
    pub fn report_snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.backend.replay = None;
        serde_json::to_value(&c).expect("config serializes")
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!((c.k_debug_rounds, c.reflection_max_iters, c.seed, c.timeout_s), (3, 3, 1993, 60));
        assert_eq!(c.ccw_mode, CcwMode::Headers);
        assert_eq!(c.reflection_mode, ReflectionMode::Whole);
    }

    #[test]
    fn full_file_parses() {
        let c = PipelineConfig::from_toml(
            r#"
k_debug_rounds = 2
reflection_mode = "stepwise"
ccw_mode = "full_code"
teacher_fraction = 1.0
parallel_problems = 4
domain_assignment = "model_classify"
summaries = "docstring"

[backend]
mode = "scripted"
replay = "t.jsonl"

[runner]
program = "python3"
args = ["shim.py"]
"#,
        )
        .unwrap();
        assert_eq!(c.k_debug_rounds, 2);
        assert_eq!(c.ccw_mode, CcwMode::FullCode);
        assert_eq!(c.runner.unwrap().args, ["shim.py"]);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_rejected() {
        assert!(matches!(PipelineConfig::from_toml("k_rounds = 3"), Err(DriverError::ConfigInvalid(_))));
        assert!(matches!(PipelineConfig::from_toml("k_debug_rounds = 0"), Err(DriverError::ConfigInvalid(_))));
        assert!(matches!(PipelineConfig::from_toml("teacher_fraction = 1.5"), Err(DriverError::ConfigInvalid(_))));
        assert!(PipelineConfig::from_toml("[backend]\nmode = \"scripted\"\napi_key = \"sk-x\"").is_err());
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[runner]\nprogram = \"./fake.sh\"\n[backend]\nmode = \"scripted\"\nreplay = \"t.jsonl\"\n")
            .unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert!(c.runner.unwrap().program.is_absolute());
        assert!(c.backend.replay.unwrap().starts_with(dir.path()));
    }
}
