use std::collections::VecDeque;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::wire::RunnerInput;
use super::GroundingError;

/// Largest stdout or stderr the engine keeps from one runner invocation.
const OUTPUT_CAP: u64 = 8 << 20;

/// How one runner invocation ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Invocation {
    Completed { stdout: Vec<u8>, stderr: Vec<u8>, exit_code: Option<i32> },
    TimedOut { elapsed_ms: u64 },
}

/// Executes a runner on an `input.json` inside a scratch directory.
pub trait Runner: Send + Sync {
    fn invoke(&self, input: &Path, scratch: &Path, deadline: Duration) -> Result<Invocation, GroundingError>;

    /// Short description for run manifests.
    fn describe(&self) -> String;
}

/// Runs an external executable as `program [args..] <input.json>`.
#[derive(Debug, Clone)]
pub struct ProcessRunner {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ProcessRunner {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self { program: program.into(), args }
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(p) = pipe {
            let _ = p.take(OUTPUT_CAP).read_to_end(&mut buf);
        }
        buf
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // The child leads its own process group, so this also reaches anything
    // it spawned.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

impl Runner for ProcessRunner {
    fn invoke(&self, input: &Path, scratch: &Path, deadline: Duration) -> Result<Invocation, GroundingError> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .arg(input)
            .current_dir(scratch)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        #[cfg(unix)]
        {
            use std::os::unix::process::CommandExt;
            cmd.process_group(0);
        }
        let started = Instant::now();
        let mut child = cmd
            .spawn()
            .map_err(|source| GroundingError::RunnerSpawn { program: self.program.clone(), source })?;
        let out = drain(child.stdout.take());
        let err = drain(child.stderr.take());
        loop {
            let status = child
                .try_wait()
                .map_err(|source| GroundingError::Io { path: self.program.clone(), source })?;
            if let Some(status) = status {
                let stdout = out.join().unwrap_or_default();
                let stderr = err.join().unwrap_or_default();
                return Ok(Invocation::Completed { stdout, stderr, exit_code: status.code() });
            }
            if started.elapsed() >= deadline {
                kill_tree(&mut child);
                let _ = child.wait();
                // Reader threads are left to finish on their own; a stray
                // grandchild holding the pipe must not stall the engine.
                return Ok(Invocation::TimedOut { elapsed_ms: started.elapsed().as_millis() as u64 });
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    fn describe(&self) -> String {
        let mut parts = vec![self.program.display().to_string()];
        parts.extend(self.args.iter().cloned());
        parts.join(" ")
    }
}

/// One scripted runner reaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Canned {
    /// Print this text on stdout and exit 0.
    Stdout(String),
    /// Exit with `code` after printing.
    Exit { code: i32, stdout: String, stderr: String },
    /// Exceed the deadline.
    Timeout,
}

/// Serves canned reactions in order, repeating the last one when the queue
/// runs dry. Records every input it was given.
#[derive(Debug, Default)]
pub struct CannedRunner {
    queue: Mutex<VecDeque<Canned>>,
    last: Mutex<Option<Canned>>,
    seen: Mutex<Vec<RunnerInput>>,
}

impl CannedRunner {
    pub fn new(reactions: impl IntoIterator<Item = Canned>) -> Self {
        Self { queue: Mutex::new(reactions.into_iter().collect()), ..Default::default() }
    }

    /// Convenience for a sequence of stdout records.
    pub fn outputs<S: Into<String>>(outputs: impl IntoIterator<Item = S>) -> Self {
        Self::new(outputs.into_iter().map(|s| Canned::Stdout(s.into())))
    }

    pub fn inputs(&self) -> Vec<RunnerInput> {
        self.seen.lock().unwrap().clone()
    }

    pub fn invocations(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl Runner for CannedRunner {
    fn invoke(&self, input: &Path, _scratch: &Path, deadline: Duration) -> Result<Invocation, GroundingError> {
        let text = std::fs::read(input).map_err(|source| GroundingError::Io { path: input.to_path_buf(), source })?;
        let parsed: RunnerInput = serde_json::from_slice(&text)
            .map_err(|e| GroundingError::Io { path: input.to_path_buf(), source: std::io::Error::other(e) })?;
        self.seen.lock().unwrap().push(parsed);
        let next = {
            let mut queue = self.queue.lock().unwrap();
            let mut last = self.last.lock().unwrap();
            match queue.pop_front() {
                Some(c) => {
                    *last = Some(c.clone());
                    c
                }
                None => last.clone().unwrap_or(Canned::Stdout(String::new())),
            }
        };
        Ok(match next {
            Canned::Stdout(s) => Invocation::Completed { stdout: s.into_bytes(), stderr: vec![], exit_code: Some(0) },
            Canned::Exit { code, stdout, stderr } => {
                Invocation::Completed { stdout: stdout.into_bytes(), stderr: stderr.into_bytes(), exit_code: Some(code) }
            }
            Canned::Timeout => Invocation::TimedOut { elapsed_ms: deadline.as_millis() as u64 },
        })
    }

    fn describe(&self) -> String {
        "canned".into()
    }
}
