use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::FunctionSignature;

/// Longest summary the window will store, in characters.
pub const SUMMARY_CAP: usize = 160;

pub const EMPTY_MARKER: &str = "# (no previously implemented functions)";
pub const DISABLED_MARKER: &str = "# (context window disabled)";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcwMode {
    /// Prior headers plus one-sentence summaries.
    #[default]
    Headers,
    /// Prior functions verbatim (ablation).
    FullCode,
    /// Nothing from prior steps (ablation).
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcwEntry {
    pub signature: FunctionSignature,
    pub summary: String,
}

/// Per-problem record of what earlier steps implemented.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsolidatedContextWindow {
    entries: Vec<CcwEntry>,
    mode: CcwMode,
    /// Only populated in full_code mode.
    full_bodies: BTreeMap<String, String>,
}

impl ConsolidatedContextWindow {
    pub fn new(mode: CcwMode) -> Self {
        Self { entries: Vec::new(), mode, full_bodies: BTreeMap::new() }
    }

    pub fn mode(&self) -> CcwMode {
        self.mode
    }

    pub fn entries(&self) -> &[CcwEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.signature.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.signature.name.as_str())
    }

    pub fn body(&self, name: &str) -> Option<&str> {
        self.full_bodies.get(name).map(String::as_str)
    }

    /// Returns a new window with `signature` appended, or replacing the entry
    /// of the same name in place. `body` is kept only in full_code mode.
    /// `self` is left untouched.
    pub fn append(&self, signature: &FunctionSignature, summary: &str, body: &str) -> Self {
        let mut next = self.clone();
        let entry = CcwEntry { signature: signature.clone(), summary: one_line(summary) };
        match next.entries.iter_mut().find(|e| e.signature.name == signature.name) {
            Some(slot) => *slot = entry,
            None => next.entries.push(entry),
        }
        if self.mode == CcwMode::FullCode {
            next.full_bodies.insert(signature.name.clone(), body.trim_end().to_string());
        }
        next
    }

    /// Text inserted into plan and code prompts.
    pub fn render(&self) -> String {
        if self.mode == CcwMode::None {
            return DISABLED_MARKER.to_string();
        }
        if self.entries.is_empty() {
            return EMPTY_MARKER.to_string();
        }
        let mut out = String::new();
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match (self.mode, self.full_bodies.get(&e.signature.name)) {
                (CcwMode::FullCode, Some(body)) => {
                    let _ = writeln!(out, "{body}");
                }
                _ => {
                    let _ = writeln!(out, "{}\n# {}", e.signature.header_text.trim_end(), e.summary);
                }
            }
        }
        out.truncate(out.trim_end().len());
        out
    }
}

/// Free-function form of [`ConsolidatedContextWindow::append`].
pub fn append_ccw(
    ccw: &ConsolidatedContextWindow,
    signature: &FunctionSignature,
    summary: &str,
    body: &str,
) -> ConsolidatedContextWindow {
    ccw.append(signature, summary, body)
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Folds whitespace and cuts `text` to [`SUMMARY_CAP`] characters, at a word
/// boundary when there is one.
pub fn cap_summary(text: &str) -> String {
    let folded = one_line(text);
    if folded.chars().count() <= SUMMARY_CAP {
        return folded;
    }
    let cut: String = folded.chars().take(SUMMARY_CAP).collect();
    let at_boundary = folded.chars().nth(SUMMARY_CAP).is_some_and(char::is_whitespace);
    if at_boundary {
        return cut;
    }
    match cut.rfind(' ') {
        Some(pos) if pos > 0 => cut[..pos].trim_end().to_string(),
        _ => cut,
    }
}
