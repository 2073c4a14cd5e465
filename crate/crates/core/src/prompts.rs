//! Versioned prompt templates shipped as text assets.
//!
//! Each asset under `assets/prompts/` starts with a `#! <name> v<version>`
//! line followed by a `[system]` and a `[user]` section. Placeholders are
//! written `{{name}}` and substituted in a single pass, so substituted text
//! (generated code, statements) is never re-scanned for placeholders.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::backend::Message;

/// Request tags identifying which agent issued a model call.
pub mod tags {
    pub const BUCKETING: &str = "bucketing";
    pub const TEACHER_RATIONALE: &str = "teacher.rationale";
    pub const TEACHER_REFINE: &str = "teacher.refine";
    pub const TEACHER_CRITIQUE: &str = "teacher.critique";
    pub const STUDENT_PLAN: &str = "student.plan";
    pub const STUDENT_CODE: &str = "student.code";
    pub const STUDENT_SUMMARY: &str = "student.summary";
    pub const DEBUGGER: &str = "debugger";
    pub const BASELINE_PLAN: &str = "baseline.plan";
    pub const BASELINE_RECALL: &str = "baseline.recall";
    pub const BASELINE_CODE: &str = "baseline.code";
}

/// The reasoning directive the chain-of-thought baseline injects.
pub const COT_DIRECTIVE: &str = "Let's think step by step before writing any code.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Asset {
    Bucketing,
    TeacherRationale,
    TeacherRefine,
    TeacherCritique,
    TeacherCritiqueStep,
    StudentPlan,
    StudentCode,
    StudentSummary,
    Debugger,
    BaselineDirect,
    BaselineCot,
    BaselinePlan,
    BaselinePlanCode,
    BaselineRecall,
    BaselineAnalogicalCode,
}

impl Asset {
    pub const ALL: [Asset; 15] = [
        Asset::Bucketing,
        Asset::TeacherRationale,
        Asset::TeacherRefine,
        Asset::TeacherCritique,
        Asset::TeacherCritiqueStep,
        Asset::StudentPlan,
        Asset::StudentCode,
        Asset::StudentSummary,
        Asset::Debugger,
        Asset::BaselineDirect,
        Asset::BaselineCot,
        Asset::BaselinePlan,
        Asset::BaselinePlanCode,
        Asset::BaselineRecall,
        Asset::BaselineAnalogicalCode,
    ];

    fn source(self) -> &'static str {
        match self {
            Asset::Bucketing => include_str!("../assets/prompts/bucketing.txt"),
            Asset::TeacherRationale => include_str!("../assets/prompts/teacher_rationale.txt"),
            Asset::TeacherRefine => include_str!("../assets/prompts/teacher_refine.txt"),
            Asset::TeacherCritique => include_str!("../assets/prompts/teacher_critique.txt"),
            Asset::TeacherCritiqueStep => include_str!("../assets/prompts/teacher_critique_step.txt"),
            Asset::StudentPlan => include_str!("../assets/prompts/student_plan.txt"),
            Asset::StudentCode => include_str!("../assets/prompts/student_code.txt"),
            Asset::StudentSummary => include_str!("../assets/prompts/student_summary.txt"),
            Asset::Debugger => include_str!("../assets/prompts/debugger.txt"),
            Asset::BaselineDirect => include_str!("../assets/prompts/baseline_direct.txt"),
            Asset::BaselineCot => include_str!("../assets/prompts/baseline_cot.txt"),
            Asset::BaselinePlan => include_str!("../assets/prompts/baseline_plan.txt"),
            Asset::BaselinePlanCode => include_str!("../assets/prompts/baseline_plan_code.txt"),
            Asset::BaselineRecall => include_str!("../assets/prompts/baseline_recall.txt"),
            Asset::BaselineAnalogicalCode => include_str!("../assets/prompts/baseline_analogical_code.txt"),
        }
    }

    pub fn template(self) -> &'static Template {
        static PARSED: OnceLock<Vec<Template>> = OnceLock::new();
        let all = PARSED.get_or_init(|| {
            Asset::ALL
                .iter()
                .map(|a| Template::parse(a.source()).unwrap_or_else(|e| panic!("bad prompt asset {a:?}: {e}")))
                .collect()
        });
        &all[Asset::ALL.iter().position(|a| *a == self).unwrap()]
    }

    pub fn render(self, vars: &[(&str, &str)]) -> Vec<Message> {
        self.template().render(vars)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub version: u32,
    pub system: String,
    pub user: String,
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, String> {
        let mut lines = source.lines();
        let header = lines.next().ok_or("empty asset")?;
        let rest = header.strip_prefix("#! ").ok_or("missing `#!` header line")?;
        let (name, version) = rest.rsplit_once(" v").ok_or("header lacks ` v<version>`")?;
        let version = version.trim().parse().map_err(|_| format!("bad version in `{header}`"))?;
        let body: Vec<&str> = lines.collect();
        let sys_at = body.iter().position(|l| *l == "[system]").ok_or("missing [system] section")?;
        let user_at = body.iter().position(|l| *l == "[user]").ok_or("missing [user] section")?;
        if user_at < sys_at {
            return Err("[user] must follow [system]".into());
        }
        Ok(Self {
            name: name.to_string(),
            version,
            system: body[sys_at + 1..user_at].join("\n"),
            user: body[user_at + 1..].join("\n"),
        })
    }

    /// `name@v<version>`, recorded in run manifests.
    pub fn id(&self) -> String {
        format!("{}@v{}", self.name, self.version)
    }

    pub fn placeholders(&self) -> Vec<String> {
        let mut out = Vec::new();
        for text in [&self.system, &self.user] {
            let mut rest = text.as_str();
            while let Some(start) = rest.find("{{") {
                let after = &rest[start + 2..];
                match after.find("}}") {
                    Some(end) => {
                        let name = after[..end].to_string();
                        if !out.contains(&name) {
                            out.push(name);
                        }
                        rest = &after[end + 2..];
                    }
                    None => break,
                }
            }
        }
        out
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> Vec<Message> {
        vec![Message::system(substitute(&self.system, vars)), Message::user(substitute(&self.user, vars))]
    }
}

/// Replaces `{{name}}` occurrences in one left-to-right pass. Unknown
/// placeholders are left as written.
pub fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let key = &after[..end];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Extracts a numbered list (`1. ...`, `2) ...`, `Step 3: ...`) from a model
/// response, in order. Indented or bulleted lines directly under a step are
/// folded into it; other prose is ignored.
pub fn numbered_steps(text: &str) -> Vec<String> {
    static RE: OnceLock<regex::Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        regex::Regex::new(r"^\s*(?:[*_]{1,2})?(?:[Ss]tep\s+)?\d{1,3}[.):](?:[*_]{1,2})?\s+(.*\S)\s*$").unwrap()
    });
    let mut steps: Vec<String> = Vec::new();
    let mut open = false;
    for line in text.lines() {
        if let Some(caps) = re.captures(line) {
            steps.push(caps[1].trim_matches(|c| c == '*' || c == '_').trim().to_string());
            open = true;
        } else if line.trim().is_empty() {
            continue;
        } else if open && (line.starts_with(char::is_whitespace) || line.trim_start().starts_with("- ")) {
            let last = steps.last_mut().expect("open implies a step");
            last.push(' ');
            last.push_str(line.trim());
        } else {
            open = false;
        }
    }
    steps.retain(|s| !s.is_empty());
    steps
}

/// `name@vN` for every shipped asset.
pub fn asset_versions() -> BTreeMap<String, u32> {
    Asset::ALL.iter().map(|a| (a.template().name.clone(), a.template().version)).collect()
}
