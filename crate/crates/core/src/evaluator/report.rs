use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    domains_of, error_histogram, precision_histogram, score, EvalError, ErrorHistogram, ExpectedShape,
    PrecisionHistogram, PrecisionReport, ScoreBoard, SubResult, BIN_LABELS,
};
use crate::corpus::DomainLabel;
use crate::grounding::ErrorClass;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Deterministic run description embedded in reports. Nothing time- or
/// host-dependent belongs here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub strategy: String,
    #[serde(default)]
    pub corpus_digest: Option<String>,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub asset_versions: BTreeMap<String, u32>,
}

/// Everything `report.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub context: ReportContext,
    pub scoreboard: ScoreBoard,
    pub errors: ErrorHistogram,
    pub precision: PrecisionReport,
}

/// Results as written by a run, enough to re-score without the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub context: ReportContext,
    pub expected: ExpectedShape,
    pub results: Vec<SubResult>,
}

impl ResultsFile {
    pub fn evaluate(&self) -> Result<Report, EvalError> {
        Ok(Report {
            schema_version: REPORT_SCHEMA_VERSION,
            context: self.context.clone(),
            scoreboard: score(&self.results, &self.expected)?,
            errors: error_histogram(&self.results),
            precision: precision_histogram(&self.results)?,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| EvalError::ResultsFormat { path: path.into(), detail: e.to_string() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        write_file(path.as_ref(), &pretty(self))
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report structures serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), EvalError> {
    std::fs::write(path, text).map_err(|source| EvalError::Io { path: path.into(), source })
}

fn domain_title(d: &DomainLabel) -> String {
    match d.as_str() {
        "materials" => "Material Science".into(),
        other => {
            let mut c = other.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
    }
}

/// One results-table row: `| name | main | sub | d1 main | d1 sub | ... |`.
pub fn table_row(name: &str, board: &ScoreBoard, domains: &[DomainLabel]) -> String {
    let mut row = format!("| {name} | {} | {} |", board.total.main_fraction(), board.total.sub_fraction());
    for d in domains {
        let t = board.per_domain.get(d).copied().unwrap_or_default();
        let _ = write!(row, " {} | {} |", t.main_fraction(), t.sub_fraction());
    }
    row
}

fn precision_row(name: &str, h: &PrecisionHistogram) -> String {
    let cells: Vec<String> = h.bins.iter().map(u64::to_string).collect();
    format!("| {name} | {} |", cells.join(" | "))
}

/// Human-readable tables.
pub fn render_markdown(report: &Report) -> String {
    let board = &report.scoreboard;
    let domains = domains_of(board, []);
    let mut md = String::new();
    let _ = writeln!(md, "# Evaluation report\n");
    let _ = writeln!(md, "Strategy: `{}`", report.context.strategy);
    if let Some(d) = &report.context.corpus_digest {
        let _ = writeln!(md, "Corpus digest: `{d}`");
    }

    let _ = writeln!(md, "\n## Solved problems\n");
    let mut header = String::from("| Method | Main | Sub |");
    let mut rule = String::from("|---|---|---|");
    for d in &domains {
        let t = domain_title(d);
        let _ = write!(header, " {t} main | {t} sub |");
        rule.push_str("---|---|");
    }
    let _ = writeln!(md, "{header}\n{rule}");
    if board.total.main_total > 0 {
        let _ = writeln!(md, "{}", table_row(&report.context.strategy, board, &domains));
    }

    let _ = writeln!(md, "\n## Failures by error class\n");
    let classes: Vec<ErrorClass> = ErrorClass::ALL.into_iter().filter(|c| *c != ErrorClass::None).collect();
    let names: Vec<&str> = classes.iter().map(|c| c.as_str()).collect();
    let _ = writeln!(md, "| Domain | {} | semantic | execution_failure |", names.join(" | "));
    let _ = writeln!(md, "|---|{}---|---|", "---|".repeat(classes.len()));
    let errors = &report.errors;
    let class_cells = |counts: &BTreeMap<ErrorClass, u64>| -> String {
        classes.iter().map(|c| counts.get(c).copied().unwrap_or(0).to_string()).collect::<Vec<_>>().join(" | ")
    };
    for (d, counts) in &errors.by_domain {
        let semantic = counts.get(&ErrorClass::AssertionMismatch).copied().unwrap_or(0);
        let total: u64 = counts.values().sum();
        let _ = writeln!(md, "| {} | {} | {semantic} | {} |", domain_title(d), class_cells(counts), total - semantic);
    }
    if !errors.is_empty() {
        let _ = writeln!(
            md,
            "| Total | {} | {} | {} |",
            class_cells(&errors.by_class),
            errors.semantic,
            errors.execution_failure
        );
    }

    let _ = writeln!(md, "\n## Output deviation\n");
    let _ = writeln!(md, "| Domain | {} |", BIN_LABELS.join(" | "));
    let _ = writeln!(md, "|---|{}", "---|".repeat(BIN_LABELS.len()));
    for (d, h) in &report.precision.per_domain {
        let _ = writeln!(md, "{}", precision_row(&domain_title(d), h));
    }
    if report.precision.total.total() > 0 {
        let _ = writeln!(md, "{}", precision_row("Total", &report.precision.total));
    }
    md
}

/// Writes `report.json` and `report.md` into `outdir`. Identical reports
/// produce byte-identical files.
pub fn write_report(report: &Report, outdir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf), EvalError> {
    let outdir = outdir.as_ref();
    std::fs::create_dir_all(outdir).map_err(|source| EvalError::Io { path: outdir.into(), source })?;
    let json = outdir.join("report.json");
    let md = outdir.join("report.md");
    write_file(&json, &pretty(report))?;
    write_file(&md, &render_markdown(report))?;
    Ok((json, md))
}
