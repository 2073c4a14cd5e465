//! Lightweight scanning of Python source text.
//!
//! The engine never executes candidate code itself; it only needs to find
//! top-level function declarations, count their parameters, read docstrings
//! and pull fenced code blocks out of model responses. This is a line-oriented
//! scanner, not a parser: it tracks bracket depth, string literals and
//! triple-quoted blocks well enough for generated scientific code.

use std::sync::OnceLock;

use regex::Regex;

/// A top-level `def` found in a source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub arity: usize,
    /// Zero-based line index of the `def` keyword.
    pub line: usize,
    pub docstring: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HeaderError {
    #[error("header contains no function declaration")]
    NoDeclaration,
    #[error("header declares {0} top-level functions, expected exactly one")]
    MultipleDeclarations(usize),
    #[error("unterminated parameter list in declaration of `{0}`")]
    UnterminatedParams(String),
}

fn def_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:async\s+)?def\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap())
}

fn fence_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_+\-]*[ \t]*\r?\n(.*?)```").unwrap())
}

/// Returns the first fenced code block in `text`, without the fences.
pub fn first_fenced_block(text: &str) -> Option<String> {
    fence_regex()
        .captures(text)
        .map(|c| c.get(1).map_or("", |m| m.as_str()).trim_end().to_string())
}

/// Marks each line as lying inside a triple-quoted string (true) or not.
fn triple_quote_mask(lines: &[&str]) -> Vec<bool> {
    let mut mask = Vec::with_capacity(lines.len());
    let mut open: Option<&str> = None;
    for line in lines {
        mask.push(open.is_some());
        let mut rest = *line;
        loop {
            match open {
                Some(delim) => match rest.find(delim) {
                    Some(pos) => {
                        rest = &rest[pos + 3..];
                        open = None;
                    }
                    None => break,
                },
                None => {
                    let dq = rest.find("\"\"\"");
                    let sq = rest.find("'''");
                    let hash = rest.find('#');
                    let next = match (dq, sq) {
                        (Some(a), Some(b)) if a <= b => Some((a, "\"\"\"")),
                        (Some(_), Some(b)) => Some((b, "'''")),
                        (Some(a), None) => Some((a, "\"\"\"")),
                        (None, Some(b)) => Some((b, "'''")),
                        (None, None) => None,
                    };
                    match next {
                        Some((pos, _)) if hash.is_some_and(|h| h < pos) => break,
                        Some((pos, delim)) => {
                            rest = &rest[pos + 3..];
                            open = Some(delim);
                        }
                        None => break,
                    }
                }
            }
        }
    }
    mask
}

/// Counts parameters in the text following the opening parenthesis of a
/// declaration. Returns `None` if the closing parenthesis is never reached.
fn count_params(after_paren: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut current = String::new();
    let mut params = Vec::new();
    let mut in_comment = false;
    for c in after_paren.chars() {
        if in_comment {
            if c == '\n' {
                in_comment = false;
            }
            continue;
        }
        if let Some(q) = quote {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '#' => in_comment = true,
            '\'' | '"' => {
                quote = Some(c);
                current.push(c);
            }
            '(' | '[' | '{' => {
                depth += 1;
                current.push(c);
            }
            ')' if depth == 0 => {
                params.push(std::mem::take(&mut current));
                return Some(
                    params
                        .iter()
                        .map(|p| p.trim())
                        .filter(|p| !p.is_empty() && *p != "*" && *p != "/")
                        .count(),
                );
            }
            ')' | ']' | '}' => {
                depth = depth.saturating_sub(1);
                current.push(c);
            }
            ',' if depth == 0 => params.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    None
}

fn docstring_after(lines: &[&str], def_line: usize) -> Option<String> {
    // Skip to the line that closes the declaration (ends with ':').
    let mut idx = def_line;
    while idx < lines.len() && !lines[idx].trim_end().ends_with(':') {
        idx += 1;
    }
    let first = lines.get(idx + 1..)?.iter().position(|l| !l.trim().is_empty())? + idx + 1;
    let trimmed = lines[first].trim_start();
    let trimmed = trimmed
        .strip_prefix(['r', 'R', 'u', 'U'])
        .filter(|t| t.starts_with("\"\"\"") || t.starts_with("'''"))
        .unwrap_or(trimmed);
    let delim = if trimmed.starts_with("\"\"\"") {
        "\"\"\""
    } else if trimmed.starts_with("'''") {
        "'''"
    } else {
        return None;
    };
    let mut body = String::new();
    let mut rest = &trimmed[3..];
    let mut line_idx = first;
    loop {
        if let Some(end) = rest.find(delim) {
            body.push_str(&rest[..end]);
            break;
        }
        body.push_str(rest);
        body.push('\n');
        line_idx += 1;
        match lines.get(line_idx) {
            Some(next) => rest = next,
            None => break,
        }
    }
    Some(body.trim().to_string())
}

/// Finds every top-level (column zero) function declaration in `code`.
pub fn top_level_defs(code: &str) -> Vec<FunctionDef> {
    let lines: Vec<&str> = code.lines().collect();
    let mask = triple_quote_mask(&lines);
    let mut defs = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if mask[i] {
            continue;
        }
        let Some(caps) = def_regex().captures(line) else {
            continue;
        };
        let name = caps[1].to_string();
        let open = caps.get(0).map_or(0, |m| m.end());
        let tail: String = std::iter::once(&line[open..])
            .chain(lines[i + 1..].iter().copied())
            .collect::<Vec<_>>()
            .join("\n");
        let Some(arity) = count_params(&tail) else {
            continue;
        };
        defs.push(FunctionDef {
            name,
            arity,
            line: i,
            docstring: docstring_after(&lines, i),
        });
    }
    defs
}

/// Parses a function header (declaration plus optional docstring stub),
/// requiring exactly one top-level declaration.
pub fn parse_header(header: &str) -> Result<FunctionDef, HeaderError> {
    let lines: Vec<&str> = header.lines().collect();
    let mask = triple_quote_mask(&lines);
    let declared: Vec<(usize, String)> = lines
        .iter()
        .enumerate()
        .filter(|(i, _)| !mask[*i])
        .filter_map(|(i, l)| def_regex().captures(l).map(|c| (i, c[1].to_string())))
        .collect();
    match declared.len() {
        0 => Err(HeaderError::NoDeclaration),
        1 => {
            let (_, name) = &declared[0];
            top_level_defs(header)
                .into_iter()
                .next()
                .ok_or_else(|| HeaderError::UnterminatedParams(name.clone()))
        }
        n => Err(HeaderError::MultipleDeclarations(n)),
    }
}

/// First sentence of `text`: everything up to and including the first `.`,
/// `!` or `?` that is followed by whitespace or the end of the text. Line
/// breaks are folded into single spaces.
pub fn first_sentence(text: &str) -> Option<String> {
    let folded = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if folded.is_empty() {
        return None;
    }
    let chars: Vec<char> = folded.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            return Some(chars[..=i].iter().collect());
        }
    }
    Some(folded)
}

/// Identifiers used in call position (`name(`), excluding attribute calls
/// such as `np.zeros(`.
pub fn called_identifiers(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"([A-Za-z_][A-Za-z0-9_]*)\s*\(").unwrap());
    let mut out = Vec::new();
    for caps in re.captures_iter(text) {
        let m = caps.get(1).unwrap();
        let preceded_by_dot = text[..m.start()].trim_end().ends_with('.');
        if !preceded_by_dot {
            out.push(m.as_str().to_string());
        }
    }
    out
}
