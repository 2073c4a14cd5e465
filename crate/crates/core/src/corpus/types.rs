use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::DomainLabel;
use crate::pysrc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

/// A main scientific task and its ordered, dependent steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub domain: DomainLabel,
    pub main_statement: String,
    pub subproblems: Vec<SubProblem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubProblem {
    pub id: String,
    pub step_index: u32,
    pub step_statement: String,
    #[serde(default)]
    pub background: String,
    pub signature: FunctionSignature,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io_tests: Option<Vec<IoTest>>,
    pub eval_suite: Vec<EvalCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSignature {
    pub name: String,
    /// Verbatim declaration line(s), including the docstring stub.
    pub header_text: String,
    pub arity: usize,
}

impl FunctionSignature {
    /// Builds a signature from header text, reading the name and arity from
    /// the declaration.
    pub fn from_header(header_text: impl Into<String>) -> Result<Self, pysrc::HeaderError> {
        let header_text = header_text.into();
        let def = pysrc::parse_header(&header_text)?;
        Ok(Self { name: def.name, header_text, arity: def.arity })
    }

    /// Checks that `header_text` declares exactly one function named `name`
    /// with `arity` parameters.
    pub fn check(&self) -> Result<(), String> {
        let def = pysrc::parse_header(&self.header_text).map_err(|e| e.to_string())?;
        if def.name != self.name {
            return Err(format!("header declares `{}`, signature names `{}`", def.name, self.name));
        }
        if def.arity != self.arity {
            return Err(format!(
                "header of `{}` declares {} parameters, signature says {}",
                self.name, def.arity, self.arity
            ));
        }
        Ok(())
    }
}

/// A visible input/output example that generation agents may see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoTest {
    pub args: Vec<TargetValue>,
    pub expected: TargetValue,
}

/// One hidden evaluation call: `entry(*args)` compared against `expected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub entry: String,
    pub args: Vec<TargetValue>,
    pub expected: TargetValue,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setup: Option<String>,
}

pub const DEFAULT_RTOL: f64 = 1e-5;
pub const DEFAULT_ATOL: f64 = 1e-8;

fn default_rtol() -> f64 {
    DEFAULT_RTOL
}

fn default_atol() -> f64 {
    DEFAULT_ATOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Scalar,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Float,
    Int,
    Complex,
    Bool,
    String,
}

/// One element of a [`TargetValue`]. Complex elements are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Datum {
    Bool(bool),
    Int(i64),
    Float(f64),
    Complex([f64; 2]),
    Str(String),
}

impl Datum {
    fn conforms_to(&self, dtype: DType) -> bool {
        matches!(
            (self, dtype),
            (Datum::Bool(_), DType::Bool)
                | (Datum::Int(_), DType::Int | DType::Float)
                | (Datum::Float(_), DType::Float)
                | (Datum::Int(_) | Datum::Float(_) | Datum::Complex(_), DType::Complex)
                | (Datum::Str(_), DType::String)
        )
    }

    fn python_literal(&self, out: &mut String) {
        match self {
            Datum::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
            Datum::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Datum::Float(x) => push_float(out, *x),
            Datum::Complex([re, im]) => {
                out.push_str("complex(");
                push_float(out, *re);
                out.push_str(", ");
                push_float(out, *im);
                out.push(')');
            }
            Datum::Str(s) => {
                out.push('\'');
                for c in s.chars() {
                    match c {
                        '\\' => out.push_str("\\\\"),
                        '\'' => out.push_str("\\'"),
                        '\n' => out.push_str("\\n"),
                        c => out.push(c),
                    }
                }
                out.push('\'');
            }
        }
    }
}

fn push_float(out: &mut String, x: f64) {
    if x.is_nan() {
        out.push_str("float('nan')");
    } else if x.is_infinite() {
        out.push_str(if x > 0.0 { "float('inf')" } else { "float('-inf')" });
    } else {
        let _ = write!(out, "{x:?}");
    }
}

/// A literal argument or expected output, stored as a typed flat array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValue {
    pub kind: ValueKind,
    pub dtype: DType,
    #[serde(default)]
    pub shape: Vec<usize>,
    pub data: Vec<Datum>,
}

impl TargetValue {
    pub fn scalar_float(x: f64) -> Self {
        Self { kind: ValueKind::Scalar, dtype: DType::Float, shape: vec![], data: vec![Datum::Float(x)] }
    }

    pub fn scalar_int(x: i64) -> Self {
        Self { kind: ValueKind::Scalar, dtype: DType::Int, shape: vec![], data: vec![Datum::Int(x)] }
    }

    pub fn float_array(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self {
            kind: ValueKind::Array,
            dtype: DType::Float,
            shape,
            data: data.into_iter().map(Datum::Float).collect(),
        }
    }

    pub fn int_array(shape: Vec<usize>, data: Vec<i64>) -> Self {
        Self {
            kind: ValueKind::Array,
            dtype: DType::Int,
            shape,
            data: data.into_iter().map(Datum::Int).collect(),
        }
    }

    pub fn element_count(&self) -> usize {
        match self.kind {
            ValueKind::Scalar => 1,
            ValueKind::Array => self.shape.iter().product(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.kind == ValueKind::Scalar && !self.shape.is_empty() {
            return Err(format!("scalar value has non-empty shape {:?}", self.shape));
        }
        if self.kind == ValueKind::Array && self.shape.is_empty() {
            return Err("array value has empty shape".into());
        }
        let expected = self.element_count();
        if expected != self.data.len() {
            return Err(format!(
                "shape {:?} implies {} elements, data has {}",
                self.shape,
                expected,
                self.data.len()
            ));
        }
        if let Some(pos) = self.data.iter().position(|d| !d.conforms_to(self.dtype)) {
            return Err(format!("datum {} does not conform to dtype {:?}", pos, self.dtype));
        }
        // JSON has no spelling for these; serde_json would write null.
        let non_finite = |d: &Datum| match d {
            Datum::Float(x) => !x.is_finite(),
            Datum::Complex([re, im]) => !(re.is_finite() && im.is_finite()),
            _ => false,
        };
        if let Some(pos) = self.data.iter().position(non_finite) {
            return Err(format!("datum {pos} is not finite"));
        }
        Ok(())
    }

    /// Renders the value as a Python literal (nested lists for arrays).
    pub fn to_python_literal(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ValueKind::Scalar => {
                if let Some(d) = self.data.first() {
                    d.python_literal(&mut out);
                }
            }
            ValueKind::Array => {
                let mut offset = 0;
                nested_literal(&self.shape, &self.data, &mut offset, &mut out);
            }
        }
        out
    }
}

fn nested_literal(shape: &[usize], data: &[Datum], offset: &mut usize, out: &mut String) {
    out.push('[');
    let (len, rest) = (shape[0], &shape[1..]);
    for i in 0..len {
        if i > 0 {
            out.push_str(", ");
        }
        if rest.is_empty() {
            if let Some(d) = data.get(*offset) {
                d.python_literal(out);
            }
            *offset += 1;
        } else {
            nested_literal(rest, data, offset, out);
        }
    }
    out.push(']');
}
