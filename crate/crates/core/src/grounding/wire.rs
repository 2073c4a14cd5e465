//! The runner protocol: `input.json` in, one JSON record on stdout.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::EvalCase;

pub const PROTOCOL_VERSION: u32 = 1;

/// A nonnegative deviation, possibly infinite. Infinity travels as the
/// string `"inf"` because JSON numbers cannot express it.
///
/// Runners report the largest element-wise absolute difference between the
/// actual and expected value, and infinity when the two cannot be compared
/// (shape or type mismatch, non-finite output).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Deviation(pub f64);

impl Deviation {
    pub const INFINITY: Deviation = Deviation(f64::INFINITY);
}

impl Serialize for Deviation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            Err(serde::ser::Error::custom(format!("deviation {} is not representable", self.0)))
        }
    }
}

impl<'de> Deserialize<'de> for Deviation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Deviation;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Deviation, E> {
                if v >= 0.0 {
                    Ok(Deviation(v))
                } else {
                    Err(E::custom(format!("negative deviation {v}")))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Deviation, E> {
                Ok(Deviation(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Deviation, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Deviation, E> {
                match v.to_ascii_lowercase().as_str() {
                    "inf" | "+inf" | "infinity" => Ok(Deviation::INFINITY),
                    _ => Err(E::custom(format!("unrecognised deviation {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// What the engine writes to `input.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerInput {
    pub v: u32,
    pub code: String,
    pub cases: Vec<EvalCase>,
    pub timeout_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireCase {
    pub index: usize,
    pub pass: bool,
    /// Absent or null when the case never reached comparison.
    #[serde(default)]
    pub deviation: Option<Deviation>,
}

/// What a runner prints on stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerOutput {
    pub v: u32,
    pub phase: String,
    #[serde(default)]
    pub exception_type: Option<String>,
    #[serde(default)]
    pub traceback: String,
    #[serde(default)]
    pub case_results: Vec<WireCase>,
    #[serde(default)]
    pub wall_ms: u64,
}

/// Ready-made runner outputs for canned runners and fake runner scripts.
pub mod canned {
    use super::*;

    fn render(out: RunnerOutput) -> String {
        serde_json::to_string(&out).expect("runner output serializes")
    }

    fn base(phase: &str) -> RunnerOutput {
        RunnerOutput {
            v: PROTOCOL_VERSION,
            phase: phase.into(),
            exception_type: None,
            traceback: String::new(),
            case_results: vec![],
            wall_ms: 1,
        }
    }

    /// Every one of `cases` passes with zero deviation.
    pub fn pass(cases: usize) -> String {
        let mut out = base("none");
        out.case_results =
            (0..cases).map(|index| WireCase { index, pass: true, deviation: Some(Deviation(0.0)) }).collect();
        render(out)
    }

    /// Loading the chain raised `exception`.
    pub fn load_error(exception: &str) -> String {
        let mut out = base("load");
        out.exception_type = Some(exception.into());
        out.traceback = format!("Traceback (most recent call last):\n  File \"chain.py\", line 3\n{exception}: invalid code");
        render(out)
    }

    /// Calling the first case's entry raised `exception`.
    pub fn call_error(exception: &str) -> String {
        let mut out = base("call");
        out.exception_type = Some(exception.into());
        out.traceback = format!("Traceback (most recent call last):\n  File \"chain.py\", line 9\n{exception}: bad call");
        out.case_results = vec![WireCase { index: 0, pass: false, deviation: None }];
        render(out)
    }

    /// All cases reach comparison; `failing` ones miss by `deviation`.
    pub fn mismatch(cases: usize, failing: &[usize], deviation: f64) -> String {
        let mut out = base("compare");
        out.case_results = (0..cases)
            .map(|index| {
                let bad = failing.contains(&index);
                WireCase { index, pass: !bad, deviation: Some(Deviation(if bad { deviation } else { 0.0 })) }
            })
            .collect();
        render(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_round_trips_as_string() {
        let text = serde_json::to_string(&WireCase { index: 0, pass: false, deviation: Some(Deviation::INFINITY) }).unwrap();
        assert!(text.contains("\"inf\""));
        let back: WireCase = serde_json::from_str(&text).unwrap();
        assert_eq!(back.deviation, Some(Deviation::INFINITY));
    }

    #[test]
    fn deviation_accepts_numbers_and_infinity_spellings() {
        for (text, want) in [("0", 0.0), ("1.5e-7", 1.5e-7), ("\"Infinity\"", f64::INFINITY), ("\"inf\"", f64::INFINITY)] {
            assert_eq!(serde_json::from_str::<Deviation>(text).unwrap().0, want, "{text}");
        }
        assert!(serde_json::from_str::<Deviation>("-1").is_err());
        assert!(serde_json::from_str::<Deviation>("\"nan\"").is_err());
        let missing: WireCase = serde_json::from_str(r#"{"index":0,"pass":false}"#).unwrap();
        assert_eq!(missing.deviation, None);
    }

    #[test]
    fn canned_outputs_parse() {
        for text in [canned::pass(2), canned::load_error("SyntaxError"), canned::call_error("ValueError"), canned::mismatch(2, &[1], 0.5)] {
            let out: RunnerOutput = serde_json::from_str(&text).unwrap();
            assert_eq!(out.v, PROTOCOL_VERSION);
        }
    }
}
