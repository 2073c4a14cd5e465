use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// The five built-in scientific domains, in reporting order.
pub const CANONICAL_DOMAINS: [&str; 5] =
    ["physics", "chemistry", "biology", "materials", "mathematics"];

/// A lowercase domain label such as `physics`, or an extension label.
///
/// Ordering puts the canonical domains first (in [`CANONICAL_DOMAINS`] order),
/// followed by any extension labels alphabetically, so per-domain tables line
/// up with the usual column layout.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DomainLabel(String);

impl DomainLabel {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidDomainLabel> {
        let value = value.into();
        if value.is_empty() || value.trim() != value {
            return Err(InvalidDomainLabel(value));
        }
        if value.chars().any(|c| c.is_uppercase() || c.is_whitespace()) {
            return Err(InvalidDomainLabel(value));
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical_rank().is_some()
    }

    fn canonical_rank(&self) -> Option<usize> {
        CANONICAL_DOMAINS.iter().position(|d| *d == self.0)
    }

    pub fn physics() -> Self {
        Self("physics".into())
    }

    pub fn chemistry() -> Self {
        Self("chemistry".into())
    }

    pub fn biology() -> Self {
        Self("biology".into())
    }

    pub fn materials() -> Self {
        Self("materials".into())
    }

    pub fn mathematics() -> Self {
        Self("mathematics".into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid domain label {0:?}: must be non-empty lowercase without whitespace")]
pub struct InvalidDomainLabel(pub String);

impl Ord for DomainLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.canonical_rank(), other.canonical_rank()) {
            (Some(a), Some(b)) => a.cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for DomainLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DomainLabel({})", self.0)
    }
}

impl std::str::FromStr for DomainLabel {
    type Err = InvalidDomainLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl Serialize for DomainLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for DomainLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Self::new(raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_uppercase_and_blank() {
        assert!(DomainLabel::new("Physics").is_err());
        assert!(DomainLabel::new("").is_err());
        assert!(DomainLabel::new(" physics").is_err());
        assert!(DomainLabel::new("quantum optics").is_err());
        assert!(DomainLabel::new("geoscience").is_ok());
    }

    #[test]
    fn canonical_domains_sort_before_extensions() {
        let mut labels: Vec<DomainLabel> = ["astronomy", "mathematics", "physics", "biology"]
            .into_iter()
            .map(|s| DomainLabel::new(s).unwrap())
            .collect();
        labels.sort();
        let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
        assert_eq!(names, ["physics", "biology", "mathematics", "astronomy"]);
    }
}
