use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{GuidanceTemplate, TeacherError};
use crate::corpus::{Corpus, DomainLabel, Split};

/// Per-domain guidance, isolated so a lookup for one domain can only ever
/// return material distilled from that domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainMemory {
    store: BTreeMap<DomainLabel, GuidanceTemplate>,
}

impl DomainMemory {
    /// Inserts `template` under its own domain, replacing any previous entry.
    pub fn insert(&mut self, template: GuidanceTemplate) {
        self.store.insert(template.domain.clone(), template);
    }

    pub fn get(&self, domain: &DomainLabel) -> Option<&GuidanceTemplate> {
        self.store.get(domain)
    }

    pub fn domains(&self) -> impl Iterator<Item = &DomainLabel> {
        self.store.keys()
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    /// Checks that every provenance id names a validation subproblem of
    /// `corpus`.
    pub fn check_provenance(&self, corpus: &Corpus) -> Result<(), TeacherError> {
        for template in self.store.values() {
            for p in &template.provenance {
                let ok = corpus.split_of(&p.problem_id) == Some(Split::Validation)
                    && corpus
                        .problem(&p.problem_id)
                        .is_some_and(|prob| prob.subproblems.iter().any(|s| s.id == p.exemplar_id));
                if !ok {
                    return Err(TeacherError::ProvenanceViolation(p.exemplar_id.clone()));
                }
            }
        }
        Ok(())
    }

    /// Writes one `<domain>.json` file per template into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), TeacherError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| TeacherError::Io { path: dir.to_path_buf(), source: e })?;
        for (domain, template) in &self.store {
            let path = dir.join(format!("{domain}.json"));
            let mut bytes = serde_json::to_vec_pretty(template).expect("template serializes");
            bytes.push(b'\n');
            fs::write(&path, bytes).map_err(|e| TeacherError::Io { path, source: e })?;
        }
        Ok(())
    }

    /// Reads every `*.json` file in `dir`; each file's stem must match the
    /// template's domain.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, TeacherError> {
        let dir = dir.as_ref();
        let mut memory = Self::default();
        let entries = fs::read_dir(dir).map_err(|e| TeacherError::Io { path: dir.to_path_buf(), source: e })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|e| TeacherError::Io { path: path.clone(), source: e })?;
            let template: GuidanceTemplate = serde_json::from_str(&text)
                .map_err(|e| TeacherError::MemoryFormat { path: path.clone(), detail: e.to_string() })?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if stem != template.domain.as_str() {
                return Err(TeacherError::MemoryFormat {
                    path,
                    detail: format!("file is named for `{stem}` but holds `{}`", template.domain),
                });
            }
            if template.exemplars.is_empty() {
                return Err(TeacherError::MemoryFormat { path, detail: "template has no exemplars".into() });
            }
            memory.insert(template);
        }
        Ok(memory)
    }
}
