use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, DomainLabel, Split, SubProblem};

/// A validation subproblem chosen as teacher material, with enough context
/// from its parent problem to build a guidance template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub problem_id: String,
    pub domain: DomainLabel,
    pub main_statement: String,
    pub sub: SubProblem,
}

impl Exemplar {
    pub fn id(&self) -> &str {
        &self.sub.id
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExemplarSelection {
    pub by_domain: BTreeMap<DomainLabel, Vec<Exemplar>>,
    /// Domains present in the corpus that had no validation subproblems.
    pub uncovered: Vec<DomainLabel>,
}

/// Per-domain exemplar budget: `max(1, floor(fraction * n))` for `n > 0`.
pub fn exemplar_budget(fraction: f64, available: usize) -> usize {
    if available == 0 {
        return 0;
    }
    ((fraction * available as f64).floor() as usize).clamp(1, available)
}

/// Draws teacher exemplars from the validation split, per domain.
///
/// The budget is counted in subproblems. Selection depends only on the corpus,
/// `fraction` and `seed`; each domain gets its own generator seeded from
/// `seed` and the domain label, so adding a domain never perturbs another
/// domain's picks.
pub fn select_teacher_exemplars(
    corpus: &Corpus,
    fraction: f64,
    seed: u64,
) -> Result<ExemplarSelection, CorpusError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    if corpus.problems_in(Split::Validation).next().is_none() {
        return Err(CorpusError::NoValidationSplit);
    }

    let mut pools: BTreeMap<DomainLabel, Vec<Exemplar>> = BTreeMap::new();
    for p in corpus.problems_in(Split::Validation) {
        for sub in &p.subproblems {
            pools.entry(p.domain.clone()).or_default().push(Exemplar {
                problem_id: p.id.clone(),
                domain: p.domain.clone(),
                main_statement: p.main_statement.clone(),
                sub: sub.clone(),
            });
        }
    }

    let mut selection = ExemplarSelection::default();
    for domain in corpus.domains() {
        let Some(mut pool) = pools.remove(domain) else {
            tracing::warn!(%domain, "no validation subproblems; domain runs without guidance");
            selection.uncovered.push(domain.clone());
            continue;
        };
        let budget = exemplar_budget(fraction, pool.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ label_hash(domain));
        pool.shuffle(&mut rng);
        pool.truncate(budget);
        pool.sort_by(|a, b| (&a.problem_id, a.sub.step_index).cmp(&(&b.problem_id, b.sub.step_index)));
        for ex in &pool {
            if corpus.split_of(&ex.problem_id) != Some(Split::Validation) {
                return Err(CorpusError::NonOverlapViolation(ex.sub.id.clone()));
            }
        }
        selection.by_domain.insert(domain.clone(), pool);
    }
    Ok(selection)
}

/// FNV-1a over the label bytes; fixed so seeds stay portable across builds.
fn label_hash(label: &DomainLabel) -> u64 {
    label.as_str().bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}
