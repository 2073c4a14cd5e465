//! Multi-agent generation, grounding and evaluation of chained scientific code.
//!
//! A run has two phases. The teacher phase distils per-domain guidance from a
//! handful of validation problems that come with reference code: a rationale
//! is derived from each reference, refined by a self-reflection loop into
//! pseudocode, and stored as a [`teacher::GuidanceTemplate`] in a
//! [`teacher::DomainMemory`]. The student phase then solves test problems step
//! by step: a rationale agent plans each step using the domain's guidance and
//! a [`student::ConsolidatedContextWindow`] of prior signatures and one-line
//! summaries, a coding agent writes the function, and a debugger repairs
//! syntax and import failures only. The [`evaluator`] scores results with the
//! all-steps-pass rule and bins numeric deviations.
//!
//! Execution of candidate code is delegated to an external runner process
//! speaking the JSON contract in [`grounding`].

pub mod backend;
pub mod corpus;
pub mod driver;
pub mod evaluator;
pub mod grounding;
pub mod offline;
pub mod prompts;
pub mod pysrc;
pub mod student;
pub mod teacher;
