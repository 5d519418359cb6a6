//! Reasoning with variable-strength default rules.
//!
//! A rule base is compiled into per-rule priorities with a polynomial number
//! of satisfiability tests. The priorities induce the least admissible
//! ranking of worlds, from which ranks of formulas and graded entailment
//! strengths are read off by binary search. On top of that sit belief states
//! revised by soft evidence (J- and L-conditioning), knowledge-base revision
//! by rule addition, and a brute-force oracle used to cross-check everything
//! on small vocabularies.

pub mod cli;
pub mod evidence;
pub mod formula;
pub mod kb;
pub mod oracle;
pub mod rank;
pub mod revise;
pub mod sat;

pub use formula::{parse, AtomId, Formula, Vocabulary, World};
pub use kb::{compile, CompiledKb, Rule};
pub use rank::{QueryResult, Rank, Strength, Verdict};
pub use evidence::{BeliefState, Evidence, EvidenceItem, Mode};
pub use sat::SatCounter;
