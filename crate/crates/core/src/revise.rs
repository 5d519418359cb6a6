//! Revision of the rule base itself, and conditionals evaluated against it.

use crate::evidence::BeliefState;
use crate::formula::{Formula, Vocabulary};
use crate::kb::{compile, CompiledKb, KbError, Rule};
use crate::rank::{query, RankError, Strength, Verdict};
use crate::sat::{is_satisfiable, SatCounter};

#[derive(Clone, Debug)]
pub enum RevisionOutcome {
    Accepted(CompiledKb),
    Inconsistent,
}

/// Adds `rule` and recompiles from scratch. `vocab` must extend the
/// vocabulary of `kb` and cover the new rule. The rule's index is replaced
/// by the next free one.
pub fn add_rule(
    kb: &CompiledKb,
    mut rule: Rule,
    vocab: &Vocabulary,
    counter: &mut SatCounter,
) -> Result<RevisionOutcome, KbError> {
    let mut rules = kb.rules();
    rule.index = rules.iter().map(|r| r.index + 1).max().unwrap_or(0);
    rules.push(rule);
    match compile(&rules, vocab, counter) {
        Ok(new_kb) => Ok(RevisionOutcome::Accepted(new_kb)),
        Err(KbError::Inconsistent { .. }) => Ok(RevisionOutcome::Inconsistent),
        Err(e) => Err(e),
    }
}

/// Ramsey test: does `b` plausibly follow from `a` under `kb`?
pub fn accepts_conditional(
    kb: &CompiledKb,
    a: &Formula,
    b: &Formula,
    counter: &mut SatCounter,
) -> Result<(bool, Strength), RankError> {
    let r = query(kb, a, b, counter)?;
    Ok((r.verdict == Verdict::Believed, r.strength))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NestedOutcome {
    Holds(Strength),
    Fails(Strength),
    PremiseInconsistent,
}

/// "If `premise` were added, would `c` lead to `d`?"
pub fn nested_conditional(
    kb: &CompiledKb,
    premise: Rule,
    c: &Formula,
    d: &Formula,
    vocab: &Vocabulary,
    counter: &mut SatCounter,
) -> Result<NestedOutcome, NestedError> {
    if !is_satisfiable(c, counter) {
        return Err(NestedError::Rank(RankError::UnsatisfiableContext));
    }
    let revised = match add_rule(kb, premise, vocab, counter)? {
        RevisionOutcome::Inconsistent => return Ok(NestedOutcome::PremiseInconsistent),
        RevisionOutcome::Accepted(kb) => kb,
    };
    let (holds, strength) = accepts_conditional(&revised, c, d, counter)?;
    Ok(if holds { NestedOutcome::Holds(strength) } else { NestedOutcome::Fails(strength) })
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum NestedError {
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Rules grouped by priority, least entrenched first.
pub fn entrenchment(kb: &CompiledKb) -> Vec<(u64, Vec<Rule>)> {
    let mut groups: Vec<(u64, Vec<Rule>)> = Vec::new();
    for e in kb.entries() {
        match groups.last_mut() {
            Some((z, rules)) if *z == e.z_plus => rules.push(e.rule.clone()),
            _ => groups.push((e.z_plus, vec![e.rule.clone()])),
        }
    }
    groups
}

/// The candidates believed in `state`, with their strengths.
pub fn belief_set(
    state: &BeliefState,
    candidates: &[Formula],
    counter: &mut SatCounter,
) -> Vec<(Formula, Strength)> {
    candidates
        .iter()
        .filter_map(|psi| {
            let r = state.believes(psi, counter);
            (r.verdict == Verdict::Believed).then(|| (psi.clone(), r.strength))
        })
        .collect()
}
