//! Rule bases: toleration, consistency and compilation of rule priorities.

use std::fmt;

use thiserror::Error;

use crate::formula::{parse, to_clauses, ClauseSet, Formula, ParseError, Vocabulary, World};
use crate::rank::{kappa_over, Rank};
use crate::sat::{is_satisfiable, solve_clause_sets, SatCounter};

/// Largest accepted rule strength.
pub const MAX_DELTA: u64 = (1 << 31) - 2;

/// A default rule `antecedent -> consequent` with strength `delta`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub antecedent: Formula,
    pub consequent: Formula,
    pub delta: u64,
    /// Position in the source rule list; breaks ties between equal priorities.
    pub index: usize,
}

impl Rule {
    pub fn new(
        antecedent: Formula,
        consequent: Formula,
        delta: u64,
        index: usize,
    ) -> Result<Self, KbError> {
        if delta > MAX_DELTA {
            return Err(KbError::DeltaOutOfRange(delta));
        }
        Ok(Rule { antecedent, consequent, delta, index })
    }

    /// Parses `<wff> -> <wff> [: <delta>]`; the strength defaults to 0.
    pub fn parse(line: &str, vocab: &mut Vocabulary, index: usize) -> Result<Self, KbError> {
        let line = line.split('#').next().unwrap_or("");
        let (lhs, rest) = line
            .split_once("->")
            .ok_or_else(|| KbError::Syntax(format!("missing '->' in rule {:?}", line.trim())))?;
        let (rhs, delta) = match rest.rsplit_once(':') {
            Some((rhs, d)) => {
                let d = d.trim();
                let delta = d
                    .parse::<u64>()
                    .map_err(|_| KbError::Syntax(format!("invalid strength {d:?}")))?;
                (rhs, delta)
            }
            None => (rest, 0),
        };
        if delta > MAX_DELTA {
            return Err(KbError::DeltaOutOfRange(delta));
        }
        let mut scratch = vocab.clone();
        let antecedent = parse(lhs, &mut scratch)?;
        let consequent = parse(rhs, &mut scratch)?;
        *vocab = scratch;
        Rule::new(antecedent, consequent, delta, index)
    }

    /// `antecedent => consequent`
    pub fn material(&self) -> Formula {
        Formula::implies(self.antecedent.clone(), self.consequent.clone())
    }

    /// `antecedent & consequent`
    pub fn verification(&self) -> Formula {
        Formula::and(self.antecedent.clone(), self.consequent.clone())
    }

    /// `antecedent & !consequent`
    pub fn violation(&self) -> Formula {
        Formula::and(self.antecedent.clone(), Formula::not(self.consequent.clone()))
    }

    pub fn is_violated_by(&self, world: &World) -> bool {
        let val = |a: crate::formula::AtomId| a.index() < world.len() && world.get(a);
        self.antecedent.eval_with(val) && !self.consequent.eval_with(val)
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, vocab }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    vocab: &'a Vocabulary,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -> {} : {}",
            self.rule.antecedent.display(self.vocab),
            self.rule.consequent.display(self.vocab),
            self.rule.delta
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KbError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {source}")]
    Line { line: usize, source: Box<KbError> },
    #[error("strength {0} exceeds the maximum of {MAX_DELTA}")]
    DeltaOutOfRange(u64),
    #[error("inconsistent rule base: no rule among #{} is tolerated by the others", format_indices(.subset))]
    Inconsistent { subset: Vec<usize> },
    #[error("priority arithmetic overflowed")]
    Overflow,
    #[error("world covers {world} atoms but the knowledge base uses {needed}")]
    VocabularyMismatch { world: usize, needed: usize },
    #[error("stored priorities are not admissible for rule #{0}")]
    NotAdmissible(usize),
}

fn format_indices(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", #")
}

/// Parses a rule file: one rule per line, `#` comments, blank lines ignored.
pub fn parse_rules(text: &str, vocab: &mut Vocabulary) -> Result<Vec<Rule>, KbError> {
    let mut rules = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let rule = Rule::parse(body, vocab, rules.len())
            .map_err(|e| KbError::Line { line: n + 1, source: Box::new(e) })?;
        rules.push(rule);
    }
    Ok(rules)
}

/// True iff `rule` is tolerated by `context`: its antecedent and consequent
/// are jointly satisfiable with every material counterpart in `context`.
pub fn tolerated(rule: &Rule, context: &[Rule], counter: &mut SatCounter) -> bool {
    let f = Formula::and(
        rule.verification(),
        crate::formula::materialization(context),
    );
    is_satisfiable(&f, counter)
}

/// Precomputed clausal forms of one rule.
#[derive(Clone, Debug)]
struct Prepared {
    material: ClauseSet,
    verification: ClauseSet,
}

impl Prepared {
    fn new(rule: &Rule) -> Self {
        Prepared {
            material: to_clauses(&rule.material()),
            verification: to_clauses(&rule.verification()),
        }
    }
}

fn tolerated_within(
    prepared: &[Prepared],
    candidate: usize,
    context: &[usize],
    counter: &mut SatCounter,
) -> bool {
    let mut parts: Vec<&ClauseSet> = Vec::with_capacity(context.len() + 1);
    parts.push(&prepared[candidate].verification);
    parts.extend(context.iter().map(|&i| &prepared[i].material));
    solve_clause_sets(&parts, counter)
}

/// Strips tolerated rules in batches. Returns the first batch (the rules
/// tolerated by the whole set), or the stuck remainder when some nonempty
/// subset tolerates none of its members.
fn consistency_layers(
    prepared: &[Prepared],
    counter: &mut SatCounter,
) -> Result<Vec<usize>, Vec<usize>> {
    let mut remaining: Vec<usize> = (0..prepared.len()).collect();
    let mut first = None;
    while !remaining.is_empty() {
        let (batch, rest): (Vec<usize>, Vec<usize>) = remaining
            .iter()
            .partition(|&&i| tolerated_within(prepared, i, &remaining, counter));
        if batch.is_empty() {
            return Err(rest);
        }
        first.get_or_insert(batch);
        remaining = rest;
    }
    Ok(first.unwrap_or_default())
}

pub fn is_consistent(rules: &[Rule], counter: &mut SatCounter) -> bool {
    let prepared: Vec<Prepared> = rules.iter().map(Prepared::new).collect();
    consistency_layers(&prepared, counter).is_ok()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrioritizedRule {
    pub rule: Rule,
    pub z_plus: u64,
}

/// A consistent rule base with its priorities, sorted nondecreasingly by
/// priority (ties by source index).
#[derive(Clone, Debug)]
pub struct CompiledKb {
    vocab: Vocabulary,
    entries: Vec<PrioritizedRule>,
    materials: Vec<ClauseSet>,
}

impl CompiledKb {
    fn from_sorted(vocab: Vocabulary, mut entries: Vec<PrioritizedRule>) -> Self {
        entries.sort_by_key(|e| (e.z_plus, e.rule.index));
        let materials = entries.iter().map(|e| to_clauses(&e.rule.material())).collect();
        CompiledKb { vocab, entries, materials }
    }

    /// Builds a compiled base from stored priorities without re-running the
    /// compilation. See [`CompiledKb::verify`].
    pub fn from_priorities(vocab: Vocabulary, entries: Vec<PrioritizedRule>) -> Self {
        Self::from_sorted(vocab, entries)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Rules with priorities in nondecreasing priority order.
    pub fn entries(&self) -> &[PrioritizedRule] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rules in source order.
    pub fn rules(&self) -> Vec<Rule> {
        let mut rules: Vec<Rule> = self.entries.iter().map(|e| e.rule.clone()).collect();
        rules.sort_by_key(|r| r.index);
        rules
    }

    pub fn z_plus(&self, index: usize) -> Option<u64> {
        self.entries.iter().find(|e| e.rule.index == index).map(|e| e.z_plus)
    }

    pub(crate) fn sorted_materials(&self) -> Vec<(&ClauseSet, u64)> {
        self.materials.iter().zip(self.entries.iter().map(|e| e.z_plus)).collect()
    }

    /// Rank of a single world: 0 when it violates no rule, otherwise one
    /// more than the highest priority among the rules it violates.
    pub fn kappa_world(&self, world: &World) -> Result<u64, KbError> {
        let needed = self
            .entries
            .iter()
            .flat_map(|e| e.rule.antecedent.atoms().into_iter().chain(e.rule.consequent.atoms()))
            .map(|a| a.index() + 1)
            .max()
            .unwrap_or(0);
        if world.len() < needed {
            return Err(KbError::VocabularyMismatch { world: world.len(), needed });
        }
        Ok(self
            .entries
            .iter()
            .filter(|e| e.rule.is_violated_by(world))
            .map(|e| e.z_plus + 1)
            .max()
            .unwrap_or(0))
    }

    /// Checks admissibility of the stored priorities: every rule must be
    /// entailed in its own context with strength above its delta.
    pub fn verify(&self, counter: &mut SatCounter) -> Result<(), KbError> {
        for e in &self.entries {
            let pro = crate::rank::kappa(self, &e.rule.verification(), counter);
            let con = crate::rank::kappa(self, &e.rule.violation(), counter);
            let admissible = match (pro, con) {
                (Rank::Infinite, _) => false,
                (Rank::Finite(_), Rank::Infinite) => true,
                (Rank::Finite(p), Rank::Finite(c)) => {
                    p.checked_add(e.rule.delta).is_some_and(|s| s < c)
                }
            };
            if !admissible {
                return Err(KbError::NotAdmissible(e.rule.index));
            }
        }
        Ok(())
    }

    /// Serialized form: a `zplus-compiled 1` header, then one
    /// `<z_plus> <delta> <antecedent> -> <consequent>` line per rule.
    pub fn to_text(&self) -> String {
        let mut out = String::from("zplus-compiled 1\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} -> {}\n",
                e.z_plus,
                e.rule.delta,
                e.rule.antecedent.display(&self.vocab),
                e.rule.consequent.display(&self.vocab)
            ));
        }
        out
    }

    /// Inverse of [`CompiledKb::to_text`]. Atoms are interned in `vocab`,
    /// and the result shares that vocabulary.
    pub fn from_text(text: &str, vocab: &mut Vocabulary) -> Result<Self, KbError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "zplus-compiled 1")) => {}
            _ => return Err(KbError::Syntax("missing 'zplus-compiled 1' header".into())),
        }
        let mut entries = Vec::new();
        for (n, line) in lines {
            let wrap = |e: KbError| KbError::Line { line: n, source: Box::new(e) };
            let mut fields = line.splitn(3, char::is_whitespace);
            let mut number = |what: &str| -> Result<u64, KbError> {
                let s = fields.next().unwrap_or("");
                s.parse()
                    .map_err(|_| wrap(KbError::Syntax(format!("invalid {what} {s:?}"))))
            };
            let z_plus = number("priority")?;
            let delta = number("strength")?;
            let body = fields.next().unwrap_or("");
            let mut rule = Rule::parse(body, vocab, entries.len()).map_err(wrap)?;
            if rule.delta != 0 {
                return Err(wrap(KbError::Syntax("unexpected ':' in stored rule".into())));
            }
            if delta > MAX_DELTA {
                return Err(wrap(KbError::DeltaOutOfRange(delta)));
            }
            rule.delta = delta;
            entries.push(PrioritizedRule { rule, z_plus });
        }
        Ok(Self::from_sorted(vocab.clone(), entries))
    }
}

/// Computes the priority of every rule and returns the compiled base.
///
/// Rules tolerated by the whole set get their own delta. Afterwards, each
/// round considers the uncommitted rules tolerated by the uncommitted
/// remainder, evaluates each one's least rank of a model of its antecedent
/// and consequent that respects the remainder (ranked against the committed
/// rules only) plus its delta, and commits a single rule with the lowest
/// value. Uncommitted values are recomputed every round.
pub fn compile(
    rules: &[Rule],
    vocab: &Vocabulary,
    counter: &mut SatCounter,
) -> Result<CompiledKb, KbError> {
    let prepared: Vec<Prepared> = rules.iter().map(Prepared::new).collect();
    let base = consistency_layers(&prepared, counter).map_err(|stuck| KbError::Inconsistent {
        subset: stuck.iter().map(|&i| rules[i].index).collect(),
    })?;

    // (z, source index, position in `rules`), kept sorted
    let mut committed: Vec<(u64, usize, usize)> = base
        .iter()
        .map(|&i| (rules[i].delta, rules[i].index, i))
        .collect();
    committed.sort_unstable();
    let mut uncommitted: Vec<usize> = (0..rules.len()).filter(|i| !base.contains(i)).collect();

    while !uncommitted.is_empty() {
        let ranked: Vec<(&ClauseSet, u64)> =
            committed.iter().map(|&(z, _, i)| (&prepared[i].material, z)).collect();
        let mut best: Option<(u64, usize, usize)> = None;
        for (pos, &i) in uncommitted.iter().enumerate() {
            if !tolerated_within(&prepared, i, &uncommitted, counter) {
                continue;
            }
            let mut query: Vec<&ClauseSet> = Vec::with_capacity(uncommitted.len() + 1);
            query.push(&prepared[i].verification);
            query.extend(uncommitted.iter().map(|&j| &prepared[j].material));
            let kappa = match kappa_over(&query, &ranked, true, counter) {
                Rank::Finite(k) => k,
                Rank::Infinite => unreachable!("tolerated formula is satisfiable"),
            };
            let z = kappa.checked_add(rules[i].delta).ok_or(KbError::Overflow)?;
            let key = (z, rules[i].index, pos);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
        let Some((z, index, pos)) = best else {
            // unreachable after the consistency pass, kept as an error path
            return Err(KbError::Inconsistent {
                subset: uncommitted.iter().map(|&i| rules[i].index).collect(),
            });
        };
        let i = uncommitted.remove(pos);
        let at = committed.partition_point(|&(cz, ci, _)| (cz, ci) < (z, index));
        committed.insert(at, (z, index, i));
    }

    let entries = committed
        .into_iter()
        .map(|(z_plus, _, i)| PrioritizedRule { rule: rules[i].clone(), z_plus })
        .collect();
    Ok(CompiledKb::from_sorted(vocab.clone(), entries))
}
