//! Propositional language: atoms, formulas, worlds, parsing and clausal form.
//!
//! Formulas refer to atoms by [`AtomId`], an index into a [`Vocabulary`].
//! Vocabularies only ever grow, so an id handed out once stays valid for
//! every later extension of the same vocabulary.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Index of an atom inside a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomId(pub u32);

impl AtomId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    lookup: HashMap<String, AtomId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, registering it if unseen.
    ///
    /// Panics if `name` is not a valid identifier.
    pub fn intern(&mut self, name: &str) -> AtomId {
        assert!(is_identifier(name), "invalid atom name {name:?}");
        if let Some(&id) = self.lookup.get(name) {
            return id;
        }
        let id = AtomId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<AtomId> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, id: AtomId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = AtomId> + '_ {
        (0..self.names.len() as u32).map(AtomId)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && s != "true" && s != "false"
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(AtomId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(id: AtomId) -> Self {
        Formula::Atom(id)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(l: Formula, r: Formula) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn implies(l: Formula, r: Formula) -> Self {
        Formula::Implies(Box::new(l), Box::new(r))
    }

    /// Left-associated conjunction; `true` when empty.
    pub fn conjunction<I: IntoIterator<Item = Formula>>(parts: I) -> Self {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Left-associated disjunction; `false` when empty.
    pub fn disjunction<I: IntoIterator<Item = Formula>>(parts: I) -> Self {
        parts
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or(Formula::False)
    }

    /// Evaluates under an arbitrary atom valuation.
    pub fn eval_with<F: Fn(AtomId) -> bool + Copy>(&self, val: F) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => val(*a),
            Formula::Not(f) => !f.eval_with(val),
            Formula::And(l, r) => l.eval_with(val) && r.eval_with(val),
            Formula::Or(l, r) => l.eval_with(val) || r.eval_with(val),
            Formula::Implies(l, r) => !l.eval_with(val) || r.eval_with(val),
        }
    }

    /// Truth value of the formula in `world`.
    pub fn eval(&self, world: &World) -> Result<bool, FormulaError> {
        if let Some(missing) = self.atoms().into_iter().find(|a| a.index() >= world.len()) {
            return Err(FormulaError::UnknownAtom(missing));
        }
        Ok(self.eval_with(|a| world.get(a)))
    }

    /// Distinct atoms, in increasing id order.
    pub fn atoms(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<AtomId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(*a),
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(f) => 1 + f.node_count(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                1 + l.node_count() + r.node_count()
            }
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> FormulaDisplay<'a> {
        FormulaDisplay { formula: self, vocab }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            _ => 4,
        }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    vocab: &'a Vocabulary,
}

impl FormulaDisplay<'_> {
    fn child(&self, f: &Formula, out: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        let inner = FormulaDisplay { formula: f, vocab: self.vocab };
        if parens {
            write!(out, "({inner})")
        } else {
            write!(out, "{inner}")
        }
    }
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let f = self.formula;
        let p = f.precedence();
        match f {
            Formula::True => out.write_str("true"),
            Formula::False => out.write_str("false"),
            Formula::Atom(a) => out.write_str(self.vocab.name(*a)),
            Formula::Not(c) => {
                out.write_str("!")?;
                self.child(c, out, c.precedence() < 4)
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                let op = if matches!(f, Formula::And(..)) { " & " } else { " | " };
                self.child(l, out, l.precedence() < p)?;
                out.write_str(op)?;
                self.child(r, out, r.precedence() <= p)
            }
            Formula::Implies(l, r) => {
                self.child(l, out, l.precedence() <= p)?;
                out.write_str(" => ")?;
                self.child(r, out, r.precedence() < p)
            }
        }
    }
}

/// Total truth assignment over the first `len()` atoms of a vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct World {
    values: Vec<bool>,
}

impl World {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    /// All-false world over `n` atoms.
    pub fn falsum(n: usize) -> Self {
        Self { values: vec![false; n] }
    }

    /// Builds a world from `(name, value)` pairs, interning names in `vocab`.
    /// Atoms of `vocab` that are not mentioned default to false.
    pub fn from_pairs(vocab: &mut Vocabulary, pairs: &[(&str, bool)]) -> Self {
        let ids: Vec<_> = pairs.iter().map(|(n, v)| (vocab.intern(n), *v)).collect();
        let mut w = World::falsum(vocab.len());
        for (id, v) in ids {
            w.set(id, v);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, atom: AtomId) -> bool {
        self.values[atom.index()]
    }

    pub fn set(&mut self, atom: AtomId, value: bool) {
        if atom.index() >= self.values.len() {
            self.values.resize(atom.index() + 1, false);
        }
        self.values[atom.index()] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("atom #{} is not covered by the world", .0 .0)]
    UnknownAtom(AtomId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at column {}: {message}", .position + 1)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        Self { position, message: message.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Token {
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    True,
    False,
    Ident(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let tok = match c {
            b'#' => break,
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            b'!' => Token::Not,
            b'&' => Token::And,
            b'|' => Token::Or,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'=' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((i, Token::Implies));
                i += 2;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word.to_string()),
                };
                out.push((start, tok));
                continue;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(i, format!("unexpected character {ch:?}")));
            }
        };
        out.push((i, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    vocab: &'a mut Vocabulary,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn wff(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disj()?;
        if self.eat(&Token::Implies) {
            let rhs = self.wff()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conj()?;
        while self.eat(&Token::Or) {
            lhs = Formula::or(lhs, self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unit()?;
        while self.eat(&Token::And) {
            lhs = Formula::and(lhs, self.unit()?);
        }
        Ok(lhs)
    }

    fn unit(&mut self) -> Result<Formula, ParseError> {
        let at = self.offset();
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(ParseError::new(at, "unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Token::Not => Ok(Formula::not(self.unit()?)),
            Token::LParen => {
                let inner = self.wff()?;
                if !self.eat(&Token::RParen) {
                    return Err(ParseError::new(self.offset(), "expected ')'"));
                }
                Ok(inner)
            }
            Token::True => Ok(Formula::True),
            Token::False => Ok(Formula::False),
            Token::Ident(name) => Ok(Formula::Atom(self.vocab.intern(&name))),
            other => Err(ParseError::new(at, format!("unexpected token {other:?}"))),
        }
    }
}

/// Parses a well-formed formula, registering unseen atoms in `vocab`.
///
/// Grammar, loosest binding first: `=>` (right-associative), `|`, `&`,
/// then prefix `!`, parentheses, `true`, `false` and identifiers.
/// Text after `#` is ignored.
pub fn parse(text: &str, vocab: &mut Vocabulary) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(ParseError::new(0, "empty formula"));
    }
    // Parse into a scratch copy so a failed parse leaves `vocab` untouched.
    let mut scratch = vocab.clone();
    let mut parser = Parser { tokens, pos: 0, end: text.len(), vocab: &mut scratch };
    let f = parser.wff()?;
    if parser.pos < parser.tokens.len() {
        let (at, tok) = &parser.tokens[parser.pos];
        return Err(ParseError::new(*at, format!("unexpected token {tok:?}")));
    }
    *vocab = scratch;
    Ok(f)
}

/// Conjunction of the material counterparts `antecedent => consequent`.
pub fn materialization<'a, I>(rules: I) -> Formula
where
    I: IntoIterator<Item = &'a crate::kb::Rule>,
{
    Formula::conjunction(rules.into_iter().map(|r| r.material()))
}

/// Propositional variable inside a clause set: a vocabulary atom or an
/// auxiliary variable local to that clause set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Atom(AtomId),
    Aux(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: Var,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: Var) -> Self {
        Lit { var, positive: true }
    }

    pub fn neg(var: Var) -> Self {
        Lit { var, positive: false }
    }
}

pub type Clause = Vec<Lit>;

/// Clausal form of a formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseSet {
    pub clauses: Vec<Clause>,
    /// Number of auxiliary variables introduced (`Var::Aux(0..aux_vars)`).
    pub aux_vars: u32,
    /// Produced by direct distribution, without auxiliary variables.
    pub direct: bool,
    /// Direct conversion and every clause has at most one positive literal.
    pub horn: bool,
}

/// Growth factor of direct distribution over the formula's node count
/// before falling back to the definitional transformation.
pub const DEFAULT_BLOWUP_FACTOR: usize = 4;

pub fn to_clauses(f: &Formula) -> ClauseSet {
    to_clauses_with_factor(f, DEFAULT_BLOWUP_FACTOR)
}

pub fn to_clauses_with_factor(f: &Formula, factor: usize) -> ClauseSet {
    let nnf = Nnf::from_formula(f, true);
    let budget = factor.saturating_mul(f.node_count()).max(4);
    if let Some(clauses) = nnf.distribute(budget) {
        let horn = clauses
            .iter()
            .all(|c| c.iter().filter(|l| l.positive).count() <= 1);
        return ClauseSet { clauses, aux_vars: 0, direct: true, horn };
    }
    let mut defs = Definitional { clauses: Vec::new(), next_aux: 0 };
    let root = defs.encode(&nnf);
    defs.clauses.push(vec![root]);
    ClauseSet { clauses: defs.clauses, aux_vars: defs.next_aux, direct: false, horn: false }
}

/// Negation normal form with constants folded away (except at the root).
#[derive(Clone, Debug)]
enum Nnf {
    True,
    False,
    Lit(Lit),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

impl Nnf {
    fn from_formula(f: &Formula, polarity: bool) -> Nnf {
        match (f, polarity) {
            (Formula::True, true) | (Formula::False, false) => Nnf::True,
            (Formula::True, false) | (Formula::False, true) => Nnf::False,
            (Formula::Atom(a), p) => Nnf::Lit(Lit { var: Var::Atom(*a), positive: p }),
            (Formula::Not(c), p) => Nnf::from_formula(c, !p),
            (Formula::And(l, r), true) | (Formula::Or(l, r), false) => Nnf::join(
                true,
                Nnf::from_formula(l, polarity),
                Nnf::from_formula(r, polarity),
            ),
            (Formula::Or(l, r), true) | (Formula::And(l, r), false) => Nnf::join(
                false,
                Nnf::from_formula(l, polarity),
                Nnf::from_formula(r, polarity),
            ),
            (Formula::Implies(l, r), true) => Nnf::join(
                false,
                Nnf::from_formula(l, false),
                Nnf::from_formula(r, true),
            ),
            (Formula::Implies(l, r), false) => Nnf::join(
                true,
                Nnf::from_formula(l, true),
                Nnf::from_formula(r, false),
            ),
        }
    }

    /// Flattening constructor for a binary conjunction (`conj`) or disjunction.
    fn join(conj: bool, a: Nnf, b: Nnf) -> Nnf {
        let mut parts = Vec::new();
        for x in [a, b] {
            match x {
                Nnf::True if !conj => return Nnf::True,
                Nnf::False if conj => return Nnf::False,
                Nnf::True | Nnf::False => {}
                Nnf::And(v) if conj => parts.extend(v),
                Nnf::Or(v) if !conj => parts.extend(v),
                other => parts.push(other),
            }
        }
        match parts.len() {
            0 if conj => Nnf::True,
            0 => Nnf::False,
            1 => parts.pop().unwrap(),
            _ if conj => Nnf::And(parts),
            _ => Nnf::Or(parts),
        }
    }

    /// CNF by distribution, or `None` once the literal count exceeds `budget`.
    fn distribute(&self, budget: usize) -> Option<Vec<Clause>> {
        let clauses = self.cnf(budget)?;
        Some(clauses)
    }

    fn cnf(&self, budget: usize) -> Option<Vec<Clause>> {
        match self {
            Nnf::True => Some(Vec::new()),
            Nnf::False => Some(vec![Vec::new()]),
            Nnf::Lit(l) => Some(vec![vec![*l]]),
            Nnf::And(parts) => {
                let mut out = Vec::new();
                let mut size = 0;
                for p in parts {
                    for c in p.cnf(budget)? {
                        size += c.len();
                        if size > budget {
                            return None;
                        }
                        out.push(c);
                    }
                }
                Some(out)
            }
            Nnf::Or(parts) => {
                let mut acc: Vec<Clause> = vec![Vec::new()];
                for p in parts {
                    let rhs = p.cnf(budget)?;
                    let mut next = Vec::with_capacity(acc.len() * rhs.len());
                    let mut size = 0;
                    for a in &acc {
                        for b in &rhs {
                            let Some(c) = merge_clause(a, b) else { continue };
                            size += c.len();
                            if size > budget {
                                return None;
                            }
                            next.push(c);
                        }
                    }
                    acc = next;
                }
                Some(acc)
            }
        }
    }
}

/// Union of two clauses; `None` when the result is a tautology.
fn merge_clause(a: &[Lit], b: &[Lit]) -> Option<Clause> {
    let mut out: Clause = a.to_vec();
    for l in b {
        if out.contains(&Lit { var: l.var, positive: !l.positive }) {
            return None;
        }
        if !out.contains(l) {
            out.push(*l);
        }
    }
    Some(out)
}

struct Definitional {
    clauses: Vec<Clause>,
    next_aux: u32,
}

impl Definitional {
    /// Returns a literal implying `node` under the emitted clauses
    /// (one-sided definitions suffice since the input is in NNF).
    fn encode(&mut self, node: &Nnf) -> Lit {
        match node {
            Nnf::Lit(l) => *l,
            Nnf::True => {
                let x = self.fresh();
                self.clauses.push(vec![Lit::pos(x)]);
                Lit::pos(x)
            }
            Nnf::False => {
                let x = self.fresh();
                self.clauses.push(vec![Lit::neg(x)]);
                Lit::pos(x)
            }
            Nnf::And(parts) => {
                let x = self.fresh();
                for p in parts {
                    let l = self.encode(p);
                    self.clauses.push(vec![Lit::neg(x), l]);
                }
                Lit::pos(x)
            }
            Nnf::Or(parts) => {
                let x = self.fresh();
                let mut clause = vec![Lit::neg(x)];
                for p in parts {
                    clause.push(self.encode(p));
                }
                self.clauses.push(clause);
                Lit::pos(x)
            }
        }
    }

    fn fresh(&mut self) -> Var {
        let v = Var::Aux(self.next_aux);
        self.next_aux += 1;
        v
    }
}
