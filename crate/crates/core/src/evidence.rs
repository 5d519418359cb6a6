//! Belief states revised by soft evidence.
//!
//! A [`BeliefState`] is a compiled rule base plus a chain of evidence
//! reports. Nothing is recomputed when a report arrives: ranks are evaluated
//! on demand by unwinding the chain, each step splitting the query over the
//! cells of its report (`phi` and `!phi`, or the cells of a partition) and
//! shifting each cell by an offset fixed when the report was recorded. A
//! chain of `k` two-cell reports touches at most `2^k` base formulas.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{Formula, Vocabulary};
use crate::kb::CompiledKb;
use crate::rank::{kappa, QueryResult, Rank};
use crate::sat::{is_satisfiable, SatCounter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// "All things considered": the report fixes the posterior disbelief in
    /// the negation of the formula at the given level.
    J,
    /// "Nothing else considered": the report shifts the disbelief gap
    /// between the formula and its negation by the given level.
    L,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::J => "J",
            Mode::L => "L",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EvidenceItem {
    pub mode: Mode,
    pub formula: Formula,
    pub level: Rank,
}

impl EvidenceItem {
    pub fn j(formula: Formula, level: Rank) -> Self {
        EvidenceItem { mode: Mode::J, formula, level }
    }

    pub fn l(formula: Formula, level: Rank) -> Self {
        EvidenceItem { mode: Mode::L, formula, level }
    }
}

/// One recorded report.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Evidence {
    Item(EvidenceItem),
    /// Simultaneous J-report over mutually exclusive, jointly exhaustive cells.
    Partition(Vec<(Formula, Rank)>),
}

impl Evidence {
    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> EvidenceDisplay<'a> {
        EvidenceDisplay { evidence: self, vocab }
    }
}

pub struct EvidenceDisplay<'a> {
    evidence: &'a Evidence,
    vocab: &'a Vocabulary,
}

impl fmt::Display for EvidenceDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.evidence {
            Evidence::Item(it) => {
                write!(f, "{} {} {}", it.mode, it.formula.display(self.vocab), it.level)
            }
            Evidence::Partition(cells) => {
                f.write_str("partition")?;
                for (i, (c, level)) in cells.iter().enumerate() {
                    let sep = if i == 0 { " " } else { "; " };
                    write!(f, "{sep}{}:{level}", c.display(self.vocab))?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("evidence formula is unsatisfiable")]
    Contradictory,
    #[error("evidence formula is valid, so a finite level carries no information")]
    Tautological,
    #[error("evidence formula has infinite rank in the current state")]
    Impossible,
    #[error("partition has no cells")]
    EmptyPartition,
    #[error("partition cell {0} is unsatisfiable")]
    EmptyCell(usize),
    #[error("partition cells {0} and {1} overlap")]
    Overlapping(usize, usize),
    #[error("partition cells do not cover every world")]
    NotExhaustive,
    #[error("no zero-level partition cell is possible in the current state")]
    NoZeroLevelCell,
}

/// A cell of a recorded report: the state before the report ranked
/// `formula` at `prior`; after it, the cell's worlds are re-based to 0 and
/// raised by `shift`.
#[derive(Clone, Debug)]
struct Cell {
    formula: Formula,
    prior: Rank,
    shift: Rank,
}

#[derive(Clone, Debug)]
struct Step {
    evidence: Evidence,
    cells: Vec<Cell>,
}

#[derive(Clone, Debug)]
pub struct BeliefState {
    kb: Arc<CompiledKb>,
    steps: Vec<Step>,
}

impl BeliefState {
    pub fn new(kb: Arc<CompiledKb>) -> Self {
        BeliefState { kb, steps: Vec::new() }
    }

    pub fn kb(&self) -> &Arc<CompiledKb> {
        &self.kb
    }

    pub fn chain(&self) -> impl Iterator<Item = &Evidence> {
        self.steps.iter().map(|s| &s.evidence)
    }

    pub fn chain_len(&self) -> usize {
        self.steps.len()
    }

    /// The same rule base with every report dropped.
    pub fn retract(&self) -> BeliefState {
        BeliefState::new(self.kb.clone())
    }

    /// Records a J- or L-report and returns the revised state.
    pub fn observe(
        &self,
        item: EvidenceItem,
        counter: &mut SatCounter,
    ) -> Result<BeliefState, EvidenceError> {
        let phi = &item.formula;
        let not_phi = Formula::not(phi.clone());
        if !is_satisfiable(phi, counter) {
            return Err(EvidenceError::Contradictory);
        }
        if item.level.is_finite() && !is_satisfiable(&not_phi, counter) {
            return Err(EvidenceError::Tautological);
        }
        let pro = self.state_kappa(phi, counter);
        let Rank::Finite(a) = pro else {
            return Err(EvidenceError::Impossible);
        };
        let con = self.state_kappa(&not_phi, counter);
        let (shift_pro, shift_con) = match item.mode {
            Mode::J => (Rank::ZERO, item.level),
            Mode::L => match (con, item.level) {
                (Rank::Infinite, _) | (_, Rank::Infinite) => (Rank::ZERO, Rank::Infinite),
                (Rank::Finite(b), Rank::Finite(level)) => {
                    let (a, b, level) = (a as i128, b as i128, level as i128);
                    (
                        Rank::Finite((a - b - level).max(0) as u64),
                        Rank::Finite((b - a + level).max(0) as u64),
                    )
                }
            },
        };
        let cells = vec![
            Cell { formula: phi.clone(), prior: pro, shift: shift_pro },
            Cell { formula: not_phi, prior: con, shift: shift_con },
        ];
        Ok(self.extended(Step { evidence: Evidence::Item(item), cells }))
    }

    /// Records a simultaneous J-report over a partition: every world ends up
    /// at its rank conditional on its cell plus that cell's level.
    pub fn observe_partition(
        &self,
        cells: Vec<(Formula, Rank)>,
        counter: &mut SatCounter,
    ) -> Result<BeliefState, EvidenceError> {
        if cells.is_empty() {
            return Err(EvidenceError::EmptyPartition);
        }
        for (i, (c, _)) in cells.iter().enumerate() {
            if !is_satisfiable(c, counter) {
                return Err(EvidenceError::EmptyCell(i));
            }
        }
        for i in 0..cells.len() {
            for j in i + 1..cells.len() {
                let both = Formula::and(cells[i].0.clone(), cells[j].0.clone());
                if is_satisfiable(&both, counter) {
                    return Err(EvidenceError::Overlapping(i, j));
                }
            }
        }
        let uncovered = Formula::not(Formula::disjunction(cells.iter().map(|(c, _)| c.clone())));
        if is_satisfiable(&uncovered, counter) {
            return Err(EvidenceError::NotExhaustive);
        }
        let mut recorded = Vec::with_capacity(cells.len());
        for (c, level) in &cells {
            let prior = self.state_kappa(c, counter);
            recorded.push(Cell { formula: c.clone(), prior, shift: *level });
        }
        if !recorded.iter().any(|c| c.shift == Rank::ZERO && c.prior.is_finite()) {
            return Err(EvidenceError::NoZeroLevelCell);
        }
        Ok(self.extended(Step { evidence: Evidence::Partition(cells), cells: recorded }))
    }

    fn extended(&self, step: Step) -> BeliefState {
        let mut steps = self.steps.clone();
        steps.push(step);
        BeliefState { kb: self.kb.clone(), steps }
    }

    /// Rank of `psi` in this state.
    pub fn state_kappa(&self, psi: &Formula, counter: &mut SatCounter) -> Rank {
        let mut memo = HashMap::new();
        self.kappa_at(self.steps.len(), psi, &mut memo, counter)
    }

    fn kappa_at(
        &self,
        depth: usize,
        psi: &Formula,
        memo: &mut HashMap<(usize, Formula), Rank>,
        counter: &mut SatCounter,
    ) -> Rank {
        if depth == 0 {
            return kappa(&self.kb, psi, counter);
        }
        if let Some(&r) = memo.get(&(depth, psi.clone())) {
            return r;
        }
        let mut best = Rank::Infinite;
        for cell in &self.steps[depth - 1].cells {
            let (Rank::Finite(prior), true) = (cell.prior, cell.shift.is_finite()) else {
                continue;
            };
            let joint = Formula::and(psi.clone(), cell.formula.clone());
            let r = self.kappa_at(depth - 1, &joint, memo, counter);
            best = best.min(r.minus(prior).plus(cell.shift));
        }
        memo.insert((depth, psi.clone()), best);
        best
    }

    /// Strength of belief in `psi`: rank of `!psi` minus rank of `psi`.
    pub fn believes(&self, psi: &Formula, counter: &mut SatCounter) -> QueryResult {
        let pro = self.state_kappa(psi, counter);
        let con = self.state_kappa(&Formula::not(psi.clone()), counter);
        QueryResult::from_ranks(pro, con).expect("normalized state ranks psi or !psi finitely")
    }
}
