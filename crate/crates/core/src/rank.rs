//! Ranks of formulas under a compiled rule base, and graded queries.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::formula::{to_clauses, ClauseSet, Formula};
use crate::kb::CompiledKb;
use crate::sat::{solve_clause_sets, SatCounter};

/// Degree of disbelief: a non-negative integer or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    Finite(u64),
    Infinite,
}

impl Rank {
    pub const ZERO: Rank = Rank::Finite(0);

    pub fn is_finite(self) -> bool {
        matches!(self, Rank::Finite(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Rank::Finite(n) => Some(n),
            Rank::Infinite => None,
        }
    }

    /// `self + other`, with infinity absorbing. Panics on overflow.
    pub fn plus(self, other: Rank) -> Rank {
        match (self, other) {
            (Rank::Finite(a), Rank::Finite(b)) => {
                Rank::Finite(a.checked_add(b).expect("rank overflow"))
            }
            _ => Rank::Infinite,
        }
    }

    /// `self - base` for a finite `base <= self`; infinity stays infinity.
    pub fn minus(self, base: u64) -> Rank {
        match self {
            Rank::Finite(a) => {
                Rank::Finite(a.checked_sub(base).expect("conditional rank below zero"))
            }
            Rank::Infinite => Rank::Infinite,
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(n) => write!(f, "{n}"),
            Rank::Infinite => f.write_str("inf"),
        }
    }
}

/// Signed difference of two ranks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strength {
    NegInfinite,
    Finite(i64),
    PosInfinite,
}

impl Strength {
    /// `con - pro`; `None` when both are infinite.
    pub fn difference(con: Rank, pro: Rank) -> Option<Strength> {
        match (con, pro) {
            (Rank::Infinite, Rank::Infinite) => None,
            (Rank::Infinite, _) => Some(Strength::PosInfinite),
            (_, Rank::Infinite) => Some(Strength::NegInfinite),
            (Rank::Finite(c), Rank::Finite(p)) => Some(Strength::Finite(c as i64 - p as i64)),
        }
    }

    fn key(self) -> (i8, i64) {
        match self {
            Strength::NegInfinite => (-1, 0),
            Strength::Finite(n) => (0, n),
            Strength::PosInfinite => (1, 0),
        }
    }
}

impl PartialOrd for Strength {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Strength {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for Strength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strength::NegInfinite => f.write_str("-inf"),
            Strength::Finite(n) => write!(f, "{n}"),
            Strength::PosInfinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Believed,
    Denied,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Believed => "believed",
            Verdict::Denied => "denied",
            Verdict::Undecided => "undecided",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QueryResult {
    /// `kappa_con - kappa_pro`; the target follows with strength `d` for every `d < strength`.
    pub strength: Strength,
    pub verdict: Verdict,
    /// Rank of context and target.
    pub kappa_pro: Rank,
    /// Rank of context and negated target.
    pub kappa_con: Rank,
}

impl QueryResult {
    /// `None` when both ranks are infinite.
    pub fn from_ranks(kappa_pro: Rank, kappa_con: Rank) -> Option<Self> {
        let strength = Strength::difference(kappa_con, kappa_pro)?;
        let verdict = match strength {
            Strength::Finite(0) => Verdict::Undecided,
            Strength::Finite(n) if n < 0 => Verdict::Denied,
            Strength::NegInfinite => Verdict::Denied,
            _ => Verdict::Believed,
        };
        Some(QueryResult { strength, verdict, kappa_pro, kappa_con })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RankError {
    #[error("context is unsatisfiable")]
    UnsatisfiableContext,
}

/// Least rank of a model of the conjunction `query`, against rules sorted
/// nondecreasingly by priority.
///
/// With rules `r_1..r_n`, the answer is 0 if some model respects all of them;
/// otherwise it is `z(r_{c-1}) + 1` for the least cut `c` such that some
/// model respects `r_c..r_n`, found by binary search over positions. At most
/// `ceil(log2 n) + 2` satisfiability calls; one fewer when `known_sat`.
pub(crate) fn kappa_over(
    query: &[&ClauseSet],
    ranked: &[(&ClauseSet, u64)],
    known_sat: bool,
    counter: &mut SatCounter,
) -> Rank {
    let n = ranked.len();
    let mut parts: Vec<&ClauseSet> = Vec::with_capacity(query.len() + n);
    let mut respects_from = |cut: usize, counter: &mut SatCounter| {
        // cut is 1-based: rules r_cut..r_n
        parts.clear();
        parts.extend_from_slice(query);
        parts.extend(ranked[cut - 1..].iter().map(|(m, _)| *m));
        solve_clause_sets(&parts, counter)
    };
    if !known_sat && !respects_from(n + 1, counter) {
        return Rank::Infinite;
    }
    if n == 0 || respects_from(1, counter) {
        return Rank::ZERO;
    }
    // invariant: cut `lo` unsatisfiable, cut `hi` satisfiable
    let (mut lo, mut hi) = (1, n + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if respects_from(mid, counter) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Rank::Finite(ranked[hi - 2].1 + 1)
}

/// Rank of formula `f`: the least rank of any of its models.
pub fn kappa(kb: &CompiledKb, f: &Formula, counter: &mut SatCounter) -> Rank {
    let cs = to_clauses(f);
    kappa_over(&[&cs], &kb.sorted_materials(), false, counter)
}

/// `kappa(psi & phi) - kappa(phi)`.
pub fn conditional_kappa(
    kb: &CompiledKb,
    psi: &Formula,
    phi: &Formula,
    counter: &mut SatCounter,
) -> Result<Rank, RankError> {
    let base = kappa(kb, phi, counter)
        .finite()
        .ok_or(RankError::UnsatisfiableContext)?;
    let joint = kappa(kb, &Formula::and(psi.clone(), phi.clone()), counter);
    Ok(joint.minus(base))
}

/// How strongly `target` follows from `context`.
pub fn query(
    kb: &CompiledKb,
    context: &Formula,
    target: &Formula,
    counter: &mut SatCounter,
) -> Result<QueryResult, RankError> {
    if !crate::sat::is_satisfiable(context, counter) {
        return Err(RankError::UnsatisfiableContext);
    }
    let pro = kappa(kb, &Formula::and(context.clone(), target.clone()), counter);
    let con = kappa(
        kb,
        &Formula::and(context.clone(), Formula::not(target.clone())),
        counter,
    );
    Ok(QueryResult::from_ranks(pro, con).expect("satisfiable context has a finite side"))
}
