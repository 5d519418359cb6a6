//! Brute-force reference over explicit world tables.
//!
//! Everything here enumerates worlds and never touches the SAT backend or the
//! priority compiler, so it can serve as ground truth for them. The ranking
//! of a rule base is computed as the pointwise-least solution of the
//! admissibility constraints by monotone fixpoint iteration; conditioning is
//! applied world by world.

use thiserror::Error;

use crate::evidence::{Evidence, EvidenceItem, Mode};
use crate::formula::{AtomId, Formula, Vocabulary, World};
use crate::kb::Rule;
use crate::rank::Rank;

pub const DEFAULT_MAX_ATOMS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{atoms} atoms exceed the enumeration cap of {cap}")]
    TooManyAtoms { atoms: usize, cap: usize },
    #[error("rule set admits no ranking")]
    Inconsistent,
    #[error("atom #{} is outside the table's vocabulary", .0 .0)]
    UnknownAtom(AtomId),
    #[error("evidence precondition violated: {0}")]
    Precondition(&'static str),
}

/// Ranks of all `2^n` worlds over an ordered atom list. Bit `i` of a world
/// index is the value of `atoms[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldTable {
    atoms: Vec<AtomId>,
    position: Vec<Option<usize>>,
    ranks: Vec<Rank>,
}

impl WorldTable {
    /// The all-zero table.
    pub fn uniform(atoms: &[AtomId], max_atoms: usize) -> Result<Self, OracleError> {
        if atoms.len() > max_atoms {
            return Err(OracleError::TooManyAtoms { atoms: atoms.len(), cap: max_atoms });
        }
        let mut atoms = atoms.to_vec();
        atoms.sort_unstable();
        atoms.dedup();
        let mut position = vec![None; atoms.last().map_or(0, |a| a.index() + 1)];
        for (i, a) in atoms.iter().enumerate() {
            position[a.index()] = Some(i);
        }
        let ranks = vec![Rank::ZERO; 1 << atoms.len()];
        Ok(WorldTable { atoms, position, ranks })
    }

    pub fn atoms(&self) -> &[AtomId] {
        &self.atoms
    }

    pub fn ranks(&self) -> &[Rank] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// World number `index` as a [`World`] over `vocab_len` atoms.
    pub fn world(&self, index: usize, vocab_len: usize) -> World {
        let mut w = World::falsum(vocab_len);
        for (bit, a) in self.atoms.iter().enumerate() {
            w.set(*a, index >> bit & 1 == 1);
        }
        w
    }

    /// Index of the table world agreeing with `world` on the table's atoms.
    pub fn index_of(&self, world: &World) -> usize {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| a.index() < world.len() && world.get(**a))
            .map(|(bit, _)| 1 << bit)
            .sum()
    }

    fn check(&self, f: &Formula) -> Result<(), OracleError> {
        match f
            .atoms()
            .into_iter()
            .find(|a| self.position.get(a.index()).copied().flatten().is_none())
        {
            Some(a) => Err(OracleError::UnknownAtom(a)),
            None => Ok(()),
        }
    }

    fn holds(&self, f: &Formula, world: usize) -> bool {
        f.eval_with(|a| world >> self.position[a.index()].unwrap() & 1 == 1)
    }

    /// Indices of the worlds satisfying `f`.
    pub fn models(&self, f: &Formula) -> Result<Vec<usize>, OracleError> {
        self.check(f)?;
        Ok((0..self.ranks.len()).filter(|&w| self.holds(f, w)).collect())
    }

    fn min_over(&self, worlds: &[usize]) -> Rank {
        worlds.iter().map(|&w| self.ranks[w]).min().unwrap_or(Rank::Infinite)
    }

    /// Renders the table as one line per world, e.g. `p=1 b=1 f=0  2`.
    pub fn render(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for (w, rank) in self.ranks.iter().enumerate() {
            for (bit, a) in self.atoms.iter().enumerate() {
                out.push_str(&format!("{}={} ", vocab.name(*a), w >> bit & 1));
            }
            out.push_str(&format!(" {rank}\n"));
        }
        out
    }
}

/// Atoms mentioned by `rules`, in id order.
pub fn rule_atoms(rules: &[Rule]) -> Vec<AtomId> {
    let mut atoms: Vec<AtomId> = rules
        .iter()
        .flat_map(|r| r.antecedent.atoms().into_iter().chain(r.consequent.atoms()))
        .collect();
    atoms.sort_unstable();
    atoms.dedup();
    atoms
}

/// Least ranking over the worlds on `atoms` that satisfies, for every rule,
/// rank(antecedent & consequent) + delta < rank(antecedent & !consequent).
///
/// Starting from all zeros, each rule repeatedly lifts its violating worlds
/// to one above its delta plus the least rank of its verifying worlds.
/// A consistent set never ranks a world above the sum of `delta + 1` over
/// its rules, so exceeding that sum proves inconsistency.
pub fn oracle_compile(
    rules: &[Rule],
    atoms: &[AtomId],
    max_atoms: usize,
) -> Result<WorldTable, OracleError> {
    let mut table = WorldTable::uniform(atoms, max_atoms)?;
    let mut constraints = Vec::with_capacity(rules.len());
    for r in rules {
        let verifying = table.models(&r.verification())?;
        let violating = table.models(&r.violation())?;
        // no ranking satisfies inf + delta < rank(violation)
        if verifying.is_empty() {
            return Err(OracleError::Inconsistent);
        }
        constraints.push((verifying, violating, r.delta));
    }
    let cap: u64 = rules.iter().map(|r| r.delta + 1).sum();
    let mut ranks: Vec<u64> = vec![0; table.len()];
    loop {
        let mut changed = false;
        for (verifying, violating, delta) in &constraints {
            let least = verifying.iter().map(|&w| ranks[w]).min().unwrap();
            let floor = least + delta + 1;
            for &w in violating {
                if ranks[w] < floor {
                    if floor > cap {
                        return Err(OracleError::Inconsistent);
                    }
                    ranks[w] = floor;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    table.ranks = ranks.into_iter().map(Rank::Finite).collect();
    Ok(table)
}

/// Least rank over the models of `f`; infinite when there are none.
pub fn oracle_kappa(table: &WorldTable, f: &Formula) -> Result<Rank, OracleError> {
    let models = table.models(f)?;
    Ok(table.min_over(&models))
}

/// Applies one J- or L-report to every world.
pub fn oracle_condition(table: &WorldTable, item: &EvidenceItem) -> Result<WorldTable, OracleError> {
    let in_phi = table.models(&item.formula)?;
    let not_phi = Formula::not(item.formula.clone());
    let out_phi = table.models(&not_phi)?;
    if in_phi.is_empty() {
        return Err(OracleError::Precondition("evidence formula has no world"));
    }
    if item.level.is_finite() && out_phi.is_empty() {
        return Err(OracleError::Precondition("evidence negation has no world"));
    }
    let pro = table.min_over(&in_phi);
    let con = table.min_over(&out_phi);
    let Rank::Finite(pro_n) = pro else {
        return Err(OracleError::Precondition("evidence formula has infinite rank"));
    };
    // posterior ranks of phi and !phi
    let (post_pro, post_con): (Option<i128>, Option<i128>) = match (item.mode, item.level) {
        (Mode::J, Rank::Finite(j)) => (Some(0), Some(j as i128)),
        (Mode::J, Rank::Infinite) => (Some(0), None),
        (Mode::L, Rank::Infinite) => (Some(0), None),
        (Mode::L, Rank::Finite(l)) => match con {
            Rank::Infinite => (Some(0), None),
            Rank::Finite(con_n) => {
                let gap = pro_n as i128 - con_n as i128;
                let l = l as i128;
                (Some((gap - l).max(0)), Some((l - gap).max(0)))
            }
        },
    };
    let mut out = table.clone();
    let phi_set: std::collections::HashSet<usize> = in_phi.into_iter().collect();
    for (w, rank) in out.ranks.iter_mut().enumerate() {
        let (base, post) = if phi_set.contains(&w) { (pro, post_pro) } else { (con, post_con) };
        *rank = shifted(table.ranks[w], base, post);
    }
    normalize(&mut out);
    Ok(out)
}

/// Applies a simultaneous J-report over a partition to every world.
pub fn oracle_condition_partition(
    table: &WorldTable,
    cells: &[(Formula, Rank)],
) -> Result<WorldTable, OracleError> {
    let mut cell_of = vec![None; table.len()];
    let mut cell_rank = Vec::with_capacity(cells.len());
    for (i, (c, _)) in cells.iter().enumerate() {
        let models = table.models(c)?;
        if models.is_empty() {
            return Err(OracleError::Precondition("partition cell has no world"));
        }
        for &w in &models {
            if cell_of[w].replace(i).is_some() {
                return Err(OracleError::Precondition("partition cells overlap"));
            }
        }
        cell_rank.push(table.min_over(&models));
    }
    if cell_of.iter().any(Option::is_none) {
        return Err(OracleError::Precondition("partition cells miss a world"));
    }
    let zero_cell_possible = cells
        .iter()
        .zip(&cell_rank)
        .any(|((_, level), r)| *level == Rank::ZERO && r.is_finite());
    if !zero_cell_possible {
        return Err(OracleError::Precondition("no possible zero-level cell"));
    }
    let mut out = table.clone();
    for (w, rank) in out.ranks.iter_mut().enumerate() {
        let c = cell_of[w].unwrap();
        let post = cells[c].1.finite().map(|n| n as i128);
        *rank = shifted(table.ranks[w], cell_rank[c], post);
    }
    normalize(&mut out);
    Ok(out)
}

/// Applies a recorded report of either kind.
pub fn oracle_apply(table: &WorldTable, evidence: &Evidence) -> Result<WorldTable, OracleError> {
    match evidence {
        Evidence::Item(item) => oracle_condition(table, item),
        Evidence::Partition(cells) => oracle_condition_partition(table, cells),
    }
}

/// `rank - base + post`, where an infinite rank, base or posterior yields infinity.
fn shifted(rank: Rank, base: Rank, post: Option<i128>) -> Rank {
    match (rank, base, post) {
        (Rank::Finite(r), Rank::Finite(b), Some(p)) => {
            let v = r as i128 - b as i128 + p;
            debug_assert!(v >= 0);
            Rank::Finite(v as u64)
        }
        _ => Rank::Infinite,
    }
}

fn normalize(table: &mut WorldTable) {
    if let Some(Rank::Finite(m)) = table.ranks.iter().min().copied() {
        for r in table.ranks.iter_mut() {
            if let Rank::Finite(n) = r {
                *n -= m;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::kb::parse_rules;

    fn table(rules: &str, v: &mut Vocabulary) -> (WorldTable, Vec<Rule>) {
        let rs = parse_rules(rules, v).unwrap();
        let atoms = rule_atoms(&rs);
        (oracle_compile(&rs, &atoms, DEFAULT_MAX_ATOMS).unwrap(), rs)
    }

    fn rank_of(t: &WorldTable, v: &mut Vocabulary, text: &str) -> Rank {
        oracle_kappa(t, &parse(text, v).unwrap()).unwrap()
    }

    #[test]
    fn penguin_table_by_hand() {
        let mut v = Vocabulary::new();
        let (t, _) = table("b -> f : 1\np -> b : 2\np -> !f : 2", &mut v);
        let expect = [
            ("p & b & !f", 2),
            ("p & b & f", 5),
            ("p & !b & f", 5),
            ("p & !b & !f", 5),
            ("!p & b & !f", 2),
            ("!p & b & f", 0),
            ("!p & !b & f", 0),
            ("!p & !b & !f", 0),
        ];
        for (f, r) in expect {
            assert_eq!(rank_of(&t, &mut v, f), Rank::Finite(r), "{f}");
        }
        assert_eq!(rank_of(&t, &mut v, "p & !f"), Rank::Finite(2));
        assert_eq!(rank_of(&t, &mut v, "true"), Rank::ZERO);
        assert_eq!(rank_of(&t, &mut v, "p & !p"), Rank::Infinite);
    }

    #[test]
    fn party_table_and_conditioning() {
        let mut v = Vocabulary::new();
        let (t, _) = table("M -> !B : 4", &mut v);
        assert_eq!(rank_of(&t, &mut v, "M & B"), Rank::Finite(5));
        for f in ["M & !B", "!M & B", "!M & !B"] {
            assert_eq!(rank_of(&t, &mut v, f), Rank::ZERO);
        }
        let m = parse("M", &mut v).unwrap();
        let b = parse("B", &mut v).unwrap();
        let t1 = oracle_condition(&t, &EvidenceItem::j(m, Rank::Finite(3))).unwrap();
        let expect1 = [("!M & B", 3), ("!M & !B", 3), ("M & !B", 0), ("M & B", 5)];
        for (f, r) in expect1 {
            assert_eq!(rank_of(&t1, &mut v, f), Rank::Finite(r), "{f}");
        }
        let t2 = oracle_condition(&t1, &EvidenceItem::l(b, Rank::Finite(3))).unwrap();
        let expect2 = [("M & B", 2), ("!M & B", 0), ("M & !B", 0), ("!M & !B", 3)];
        for (f, r) in expect2 {
            assert_eq!(rank_of(&t2, &mut v, f), Rank::Finite(r), "{f}");
        }
        let t3 = oracle_condition(&t, &EvidenceItem::l(parse("M", &mut v).unwrap(), Rank::ZERO))
            .unwrap();
        assert_eq!(t3, t);
    }

    #[test]
    fn empty_rule_set_is_flat() {
        let mut v = Vocabulary::new();
        let atoms = [v.intern("a"), v.intern("b")];
        let t = oracle_compile(&[], &atoms, DEFAULT_MAX_ATOMS).unwrap();
        assert!(t.ranks().iter().all(|r| *r == Rank::ZERO));
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn inconsistency_and_caps() {
        let mut v = Vocabulary::new();
        let rs = parse_rules("a -> b : 1\na -> !b : 1", &mut v).unwrap();
        assert_eq!(
            oracle_compile(&rs, &rule_atoms(&rs), DEFAULT_MAX_ATOMS),
            Err(OracleError::Inconsistent)
        );
        let rs = parse_rules("a -> a & !a", &mut v).unwrap();
        assert_eq!(
            oracle_compile(&rs, &rule_atoms(&rs), DEFAULT_MAX_ATOMS),
            Err(OracleError::Inconsistent)
        );
        let rs = parse_rules("a & !a -> b", &mut v).unwrap();
        assert_eq!(
            oracle_compile(&rs, &rule_atoms(&rs), DEFAULT_MAX_ATOMS),
            Err(OracleError::Inconsistent)
        );
        let atoms: Vec<AtomId> = (0..5).map(|i| v.intern(&format!("x{i}"))).collect();
        assert!(matches!(
            WorldTable::uniform(&atoms, 4),
            Err(OracleError::TooManyAtoms { atoms: 5, cap: 4 })
        ));
        let t = WorldTable::uniform(&atoms[..1], 4).unwrap();
        assert!(matches!(
            oracle_kappa(&t, &Formula::atom(atoms[1])),
            Err(OracleError::UnknownAtom(_))
        ));
    }

    #[test]
    fn minimality_audit() {
        let mut v = Vocabulary::new();
        let (t, rs) = table("b -> f : 1\np -> b : 2\np -> !f : 2\nb & r -> f : 0", &mut v);
        let admissible = |t: &WorldTable| {
            rs.iter().all(|r| {
                let pro = oracle_kappa(t, &r.verification()).unwrap();
                let con = oracle_kappa(t, &r.violation()).unwrap();
                con == Rank::Infinite || pro.plus(Rank::Finite(r.delta)) < con
            })
        };
        assert!(admissible(&t));
        for w in 0..t.len() {
            if let Rank::Finite(n) = t.ranks[w] {
                if n > 0 {
                    let mut lower = t.clone();
                    lower.ranks[w] = Rank::Finite(n - 1);
                    assert!(!admissible(&lower), "world {w} could be lowered");
                }
            }
        }
    }

    #[test]
    fn world_indexing() {
        let mut v = Vocabulary::new();
        let (t, _) = table("M -> !B : 4", &mut v);
        let w = World::from_pairs(&mut v, &[("M", true), ("B", true)]);
        assert_eq!(t.ranks()[t.index_of(&w)], Rank::Finite(5));
        assert_eq!(t.world(t.index_of(&w), v.len()), w);
        assert!(t.render(&v).contains("M=1 B=1  5"));
    }
}
