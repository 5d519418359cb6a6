#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use zplus::formula::{AtomId, Formula, Vocabulary};
use zplus::kb::{is_consistent, parse_rules, Rule};
use zplus::SatCounter;

pub const PENGUIN: &str = "b -> f : 1\np -> b : 2\np -> !f : 2\n";
pub const PARTY: &str = "M -> !B : 4\n";

pub fn rules(text: &str) -> (Vocabulary, Vec<Rule>) {
    let mut v = Vocabulary::new();
    let rs = parse_rules(text, &mut v).unwrap();
    (v, rs)
}

pub fn atoms(v: &mut Vocabulary, n: usize) -> Vec<AtomId> {
    (0..n).map(|i| v.intern(&format!("x{i}"))).collect()
}

pub fn random_literal(rng: &mut StdRng, atoms: &[AtomId]) -> Formula {
    let a = Formula::atom(*atoms.choose(rng).unwrap());
    if rng.gen_bool(0.5) { a } else { Formula::not(a) }
}

pub fn random_formula(rng: &mut StdRng, atoms: &[AtomId], depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..20) {
            0 => Formula::True,
            1 => Formula::False,
            _ => random_literal(rng, atoms),
        };
    }
    let l = random_formula(rng, atoms, depth - 1);
    match rng.gen_range(0..4) {
        0 => Formula::not(l),
        1 => Formula::and(l, random_formula(rng, atoms, depth - 1)),
        2 => Formula::or(l, random_formula(rng, atoms, depth - 1)),
        _ => Formula::implies(l, random_formula(rng, atoms, depth - 1)),
    }
}

/// Rule with a small antecedent (literal or two-literal combination) and a
/// literal or small consequent.
pub fn random_rule(rng: &mut StdRng, atoms: &[AtomId], index: usize, max_delta: u64) -> Rule {
    let side = |rng: &mut StdRng| match rng.gen_range(0..6) {
        0 => Formula::and(random_literal(rng, atoms), random_literal(rng, atoms)),
        1 => Formula::or(random_literal(rng, atoms), random_literal(rng, atoms)),
        _ => random_literal(rng, atoms),
    };
    let antecedent = side(rng);
    let consequent = side(rng);
    Rule::new(antecedent, consequent, rng.gen_range(0..=max_delta), index).unwrap()
}

pub fn random_rules(
    rng: &mut StdRng,
    atoms: &[AtomId],
    max_rules: usize,
    max_delta: u64,
) -> Vec<Rule> {
    let n = rng.gen_range(1..=max_rules);
    (0..n).map(|i| random_rule(rng, atoms, i, max_delta)).collect()
}

/// A consistent random rule base over `n_atoms` atoms.
pub fn random_consistent_kb(
    rng: &mut StdRng,
    n_atoms: usize,
    max_rules: usize,
    max_delta: u64,
) -> (Vocabulary, Vec<Rule>) {
    loop {
        let mut v = Vocabulary::new();
        let atoms = atoms(&mut v, n_atoms);
        let rs = random_rules(rng, &atoms, max_rules, max_delta);
        if is_consistent(&rs, &mut SatCounter::new()) {
            return (v, rs);
        }
    }
}

/// Nested exceptions: `a0 -> f`, then each `a{k}` is an `a{k-1}` with the
/// opposite flying habit. Every rule is Horn-shaped.
pub fn exception_chain(n: usize, delta: u64) -> String {
    let mut out = String::new();
    let mut count = 0;
    let mut k = 0;
    while count < n {
        if k == 0 {
            out.push_str(&format!("a0 -> f : {delta}\n"));
            count += 1;
        } else {
            out.push_str(&format!("a{k} -> a{} : {delta}\n", k - 1));
            count += 1;
            if count < n {
                let target = if k % 2 == 1 { "!f" } else { "f" };
                out.push_str(&format!("a{k} -> {target} : {delta}\n"));
                count += 1;
            }
        }
        k += 1;
    }
    out
}

/// Truth table of `f` as a bitmask over the `2^n` worlds on `atoms`
/// (n <= 6), bit `w` set iff world `w` satisfies `f`. Computed bottom-up
/// with word operations, independently of `Formula::eval`.
pub fn truth_mask(f: &Formula, atoms: &[AtomId]) -> u64 {
    let n = atoms.len();
    assert!(n <= 6);
    let all: u64 = if n == 6 { u64::MAX } else { (1u64 << (1 << n)) - 1 };
    fn go(f: &Formula, atoms: &[AtomId], all: u64) -> u64 {
        match f {
            Formula::True => all,
            Formula::False => 0,
            Formula::Atom(a) => {
                let bit = atoms.iter().position(|x| x == a).expect("atom in table");
                (0..(1u64 << atoms.len()))
                    .filter(|w| w >> bit & 1 == 1)
                    .fold(0, |m, w| m | 1 << w)
            }
            Formula::Not(c) => !go(c, atoms, all) & all,
            Formula::And(l, r) => go(l, atoms, all) & go(r, atoms, all),
            Formula::Or(l, r) => go(l, atoms, all) | go(r, atoms, all),
            Formula::Implies(l, r) => (!go(l, atoms, all) & all) | go(r, atoms, all),
        }
    }
    go(f, atoms, all)
}
