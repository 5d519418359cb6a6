mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use common::{atoms, random_consistent_kb, random_formula, random_rules, truth_mask};
use zplus::evidence::{BeliefState, EvidenceItem, Mode};
use zplus::formula::{parse, to_clauses_with_factor, AtomId, ClauseSet, Formula, Var, Vocabulary};
use zplus::kb::{compile, is_consistent, parse_rules, CompiledKb, Rule};
use zplus::oracle::{oracle_apply, oracle_compile, oracle_kappa, WorldTable};
use zplus::rank::{conditional_kappa, kappa, query, Rank, Strength};
use zplus::revise::{accepts_conditional, add_rule, RevisionOutcome};
use zplus::sat::{find_model, is_satisfiable};
use zplus::SatCounter;

const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

fn formula_strategy() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        (0u32..NAMES.len() as u32).prop_map(|i| Formula::atom(AtomId(i))),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| Formula::implies(l, r)),
        ]
    })
}

fn names_vocab() -> (Vocabulary, Vec<AtomId>) {
    let mut v = Vocabulary::new();
    let ids = NAMES.iter().map(|n| v.intern(n)).collect();
    (v, ids)
}

fn clause_set_satisfiable(cs: &ClauseSet, n_atoms: usize) -> bool {
    let n = n_atoms + cs.aux_vars as usize;
    (0u64..1 << n).any(|bits| {
        cs.clauses.iter().all(|cl| {
            cl.iter().any(|lit| {
                let slot = match lit.var {
                    Var::Atom(a) => a.index(),
                    Var::Aux(k) => n_atoms + k as usize,
                };
                (bits >> slot & 1 == 1) == lit.positive
            })
        })
    })
}

fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

fn kb_from_seed(seed: u64) -> (StdRng, Vocabulary, Vec<Rule>, CompiledKb) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=6);
    let (v, rs) = random_consistent_kb(&mut r, n, 8, 3);
    let kb = compile(&rs, &v, &mut SatCounter::new()).unwrap();
    (r, v, rs, kb)
}

fn all_atoms(v: &Vocabulary) -> Vec<AtomId> {
    v.atoms().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_then_parsing_returns_the_same_tree(f in formula_strategy()) {
        let (mut v, _) = names_vocab();
        let text = f.display(&v).to_string();
        let back = parse(&text, &mut v).unwrap();
        prop_assert_eq!(back, f, "{}", text);
    }

    #[test]
    fn evaluation_matches_truth_table(f in formula_strategy()) {
        let (_, ids) = names_vocab();
        let mask = truth_mask(&f, &ids);
        for w in 0..32usize {
            let got = f.eval_with(|a| w >> a.index() & 1 == 1);
            prop_assert_eq!(got, mask >> w & 1 == 1);
        }
    }

    #[test]
    fn clausal_forms_are_equisatisfiable(f in formula_strategy(), factor in 0usize..5) {
        let (_, ids) = names_vocab();
        let cs = to_clauses_with_factor(&f, factor);
        prop_assume!(cs.aux_vars <= 10);
        let expected = truth_mask(&f, &ids) != 0;
        prop_assert_eq!(clause_set_satisfiable(&cs, ids.len()), expected);
        if cs.direct {
            prop_assert_eq!(cs.aux_vars, 0);
        }
    }

    #[test]
    fn solver_agrees_with_enumeration(f in formula_strategy()) {
        let (_, ids) = names_vocab();
        let expected = truth_mask(&f, &ids) != 0;
        let mut c = SatCounter::new();
        prop_assert_eq!(is_satisfiable(&f, &mut c), expected);
        prop_assert_eq!(c.total_calls, 1);
        match find_model(&f, ids.len()) {
            Some(w) => prop_assert!(expected && f.eval(&w).unwrap()),
            None => prop_assert!(!expected),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn solver_agrees_with_enumeration_on_six_atoms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut v = Vocabulary::new();
        let ids = atoms(&mut v, 6);
        let f = Formula::conjunction((0..r.gen_range(1..6)).map(|_| random_formula(&mut r, &ids, 3)));
        let expected = truth_mask(&f, &ids) != 0;
        prop_assert_eq!(is_satisfiable(&f, &mut SatCounter::new()), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn horn_formulas_take_the_horn_path(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut v = Vocabulary::new();
        let ids = atoms(&mut v, 6);
        // each conjunct is a definite or goal clause written as an implication
        let clauses = (0..r.gen_range(1..10)).map(|_| {
            let body = Formula::conjunction(
                (0..r.gen_range(0..3)).map(|_| Formula::atom(*ids.choose(&mut r).unwrap())),
            );
            let head = if r.gen_bool(0.8) {
                Formula::atom(*ids.choose(&mut r).unwrap())
            } else {
                Formula::False
            };
            Formula::implies(body, head)
        });
        let f = Formula::conjunction(clauses);
        let mut c = SatCounter::new();
        let sat = is_satisfiable(&f, &mut c);
        prop_assert_eq!(sat, truth_mask(&f, &ids) != 0);
        prop_assert_eq!(c.horn_path_calls, 1);
    }

    #[test]
    fn every_rule_is_admissible(seed in any::<u64>()) {
        let (_, _, rs, kb) = kb_from_seed(seed);
        let mut c = SatCounter::new();
        for r in &rs {
            if let Ok(q) = query(&kb, &r.antecedent, &r.consequent, &mut c) {
                prop_assert!(q.strength >= Strength::Finite(r.delta as i64 + 1));
            }
        }
    }

    #[test]
    fn priorities_are_self_consistent(seed in any::<u64>()) {
        // each priority equals delta plus the least world rank verifying the rule
        let (_, v, rs, kb) = kb_from_seed(seed);
        let table = oracle_compile(&rs, &all_atoms(&v), 20).unwrap();
        for r in &rs {
            let least = oracle_kappa(&table, &r.verification()).unwrap();
            prop_assert_eq!(Rank::Finite(kb.z_plus(r.index).unwrap()), least.plus(Rank::Finite(r.delta)));
        }
        // and each world ranks one above the largest priority it violates
        for i in 0..table.len() {
            let w = table.world(i, v.len());
            let expected = rs
                .iter()
                .filter(|r| r.is_violated_by(&w))
                .map(|r| kb.z_plus(r.index).unwrap() + 1)
                .max()
                .unwrap_or(0);
            prop_assert_eq!(kb.kappa_world(&w).unwrap(), expected);
        }
    }

    #[test]
    fn rule_order_does_not_matter(seed in any::<u64>()) {
        let (mut r, v, rs, kb) = kb_from_seed(seed);
        let mut shuffled = rs.clone();
        shuffled.shuffle(&mut r);
        let other = compile(&shuffled, &v, &mut SatCounter::new()).unwrap();
        let table = WorldTable::uniform(&all_atoms(&v), 20).unwrap();
        for i in 0..table.len() {
            let w = table.world(i, v.len());
            prop_assert_eq!(kb.kappa_world(&w).unwrap(), other.kappa_world(&w).unwrap());
        }
    }

    #[test]
    fn consistency_ignores_strengths(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut v = Vocabulary::new();
        let ids = atoms(&mut v, r.gen_range(2..=5));
        let rs = random_rules(&mut r, &ids, 8, 3);
        let verdict = is_consistent(&rs, &mut SatCounter::new());
        let mut redrawn = rs.clone();
        for rule in &mut redrawn {
            rule.delta = r.gen_range(0..=50);
        }
        prop_assert_eq!(is_consistent(&redrawn, &mut SatCounter::new()), verdict);
        // the enumerating oracle reaches the same verdict
        prop_assert_eq!(oracle_compile(&rs, &ids, 20).is_ok(), verdict);
    }

    #[test]
    fn compile_stays_within_call_budget(seed in any::<u64>()) {
        let (_, v, rs, _) = kb_from_seed(seed);
        let mut c = SatCounter::new();
        compile(&rs, &v, &mut c).unwrap();
        let n = rs.len() as u64;
        let log = 64 - (n.max(2) - 1).leading_zeros() as u64;
        prop_assert!(c.total_calls <= 4 * n * n * (log + 2) + 2 * n);
    }

    #[test]
    fn ranks_agree_with_the_oracle(seed in any::<u64>()) {
        let (mut r, v, rs, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let table = oracle_compile(&rs, &ids, 20).unwrap();
        let mut c = SatCounter::new();
        for _ in 0..10 {
            let f = random_formula(&mut r, &ids, 3);
            let g = random_formula(&mut r, &ids, 3);
            let kf = kappa(&kb, &f, &mut c);
            prop_assert_eq!(kf, oracle_kappa(&table, &f).unwrap());
            let kn = kappa(&kb, &Formula::not(f.clone()), &mut c);
            prop_assert_eq!(kf.min(kn), Rank::ZERO);
            let kg = kappa(&kb, &g, &mut c);
            prop_assert_eq!(kappa(&kb, &Formula::or(f.clone(), g.clone()), &mut c), kf.min(kg));
            // kappa(f & g) = kappa(f | g) + kappa(f & g | f | g)
            let either = Formula::or(f.clone(), g.clone());
            if let Ok(cond) = conditional_kappa(&kb, &Formula::and(f.clone(), g.clone()), &either, &mut c) {
                let joint = kappa(&kb, &Formula::and(f.clone(), g.clone()), &mut c);
                prop_assert_eq!(joint, cond.plus(kappa(&kb, &either, &mut c)));
            }
        }
    }

    #[test]
    fn evidence_chains_agree_with_the_oracle(seed in any::<u64>()) {
        let (mut r, v, rs, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        prop_assume!(ids.len() <= 5);
        let mut table = oracle_compile(&rs, &ids, 20).unwrap();
        let mut state = BeliefState::new(Arc::new(kb));
        let mut c = SatCounter::new();
        for _ in 0..r.gen_range(1..=3) {
            let level = if r.gen_bool(0.1) { Rank::Infinite } else { Rank::Finite(r.gen_range(0..=4)) };
            let mode = if r.gen_bool(0.5) { Mode::J } else { Mode::L };
            let item = EvidenceItem { mode, formula: random_formula(&mut r, &ids, 2), level };
            let Ok(next) = state.observe(item.clone(), &mut c) else { continue };
            let evidence = next.chain().last().unwrap().clone();
            table = oracle_apply(&table, &evidence).unwrap();
            // the report now holds exactly at its level
            let pro = next.state_kappa(&item.formula, &mut c);
            let con = next.state_kappa(&Formula::not(item.formula.clone()), &mut c);
            prop_assert_eq!(pro.min(con), Rank::ZERO);
            // worlds ruled out by earlier certain reports stay out
            let prior_con = state.state_kappa(&Formula::not(item.formula.clone()), &mut c);
            if mode == Mode::J && prior_con.is_finite() {
                prop_assert_eq!((pro, con), (Rank::ZERO, level));
            }
            if let (Mode::L, Rank::Finite(l)) = (mode, level) {
                let before = Strength::difference(
                    state.state_kappa(&Formula::not(item.formula.clone()), &mut c),
                    state.state_kappa(&item.formula, &mut c),
                );
                let after = Strength::difference(con, pro);
                if let (Some(Strength::Finite(b)), Some(Strength::Finite(a))) = (before, after) {
                    prop_assert_eq!(a, b + l as i64);
                }
            }
            state = next;
        }
        for _ in 0..5 {
            let f = random_formula(&mut r, &ids, 3);
            prop_assert_eq!(state.state_kappa(&f, &mut c), oracle_kappa(&table, &f).unwrap());
        }
    }

    #[test]
    fn partition_reports_agree_with_the_oracle(seed in any::<u64>()) {
        let (mut r, v, rs, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let (x, y) = (Formula::atom(ids[0]), Formula::atom(ids[1]));
        let mut cells = vec![
            (Formula::and(x.clone(), y.clone()), Rank::Finite(r.gen_range(0..=3))),
            (Formula::and(x.clone(), Formula::not(y)), Rank::Finite(r.gen_range(0..=3))),
            (Formula::not(x), Rank::Finite(r.gen_range(0..=3))),
        ];
        let zero = r.gen_range(0..cells.len());
        cells[zero].1 = Rank::ZERO;
        let state = BeliefState::new(Arc::new(kb));
        let mut c = SatCounter::new();
        let Ok(next) = state.observe_partition(cells, &mut c) else { return Ok(()) };
        let table = oracle_compile(&rs, &ids, 20).unwrap();
        let table = oracle_apply(&table, next.chain().last().unwrap()).unwrap();
        for _ in 0..8 {
            let f = random_formula(&mut r, &ids, 3);
            prop_assert_eq!(next.state_kappa(&f, &mut c), oracle_kappa(&table, &f).unwrap());
        }
    }

    #[test]
    fn l_reports_commute(seed in any::<u64>()) {
        let (mut r, v, _, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let x = EvidenceItem::l(random_formula(&mut r, &ids, 2), Rank::Finite(r.gen_range(0..=4)));
        let y = EvidenceItem::l(random_formula(&mut r, &ids, 2), Rank::Finite(r.gen_range(0..=4)));
        let s = BeliefState::new(Arc::new(kb));
        let mut c = SatCounter::new();
        let xy = s.observe(x.clone(), &mut c).and_then(|s| s.observe(y.clone(), &mut c));
        let yx = s.observe(y, &mut c).and_then(|s| s.observe(x, &mut c));
        let (Ok(xy), Ok(yx)) = (xy, yx) else { return Ok(()) };
        for _ in 0..8 {
            let f = random_formula(&mut r, &ids, 3);
            prop_assert_eq!(xy.state_kappa(&f, &mut c), yx.state_kappa(&f, &mut c));
        }
    }

    #[test]
    fn certain_reports_rule_out_the_negation(seed in any::<u64>()) {
        let (mut r, v, _, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let phi = random_formula(&mut r, &ids, 2);
        let mode = if r.gen_bool(0.5) { Mode::J } else { Mode::L };
        let s = BeliefState::new(Arc::new(kb));
        let mut c = SatCounter::new();
        let Ok(next) = s.observe(EvidenceItem { mode, formula: phi.clone(), level: Rank::Infinite }, &mut c) else {
            return Ok(());
        };
        prop_assert_eq!(next.state_kappa(&Formula::not(phi.clone()), &mut c), Rank::Infinite);
        for _ in 0..5 {
            let psi = random_formula(&mut r, &ids, 2);
            let expected = conditional_kappa(s.kb(), &psi, &phi, &mut c).unwrap();
            prop_assert_eq!(next.state_kappa(&psi, &mut c), expected);
        }
    }

    #[test]
    fn rules_in_the_base_pass_the_ramsey_test(seed in any::<u64>()) {
        let (_, _, rs, kb) = kb_from_seed(seed);
        let mut c = SatCounter::new();
        for r in &rs {
            if let Ok((ok, _)) = accepts_conditional(&kb, &r.antecedent, &r.consequent, &mut c) {
                prop_assert!(ok);
            }
        }
    }

    #[test]
    fn adding_a_rule_is_deterministic_and_leaves_the_base_alone(seed in any::<u64>()) {
        let (mut r, v, rs, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let before = kb.to_text();
        let new_rule = common::random_rule(&mut r, &ids, 0, 3);
        let a = add_rule(&kb, new_rule.clone(), &v, &mut SatCounter::new()).unwrap();
        let b = add_rule(&kb, new_rule.clone(), &v, &mut SatCounter::new()).unwrap();
        prop_assert_eq!(kb.to_text(), before);
        let mut extended = rs.clone();
        extended.push(Rule { index: rs.len(), ..new_rule });
        match (a, b) {
            (RevisionOutcome::Accepted(x), RevisionOutcome::Accepted(y)) => {
                prop_assert_eq!(x.to_text(), y.to_text());
                prop_assert_eq!(x.len(), rs.len() + 1);
                prop_assert!(is_consistent(&extended, &mut SatCounter::new()));
            }
            (RevisionOutcome::Inconsistent, RevisionOutcome::Inconsistent) => {
                prop_assert!(!is_consistent(&extended, &mut SatCounter::new()));
            }
            _ => prop_assert!(false, "outcomes differ"),
        }
    }

    #[test]
    fn retracting_evidence_restores_the_base(seed in any::<u64>()) {
        let (mut r, v, _, kb) = kb_from_seed(seed);
        let ids = all_atoms(&v);
        let kb = Arc::new(kb);
        let mut state = BeliefState::new(kb.clone());
        let mut c = SatCounter::new();
        for _ in 0..3 {
            let item = EvidenceItem::j(random_formula(&mut r, &ids, 2), Rank::Finite(r.gen_range(0..4)));
            if let Ok(s) = state.observe(item, &mut c) {
                state = s;
            }
        }
        let back = state.retract();
        prop_assert_eq!(back.chain_len(), 0);
        for _ in 0..5 {
            let f = random_formula(&mut r, &ids, 3);
            prop_assert_eq!(back.state_kappa(&f, &mut c), kappa(&kb, &f, &mut c));
        }
    }
}

#[test]
fn unrelated_atoms_do_not_change_conclusions() {
    // red birds: a fresh atom in the context leaves penguin conclusions intact
    let mut v = Vocabulary::new();
    let rs = parse_rules(common::PENGUIN, &mut v).unwrap();
    let kb = compile(&rs, &v, &mut SatCounter::new()).unwrap();
    let mut c = SatCounter::new();
    for (ctx, tgt) in [("b", "f"), ("p", "!f"), ("p", "b")] {
        let plain = query(&kb, &parse(ctx, &mut v).unwrap(), &parse(tgt, &mut v).unwrap(), &mut c).unwrap();
        let red = parse(&format!("{ctx} & red"), &mut v).unwrap();
        let kb2 = compile(&rs, &v, &mut SatCounter::new()).unwrap();
        let tinted = query(&kb2, &red, &parse(tgt, &mut v).unwrap(), &mut c).unwrap();
        assert_eq!(plain.strength, tinted.strength, "{ctx} |~ {tgt}");
    }
}
