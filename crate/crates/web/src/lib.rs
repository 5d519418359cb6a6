//! Browser demo: compile a rule base, ask graded questions, and watch the
//! world ranking move under soft evidence.
//!
//! The report functions are plain Rust and return serializable structs; the
//! `#[wasm_bindgen]` exports wrap them and hand JSON to the page.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use zplus::evidence::{BeliefState, EvidenceItem, Mode};
use zplus::formula::{parse, AtomId, Formula, Vocabulary};
use zplus::kb::{compile, parse_rules, CompiledKb};
use zplus::oracle::{rule_atoms, WorldTable};
use zplus::rank::{query, Rank};
use zplus::SatCounter;

/// Tables above this many atoms are not rendered.
pub const MAX_TABLE_ATOMS: usize = 10;

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct Priority {
    pub rule: String,
    pub delta: u64,
    pub z_plus: u64,
}

#[derive(Debug, Serialize, PartialEq, Eq)]
pub struct Worlds {
    pub atoms: Vec<String>,
    /// One row per world: the truth value of each atom, then its rank.
    pub rows: Vec<(Vec<bool>, Option<u64>)>,
}

#[derive(Debug, Serialize)]
pub struct CompileReport {
    pub priorities: Vec<Priority>,
    pub worlds: Option<Worlds>,
    pub sat_calls: u64,
    pub horn_path_calls: u64,
}

#[derive(Debug, Serialize)]
pub struct QueryReport {
    pub verdict: String,
    pub strength: String,
    pub kappa_pro: String,
    pub kappa_con: String,
    pub sat_calls: u64,
}

#[derive(Debug, Serialize)]
pub struct Step {
    pub evidence: String,
    pub worlds: Option<Worlds>,
}

#[derive(Debug, Serialize)]
pub struct EvidenceReport {
    pub prior: Option<Worlds>,
    pub steps: Vec<Step>,
    pub sat_calls: u64,
}

fn load(rules: &str) -> Result<(Vocabulary, CompiledKb, SatCounter), String> {
    let mut vocab = Vocabulary::new();
    let parsed = parse_rules(rules, &mut vocab).map_err(|e| e.to_string())?;
    let mut counter = SatCounter::new();
    let kb = compile(&parsed, &vocab, &mut counter).map_err(|e| e.to_string())?;
    Ok((vocab, kb, counter))
}

fn world_formula(atoms: &[AtomId], index: usize) -> Formula {
    Formula::conjunction(atoms.iter().enumerate().map(|(bit, &a)| {
        let lit = Formula::atom(a);
        if index >> bit & 1 == 1 { lit } else { Formula::not(lit) }
    }))
}

fn worlds(state: &BeliefState, atoms: &[AtomId], counter: &mut SatCounter) -> Option<Worlds> {
    let table = WorldTable::uniform(atoms, MAX_TABLE_ATOMS).ok()?;
    let vocab = state.kb().vocab();
    let rows = (0..table.len())
        .map(|i| {
            let values = (0..atoms.len()).map(|bit| i >> bit & 1 == 1).collect();
            (values, state.state_kappa(&world_formula(atoms, i), counter).finite())
        })
        .collect();
    Some(Worlds { atoms: atoms.iter().map(|&a| vocab.name(a).to_string()).collect(), rows })
}

/// Priorities of every rule and the resulting world ranking.
pub fn compile_report(rules: &str) -> Result<CompileReport, String> {
    let (vocab, kb, counter) = load(rules)?;
    let priorities = kb
        .entries()
        .iter()
        .map(|e| Priority {
            rule: format!(
                "{} -> {}",
                e.rule.antecedent.display(&vocab),
                e.rule.consequent.display(&vocab)
            ),
            delta: e.rule.delta,
            z_plus: e.z_plus,
        })
        .collect();
    let atoms = rule_atoms(&kb.rules());
    let state = BeliefState::new(Arc::new(kb));
    let worlds = worlds(&state, &atoms, &mut SatCounter::new());
    Ok(CompileReport {
        priorities,
        worlds,
        sat_calls: counter.total_calls,
        horn_path_calls: counter.horn_path_calls,
    })
}

/// How strongly `target` follows from `context` under `rules`.
pub fn query_report(rules: &str, context: &str, target: &str) -> Result<QueryReport, String> {
    let (mut vocab, kb, _) = load(rules)?;
    let ctx = parse(context, &mut vocab).map_err(|e| format!("context: {e}"))?;
    let tgt = parse(target, &mut vocab).map_err(|e| format!("target: {e}"))?;
    let mut counter = SatCounter::new();
    let r = query(&kb, &ctx, &tgt, &mut counter).map_err(|e| e.to_string())?;
    Ok(QueryReport {
        verdict: r.verdict.to_string(),
        strength: r.strength.to_string(),
        kappa_pro: r.kappa_pro.to_string(),
        kappa_con: r.kappa_con.to_string(),
        sat_calls: counter.total_calls,
    })
}

/// Parses `J|L <wff> <level|inf>`.
pub fn parse_report(line: &str, vocab: &mut Vocabulary) -> Result<EvidenceItem, String> {
    let usage = || format!("expected 'J|L <formula> <level>', got {line:?}");
    let line = line.trim();
    let (mode, rest) = line.split_once(char::is_whitespace).ok_or_else(usage)?;
    let mode = match mode {
        "J" | "j" => Mode::J,
        "L" | "l" => Mode::L,
        _ => return Err(usage()),
    };
    let (wff, level) = rest.trim().rsplit_once(char::is_whitespace).ok_or_else(usage)?;
    let level = match level {
        "inf" => Rank::Infinite,
        n => Rank::Finite(n.parse().map_err(|_| usage())?),
    };
    let formula = parse(wff, vocab).map_err(|e| e.to_string())?;
    Ok(EvidenceItem { mode, formula, level })
}

/// World rankings before and after each report in `evidence`, one report
/// per non-empty line.
pub fn evidence_report(rules: &str, evidence: &str) -> Result<EvidenceReport, String> {
    let mut vocab = Vocabulary::new();
    parse_rules(rules, &mut vocab).map_err(|e| e.to_string())?;
    let mut items = Vec::new();
    for line in evidence.lines().filter(|l| !l.trim().is_empty()) {
        items.push(parse_report(line, &mut vocab)?);
    }
    // recompile over the enlarged vocabulary so evidence atoms are known
    let parsed = parse_rules(rules, &mut vocab).map_err(|e| e.to_string())?;
    let mut counter = SatCounter::new();
    let kb = compile(&parsed, &vocab, &mut counter).map_err(|e| e.to_string())?;
    let mut atoms = rule_atoms(&parsed);
    atoms.extend(items.iter().flat_map(|it| it.formula.atoms()));
    atoms.sort_unstable();
    atoms.dedup();

    let mut state = BeliefState::new(Arc::new(kb));
    let prior = worlds(&state, &atoms, &mut counter);
    let mut steps = Vec::new();
    for item in items {
        let label = format!(
            "{} {} {}",
            if item.mode == Mode::J { "J" } else { "L" },
            item.formula.display(&vocab),
            item.level
        );
        state = state.observe(item, &mut counter).map_err(|e| format!("{label}: {e}"))?;
        steps.push(Step { worlds: worlds(&state, &atoms, &mut counter), evidence: label });
    }
    Ok(EvidenceReport { prior, steps, sat_calls: counter.total_calls })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, String> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen(js_name = compileRules)]
pub fn compile_rules(rules: &str) -> Result<String, String> {
    json(compile_report(rules))
}

#[wasm_bindgen(js_name = queryRules)]
pub fn query_rules(rules: &str, context: &str, target: &str) -> Result<String, String> {
    json(query_report(rules, context, target))
}

#[wasm_bindgen(js_name = observeEvidence)]
pub fn observe_evidence(rules: &str, evidence: &str) -> Result<String, String> {
    json(evidence_report(rules, evidence))
}
