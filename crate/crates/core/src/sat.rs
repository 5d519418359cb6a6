//! Satisfiability backend.
//!
//! Every decision goes through [`solve_clause_sets`], which bumps a
//! [`SatCounter`] once per call. Inputs whose direct clausal form is Horn are
//! decided by forward chaining in linear time; everything else goes to a
//! DPLL search (two watched literals, chronological backtracking, decisions
//! in fixed variable order).

use crate::formula::{to_clauses, ClauseSet, Formula, Var, World};

/// Counts satisfiability tests made on behalf of one operation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SatCounter {
    pub total_calls: u64,
    pub horn_path_calls: u64,
}

impl SatCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn absorb(&mut self, other: SatCounter) {
        self.total_calls += other.total_calls;
        self.horn_path_calls += other.horn_path_calls;
    }
}

/// Decides satisfiability of `f`, recording one call in `counter`.
pub fn is_satisfiable(f: &Formula, counter: &mut SatCounter) -> bool {
    let cs = to_clauses(f);
    solve_clause_sets(&[&cs], counter)
}

/// Decides satisfiability of the conjunction of several clause sets. Their
/// auxiliary variables are kept apart. Counts as a single call.
pub fn solve_clause_sets(parts: &[&ClauseSet], counter: &mut SatCounter) -> bool {
    counter.total_calls += 1;
    let problem = Problem::build(parts);
    if parts.iter().all(|p| p.horn) {
        counter.horn_path_calls += 1;
        problem.solve_horn().is_some()
    } else {
        problem.solve_dpll().is_some()
    }
}

/// A satisfying world over `vocab_len` atoms (atoms not in `f` are false),
/// or `None` when `f` is unsatisfiable.
pub fn find_model(f: &Formula, vocab_len: usize) -> Option<World> {
    let cs = to_clauses(f);
    let problem = Problem::build(&[&cs]);
    let model = if cs.horn { problem.solve_horn() } else { problem.solve_dpll() }?;
    let n = vocab_len.max(problem.num_atoms);
    let mut values = vec![false; n];
    values[..problem.num_atoms].copy_from_slice(&model[..problem.num_atoms]);
    Some(World::new(values))
}

/// Dense encoding: variable `v` has literals `2v` (positive) and `2v+1`.
struct Problem {
    num_atoms: usize,
    num_vars: usize,
    clauses: Vec<Vec<u32>>,
}

fn lit_var(l: u32) -> usize {
    (l >> 1) as usize
}

fn lit_positive(l: u32) -> bool {
    l & 1 == 0
}

impl Problem {
    fn build(parts: &[&ClauseSet]) -> Problem {
        let num_atoms = parts
            .iter()
            .flat_map(|p| p.clauses.iter().flatten())
            .filter_map(|l| match l.var {
                Var::Atom(a) => Some(a.index() + 1),
                Var::Aux(_) => None,
            })
            .max()
            .unwrap_or(0);
        let mut offset = num_atoms;
        let mut clauses = Vec::with_capacity(parts.iter().map(|p| p.clauses.len()).sum());
        for p in parts {
            for c in &p.clauses {
                let mut dense: Vec<u32> = c
                    .iter()
                    .map(|l| {
                        let v = match l.var {
                            Var::Atom(a) => a.index(),
                            Var::Aux(i) => offset + i as usize,
                        };
                        ((v as u32) << 1) | u32::from(!l.positive)
                    })
                    .collect();
                dense.sort_unstable();
                dense.dedup();
                if dense.windows(2).any(|w| w[0] ^ 1 == w[1]) {
                    continue;
                }
                clauses.push(dense);
            }
            offset += p.aux_vars as usize;
        }
        Problem { num_atoms, num_vars: offset, clauses }
    }

    /// Forward chaining for clauses with at most one positive literal.
    /// Returns the least model.
    fn solve_horn(&self) -> Option<Vec<bool>> {
        let n = self.num_vars;
        let mut truth = vec![false; n];
        let mut pending: Vec<usize> = Vec::with_capacity(self.clauses.len());
        let mut head: Vec<Option<usize>> = Vec::with_capacity(self.clauses.len());
        let mut body_of: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut queue = Vec::new();
        for (ci, c) in self.clauses.iter().enumerate() {
            let mut h = None;
            let mut body = 0;
            for &l in c {
                if lit_positive(l) {
                    debug_assert!(h.is_none(), "non-Horn clause on the Horn path");
                    h = Some(lit_var(l));
                } else {
                    body_of[lit_var(l)].push(ci);
                    body += 1;
                }
            }
            pending.push(body);
            head.push(h);
            if body == 0 {
                {
                    let v = h?;
                    queue.push(v)
                }
            }
        }
        while let Some(v) = queue.pop() {
            if truth[v] {
                continue;
            }
            truth[v] = true;
            for &ci in &body_of[v] {
                pending[ci] -= 1;
                if pending[ci] == 0 {
                    match head[ci] {
                        None => return None,
                        Some(h) if !truth[h] => queue.push(h),
                        Some(_) => {}
                    }
                }
            }
        }
        Some(truth)
    }

    fn solve_dpll(&self) -> Option<Vec<bool>> {
        Dpll::new(self)?.run()
    }
}

struct Dpll<'a> {
    clauses: &'a [Vec<u32>],
    // Per clause, the positions of its two watched literals.
    watched: Vec<[usize; 2]>,
    watches: Vec<Vec<usize>>,
    value: Vec<Option<bool>>,
    trail: Vec<u32>,
    head: usize,
    // (trail length before the decision, decision literal, already flipped)
    decisions: Vec<(usize, u32, bool)>,
    next_var: usize,
}

impl<'a> Dpll<'a> {
    fn new(p: &'a Problem) -> Option<Self> {
        let mut s = Dpll {
            clauses: &p.clauses,
            watched: vec![[0, 0]; p.clauses.len()],
            watches: vec![Vec::new(); 2 * p.num_vars],
            value: vec![None; p.num_vars],
            trail: Vec::new(),
            head: 0,
            decisions: Vec::new(),
            next_var: 0,
        };
        for (ci, c) in p.clauses.iter().enumerate() {
            match c.len() {
                0 => return None,
                1 => {
                    if !s.enqueue(c[0]) {
                        return None;
                    }
                }
                _ => {
                    s.watched[ci] = [0, 1];
                    s.watches[c[0] as usize].push(ci);
                    s.watches[c[1] as usize].push(ci);
                }
            }
        }
        Some(s)
    }

    fn lit_value(&self, l: u32) -> Option<bool> {
        self.value[lit_var(l)].map(|v| v == lit_positive(l))
    }

    /// Assigns `l` true; false if it is already false.
    fn enqueue(&mut self, l: u32) -> bool {
        match self.lit_value(l) {
            Some(v) => v,
            None => {
                self.value[lit_var(l)] = Some(lit_positive(l));
                self.trail.push(l);
                true
            }
        }
    }

    /// Unit propagation; false on conflict.
    fn propagate(&mut self) -> bool {
        while self.head < self.trail.len() {
            let falsified = self.trail[self.head] ^ 1;
            self.head += 1;
            let mut watchers = std::mem::take(&mut self.watches[falsified as usize]);
            let mut i = 0;
            let mut ok = true;
            while i < watchers.len() {
                let ci = watchers[i];
                let c = &self.clauses[ci];
                let [a, b] = self.watched[ci];
                let (me, other) = if c[a] == falsified { (0, b) } else { (1, a) };
                if self.lit_value(c[other]) == Some(true) {
                    i += 1;
                    continue;
                }
                let replacement = (0..c.len())
                    .find(|&k| k != a && k != b && self.lit_value(c[k]) != Some(false));
                if let Some(k) = replacement {
                    self.watched[ci][me] = k;
                    self.watches[c[k] as usize].push(ci);
                    watchers.swap_remove(i);
                    continue;
                }
                i += 1;
                if !self.enqueue(c[other]) {
                    ok = false;
                    break;
                }
            }
            self.watches[falsified as usize].extend(watchers);
            if !ok {
                return false;
            }
        }
        true
    }

    fn backtrack(&mut self) -> bool {
        while let Some((mark, lit, flipped)) = self.decisions.pop() {
            for l in self.trail.drain(mark..) {
                self.value[lit_var(l)] = None;
            }
            self.head = mark;
            self.next_var = self.next_var.min(lit_var(lit));
            if !flipped {
                self.decisions.push((mark, lit ^ 1, true));
                self.enqueue(lit ^ 1);
                return true;
            }
        }
        false
    }

    fn run(mut self) -> Option<Vec<bool>> {
        loop {
            if !self.propagate() {
                if !self.backtrack() {
                    return None;
                }
                continue;
            }
            while self.next_var < self.value.len() && self.value[self.next_var].is_some() {
                self.next_var += 1;
            }
            if self.next_var == self.value.len() {
                return Some(self.value.iter().map(|v| v.unwrap_or(false)).collect());
            }
            let lit = (self.next_var as u32) << 1;
            self.decisions.push((self.trail.len(), lit, false));
            self.enqueue(lit);
        }
    }
}
