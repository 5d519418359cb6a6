//! Command interpreter shared by the interactive prompt and script runner.
//!
//! Every answer starts with one `key=value` line meant for scripts, followed
//! by a line of prose. Errors are reported as `error: ...` and map to a
//! distinct exit status per kind.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::evidence::{BeliefState, Evidence, EvidenceItem, Mode};
use crate::formula::{parse, AtomId, Formula, Vocabulary};
use crate::kb::{compile, is_consistent, parse_rules, CompiledKb, KbError, Rule};
use crate::oracle::{self, rule_atoms, WorldTable};
use crate::rank::{query, QueryResult, Rank};
use crate::revise::{self, NestedError, NestedOutcome, RevisionOutcome};
use crate::sat::SatCounter;

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub strict: bool,
    pub oracle: bool,
    pub verify: bool,
    pub trace_sat: bool,
    pub max_atoms: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            strict: false,
            oracle: false,
            verify: false,
            trace_sat: false,
            max_atoms: oracle::DEFAULT_MAX_ATOMS,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommandError {
    #[error("unknown command {0:?} (try 'help')")]
    Unknown(String),
    #[error("{0}")]
    Parse(String),
    #[error("no compiled knowledge base (use 'load' and 'compile', or 'load-compiled')")]
    NotCompiled,
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
    #[error("oracle divergence: {0}")]
    OracleDivergence(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Unknown(_) => 2,
            CommandError::Parse(_) => 3,
            CommandError::NotCompiled => 4,
            CommandError::Io(_) => 5,
            CommandError::Failed(_) => 6,
            CommandError::OracleDivergence(_) => 7,
        }
    }
}

impl From<crate::formula::ParseError> for CommandError {
    fn from(e: crate::formula::ParseError) -> Self {
        CommandError::Parse(e.to_string())
    }
}

impl From<KbError> for CommandError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Parse(_) | KbError::Syntax(_) | KbError::Line { .. } | KbError::DeltaOutOfRange(_) => {
                CommandError::Parse(e.to_string())
            }
            other => CommandError::Failed(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub quit: bool,
}

impl Output {
    fn text(text: String) -> Self {
        Output { text, quit: false }
    }
}

pub struct Session {
    config: SessionConfig,
    vocab: Vocabulary,
    kb_path: Option<PathBuf>,
    rules: Vec<Rule>,
    state: Option<BeliefState>,
    last: SatCounter,
    total: SatCounter,
}

const HELP: &str = "\
commands:
  load <file>                         read a rule file (<wff> -> <wff> [: delta] per line)
  compile                             compute rule priorities
  consistent                          check the loaded rules for consistency
  priorities                          list rules with priorities
  kappa <wff>                         rank of a formula in the current belief state
  query <wff> |~ <wff>                graded entailment from a hard context (ignores evidence)
  observe J|L <wff> <level|inf>       record a soft evidence report
  observe-partition <wff>:<level> [; <wff>:<level>]*
  believe <wff>                       belief strength in the current state
  beliefs <wff> [, <wff>]*            which candidates are believed
  retract-evidence                    drop all evidence
  evidence                            list the evidence chain
  add-rule <wff> -> <wff> [: delta]   add a rule and recompile
  accepts <wff> |~ <wff>              Ramsey test on the current rule base
  nested (<wff> -> <wff> [: d]) ? <wff> |~ <wff>
  entrenchment                        rules grouped by priority
  worlds                              enumerate worlds with their ranks
  save <file> / load-compiled <file>  persist compiled priorities
  satcount                            satisfiability call counters
  help, quit";

impl Session {
    pub fn new(config: SessionConfig) -> Self {
        Session {
            config,
            vocab: Vocabulary::new(),
            kb_path: None,
            rules: Vec::new(),
            state: None,
            last: SatCounter::new(),
            total: SatCounter::new(),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn kb_path(&self) -> Option<&Path> {
        self.kb_path.as_deref()
    }

    pub fn state(&self) -> Option<&BeliefState> {
        self.state.as_ref()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    /// Counters of the most recent command (other than `satcount`).
    pub fn last_counter(&self) -> SatCounter {
        self.last
    }

    pub fn total_counter(&self) -> SatCounter {
        self.total
    }

    /// Executes one command line.
    pub fn run_command(&mut self, line: &str) -> Result<Output, CommandError> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(Output::default());
        }
        let (cmd, rest) = match line.split_once(char::is_whitespace) {
            Some((c, r)) => (c, r.trim()),
            None => (line, ""),
        };
        if cmd == "satcount" {
            return Ok(Output::text(format!(
                "total_calls={} horn_path_calls={} last_total_calls={} last_horn_path_calls={}\n\
                 {} satisfiability calls so far ({} on the Horn path); last command made {}\n",
                self.total.total_calls,
                self.total.horn_path_calls,
                self.last.total_calls,
                self.last.horn_path_calls,
                self.total.total_calls,
                self.total.horn_path_calls,
                self.last.total_calls,
            )));
        }
        let mut counter = SatCounter::new();
        let result = self.dispatch(cmd, rest, &mut counter);
        self.last = counter;
        self.total.absorb(counter);
        let mut out = result?;
        if self.config.trace_sat {
            let _ = writeln!(
                out.text,
                "sat total_calls={} horn_path_calls={}",
                counter.total_calls, counter.horn_path_calls
            );
        }
        Ok(out)
    }

    fn dispatch(
        &mut self,
        cmd: &str,
        rest: &str,
        counter: &mut SatCounter,
    ) -> Result<Output, CommandError> {
        let text = match cmd {
            "help" => format!("{HELP}\n"),
            "quit" | "exit" => return Ok(Output { text: String::new(), quit: true }),
            "load" => self.load(rest)?,
            "compile" => self.compile(counter)?,
            "consistent" => {
                let rules = self.current_rules();
                let ok = is_consistent(&rules, counter);
                format!(
                    "consistent={ok} sat_calls={}\n{}\n",
                    counter.total_calls,
                    if ok { "consistent" } else { "inconsistent" }
                )
            }
            "priorities" => {
                let kb = self.kb()?;
                let mut s = String::new();
                for e in kb.entries() {
                    let _ = writeln!(
                        s,
                        "z_plus={} delta={} index={} rule={} -> {}",
                        e.z_plus,
                        e.rule.delta,
                        e.rule.index,
                        e.rule.antecedent.display(&self.vocab),
                        e.rule.consequent.display(&self.vocab)
                    );
                }
                let _ = writeln!(s, "{} rules", kb.len());
                s
            }
            "kappa" => {
                let f = self.formula(rest)?;
                let state = self.belief_state()?;
                let k = state.state_kappa(&f, counter);
                let mut s = format!("kappa={k} sat_calls={}\n{k}\n", counter.total_calls);
                self.cross_check(&mut s, |t| oracle::oracle_kappa(t, &f).map(|r| (r, k)), &[&f])?;
                s
            }
            "query" => {
                let (ctx, target) = self.entailment(rest)?;
                let kb = self.kb()?.clone();
                let r = query(&kb, &ctx, &target, counter)
                    .map_err(|e| CommandError::Failed(e.to_string()))?;
                let mut s = answer(&r, counter);
                let (pro, con) = (
                    Formula::and(ctx.clone(), target.clone()),
                    Formula::and(ctx.clone(), Formula::not(target.clone())),
                );
                // hard context: compare against the table without evidence
                self.cross_check_base(&mut s, &r, &pro, &con)?;
                s
            }
            "observe" => self.observe(rest, counter)?,
            "observe-partition" => self.observe_partition(rest, counter)?,
            "believe" => {
                let f = self.formula(rest)?;
                let r = self.belief_state()?.believes(&f, counter);
                let mut s = answer(&r, counter);
                let neg = Formula::not(f.clone());
                self.cross_check(
                    &mut s,
                    |t| {
                        let pro = oracle::oracle_kappa(t, &f)?;
                        let con = oracle::oracle_kappa(t, &neg)?;
                        Ok((QueryResult::from_ranks(pro, con), Some(r)))
                    },
                    &[&f],
                )?;
                s
            }
            "beliefs" => {
                let candidates = rest
                    .split(',')
                    .map(|t| self.formula(t))
                    .collect::<Result<Vec<_>, _>>()?;
                let state = self.belief_state()?.clone();
                let set = revise::belief_set(&state, &candidates, counter);
                let mut s = String::new();
                for (f, strength) in &set {
                    let _ = writeln!(s, "belief={} strength={strength}", f.display(&self.vocab));
                }
                let _ = writeln!(
                    s,
                    "{} of {} candidates believed (sat_calls={})",
                    set.len(),
                    candidates.len(),
                    counter.total_calls
                );
                s
            }
            "retract-evidence" => {
                let state = self.belief_state()?.retract();
                self.state = Some(state);
                "chain=0\nevidence cleared\n".to_string()
            }
            "evidence" => {
                let state = self.belief_state()?;
                let mut s = format!("chain={}\n", state.chain_len());
                for (i, e) in state.chain().enumerate() {
                    let _ = writeln!(s, "{}: {}", i + 1, e.display(&self.vocab));
                }
                s
            }
            "add-rule" => self.add_rule(rest, counter)?,
            "accepts" => {
                let (a, b) = self.entailment(rest)?;
                let kb = self.kb()?.clone();
                let (ok, strength) = revise::accepts_conditional(&kb, &a, &b, counter)
                    .map_err(|e| CommandError::Failed(e.to_string()))?;
                format!(
                    "accepted={ok} strength={strength} sat_calls={}\n{}, strength {strength}\n",
                    counter.total_calls,
                    if ok { "accepted" } else { "not accepted" }
                )
            }
            "nested" => self.nested(rest, counter)?,
            "entrenchment" => {
                let kb = self.kb()?;
                let mut s = String::new();
                for (z, rules) in revise::entrenchment(kb) {
                    let shown: Vec<String> =
                        rules.iter().map(|r| r.display(&self.vocab).to_string()).collect();
                    let _ = writeln!(s, "z_plus={z} rules={}", shown.join("; "));
                }
                let _ = writeln!(s, "{} rules", kb.len());
                s
            }
            "worlds" => {
                let table = self.world_table(&[])?;
                let mut s = format!("worlds={}\n", table.len());
                s.push_str(&table.render(&self.vocab));
                s
            }
            "save" => {
                let kb = self.kb()?;
                std::fs::write(path_arg(rest)?, kb.to_text())
                    .map_err(|e| CommandError::Io(format!("{rest}: {e}")))?;
                format!("saved={} rules\nsaved {} rules to {rest}\n", kb.len(), kb.len())
            }
            "load-compiled" => {
                let text = std::fs::read_to_string(path_arg(rest)?)
                    .map_err(|e| CommandError::Io(format!("{rest}: {e}")))?;
                let mut vocab = Vocabulary::new();
                let kb = CompiledKb::from_text(&text, &mut vocab)?;
                if self.config.verify {
                    kb.verify(counter)?;
                }
                let n = kb.len();
                self.vocab = vocab;
                self.rules = kb.rules();
                self.kb_path = Some(PathBuf::from(rest));
                self.state = Some(BeliefState::new(Arc::new(kb)));
                format!(
                    "loaded={n} verified={}\nloaded {n} compiled rules from {rest}\n",
                    self.config.verify
                )
            }
            _ => return Err(CommandError::Unknown(cmd.to_string())),
        };
        Ok(Output::text(text))
    }

    fn load(&mut self, rest: &str) -> Result<String, CommandError> {
        let path = path_arg(rest)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CommandError::Io(format!("{rest}: {e}")))?;
        let mut vocab = Vocabulary::new();
        let rules = parse_rules(&text, &mut vocab)?;
        self.vocab = vocab;
        self.rules = rules;
        self.kb_path = Some(PathBuf::from(rest));
        self.state = None;
        Ok(String::new())
    }

    fn compile(&mut self, counter: &mut SatCounter) -> Result<String, CommandError> {
        let kb = compile(&self.rules, &self.vocab, counter)?;
        let n = kb.len();
        self.state = Some(BeliefState::new(Arc::new(kb)));
        Ok(format!(
            "compiled={n} sat_calls={} horn_path_calls={}\ncompiled {n} rules\n",
            counter.total_calls, counter.horn_path_calls
        ))
    }

    fn current_rules(&self) -> Vec<Rule> {
        self.rules.clone()
    }

    fn kb(&self) -> Result<&CompiledKb, CommandError> {
        self.state.as_ref().map(|s| s.kb().as_ref()).ok_or(CommandError::NotCompiled)
    }

    fn belief_state(&self) -> Result<&BeliefState, CommandError> {
        self.state.as_ref().ok_or(CommandError::NotCompiled)
    }

    fn formula(&mut self, text: &str) -> Result<Formula, CommandError> {
        Ok(parse(text, &mut self.vocab)?)
    }

    fn entailment(&mut self, text: &str) -> Result<(Formula, Formula), CommandError> {
        let (a, b) = text
            .split_once("|~")
            .ok_or_else(|| CommandError::Parse("expected '<wff> |~ <wff>'".into()))?;
        Ok((self.formula(a)?, self.formula(b)?))
    }

    fn observe(&mut self, rest: &str, counter: &mut SatCounter) -> Result<String, CommandError> {
        let usage = || CommandError::Parse("expected 'observe J|L <wff> <level|inf>'".into());
        let (mode, body) = rest.split_once(char::is_whitespace).ok_or_else(usage)?;
        let mode = match mode {
            "J" | "j" => Mode::J,
            "L" | "l" => Mode::L,
            _ => return Err(usage()),
        };
        let (wff, level) = body.trim().rsplit_once(char::is_whitespace).ok_or_else(usage)?;
        let level = parse_level(level)?;
        let formula = self.formula(wff)?;
        let state = self.belief_state()?;
        let item = EvidenceItem { mode, formula, level };
        let next = state
            .observe(item, counter)
            .map_err(|e| CommandError::Failed(e.to_string()))?;
        self.state = Some(next);
        Ok(self.recorded(counter))
    }

    fn observe_partition(
        &mut self,
        rest: &str,
        counter: &mut SatCounter,
    ) -> Result<String, CommandError> {
        let mut cells = Vec::new();
        for part in rest.split(';') {
            let (wff, level) = part.rsplit_once(':').ok_or_else(|| {
                CommandError::Parse(format!("expected '<wff>:<level>', got {:?}", part.trim()))
            })?;
            cells.push((self.formula(wff)?, parse_level(level.trim())?));
        }
        let next = self
            .belief_state()?
            .observe_partition(cells, counter)
            .map_err(|e| CommandError::Failed(e.to_string()))?;
        self.state = Some(next);
        Ok(self.recorded(counter))
    }

    fn recorded(&self, counter: &SatCounter) -> String {
        let state = self.state.as_ref().unwrap();
        let last = state.chain().last().unwrap();
        format!(
            "chain={} sat_calls={}\nrecorded {}\n",
            state.chain_len(),
            counter.total_calls,
            last.display(&self.vocab)
        )
    }

    fn add_rule(&mut self, rest: &str, counter: &mut SatCounter) -> Result<String, CommandError> {
        let mut vocab = self.vocab.clone();
        let rule = Rule::parse(rest, &mut vocab, 0)?;
        let kb = self.kb()?.clone();
        self.vocab = vocab;
        match revise::add_rule(&kb, rule, &self.vocab, counter)? {
            RevisionOutcome::Accepted(new_kb) => {
                let n = new_kb.len();
                self.rules = new_kb.rules();
                self.state = Some(BeliefState::new(Arc::new(new_kb)));
                Ok(format!(
                    "status=accepted rules={n} sat_calls={}\naccepted; recompiled {n} rules, evidence cleared\n",
                    counter.total_calls
                ))
            }
            RevisionOutcome::Inconsistent => Ok(format!(
                "status=inconsistent sat_calls={}\nrejected: the extended rule base is inconsistent\n",
                counter.total_calls
            )),
        }
    }

    fn nested(&mut self, rest: &str, counter: &mut SatCounter) -> Result<String, CommandError> {
        let usage =
            || CommandError::Parse("expected 'nested (<wff> -> <wff> [: d]) ? <wff> |~ <wff>'".into());
        let (premise, conditional) = rest.split_once('?').ok_or_else(usage)?;
        let premise = premise
            .trim()
            .strip_prefix('(')
            .and_then(|p| p.strip_suffix(')'))
            .ok_or_else(usage)?;
        let mut vocab = self.vocab.clone();
        let rule = Rule::parse(premise, &mut vocab, 0)?;
        self.vocab = vocab;
        let (c, d) = self.entailment(conditional)?;
        let kb = self.kb()?.clone();
        let outcome = revise::nested_conditional(&kb, rule, &c, &d, &self.vocab, counter)
            .map_err(|e| match e {
                NestedError::Kb(k) => CommandError::from(k),
                NestedError::Rank(r) => CommandError::Failed(r.to_string()),
            })?;
        let (word, strength) = match outcome {
            NestedOutcome::Holds(s) => ("holds", s.to_string()),
            NestedOutcome::Fails(s) => ("fails", s.to_string()),
            NestedOutcome::PremiseInconsistent => ("premise_inconsistent", "none".into()),
        };
        Ok(format!(
            "nested={word} strength={strength} sat_calls={}\n{}\n",
            counter.total_calls,
            word.replace('_', " ")
        ))
    }

    /// Oracle table for the rule base plus the evidence chain, over every atom
    /// they mention together with `extra`.
    fn world_table(&self, extra: &[&Formula]) -> Result<WorldTable, CommandError> {
        self.table_with(extra, true)
    }

    fn table_with(&self, extra: &[&Formula], with_evidence: bool) -> Result<WorldTable, CommandError> {
        let state = self.belief_state()?;
        let rules = state.kb().rules();
        let mut atoms: Vec<AtomId> = rule_atoms(&rules);
        for e in state.chain() {
            match e {
                Evidence::Item(it) => atoms.extend(it.formula.atoms()),
                Evidence::Partition(cells) => {
                    atoms.extend(cells.iter().flat_map(|(c, _)| c.atoms()))
                }
            }
        }
        for f in extra {
            atoms.extend(f.atoms());
        }
        atoms.sort_unstable();
        atoms.dedup();
        let oracle_err = |e: oracle::OracleError| CommandError::Failed(format!("oracle: {e}"));
        let mut table =
            oracle::oracle_compile(&rules, &atoms, self.config.max_atoms).map_err(oracle_err)?;
        if with_evidence {
            for e in state.chain() {
                table = oracle::oracle_apply(&table, e).map_err(oracle_err)?;
            }
        }
        Ok(table)
    }

    fn cross_check<T: PartialEq + std::fmt::Debug>(
        &self,
        out: &mut String,
        check: impl FnOnce(&WorldTable) -> Result<(T, T), oracle::OracleError>,
        extra: &[&Formula],
    ) -> Result<(), CommandError> {
        if !self.config.oracle {
            return Ok(());
        }
        let table = match self.table_with(extra, true) {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(out, "oracle=skipped ({e})");
                return Ok(());
            }
        };
        let (expected, got) =
            check(&table).map_err(|e| CommandError::Failed(format!("oracle: {e}")))?;
        if expected != got {
            return Err(CommandError::OracleDivergence(format!(
                "oracle {expected:?}, engine {got:?}"
            )));
        }
        out.push_str("oracle=agree\n");
        Ok(())
    }

    fn cross_check_base(
        &self,
        out: &mut String,
        r: &QueryResult,
        pro: &Formula,
        con: &Formula,
    ) -> Result<(), CommandError> {
        if !self.config.oracle {
            return Ok(());
        }
        let table = match self.table_with(&[pro, con], false) {
            Ok(t) => t,
            Err(e) => {
                let _ = writeln!(out, "oracle=skipped ({e})");
                return Ok(());
            }
        };
        let ranks = oracle::oracle_kappa(&table, pro)
            .and_then(|p| Ok((p, oracle::oracle_kappa(&table, con)?)))
            .map_err(|e| CommandError::Failed(format!("oracle: {e}")))?;
        if ranks != (r.kappa_pro, r.kappa_con) {
            return Err(CommandError::OracleDivergence(format!(
                "oracle ranks {:?}, engine {:?}",
                ranks,
                (r.kappa_pro, r.kappa_con)
            )));
        }
        out.push_str("oracle=agree\n");
        Ok(())
    }

    /// Runs commands from `input`, writing answers and errors to `out`.
    /// Returns 0 when every command succeeded, else the status of the first
    /// failure. In strict mode execution stops at that failure.
    pub fn run_lines<R: BufRead, W: Write>(
        &mut self,
        input: R,
        out: &mut W,
        prompt: bool,
    ) -> io::Result<i32> {
        let mut status = 0;
        if prompt {
            write!(out, "> ")?;
            out.flush()?;
        }
        for line in input.lines() {
            let line = line?;
            match self.run_command(&line) {
                Ok(o) => {
                    out.write_all(o.text.as_bytes())?;
                    if o.quit {
                        break;
                    }
                }
                Err(e) => {
                    writeln!(out, "error: {e}")?;
                    if status == 0 {
                        status = e.exit_code();
                    }
                    if self.config.strict {
                        break;
                    }
                }
            }
            if prompt {
                write!(out, "> ")?;
                out.flush()?;
            }
        }
        Ok(status)
    }

    /// Runs a script file line by line. I/O failure opening it is status 5.
    pub fn run_script<W: Write>(&mut self, path: &Path, out: &mut W) -> io::Result<i32> {
        match std::fs::File::open(path) {
            Ok(f) => self.run_lines(io::BufReader::new(f), out, false),
            Err(e) => {
                let err = CommandError::Io(format!("{}: {e}", path.display()));
                writeln!(out, "error: {err}")?;
                Ok(err.exit_code())
            }
        }
    }
}

fn answer(r: &QueryResult, counter: &SatCounter) -> String {
    format!(
        "strength={} verdict={} kappa_pro={} kappa_con={} sat_calls={}\n{}, strength {} (kappa_con={} kappa_pro={})\n",
        r.strength, r.verdict, r.kappa_pro, r.kappa_con, counter.total_calls,
        r.verdict, r.strength, r.kappa_con, r.kappa_pro
    )
}

fn parse_level(s: &str) -> Result<Rank, CommandError> {
    match s {
        "inf" => Ok(Rank::Infinite),
        _ => s
            .parse::<u64>()
            .map(Rank::Finite)
            .map_err(|_| CommandError::Parse(format!("invalid level {s:?}"))),
    }
}

fn path_arg(rest: &str) -> Result<&str, CommandError> {
    if rest.is_empty() {
        Err(CommandError::Parse("missing file name".into()))
    } else {
        Ok(rest)
    }
}
