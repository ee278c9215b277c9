//! Control constructs and their execution over a host graph.

use std::collections::HashMap;

use crate::host::HostGraph;
use crate::matcher::{apply, find_match, AnchorOrder, ApplyError, MatchStats};
use crate::rule::Rule;

/// Default per-loop iteration cap.
pub const DEFAULT_MAX_ITERS: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_MAX_ITERS`].
pub const MAX_ITERS_ENV: &str = "RG_MAX_ITERS";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    RuleCall(String),
    RuleSet(Vec<String>),
    ProcCall(String),
    Seq(Vec<Command>),
    /// `body!`
    Loop(Box<Command>),
    Try(Box<Command>, Box<Command>, Box<Command>),
    If(Box<Command>, Box<Command>, Box<Command>),
    Break,
    Fail,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecStatus {
    Success,
    Failure,
    Break,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("`{0}` is declared more than once")]
    Duplicate(String),
    #[error("no `Main` procedure")]
    MissingMain,
    #[error("call to undeclared rule `{0}`")]
    UnknownRule(String),
    #[error("call to undeclared procedure `{0}`")]
    UnknownProc(String),
    #[error("recursive procedure call: {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("`break` in the condition of `{0}`")]
    BreakInCondition(&'static str),
    #[error("`break` outside a loop in `{0}`")]
    BreakOutsideLoop(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("loop exceeded {cap} iterations")]
    Divergence { cap: u64 },
    #[error("rule `{rule}` failed to apply: {source}")]
    Apply { rule: String, source: ApplyError },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExecConfig {
    pub max_iters: u64,
    pub anchor_order: AnchorOrder,
}

impl Default for ExecConfig {
    /// Reads the loop cap from `RG_MAX_ITERS` when set.
    fn default() -> Self {
        let max_iters = std::env::var(MAX_ITERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_MAX_ITERS);
        ExecConfig {
            max_iters,
            anchor_order: AnchorOrder::default(),
        }
    }
}

/// Counters for one or more runs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecStats {
    pub matching: MatchStats,
    /// Applications per rule, indexed like [`Program::rules`].
    pub per_rule: Vec<u64>,
}

impl ExecStats {
    pub fn for_program(p: &Program) -> Self {
        ExecStats {
            matching: MatchStats::default(),
            per_rule: vec![0; p.rules.len()],
        }
    }

    pub fn applications(&self) -> u64 {
        self.matching.applications
    }
}

/// Receives a callback after every successful rule application, with the
/// counters as they stand after it.
pub trait Observer {
    fn applied(&mut self, _rule: &Rule, _g: &HostGraph, _stats: &MatchStats) {}
}

/// Observer that ignores everything.
pub struct Silent;

impl Observer for Silent {}

/// Records the name of every applied rule.
#[derive(Clone, Debug, Default)]
pub struct Trace(pub Vec<String>);

impl Observer for Trace {
    fn applied(&mut self, rule: &Rule, _g: &HostGraph, _stats: &MatchStats) {
        self.0.push(rule.name().to_string());
    }
}

#[derive(Clone, Debug)]
enum Exec {
    Rule(usize),
    RuleSet(Vec<usize>),
    Proc(usize),
    Seq(Vec<Exec>),
    Loop(Box<Exec>),
    Try(Box<Exec>, Box<Exec>, Box<Exec>),
    If(Box<Exec>, Box<Exec>, Box<Exec>),
    Break,
    Fail,
    Skip,
}

/// A validated program: rules, procedures and a `Main` entry point.
#[derive(Clone, Debug)]
pub struct Program {
    rules: Vec<Rule>,
    rule_index: HashMap<String, usize>,
    procs: Vec<(String, Command)>,
    compiled: Vec<Exec>,
    main: usize,
}

impl Program {
    pub fn new(rules: Vec<Rule>, procs: Vec<(String, Command)>) -> Result<Program, ProgramError> {
        let mut rule_index = HashMap::new();
        for (i, r) in rules.iter().enumerate() {
            if rule_index.insert(r.name().to_string(), i).is_some() {
                return Err(ProgramError::Duplicate(r.name().to_string()));
            }
        }
        let mut proc_index = HashMap::new();
        for (i, (name, _)) in procs.iter().enumerate() {
            if rule_index.contains_key(name) || proc_index.insert(name.clone(), i).is_some() {
                return Err(ProgramError::Duplicate(name.clone()));
            }
        }
        let main = *proc_index.get("Main").ok_or(ProgramError::MissingMain)?;
        let compiled = procs
            .iter()
            .map(|(_, c)| compile(c, &rule_index, &proc_index))
            .collect::<Result<Vec<_>, _>>()?;
        let p = Program {
            rules,
            rule_index,
            procs,
            compiled,
            main,
        };
        p.check_calls(main, &mut vec![main])?;
        p.check_breaks(&p.procs[main].1, "Main", false, None)?;
        Ok(p)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rule_index.get(name).map(|&i| &self.rules[i])
    }

    pub fn rule_position(&self, name: &str) -> Option<usize> {
        self.rule_index.get(name).copied()
    }

    /// Procedures in declaration order, `Main` included.
    pub fn procedures(&self) -> &[(String, Command)] {
        &self.procs
    }

    /// Rejects procedure cycles reachable from `at`; `stack` is the call path.
    fn check_calls(&self, at: usize, stack: &mut Vec<usize>) -> Result<(), ProgramError> {
        let mut callees = Vec::new();
        collect_calls(&self.compiled[at], &mut callees);
        for c in callees {
            if let Some(pos) = stack.iter().position(|&s| s == c) {
                let mut cycle: Vec<String> = stack[pos..].iter().map(|&i| self.procs[i].0.clone()).collect();
                cycle.push(self.procs[c].0.clone());
                return Err(ProgramError::Recursion(cycle));
            }
            stack.push(c);
            self.check_calls(c, stack)?;
            stack.pop();
        }
        Ok(())
    }

    /// `cond` names the construct whose condition encloses `c`, if any.
    fn check_breaks(
        &self,
        c: &Command,
        proc: &str,
        in_loop: bool,
        cond: Option<&'static str>,
    ) -> Result<(), ProgramError> {
        match c {
            Command::Break => match cond {
                Some(kw) => Err(ProgramError::BreakInCondition(kw)),
                None if !in_loop => Err(ProgramError::BreakOutsideLoop(proc.to_string())),
                None => Ok(()),
            },
            Command::Seq(cs) => cs.iter().try_for_each(|c| self.check_breaks(c, proc, in_loop, cond)),
            Command::Loop(b) => self.check_breaks(b, proc, true, None),
            Command::Try(t, p, q) | Command::If(t, p, q) => {
                let kw = if matches!(c, Command::Try(..)) { "try" } else { "if" };
                self.check_breaks(t, proc, in_loop, Some(kw))?;
                self.check_breaks(p, proc, in_loop, cond)?;
                self.check_breaks(q, proc, in_loop, cond)
            }
            Command::ProcCall(name) => {
                let i = self.procs.iter().position(|(n, _)| n == name).expect("resolved");
                self.check_breaks(&self.procs[i].1, name, in_loop, cond)
            }
            _ => Ok(()),
        }
    }

    /// Runs `Main` on `g` with fresh counters.
    pub fn run(&self, g: &mut HostGraph, cfg: &ExecConfig) -> Result<(ExecStatus, ExecStats), ExecError> {
        let mut stats = ExecStats::for_program(self);
        let st = self.run_with(g, cfg, &mut stats, &mut Silent)?;
        Ok((st, stats))
    }

    /// Runs `Main`, adding to `stats` and reporting applications to `obs`.
    /// On error every open journal scope is committed, leaving the graph as
    /// it was when execution stopped.
    pub fn run_with(
        &self,
        g: &mut HostGraph,
        cfg: &ExecConfig,
        stats: &mut ExecStats,
        obs: &mut dyn Observer,
    ) -> Result<ExecStatus, ExecError> {
        if stats.per_rule.len() != self.rules.len() {
            stats.per_rule.resize(self.rules.len(), 0);
        }
        let mut m = Machine {
            p: self,
            g,
            cfg,
            stats,
            obs,
        };
        let r = m.exec(&self.compiled[self.main]);
        if r.is_err() {
            m.g.commit_all();
        }
        r
    }
}

fn compile(
    c: &Command,
    rules: &HashMap<String, usize>,
    procs: &HashMap<String, usize>,
) -> Result<Exec, ProgramError> {
    let rule = |n: &String| rules.get(n).copied().ok_or_else(|| ProgramError::UnknownRule(n.clone()));
    let sub = |c: &Command| compile(c, rules, procs).map(Box::new);
    Ok(match c {
        Command::RuleCall(n) => Exec::Rule(rule(n)?),
        Command::RuleSet(ns) => Exec::RuleSet(ns.iter().map(rule).collect::<Result<_, _>>()?),
        Command::ProcCall(n) => Exec::Proc(*procs.get(n).ok_or_else(|| ProgramError::UnknownProc(n.clone()))?),
        Command::Seq(cs) => Exec::Seq(cs.iter().map(|c| compile(c, rules, procs)).collect::<Result<_, _>>()?),
        Command::Loop(b) => Exec::Loop(sub(b)?),
        Command::Try(c, p, q) => Exec::Try(sub(c)?, sub(p)?, sub(q)?),
        Command::If(c, p, q) => Exec::If(sub(c)?, sub(p)?, sub(q)?),
        Command::Break => Exec::Break,
        Command::Fail => Exec::Fail,
        Command::Skip => Exec::Skip,
    })
}

fn collect_calls(e: &Exec, out: &mut Vec<usize>) {
    match e {
        Exec::Proc(i) => out.push(*i),
        Exec::Seq(cs) => cs.iter().for_each(|c| collect_calls(c, out)),
        Exec::Loop(b) => collect_calls(b, out),
        Exec::Try(c, p, q) | Exec::If(c, p, q) => {
            collect_calls(c, out);
            collect_calls(p, out);
            collect_calls(q, out);
        }
        _ => {}
    }
}

struct Machine<'a> {
    p: &'a Program,
    g: &'a mut HostGraph,
    cfg: &'a ExecConfig,
    stats: &'a mut ExecStats,
    obs: &'a mut dyn Observer,
}

impl Machine<'_> {
    fn call_rule(&mut self, i: usize) -> Result<bool, ExecError> {
        let rule = &self.p.rules[i];
        let Some(m) = find_match(rule, self.g, &mut self.stats.matching, self.cfg.anchor_order) else {
            return Ok(false);
        };
        apply(rule, &m, self.g).map_err(|source| ExecError::Apply {
            rule: rule.name().to_string(),
            source,
        })?;
        self.stats.matching.applications += 1;
        self.stats.per_rule[i] += 1;
        self.obs.applied(rule, self.g, &self.stats.matching);
        Ok(true)
    }

    fn exec(&mut self, e: &Exec) -> Result<ExecStatus, ExecError> {
        use ExecStatus::*;
        Ok(match e {
            Exec::Rule(i) => {
                if self.call_rule(*i)? {
                    Success
                } else {
                    Failure
                }
            }
            Exec::RuleSet(is) => {
                let mut st = Failure;
                for &i in is {
                    if self.call_rule(i)? {
                        st = Success;
                        break;
                    }
                }
                st
            }
            Exec::Proc(i) => self.exec(&self.p.compiled[*i])?,
            Exec::Seq(cs) => {
                for c in cs {
                    let st = self.exec(c)?;
                    if st != Success {
                        return Ok(st);
                    }
                }
                Success
            }
            Exec::Loop(body) => {
                let mut iters = 0u64;
                loop {
                    if iters == self.cfg.max_iters {
                        return Err(ExecError::Divergence { cap: self.cfg.max_iters });
                    }
                    iters += 1;
                    let t = self.g.begin_scope();
                    match self.exec(body)? {
                        Success => self.g.commit_scope(t).expect("scopes nest"),
                        Failure => {
                            self.g.rollback_scope(t).expect("scopes nest");
                            break Success;
                        }
                        Break => {
                            self.g.commit_scope(t).expect("scopes nest");
                            break Success;
                        }
                    }
                }
            }
            Exec::Try(c, p, q) => {
                let t = self.g.begin_scope();
                match self.exec(c)? {
                    Failure => {
                        self.g.rollback_scope(t).expect("scopes nest");
                        self.exec(q)?
                    }
                    Success => {
                        self.g.commit_scope(t).expect("scopes nest");
                        self.exec(p)?
                    }
                    Break => {
                        self.g.commit_scope(t).expect("scopes nest");
                        Break
                    }
                }
            }
            Exec::If(c, p, q) => {
                let t = self.g.begin_scope();
                let st = self.exec(c)?;
                self.g.rollback_scope(t).expect("scopes nest");
                match st {
                    Success => self.exec(p)?,
                    Failure => self.exec(q)?,
                    Break => Break,
                }
            }
            Exec::Break => Break,
            Exec::Fail => Failure,
            Exec::Skip => Success,
        })
    }
}
