//! The binary search tree program: shipped variants, running it over an
//! op script, reading the tree back, and checking the output graph.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::host::{HostGraph, Mark, NodeId};
use crate::interp::{Command, ExecConfig, ExecError, ExecStats, ExecStatus, Observer, Program};
use crate::label::{Atom, Label};
use crate::matcher::MatchStats;
use crate::oracle::o_apply;
use crate::rule::Rule;
use crate::text::{build_instruction_graph, parse_program, Op, OpKind, OpScript};

pub const FAITHFUL_SOURCE: &str = include_str!("../../../assets/bst_faithful.gp2");
pub const SANITIZED_SOURCE: &str = include_str!("../../../assets/bst_sanitized.gp2");

/// Which version of the program to run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BstVariant {
    /// Rules and procedures exactly as drawn.
    Faithful,
    /// Clears leftover roots and guards duplicate inserts, absent deletes and
    /// empty trees.
    #[default]
    Sanitized,
}

impl BstVariant {
    pub const ALL: [BstVariant; 2] = [BstVariant::Faithful, BstVariant::Sanitized];

    pub fn name(self) -> &'static str {
        match self {
            BstVariant::Faithful => "faithful",
            BstVariant::Sanitized => "sanitized",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            BstVariant::Faithful => FAITHFUL_SOURCE,
            BstVariant::Sanitized => SANITIZED_SOURCE,
        }
    }
}

impl fmt::Display for BstVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BstVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "faithful" => Ok(BstVariant::Faithful),
            "sanitized" => Ok(BstVariant::Sanitized),
            _ => Err(format!("unknown variant `{s}` (expected faithful or sanitized)")),
        }
    }
}

/// The parsed program for `v`.
pub fn program(v: BstVariant) -> &'static Program {
    static CELLS: [OnceLock<Program>; 2] = [OnceLock::new(), OnceLock::new()];
    CELLS[v as usize].get_or_init(|| parse_program(v.source()).expect("shipped program parses"))
}

/// The program for `v` with `Main` reduced to its loop, for continuing on a
/// graph that already holds the green node and a tree.
pub fn resume_program(v: BstVariant) -> &'static Program {
    static CELLS: [OnceLock<Program>; 2] = [OnceLock::new(), OnceLock::new()];
    CELLS[v as usize].get_or_init(|| {
        let p = program(v);
        let procs = p
            .procedures()
            .iter()
            .map(|(name, body)| {
                let body = match (name.as_str(), body) {
                    ("Main", Command::Seq(cs)) => cs.last().expect("Main has a loop").clone(),
                    _ => body.clone(),
                };
                (name.clone(), body)
            })
            .collect();
        Program::new(p.rules().to_vec(), procs).expect("reduced program is valid")
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct KNode {
    key: i64,
    left: Option<u32>,
    right: Option<u32>,
}

/// A binary tree of integer keys, stored in preorder so that structural
/// equality is plain vector equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct KeyTree {
    nodes: Vec<KNode>,
}

/// Position of a node inside a [`KeyTree`].
pub type KeyPos = usize;

impl KeyTree {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a tree from any linked representation, given its top and a
    /// function returning `(key, left, right)` for a node.
    pub fn build<T: Copy>(top: Option<T>, node: impl Fn(T) -> (i64, Option<T>, Option<T>)) -> KeyTree {
        let mut nodes: Vec<KNode> = Vec::new();
        // (source node, parent position, is right child)
        let mut stack: Vec<(T, Option<usize>, bool)> = top.into_iter().map(|t| (t, None, false)).collect();
        while let Some((t, parent, right)) = stack.pop() {
            let i = nodes.len();
            let (key, l, r) = node(t);
            nodes.push(KNode {
                key,
                left: None,
                right: None,
            });
            if let Some(p) = parent {
                if right {
                    nodes[p].right = Some(i as u32);
                } else {
                    nodes[p].left = Some(i as u32);
                }
            }
            if let Some(r) = r {
                stack.push((r, Some(i), true));
            }
            if let Some(l) = l {
                stack.push((l, Some(i), false));
            }
        }
        KeyTree { nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn top(&self) -> Option<KeyPos> {
        (!self.nodes.is_empty()).then_some(0)
    }

    pub fn key(&self, p: KeyPos) -> i64 {
        self.nodes[p].key
    }

    pub fn left(&self, p: KeyPos) -> Option<KeyPos> {
        self.nodes[p].left.map(|i| i as usize)
    }

    pub fn right(&self, p: KeyPos) -> Option<KeyPos> {
        self.nodes[p].right.map(|i| i as usize)
    }

    pub fn keys_in_order(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = Vec::new();
        let mut cur = self.top();
        while cur.is_some() || !stack.is_empty() {
            while let Some(c) = cur {
                stack.push(c);
                cur = self.left(c);
            }
            let c = stack.pop().expect("non-empty");
            out.push(self.key(c));
            cur = self.right(c);
        }
        out
    }

    /// Number of nodes on the longest top-to-leaf path.
    pub fn height(&self) -> usize {
        let mut best = 0;
        let mut stack: Vec<(KeyPos, usize)> = self.top().map(|t| (t, 1)).into_iter().collect();
        while let Some((p, d)) = stack.pop() {
            best = best.max(d);
            stack.extend(self.left(p).map(|c| (c, d + 1)));
            stack.extend(self.right(p).map(|c| (c, d + 1)));
        }
        best
    }

    /// Keys strictly increase in order.
    pub fn is_search_tree(&self) -> bool {
        self.keys_in_order().windows(2).all(|w| w[0] < w[1])
    }
}

impl fmt::Display for KeyTree {
    /// `()` for the empty tree; otherwise `(k)`, `(k (l))`, `(k () (r))` or
    /// `(k (l) (r))`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        enum Item {
            Open(KeyPos),
            Text(&'static str),
        }
        let Some(top) = self.top() else {
            return f.write_str("()");
        };
        let mut stack = vec![Item::Open(top)];
        while let Some(it) = stack.pop() {
            match it {
                Item::Text(s) => f.write_str(s)?,
                Item::Open(p) => {
                    write!(f, "({}", self.key(p))?;
                    stack.push(Item::Text(")"));
                    match (self.left(p), self.right(p)) {
                        (None, None) => {}
                        (Some(l), None) => {
                            stack.push(Item::Open(l));
                            stack.push(Item::Text(" "));
                        }
                        (l, Some(r)) => {
                            stack.push(Item::Open(r));
                            stack.push(Item::Text(" "));
                            match l {
                                Some(l) => stack.push(Item::Open(l)),
                                None => stack.push(Item::Text("()")),
                            }
                            stack.push(Item::Text(" "));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed tree text at byte {0}")]
pub struct TreeSyntaxError(pub usize);

impl FromStr for KeyTree {
    type Err = TreeSyntaxError;

    /// Parses the format written by `Display`.
    fn from_str(s: &str) -> Result<Self, TreeSyntaxError> {
        // parse into a linked arena first, then normalise to preorder
        let b = s.as_bytes();
        let mut i = 0;
        let skip_ws = |i: &mut usize| {
            while *i < b.len() && b[*i].is_ascii_whitespace() {
                *i += 1;
            }
        };
        let mut arena: Vec<(i64, Option<usize>, Option<usize>)> = Vec::new();
        // each open node with the number of child slots already filled
        let mut open: Vec<(usize, u8)> = Vec::new();
        let mut top = None;
        let mut done = false;
        loop {
            skip_ws(&mut i);
            if i == b.len() {
                break;
            }
            if done {
                return Err(TreeSyntaxError(i));
            }
            match b[i] {
                b'(' => {
                    i += 1;
                    skip_ws(&mut i);
                    if b.get(i) == Some(&b')') {
                        i += 1;
                        // empty subtree: only as a whole tree or a left placeholder
                        match open.last_mut() {
                            None => done = true,
                            Some((_, filled @ 0)) => *filled = 1,
                            Some(_) => return Err(TreeSyntaxError(i - 1)),
                        }
                        continue;
                    }
                    let start = i;
                    if b.get(i) == Some(&b'-') {
                        i += 1;
                    }
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                    let key: i64 = s[start..i].parse().map_err(|_| TreeSyntaxError(start))?;
                    let id = arena.len();
                    arena.push((key, None, None));
                    match open.last_mut() {
                        None => top = Some(id),
                        Some((p, filled)) => {
                            match *filled {
                                0 => arena[*p].1 = Some(id),
                                1 => arena[*p].2 = Some(id),
                                _ => return Err(TreeSyntaxError(start)),
                            }
                            *filled += 1;
                        }
                    }
                    open.push((id, 0));
                }
                b')' => {
                    i += 1;
                    let Some((id, filled)) = open.pop() else {
                        return Err(TreeSyntaxError(i - 1));
                    };
                    // a `()` placeholder must be followed by a right child
                    if filled == 1 && arena[id].1.is_none() {
                        return Err(TreeSyntaxError(i - 1));
                    }
                    if open.is_empty() {
                        done = true;
                    }
                }
                _ => return Err(TreeSyntaxError(i)),
            }
        }
        if !open.is_empty() || (!done && top.is_none()) {
            return Err(TreeSyntaxError(b.len()));
        }
        Ok(KeyTree::build(top, |n| arena[n]))
    }
}

/// Why a graph does not encode a tree.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MalformedTree {
    #[error("no green node")]
    NoGreen,
    #[error("{0} green nodes")]
    SeveralGreen(usize),
    #[error("the green node points at {0} tree nodes")]
    GreenChildren(usize),
    #[error("node {0} has more than two children")]
    TooManyChildren(NodeId),
    #[error("both children of node {0} lie on the same side of its key")]
    SameSide(NodeId),
    #[error("node {0} has a child with its own key")]
    EqualKey(NodeId),
    #[error("node {0} does not carry a single integer key")]
    NotInt(NodeId),
    #[error("node {0} is reachable twice")]
    Shared(NodeId),
}

fn green_node(g: &HostGraph) -> Result<NodeId, MalformedTree> {
    let greens: Vec<NodeId> = g.nodes_with_mark(Some(Mark::Green)).collect();
    match greens.as_slice() {
        [] => Err(MalformedTree::NoGreen),
        [one] => Ok(*one),
        many => Err(MalformedTree::SeveralGreen(many.len())),
    }
}

/// Grey targets of unmarked out-edges: the tree children of a node.
fn tree_children(g: &HostGraph, n: NodeId) -> Vec<NodeId> {
    let rec = g.node(n).expect("live node");
    rec.out_edges()
        .iter()
        .map(|&e| g.edge(e).expect("live edge"))
        .filter(|e| e.mark().is_none())
        .map(|e| e.tgt())
        .filter(|&t| g.node(t).is_some_and(|r| r.mark() == Some(Mark::Grey)))
        .collect()
}

fn tree_key(g: &HostGraph, n: NodeId) -> Result<i64, MalformedTree> {
    g.node(n)
        .and_then(|r| r.label().as_int())
        .ok_or(MalformedTree::NotInt(n))
}

/// Reads the tree hanging off the green node. Children are told apart by
/// comparing their keys with their parent's.
pub fn extract_tree(g: &HostGraph) -> Result<KeyTree, MalformedTree> {
    let green = green_node(g)?;
    let top = match tree_children(g, green).as_slice() {
        [] => return Ok(KeyTree::empty()),
        [t] => *t,
        many => return Err(MalformedTree::GreenChildren(many.len())),
    };
    let mut shape: HashMap<NodeId, (i64, Option<NodeId>, Option<NodeId>)> = HashMap::new();
    let mut stack = vec![top];
    while let Some(n) = stack.pop() {
        if shape.contains_key(&n) {
            return Err(MalformedTree::Shared(n));
        }
        let key = tree_key(g, n)?;
        let kids = tree_children(g, n);
        if kids.len() > 2 {
            return Err(MalformedTree::TooManyChildren(n));
        }
        let (mut left, mut right) = (None, None);
        for &c in &kids {
            let ck = tree_key(g, c)?;
            let slot = match ck.cmp(&key) {
                std::cmp::Ordering::Less => &mut left,
                std::cmp::Ordering::Greater => &mut right,
                std::cmp::Ordering::Equal => return Err(MalformedTree::EqualKey(n)),
            };
            if slot.replace(c).is_some() {
                return Err(MalformedTree::SameSide(n));
            }
            stack.push(c);
        }
        shape.insert(n, (key, left, right));
    }
    Ok(KeyTree::build(Some(top), |n| shape[&n]))
}

/// Instruction nodes (unmarked) in list order, starting from the node with
/// no incoming list edge.
pub fn instruction_chain(g: &HostGraph) -> Vec<NodeId> {
    let is_instr = |n: NodeId| g.node(n).is_some_and(|r| r.mark().is_none());
    let next = |n: NodeId| {
        g.node(n).and_then(|r| {
            r.out_edges()
                .iter()
                .map(|&e| g.edge(e).expect("live edge"))
                .find(|e| e.mark().is_none() && is_instr(e.tgt()))
                .map(|e| e.tgt())
        })
    };
    let mut has_pred = HashSet::new();
    for (id, _) in g.nodes_with_mark(None).map(|n| (n, ())) {
        if let Some(t) = next(id) {
            has_pred.insert(t);
        }
    }
    let Some(head) = g.nodes_with_mark(None).find(|n| !has_pred.contains(n)) else {
        return Vec::new();
    };
    let mut chain = vec![head];
    let mut seen: HashSet<NodeId> = chain.iter().copied().collect();
    while let Some(n) = next(*chain.last().expect("non-empty")) {
        if !seen.insert(n) {
            break;
        }
        chain.push(n);
    }
    chain
}

fn instruction_of(label: &Label) -> Option<Op> {
    match label.atoms() {
        [Atom::Str(tag), Atom::Int(key)] => OpKind::from_tag(tag).map(|kind| Op { kind, key: *key }),
        _ => None,
    }
}

/// A search that produced a dashed edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SearchHit {
    /// Position of the search in the op list.
    pub op: usize,
    pub key: i64,
    pub target: NodeId,
}

/// Dashed edges leaving search instructions, in op order.
pub fn search_hits(g: &HostGraph) -> Vec<SearchHit> {
    let mut hits = Vec::new();
    for (i, n) in instruction_chain(g).into_iter().enumerate() {
        let rec = g.node(n).expect("live node");
        let Some(op) = instruction_of(rec.label()) else { continue };
        if op.kind != OpKind::Search {
            continue;
        }
        for &e in rec.out_edges() {
            let e = g.edge(e).expect("live edge");
            if e.mark() == Some(Mark::Dashed) {
                hits.push(SearchHit {
                    op: i,
                    key: op.key,
                    target: e.tgt(),
                });
            }
        }
    }
    hits
}

/// Marked nodes, other than the green node, that the tree no longer reaches.
pub fn garbage_nodes(g: &HostGraph) -> Vec<NodeId> {
    let mut reach = HashSet::new();
    let mut stack: Vec<NodeId> = g.nodes_with_mark(Some(Mark::Green)).collect();
    while let Some(n) = stack.pop() {
        if reach.insert(n) {
            stack.extend(tree_children(g, n));
        }
    }
    g.nodes()
        .filter(|(id, r)| r.mark().is_some() && !reach.contains(id))
        .map(|(id, _)| id)
        .collect()
}

pub fn garbage_count(g: &HostGraph) -> usize {
    garbage_nodes(g).len()
}

/// Outcome of running the program over an op script.
#[derive(Clone, Debug)]
pub struct BstRunResult {
    pub status: ExecStatus,
    pub graph: HostGraph,
    pub tree: Result<KeyTree, MalformedTree>,
    pub search_hits: Vec<SearchHit>,
    pub garbage_count: usize,
    /// Counter deltas per loop iteration of `Main`, split at each `next_op`.
    /// The first entry also covers `make_root`. Maxima are run-wide.
    pub per_op: Vec<MatchStats>,
    pub stats: ExecStats,
    /// Applied rule names, when requested.
    pub trace: Option<Vec<String>>,
}

struct OpSplitter {
    last: MatchStats,
    per_op: Vec<MatchStats>,
    trace: Option<Vec<String>>,
}

impl Observer for OpSplitter {
    fn applied(&mut self, rule: &Rule, _g: &HostGraph, stats: &MatchStats) {
        if let Some(t) = &mut self.trace {
            t.push(rule.name().to_string());
        }
        if rule.name() == "next_op" {
            self.per_op.push(stats.since(&self.last));
            self.last = *stats;
        }
    }
}

pub fn run_bst(ops: &OpScript, variant: BstVariant) -> Result<BstRunResult, ExecError> {
    run_bst_with(ops, variant, &ExecConfig::default(), false)
}

pub fn run_bst_with(
    ops: &OpScript,
    variant: BstVariant,
    cfg: &ExecConfig,
    trace: bool,
) -> Result<BstRunResult, ExecError> {
    run_program(program(variant), ops, cfg, trace)
}

/// Like [`run_bst_with`] for any program over the same graph encoding.
pub fn run_program(p: &Program, ops: &OpScript, cfg: &ExecConfig, trace: bool) -> Result<BstRunResult, ExecError> {
    let mut g = build_instruction_graph(ops);
    let mut stats = ExecStats::for_program(p);
    let mut obs = OpSplitter {
        last: MatchStats::default(),
        per_op: Vec::new(),
        trace: trace.then(Vec::new),
    };
    let status = p.run_with(&mut g, cfg, &mut stats, &mut obs)?;
    if !ops.0.is_empty() {
        obs.per_op.push(stats.matching.since(&obs.last));
    }
    Ok(BstRunResult {
        status,
        tree: extract_tree(&g),
        search_hits: search_hits(&g),
        garbage_count: garbage_count(&g),
        graph: g,
        per_op: obs.per_op,
        stats,
        trace: obs.trace,
    })
}

/// First disagreement between a run and the reference implementation: the
/// status, the final tree, or the outcome of a search.
pub fn oracle_mismatch(r: &BstRunResult, ops: &OpScript) -> Option<String> {
    if r.status != ExecStatus::Success {
        return Some(format!("program ended with {:?}", r.status));
    }
    let (oracle, outcomes) = o_apply(ops);
    let expected = oracle.to_key_tree();
    match &r.tree {
        Err(e) => return Some(format!("tree is malformed: {e}")),
        Ok(t) if *t != expected => return Some(format!("tree {t} differs from the reference tree {expected}")),
        Ok(_) => {}
    }
    for (i, op) in ops.0.iter().enumerate() {
        if op.kind != OpKind::Search {
            continue;
        }
        let hits: Vec<&SearchHit> = r.search_hits.iter().filter(|h| h.op == i).collect();
        if hits.len() > 1 {
            return Some(format!("search {} at op {i} has {} dashed edges", op.key, hits.len()));
        }
        if hits.is_empty() == outcomes[i] {
            let (got, want) = if outcomes[i] { ("missed", "present") } else { ("hit", "absent") };
            return Some(format!("search {} at op {i}: {got} but the key is {want}", op.key));
        }
        if let Some(h) = hits.first() {
            let label = r.graph.node(h.target).map(|n| n.label().as_int());
            if label != Some(Some(op.key)) {
                return Some(format!("search {} at op {i} points at node {}", op.key, h.target));
            }
        }
    }
    None
}

/// Findings about a final graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub notes: Vec<String>,
    pub garbage: usize,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            writeln!(f, "ok: no violations")?;
        }
        for v in &self.violations {
            writeln!(f, "violation: {v}")?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        writeln!(f, "garbage nodes: {}", self.garbage)
    }
}

/// Checks the shape of a final graph for `ops` and compares the tree and
/// search results with the reference implementation.
pub fn validate_output(g: &HostGraph, ops: &OpScript) -> ValidationReport {
    let mut r = ValidationReport {
        garbage: garbage_count(g),
        ..Default::default()
    };
    let chain = instruction_chain(g);
    let instr_count = g.nodes_with_mark(None).count();
    if ops.0.is_empty() {
        if instr_count == 0 {
            r.notes.push("no instruction list".into());
        } else {
            r.violations.push(format!("{instr_count} unmarked nodes but no instructions were given"));
        }
    } else {
        let listed: Vec<Option<Op>> = chain
            .iter()
            .map(|&n| instruction_of(g.node(n).expect("live").label()))
            .collect();
        let expected: Vec<Option<Op>> = ops.0.iter().copied().map(Some).collect();
        if listed != expected || chain.len() != instr_count {
            r.violations.push("instruction list is not intact".into());
        }
        if let Some(&tail) = chain.last() {
            if !g.node(tail).expect("live").rooted() {
                r.violations.push("the last instruction is not rooted".into());
            }
        }
    }
    let tail = chain.last().copied();
    for n in g.roots() {
        if Some(n) == tail {
            continue;
        }
        let rec = g.node(n).expect("live");
        let what = match rec.mark() {
            None => "instruction".to_string(),
            Some(m) => m.keyword().to_string(),
        };
        r.violations.push(format!("stale root on {what} node {n} labelled {}", rec.label()));
    }
    match green_node(g) {
        Ok(gr) if g.node(gr).expect("live").rooted() => r.violations.push("the green node is rooted".into()),
        Ok(_) => {}
        Err(e) => r.violations.push(e.to_string()),
    }
    for (id, e) in g.edges() {
        if e.mark() != Some(Mark::Dashed) {
            continue;
        }
        let src = instruction_of(g.node(e.src()).expect("live").label());
        if !matches!(src, Some(Op { kind: OpKind::Search, .. })) {
            r.violations.push(format!("dashed edge {id} does not leave a search instruction"));
        }
    }
    let tree = match extract_tree(g) {
        Ok(t) => {
            if !t.is_search_tree() {
                r.violations.push(format!("tree {t} is not ordered"));
            }
            Some(t)
        }
        Err(e) => {
            r.violations.push(format!("tree is malformed: {e}"));
            None
        }
    };
    let (oracle, outcomes) = o_apply(ops);
    let expected = oracle.to_key_tree();
    if let Some(t) = tree {
        if t != expected {
            r.violations.push(format!("tree {t} differs from the reference tree {expected}"));
        }
    }
    let hits: HashSet<usize> = search_hits(g).iter().map(|h| h.op).collect();
    for (i, op) in ops.0.iter().enumerate() {
        if op.kind == OpKind::Search && hits.contains(&i) != outcomes[i] {
            r.violations.push(format!(
                "search {} at op {i}: {} but the key is {}",
                op.key,
                if hits.contains(&i) { "hit" } else { "missed" },
                if outcomes[i] { "present" } else { "absent" },
            ));
        }
    }
    if r.garbage > 0 {
        r.notes.push(format!("{} nodes are disconnected from the tree", r.garbage));
    }
    r
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreloadError {
    #[error("key {0} appears twice")]
    DuplicateKey(i64),
}

/// A tree state that accepts one operation at a time. Each operation runs
/// one iteration of `Main`'s loop, which is what a full run spends on it.
#[derive(Clone, Debug)]
pub struct BstSession {
    variant: BstVariant,
    graph: HostGraph,
    tail: Option<NodeId>,
    cfg: ExecConfig,
}

/// Counters for one operation run through a [`BstSession`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpRun {
    pub status: ExecStatus,
    pub stats: ExecStats,
}

impl BstSession {
    /// An empty tree: just the green node.
    pub fn new(variant: BstVariant) -> Self {
        let mut graph = HostGraph::new();
        graph
            .add_node(Label::empty(), Some(Mark::Green), false)
            .expect("fresh node");
        BstSession {
            variant,
            graph,
            tail: None,
            cfg: ExecConfig::default(),
        }
    }

    /// The state a full run of the inserts `keys` ends in, built directly
    /// without running rules.
    pub fn preload(variant: BstVariant, keys: &[i64]) -> Result<Self, PreloadError> {
        let ops = OpScript(keys.iter().map(|&k| Op::insert(k)).collect());
        let mut g = build_instruction_graph(&ops);
        let green = g
            .add_node(Label::empty(), Some(Mark::Green), false)
            .expect("fresh node");
        // (key, node, left, right) per inserted key
        let mut tree: Vec<(i64, NodeId, Option<usize>, Option<usize>)> = Vec::with_capacity(keys.len());
        for &k in keys {
            let n = g.add_node(Label::int(k), Some(Mark::Grey), false).expect("fresh node");
            if tree.is_empty() {
                g.add_edge(green, n, Label::empty(), None).expect("live endpoints");
                tree.push((k, n, None, None));
                continue;
            }
            let mut cur = 0;
            loop {
                let (ck, cn, l, r) = tree[cur];
                if k == ck {
                    return Err(PreloadError::DuplicateKey(k));
                }
                let next = if k < ck { l } else { r };
                match next {
                    Some(c) => cur = c,
                    None => {
                        let id = tree.len();
                        if k < ck {
                            tree[cur].2 = Some(id);
                        } else {
                            tree[cur].3 = Some(id);
                        }
                        g.add_edge(cn, n, Label::empty(), None).expect("live endpoints");
                        tree.push((k, n, None, None));
                        break;
                    }
                }
            }
        }
        let tail = (!keys.is_empty()).then(|| NodeId(keys.len() as u32 - 1));
        if let Some(t) = tail {
            g.set_root(NodeId(0), false).expect("live");
            g.set_root(t, true).expect("live");
        }
        Ok(BstSession {
            variant,
            graph: g,
            tail,
            cfg: ExecConfig::default(),
        })
    }

    pub fn with_config(mut self, cfg: ExecConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn variant(&self) -> BstVariant {
        self.variant
    }

    pub fn graph(&self) -> &HostGraph {
        &self.graph
    }

    /// Room for `ops` more operations, so that timing them excludes growing
    /// the graph's storage.
    pub fn reserve(&mut self, ops: usize) {
        self.graph.reserve(2 * ops, 4 * ops);
    }

    pub fn tree(&self) -> Result<KeyTree, MalformedTree> {
        extract_tree(&self.graph)
    }

    /// Appends the instruction for `op` and moves the list root onto it.
    pub fn stage(&mut self, op: Op) {
        let g = &mut self.graph;
        let n = g
            .add_node(Label::tagged(op.kind.tag(), op.key), None, self.tail.is_none())
            .expect("fresh node");
        if let Some(t) = self.tail {
            g.add_edge(t, n, Label::empty(), None).expect("live endpoints");
            g.set_root(t, false).expect("live");
            g.set_root(n, true).expect("live");
        }
        self.tail = Some(n);
    }

    /// Runs the staged instruction.
    pub fn run_staged(&mut self) -> Result<OpRun, ExecError> {
        let p = resume_program(self.variant);
        let mut stats = ExecStats::for_program(p);
        let status = p.run_with(&mut self.graph, &self.cfg, &mut stats, &mut crate::interp::Silent)?;
        Ok(OpRun { status, stats })
    }

    pub fn apply(&mut self, op: Op) -> Result<OpRun, ExecError> {
        self.stage(op);
        self.run_staged()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::parse_opscript;

    fn ops(s: &str) -> OpScript {
        parse_opscript(&s.replace('/', "\n")).unwrap()
    }

    #[test]
    fn both_programs_parse() {
        assert_eq!(program(BstVariant::Faithful).rules().len(), 22);
        assert_eq!(program(BstVariant::Faithful).procedures().len(), 7);
        assert_eq!(program(BstVariant::Sanitized).rules().len(), 23);
        assert_eq!(program(BstVariant::Sanitized).procedures().len(), 7);
    }

    #[test]
    fn key_tree_text() {
        for s in ["()", "(5)", "(5 (2))", "(5 () (7))", "(5 (2 (1) (4)) (7 () (8)))"] {
            let t: KeyTree = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        let t: KeyTree = "(5 (2 (1) (4)) (7 () (8)))".parse().unwrap();
        assert_eq!(t.keys_in_order(), vec![1, 2, 4, 5, 7, 8]);
        assert_eq!(t.height(), 3);
        assert!(t.is_search_tree());
        for bad in ["(", "(5", "(5))", "(5 ())", "(5 () ())", "(5 (1) (2) (3))", "x", "() ()"] {
            assert!(bad.parse::<KeyTree>().is_err(), "{bad}");
        }
    }

    #[test]
    fn example_tree_is_built() {
        let r = run_bst(&ops("i 5/i 2/i 7/i 1/i 4/i 8"), BstVariant::Sanitized).unwrap();
        assert_eq!(r.status, ExecStatus::Success);
        assert_eq!(r.tree.unwrap().to_string(), "(5 (2 (1) (4)) (7 () (8)))");
        assert_eq!(r.per_op.len(), 6);
    }

    #[test]
    fn search_leaves_a_dashed_edge() {
        let r = run_bst(&ops("i 5/s 5"), BstVariant::Sanitized).unwrap();
        assert_eq!(r.search_hits.len(), 1);
        let hit = r.search_hits[0];
        assert_eq!((hit.op, hit.key), (1, 5));
        assert_eq!(r.graph.node(hit.target).unwrap().label().as_int(), Some(5));
    }

    #[test]
    fn empty_script_leaves_the_green_node() {
        let r = run_bst(&OpScript::default(), BstVariant::Sanitized).unwrap();
        assert_eq!(r.graph.node_count(), 1);
        assert_eq!(r.graph.nodes_with_mark(Some(Mark::Green)).count(), 1);
        assert!(r.tree.unwrap().is_empty());
        let rep = validate_output(&r.graph, &OpScript::default());
        assert!(rep.is_clean(), "{rep}");
        assert!(rep.notes.iter().any(|n| n.contains("no instruction list")));
    }

    #[test]
    fn extraction_errors() {
        let mut g = HostGraph::new();
        assert_eq!(extract_tree(&g), Err(MalformedTree::NoGreen));
        let green = g.add_node(Label::empty(), Some(Mark::Green), false).unwrap();
        assert_eq!(extract_tree(&g), Ok(KeyTree::empty()));
        let top = g.add_node(Label::int(5), Some(Mark::Grey), false).unwrap();
        g.add_edge(green, top, Label::empty(), None).unwrap();
        let a = g.add_node(Label::int(1), Some(Mark::Grey), false).unwrap();
        let b = g.add_node(Label::int(2), Some(Mark::Grey), false).unwrap();
        g.add_edge(top, a, Label::empty(), None).unwrap();
        g.add_edge(top, b, Label::empty(), None).unwrap();
        assert_eq!(extract_tree(&g), Err(MalformedTree::SameSide(top)));
    }

    #[test]
    fn faithful_stale_root_is_reported() {
        let script = ops("i 5/s 5/i 3");
        let r = run_bst(&script, BstVariant::Faithful).unwrap();
        let rep = validate_output(&r.graph, &script);
        assert!(rep.violations.iter().any(|v| v.contains("stale root on grey")), "{rep}");
        assert!(rep.violations.iter().any(|v| v.contains("malformed")), "{rep}");
        let clean = run_bst(&script, BstVariant::Sanitized).unwrap();
        let rep = validate_output(&clean.graph, &script);
        assert!(rep.is_clean(), "{rep}");
    }

    #[test]
    fn preload_matches_an_engine_run() {
        let keys = [50, 20, 70, 10, 30, 60, 80, 25, 27, 26];
        for v in BstVariant::ALL {
            let script = OpScript(keys.iter().map(|&k| Op::insert(k)).collect());
            let engine = run_bst(&script, v).unwrap().graph;
            let direct = BstSession::preload(v, &keys).unwrap();
            assert!(direct.graph().identical(&engine), "{v}");
        }
        assert_eq!(
            BstSession::preload(BstVariant::Sanitized, &[1, 1]).unwrap_err(),
            PreloadError::DuplicateKey(1)
        );
    }

    #[test]
    fn session_agrees_with_full_runs() {
        let script = ops("i 5/i 2/i 7/i 1/i 4/i 8/s 4/d 5/s 5/i 5/d 2");
        let full = run_bst(&script, BstVariant::Sanitized).unwrap();
        let mut s = BstSession::new(BstVariant::Sanitized);
        for &op in &script.0 {
            let run = s.apply(op).unwrap();
            assert_eq!(run.status, ExecStatus::Success);
        }
        assert_eq!(s.tree(), full.tree);
    }
}
