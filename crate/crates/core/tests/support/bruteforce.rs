//! Exhaustive matcher used as a reference for the search-plan matcher.
//!
//! Rules are generated as plain descriptions, printed as rule text for the
//! engine, and matched here by enumerating every injective morphism.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rootbst_core::{find_match, parse_rule, AnchorOrder, EdgeId, HostGraph, Label, Mark, MatchStats, NodeId, Rule};
use rootbst_core::{Atom, Match};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GMark {
    Unmarked,
    Mark(Mark),
    Any,
}

impl GMark {
    fn admits(self, m: Option<Mark>) -> bool {
        match self {
            GMark::Unmarked => m.is_none(),
            GMark::Mark(x) => m == Some(x),
            GMark::Any => m.is_some(),
        }
    }

    fn text(self) -> String {
        match self {
            GMark::Unmarked => String::new(),
            GMark::Mark(m) => format!(" # {}", m.keyword()),
            GMark::Any => " # any".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GItem {
    Const(i64),
    /// Integer variable by index into `INT_VARS`.
    Int(usize),
    /// List variable by index into `LIST_VARS`.
    List(usize),
}

const INT_VARS: [&str; 2] = ["a", "b"];
const LIST_VARS: [&str; 2] = ["x", "y"];

#[derive(Clone, Debug)]
pub struct GNode {
    pub rooted: bool,
    pub mark: GMark,
    pub label: Vec<GItem>,
    pub kept: bool,
    /// Root flag on the right-hand side, when kept.
    pub rhs_rooted: bool,
}

#[derive(Clone, Debug)]
pub struct GEdge {
    pub src: usize,
    pub tgt: usize,
    pub mark: GMark,
    pub label: Vec<GItem>,
    pub kept: bool,
}

#[derive(Clone, Debug)]
pub enum GCond {
    OutDeg(usize, i64),
    InDeg(usize, i64),
    Less(usize, usize),
}

#[derive(Clone, Debug)]
pub struct GRule {
    pub nodes: Vec<GNode>,
    pub edges: Vec<GEdge>,
    pub cond: Option<GCond>,
    /// Root flags of nodes created by the rule.
    pub new_nodes: Vec<bool>,
}

fn label_text(items: &[GItem]) -> String {
    if items.is_empty() {
        return "empty".into();
    }
    items
        .iter()
        .map(|it| match it {
            GItem::Const(c) => c.to_string(),
            GItem::Int(v) => INT_VARS[*v].to_string(),
            GItem::List(v) => LIST_VARS[*v].to_string(),
        })
        .collect::<Vec<_>>()
        .join(":")
}

impl GRule {
    fn int_vars_used(&self) -> BTreeSet<usize> {
        self.labels()
            .flatten()
            .filter_map(|it| match it {
                GItem::Int(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    fn labels(&self) -> impl Iterator<Item = &Vec<GItem>> {
        self.nodes.iter().map(|n| &n.label).chain(self.edges.iter().map(|e| &e.label))
    }

    pub fn to_text(&self) -> String {
        let mut decls = Vec::new();
        let ints: Vec<&str> = INT_VARS.to_vec();
        let lists: Vec<&str> = LIST_VARS.to_vec();
        decls.push(format!("{}:int", ints.join(",")));
        decls.push(format!("{}:list", lists.join(",")));
        let node = |i: usize, n: &GNode, rooted: bool| {
            format!(
                "(n{i}{}, {}{})",
                if rooted { "(R)" } else { "" },
                label_text(&n.label),
                n.mark.text()
            )
        };
        let edge = |i: usize, e: &GEdge| {
            format!("(e{i}, n{}, n{}, {}{})", e.src, e.tgt, label_text(&e.label), e.mark.text())
        };
        let lhs_nodes: Vec<String> = self.nodes.iter().enumerate().map(|(i, n)| node(i, n, n.rooted)).collect();
        let lhs_edges: Vec<String> = self.edges.iter().enumerate().map(|(i, e)| edge(i, e)).collect();
        let rhs_nodes: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kept)
            .map(|(i, n)| node(i, n, n.rhs_rooted))
            .chain(
                self.new_nodes
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| format!("(n{}{}, empty # grey)", 10 + k, if r { "(R)" } else { "" })),
            )
            .collect();
        let rhs_edges: Vec<String> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kept)
            .map(|(i, e)| edge(i, e))
            .collect();
        let iface: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kept)
            .map(|(i, _)| format!("n{i}"))
            .collect();
        let cond = match &self.cond {
            None => String::new(),
            Some(GCond::OutDeg(n, k)) => format!(" where outdeg(n{n}) = {k}"),
            Some(GCond::InDeg(n, k)) => format!(" where indeg(n{n}) = {k}"),
            Some(GCond::Less(a, b)) => format!(" where {} < {}", INT_VARS[*a], INT_VARS[*b]),
        };
        format!(
            "r({}) [ {} | {} ] => [ {} | {} ] interface = {{{}}}{}",
            decls.join("; "),
            lhs_nodes.join(" "),
            lhs_edges.join(" "),
            rhs_nodes.join(" "),
            rhs_edges.join(" "),
            iface.join(", "),
            cond
        )
    }

    pub fn compile(&self) -> Rule {
        let text = self.to_text();
        parse_rule(&text).unwrap_or_else(|e| panic!("generated rule does not load: {e}\n{text}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Val {
    Int(i64),
    List(Vec<Atom>),
}

type Binding = HashMap<(bool, usize), Val>;

fn bind(b: &mut Binding, key: (bool, usize), v: Val) -> bool {
    match b.get(&key) {
        Some(old) => *old == v,
        None => {
            b.insert(key, v);
            true
        }
    }
}

fn match_item(it: GItem, atom: &Atom, b: &mut Binding) -> bool {
    match (it, atom) {
        (GItem::Const(c), Atom::Int(x)) => c == *x,
        (GItem::Int(v), Atom::Int(x)) => bind(b, (false, v), Val::Int(*x)),
        _ => false,
    }
}

/// Label matching written independently of the engine's unifier.
fn match_label(items: &[GItem], label: &Label, b: &mut Binding) -> bool {
    let atoms = label.atoms();
    match items.iter().position(|i| matches!(i, GItem::List(_))) {
        None => items.len() == atoms.len() && items.iter().zip(atoms).all(|(&i, a)| match_item(i, a, b)),
        Some(p) => {
            let tail = items.len() - p - 1;
            if atoms.len() < items.len() - 1 {
                return false;
            }
            let mid_end = atoms.len() - tail;
            let GItem::List(v) = items[p] else { unreachable!() };
            items[..p].iter().zip(&atoms[..p]).all(|(&i, a)| match_item(i, a, b))
                && items[p + 1..].iter().zip(&atoms[mid_end..]).all(|(&i, a)| match_item(i, a, b))
                && bind(b, (true, v), Val::List(atoms[p..mid_end].to_vec()))
        }
    }
}

fn injective_node_maps(k: usize, hosts: &[NodeId], out: &mut Vec<Vec<NodeId>>, cur: &mut Vec<NodeId>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for &h in hosts {
        if !cur.contains(&h) {
            cur.push(h);
            injective_node_maps(k, hosts, out, cur);
            cur.pop();
        }
    }
}

fn edge_maps(r: &GRule, g: &HostGraph, nm: &[NodeId], i: usize, cur: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
    if i == r.edges.len() {
        out.push(cur.clone());
        return;
    }
    let pe = &r.edges[i];
    for (id, e) in g.edges() {
        if e.src() == nm[pe.src] && e.tgt() == nm[pe.tgt] && pe.mark.admits(e.mark()) && !cur.contains(&id) {
            cur.push(id);
            edge_maps(r, g, nm, i + 1, cur, out);
            cur.pop();
        }
    }
}

/// Whether the given node and edge images form a match of `r` in `g`.
pub fn is_match(r: &GRule, g: &HostGraph, nm: &[NodeId], em: &[EdgeId]) -> bool {
    if nm.len() != r.nodes.len() || em.len() != r.edges.len() {
        return false;
    }
    let distinct_nodes: BTreeSet<_> = nm.iter().collect();
    let distinct_edges: BTreeSet<_> = em.iter().collect();
    if distinct_nodes.len() != nm.len() || distinct_edges.len() != em.len() {
        return false;
    }
    let mut b = Binding::new();
    for (p, &h) in r.nodes.iter().zip(nm) {
        let Some(rec) = g.node(h) else { return false };
        if rec.rooted() != p.rooted || !p.mark.admits(rec.mark()) || !match_label(&p.label, rec.label(), &mut b) {
            return false;
        }
    }
    for (p, &h) in r.edges.iter().zip(em) {
        let Some(rec) = g.edge(h) else { return false };
        if rec.src() != nm[p.src]
            || rec.tgt() != nm[p.tgt]
            || !p.mark.admits(rec.mark())
            || !match_label(&p.label, rec.label(), &mut b)
        {
            return false;
        }
    }
    // dangling: every edge at a deleted node must be matched
    for (p, &h) in r.nodes.iter().zip(nm) {
        if p.kept {
            continue;
        }
        let all_matched = g
            .edges()
            .filter(|(_, e)| e.src() == h || e.tgt() == h)
            .all(|(id, _)| em.contains(&id));
        if !all_matched {
            return false;
        }
    }
    let count = |f: &dyn Fn(&rootbst_core::host::EdgeRec) -> bool| g.edges().filter(|(_, e)| f(e)).count() as i64;
    match r.cond {
        None => true,
        Some(GCond::OutDeg(n, k)) => count(&|e| e.src() == nm[n]) == k,
        Some(GCond::InDeg(n, k)) => count(&|e| e.tgt() == nm[n]) == k,
        Some(GCond::Less(x, y)) => match (b.get(&(false, x)), b.get(&(false, y))) {
            (Some(Val::Int(x)), Some(Val::Int(y))) => x < y,
            _ => false,
        },
    }
}

/// Number of matches of `r` in `g`, found by enumeration.
pub fn count_matches(r: &GRule, g: &HostGraph) -> usize {
    let hosts: Vec<NodeId> = g.nodes().map(|(id, _)| id).collect();
    let mut maps = Vec::new();
    injective_node_maps(r.nodes.len(), &hosts, &mut maps, &mut Vec::new());
    let mut total = 0;
    for nm in maps {
        let mut ems = Vec::new();
        edge_maps(r, g, &nm, 0, &mut Vec::new(), &mut ems);
        total += ems.iter().filter(|em| is_match(r, g, &nm, em)).count();
    }
    total
}

fn gen_mark(rng: &mut ChaCha8Rng, node: bool) -> GMark {
    match rng.gen_range(0..4) {
        0 => GMark::Unmarked,
        1 => GMark::Any,
        2 if node => GMark::Mark(Mark::Grey),
        2 => GMark::Mark(Mark::Dashed),
        _ if node => GMark::Mark(Mark::Red),
        _ => GMark::Unmarked,
    }
}

fn gen_label(rng: &mut ChaCha8Rng, allow_list: bool) -> Vec<GItem> {
    let one = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            GItem::Const(rng.gen_range(0..3))
        } else {
            GItem::Int(rng.gen_range(0..INT_VARS.len()))
        }
    };
    match rng.gen_range(0..6) {
        0 => Vec::new(),
        1 | 2 => vec![one(rng)],
        3 => vec![one(rng), one(rng)],
        4 if allow_list => vec![GItem::List(rng.gen_range(0..LIST_VARS.len()))],
        _ if allow_list => vec![one(rng), GItem::List(rng.gen_range(0..LIST_VARS.len()))],
        _ => vec![one(rng)],
    }
}

pub fn gen_rule(rng: &mut ChaCha8Rng) -> GRule {
    let n = rng.gen_range(1..=3);
    let mut nodes: Vec<GNode> = (0..n)
        .map(|_| GNode {
            rooted: rng.gen_bool(0.4),
            mark: gen_mark(rng, true),
            label: gen_label(rng, true),
            kept: rng.gen_bool(0.7),
            rhs_rooted: false,
        })
        .collect();
    for n in &mut nodes {
        n.rhs_rooted = if rng.gen_bool(0.3) { !n.rooted } else { n.rooted };
    }
    let m = rng.gen_range(0..=3);
    let mut edges: Vec<GEdge> = (0..m)
        .map(|_| GEdge {
            src: rng.gen_range(0..n),
            tgt: rng.gen_range(0..n),
            mark: gen_mark(rng, false),
            label: gen_label(rng, false),
            kept: false,
        })
        .collect();
    for e in &mut edges {
        e.kept = nodes[e.src].kept && nodes[e.tgt].kept && rng.gen_bool(0.5);
    }
    for n in &mut nodes {
        if n.kept && n.mark == GMark::Any && rng.gen_bool(0.2) {
            n.mark = GMark::Mark(Mark::Grey);
        }
    }
    let new_nodes = (0..rng.gen_range(0..2)).map(|_| rng.gen_bool(0.5)).collect();
    let mut r = GRule {
        nodes,
        edges,
        cond: None,
        new_nodes,
    };
    let used: Vec<usize> = r.int_vars_used().into_iter().collect();
    r.cond = match rng.gen_range(0..4) {
        0 => Some(GCond::OutDeg(rng.gen_range(0..n), rng.gen_range(0..3))),
        1 => Some(GCond::InDeg(rng.gen_range(0..n), rng.gen_range(0..3))),
        2 if used.len() == 2 => Some(GCond::Less(used[0], used[1])),
        _ => None,
    };
    r
}

pub fn gen_host(rng: &mut ChaCha8Rng) -> HostGraph {
    let mut g = HostGraph::new();
    let n = rng.gen_range(1..=6);
    let marks = [None, Some(Mark::Grey), Some(Mark::Red), Some(Mark::Green)];
    let ids: Vec<NodeId> = (0..n)
        .map(|_| {
            let label = match rng.gen_range(0..4) {
                0 => Label::empty(),
                1 | 2 => Label::int(rng.gen_range(0..3)),
                _ => Label::new([Atom::Int(rng.gen_range(0..3)), Atom::Int(rng.gen_range(0..3))]),
            };
            g.add_node(label, marks[rng.gen_range(0..marks.len())], rng.gen_bool(0.4))
                .unwrap()
        })
        .collect();
    for _ in 0..rng.gen_range(0..=8) {
        let s = ids[rng.gen_range(0..n)];
        let t = ids[rng.gen_range(0..n)];
        let label = if rng.gen_bool(0.5) {
            Label::empty()
        } else {
            Label::int(rng.gen_range(0..3))
        };
        let mark = if rng.gen_bool(0.3) { Some(Mark::Dashed) } else { None };
        g.add_edge(s, t, label, mark).unwrap();
    }
    g
}

fn instantiate(items: &[GItem], ints: &[i64], lists: &[Vec<Atom>]) -> Label {
    let mut atoms = Vec::new();
    for it in items {
        match it {
            GItem::Const(c) => atoms.push(Atom::Int(*c)),
            GItem::Int(v) => atoms.push(Atom::Int(ints[*v])),
            GItem::List(v) => atoms.extend(lists[*v].iter().cloned()),
        }
    }
    Label::new(atoms)
}

/// A host that usually contains an image of `r`'s left-hand side, plus
/// noise and an occasional perturbation.
pub fn gen_host_for(r: &GRule, rng: &mut ChaCha8Rng) -> HostGraph {
    if rng.gen_bool(0.3) {
        return gen_host(rng);
    }
    let ints: Vec<i64> = INT_VARS.iter().map(|_| rng.gen_range(0..3)).collect();
    let lists: Vec<Vec<Atom>> = LIST_VARS
        .iter()
        .map(|_| (0..rng.gen_range(0..3)).map(|_| Atom::Int(rng.gen_range(0..3))).collect())
        .collect();
    let concrete = [Mark::Grey, Mark::Red, Mark::Green];
    let mut g = HostGraph::new();
    let mut ids = Vec::new();
    let extra_before = rng.gen_range(0..2);
    for _ in 0..extra_before {
        ids.push(g.add_node(Label::int(rng.gen_range(0..3)), Some(Mark::Grey), rng.gen_bool(0.3)).unwrap());
    }
    let image: Vec<NodeId> = r
        .nodes
        .iter()
        .map(|n| {
            let mark = match n.mark {
                GMark::Unmarked => None,
                GMark::Mark(m) => Some(m),
                GMark::Any => Some(concrete[rng.gen_range(0..concrete.len())]),
            };
            g.add_node(instantiate(&n.label, &ints, &lists), mark, n.rooted).unwrap()
        })
        .collect();
    ids.extend(&image);
    for e in &r.edges {
        let mark = match e.mark {
            GMark::Unmarked => None,
            GMark::Mark(m) => Some(m),
            GMark::Any => Some(Mark::Dashed),
        };
        g.add_edge(image[e.src], image[e.tgt], instantiate(&e.label, &ints, &lists), mark)
            .unwrap();
    }
    for _ in 0..rng.gen_range(0..2) {
        ids.push(g.add_node(Label::empty(), None, rng.gen_bool(0.3)).unwrap());
    }
    for _ in 0..rng.gen_range(0..3) {
        let s = ids[rng.gen_range(0..ids.len())];
        let t = ids[rng.gen_range(0..ids.len())];
        g.add_edge(s, t, Label::empty(), None).unwrap();
    }
    if rng.gen_bool(0.3) {
        let n = ids[rng.gen_range(0..ids.len())];
        match rng.gen_range(0..3) {
            0 => {
                let r = g.node(n).unwrap().rooted();
                g.set_root(n, !r).unwrap();
            }
            1 => g.set_mark(n, None).unwrap(),
            _ => g.set_label(n, Label::int(rng.gen_range(0..3))).unwrap(),
        }
    }
    g
}

/// Outcome of comparing the engine with enumeration over many cases.
#[derive(Debug, Default)]
pub struct Comparison {
    pub cases: usize,
    pub with_match: usize,
    pub disagreements: Vec<String>,
}

/// Runs `count` random cases. The engine must find a match exactly when one
/// exists, and the match it returns must be valid.
pub fn compare(seed: u64, count: usize) -> Comparison {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Comparison::default();
    for case in 0..count {
        let r = gen_rule(&mut rng);
        let g = gen_host_for(&r, &mut rng);
        let rule = r.compile();
        let expected = count_matches(&r, &g);
        for order in [AnchorOrder::RecentFirst, AnchorOrder::Ascending] {
            let found: Option<Match> = find_match(&rule, &g, &mut MatchStats::default(), order);
            let ok = match &found {
                None => expected == 0,
                Some(m) => expected > 0 && is_match(&r, &g, &m.nodes, &m.edges),
            };
            if !ok {
                out.disagreements.push(format!(
                    "case {case} ({order:?}): {} matches by enumeration, engine {}\nrule: {}\nhost: {}",
                    expected,
                    if found.is_some() { "found one" } else { "found none" },
                    r.to_text(),
                    rootbst_core::print_host(&g)
                ));
            }
        }
        out.cases += 1;
        out.with_match += usize::from(expected > 0);
    }
    out
}
