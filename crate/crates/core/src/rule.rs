//! Rule representation and load-time validation.
//!
//! A [`RuleDef`] is the declarative form produced by the parser. Building a
//! [`Rule`] from it checks the structural invariants and precomputes the
//! search plan used by the matcher and the effect lists used on application.

use std::collections::{BTreeSet, HashMap};

use crate::host::Mark;
use crate::label::{Condition, LabelPattern, VarDecl, VarId};

/// Mark constraint on a rule node or edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkPat {
    Unmarked,
    Mark(Mark),
    /// Wildcard: matches any concrete mark (not "unmarked"); on the
    /// right-hand side it keeps the matched mark.
    Any,
}

impl MarkPat {
    pub fn admits(self, mark: Option<Mark>) -> bool {
        match (self, mark) {
            (MarkPat::Unmarked, None) => true,
            (MarkPat::Mark(p), Some(m)) => p == m,
            (MarkPat::Any, Some(_)) => true,
            _ => false,
        }
    }

    fn concrete(self) -> Option<Option<Mark>> {
        match self {
            MarkPat::Unmarked => Some(None),
            MarkPat::Mark(m) => Some(Some(m)),
            MarkPat::Any => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternNode {
    pub id: String,
    pub label: LabelPattern,
    pub mark: MarkPat,
    pub rooted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternEdge {
    pub id: String,
    /// Index into the owning side's node list.
    pub src: usize,
    pub tgt: usize,
    pub label: LabelPattern,
    pub mark: MarkPat,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PatternGraph {
    pub nodes: Vec<PatternNode>,
    pub edges: Vec<PatternEdge>,
}

impl PatternGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }
}

/// A rule as written: declarations, both sides, interface and condition.
/// Degree functions in the condition refer to left-hand node indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleDef {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub lhs: PatternGraph,
    pub rhs: PatternGraph,
    pub interface: Vec<String>,
    pub cond: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rule `{rule}`: variable `{var}` declared twice")]
    DuplicateVar { rule: String, var: String },
    #[error("rule `{rule}`: {side} id `{id}` used twice")]
    DuplicateId { rule: String, side: &'static str, id: String },
    #[error("rule `{rule}`: interface node `{id}` missing from the {side}")]
    InterfaceMissing { rule: String, side: &'static str, id: String },
    #[error("rule `{rule}`: node `{id}` appears on both sides but is not in the interface")]
    NotInInterface { rule: String, id: String },
    #[error("rule `{rule}`: edge `{id}` appears on both sides with different endpoints")]
    EdgeEndpoints { rule: String, id: String },
    #[error("rule `{rule}`: variable `{var}` is used on the right-hand side or in the condition but not on the left")]
    UnboundVar { rule: String, var: String },
    #[error("rule `{rule}`: mark `{mark}` is not allowed on {what} `{id}`")]
    BadMark {
        rule: String,
        what: &'static str,
        id: String,
        mark: &'static str,
    },
    #[error("rule `{rule}`: wildcard mark on right-hand {what} `{id}` needs a wildcard left-hand counterpart")]
    WildcardRhs {
        rule: String,
        what: &'static str,
        id: String,
    },
}

/// Warnings and derived properties reported by [`Rule::new`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub fast: bool,
    pub anchorless: bool,
    pub warnings: Vec<String>,
}

/// One step of the matcher's search plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Step {
    /// Choose a host node for a left-hand node with no matched neighbour.
    /// Rooted nodes draw candidates from the root registry, unrooted nodes
    /// from the mark index.
    Anchor { node: usize, primary: bool },
    /// Follow an out-edge of the host node matched to `from`.
    Out { edge: usize, from: usize, to: usize, bind: bool },
    /// Follow an in-edge of the host node matched to `to`.
    In { edge: usize, to: usize, from: usize, bind: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct KeptNode {
    pub lhs: usize,
    pub relabel: Option<LabelPattern>,
    pub remark: Option<Option<Mark>>,
    pub reroot: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct KeptEdge {
    pub lhs: usize,
    pub relabel: Option<LabelPattern>,
    pub remark: Option<Option<Mark>>,
}

/// Where a right-hand node lives after application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum RhsNode {
    Kept(usize),
    New(usize),
}

/// A validated, compiled rule.
#[derive(Clone, Debug)]
pub struct Rule {
    def: RuleDef,
    diagnostics: Diagnostics,
    pub(crate) plan: Vec<Step>,
    pub(crate) deleted_nodes: Vec<usize>,
    pub(crate) deleted_edges: Vec<usize>,
    /// Per left-hand node: (out-degree, in-degree) inside the pattern.
    pub(crate) lhs_degrees: Vec<(usize, usize)>,
    pub(crate) kept_nodes: Vec<KeptNode>,
    pub(crate) kept_edges: Vec<KeptEdge>,
    pub(crate) new_nodes: Vec<usize>,
    pub(crate) new_edges: Vec<usize>,
    pub(crate) rhs_nodes: Vec<RhsNode>,
}

impl PartialEq for Rule {
    fn eq(&self, other: &Self) -> bool {
        self.def == other.def
    }
}

impl Rule {
    pub fn new(def: RuleDef) -> Result<Rule, RuleError> {
        let name = def.name.clone();
        let mut seen = BTreeSet::new();
        for v in &def.vars {
            if !seen.insert(v.name.as_str()) {
                return Err(RuleError::DuplicateVar {
                    rule: name,
                    var: v.name.clone(),
                });
            }
        }
        for (side, g) in [("left-hand", &def.lhs), ("right-hand", &def.rhs)] {
            let mut ids = BTreeSet::new();
            for id in g.nodes.iter().map(|n| &n.id).chain(g.edges.iter().map(|e| &e.id)) {
                if !ids.insert(id.as_str()) {
                    return Err(RuleError::DuplicateId {
                        rule: name,
                        side,
                        id: id.clone(),
                    });
                }
            }
        }
        check_marks(&def)?;

        let mut lhs_of_rhs: HashMap<usize, usize> = HashMap::new();
        for id in &def.interface {
            let l = def.lhs.node_index(id).ok_or_else(|| RuleError::InterfaceMissing {
                rule: name.clone(),
                side: "left-hand side",
                id: id.clone(),
            })?;
            let r = def.rhs.node_index(id).ok_or_else(|| RuleError::InterfaceMissing {
                rule: name.clone(),
                side: "right-hand side",
                id: id.clone(),
            })?;
            lhs_of_rhs.insert(r, l);
        }
        for (r, n) in def.rhs.nodes.iter().enumerate() {
            if def.lhs.node_index(&n.id).is_some() && !lhs_of_rhs.contains_key(&r) {
                return Err(RuleError::NotInInterface {
                    rule: name,
                    id: n.id.clone(),
                });
            }
        }

        // variables used on the right or in the condition must occur on the left
        let mut bound = vec![false; def.vars.len()];
        for p in def.lhs.nodes.iter().map(|n| &n.label).chain(def.lhs.edges.iter().map(|e| &e.label)) {
            for v in p.vars() {
                bound[v] = true;
            }
        }
        let mut used: Vec<VarId> = Vec::new();
        for p in def.rhs.nodes.iter().map(|n| &n.label).chain(def.rhs.edges.iter().map(|e| &e.label)) {
            used.extend(p.vars());
        }
        if let Some(c) = &def.cond {
            c.visit_vars(&mut |v| used.push(v));
        }
        if let Some(&v) = used.iter().find(|&&v| !bound[v]) {
            return Err(RuleError::UnboundVar {
                rule: name,
                var: def.vars[v].name.clone(),
            });
        }

        for (r, n) in def.rhs.nodes.iter().enumerate() {
            if n.mark == MarkPat::Any {
                let ok = lhs_of_rhs
                    .get(&r)
                    .is_some_and(|&l| def.lhs.nodes[l].mark == MarkPat::Any);
                if !ok {
                    return Err(RuleError::WildcardRhs {
                        rule: name,
                        what: "node",
                        id: n.id.clone(),
                    });
                }
            }
        }

        let rhs_nodes: Vec<RhsNode> = {
            let mut k = 0;
            (0..def.rhs.nodes.len())
                .map(|r| match lhs_of_rhs.get(&r) {
                    Some(&l) => RhsNode::Kept(l),
                    None => {
                        k += 1;
                        RhsNode::New(k - 1)
                    }
                })
                .collect()
        };
        let new_nodes: Vec<usize> = (0..def.rhs.nodes.len())
            .filter(|r| !lhs_of_rhs.contains_key(r))
            .collect();

        // edges sharing an id on both sides are preserved
        let mut kept_edges = Vec::new();
        let mut kept_rhs_edges = BTreeSet::new();
        for (r, re) in def.rhs.edges.iter().enumerate() {
            let Some(l) = def.lhs.edge_index(&re.id) else {
                if re.mark == MarkPat::Any {
                    return Err(RuleError::WildcardRhs {
                        rule: name,
                        what: "edge",
                        id: re.id.clone(),
                    });
                }
                continue;
            };
            let le = &def.lhs.edges[l];
            let same_ends = rhs_nodes[re.src] == RhsNode::Kept(le.src)
                && rhs_nodes[re.tgt] == RhsNode::Kept(le.tgt);
            if !same_ends {
                return Err(RuleError::EdgeEndpoints {
                    rule: name,
                    id: re.id.clone(),
                });
            }
            if re.mark == MarkPat::Any && le.mark != MarkPat::Any {
                return Err(RuleError::WildcardRhs {
                    rule: name,
                    what: "edge",
                    id: re.id.clone(),
                });
            }
            kept_edges.push(KeptEdge {
                lhs: l,
                relabel: (re.label != le.label).then(|| re.label.clone()),
                remark: if re.mark == le.mark { None } else { re.mark.concrete() },
            });
            kept_rhs_edges.insert(r);
        }
        let kept_lhs_edges: BTreeSet<usize> = kept_edges.iter().map(|k| k.lhs).collect();
        let deleted_edges = (0..def.lhs.edges.len()).filter(|e| !kept_lhs_edges.contains(e)).collect();
        let new_edges = (0..def.rhs.edges.len()).filter(|e| !kept_rhs_edges.contains(e)).collect();

        let kept_lhs: BTreeSet<usize> = lhs_of_rhs.values().copied().collect();
        let deleted_nodes = (0..def.lhs.nodes.len()).filter(|n| !kept_lhs.contains(n)).collect();
        let mut kept_nodes: Vec<KeptNode> = lhs_of_rhs
            .iter()
            .map(|(&r, &l)| {
                let (ln, rn) = (&def.lhs.nodes[l], &def.rhs.nodes[r]);
                KeptNode {
                    lhs: l,
                    relabel: (rn.label != ln.label).then(|| rn.label.clone()),
                    remark: if rn.mark == ln.mark { None } else { rn.mark.concrete() },
                    reroot: (rn.rooted != ln.rooted).then_some(rn.rooted),
                }
            })
            .collect();
        kept_nodes.sort_by_key(|k| k.lhs);

        let mut lhs_degrees = vec![(0, 0); def.lhs.nodes.len()];
        for e in &def.lhs.edges {
            lhs_degrees[e.src].0 += 1;
            lhs_degrees[e.tgt].1 += 1;
        }

        let diagnostics = diagnose(&def);
        let plan = search_plan(&def.lhs);
        Ok(Rule {
            def,
            diagnostics,
            plan,
            deleted_nodes,
            deleted_edges,
            lhs_degrees,
            kept_nodes,
            kept_edges,
            new_nodes,
            new_edges,
            rhs_nodes,
        })
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn def(&self) -> &RuleDef {
        &self.def
    }

    pub fn lhs(&self) -> &PatternGraph {
        &self.def.lhs
    }

    pub fn rhs(&self) -> &PatternGraph {
        &self.def.rhs
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.def.vars
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.def.vars.iter().position(|v| v.name == name)
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    /// Every left-hand node is reachable, ignoring edge direction, from a
    /// rooted left-hand node.
    pub fn is_fast(&self) -> bool {
        self.diagnostics.fast
    }
}

fn check_marks(def: &RuleDef) -> Result<(), RuleError> {
    for g in [&def.lhs, &def.rhs] {
        for n in &g.nodes {
            if let MarkPat::Mark(m) = n.mark {
                if !m.valid_for_node() {
                    return Err(RuleError::BadMark {
                        rule: def.name.clone(),
                        what: "node",
                        id: n.id.clone(),
                        mark: m.keyword(),
                    });
                }
            }
        }
        for e in &g.edges {
            if let MarkPat::Mark(m) = e.mark {
                if !m.valid_for_edge() {
                    return Err(RuleError::BadMark {
                        rule: def.name.clone(),
                        what: "edge",
                        id: e.id.clone(),
                        mark: m.keyword(),
                    });
                }
            }
        }
    }
    Ok(())
}

fn undirected_adjacency(g: &PatternGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        adj[e.src].push(e.tgt);
        adj[e.tgt].push(e.src);
    }
    adj
}

fn diagnose(def: &RuleDef) -> Diagnostics {
    let lhs = &def.lhs;
    let adj = undirected_adjacency(lhs);
    let mut reached = vec![false; lhs.nodes.len()];
    let mut stack: Vec<usize> = (0..lhs.nodes.len()).filter(|&i| lhs.nodes[i].rooted).collect();
    let anchorless = stack.is_empty();
    for &s in &stack {
        reached[s] = true;
    }
    while let Some(n) = stack.pop() {
        for &m in &adj[n] {
            if !reached[m] {
                reached[m] = true;
                stack.push(m);
            }
        }
    }
    let fast = !lhs.nodes.is_empty() && reached.iter().all(|&r| r);
    let mut warnings = Vec::new();
    if anchorless && !lhs.nodes.is_empty() {
        warnings.push(format!(
            "rule `{}` has no rooted left-hand node; matching starts from the mark index",
            def.name
        ));
    } else if !fast && !lhs.nodes.is_empty() {
        let stray: Vec<&str> = (0..lhs.nodes.len())
            .filter(|&i| !reached[i])
            .map(|i| lhs.nodes[i].id.as_str())
            .collect();
        warnings.push(format!(
            "rule `{}`: nodes {} are not connected to a rooted node",
            def.name,
            stray.join(", ")
        ));
    }
    Diagnostics {
        fast,
        anchorless,
        warnings,
    }
}

/// Breadth-first plan over each connected component of the left-hand side,
/// edges in declaration order. Components with a rooted node come first and
/// start at their first rooted node; the first such node is the primary
/// anchor. Unrooted components start at their first node with a concrete
/// mark, falling back to their first node.
fn search_plan(lhs: &PatternGraph) -> Vec<Step> {
    let n = lhs.nodes.len();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let adj = undirected_adjacency(lhs);
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let c = comps.len();
        let mut members = vec![s];
        comp[s] = c;
        let mut i = 0;
        while i < members.len() {
            for &m in &adj[members[i]] {
                if comp[m] == usize::MAX {
                    comp[m] = c;
                    members.push(m);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        comps.push(members);
    }

    let mut starts: Vec<(bool, usize)> = comps
        .iter()
        .map(|members| {
            if let Some(&r) = members.iter().find(|&&m| lhs.nodes[m].rooted) {
                (true, r)
            } else {
                let s = members
                    .iter()
                    .copied()
                    .find(|&m| matches!(lhs.nodes[m].mark, MarkPat::Mark(_)))
                    .unwrap_or(members[0]);
                (false, s)
            }
        })
        .collect();
    // rooted components first, each group in order of its start node
    starts.sort_by_key(|&(rooted, s)| (!rooted, s));

    let mut plan = Vec::new();
    let mut placed = vec![false; n];
    let mut edge_done = vec![false; lhs.edges.len()];
    for (i, &(_, start)) in starts.iter().enumerate() {
        plan.push(Step::Anchor {
            node: start,
            primary: i == 0,
        });
        placed[start] = true;
        let mut queue = vec![start];
        let mut qi = 0;
        while qi < queue.len() {
            let cur = queue[qi];
            qi += 1;
            for (ei, e) in lhs.edges.iter().enumerate() {
                if edge_done[ei] || (e.src != cur && e.tgt != cur) {
                    continue;
                }
                edge_done[ei] = true;
                if e.src == cur {
                    let bind = !placed[e.tgt];
                    plan.push(Step::Out {
                        edge: ei,
                        from: cur,
                        to: e.tgt,
                        bind,
                    });
                    if bind {
                        placed[e.tgt] = true;
                        queue.push(e.tgt);
                    }
                } else {
                    let bind = !placed[e.src];
                    plan.push(Step::In {
                        edge: ei,
                        to: cur,
                        from: e.src,
                        bind,
                    });
                    if bind {
                        placed[e.src] = true;
                        queue.push(e.src);
                    }
                }
            }
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{Atom, PatternItem, VarKind};

    fn var(id: VarId, kind: VarKind) -> LabelPattern {
        LabelPattern::new(vec![PatternItem::Var { id, kind }]).unwrap()
    }

    fn node(id: &str, label: LabelPattern, mark: MarkPat, rooted: bool) -> PatternNode {
        PatternNode {
            id: id.into(),
            label,
            mark,
            rooted,
        }
    }

    fn edge(id: &str, src: usize, tgt: usize) -> PatternEdge {
        PatternEdge {
            id: id.into(),
            src,
            tgt,
            label: LabelPattern::empty(),
            mark: MarkPat::Unmarked,
        }
    }

    fn decl(name: &str, kind: VarKind) -> VarDecl {
        VarDecl {
            name: name.into(),
            kind,
        }
    }

    fn go_right_like() -> RuleDef {
        let grey = MarkPat::Mark(Mark::Grey);
        let instr = LabelPattern::new(vec![
            PatternItem::Var {
                id: 0,
                kind: VarKind::Char,
            },
            PatternItem::Var {
                id: 1,
                kind: VarKind::Int,
            },
        ])
        .unwrap();
        RuleDef {
            name: "go".into(),
            vars: vec![
                decl("o", VarKind::Char),
                decl("x", VarKind::Int),
                decl("n", VarKind::Int),
                decl("m", VarKind::Int),
            ],
            lhs: PatternGraph {
                nodes: vec![
                    node("n1", var(2, VarKind::Int), grey, true),
                    node("n2", var(3, VarKind::Int), grey, false),
                    node("n3", instr.clone(), MarkPat::Unmarked, true),
                ],
                edges: vec![edge("e1", 0, 1)],
            },
            rhs: PatternGraph {
                nodes: vec![
                    node("n1", var(2, VarKind::Int), grey, false),
                    node("n2", var(3, VarKind::Int), grey, true),
                    node("n3", instr, MarkPat::Unmarked, true),
                ],
                edges: vec![edge("e1", 0, 1)],
            },
            interface: vec!["n1".into(), "n2".into(), "n3".into()],
            cond: None,
        }
    }

    #[test]
    fn traversal_rule_is_fast_and_preserves_its_edge() {
        let r = Rule::new(go_right_like()).unwrap();
        assert!(r.is_fast());
        assert!(r.diagnostics().warnings.is_empty());
        assert!(r.deleted_edges.is_empty() && r.new_edges.is_empty());
        assert_eq!(r.kept_edges.len(), 1);
        assert_eq!(
            r.plan,
            vec![
                Step::Anchor { node: 0, primary: true },
                Step::Out { edge: 0, from: 0, to: 1, bind: true },
                Step::Anchor { node: 2, primary: false },
            ]
        );
        let reroots: Vec<_> = r.kept_nodes.iter().map(|k| k.reroot).collect();
        assert_eq!(reroots, vec![Some(false), Some(true), None]);
    }

    #[test]
    fn empty_lhs_is_valid_and_anchorless() {
        let def = RuleDef {
            name: "mk".into(),
            vars: vec![],
            lhs: PatternGraph::default(),
            rhs: PatternGraph {
                nodes: vec![node("n1", LabelPattern::empty(), MarkPat::Mark(Mark::Green), false)],
                edges: vec![],
            },
            interface: vec![],
            cond: None,
        };
        let r = Rule::new(def).unwrap();
        assert!(!r.is_fast());
        assert!(r.diagnostics().anchorless);
        assert!(r.diagnostics().warnings.is_empty());
        assert!(r.plan.is_empty());
    }

    #[test]
    fn unrooted_rule_warns_and_anchors_on_marked_node() {
        let def = RuleDef {
            name: "r".into(),
            vars: vec![decl("a", VarKind::Int)],
            lhs: PatternGraph {
                nodes: vec![
                    node("n2", var(0, VarKind::Int), MarkPat::Unmarked, false),
                    node("n1", LabelPattern::empty(), MarkPat::Mark(Mark::Green), false),
                ],
                edges: vec![edge("e1", 1, 0)],
            },
            rhs: PatternGraph::default(),
            interface: vec![],
            cond: None,
        };
        let r = Rule::new(def).unwrap();
        assert!(!r.is_fast());
        assert_eq!(r.diagnostics().warnings.len(), 1);
        assert_eq!(r.plan[0], Step::Anchor { node: 1, primary: true });
    }

    #[test]
    fn rhs_only_variable_is_rejected() {
        let mut def = go_right_like();
        def.vars.push(decl("z", VarKind::Int));
        def.rhs.nodes[1].label = var(4, VarKind::Int);
        assert!(matches!(Rule::new(def), Err(RuleError::UnboundVar { var, .. }) if var == "z"));
    }

    #[test]
    fn structural_errors() {
        let mut def = go_right_like();
        def.interface.push("n9".into());
        assert!(matches!(Rule::new(def), Err(RuleError::InterfaceMissing { .. })));

        let mut def = go_right_like();
        def.interface.pop();
        assert!(matches!(Rule::new(def), Err(RuleError::NotInInterface { .. })));

        let mut def = go_right_like();
        def.rhs.edges[0].src = 2;
        assert!(matches!(Rule::new(def), Err(RuleError::EdgeEndpoints { .. })));

        let mut def = go_right_like();
        def.rhs.nodes[0].mark = MarkPat::Any;
        assert!(matches!(Rule::new(def), Err(RuleError::WildcardRhs { .. })));

        let mut def = go_right_like();
        def.lhs.nodes[0].mark = MarkPat::Mark(Mark::Dashed);
        assert!(matches!(Rule::new(def), Err(RuleError::BadMark { .. })));

        let mut def = go_right_like();
        def.vars.push(decl("o", VarKind::Int));
        assert!(matches!(Rule::new(def), Err(RuleError::DuplicateVar { .. })));
    }

    #[test]
    fn relabel_only_when_patterns_differ() {
        let mut def = go_right_like();
        def.rhs.nodes[0].label = LabelPattern::new(vec![PatternItem::Const(Atom::Int(0))]).unwrap();
        let r = Rule::new(def).unwrap();
        assert!(r.kept_nodes[0].relabel.is_some());
        assert!(r.kept_nodes[1].relabel.is_none());
    }
}
