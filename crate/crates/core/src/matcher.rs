//! Rooted injective matching and rule application.

use crate::host::{EdgeId, GraphError, HostGraph, NodeId};
use crate::label::{Assignment, Degree};
use crate::rule::{MarkPat, RhsNode, Rule, Step};

/// Order in which rooted host nodes are offered as anchor candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnchorOrder {
    /// Most recently rooted first, as the GP 2 runtime keeps its root list.
    #[default]
    RecentFirst,
    /// Ascending node id.
    Ascending,
}

/// Work counters accumulated over a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchStats {
    /// Host candidates tried for the primary anchor.
    pub anchors_tried: u64,
    /// Host candidates examined for every other pattern step.
    pub extension_steps: u64,
    pub matches_found: u64,
    pub applications: u64,
    pub match_calls: u64,
    /// Largest `anchors_tried` seen in a single call.
    pub max_anchors_per_call: u64,
    /// Largest `extension_steps` seen in a single call.
    pub max_steps_per_call: u64,
}

impl MatchStats {
    /// Counter differences since `earlier`; the maxima are taken from `self`.
    pub fn since(&self, earlier: &MatchStats) -> MatchStats {
        MatchStats {
            anchors_tried: self.anchors_tried - earlier.anchors_tried,
            extension_steps: self.extension_steps - earlier.extension_steps,
            matches_found: self.matches_found - earlier.matches_found,
            applications: self.applications - earlier.applications,
            match_calls: self.match_calls - earlier.match_calls,
            max_anchors_per_call: self.max_anchors_per_call,
            max_steps_per_call: self.max_steps_per_call,
        }
    }

    pub fn reset_maxima(&mut self) {
        self.max_anchors_per_call = 0;
        self.max_steps_per_call = 0;
    }
}

/// A morphism from a rule's left-hand side into the host graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match {
    /// Host node per left-hand node index.
    pub nodes: Vec<NodeId>,
    /// Host edge per left-hand edge index.
    pub edges: Vec<EdgeId>,
    pub assignment: Assignment,
}

struct Search<'a> {
    rule: &'a Rule,
    g: &'a HostGraph,
    order: AnchorOrder,
    nodes: Vec<Option<NodeId>>,
    edges: Vec<Option<EdgeId>>,
    asg: Assignment,
    anchors: u64,
    steps: u64,
}

impl<'a> Search<'a> {
    fn node_free(&self, h: NodeId) -> bool {
        !self.nodes.contains(&Some(h))
    }

    /// Binds left-hand node `p` to `h` if compatible. On failure nothing is
    /// left bound.
    fn bind_node(&mut self, p: usize, h: NodeId) -> bool {
        if !self.node_free(h) {
            return false;
        }
        let Some(rec) = self.g.node(h) else { return false };
        let pat = &self.rule.lhs().nodes[p];
        if rec.rooted() != pat.rooted || !pat.mark.admits(rec.mark()) {
            return false;
        }
        if pat.label.unify(rec.label(), &mut self.asg).is_err() {
            return false;
        }
        self.nodes[p] = Some(h);
        true
    }

    fn bind_edge(&mut self, p: usize, h: EdgeId) -> bool {
        if self.edges.contains(&Some(h)) {
            return false;
        }
        let Some(rec) = self.g.edge(h) else { return false };
        let pat = &self.rule.lhs().edges[p];
        if !pat.mark.admits(rec.mark()) {
            return false;
        }
        if pat.label.unify(rec.label(), &mut self.asg).is_err() {
            return false;
        }
        self.edges[p] = Some(h);
        true
    }

    fn anchor_candidates(&self, p: usize) -> Vec<NodeId> {
        let pat = &self.rule.lhs().nodes[p];
        if pat.rooted {
            return match self.order {
                AnchorOrder::RecentFirst => self.g.roots_recent_first().collect(),
                AnchorOrder::Ascending => self.g.roots(),
            };
        }
        match pat.mark {
            MarkPat::Unmarked => self.g.nodes_with_mark(None).collect(),
            MarkPat::Mark(m) => self.g.nodes_with_mark(Some(m)).collect(),
            MarkPat::Any => self
                .g
                .nodes()
                .filter(|(_, r)| r.mark().is_some())
                .map(|(id, _)| id)
                .collect(),
        }
    }

    fn run(&mut self, i: usize) -> bool {
        let g = self.g;
        let Some(&step) = self.rule.plan.get(i) else {
            return self.accept();
        };
        match step {
            Step::Anchor { node, primary } => {
                for h in self.anchor_candidates(node) {
                    if primary {
                        self.anchors += 1;
                    } else {
                        self.steps += 1;
                    }
                    let mark = self.asg.mark();
                    if self.bind_node(node, h) {
                        if self.run(i + 1) {
                            return true;
                        }
                        self.nodes[node] = None;
                    }
                    self.asg.undo_to(mark);
                }
                false
            }
            Step::Out { edge, from, to, bind } | Step::In { edge, to: from, from: to, bind } => {
                let outward = matches!(step, Step::Out { .. });
                let h = self.nodes[from].expect("plan visits matched nodes first");
                let rec = g.node(h).expect("matched node is live");
                let list = if outward { rec.out_edges() } else { rec.in_edges() };
                for &e in list {
                    self.steps += 1;
                    let er = g.edge(e).expect("incident edge is live");
                    let far = if outward { er.tgt() } else { er.src() };
                    let mark = self.asg.mark();
                    if !bind && self.nodes[to] != Some(far) {
                        continue;
                    }
                    if !self.bind_edge(edge, e) {
                        self.asg.undo_to(mark);
                        continue;
                    }
                    if !bind || self.bind_node(to, far) {
                        if self.run(i + 1) {
                            return true;
                        }
                        if bind {
                            self.nodes[to] = None;
                        }
                    }
                    self.edges[edge] = None;
                    self.asg.undo_to(mark);
                }
                false
            }
        }
    }

    /// Condition and dangling checks on a complete morphism.
    fn accept(&mut self) -> bool {
        let g = self.g;
        for &p in &self.rule.deleted_nodes {
            let h = self.nodes[p].expect("complete morphism");
            let (out, inc) = self.rule.lhs_degrees[p];
            let rec = g.node(h).expect("live");
            if rec.out_edges().len() != out || rec.in_edges().len() != inc {
                return false;
            }
        }
        if let Some(cond) = &self.rule.def().cond {
            let nodes = &self.nodes;
            let degree = |d: Degree, p: usize| -> i64 {
                let h = nodes[p].expect("complete morphism");
                let rec = g.node(h).expect("live");
                match d {
                    Degree::Out => rec.out_edges().len() as i64,
                    Degree::In => rec.in_edges().len() as i64,
                }
            };
            if !cond.eval(&self.asg, &degree) {
                return false;
            }
        }
        true
    }
}

/// Finds the first match of `rule` in `g` under the rule's search plan.
/// A rule with an empty left-hand side always has the empty match.
pub fn find_match(rule: &Rule, g: &HostGraph, stats: &mut MatchStats, order: AnchorOrder) -> Option<Match> {
    let mut s = Search {
        rule,
        g,
        order,
        nodes: vec![None; rule.lhs().nodes.len()],
        edges: vec![None; rule.lhs().edges.len()],
        asg: Assignment::new(rule.vars().len()),
        anchors: 0,
        steps: 0,
    };
    let found = s.run(0);
    stats.match_calls += 1;
    stats.anchors_tried += s.anchors;
    stats.extension_steps += s.steps;
    stats.max_anchors_per_call = stats.max_anchors_per_call.max(s.anchors);
    stats.max_steps_per_call = stats.max_steps_per_call.max(s.steps);
    if !found {
        return None;
    }
    stats.matches_found += 1;
    Some(Match {
        nodes: s.nodes.into_iter().map(|n| n.expect("complete")).collect(),
        edges: s.edges.into_iter().map(|e| e.expect("complete")).collect(),
        assignment: s.asg,
    })
}

/// Applies `rule` at `m`. Fails only if `m` is not a valid match for the
/// current graph.
pub fn apply(rule: &Rule, m: &Match, g: &mut HostGraph) -> Result<(), ApplyError> {
    let asg = &m.assignment;
    for &e in &rule.deleted_edges {
        g.delete_edge(m.edges[e])?;
    }
    for &n in &rule.deleted_nodes {
        g.delete_node(m.nodes[n])?;
    }
    for k in &rule.kept_nodes {
        let h = m.nodes[k.lhs];
        if let Some(p) = &k.relabel {
            g.set_label(h, p.eval(asg)?)?;
        }
        if let Some(mark) = k.remark {
            g.set_mark(h, mark)?;
        }
        if let Some(r) = k.reroot {
            g.set_root(h, r)?;
        }
    }
    for k in &rule.kept_edges {
        let h = m.edges[k.lhs];
        if let Some(p) = &k.relabel {
            g.set_edge_label(h, p.eval(asg)?)?;
        }
        if let Some(mark) = k.remark {
            g.set_edge_mark(h, mark)?;
        }
    }
    let rhs = rule.rhs();
    let mut created = Vec::with_capacity(rule.new_nodes.len());
    for &r in &rule.new_nodes {
        let n = &rhs.nodes[r];
        let mark = match n.mark {
            MarkPat::Mark(m) => Some(m),
            _ => None,
        };
        created.push(g.add_node(n.label.eval(asg)?, mark, n.rooted)?);
    }
    let host_of = |r: usize| match rule.rhs_nodes[r] {
        RhsNode::Kept(l) => m.nodes[l],
        RhsNode::New(k) => created[k],
    };
    for &r in &rule.new_edges {
        let e = &rhs.edges[r];
        let mark = match e.mark {
            MarkPat::Mark(m) => Some(m),
            _ => None,
        };
        g.add_edge(host_of(e.src), host_of(e.tgt), e.label.eval(asg)?, mark)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApplyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Unbound(#[from] crate::label::UnboundVar),
}

/// Tries `rules` in order and applies the first one that matches. Returns
/// its index in `rules`.
pub fn apply_first(
    rules: &[&Rule],
    g: &mut HostGraph,
    stats: &mut MatchStats,
    order: AnchorOrder,
) -> Result<Option<usize>, ApplyError> {
    for (i, r) in rules.iter().enumerate() {
        if let Some(m) = find_match(r, g, stats, order) {
            apply(r, &m, g)?;
            stats.applications += 1;
            return Ok(Some(i));
        }
    }
    Ok(None)
}
