//! The mutable host graph.
//!
//! Besides node and edge stores the graph keeps per-node adjacency lists, a
//! root registry and per-mark node indexes, so that rooted nodes, degrees and
//! uniquely-marked nodes can be found without scanning. Every mutation made
//! while a scope is open is recorded in an undo journal; rolling a scope back
//! replays the inverse operations and restores the graph exactly, including
//! the id allocators.

use std::collections::BTreeSet;
use std::fmt;

use crate::label::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Concrete marks. Nodes use red, green, blue and grey; edges use red,
/// green, blue and dashed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mark {
    Red,
    Green,
    Blue,
    Grey,
    Dashed,
}

impl Mark {
    pub const NODE_MARKS: [Mark; 4] = [Mark::Red, Mark::Green, Mark::Blue, Mark::Grey];

    pub fn keyword(self) -> &'static str {
        match self {
            Mark::Red => "red",
            Mark::Green => "green",
            Mark::Blue => "blue",
            Mark::Grey => "grey",
            Mark::Dashed => "dashed",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Mark> {
        Some(match s {
            "red" => Mark::Red,
            "green" => Mark::Green,
            "blue" => Mark::Blue,
            "grey" => Mark::Grey,
            "dashed" => Mark::Dashed,
            _ => return None,
        })
    }

    pub fn valid_for_node(self) -> bool {
        self != Mark::Dashed
    }

    pub fn valid_for_edge(self) -> bool {
        self != Mark::Grey
    }
}

fn bucket(mark: Option<Mark>) -> usize {
    match mark {
        None => 0,
        Some(Mark::Red) => 1,
        Some(Mark::Green) => 2,
        Some(Mark::Blue) => 3,
        Some(Mark::Grey) => 4,
        Some(Mark::Dashed) => unreachable!("dashed is not a node mark"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeRec {
    label: Label,
    mark: Option<Mark>,
    rooted: bool,
    out: Vec<EdgeId>,
    inc: Vec<EdgeId>,
}

impl NodeRec {
    pub fn label(&self) -> &Label {
        &self.label
    }
    pub fn mark(&self) -> Option<Mark> {
        self.mark
    }
    pub fn rooted(&self) -> bool {
        self.rooted
    }
    pub fn out_edges(&self) -> &[EdgeId] {
        &self.out
    }
    pub fn in_edges(&self) -> &[EdgeId] {
        &self.inc
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRec {
    src: NodeId,
    tgt: NodeId,
    label: Label,
    mark: Option<Mark>,
}

impl EdgeRec {
    pub fn src(&self) -> NodeId {
        self.src
    }
    pub fn tgt(&self) -> NodeId {
        self.tgt
    }
    pub fn label(&self) -> &Label {
        &self.label
    }
    pub fn mark(&self) -> Option<Mark> {
        self.mark
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("no node {0}")]
    NoNode(NodeId),
    #[error("no edge {0}")]
    NoEdge(EdgeId),
    #[error("node {0} still has incident edges")]
    Dangling(NodeId),
    #[error("mark `{}` is not allowed here", .0.keyword())]
    BadMark(Mark),
    #[error("scope {0} is not the innermost open scope")]
    ScopeOrder(usize),
    #[error("id {0} is already in use")]
    DuplicateId(u32),
}

/// Handle for an open journal scope; scopes close in LIFO order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[must_use]
pub struct ScopeToken(usize);

#[derive(Clone, Debug)]
enum Undo {
    AddNode(NodeId),
    DeleteNode(NodeId, NodeRec),
    AddEdge(EdgeId),
    DeleteEdge {
        id: EdgeId,
        rec: EdgeRec,
        out_pos: usize,
        in_pos: usize,
    },
    NodeLabel(NodeId, Label),
    NodeMark(NodeId, Option<Mark>),
    /// Root flag changed; `Some(pos)` if the node was rooted at that
    /// registry position before the change.
    Root(NodeId, Option<usize>),
    EdgeLabel(EdgeId, Label),
    EdgeMark(EdgeId, Option<Mark>),
}

#[derive(Clone, Debug, Default)]
pub struct HostGraph {
    nodes: Vec<Option<NodeRec>>,
    edges: Vec<Option<EdgeRec>>,
    node_count: usize,
    edge_count: usize,
    /// Rooted nodes in the order they became rooted.
    roots: Vec<NodeId>,
    by_mark: [BTreeSet<NodeId>; 5],
    journal: Vec<Undo>,
    scopes: Vec<usize>,
}

/// Equality of the graphs themselves: the same live nodes and edges under
/// the same ids, with the same labels, marks and root flags. Adjacency
/// order, rooting order and the id allocators are ignored; see
/// [`HostGraph::identical`] for the strict comparison.
impl PartialEq for HostGraph {
    fn eq(&self, other: &Self) -> bool {
        fn node_eq(a: &NodeRec, b: &NodeRec) -> bool {
            a.label == b.label && a.mark == b.mark && a.rooted == b.rooted
        }
        self.node_count == other.node_count
            && self.edge_count == other.edge_count
            && self.nodes().all(|(id, n)| other.node(id).is_some_and(|m| node_eq(n, m)))
            && self.edges().all(|(id, e)| other.edge(id) == Some(e))
    }
}

impl Eq for HostGraph {}

impl HostGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes room for `nodes` more nodes and `edges` more edges without
    /// reallocating. A clone has no spare capacity.
    pub fn reserve(&mut self, nodes: usize, edges: usize) {
        self.nodes.reserve(nodes);
        self.edges.reserve(edges);
        self.journal.reserve(4 * (nodes + edges));
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.node_count == 0
    }

    /// The id the next [`add_node`](Self::add_node) will return.
    pub fn next_node_id(&self) -> NodeId {
        NodeId(self.nodes.len() as u32)
    }

    pub fn next_edge_id(&self) -> EdgeId {
        EdgeId(self.edges.len() as u32)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRec> {
        self.nodes.get(id.index()).and_then(Option::as_ref)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeRec> {
        self.edges.get(id.index()).and_then(Option::as_ref)
    }

    fn node_ref(&self, id: NodeId) -> Result<&NodeRec, GraphError> {
        self.node(id).ok_or(GraphError::NoNode(id))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut NodeRec, GraphError> {
        self.nodes
            .get_mut(id.index())
            .and_then(Option::as_mut)
            .ok_or(GraphError::NoNode(id))
    }

    fn edge_mut(&mut self, id: EdgeId) -> Result<&mut EdgeRec, GraphError> {
        self.edges
            .get_mut(id.index())
            .and_then(Option::as_mut)
            .ok_or(GraphError::NoEdge(id))
    }

    /// Live nodes in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &NodeRec)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.as_ref().map(|n| (NodeId(i as u32), n)))
    }

    /// Live edges in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &EdgeRec)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (EdgeId(i as u32), e)))
    }

    /// Rooted nodes in ascending id order.
    pub fn roots(&self) -> Vec<NodeId> {
        let mut r = self.roots.clone();
        r.sort_unstable();
        r
    }

    /// Rooted nodes, most recently rooted first. This is the order in which
    /// the matcher tries anchor candidates.
    pub fn roots_recent_first(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.roots.iter().rev().copied()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    /// Nodes carrying `mark` (`None` = unmarked), ascending.
    pub fn nodes_with_mark(&self, mark: Option<Mark>) -> impl Iterator<Item = NodeId> + '_ {
        self.by_mark[bucket(mark)].iter().copied()
    }

    pub fn outdeg(&self, id: NodeId) -> Result<usize, GraphError> {
        Ok(self.node_ref(id)?.out.len())
    }

    pub fn indeg(&self, id: NodeId) -> Result<usize, GraphError> {
        Ok(self.node_ref(id)?.inc.len())
    }

    fn log(&mut self, u: Undo) {
        if !self.scopes.is_empty() {
            self.journal.push(u);
        }
    }

    pub fn add_node(&mut self, label: Label, mark: Option<Mark>, rooted: bool) -> Result<NodeId, GraphError> {
        let id = self.next_node_id();
        self.insert_node_at(id, label, mark, rooted)?;
        Ok(id)
    }

    /// Adds a node with an explicit id, as used when loading a graph from
    /// text. Ids skipped over stay unused.
    pub fn add_node_with_id(
        &mut self,
        id: NodeId,
        label: Label,
        mark: Option<Mark>,
        rooted: bool,
    ) -> Result<(), GraphError> {
        // explicit ids are a loading facility; they are not journaled
        if self.node(id).is_some() || !self.scopes.is_empty() {
            return Err(GraphError::DuplicateId(id.0));
        }
        self.insert_node_at(id, label, mark, rooted)
    }

    fn insert_node_at(
        &mut self,
        id: NodeId,
        label: Label,
        mark: Option<Mark>,
        rooted: bool,
    ) -> Result<(), GraphError> {
        if let Some(m) = mark.filter(|m| !m.valid_for_node()) {
            return Err(GraphError::BadMark(m));
        }
        if id.index() >= self.nodes.len() {
            self.nodes.resize(id.index() + 1, None);
        }
        self.nodes[id.index()] = Some(NodeRec {
            label,
            mark,
            rooted: false,
            out: Vec::new(),
            inc: Vec::new(),
        });
        self.node_count += 1;
        self.by_mark[bucket(mark)].insert(id);
        self.log(Undo::AddNode(id));
        if rooted {
            self.set_root(id, true)?;
        }
        Ok(())
    }

    /// Removes an isolated node. Callers must delete incident edges first.
    pub fn delete_node(&mut self, id: NodeId) -> Result<(), GraphError> {
        let n = self.node_ref(id)?;
        if !n.out.is_empty() || !n.inc.is_empty() {
            return Err(GraphError::Dangling(id));
        }
        if n.rooted {
            self.set_root(id, false)?;
        }
        let rec = self.nodes[id.index()].take().expect("checked above");
        self.node_count -= 1;
        self.by_mark[bucket(rec.mark)].remove(&id);
        self.log(Undo::DeleteNode(id, rec));
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        src: NodeId,
        tgt: NodeId,
        label: Label,
        mark: Option<Mark>,
    ) -> Result<EdgeId, GraphError> {
        let id = self.next_edge_id();
        self.insert_edge_at(id, src, tgt, label, mark)?;
        Ok(id)
    }

    pub fn add_edge_with_id(
        &mut self,
        id: EdgeId,
        src: NodeId,
        tgt: NodeId,
        label: Label,
        mark: Option<Mark>,
    ) -> Result<(), GraphError> {
        if self.edge(id).is_some() || !self.scopes.is_empty() {
            return Err(GraphError::DuplicateId(id.0));
        }
        self.insert_edge_at(id, src, tgt, label, mark)
    }

    fn insert_edge_at(
        &mut self,
        id: EdgeId,
        src: NodeId,
        tgt: NodeId,
        label: Label,
        mark: Option<Mark>,
    ) -> Result<(), GraphError> {
        if let Some(m) = mark.filter(|m| !m.valid_for_edge()) {
            return Err(GraphError::BadMark(m));
        }
        self.node_ref(src)?;
        self.node_ref(tgt)?;
        if id.index() >= self.edges.len() {
            self.edges.resize(id.index() + 1, None);
        }
        self.edges[id.index()] = Some(EdgeRec { src, tgt, label, mark });
        self.edge_count += 1;
        self.node_mut(src)?.out.push(id);
        self.node_mut(tgt)?.inc.push(id);
        self.log(Undo::AddEdge(id));
        Ok(())
    }

    pub fn delete_edge(&mut self, id: EdgeId) -> Result<(), GraphError> {
        let rec = self
            .edges
            .get_mut(id.index())
            .and_then(Option::take)
            .ok_or(GraphError::NoEdge(id))?;
        self.edge_count -= 1;
        let out = &mut self.nodes[rec.src.index()].as_mut().expect("edge source").out;
        let out_pos = out.iter().position(|&e| e == id).expect("adjacency in sync");
        out.remove(out_pos);
        let inc = &mut self.nodes[rec.tgt.index()].as_mut().expect("edge target").inc;
        let in_pos = inc.iter().position(|&e| e == id).expect("adjacency in sync");
        inc.remove(in_pos);
        self.log(Undo::DeleteEdge {
            id,
            rec,
            out_pos,
            in_pos,
        });
        Ok(())
    }

    pub fn set_label(&mut self, id: NodeId, label: Label) -> Result<(), GraphError> {
        let n = self.node_mut(id)?;
        if n.label != label {
            let old = std::mem::replace(&mut n.label, label);
            self.log(Undo::NodeLabel(id, old));
        }
        Ok(())
    }

    pub fn set_mark(&mut self, id: NodeId, mark: Option<Mark>) -> Result<(), GraphError> {
        if let Some(m) = mark.filter(|m| !m.valid_for_node()) {
            return Err(GraphError::BadMark(m));
        }
        let n = self.node_mut(id)?;
        if n.mark != mark {
            let old = std::mem::replace(&mut n.mark, mark);
            self.by_mark[bucket(old)].remove(&id);
            self.by_mark[bucket(mark)].insert(id);
            self.log(Undo::NodeMark(id, old));
        }
        Ok(())
    }

    pub fn set_root(&mut self, id: NodeId, rooted: bool) -> Result<(), GraphError> {
        let n = self.node_mut(id)?;
        if n.rooted == rooted {
            return Ok(());
        }
        n.rooted = rooted;
        if rooted {
            self.roots.push(id);
            self.log(Undo::Root(id, None));
        } else {
            let pos = self.roots.iter().rposition(|&r| r == id).expect("root registry in sync");
            self.roots.remove(pos);
            self.log(Undo::Root(id, Some(pos)));
        }
        Ok(())
    }

    pub fn set_edge_label(&mut self, id: EdgeId, label: Label) -> Result<(), GraphError> {
        let e = self.edge_mut(id)?;
        if e.label != label {
            let old = std::mem::replace(&mut e.label, label);
            self.log(Undo::EdgeLabel(id, old));
        }
        Ok(())
    }

    pub fn set_edge_mark(&mut self, id: EdgeId, mark: Option<Mark>) -> Result<(), GraphError> {
        if let Some(m) = mark.filter(|m| !m.valid_for_edge()) {
            return Err(GraphError::BadMark(m));
        }
        let e = self.edge_mut(id)?;
        if e.mark != mark {
            let old = std::mem::replace(&mut e.mark, mark);
            self.log(Undo::EdgeMark(id, old));
        }
        Ok(())
    }

    pub fn scope_depth(&self) -> usize {
        self.scopes.len()
    }

    pub fn begin_scope(&mut self) -> ScopeToken {
        self.scopes.push(self.journal.len());
        ScopeToken(self.scopes.len())
    }

    fn check_top(&self, t: ScopeToken) -> Result<(), GraphError> {
        if t.0 == 0 || t.0 != self.scopes.len() {
            return Err(GraphError::ScopeOrder(t.0));
        }
        Ok(())
    }

    /// Closes the innermost scope, keeping its changes. They become part of
    /// the enclosing scope, or permanent if no scope remains open.
    pub fn commit_scope(&mut self, t: ScopeToken) -> Result<(), GraphError> {
        self.check_top(t)?;
        self.scopes.pop();
        if self.scopes.is_empty() {
            self.journal.clear();
        }
        Ok(())
    }

    /// Closes the innermost scope, undoing every change made since it was
    /// opened.
    pub fn rollback_scope(&mut self, t: ScopeToken) -> Result<(), GraphError> {
        self.check_top(t)?;
        let start = self.scopes.pop().expect("checked");
        while self.journal.len() > start {
            let u = self.journal.pop().expect("non-empty");
            self.undo(u);
        }
        Ok(())
    }

    /// Commits every open scope.
    pub fn commit_all(&mut self) {
        self.scopes.clear();
        self.journal.clear();
    }

    fn undo(&mut self, u: Undo) {
        match u {
            Undo::AddNode(id) => {
                let rec = self.nodes[id.index()].take().expect("undo: node present");
                debug_assert!(rec.out.is_empty() && rec.inc.is_empty() && !rec.rooted);
                self.node_count -= 1;
                self.by_mark[bucket(rec.mark)].remove(&id);
                debug_assert_eq!(id.index() + 1, self.nodes.len());
                self.nodes.pop();
            }
            Undo::DeleteNode(id, rec) => {
                self.by_mark[bucket(rec.mark)].insert(id);
                self.nodes[id.index()] = Some(rec);
                self.node_count += 1;
            }
            Undo::AddEdge(id) => {
                let rec = self.edges[id.index()].take().expect("undo: edge present");
                self.edge_count -= 1;
                let out = &mut self.nodes[rec.src.index()].as_mut().expect("src").out;
                debug_assert_eq!(out.last(), Some(&id));
                out.pop();
                let inc = &mut self.nodes[rec.tgt.index()].as_mut().expect("tgt").inc;
                debug_assert_eq!(inc.last(), Some(&id));
                inc.pop();
                debug_assert_eq!(id.index() + 1, self.edges.len());
                self.edges.pop();
            }
            Undo::DeleteEdge {
                id,
                rec,
                out_pos,
                in_pos,
            } => {
                self.nodes[rec.src.index()].as_mut().expect("src").out.insert(out_pos, id);
                self.nodes[rec.tgt.index()].as_mut().expect("tgt").inc.insert(in_pos, id);
                self.edges[id.index()] = Some(rec);
                self.edge_count += 1;
            }
            Undo::NodeLabel(id, old) => {
                self.nodes[id.index()].as_mut().expect("node").label = old;
            }
            Undo::NodeMark(id, old) => {
                let n = self.nodes[id.index()].as_mut().expect("node");
                let cur = std::mem::replace(&mut n.mark, old);
                self.by_mark[bucket(cur)].remove(&id);
                self.by_mark[bucket(old)].insert(id);
            }
            Undo::Root(id, pos) => {
                let n = self.nodes[id.index()].as_mut().expect("node");
                match pos {
                    None => {
                        n.rooted = false;
                        debug_assert_eq!(self.roots.last(), Some(&id));
                        self.roots.pop();
                    }
                    Some(p) => {
                        n.rooted = true;
                        self.roots.insert(p, id);
                    }
                }
            }
            Undo::EdgeLabel(id, old) => {
                self.edges[id.index()].as_mut().expect("edge").label = old;
            }
            Undo::EdgeMark(id, old) => {
                self.edges[id.index()].as_mut().expect("edge").mark = old;
            }
        }
    }

    /// Recomputes every derived index by a full scan and compares it with
    /// the maintained one. Intended for tests and debugging.
    /// Exact state equality, including adjacency order, rooting order and
    /// the id allocators. The journal is not compared.
    pub fn identical(&self, other: &HostGraph) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.node_count == other.node_count
            && self.edge_count == other.edge_count
            && self.roots == other.roots
            && self.by_mark == other.by_mark
    }

    pub fn check_coherence(&self) -> Result<(), String> {
        let mut out_seen = vec![Vec::new(); self.nodes.len()];
        let mut in_seen = vec![Vec::new(); self.nodes.len()];
        let mut edge_count = 0;
        for (id, e) in self.edges() {
            edge_count += 1;
            if self.node(e.src).is_none() || self.node(e.tgt).is_none() {
                return Err(format!("edge {id} has a missing endpoint"));
            }
            out_seen[e.src.index()].push(id);
            in_seen[e.tgt.index()].push(id);
        }
        if edge_count != self.edge_count {
            return Err("edge count out of sync".into());
        }
        let mut node_count = 0;
        let mut rooted = BTreeSet::new();
        let mut marks: [BTreeSet<NodeId>; 5] = Default::default();
        for (id, n) in self.nodes() {
            node_count += 1;
            let mut out = n.out.clone();
            out.sort_unstable();
            let mut inc = n.inc.clone();
            inc.sort_unstable();
            if out != out_seen[id.index()] || inc != in_seen[id.index()] {
                return Err(format!("adjacency of {id} out of sync"));
            }
            if n.rooted {
                rooted.insert(id);
            }
            marks[bucket(n.mark)].insert(id);
        }
        if node_count != self.node_count {
            return Err("node count out of sync".into());
        }
        let registry: BTreeSet<NodeId> = self.roots.iter().copied().collect();
        if registry != rooted || registry.len() != self.roots.len() {
            return Err("root registry out of sync".into());
        }
        if marks != self.by_mark {
            return Err("mark index out of sync".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grey(k: i64) -> (Label, Option<Mark>) {
        (Label::int(k), Some(Mark::Grey))
    }

    /// The six-node example tree, top first.
    fn example_tree() -> (HostGraph, Vec<NodeId>) {
        let mut g = HostGraph::new();
        let ids: Vec<NodeId> = [5, 2, 7, 1, 4, 8]
            .iter()
            .map(|&k| {
                let (l, m) = grey(k);
                g.add_node(l, m, false).unwrap()
            })
            .collect();
        for (p, c) in [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)] {
            g.add_edge(ids[p], ids[c], Label::empty(), None).unwrap();
        }
        (g, ids)
    }

    #[test]
    fn example_tree_degrees() {
        let (g, ids) = example_tree();
        assert_eq!(g.outdeg(ids[0]).unwrap(), 2);
        assert_eq!(g.outdeg(ids[5]).unwrap(), 0);
        assert_eq!(g.indeg(ids[5]).unwrap(), 1);
        g.check_coherence().unwrap();
    }

    #[test]
    fn green_node_does_not_touch_roots() {
        let mut g = HostGraph::new();
        let head = g.add_node(Label::tagged("i", 5), None, true).unwrap();
        g.add_node(Label::empty(), Some(Mark::Green), false).unwrap();
        assert_eq!(g.roots(), vec![head]);
    }

    #[test]
    fn root_toggle_is_net_neutral() {
        let mut g = HostGraph::new();
        let a = g.add_node(Label::empty(), None, true).unwrap();
        let b = g.add_node(Label::empty(), None, false).unwrap();
        g.set_root(b, true).unwrap();
        g.set_root(b, false).unwrap();
        assert_eq!(g.roots(), vec![a]);
        g.check_coherence().unwrap();
    }

    #[test]
    fn roots_recent_first_order() {
        let mut g = HostGraph::new();
        let a = g.add_node(Label::empty(), None, false).unwrap();
        let b = g.add_node(Label::empty(), None, true).unwrap();
        g.set_root(a, true).unwrap();
        assert_eq!(g.roots_recent_first().collect::<Vec<_>>(), vec![a, b]);
        assert_eq!(g.roots(), vec![a, b]);
    }

    #[test]
    fn edge_add_delete_is_net_neutral() {
        let mut g = HostGraph::new();
        let a = g.add_node(Label::empty(), None, false).unwrap();
        let b = g.add_node(Label::empty(), None, false).unwrap();
        let e = g.add_edge(a, b, Label::empty(), None).unwrap();
        g.delete_edge(e).unwrap();
        assert_eq!(g.outdeg(a).unwrap(), 0);
        assert_eq!(g.indeg(b).unwrap(), 0);
    }

    #[test]
    fn dangling_delete_is_refused() {
        let mut g = HostGraph::new();
        let a = g.add_node(Label::empty(), None, false).unwrap();
        let b = g.add_node(Label::empty(), None, false).unwrap();
        g.add_edge(a, b, Label::empty(), None).unwrap();
        assert_eq!(g.delete_node(b), Err(GraphError::Dangling(b)));
        assert_eq!(g.delete_node(NodeId(9)), Err(GraphError::NoNode(NodeId(9))));
    }

    #[test]
    fn bad_marks_are_refused() {
        let mut g = HostGraph::new();
        assert!(g.add_node(Label::empty(), Some(Mark::Dashed), false).is_err());
        let a = g.add_node(Label::empty(), None, false).unwrap();
        assert!(g.add_edge(a, a, Label::empty(), Some(Mark::Grey)).is_err());
    }

    #[test]
    fn rollback_rewinds_allocator() {
        let mut g = HostGraph::new();
        g.add_node(Label::empty(), None, false).unwrap();
        let before = g.clone();
        let t = g.begin_scope();
        let n = g.add_node(Label::int(1), None, true).unwrap();
        assert_eq!(n, NodeId(1));
        g.rollback_scope(t).unwrap();
        assert!(g.node(n).is_none());
        assert_eq!(g.next_node_id(), NodeId(1));
        assert!(g.identical(&before));
    }

    #[test]
    fn nested_commit_then_outer_rollback() {
        let (mut g, ids) = example_tree();
        let before = g.clone();
        let outer = g.begin_scope();
        let inner = g.begin_scope();
        let e = g.node(ids[1]).unwrap().out_edges()[0];
        g.delete_edge(e).unwrap();
        g.delete_node(ids[3]).unwrap();
        g.set_root(ids[0], true).unwrap();
        g.set_mark(ids[2], Some(Mark::Red)).unwrap();
        g.set_label(ids[4], Label::int(40)).unwrap();
        g.commit_scope(inner).unwrap();
        g.rollback_scope(outer).unwrap();
        assert!(g.identical(&before));
        g.check_coherence().unwrap();
    }

    #[test]
    fn empty_commit_is_noop() {
        let (mut g, _) = example_tree();
        let before = g.clone();
        let t = g.begin_scope();
        g.commit_scope(t).unwrap();
        assert!(g.identical(&before));
    }

    #[test]
    fn scopes_must_nest() {
        let mut g = HostGraph::new();
        let outer = g.begin_scope();
        let _inner = g.begin_scope();
        assert_eq!(g.commit_scope(outer), Err(GraphError::ScopeOrder(1)));
        assert_eq!(g.rollback_scope(outer), Err(GraphError::ScopeOrder(1)));
    }

    #[test]
    fn indeg_counts_every_incoming_edge() {
        let (mut g, ids) = example_tree();
        let s1 = g.add_node(Label::tagged("s", 8), None, false).unwrap();
        let s2 = g.add_node(Label::tagged("s", 8), None, false).unwrap();
        g.add_edge(s1, ids[5], Label::empty(), Some(Mark::Dashed)).unwrap();
        g.add_edge(s2, ids[5], Label::empty(), Some(Mark::Dashed)).unwrap();
        // detach node 8 from the tree: what remains is two dashed in-edges
        let parent_edge = g.node(ids[5]).unwrap().in_edges()[0];
        g.delete_edge(parent_edge).unwrap();
        let scanned = g.edges().filter(|(_, e)| e.tgt() == ids[5]).count();
        assert_eq!(g.indeg(ids[5]).unwrap(), 2);
        assert_eq!(scanned, 2);
    }

    #[test]
    fn mark_index_tracks_changes() {
        let mut g = HostGraph::new();
        let a = g.add_node(Label::empty(), Some(Mark::Green), false).unwrap();
        assert_eq!(g.nodes_with_mark(Some(Mark::Green)).collect::<Vec<_>>(), vec![a]);
        let t = g.begin_scope();
        g.set_mark(a, None).unwrap();
        assert_eq!(g.nodes_with_mark(Some(Mark::Green)).count(), 0);
        g.rollback_scope(t).unwrap();
        assert_eq!(g.nodes_with_mark(Some(Mark::Green)).collect::<Vec<_>>(), vec![a]);
    }
}
