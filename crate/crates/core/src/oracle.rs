//! Reference binary search tree and workload generation.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bst::KeyTree;
use crate::text::{Op, OpKind, OpScript};

/// Largest key produced by [`gen_workload`]; keys lie in `0..=KEY_MAX`.
pub const KEY_MAX: i64 = 10_000;

#[derive(Clone, Copy, Debug)]
struct ONode {
    key: i64,
    left: Option<usize>,
    right: Option<usize>,
}

/// How often each deletion case was taken.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeleteCases {
    pub leaf: u64,
    pub one_child: u64,
    pub two_children: u64,
}

/// A plain binary search tree without duplicate keys. Deleting a node with
/// two children moves the largest key of its left subtree into it.
#[derive(Clone, Debug, Default)]
pub struct OracleTree {
    nodes: Vec<ONode>,
    free: Vec<usize>,
    root: Option<usize>,
    len: usize,
    pub cases: DeleteCases,
}

impl OracleTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn alloc(&mut self, key: i64) -> usize {
        let n = ONode {
            key,
            left: None,
            right: None,
        };
        match self.free.pop() {
            Some(i) => {
                self.nodes[i] = n;
                i
            }
            None => {
                self.nodes.push(n);
                self.nodes.len() - 1
            }
        }
    }

    /// Returns false, leaving the tree unchanged, if `key` is present.
    pub fn insert(&mut self, key: i64) -> bool {
        let Some(mut cur) = self.root else {
            self.root = Some(self.alloc(key));
            self.len += 1;
            return true;
        };
        loop {
            let n = self.nodes[cur];
            if key == n.key {
                return false;
            }
            let next = if key < n.key { n.left } else { n.right };
            match next {
                Some(c) => cur = c,
                None => {
                    let new = self.alloc(key);
                    if key < n.key {
                        self.nodes[cur].left = Some(new);
                    } else {
                        self.nodes[cur].right = Some(new);
                    }
                    self.len += 1;
                    return true;
                }
            }
        }
    }

    pub fn contains(&self, key: i64) -> bool {
        let mut cur = self.root;
        while let Some(c) = cur {
            let n = self.nodes[c];
            if key == n.key {
                return true;
            }
            cur = if key < n.key { n.left } else { n.right };
        }
        false
    }

    /// Replaces the link that points at `child` (from `parent`, or the top
    /// link when `parent` is `None`) with `repl`.
    fn relink(&mut self, parent: Option<usize>, child: usize, repl: Option<usize>) {
        match parent {
            None => self.root = repl,
            Some(p) if self.nodes[p].left == Some(child) => self.nodes[p].left = repl,
            Some(p) => self.nodes[p].right = repl,
        }
    }

    /// Returns false if `key` is absent.
    pub fn delete(&mut self, key: i64) -> bool {
        let mut parent = None;
        let mut cur = self.root;
        while let Some(c) = cur {
            let n = self.nodes[c];
            if key == n.key {
                break;
            }
            parent = Some(c);
            cur = if key < n.key { n.left } else { n.right };
        }
        let Some(d) = cur else { return false };
        let n = self.nodes[d];
        match (n.left, n.right) {
            (None, None) => {
                self.cases.leaf += 1;
                self.relink(parent, d, None);
                self.free.push(d);
            }
            (Some(c), None) | (None, Some(c)) => {
                self.cases.one_child += 1;
                self.relink(parent, d, Some(c));
                self.free.push(d);
            }
            (Some(l), Some(_)) => {
                self.cases.two_children += 1;
                let (mut mp, mut m) = (d, l);
                while let Some(r) = self.nodes[m].right {
                    mp = m;
                    m = r;
                }
                self.nodes[d].key = self.nodes[m].key;
                let ml = self.nodes[m].left;
                self.relink(Some(mp), m, ml);
                self.free.push(m);
            }
        }
        self.len -= 1;
        true
    }

    /// Applies `op`; the result is "inserted", "found" or "deleted".
    pub fn apply(&mut self, op: Op) -> bool {
        match op.kind {
            OpKind::Insert => self.insert(op.key),
            OpKind::Search => self.contains(op.key),
            OpKind::Delete => self.delete(op.key),
        }
    }

    /// Keys met while descending towards `key`, ending at `key` itself or at
    /// the node under which it would be inserted.
    pub fn path(&self, key: i64) -> Vec<i64> {
        let mut out = Vec::new();
        let mut cur = self.root;
        while let Some(c) = cur {
            let n = self.nodes[c];
            out.push(n.key);
            if key == n.key {
                break;
            }
            cur = if key < n.key { n.left } else { n.right };
        }
        out
    }

    pub fn keys_in_order(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.len);
        let mut stack = Vec::new();
        let mut cur = self.root;
        while cur.is_some() || !stack.is_empty() {
            while let Some(c) = cur {
                stack.push(c);
                cur = self.nodes[c].left;
            }
            let c = stack.pop().expect("non-empty");
            out.push(self.nodes[c].key);
            cur = self.nodes[c].right;
        }
        out
    }

    pub fn to_key_tree(&self) -> KeyTree {
        KeyTree::build(self.root, |i| {
            let n = self.nodes[i];
            (n.key, n.left, n.right)
        })
    }
}

/// Runs `ops` on an empty tree. Returns the final tree and one outcome per
/// op (inserted, found or deleted).
pub fn o_apply(ops: &OpScript) -> (OracleTree, Vec<bool>) {
    let mut t = OracleTree::new();
    let outcomes = ops.0.iter().map(|&op| t.apply(op)).collect();
    (t, outcomes)
}

/// Restrictions a generated workload must obey.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraints {
    /// Every delete targets a key present at that point.
    SanitizedSafe,
    /// As above, and additionally: inserts use keys never seen before,
    /// deleted keys never reappear, and at most one search, placed last.
    FaithfulSafe,
    Unrestricted,
}

impl Constraints {
    pub fn name(self) -> &'static str {
        match self {
            Constraints::SanitizedSafe => "sanitized-safe",
            Constraints::FaithfulSafe => "faithful-safe",
            Constraints::Unrestricted => "unrestricted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkloadError {
    #[error("{size} operations need more than the {available} fresh keys available")]
    NotEnoughKeys { size: usize, available: usize },
}

fn pick(set: &BTreeSet<i64>, rng: &mut ChaCha8Rng) -> Option<i64> {
    set.iter().copied().choose(rng)
}

/// Deterministic random workload of `size` operations.
pub fn gen_workload(seed: u64, size: usize, constraints: Constraints) -> Result<OpScript, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut present = BTreeSet::new();
    let mut ops = Vec::with_capacity(size);
    match constraints {
        Constraints::SanitizedSafe | Constraints::Unrestricted => {
            for _ in 0..size {
                let roll = rng.gen_range(0..100);
                let op = if roll < 50 || (present.is_empty() && constraints == Constraints::SanitizedSafe) {
                    let key = match pick(&present, &mut rng) {
                        Some(k) if rng.gen_bool(0.1) => k,
                        _ => rng.gen_range(0..=KEY_MAX),
                    };
                    Op::insert(key)
                } else if roll < 75 {
                    let key = match pick(&present, &mut rng) {
                        Some(k) if rng.gen_bool(0.5) => k,
                        _ => rng.gen_range(0..=KEY_MAX),
                    };
                    Op::search(key)
                } else {
                    let key = match pick(&present, &mut rng) {
                        Some(k) if constraints == Constraints::SanitizedSafe || rng.gen_bool(0.7) => k,
                        _ => rng.gen_range(0..=KEY_MAX),
                    };
                    Op::delete(key)
                };
                match op.kind {
                    OpKind::Insert => {
                        present.insert(op.key);
                    }
                    OpKind::Delete => {
                        present.remove(&op.key);
                    }
                    OpKind::Search => {}
                }
                ops.push(op);
            }
        }
        Constraints::FaithfulSafe => {
            let available = (KEY_MAX + 1) as usize;
            if size > available {
                return Err(WorkloadError::NotEnoughKeys { size, available });
            }
            let mut used = BTreeSet::new();
            let trailing_search = size > 0 && rng.gen_bool(0.5);
            let body = size - usize::from(trailing_search);
            for _ in 0..body {
                let op = match pick(&present, &mut rng) {
                    Some(k) if rng.gen_bool(0.35) => Op::delete(k),
                    _ => loop {
                        let k = rng.gen_range(0..=KEY_MAX);
                        if used.insert(k) {
                            break Op::insert(k);
                        }
                    },
                };
                if op.kind == OpKind::Delete {
                    present.remove(&op.key);
                } else {
                    present.insert(op.key);
                }
                ops.push(op);
            }
            if trailing_search {
                let key = match pick(&present, &mut rng) {
                    Some(k) if rng.gen_bool(0.5) => k,
                    _ => loop {
                        let k = rng.gen_range(0..=KEY_MAX);
                        if !used.contains(&k) {
                            break k;
                        }
                    },
                };
                ops.push(Op::search(key));
            }
        }
    }
    Ok(OpScript(ops))
}

/// Checks `ops` against `constraints`, naming the first offending op.
pub fn check_constraints(ops: &OpScript, constraints: Constraints) -> Result<(), String> {
    let mut present = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let n = ops.0.len();
    for (i, op) in ops.0.iter().enumerate() {
        let bad = |why: &str| Err(format!("op {i} (`{op}`): {why}"));
        match (constraints, op.kind) {
            (Constraints::Unrestricted, _) => {}
            (_, OpKind::Delete) if !present.contains(&op.key) => return bad("deletes an absent key"),
            (Constraints::FaithfulSafe, OpKind::Insert) if seen.contains(&op.key) => {
                return bad("reuses a key")
            }
            (Constraints::FaithfulSafe, OpKind::Search) if i + 1 != n => return bad("search before the end"),
            (Constraints::FaithfulSafe, OpKind::Search) if seen.contains(&op.key) && !present.contains(&op.key) => {
                return bad("searches a deleted key")
            }
            _ => {}
        }
        match op.kind {
            OpKind::Insert => {
                present.insert(op.key);
                seen.insert(op.key);
            }
            OpKind::Delete => {
                present.remove(&op.key);
            }
            OpKind::Search => {}
        }
    }
    Ok(())
}
