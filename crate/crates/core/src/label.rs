//! Label values, label patterns, variable typing and rule conditions.
//!
//! A label is a sequence of atoms. Rule labels are patterns over declared
//! variables; matching a host label against a pattern extends an
//! [`Assignment`], and evaluating a pattern under a complete assignment
//! produces the label written back to the host graph.

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

/// A single label component.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Int(i64),
    Str(Arc<str>),
}

impl Atom {
    pub fn str(s: &str) -> Self {
        Atom::Str(Arc::from(s))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Atom::Int(i) => Some(*i),
            Atom::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Atom::Str(s) => Some(s),
            Atom::Int(_) => None,
        }
    }

    fn is_char(&self) -> bool {
        matches!(self, Atom::Str(s) if s.chars().count() == 1)
    }
}

impl From<i64> for Atom {
    fn from(i: i64) -> Self {
        Atom::Int(i)
    }
}

impl From<&str> for Atom {
    fn from(s: &str) -> Self {
        Atom::str(s)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Int(i) => write!(f, "{i}"),
            Atom::Str(s) => write!(f, "\"{s}\""),
        }
    }
}

/// An ordered, possibly empty, sequence of atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Label(SmallVec<[Atom; 2]>);

impl Label {
    pub fn empty() -> Self {
        Label(SmallVec::new())
    }

    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        Label(atoms.into_iter().collect())
    }

    pub fn int(i: i64) -> Self {
        Label::new([Atom::Int(i)])
    }

    /// Label of the form `"tag":key`, as used by instruction nodes.
    pub fn tagged(tag: &str, key: i64) -> Self {
        Label::new([Atom::str(tag), Atom::Int(key)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The single integer of a one-atom integer label.
    pub fn as_int(&self) -> Option<i64> {
        match self.0.as_slice() {
            [Atom::Int(i)] => Some(*i),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("empty");
        }
        for (i, atom) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{atom}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Int,
    Char,
    Str,
    Atom,
    List,
}

impl VarKind {
    pub fn keyword(self) -> &'static str {
        match self {
            VarKind::Int => "int",
            VarKind::Char => "char",
            VarKind::Str => "string",
            VarKind::Atom => "atom",
            VarKind::List => "list",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "int" => VarKind::Int,
            "char" => VarKind::Char,
            "string" => VarKind::Str,
            "atom" => VarKind::Atom,
            "list" => VarKind::List,
            _ => return None,
        })
    }

    fn admits(self, atom: &Atom) -> bool {
        match self {
            VarKind::Int => matches!(atom, Atom::Int(_)),
            VarKind::Char => atom.is_char(),
            VarKind::Str => matches!(atom, Atom::Str(_)),
            VarKind::Atom | VarKind::List => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
}

/// Index of a variable in its rule's declaration list.
pub type VarId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatternItem {
    Const(Atom),
    Var { id: VarId, kind: VarKind },
}

/// A label with variables. At most one item may be a list variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelPattern {
    items: Vec<PatternItem>,
    list_pos: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("label pattern has more than one list variable")]
pub struct TooManyListVars;

impl LabelPattern {
    pub fn new(items: Vec<PatternItem>) -> Result<Self, TooManyListVars> {
        let mut list_pos = None;
        for (i, item) in items.iter().enumerate() {
            if let PatternItem::Var {
                kind: VarKind::List,
                ..
            } = item
            {
                if list_pos.replace(i).is_some() {
                    return Err(TooManyListVars);
                }
            }
        }
        Ok(LabelPattern { items, list_pos })
    }

    pub fn empty() -> Self {
        LabelPattern::default()
    }

    pub fn items(&self) -> &[PatternItem] {
        &self.items
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.items.iter().filter_map(|it| match it {
            PatternItem::Var { id, .. } => Some(*id),
            PatternItem::Const(_) => None,
        })
    }

    /// Unifies `value` against this pattern, extending `asg`.
    ///
    /// On mismatch the assignment is left exactly as it was.
    pub fn unify(&self, value: &Label, asg: &mut Assignment) -> Result<(), Mismatch> {
        let mark = asg.mark();
        let res = self.unify_inner(value.atoms(), asg);
        if res.is_err() {
            asg.undo_to(mark);
        }
        res
    }

    fn unify_inner(&self, atoms: &[Atom], asg: &mut Assignment) -> Result<(), Mismatch> {
        let n = self.items.len();
        let (head, tail_len) = match self.list_pos {
            None => {
                if atoms.len() != n {
                    return Err(Mismatch);
                }
                (n, 0)
            }
            Some(p) => {
                if atoms.len() + 1 < n {
                    return Err(Mismatch);
                }
                (p, n - p - 1)
            }
        };
        for (item, atom) in self.items[..head].iter().zip(atoms) {
            unify_item(item, atom, asg)?;
        }
        if let Some(p) = self.list_pos {
            let split = atoms.len() - tail_len;
            let PatternItem::Var { id, .. } = &self.items[p] else {
                unreachable!("list position always holds a variable")
            };
            let middle = &atoms[head..split];
            match asg.get(*id) {
                Some(Value::List(bound)) => {
                    if bound.atoms() != middle {
                        return Err(Mismatch);
                    }
                }
                Some(Value::Atom(_)) => return Err(Mismatch),
                None => asg.bind(*id, Value::List(Label::new(middle.iter().cloned()))),
            }
            for (item, atom) in self.items[p + 1..].iter().zip(&atoms[split..]) {
                unify_item(item, atom, asg)?;
            }
        }
        Ok(())
    }

    /// Builds the label denoted by this pattern under `asg`.
    pub fn eval(&self, asg: &Assignment) -> Result<Label, UnboundVar> {
        let mut out = SmallVec::new();
        for item in &self.items {
            match item {
                PatternItem::Const(a) => out.push(a.clone()),
                PatternItem::Var { id, .. } => match asg.get(*id) {
                    Some(Value::Atom(a)) => out.push(a.clone()),
                    Some(Value::List(l)) => out.extend(l.atoms().iter().cloned()),
                    None => return Err(UnboundVar(*id)),
                },
            }
        }
        Ok(Label(out))
    }
}

fn unify_item(item: &PatternItem, atom: &Atom, asg: &mut Assignment) -> Result<(), Mismatch> {
    match item {
        PatternItem::Const(c) => (c == atom).then_some(()).ok_or(Mismatch),
        PatternItem::Var { id, kind } => {
            if !kind.admits(atom) {
                return Err(Mismatch);
            }
            match asg.get(*id) {
                Some(Value::Atom(bound)) => (bound == atom).then_some(()).ok_or(Mismatch),
                // a list variable occurring as a single item binds a one-atom list
                Some(Value::List(bound)) => {
                    (bound.atoms() == std::slice::from_ref(atom)).then_some(()).ok_or(Mismatch)
                }
                None => {
                    let v = if *kind == VarKind::List {
                        Value::List(Label::new([atom.clone()]))
                    } else {
                        Value::Atom(atom.clone())
                    };
                    asg.bind(*id, v);
                    Ok(())
                }
            }
        }
    }
}

/// Label unification failed. A normal outcome during matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("label mismatch")]
pub struct Mismatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("variable #{0} is unbound")]
pub struct UnboundVar(pub VarId);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Atom(Atom),
    List(Label),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Atom(a) => a.as_int(),
            Value::List(l) => l.as_int(),
        }
    }
}

/// Variable bindings built up during matching.
///
/// Bindings are recorded on a trail so that a failed search branch can be
/// undone with [`Assignment::undo_to`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    slots: Vec<Option<Value>>,
    trail: Vec<VarId>,
}

impl Assignment {
    pub fn new(var_count: usize) -> Self {
        Assignment {
            slots: vec![None; var_count],
            trail: Vec::new(),
        }
    }

    pub fn get(&self, id: VarId) -> Option<&Value> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub fn bind(&mut self, id: VarId, v: Value) {
        if id >= self.slots.len() {
            self.slots.resize(id + 1, None);
        }
        debug_assert!(self.slots[id].is_none(), "rebinding variable #{id}");
        self.slots[id] = Some(v);
        self.trail.push(id);
    }

    pub fn mark(&self) -> usize {
        self.trail.len()
    }

    pub fn undo_to(&mut self, mark: usize) {
        for id in self.trail.drain(mark..) {
            self.slots[id] = None;
        }
    }

    pub fn clear(&mut self) {
        self.undo_to(0);
    }

    pub fn bound_count(&self) -> usize {
        self.trail.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    Out,
    In,
}

/// Integer-valued expression inside a `where` clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Int(i64),
    Var(VarId),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    /// Degree of the host node matched by the left-hand node at this index.
    Deg(Degree, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Cmp(CmpOp, Term, Term),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

impl Term {
    /// `None` if a variable is unbound or bound to something other than an
    /// integer; comparisons involving such a term are false.
    pub fn eval(&self, asg: &Assignment, degree: &dyn Fn(Degree, usize) -> i64) -> Option<i64> {
        Some(match self {
            Term::Int(i) => *i,
            Term::Var(v) => asg.get(*v)?.as_int()?,
            Term::Add(a, b) => a.eval(asg, degree)?.wrapping_add(b.eval(asg, degree)?),
            Term::Sub(a, b) => a.eval(asg, degree)?.wrapping_sub(b.eval(asg, degree)?),
            Term::Neg(a) => a.eval(asg, degree)?.wrapping_neg(),
            Term::Deg(d, node) => degree(*d, *node),
        })
    }

    fn visit_vars(&self, f: &mut dyn FnMut(VarId)) {
        match self {
            Term::Var(v) => f(*v),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Term::Neg(a) => a.visit_vars(f),
            Term::Int(_) | Term::Deg(..) => {}
        }
    }

    fn visit_nodes(&self, f: &mut dyn FnMut(usize)) {
        match self {
            Term::Deg(_, n) => f(*n),
            Term::Add(a, b) | Term::Sub(a, b) => {
                a.visit_nodes(f);
                b.visit_nodes(f);
            }
            Term::Neg(a) => a.visit_nodes(f),
            Term::Int(_) | Term::Var(_) => {}
        }
    }
}

impl Condition {
    pub fn eval(&self, asg: &Assignment, degree: &dyn Fn(Degree, usize) -> i64) -> bool {
        match self {
            Condition::Cmp(op, a, b) => {
                let (Some(a), Some(b)) = (a.eval(asg, degree), b.eval(asg, degree)) else {
                    return false;
                };
                match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                }
            }
            Condition::And(a, b) => a.eval(asg, degree) && b.eval(asg, degree),
            Condition::Or(a, b) => a.eval(asg, degree) || b.eval(asg, degree),
            Condition::Not(a) => !a.eval(asg, degree),
        }
    }

    pub fn visit_vars(&self, f: &mut dyn FnMut(VarId)) {
        match self {
            Condition::Cmp(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
            Condition::Not(a) => a.visit_vars(f),
        }
    }

    /// Left-hand node indices referenced by degree functions.
    pub fn visit_nodes(&self, f: &mut dyn FnMut(usize)) {
        match self {
            Condition::Cmp(_, a, b) => {
                a.visit_nodes(f);
                b.visit_nodes(f);
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.visit_nodes(f);
                b.visit_nodes(f);
            }
            Condition::Not(a) => a.visit_nodes(f),
        }
    }
}
