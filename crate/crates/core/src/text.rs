//! Concrete syntax: host graphs, rules, programs and op scripts.
//!
//! The grammars are documented in `docs/formats.md`.

use std::fmt::{self, Write as _};

use crate::host::{GraphError, HostGraph, Mark, NodeId};
use crate::interp::{Command, Program, ProgramError};
use crate::label::{
    Atom, CmpOp, Condition, Degree, Label, LabelPattern, PatternItem, Term, VarDecl, VarKind,
};
use crate::rule::{MarkPat, PatternEdge, PatternGraph, PatternNode, Rule, RuleDef, RuleError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("{line}:{col}: unsupported feature: {feature}")]
    Unsupported {
        line: u32,
        col: u32,
        feature: &'static str,
    },
    #[error("{line}:{col}: {source}")]
    Graph { line: u32, col: u32, source: GraphError },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const SYMBOLS: &[&str] = &[
    "=>", "!=", "<=", ">=", "(", ")", "[", "]", "{", "}", ",", ";", ":", "|", "=", "!", "#", "<", ">", "+",
    "-", "*", "/", ".",
];

fn lex(src: &str) -> Result<Vec<Token>, TextError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let syntax = |line, col, msg: String| TextError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            i += 2;
            col += 2;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(l0, c0, "unterminated comment".into())),
                    Some('*') if chars.get(i + 1) == Some(&'/') => {
                        i += 2;
                        col += 2;
                        break;
                    }
                    Some('\n') => {
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(_) => {
                        i += 1;
                        col += 1;
                    }
                }
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(syntax(l0, c0, "unterminated string".into())),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => match chars.get(i + 1) {
                        Some(&e @ ('"' | '\\')) => {
                            s.push(e);
                            i += 2;
                            col += 2;
                        }
                        _ => return Err(syntax(line, col, "unknown escape in string".into())),
                    },
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Str(s),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            let v = text
                .parse::<i64>()
                .map_err(|_| syntax(l0, c0, format!("integer `{text}` out of range")))?;
            out.push(Token {
                tok: Tok::Int(v),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                col: c0,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let Some(&sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
            return Err(syntax(l0, c0, format!("unexpected character `{c}`")));
        };
        i += sym.len();
        col += sym.len() as u32;
        out.push(Token {
            tok: Tok::Sym(sym),
            line: l0,
            col: c0,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "if", "try", "then", "else", "skip", "fail", "break", "or", "where", "interface", "and", "not", "empty",
    "indeg", "outdeg",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, TextError>;

impl Parser {
    fn new(src: &str) -> PResult<Parser> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(TextError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn unsupported<T>(&self, feature: &'static str) -> PResult<T> {
        let (line, col) = self.here();
        Err(TextError::Unsupported { line, col, feature })
    }

    fn expected<T>(&self, what: &str) -> PResult<T> {
        self.err(format!("expected {what}, found {}", self.peek()))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.expected(&format!("`{s}`"))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.expected(&format!("`{k}`"))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.expected("end of input")
        }
    }

    /// A non-keyword identifier.
    fn name(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.expected(what),
        }
    }

    /// Identifier or integer, as used for node and edge ids.
    fn item_id(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(i.to_string())
            }
            Tok::Ident(_) => self.name(what),
            _ => self.expected(what),
        }
    }

    fn int_literal(&mut self) -> PResult<Option<i64>> {
        let neg = self.is_sym("-") && matches!(self.peek_at(1), Tok::Int(_));
        if neg {
            self.bump();
        }
        if let Tok::Int(i) = *self.peek() {
            self.bump();
            return Ok(Some(if neg { -i } else { i }));
        }
        Ok(None)
    }

    /// `(R)` or `(B)` after an id.
    fn flag(&mut self) -> PResult<Option<char>> {
        if !self.is_sym("(") {
            return Ok(None);
        }
        self.bump();
        let f = match self.peek() {
            Tok::Ident(s) if s == "R" => 'R',
            Tok::Ident(s) if s == "B" => 'B',
            _ => return self.expected("`R`"),
        };
        self.bump();
        self.expect_sym(")")?;
        Ok(Some(f))
    }

    /// `# mark` suffix; `any` only when `wildcard` is allowed.
    fn mark(&mut self, wildcard: bool) -> PResult<MarkPat> {
        if !self.eat_sym("#") {
            return Ok(MarkPat::Unmarked);
        }
        let Tok::Ident(s) = self.peek().clone() else {
            return self.expected("a mark");
        };
        let m = match Mark::from_keyword(&s) {
            Some(m) => MarkPat::Mark(m),
            None if s == "any" && wildcard => MarkPat::Any,
            None if s == "any" => return self.err("wildcard mark `any` is only allowed in rules"),
            None => return self.err(format!("unknown mark `{s}`")),
        };
        self.bump();
        Ok(m)
    }

    fn host_label(&mut self) -> PResult<Label> {
        if self.eat_kw("empty") {
            return Ok(Label::empty());
        }
        let mut atoms = Vec::new();
        loop {
            if let Some(i) = self.int_literal()? {
                atoms.push(Atom::Int(i));
            } else if let Tok::Str(s) = self.peek().clone() {
                self.bump();
                atoms.push(Atom::str(&s));
            } else {
                return self.expected("a label");
            }
            if !self.eat_sym(":") {
                break;
            }
        }
        if self.is_sym(".") {
            return self.unsupported("string concatenation");
        }
        Ok(Label::new(atoms))
    }

    fn numeric_id(&mut self, prefix: char, what: &str) -> PResult<u32> {
        let (line, col) = self.here();
        let raw = self.item_id(what)?;
        let digits = raw.strip_prefix(prefix).unwrap_or(&raw);
        digits.parse::<u32>().map_err(|_| TextError::Syntax {
            line,
            col,
            msg: format!("{what} `{raw}` is not of the form {prefix}<number>"),
        })
    }

    fn host_graph(&mut self) -> PResult<HostGraph> {
        let mut g = HostGraph::new();
        self.expect_sym("[")?;
        while self.eat_sym("(") {
            let (line, col) = self.here();
            let id = self.numeric_id('n', "node id")?;
            let rooted = match self.flag()? {
                Some('R') => true,
                Some(_) => return self.err("only `(R)` may follow a node id"),
                None => false,
            };
            self.expect_sym(",")?;
            let label = self.host_label()?;
            let mark = match self.mark(false)? {
                MarkPat::Mark(m) => Some(m),
                _ => None,
            };
            self.expect_sym(")")?;
            g.add_node_with_id(NodeId(id), label, mark, rooted)
                .map_err(|source| TextError::Graph { line, col, source })?;
        }
        self.expect_sym("|")?;
        while self.eat_sym("(") {
            let (line, col) = self.here();
            let id = self.numeric_id('e', "edge id")?;
            if self.flag()?.is_some() {
                return self.unsupported("bidirectional edges");
            }
            self.expect_sym(",")?;
            let src = self.numeric_id('n', "node id")?;
            self.expect_sym(",")?;
            let tgt = self.numeric_id('n', "node id")?;
            let (label, mark) = if self.eat_sym(",") {
                let l = self.host_label()?;
                let m = match self.mark(false)? {
                    MarkPat::Mark(m) => Some(m),
                    _ => None,
                };
                (l, m)
            } else {
                (Label::empty(), None)
            };
            self.expect_sym(")")?;
            g.add_edge_with_id(crate::host::EdgeId(id), NodeId(src), NodeId(tgt), label, mark)
                .map_err(|source| TextError::Graph { line, col, source })?;
        }
        self.expect_sym("]")?;
        Ok(g)
    }

    fn var_decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut vars = Vec::new();
        self.expect_sym("(")?;
        if self.eat_sym(")") {
            return Ok(vars);
        }
        loop {
            let mut names = vec![self.name("a variable name")?];
            while self.eat_sym(",") {
                names.push(self.name("a variable name")?);
            }
            self.expect_sym(":")?;
            let Tok::Ident(kw) = self.peek().clone() else {
                return self.expected("a type");
            };
            let Some(kind) = VarKind::from_keyword(&kw) else {
                return self.err(format!("unknown type `{kw}`"));
            };
            self.bump();
            vars.extend(names.into_iter().map(|name| VarDecl { name, kind }));
            if !self.eat_sym(";") {
                break;
            }
        }
        self.expect_sym(")")?;
        Ok(vars)
    }

    fn label_pattern(&mut self, vars: &[VarDecl]) -> PResult<LabelPattern> {
        if self.eat_kw("empty") {
            return Ok(LabelPattern::empty());
        }
        let mut items = Vec::new();
        loop {
            if let Some(i) = self.int_literal()? {
                items.push(PatternItem::Const(Atom::Int(i)));
            } else {
                match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        items.push(PatternItem::Const(Atom::str(&s)));
                    }
                    Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                        let Some(id) = vars.iter().position(|v| v.name == s) else {
                            return self.err(format!("undeclared variable `{s}`"));
                        };
                        self.bump();
                        items.push(PatternItem::Var {
                            id,
                            kind: vars[id].kind,
                        });
                    }
                    _ => return self.expected("a label"),
                }
            }
            if matches!(self.peek(), Tok::Sym("+" | "-" | "*" | "/")) {
                return self.unsupported("arithmetic in labels");
            }
            if self.is_sym(".") {
                return self.unsupported("string concatenation");
            }
            if !self.eat_sym(":") {
                break;
            }
        }
        LabelPattern::new(items).or_else(|_| self.err("at most one list variable per label"))
    }

    fn pattern_graph(&mut self, vars: &[VarDecl]) -> PResult<PatternGraph> {
        let mut g = PatternGraph::default();
        self.expect_sym("[")?;
        while self.eat_sym("(") {
            let id = self.item_id("a node id")?;
            let rooted = match self.flag()? {
                Some('R') => true,
                Some(_) => return self.err("only `(R)` may follow a node id"),
                None => false,
            };
            self.expect_sym(",")?;
            let label = self.label_pattern(vars)?;
            let mark = self.mark(true)?;
            self.expect_sym(")")?;
            g.nodes.push(PatternNode {
                id,
                label,
                mark,
                rooted,
            });
        }
        self.expect_sym("|")?;
        while self.eat_sym("(") {
            let id = self.item_id("an edge id")?;
            if self.flag()?.is_some() {
                return self.unsupported("bidirectional edges");
            }
            self.expect_sym(",")?;
            let src = self.endpoint(&g)?;
            self.expect_sym(",")?;
            let tgt = self.endpoint(&g)?;
            let (label, mark) = if self.eat_sym(",") {
                (self.label_pattern(vars)?, self.mark(true)?)
            } else {
                (LabelPattern::empty(), MarkPat::Unmarked)
            };
            self.expect_sym(")")?;
            g.edges.push(PatternEdge {
                id,
                src,
                tgt,
                label,
                mark,
            });
        }
        self.expect_sym("]")?;
        Ok(g)
    }

    fn endpoint(&mut self, g: &PatternGraph) -> PResult<usize> {
        let n = self.item_id("a node id")?;
        match g.node_index(&n) {
            Some(i) => Ok(i),
            None => self.err(format!("edge endpoint `{n}` is not a node of this graph")),
        }
    }

    fn rule(&mut self) -> PResult<Rule> {
        let name = self.name("a rule name")?;
        if name.starts_with(|c: char| c.is_uppercase()) {
            return self.err(format!("rule name `{name}` must start with a lower-case letter"));
        }
        let vars = self.var_decls()?;
        let lhs = self.pattern_graph(&vars)?;
        self.expect_sym("=>")?;
        let rhs = self.pattern_graph(&vars)?;
        self.expect_kw("interface")?;
        self.expect_sym("=")?;
        self.expect_sym("{")?;
        let mut interface = Vec::new();
        if !self.is_sym("}") {
            loop {
                interface.push(self.item_id("a node id")?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("}")?;
        let cond = if self.eat_kw("where") {
            Some(self.condition(&vars, &lhs)?)
        } else {
            None
        };
        Ok(Rule::new(RuleDef {
            name,
            vars,
            lhs,
            rhs,
            interface,
            cond,
        })?)
    }

    fn condition(&mut self, vars: &[VarDecl], lhs: &PatternGraph) -> PResult<Condition> {
        let mut c = self.conjunction(vars, lhs)?;
        while self.eat_kw("or") {
            let r = self.conjunction(vars, lhs)?;
            c = Condition::Or(Box::new(c), Box::new(r));
        }
        Ok(c)
    }

    fn conjunction(&mut self, vars: &[VarDecl], lhs: &PatternGraph) -> PResult<Condition> {
        let mut c = self.negation(vars, lhs)?;
        while self.eat_kw("and") {
            let r = self.negation(vars, lhs)?;
            c = Condition::And(Box::new(c), Box::new(r));
        }
        Ok(c)
    }

    fn negation(&mut self, vars: &[VarDecl], lhs: &PatternGraph) -> PResult<Condition> {
        if self.eat_kw("not") {
            return Ok(Condition::Not(Box::new(self.negation(vars, lhs)?)));
        }
        if self.is_kw("edge") && matches!(self.peek_at(1), Tok::Sym("(")) {
            return self.unsupported("edge predicates");
        }
        if self.is_sym("(") {
            // either a parenthesised condition or a comparison whose left
            // operand starts with a parenthesis
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.condition(vars, lhs) {
                if self.eat_sym(")") {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let a = self.term(vars, lhs)?;
        let op = match self.peek() {
            Tok::Sym("=") => CmpOp::Eq,
            Tok::Sym("!=") => CmpOp::Ne,
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            _ => return self.expected("a comparison operator"),
        };
        self.bump();
        let b = self.term(vars, lhs)?;
        Ok(Condition::Cmp(op, a, b))
    }

    fn term(&mut self, vars: &[VarDecl], lhs: &PatternGraph) -> PResult<Term> {
        let mut t = self.factor(vars, lhs)?;
        loop {
            if self.eat_sym("+") {
                t = Term::Add(Box::new(t), Box::new(self.factor(vars, lhs)?));
            } else if self.eat_sym("-") {
                t = Term::Sub(Box::new(t), Box::new(self.factor(vars, lhs)?));
            } else if matches!(self.peek(), Tok::Sym("*" | "/")) {
                return self.unsupported("multiplication and division");
            } else {
                return Ok(t);
            }
        }
    }

    fn factor(&mut self, vars: &[VarDecl], lhs: &PatternGraph) -> PResult<Term> {
        if self.eat_sym("-") {
            return Ok(Term::Neg(Box::new(self.factor(vars, lhs)?)));
        }
        if self.eat_sym("(") {
            let t = self.term(vars, lhs)?;
            self.expect_sym(")")?;
            return Ok(t);
        }
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Term::Int(i))
            }
            Tok::Ident(k) if k == "indeg" || k == "outdeg" => {
                self.bump();
                self.expect_sym("(")?;
                let id = self.item_id("a node id")?;
                let Some(i) = lhs.node_index(&id) else {
                    return self.err(format!("`{id}` is not a left-hand node"));
                };
                self.expect_sym(")")?;
                let d = if k == "indeg" { Degree::In } else { Degree::Out };
                Ok(Term::Deg(d, i))
            }
            Tok::Ident(k) if k == "length" => self.unsupported("length"),
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                if matches!(self.peek_at(1), Tok::Sym("(")) {
                    return self.unsupported("type predicates");
                }
                let Some(id) = vars.iter().position(|v| v.name == s) else {
                    return self.err(format!("undeclared variable `{s}`"));
                };
                self.bump();
                Ok(Term::Var(id))
            }
            _ => self.expected("an integer expression"),
        }
    }

    fn comseq(&mut self) -> PResult<Command> {
        let mut cs = vec![self.block()?];
        while self.eat_sym(";") {
            cs.push(self.block()?);
        }
        Ok(if cs.len() == 1 { cs.pop().expect("one") } else { Command::Seq(cs) })
    }

    fn block(&mut self) -> PResult<Command> {
        let c = self.simple_block()?;
        if self.is_kw("or") {
            return self.unsupported("the `or` command");
        }
        Ok(c)
    }

    fn simple_block(&mut self) -> PResult<Command> {
        let c = if self.eat_sym("(") {
            let c = self.comseq()?;
            self.expect_sym(")")?;
            c
        } else if self.eat_sym("{") {
            let mut names = vec![self.name("a rule name")?];
            while self.eat_sym(",") {
                names.push(self.name("a rule name")?);
            }
            self.expect_sym("}")?;
            Command::RuleSet(names)
        } else if self.is_kw("if") || self.is_kw("try") {
            let is_try = self.is_kw("try");
            self.bump();
            let cond = self.block()?;
            let then = if self.eat_kw("then") { self.block()? } else { Command::Skip };
            let other = if self.eat_kw("else") { self.block()? } else { Command::Skip };
            let (c, t, e) = (Box::new(cond), Box::new(then), Box::new(other));
            return Ok(if is_try { Command::Try(c, t, e) } else { Command::If(c, t, e) });
        } else if self.eat_kw("skip") {
            Command::Skip
        } else if self.eat_kw("fail") {
            Command::Fail
        } else if self.eat_kw("break") {
            Command::Break
        } else {
            let n = self.name("a command")?;
            if n.starts_with(|c: char| c.is_uppercase()) {
                Command::ProcCall(n)
            } else {
                Command::RuleCall(n)
            }
        };
        if self.eat_sym("!") {
            return Ok(Command::Loop(Box::new(c)));
        }
        Ok(c)
    }

    fn program(&mut self) -> PResult<(Vec<Rule>, Vec<(String, Command)>)> {
        let mut rules = Vec::new();
        let mut procs = Vec::new();
        while *self.peek() != Tok::Eof {
            match self.peek_at(1) {
                Tok::Sym("=") => {
                    let name = self.name("a procedure name")?;
                    if !name.starts_with(|c: char| c.is_uppercase()) {
                        return self.err(format!("procedure name `{name}` must start with an upper-case letter"));
                    }
                    self.bump();
                    procs.push((name, self.comseq()?));
                }
                Tok::Sym("(") => rules.push(self.rule()?),
                _ => {
                    self.bump();
                    return self.expected("`=` or `(` after a declaration name");
                }
            }
        }
        Ok((rules, procs))
    }
}

pub fn parse_host(text: &str) -> Result<HostGraph, TextError> {
    let mut p = Parser::new(text)?;
    let g = p.host_graph()?;
    p.expect_eof()?;
    Ok(g)
}

pub fn parse_rule(text: &str) -> Result<Rule, TextError> {
    let mut p = Parser::new(text)?;
    let r = p.rule()?;
    p.expect_eof()?;
    Ok(r)
}

pub fn parse_program(text: &str) -> Result<Program, TextError> {
    let mut p = Parser::new(text)?;
    let (rules, procs) = p.program()?;
    Ok(Program::new(rules, procs)?)
}

fn write_label(out: &mut String, l: &Label) {
    if l.is_empty() {
        out.push_str("empty");
        return;
    }
    for (i, a) in l.atoms().iter().enumerate() {
        if i > 0 {
            out.push(':');
        }
        match a {
            Atom::Int(v) => write!(out, "{v}").expect("string write"),
            Atom::Str(s) => {
                out.push('"');
                for ch in s.chars() {
                    if ch == '"' || ch == '\\' {
                        out.push('\\');
                    }
                    out.push(ch);
                }
                out.push('"');
            }
        }
    }
}

/// Canonical text of `g`: one item per line, ascending ids, labels always
/// written out.
pub fn print_host(g: &HostGraph) -> String {
    let mut out = String::from("[\n");
    for (id, n) in g.nodes() {
        write!(out, "  ({id}{}, ", if n.rooted() { "(R)" } else { "" }).expect("string write");
        write_label(&mut out, n.label());
        if let Some(m) = n.mark() {
            write!(out, " #{}", m.keyword()).expect("string write");
        }
        out.push_str(")\n");
    }
    out.push_str("|\n");
    for (id, e) in g.edges() {
        write!(out, "  ({id}, {}, {}, ", e.src(), e.tgt()).expect("string write");
        write_label(&mut out, e.label());
        if let Some(m) = e.mark() {
            write!(out, " #{}", m.keyword()).expect("string write");
        }
        out.push_str(")\n");
    }
    out.push_str("]\n");
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Insert,
    Search,
    Delete,
}

impl OpKind {
    /// The tag used both in op scripts and in instruction labels.
    pub fn tag(self) -> &'static str {
        match self {
            OpKind::Insert => "i",
            OpKind::Search => "s",
            OpKind::Delete => "d",
        }
    }

    pub fn from_tag(s: &str) -> Option<OpKind> {
        match s {
            "i" => Some(OpKind::Insert),
            "s" => Some(OpKind::Search),
            "d" => Some(OpKind::Delete),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Op {
    pub kind: OpKind,
    pub key: i64,
}

impl Op {
    pub fn insert(key: i64) -> Op {
        Op {
            kind: OpKind::Insert,
            key,
        }
    }

    pub fn search(key: i64) -> Op {
        Op {
            kind: OpKind::Search,
            key,
        }
    }

    pub fn delete(key: i64) -> Op {
        Op {
            kind: OpKind::Delete,
            key,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.tag(), self.key)
    }
}

/// A sequence of user instructions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpScript(pub Vec<Op>);

impl fmt::Display for OpScript {
    /// One instruction per line, parseable by [`parse_opscript`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for op in &self.0 {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

pub fn parse_opscript(text: &str) -> Result<OpScript, TextError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u32 + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |msg: String| TextError::Syntax { line, col: 1, msg };
        let mut parts = body.split_whitespace();
        let (Some(tag), Some(key), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("expected `<i|s|d> <key>`, found `{body}`")));
        };
        let kind = OpKind::from_tag(tag).ok_or_else(|| bad(format!("unknown instruction `{tag}`")))?;
        let key = key
            .parse::<i64>()
            .map_err(|_| bad(format!("key `{key}` is not an integer")))?;
        ops.push(Op { kind, key });
    }
    Ok(OpScript(ops))
}

/// The input graph for the tree program: one unmarked node per instruction,
/// labelled `"i":k`, `"s":k` or `"d":k`, chained in order, with the first
/// instruction rooted.
pub fn build_instruction_graph(ops: &OpScript) -> HostGraph {
    let mut g = HostGraph::new();
    let mut prev = None;
    for (i, op) in ops.0.iter().enumerate() {
        let n = g
            .add_node(Label::tagged(op.kind.tag(), op.key), None, i == 0)
            .expect("fresh node");
        if let Some(p) = prev {
            g.add_edge(p, n, Label::empty(), None).expect("live endpoints");
        }
        prev = Some(n);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rooted_instruction_node() {
        let g = parse_host("[ (n0(R), \"i\":5) | ]").unwrap();
        assert_eq!(g.node_count(), 1);
        let n = g.node(NodeId(0)).unwrap();
        assert!(n.rooted());
        assert_eq!(n.mark(), None);
        assert_eq!(*n.label(), Label::tagged("i", 5));
    }

    #[test]
    fn unknown_mark_is_reported() {
        let e = parse_host("[ (n0, 1 #purple) | ]").unwrap_err();
        assert!(e.to_string().contains("unknown mark"), "{e}");
        assert!(matches!(e, TextError::Syntax { line: 1, col: 11, .. }), "{e:?}");
    }

    #[test]
    fn dangling_endpoint_and_duplicate_ids() {
        assert!(matches!(
            parse_host("[ (n0, 1) | (e0, n0, n4, empty) ]"),
            Err(TextError::Graph { source: GraphError::NoNode(_), .. })
        ));
        assert!(parse_host("[ (n0, 1) (n0, 2) | ]").is_err());
    }

    #[test]
    fn print_is_canonical_and_reparses() {
        let text = "[ (n3, -2:\"a\\\"b\" #grey) (n1(R), empty) | (e7, n3, n1, 4 #dashed) (e2, n1, n1) ]";
        let g = parse_host(text).unwrap();
        let printed = print_host(&g);
        assert_eq!(
            printed,
            "[\n  (n1(R), empty)\n  (n3, -2:\"a\\\"b\" #grey)\n|\n  (e2, n1, n1, empty)\n  (e7, n3, n1, 4 #dashed)\n]\n"
        );
        assert_eq!(parse_host(&printed).unwrap(), g);
    }

    #[test]
    fn identity_rule_with_empty_sides() {
        let r = parse_rule("r() [ | ] => [ | ] interface = {}").unwrap();
        assert!(r.lhs().nodes.is_empty() && r.rhs().nodes.is_empty());
    }

    #[test]
    fn rule_with_condition() {
        let r = parse_rule(
            "go(o:char; x,n,m:int)
             [ (n1(R), n #grey) (n2, m #grey) (n3(R), o:x) | (e1, n1, n2, empty) ]
             => [ (n1, n #grey) (n2(R), m #grey) (n3(R), o:x) | (e1, n1, n2, empty) ]
             interface = {n1, n2, n3}
             where (m > n and x > n) or not outdeg(n2) = -(1 + 0)",
        )
        .unwrap();
        assert!(r.is_fast());
        assert_eq!(r.vars().len(), 4);
        assert!(matches!(r.def().cond, Some(Condition::Or(..))));
    }

    #[test]
    fn rule_errors() {
        let undeclared = parse_rule("r(a:int) [ (n1, a) | ] => [ (n1, b) | ] interface = {n1}").unwrap_err();
        assert!(undeclared.to_string().contains("undeclared variable `b`"));
        let rhs_only =
            parse_rule("r(a,b:int) [ (n1, a) | ] => [ (n1, b) | ] interface = {n1}").unwrap_err();
        assert!(matches!(rhs_only, TextError::Rule(RuleError::UnboundVar { .. })));
        let unsupported =
            parse_rule("r() [ (n1, 1) (n2, 2) | (e1(B), n1, n2) ] => [ | ] interface = {}").unwrap_err();
        assert!(matches!(unsupported, TextError::Unsupported { .. }));
        let edge_pred =
            parse_rule("r() [ (n1, 1) | ] => [ (n1, 1) | ] interface = {n1} where edge(n1, n1)").unwrap_err();
        assert!(matches!(edge_pred, TextError::Unsupported { .. }));
    }

    #[test]
    fn program_structure_and_errors() {
        let src = "Main = a; (try a then P else (b; break))!  // trailing
                   P = {a, b}!
                   a() [ | ] => [ | ] interface = {}
                   /* block */ b() [ | ] => [ | ] interface = {}";
        let p = parse_program(src).unwrap();
        assert_eq!(p.rules().len(), 2);
        assert_eq!(p.procedures().len(), 2);
        let rec = parse_program("Main = X\nX = Main").unwrap_err();
        assert!(matches!(rec, TextError::Program(ProgramError::Recursion(_))));
        let brk = parse_program("Main = (try (break) then skip)!").unwrap_err();
        assert!(matches!(brk, TextError::Program(ProgramError::BreakInCondition("try"))));
        let outside = parse_program("Main = break").unwrap_err();
        assert!(matches!(outside, TextError::Program(ProgramError::BreakOutsideLoop(_))));
        let or = parse_program("Main = skip or fail").unwrap_err();
        assert!(matches!(or, TextError::Unsupported { .. }));
        let unknown = parse_program("Main = r").unwrap_err();
        assert!(matches!(unknown, TextError::Program(ProgramError::UnknownRule(_))));
    }

    #[test]
    fn opscript_parsing() {
        let ops = parse_opscript("i 5\n\n# comment\ni 2  # trailing\ni 7\n").unwrap();
        assert_eq!(ops.0, vec![Op::insert(5), Op::insert(2), Op::insert(7)]);
        assert_eq!(parse_opscript(&ops.to_string()).unwrap(), ops);
        let e = parse_opscript("i 1\nx 9\n").unwrap_err();
        assert!(matches!(e, TextError::Syntax { line: 2, .. }));
        assert!(parse_opscript("i\n").is_err());
        assert!(parse_opscript("i 1 2\n").is_err());
        assert!(parse_opscript("i one\n").is_err());
    }

    #[test]
    fn instruction_chain() {
        let ops = parse_opscript("i 5\ni 2\ni 7").unwrap();
        let g = build_instruction_graph(&ops);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.roots(), vec![NodeId(0)]);
        let labels: Vec<String> = g.nodes().map(|(_, n)| n.label().to_string()).collect();
        assert_eq!(labels, ["\"i\":5", "\"i\":2", "\"i\":7"]);
        assert!(g.edges().all(|(_, e)| e.tgt().0 == e.src().0 + 1));
        assert!(build_instruction_graph(&OpScript::default()).is_empty());
    }
}
