//! The `.mil` mini imperative language: routines with contracts, a single
//! `from .. until .. loop .. end` construct, conditionals and checks.

mod analyze;
mod check;
mod lexer;
mod parser;
mod pretty;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analyze::{analyze, branch_leaves, has_top_level_if, Leaf, LoopInfo, Side, StructureInfo};
pub use check::check_routine;
pub use parser::parse;
pub use pretty::{pretty, pretty_expr};

pub type Name = String;

/// Identifies an instruction. Parsed code gets `copy == 0` and a pre-order
/// `index`; unrolled copies of a loop body keep the original index and
/// record their level in `copy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub index: u32,
    pub copy: u32,
}

impl NodeId {
    pub const fn new(index: u32) -> Self {
        NodeId { index, copy: 0 }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.copy == 0 {
            write!(f, "n{}", self.index)
        } else {
            write!(f, "n{}.{}", self.index, self.copy)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Type {
    Integer,
    Boolean,
    Array,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Integer => "INTEGER",
            Type::Boolean => "BOOLEAN",
            Type::Array => "ARRAY",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: Name,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Local {
    pub name: Name,
    pub ty: Type,
    pub init: Option<Expr>,
}

/// A tagged postcondition clause.
#[derive(Clone, Debug, Eq)]
pub struct Clause {
    pub tag: Name,
    pub expr: Expr,
    pub span: Span,
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag && self.expr == other.expr
    }
}

pub type Block = Vec<Instr>;

#[derive(Clone, Debug, Eq)]
pub struct Routine {
    pub name: Name,
    pub params: Vec<Param>,
    pub require: Option<Expr>,
    pub require_span: Span,
    pub locals: Vec<Local>,
    pub body: Block,
    pub ensure: Vec<Clause>,
    pub span: Span,
}

// Structural equality: node ids and source positions are ignored.
impl PartialEq for Routine {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.require == other.require
            && self.locals == other.locals
            && self.body == other.body
            && self.ensure == other.ensure
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckOrigin {
    User,
    /// Inserted by instrumentation. Target 0 is the depth guard placed by the
    /// unroller; SCU targets are numbered from 1.
    Seeded { target: u32 },
}

#[derive(Clone, Debug, Eq)]
pub struct Instr {
    pub id: NodeId,
    pub span: Span,
    pub kind: InstrKind,
}

impl PartialEq for Instr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Instr {
    pub fn new(id: NodeId, span: Span, kind: InstrKind) -> Self {
        Instr { id, span, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstrKind {
    Assign {
        target: Name,
        value: Expr,
    },
    AssignIndex {
        array: Name,
        index: Expr,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Block,
        else_branch: Option<Block>,
    },
    Loop {
        from: Option<Block>,
        until: Expr,
        body: Block,
        label: Name,
    },
    Check {
        cond: Expr,
        tag: Option<Name>,
        origin: CheckOrigin,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub const RELATIONAL: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];

    pub fn is_relational(self) -> bool {
        BinOp::RELATIONAL.contains(&self)
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "div",
            BinOp::Mod => "mod",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "=",
            BinOp::Ne => "/=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "implies",
        }
    }
}

/// Bounded quantifiers and folds over an inclusive integer range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    All,
    Some,
    Sum,
    Product,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::All => "all",
            Quantifier::Some => "some",
            Quantifier::Sum => "sum",
            Quantifier::Product => "product",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(Name),
    Index { array: Name, index: Box<Expr> },
    Count(Name),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Across {
        var: Name,
        lo: Box<Expr>,
        hi: Box<Expr>,
        quantifier: Quantifier,
        body: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn negation(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Calls `f` on every variable name read by the expression, including
    /// quantifier-bound ones.
    pub fn visit_names(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(n) | Expr::Count(n) => f(n),
            Expr::Index { array, index } => {
                f(array);
                index.visit_names(f);
            }
            Expr::Unary(_, e) => e.visit_names(f),
            Expr::Binary(_, l, r) => {
                l.visit_names(f);
                r.visit_names(f);
            }
            Expr::Across { var, lo, hi, body, .. } => {
                f(var);
                lo.visit_names(f);
                hi.visit_names(f);
                body.visit_names(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_expr(self))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    Type(String),
    Unresolved(String),
    Duplicate(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{line}:{col}: {}", describe(.kind))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: u32,
    pub col: u32,
}

fn describe(kind: &ParseErrorKind) -> String {
    match kind {
        ParseErrorKind::Syntax(m) => format!("syntax error: {m}"),
        ParseErrorKind::Type(m) => format!("type error: {m}"),
        ParseErrorKind::Unresolved(m) => format!("unresolved identifier `{m}`"),
        ParseErrorKind::Duplicate(m) => format!("duplicate {m}"),
    }
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, span: Span) -> Self {
        ParseError {
            kind,
            line: span.line,
            col: span.col,
        }
    }
}

impl Routine {
    /// Variable names in storage order: parameters, then locals.
    pub fn variables(&self) -> Vec<(Name, Type)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.ty))
            .chain(self.locals.iter().map(|l| (l.name.clone(), l.ty)))
            .collect()
    }

    pub fn declares(&self, name: &str) -> bool {
        self.params.iter().any(|p| p.name == name) || self.locals.iter().any(|l| l.name == name)
    }

    /// Reassigns pre-order node ids and loop labels.
    pub fn renumber(&mut self) {
        fn walk(block: &mut Block, next: &mut u32, loops: &mut u32) {
            for instr in block {
                instr.id = NodeId::new(*next);
                *next += 1;
                match &mut instr.kind {
                    InstrKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        walk(then_branch, next, loops);
                        if let Some(b) = else_branch {
                            walk(b, next, loops);
                        }
                    }
                    InstrKind::Loop { from, body, label, .. } => {
                        *loops += 1;
                        *label = format!("loop{loops}");
                        if let Some(b) = from {
                            walk(b, next, loops);
                        }
                        walk(body, next, loops);
                    }
                    _ => {}
                }
            }
        }
        let mut next = 1;
        let mut loops = 0;
        walk(&mut self.body, &mut next, &mut loops);
    }

    /// Largest node index in use.
    pub fn max_index(&self) -> u32 {
        let mut max = 0;
        visit_instrs(&self.body, &mut |i| max = max.max(i.id.index));
        max
    }

    /// Finds an instruction by id.
    pub fn find(&self, id: NodeId) -> Option<&Instr> {
        fn go(block: &Block, id: NodeId) -> Option<&Instr> {
            for instr in block {
                if instr.id == id {
                    return Some(instr);
                }
                let found = match &instr.kind {
                    InstrKind::If {
                        then_branch,
                        else_branch,
                        ..
                    } => go(then_branch, id).or_else(|| else_branch.as_ref().and_then(|b| go(b, id))),
                    InstrKind::Loop { from, body, .. } => {
                        from.as_ref().and_then(|b| go(b, id)).or_else(|| go(body, id))
                    }
                    _ => None,
                };
                if found.is_some() {
                    return found;
                }
            }
            None
        }
        go(&self.body, id)
    }

    /// A name not yet used by any declaration, derived from `base`.
    pub fn fresh_name(&self, base: &str) -> Name {
        if !self.declares(base) {
            return base.to_string();
        }
        (1..)
            .map(|k| format!("{base}_{k}"))
            .find(|n| !self.declares(n))
            .unwrap()
    }
}

/// Pre-order visit of every instruction, descending into branches and loops.
pub fn visit_instrs<'a>(block: &'a Block, f: &mut impl FnMut(&'a Instr)) {
    for instr in block {
        f(instr);
        match &instr.kind {
            InstrKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                visit_instrs(then_branch, f);
                if let Some(b) = else_branch {
                    visit_instrs(b, f);
                }
            }
            InstrKind::Loop { from, body, .. } => {
                if let Some(b) = from {
                    visit_instrs(b, f);
                }
                visit_instrs(body, f);
            }
            _ => {}
        }
    }
}
