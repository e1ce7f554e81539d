//! First-order mutants of a routine. Contracts and user checks are never
//! touched; every mutant differs from the original at a single position and
//! type-checks.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::{check_routine, pretty_expr, BinOp, Block, Expr, InstrKind, NodeId, Routine, Type, UnOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    /// Replace a comparison operator by another one.
    RelopSwap,
    /// Replace an arithmetic operator by another one.
    ArithSwap,
    /// Add or subtract 1 from an integer literal or an integer operand.
    ConstOffset,
    /// Add or subtract 1 on one side of a comparison in a loop exit
    /// condition.
    BoundTweak,
    /// Delete an assignment.
    AssignDrop,
    /// Negate the condition of a conditional.
    BranchNegate,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::RelopSwap,
        Operator::ArithSwap,
        Operator::ConstOffset,
        Operator::BoundTweak,
        Operator::AssignDrop,
        Operator::BranchNegate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Operator::RelopSwap => "relop_swap",
            Operator::ArithSwap => "arith_swap",
            Operator::ConstOffset => "const_offset",
            Operator::BoundTweak => "bound_tweak",
            Operator::AssignDrop => "assign_drop",
            Operator::BranchNegate => "branch_negate",
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|o| o.name() == name)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SlotKind {
    LocalInit,
    Value,
    Index,
    IfCond,
    Until,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Change {
    SetOp(BinOpName),
    AddConst(i64),
    Offset(i64),
    TweakLhs(i64),
    TweakRhs(i64),
    Negate,
    Drop,
}

/// Serializable mirror of [`BinOp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
struct BinOpName(#[serde(with = "binop_serde")] BinOp);

mod binop_serde {
    use super::BinOp;
    use serde::{Deserialize, Deserializer, Serializer};

    const ALL: [BinOp; 14] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Mod,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::And,
        BinOp::Or,
        BinOp::Implies,
    ];

    pub fn serialize<S: Serializer>(op: &BinOp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(op.symbol())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BinOp, D::Error> {
        let text = String::deserialize(d)?;
        ALL.into_iter()
            .find(|op| op.symbol() == text)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown operator `{text}`")))
    }
}

/// One applicable mutation: an operator applied at a position.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub operator: Operator,
    /// Instruction that holds the position; `None` for local initializers.
    pub node: Option<NodeId>,
    pub line: u32,
    slot: usize,
    sub: usize,
    change: Change,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mutant {
    pub id: String,
    pub operator: Operator,
    pub node: Option<NodeId>,
    pub line: u32,
    pub description: String,
    pub routine: Routine,
}

/// Manifest record describing a mutant written to disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub operator: Operator,
    pub node: Option<String>,
    pub line: u32,
    pub description: String,
}

impl Mutant {
    pub fn file_name(&self) -> String {
        format!("{}.mil", self.id)
    }

    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            id: self.id.clone(),
            file: self.file_name(),
            operator: self.operator,
            node: self.node.map(|n| n.to_string()),
            line: self.line,
            description: self.description.clone(),
        }
    }
}

struct SlotMut<'a> {
    kind: SlotKind,
    expr: &'a mut Expr,
    node: Option<NodeId>,
    line: u32,
}

fn collect_slots<'a>(block: &'a mut Block, out: &mut Vec<SlotMut<'a>>) {
    for instr in block.iter_mut() {
        let node = Some(instr.id);
        let line = instr.span.line;
        match &mut instr.kind {
            InstrKind::Assign { value, .. } => out.push(SlotMut {
                kind: SlotKind::Value,
                expr: value,
                node,
                line,
            }),
            InstrKind::AssignIndex { index, value, .. } => {
                out.push(SlotMut {
                    kind: SlotKind::Index,
                    expr: index,
                    node,
                    line,
                });
                out.push(SlotMut {
                    kind: SlotKind::Value,
                    expr: value,
                    node,
                    line,
                });
            }
            InstrKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                out.push(SlotMut {
                    kind: SlotKind::IfCond,
                    expr: cond,
                    node,
                    line,
                });
                collect_slots(then_branch, out);
                if let Some(b) = else_branch {
                    collect_slots(b, out);
                }
            }
            InstrKind::Loop {
                from, until, body, ..
            } => {
                if let Some(f) = from {
                    collect_slots(f, out);
                }
                out.push(SlotMut {
                    kind: SlotKind::Until,
                    expr: until,
                    node,
                    line,
                });
                collect_slots(body, out);
            }
            InstrKind::Check { .. } => {}
        }
    }
}

/// Mutable expression positions in traversal order: local initializers,
/// then the body in pre-order. Contracts and checks are excluded.
fn slots(r: &mut Routine) -> Vec<SlotMut<'_>> {
    let line = r.span.line;
    let mut out: Vec<SlotMut<'_>> = r
        .locals
        .iter_mut()
        .filter_map(|l| l.init.as_mut())
        .map(|expr| SlotMut {
            kind: SlotKind::LocalInit,
            expr,
            node: None,
            line,
        })
        .collect();
    collect_slots(&mut r.body, &mut out);
    out
}

fn children_mut(e: &mut Expr) -> Vec<&mut Expr> {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Count(_) => Vec::new(),
        Expr::Index { index, .. } => vec![index.as_mut()],
        Expr::Unary(_, x) => vec![x.as_mut()],
        Expr::Binary(_, l, r) => vec![l.as_mut(), r.as_mut()],
        Expr::Across { lo, hi, body, .. } => vec![lo.as_mut(), hi.as_mut(), body.as_mut()],
    }
}

fn size(e: &Expr) -> usize {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) | Expr::Count(_) => 1,
        Expr::Index { index, .. } => 1 + size(index),
        Expr::Unary(_, x) => 1 + size(x),
        Expr::Binary(_, l, r) => 1 + size(l) + size(r),
        Expr::Across { lo, hi, body, .. } => 1 + size(lo) + size(hi) + size(body),
    }
}

/// The `n`-th subexpression in pre-order.
fn subexpr_mut(e: &mut Expr, n: usize) -> Option<&mut Expr> {
    if n == 0 {
        return Some(e);
    }
    let mut n = n - 1;
    for child in children_mut(e) {
        let s = size(child);
        if n < s {
            return subexpr_mut(child, n);
        }
        n -= s;
    }
    None
}

fn plus(e: Expr, delta: i64) -> Expr {
    if delta >= 0 {
        Expr::binary(BinOp::Add, e, Expr::Int(delta))
    } else {
        Expr::binary(BinOp::Sub, e, Expr::Int(-delta))
    }
}

fn apply_change(e: &mut Expr, change: Change) {
    let old = std::mem::replace(e, Expr::Bool(false));
    *e = match (change, old) {
        (Change::SetOp(BinOpName(op)), Expr::Binary(_, l, r)) => Expr::Binary(op, l, r),
        (Change::AddConst(d), Expr::Int(v)) => Expr::Int(v + d),
        (Change::Offset(d), x) => plus(x, d),
        (Change::TweakLhs(d), Expr::Binary(op, l, r)) => Expr::Binary(op, Box::new(plus(*l, d)), r),
        (Change::TweakRhs(d), Expr::Binary(op, l, r)) => Expr::Binary(op, l, Box::new(plus(*r, d))),
        (Change::Negate, x) => Expr::Unary(UnOp::Not, Box::new(x)),
        (change, old) => panic!("change {change:?} does not apply to `{old}`"),
    };
}

fn drop_instr(block: &mut Block, id: NodeId) -> bool {
    if let Some(pos) = block.iter().position(|i| i.id == id) {
        block.remove(pos);
        return true;
    }
    block.iter_mut().any(|instr| match &mut instr.kind {
        InstrKind::If {
            then_branch,
            else_branch,
            ..
        } => drop_instr(then_branch, id) || else_branch.as_mut().is_some_and(|b| drop_instr(b, id)),
        InstrKind::Loop { from, body, .. } => {
            from.as_mut().is_some_and(|b| drop_instr(b, id)) || drop_instr(body, id)
        }
        _ => false,
    })
}

/// Applies a site, returning the mutated routine and a description of the
/// edit.
pub fn apply(r: &Routine, site: &Site) -> (Routine, String) {
    let mut out = r.clone();
    if site.change == Change::Drop {
        let id = site.node.expect("drop sites name an instruction");
        let before = r.find(id).map(describe_instr).unwrap_or_default();
        assert!(drop_instr(&mut out.body, id), "instruction {id} exists");
        return (out, format!("removed `{before}`"));
    }
    let mut all = slots(&mut out);
    let slot = &mut all[site.slot];
    let target = subexpr_mut(slot.expr, site.sub).expect("site position exists");
    let before = pretty_expr(target);
    apply_change(target, site.change);
    let after = pretty_expr(target);
    drop(all);
    (out, format!("`{before}` became `{after}`"))
}

fn describe_instr(i: &crate::lang::Instr) -> String {
    match &i.kind {
        InstrKind::Assign { target, value } => format!("{target} := {}", pretty_expr(value)),
        InstrKind::AssignIndex { array, index, value } => {
            format!("{array}[{}] := {}", pretty_expr(index), pretty_expr(value))
        }
        _ => String::new(),
    }
}

struct Walk<'a> {
    types: &'a BTreeMap<String, Type>,
    slot_kind: SlotKind,
    next: usize,
    out: Vec<(usize, Operator, Change)>,
}

impl Walk<'_> {
    fn is_int(&self, e: &Expr, bound: &[String]) -> bool {
        match e {
            Expr::Var(n) => bound.contains(n) || self.types.get(n) == Some(&Type::Integer),
            Expr::Index { .. } | Expr::Count(_) => true,
            _ => false,
        }
    }

    fn visit(&mut self, e: &Expr, bound: &mut Vec<String>, comparison_side: bool) {
        let here = self.next;
        self.next += 1;
        let mut push = |op: Operator, c: Change| self.out.push((here, op, c));
        match e {
            Expr::Int(_) => {
                push(Operator::ConstOffset, Change::AddConst(1));
                push(Operator::ConstOffset, Change::AddConst(-1));
            }
            Expr::Binary(op, l, r) => {
                if op.is_relational() {
                    for other in BinOp::RELATIONAL {
                        if other != *op {
                            push(Operator::RelopSwap, Change::SetOp(BinOpName(other)));
                        }
                    }
                    if self.slot_kind == SlotKind::Until {
                        for d in [1, -1] {
                            push(Operator::BoundTweak, Change::TweakLhs(d));
                        }
                        for d in [1, -1] {
                            push(Operator::BoundTweak, Change::TweakRhs(d));
                        }
                    }
                } else if op.is_arithmetic() {
                    for other in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod] {
                        if other != *op {
                            push(Operator::ArithSwap, Change::SetOp(BinOpName(other)));
                        }
                    }
                }
                // Sides of exit comparisons are covered by bound tweaks.
                let side = op.is_relational() && self.slot_kind == SlotKind::Until;
                self.visit(l, bound, side);
                self.visit(r, bound, side);
            }
            Expr::Index { index, .. } => {
                self.operand(here, comparison_side);
                self.visit(index, bound, false);
            }
            Expr::Var(_) | Expr::Count(_) => {
                if self.is_int(e, bound) {
                    self.operand(here, comparison_side);
                }
            }
            Expr::Bool(_) => {}
            Expr::Unary(_, x) => self.visit(x, bound, false),
            Expr::Across { var, lo, hi, body, .. } => {
                self.visit(lo, bound, false);
                self.visit(hi, bound, false);
                bound.push(var.clone());
                self.visit(body, bound, false);
                bound.pop();
            }
        }
    }

    fn operand(&mut self, at: usize, comparison_side: bool) {
        if !comparison_side {
            self.out.push((at, Operator::ConstOffset, Change::Offset(1)));
            self.out.push((at, Operator::ConstOffset, Change::Offset(-1)));
        }
    }
}

fn candidate_sites(r: &Routine) -> Vec<Site> {
    let types: BTreeMap<String, Type> = r.variables().into_iter().collect();
    let mut scratch = r.clone();
    let mut sites = Vec::new();
    for (slot_index, slot) in slots(&mut scratch).into_iter().enumerate() {
        let mut walk = Walk {
            types: &types,
            slot_kind: slot.kind,
            next: 0,
            out: Vec::new(),
        };
        if slot.kind == SlotKind::IfCond {
            walk.out.push((0, Operator::BranchNegate, Change::Negate));
        }
        walk.visit(slot.expr, &mut Vec::new(), false);
        let mut found = walk.out;
        // Keep branch negation first, then pre-order position.
        found.sort_by_key(|(sub, op, _)| (*sub, *op != Operator::BranchNegate));
        for (sub, operator, change) in found {
            sites.push(Site {
                operator,
                node: slot.node,
                line: slot.line,
                slot: slot_index,
                sub,
                change,
            });
        }
    }
    let mut drops = Vec::new();
    crate::lang::visit_instrs(&r.body, &mut |i| {
        if matches!(i.kind, InstrKind::Assign { .. } | InstrKind::AssignIndex { .. }) {
            drops.push(Site {
                operator: Operator::AssignDrop,
                node: Some(i.id),
                line: i.span.line,
                slot: 0,
                sub: 0,
                change: Change::Drop,
            });
        }
    });
    // Merge drops into the positional order of their instructions.
    sites.extend(drops);
    sites.sort_by_key(|s| (s.node.map_or(0, |n| n.index), s.node.is_some()));
    sites
}

/// Every applicable (operator, position) pair in deterministic order.
/// Candidates whose result would not type-check are left out.
pub fn enumerate_sites(r: &Routine, ops: &[Operator]) -> Vec<Site> {
    candidate_sites(r)
        .into_iter()
        .filter(|s| ops.contains(&s.operator))
        .filter(|s| check_routine(&apply(r, s).0).is_ok())
        .collect()
}

/// Samples `k` distinct sites without replacement (all of them if there
/// are fewer) and returns the mutants in site order.
pub fn mutate(r: &Routine, ops: &[Operator], k: usize, seed: u64) -> Vec<Mutant> {
    let sites = enumerate_sites(r, ops);
    let mut chosen: Vec<usize> = if k >= sites.len() {
        (0..sites.len()).collect()
    } else {
        sample(&mut ChaCha8Rng::seed_from_u64(seed), sites.len(), k).into_vec()
    };
    chosen.sort_unstable();
    chosen
        .into_iter()
        .enumerate()
        .map(|(n, i)| {
            let site = &sites[i];
            let (routine, change) = apply(r, site);
            Mutant {
                id: format!("{}_m{}", r.name, n + 1),
                operator: site.operator,
                node: site.node,
                line: site.line,
                description: format!("{} at line {}: {change}", site.operator, site.line),
                routine,
            }
        })
        .collect()
}

/// Number of disjoint positions at which two routines differ: comparison
/// descends while node kinds and labels agree and counts one for each
/// maximal differing subtree. A single inserted or deleted instruction in
/// a block counts as one.
pub fn tree_diff(a: &Routine, b: &Routine) -> usize {
    let mut n = usize::from(a.name != b.name) + usize::from(a.params != b.params);
    n += opt_expr_diff(a.require.as_ref(), b.require.as_ref());
    if a.locals.len() != b.locals.len() {
        n += 1;
    } else {
        for (x, y) in a.locals.iter().zip(&b.locals) {
            n += usize::from(x.name != y.name || x.ty != y.ty);
            n += opt_expr_diff(x.init.as_ref(), y.init.as_ref());
        }
    }
    n += block_diff(&a.body, &b.body);
    if a.ensure.len() != b.ensure.len() {
        n += 1;
    } else {
        for (x, y) in a.ensure.iter().zip(&b.ensure) {
            n += usize::from(x.tag != y.tag) + expr_diff(&x.expr, &y.expr);
        }
    }
    n
}

fn opt_expr_diff(a: Option<&Expr>, b: Option<&Expr>) -> usize {
    match (a, b) {
        (None, None) => 0,
        (Some(x), Some(y)) => expr_diff(x, y),
        _ => 1,
    }
}

/// `outer` is `inner` wrapped in one new operator node.
fn wraps(outer: &Expr, inner: &Expr) -> bool {
    match outer {
        Expr::Unary(_, x) => **x == *inner,
        Expr::Binary(_, l, r) => **l == *inner || **r == *inner,
        _ => false,
    }
}

fn expr_diff(a: &Expr, b: &Expr) -> usize {
    if a != b && (wraps(a, b) || wraps(b, a)) {
        return 1;
    }
    match (a, b) {
        (Expr::Index { array: x, index: i }, Expr::Index { array: y, index: j }) if x == y => {
            expr_diff(i, j)
        }
        (Expr::Unary(o1, x), Expr::Unary(o2, y)) if o1 == o2 => expr_diff(x, y),
        (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) if o1 == o2 => {
            expr_diff(l1, l2) + expr_diff(r1, r2)
        }
        (
            Expr::Across {
                var: v1,
                lo: lo1,
                hi: hi1,
                quantifier: q1,
                body: b1,
            },
            Expr::Across {
                var: v2,
                lo: lo2,
                hi: hi2,
                quantifier: q2,
                body: b2,
            },
        ) if v1 == v2 && q1 == q2 => expr_diff(lo1, lo2) + expr_diff(hi1, hi2) + expr_diff(b1, b2),
        _ => usize::from(a != b),
    }
}

fn block_diff(a: &Block, b: &Block) -> usize {
    if a.len() == b.len() {
        return a.iter().zip(b).map(|(x, y)| instr_diff(&x.kind, &y.kind)).sum();
    }
    let (long, short) = if a.len() > b.len() { (a, b) } else { (b, a) };
    if long.len() == short.len() + 1 {
        for skip in 0..long.len() {
            let rest = long
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip)
                .map(|(_, i)| i);
            if rest.zip(short).all(|(x, y)| x == y) {
                return 1;
            }
        }
    }
    long.len() - short.len() + 1
}

fn opt_block_diff(a: Option<&Block>, b: Option<&Block>) -> usize {
    match (a, b) {
        (None, None) => 0,
        (Some(x), Some(y)) => block_diff(x, y),
        _ => 1,
    }
}

fn instr_diff(a: &InstrKind, b: &InstrKind) -> usize {
    use InstrKind::*;
    match (a, b) {
        (Assign { target: t1, value: v1 }, Assign { target: t2, value: v2 }) if t1 == t2 => {
            expr_diff(v1, v2)
        }
        (
            AssignIndex {
                array: a1,
                index: i1,
                value: v1,
            },
            AssignIndex {
                array: a2,
                index: i2,
                value: v2,
            },
        ) if a1 == a2 => expr_diff(i1, i2) + expr_diff(v1, v2),
        (
            If {
                cond: c1,
                then_branch: t1,
                else_branch: e1,
            },
            If {
                cond: c2,
                then_branch: t2,
                else_branch: e2,
            },
        ) => expr_diff(c1, c2) + block_diff(t1, t2) + opt_block_diff(e1.as_ref(), e2.as_ref()),
        (
            Loop {
                from: f1,
                until: u1,
                body: b1,
                ..
            },
            Loop {
                from: f2,
                until: u2,
                body: b2,
                ..
            },
        ) => opt_block_diff(f1.as_ref(), f2.as_ref()) + expr_diff(u1, u2) + block_diff(b1, b2),
        _ => usize::from(a != b),
    }
}
