use serde::{Deserialize, Serialize};

use super::{Block, Instr, InstrKind, NodeId, Routine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Then,
    Else,
}

/// A maximal branch of a loop body's conditional structure: the `then` or
/// `else` block of the conditional `if_id`. An `else` leaf may be implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Leaf {
    pub if_id: NodeId,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopInfo {
    pub label: String,
    pub id: NodeId,
    pub line: u32,
    /// 1 for a loop not enclosed by another loop.
    pub nesting: usize,
    /// Number of leaf branches of the body's top-level conditionals.
    pub branches: usize,
    pub contains_loop: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureInfo {
    pub routine: String,
    pub loop_count: usize,
    pub max_nesting: usize,
    pub loops: Vec<LoopInfo>,
}

pub fn has_top_level_if(block: &Block) -> bool {
    block.iter().any(|i| matches!(i.kind, InstrKind::If { .. }))
}

/// Leaf branches of the top-level conditionals of `block`, in source order.
/// A branch that itself starts nested conditionals is replaced by their
/// leaves.
pub fn branch_leaves(block: &Block) -> Vec<Leaf> {
    let mut out = Vec::new();
    collect(block, &mut out);
    out
}

fn collect(block: &Block, out: &mut Vec<Leaf>) {
    for instr in block {
        if let InstrKind::If {
            then_branch,
            else_branch,
            ..
        } = &instr.kind
        {
            side(instr, then_branch, Side::Then, out);
            match else_branch {
                Some(b) => side(instr, b, Side::Else, out),
                None => out.push(Leaf {
                    if_id: instr.id,
                    side: Side::Else,
                }),
            }
        }
    }
}

fn side(instr: &Instr, block: &Block, side: Side, out: &mut Vec<Leaf>) {
    if has_top_level_if(block) {
        collect(block, out);
    } else {
        out.push(Leaf { if_id: instr.id, side });
    }
}

pub fn analyze(r: &Routine) -> StructureInfo {
    let mut loops = Vec::new();
    walk(&r.body, 0, &mut loops);
    StructureInfo {
        routine: r.name.clone(),
        loop_count: loops.len(),
        max_nesting: loops.iter().map(|l| l.nesting).max().unwrap_or(0),
        loops,
    }
}

fn contains_loop(block: &Block) -> bool {
    let mut found = false;
    super::visit_instrs(block, &mut |i| found |= matches!(i.kind, InstrKind::Loop { .. }));
    found
}

fn walk(block: &Block, nesting: usize, out: &mut Vec<LoopInfo>) {
    for instr in block {
        match &instr.kind {
            InstrKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                walk(then_branch, nesting, out);
                if let Some(b) = else_branch {
                    walk(b, nesting, out);
                }
            }
            InstrKind::Loop {
                from, body, label, ..
            } => {
                out.push(LoopInfo {
                    label: label.clone(),
                    id: instr.id,
                    line: instr.span.line,
                    nesting: nesting + 1,
                    branches: branch_leaves(body).len(),
                    contains_loop: contains_loop(body) || from.as_ref().is_some_and(contains_loop),
                });
                if let Some(f) = from {
                    walk(f, nesting + 1, out);
                }
                walk(body, nesting + 1, out);
            }
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn counts_implicit_else_and_elseif() {
        let r = parse(
            "routine f (n: INTEGER) local i: INTEGER; s: INTEGER do
               from until i >= n loop
                 if s > 2 then s := 0 elseif s = 1 then s := 2 else s := s + 1 end
                 if i = 0 then s := 5 end
                 i := i + 1
               end end",
        )
        .unwrap();
        let info = analyze(&r);
        assert_eq!(info.loop_count, 1);
        assert_eq!(info.loops[0].branches, 5);
    }

    #[test]
    fn plain_and_loopless() {
        let r = parse("routine f () local x: INTEGER do x := 1 end").unwrap();
        let info = analyze(&r);
        assert_eq!((info.loop_count, info.max_nesting), (0, 0));
        let r = parse("routine f (n: INTEGER) local i: INTEGER do until i >= n loop i := i + 1 end end").unwrap();
        assert_eq!(analyze(&r).loops[0].branches, 0);
    }

    #[test]
    fn nested_loops_reported() {
        let r = parse(
            "routine f (n: INTEGER) local i: INTEGER; j: INTEGER do
               until i >= n loop j := 0 until j >= i loop j := j + 1 end i := i + 1 end end",
        )
        .unwrap();
        let info = analyze(&r);
        assert_eq!((info.loop_count, info.max_nesting), (2, 2));
        assert!(info.loops[0].contains_loop);
    }
}
