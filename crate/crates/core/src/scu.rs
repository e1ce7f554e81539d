//! Seeded-contradiction instrumentation: SC seeds one `check false end` per
//! branch of the loop body; SCU unrolls the loop and seeds one check per
//! (level, branch) pair that fails exactly when the loop exits after that
//! level through that branch.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{
    analyze, has_top_level_if, parse, pretty, pretty_expr, visit_instrs, BinOp, Block,
    CheckOrigin, Expr, Instr, InstrKind, Local, NodeId, Routine, Span, Type,
};
use crate::unroll::{seeded_check, select_loop, unroll_with, IdGen, LevelHook, UnrollConfig, UnrollError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sc,
    Scu,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Sc => "sc",
            Mode::Scu => "scu",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    ScBranch,
    ScuPlainLevel,
    ScuBranchLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub target_id: u32,
    pub kind: TargetKind,
    /// Unrolling level, 0 for SC targets.
    pub level: u32,
    /// Global branch number `j` for SCU branch targets, the leaf index for
    /// SC targets, 0 for plain bodies.
    pub branch: u32,
    pub location: NodeId,
    /// Line of the seeded check in the pretty-printed instrumented routine.
    pub line: u32,
    pub seeded_expr: String,
    pub tag: String,
}

impl Target {
    /// The 1-based branch within its level, if the target is branch-specific.
    pub fn local_branch(&self, m: usize) -> Option<usize> {
        match self.kind {
            TargetKind::ScuBranchLevel => {
                Some(self.branch as usize - m * (self.level as usize - 1))
            }
            TargetKind::ScBranch if m > 0 => Some(self.branch as usize),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstrumentedRoutine {
    pub routine: Routine,
    pub targets: Vec<Target>,
    /// Branch count of the loop body.
    pub m: usize,
    /// Unrolling depth, 0 for SC.
    pub n: u32,
    pub mode: Mode,
    pub loop_label: String,
    /// Name of the branch-number variable, when one was declared.
    pub bn: Option<String>,
}

impl InstrumentedRoutine {
    pub fn target(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.target_id == id)
    }

    /// Canonical source text of the instrumented routine.
    pub fn source(&self) -> String {
        pretty(&self.routine)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScuError {
    #[error("routine `{0}` has no loop")]
    NoLoop(String),
    #[error("routine `{routine}` has {count} loops; instrumentation needs exactly one")]
    MultipleLoops { routine: String, count: usize },
    #[error("loop `{0}` contains a nested loop")]
    NestedLoop(String),
    #[error("SCU depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Unroll(#[from] UnrollError),
}

fn single_loop(r: &Routine) -> Result<(String, usize), ScuError> {
    let info = analyze(r);
    match info.loops.as_slice() {
        [] => Err(ScuError::NoLoop(r.name.clone())),
        [l] if l.contains_loop => Err(ScuError::NestedLoop(l.label.clone())),
        [l] => Ok((l.label.clone(), l.branches)),
        many => Err(ScuError::MultipleLoops {
            routine: r.name.clone(),
            count: many.len(),
        }),
    }
}

/// Calls `f` on each leaf branch block of `block`'s top-level
/// conditionals, in the order of `branch_leaves`, creating empty `else`
/// blocks where none exist.
pub(crate) fn for_each_leaf_mut(block: &mut Block, f: &mut dyn FnMut(&mut Block)) {
    for instr in block.iter_mut() {
        if let InstrKind::If {
            then_branch,
            else_branch,
            ..
        } = &mut instr.kind
        {
            leaf_or_recurse(then_branch, f);
            leaf_or_recurse(else_branch.get_or_insert_with(Vec::new), f);
        }
    }
}

fn leaf_or_recurse(block: &mut Block, f: &mut dyn FnMut(&mut Block)) {
    if has_top_level_if(block) {
        for_each_leaf_mut(block, f);
    } else {
        f(block);
    }
}

/// Fills in `line` for every target from the pretty-printed source.
fn locate_targets(routine: &Routine, targets: &mut [Target]) {
    let reparsed = parse(&pretty(routine)).expect("instrumented routines print parseable source");
    visit_instrs(&reparsed.body, &mut |i| {
        if let InstrKind::Check {
            origin: CheckOrigin::Seeded { target },
            ..
        } = i.kind
        {
            if let Some(t) = targets.iter_mut().find(|t| t.target_id == target) {
                t.line = i.span.line;
            }
        }
    });
}

fn find_loop_mut<'a>(block: &'a mut Block, label: &str) -> Option<&'a mut Instr> {
    for instr in block.iter_mut() {
        let is_target = matches!(&instr.kind, InstrKind::Loop { label: l, .. } if l == label);
        if is_target {
            return Some(instr);
        }
        let found = match &mut instr.kind {
            InstrKind::If {
                then_branch,
                else_branch,
                ..
            } => match find_loop_mut(then_branch, label) {
                Some(i) => Some(i),
                None => else_branch.as_mut().and_then(|b| find_loop_mut(b, label)),
            },
            _ => None,
        };
        if found.is_some() {
            return found;
        }
    }
    None
}

/// SC: one `check false end` at the start of the loop body when it has no
/// branches, otherwise one at the start of each branch.
pub fn instrument_sc(r: &Routine) -> Result<InstrumentedRoutine, ScuError> {
    let (label, m) = single_loop(r)?;
    let mut out = r.clone();
    let mut ids = IdGen::new(r);
    let mut targets = Vec::new();
    let instr = find_loop_mut(&mut out.body, &label).expect("loop exists");
    let span = instr.span;
    let InstrKind::Loop { body, .. } = &mut instr.kind else {
        unreachable!()
    };
    let mut seed = |block: &mut Block, branch: u32, targets: &mut Vec<Target>| {
        let id = ids.fresh(0);
        let target_id = targets.len() as u32 + 1;
        block.insert(0, seeded_check(id, span, Expr::Bool(false), target_id));
        targets.push(Target {
            target_id,
            kind: TargetKind::ScBranch,
            level: 0,
            branch,
            location: id,
            line: 0,
            seeded_expr: "false".into(),
            tag: format!("branch{branch}"),
        });
    };
    if m == 0 {
        seed(body, 0, &mut targets);
    } else {
        let mut k = 0;
        for_each_leaf_mut(body, &mut |leaf| {
            k += 1;
            seed(leaf, k, &mut targets);
        });
    }
    locate_targets(&out, &mut targets);
    Ok(InstrumentedRoutine {
        routine: out,
        targets,
        m,
        n: 0,
        mode: Mode::Sc,
        loop_label: label,
        bn: None,
    })
}

struct ScuHook {
    until: Expr,
    span: Span,
    m: usize,
    bn: Option<String>,
    targets: Vec<Target>,
}

impl LevelHook for ScuHook {
    fn level(&mut self, level: u32, body: &mut Block, ids: &mut IdGen) -> Block {
        let mut trailer = Vec::new();
        match &self.bn {
            None => {
                let id = ids.fresh(level);
                let cond = Expr::negation(self.until.clone());
                self.targets.push(Target {
                    target_id: level,
                    kind: TargetKind::ScuPlainLevel,
                    level,
                    branch: 0,
                    location: id,
                    line: 0,
                    seeded_expr: pretty_expr(&cond),
                    tag: format!("level{level}"),
                });
                trailer.push(seeded_check(id, self.span, cond, level));
            }
            Some(bn) => {
                let base = self.m as u32 * (level - 1);
                let mut k = 0;
                for_each_leaf_mut(body, &mut |leaf| {
                    k += 1;
                    let span = leaf.last().map_or(self.span, |i| i.span);
                    leaf.push(Instr::new(
                        ids.fresh(level),
                        span,
                        InstrKind::Assign {
                            target: bn.clone(),
                            value: Expr::Int(i64::from(base + k)),
                        },
                    ));
                });
                for j in base + 1..=base + self.m as u32 {
                    let id = ids.fresh(level);
                    let cond = Expr::negation(Expr::binary(
                        BinOp::And,
                        self.until.clone(),
                        Expr::binary(BinOp::Eq, Expr::var(bn), Expr::Int(i64::from(j))),
                    ));
                    self.targets.push(Target {
                        target_id: j,
                        kind: TargetKind::ScuBranchLevel,
                        level,
                        branch: j,
                        location: id,
                        line: 0,
                        seeded_expr: pretty_expr(&cond),
                        tag: format!("level{level}_branch{j}"),
                    });
                    trailer.push(seeded_check(id, self.span, cond, j));
                }
            }
        }
        trailer
    }
}

/// SCU at depth `n`: the loop is unrolled `n` times (strict form) and level
/// `i` ends with `check not e end` for a plain body, or, for a body with
/// `m` branches, each branch of level `i` records `bn := j` and the level
/// ends with `check not (e and bn = j) end` for each of its `m` numbers
/// `j` in `m*(i-1)+1 ..= m*i`.
pub fn instrument_scu(r: &Routine, n: u32) -> Result<InstrumentedRoutine, ScuError> {
    if n == 0 {
        return Err(ScuError::ZeroDepth);
    }
    let (label, m) = single_loop(r)?;
    let parts = select_loop(r, Some(&label))?;
    let bn = (m > 0).then(|| r.fresh_name("bn"));
    let mut base = r.clone();
    if let Some(name) = &bn {
        base.locals.push(Local {
            name: name.clone(),
            ty: Type::Integer,
            init: None,
        });
    }
    let mut hook = ScuHook {
        until: parts.until.clone(),
        span: parts.span,
        m,
        bn: bn.clone(),
        targets: Vec::new(),
    };
    let cfg = UnrollConfig {
        loop_label: Some(label.clone()),
        ..UnrollConfig::strict(n)
    };
    let routine = unroll_with(&base, &cfg, &mut hook)?;
    let mut targets = hook.targets;
    targets.sort_by_key(|t| t.target_id);
    locate_targets(&routine, &mut targets);
    Ok(InstrumentedRoutine {
        routine,
        targets,
        m,
        n,
        mode: Mode::Scu,
        loop_label: label,
        bn,
    })
}

pub fn instrument(r: &Routine, mode: Mode, n: u32) -> Result<InstrumentedRoutine, ScuError> {
    match mode {
        Mode::Sc => instrument_sc(r),
        Mode::Scu => instrument_scu(r, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    const GCD: &str = "routine gcd (a: INTEGER, b: INTEGER)
  require a > 0 and b > 0
  local x: INTEGER; y: INTEGER
  do
    from x := a; y := b until x = y loop
      if x > y then x := x - y else y := y - x end
    end
  ensure ok: x > 0
  end";

    const COUNT: &str = "routine count (n: INTEGER)
  local i: INTEGER
  do from i := 0 until i >= n loop i := i + 1 end end";

    #[test]
    fn scu_branch_numbering() {
        let r = parse(GCD).unwrap();
        let ir = instrument_scu(&r, 3).unwrap();
        assert_eq!(ir.targets.len(), 6);
        let ids: Vec<u32> = ir.targets.iter().map(|t| t.target_id).collect();
        assert_eq!(ids, (1..=6).collect::<Vec<_>>());
        let level2: Vec<u32> = ir.targets.iter().filter(|t| t.level == 2).map(|t| t.branch).collect();
        assert_eq!(level2, vec![3, 4]);
        assert_eq!(ir.bn.as_deref(), Some("bn"));
        let text = ir.source();
        assert!(text.contains("check not (x = y and bn = 4) end -- [target 4]"), "{text}");
        assert_eq!(parse(&text).unwrap(), ir.routine);
        for t in &ir.targets {
            let line = text.lines().nth(t.line as usize - 1).unwrap();
            assert!(line.contains(&format!("[target {}]", t.target_id)), "{line}");
        }
    }

    #[test]
    fn scu_plain_levels() {
        let r = parse(COUNT).unwrap();
        let ir = instrument_scu(&r, 4).unwrap();
        assert_eq!(ir.targets.len(), 4);
        assert!(ir.targets.iter().all(|t| t.kind == TargetKind::ScuPlainLevel));
        assert_eq!(ir.source().matches("check not (i >= n) end").count(), 4);
    }

    #[test]
    fn bn_is_freshened() {
        let src = GCD.replace("y: INTEGER", "y: INTEGER; bn: INTEGER");
        let ir = instrument_scu(&parse(&src).unwrap(), 1).unwrap();
        assert_eq!(ir.bn.as_deref(), Some("bn_1"));
        let range: Vec<u32> = ir.targets.iter().map(|t| t.branch).collect();
        assert_eq!(range, vec![1, 2]);
    }

    #[test]
    fn sc_seeds_each_branch() {
        let ir = instrument_sc(&parse(GCD).unwrap()).unwrap();
        assert_eq!(ir.targets.len(), 2);
        let ir = instrument_sc(&parse(COUNT).unwrap()).unwrap();
        assert_eq!(ir.targets.len(), 1);
        let text = ir.source();
        let loop_line = text.lines().position(|l| l.trim() == "loop").unwrap();
        assert!(text.lines().nth(loop_line + 1).unwrap().contains("check false end"));
    }

    #[test]
    fn sc_preconditions() {
        let two = "routine two (n: INTEGER) local i: INTEGER do
            until i >= n loop i := i + 1 end
            until i <= 0 loop i := i - 1 end end";
        assert!(matches!(
            instrument_sc(&parse(two).unwrap()),
            Err(ScuError::MultipleLoops { count: 2, .. })
        ));
        let none = "routine none () local i: INTEGER do i := 1 end";
        assert!(matches!(instrument_sc(&parse(none).unwrap()), Err(ScuError::NoLoop(_))));
        assert_eq!(instrument_scu(&parse(COUNT).unwrap(), 0), Err(ScuError::ZeroDepth));
    }
}
