//! Syntactic loop unrolling into nested conditionals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{
    analyze, Block, CheckOrigin, Expr, Instr, InstrKind, NodeId, Routine, Span,
};
use crate::semantics::{Domain, Interpreter, RunOptions, RunStatus, Value, DEFAULT_RUN_FUEL};

pub const DEFAULT_MAX_DEPTH: u32 = 32;

/// Target number of the depth guard, the innermost `check false end`.
pub const GUARD_TARGET: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnrollForm {
    /// The innermost position rejects executions needing more iterations.
    Strict,
    /// The innermost position is empty.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnrollConfig {
    pub depth: u32,
    /// Loop to unroll; may be omitted when the routine has exactly one loop.
    pub loop_label: Option<String>,
    pub form: UnrollForm,
    pub max_depth: u32,
}

impl UnrollConfig {
    pub fn strict(depth: u32) -> Self {
        UnrollConfig {
            depth,
            loop_label: None,
            form: UnrollForm::Strict,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn truncated(depth: u32) -> Self {
        UnrollConfig {
            form: UnrollForm::Truncated,
            ..UnrollConfig::strict(depth)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UnrollError {
    #[error("routine `{0}` has no loop")]
    NoLoop(String),
    #[error("routine `{routine}` has {count} loops; name one")]
    AmbiguousLoop { routine: String, count: usize },
    #[error("no loop labelled `{0}`")]
    UnknownLabel(String),
    #[error("loop `{0}` contains a nested loop, which is not supported")]
    NestedLoop(String),
    #[error("depth {depth} exceeds the maximum of {max}")]
    DepthTooLarge { depth: u32, max: u32 },
}

/// Allocates node ids for inserted instructions.
pub(crate) struct IdGen {
    next: u32,
}

impl IdGen {
    pub(crate) fn new(r: &Routine) -> Self {
        IdGen {
            next: r.max_index() + 1,
        }
    }

    pub(crate) fn fresh(&mut self, copy: u32) -> NodeId {
        let id = NodeId {
            index: self.next,
            copy,
        };
        self.next += 1;
        id
    }
}

/// The loop selected by a configuration.
pub(crate) struct LoopParts {
    pub id: NodeId,
    pub span: Span,
    pub label: String,
    pub from: Option<Block>,
    pub until: Expr,
    pub body: Block,
}

pub(crate) fn select_loop(r: &Routine, label: Option<&str>) -> Result<LoopParts, UnrollError> {
    let info = analyze(r);
    let chosen = match label {
        Some(l) => info
            .loops
            .iter()
            .find(|li| li.label == l)
            .ok_or_else(|| UnrollError::UnknownLabel(l.to_string()))?,
        None => match info.loops.as_slice() {
            [] => return Err(UnrollError::NoLoop(r.name.clone())),
            [only] => only,
            many => {
                return Err(UnrollError::AmbiguousLoop {
                    routine: r.name.clone(),
                    count: many.len(),
                })
            }
        },
    };
    if chosen.contains_loop {
        return Err(UnrollError::NestedLoop(chosen.label.clone()));
    }
    let instr = r.find(chosen.id).expect("analyzed loop exists");
    let InstrKind::Loop {
        from,
        until,
        body,
        label,
    } = &instr.kind
    else {
        unreachable!("analyzed loop is a loop")
    };
    Ok(LoopParts {
        id: instr.id,
        span: instr.span,
        label: label.clone(),
        from: from.clone(),
        until: until.clone(),
        body: body.clone(),
    })
}

/// A copy of `block` whose ids carry `copy` as their level.
pub(crate) fn copy_block(block: &Block, copy: u32) -> Block {
    block
        .iter()
        .map(|i| {
            let kind = match &i.kind {
                InstrKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => InstrKind::If {
                    cond: cond.clone(),
                    then_branch: copy_block(then_branch, copy),
                    else_branch: else_branch.as_ref().map(|b| copy_block(b, copy)),
                },
                InstrKind::Loop {
                    from,
                    until,
                    body,
                    label,
                } => InstrKind::Loop {
                    from: from.as_ref().map(|b| copy_block(b, copy)),
                    until: until.clone(),
                    body: copy_block(body, copy),
                    label: label.clone(),
                },
                other => other.clone(),
            };
            Instr::new(
                NodeId {
                    index: i.id.index,
                    copy,
                },
                i.span,
                kind,
            )
        })
        .collect()
}

pub(crate) fn seeded_check(id: NodeId, span: Span, cond: Expr, target: u32) -> Instr {
    Instr::new(
        id,
        span,
        InstrKind::Check {
            cond,
            tag: None,
            origin: CheckOrigin::Seeded { target },
        },
    )
}

/// Per-level decoration used by instrumentation.
pub(crate) trait LevelHook {
    /// May edit the body copy of `level`; returns instructions to place
    /// after the nested deeper levels, at the end of this level.
    fn level(&mut self, level: u32, body: &mut Block, ids: &mut IdGen) -> Block;
}

struct NoHook;

impl LevelHook for NoHook {
    fn level(&mut self, _: u32, _: &mut Block, _: &mut IdGen) -> Block {
        Vec::new()
    }
}

/// Replaces the selected loop by its unrolling, letting `hook` decorate
/// each level.
pub(crate) fn unroll_with(
    r: &Routine,
    cfg: &UnrollConfig,
    hook: &mut dyn LevelHook,
) -> Result<Routine, UnrollError> {
    if cfg.depth > cfg.max_depth {
        return Err(UnrollError::DepthTooLarge {
            depth: cfg.depth,
            max: cfg.max_depth,
        });
    }
    let parts = select_loop(r, cfg.loop_label.as_deref())?;
    let mut ids = IdGen::new(r);
    let not_e = Expr::negation(parts.until.clone());
    let guard_index = ids.fresh(0).index;
    let guard = |copy: u32| {
        let id = NodeId {
            index: guard_index,
            copy,
        };
        seeded_check(id, parts.span, Expr::Bool(false), GUARD_TARGET)
    };

    let mut replacement: Block = parts.from.clone().unwrap_or_default();
    if cfg.depth == 0 {
        if cfg.form == UnrollForm::Strict {
            replacement.push(guard(0));
        }
    } else {
        // Build from the innermost level outwards.
        let mut inner: Block = match cfg.form {
            UnrollForm::Strict => vec![Instr::new(
                NodeId {
                    index: parts.id.index,
                    copy: cfg.depth + 1,
                },
                parts.span,
                InstrKind::If {
                    cond: not_e.clone(),
                    then_branch: vec![guard(cfg.depth + 1)],
                    else_branch: None,
                },
            )],
            UnrollForm::Truncated => Vec::new(),
        };
        let mut levels: Vec<(Block, Block)> = Vec::new();
        for level in 1..=cfg.depth {
            let mut body = copy_block(&parts.body, level);
            let trailer = hook.level(level, &mut body, &mut ids);
            levels.push((body, trailer));
        }
        for (k, (mut body, trailer)) in levels.into_iter().enumerate().rev() {
            body.extend(inner);
            body.extend(trailer);
            inner = vec![Instr::new(
                NodeId {
                    index: parts.id.index,
                    copy: k as u32 + 1,
                },
                parts.span,
                InstrKind::If {
                    cond: not_e.clone(),
                    then_branch: body,
                    else_branch: None,
                },
            )];
        }
        replacement.extend(inner);
    }
    let mut out = r.clone();
    splice(&mut out.body, parts.id, &mut Some(replacement));
    Ok(out)
}

fn splice(block: &mut Block, target: NodeId, replacement: &mut Option<Block>) {
    if let Some(pos) = block.iter().position(|i| i.id == target) {
        let rep = replacement.take().expect("loop replaced once");
        block.splice(pos..=pos, rep);
        return;
    }
    for instr in block.iter_mut() {
        if replacement.is_none() {
            return;
        }
        match &mut instr.kind {
            InstrKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                splice(then_branch, target, replacement);
                if let Some(b) = else_branch {
                    splice(b, target, replacement);
                }
            }
            InstrKind::Loop { from, body, .. } => {
                if let Some(b) = from {
                    splice(b, target, replacement);
                }
                splice(body, target, replacement);
            }
            _ => {}
        }
    }
}

/// Replaces the loop by `depth` nested `if not e then B ... end` levels.
/// In strict form the innermost level is `if not e then check false end
/// end`, so an execution is accepted exactly when it needs at most `depth`
/// iterations; depth 0 in strict form is `check false end` alone.
pub fn unroll_routine(r: &Routine, cfg: &UnrollConfig) -> Result<Routine, UnrollError> {
    unroll_with(r, cfg, &mut NoHook)
}

/// Number of copies of the instruction `id` in `r`.
pub fn copies_of(r: &Routine, id: u32) -> usize {
    let mut n = 0;
    crate::lang::visit_instrs(&r.body, &mut |i| {
        if i.id.index == id {
            n += 1;
        }
    });
    n
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub input: Vec<Value>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnrollReport {
    pub depth: u32,
    /// Inputs satisfying the precondition.
    pub inputs: usize,
    /// Inputs the strict unrolling runs to completion without the guard.
    pub accepted: usize,
    /// Inputs on which the depth guard fired.
    pub guard_hits: usize,
    pub mismatches: Vec<Mismatch>,
}

/// Compares the strict unrolling with the original on every input of `d`:
/// inputs needing at most `depth` iterations must end identically, all
/// others must hit the depth guard. At depth 0 every input hits the guard.
pub fn semantic_check(
    r: &Routine,
    cfg: &UnrollConfig,
    d: &Domain,
) -> Result<UnrollReport, UnrollError> {
    let strict = UnrollConfig {
        form: UnrollForm::Strict,
        ..cfg.clone()
    };
    let unrolled = unroll_routine(r, &strict)?;
    let label = select_loop(r, cfg.loop_label.as_deref())?.label;
    let original = Interpreter::new(r);
    let transformed = Interpreter::new(&unrolled);
    let opts = RunOptions {
        fuel: DEFAULT_RUN_FUEL.max(cfg.depth + 1),
        record_trace: false,
    };
    let mut report = UnrollReport {
        depth: cfg.depth,
        ..UnrollReport::default()
    };
    for input in d.inputs(&r.params) {
        if !original.require_holds(&input) {
            continue;
        }
        report.inputs += 1;
        let a = original.run(&input, opts).expect("domain inputs are well-typed");
        let b = transformed.run(&input, opts).expect("domain inputs are well-typed");
        let iterations = a.iterations.get(&label).copied().unwrap_or(0);
        let needs_more = cfg.depth == 0
            || iterations > cfg.depth
            || matches!(&a.status, RunStatus::FuelExhausted { label: l, .. } if *l == label);
        let guard_hit = b.status.seeded_target() == Some(GUARD_TARGET);
        if guard_hit {
            report.guard_hits += 1;
        } else {
            report.accepted += 1;
        }
        let problem = if needs_more {
            (!guard_hit).then(|| {
                format!(
                    "needs {iterations} iterations but the unrolling ended with {}",
                    b.status
                )
            })
        } else if guard_hit {
            Some(format!("needs {iterations} iterations but the guard fired"))
        } else if a.status != b.status {
            Some(format!("status {} became {}", a.status, b.status))
        } else if a.final_state().values != b.final_state().values {
            Some("final states differ".to_string())
        } else {
            None
        };
        if let Some(detail) = problem {
            report.mismatches.push(Mismatch { input, detail });
        }
    }
    Ok(report)
}
