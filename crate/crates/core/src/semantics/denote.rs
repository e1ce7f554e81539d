use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::interp::{Interpreter, ProgState};
use super::value::{Domain, Value};
use crate::lang::{Block, Expr, Instr, InstrKind, Routine};
use crate::trace::{cond_set, loop_union, Trace, TraceSet, Universe};

pub const DEFAULT_DENOTE_FUEL: u32 = 8;

/// The bounded denotation of a routine over a finite input domain.
#[derive(Clone, Debug, Default)]
pub struct Denotation {
    pub traces: TraceSet<ProgState>,
    /// Inputs whose precondition holds and whose locals initialize.
    pub initial_states: usize,
    /// Inputs dropped by the precondition.
    pub excluded: usize,
    /// Inputs for which some loop was still running after `fuel` iterations.
    pub unresolved: Vec<Vec<Value>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoteSummary {
    pub traces: usize,
    pub initial_states: usize,
    pub excluded: usize,
    pub unresolved: usize,
}

impl Denotation {
    pub fn summary(&self) -> DenoteSummary {
        DenoteSummary {
            traces: self.traces.len(),
            initial_states: self.initial_states,
            excluded: self.excluded,
            unresolved: self.unresolved.len(),
        }
    }

    /// The trace starting in `s`, if any. The language is deterministic, so
    /// there is at most one.
    pub fn trace_from(&self, s: &ProgState) -> Option<&Trace<ProgState>> {
        self.traces.iter().find(|t| t.first() == s)
    }
}

struct Denoter<'r> {
    interp: Interpreter<'r>,
    fuel: u32,
    unresolved: bool,
}

fn holds(interp: &Interpreter, e: &Expr, s: &ProgState) -> Option<bool> {
    interp.eval_bool(e, &s.values, &mut Vec::new()).ok()
}

fn skip(states: &BTreeSet<ProgState>) -> TraceSet<ProgState> {
    TraceSet::skip(&Universe::from_states(states.iter().cloned()))
}

impl Denoter<'_> {
    fn block(&mut self, block: &Block, starts: &BTreeSet<ProgState>) -> TraceSet<ProgState> {
        let mut acc = skip(starts);
        for instr in block {
            if acc.is_empty() {
                break;
            }
            let step = self.instr(instr, &acc.last_states());
            acc = acc.concat(&step);
        }
        acc
    }

    fn instr(&mut self, instr: &Instr, starts: &BTreeSet<ProgState>) -> TraceSet<ProgState> {
        let interp = &self.interp;
        match &instr.kind {
            InstrKind::Assign { .. } | InstrKind::AssignIndex { .. } => starts
                .iter()
                .filter_map(|s| {
                    let next = interp.assign(instr, s).ok()?;
                    Trace::new(vec![s.clone(), next])
                })
                .collect(),
            InstrKind::Check { cond, .. } => {
                skip(starts).restrict(|s| holds(interp, cond, s) == Some(true))
            }
            InstrKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let split = |want: bool| -> BTreeSet<ProgState> {
                    starts
                        .iter()
                        .filter(|s| holds(interp, cond, s) == Some(want))
                        .cloned()
                        .collect()
                };
                let (yes, no) = (split(true), split(false));
                let then_set = self.block(then_branch, &yes);
                match else_branch {
                    None => {
                        let mut defined = yes;
                        defined.extend(no);
                        let interp = &self.interp;
                        cond_set(
                            |s| holds(interp, cond, s) == Some(true),
                            &then_set,
                            &Universe::from_states(defined),
                        )
                    }
                    Some(b) => {
                        let mut out = then_set;
                        out.union_with(self.block(b, &no));
                        out
                    }
                }
            }
            InstrKind::Loop {
                from, until, body, ..
            } => {
                let prefix = match from {
                    Some(f) => self.block(f, starts),
                    None => skip(starts),
                };
                let entries = prefix.last_states();
                let iterations = self.loop_iterations(until, body, &entries);
                prefix.concat(&iterations)
            }
        }
    }

    /// Traces of `until e loop B end` from `entries` that exit within
    /// `fuel` iterations, built as `L_(fuel+1)` over the explored states.
    fn loop_iterations(
        &mut self,
        until: &Expr,
        body: &Block,
        entries: &BTreeSet<ProgState>,
    ) -> TraceSet<ProgState> {
        let mut seen: BTreeSet<ProgState> = entries.clone();
        let mut expanded: BTreeSet<ProgState> = BTreeSet::new();
        let mut body_set = TraceSet::fail();
        let mut layer = entries.clone();
        for _ in 0..self.fuel {
            let running: BTreeSet<ProgState> = layer
                .iter()
                .filter(|s| holds(&self.interp, until, s) == Some(false))
                .cloned()
                .collect();
            if running.is_empty() {
                layer.clear();
                break;
            }
            let fresh: BTreeSet<ProgState> = running.difference(&expanded).cloned().collect();
            body_set.union_with(self.block(body, &fresh));
            expanded.extend(fresh);
            layer = body_set.restrict(|s| running.contains(s)).last_states();
            seen.extend(layer.iter().cloned());
        }
        if layer
            .iter()
            .any(|s| holds(&self.interp, until, s) == Some(false))
        {
            self.unresolved = true;
        }
        let interp = &self.interp;
        let exit = |s: &ProgState| holds(interp, until, s) == Some(true);
        let universe = Universe::from_states(seen);
        loop_union(exit, &body_set, self.fuel as usize + 1, &universe)
            .restrict(|s| entries.contains(s))
    }
}

/// The set of traces of `r`'s body over every input of `d` that satisfies
/// the precondition, with each loop allowed at most `fuel` iterations.
/// Executions that fail a check or raise a runtime error contribute no
/// trace; the postcondition is not part of the denotation.
pub fn denote(r: &Routine, d: &Domain, fuel: u32) -> Denotation {
    let mut den = Denoter {
        interp: Interpreter::new(r),
        fuel,
        unresolved: false,
    };
    let mut out = Denotation::default();
    for input in d.inputs(&r.params) {
        if !den.interp.require_holds(&input) {
            out.excluded += 1;
            continue;
        }
        let Ok(init) = den.interp.initial_state(&input) else {
            continue;
        };
        out.initial_states += 1;
        den.unresolved = false;
        let traces = den.block(&r.body, &BTreeSet::from([init]));
        if den.unresolved {
            out.unresolved.push(input);
        }
        out.traces.union_with(traces);
    }
    out
}
