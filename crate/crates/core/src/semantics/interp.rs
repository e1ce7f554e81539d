use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::Value;
use crate::lang::{
    branch_leaves, visit_instrs, BinOp, Block, CheckOrigin, Expr, Instr, InstrKind, NodeId,
    Quantifier, Routine, Side, UnOp,
};

/// Magnitude bound for integer values; larger results are an overflow.
pub const SAFE_INT: i64 = 1 << 31;

/// Longest range an `across` expression may iterate over.
const MAX_RANGE: i64 = 1 << 20;

pub const DEFAULT_RUN_FUEL: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuntimeErrorKind {
    IndexOutOfRange,
    DivByZero,
    Overflow,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::IndexOutOfRange => "index_out_of_range",
            RuntimeErrorKind::DivByZero => "div_by_zero",
            RuntimeErrorKind::Overflow => "overflow",
        })
    }
}

/// Where a state was produced: before the body, or by the assignment `id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    Entry,
    Node(NodeId),
}

/// A program state: a location plus the values of all parameters and locals
/// in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProgState {
    pub location: Location,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    CheckViolation {
        tag: Option<String>,
        target: Option<u32>,
        line: u32,
    },
    ContractViolation {
        tag: String,
        line: u32,
    },
    RuntimeError {
        kind: RuntimeErrorKind,
        line: u32,
    },
    FuelExhausted {
        label: String,
        line: u32,
    },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }

    /// The seeded target whose check failed, if any.
    pub fn seeded_target(&self) -> Option<u32> {
        match self {
            RunStatus::CheckViolation { target, .. } => *target,
            _ => None,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Ok => f.write_str("ok"),
            RunStatus::CheckViolation {
                target: Some(t),
                line,
                ..
            } => write!(f, "seeded check {t} violated at line {line}"),
            RunStatus::CheckViolation { tag, line, .. } => match tag {
                Some(tag) => write!(f, "check `{tag}` violated at line {line}"),
                None => write!(f, "check violated at line {line}"),
            },
            RunStatus::ContractViolation { tag, line } => {
                write!(f, "postcondition `{tag}` violated at line {line}")
            }
            RunStatus::RuntimeError { kind, line } => write!(f, "{kind} at line {line}"),
            RunStatus::FuelExhausted { label, line } => {
                write!(f, "{label} at line {line} exceeded its iteration fuel")
            }
        }
    }
}

/// Records that iteration `level` of loop `label` went through leaf
/// branch `branch` (1-based, in the order of `branch_leaves`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub label: String,
    pub level: u32,
    pub branch: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub status: RunStatus,
    /// Every state when tracing is enabled, otherwise just the final one.
    pub trace: Vec<ProgState>,
    pub iterations: BTreeMap<String, u32>,
    pub branch_log: Vec<BranchEvent>,
}

impl RunOutcome {
    pub fn final_state(&self) -> &ProgState {
        self.trace.last().expect("traces are non-empty")
    }

    /// Total iterations of the only loop, or 0 when there is none.
    pub fn single_loop_iterations(&self) -> u32 {
        self.iterations.values().copied().next().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    /// Iterations allowed per loop execution.
    pub fuel: u32,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            fuel: DEFAULT_RUN_FUEL,
            record_trace: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("expected {expected} input values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parameter `{name}` expects {expected}, got `{got}`")]
    Type {
        name: String,
        expected: crate::lang::Type,
        got: Value,
    },
}

type Exec<T> = Result<T, RunStatus>;

/// Executes one routine. Building it resolves variable slots and branch
/// leaves once so repeated runs are cheap.
pub struct Interpreter<'r> {
    routine: &'r Routine,
    slots: HashMap<&'r str, usize>,
    leaves: HashMap<(NodeId, Side), (&'r str, usize)>,
}

struct Frame<'a> {
    values: Vec<Value>,
    location: Location,
    trace: Option<Vec<ProgState>>,
    iterations: BTreeMap<String, u32>,
    branch_log: Vec<BranchEvent>,
    loops: Vec<(&'a str, u32)>,
    fuel: u32,
}

impl Frame<'_> {
    fn snapshot(&self) -> ProgState {
        ProgState {
            location: self.location,
            values: self.values.clone(),
        }
    }
}

fn check_int(v: Option<i64>) -> Result<i64, RuntimeErrorKind> {
    match v {
        Some(x) if (-SAFE_INT..=SAFE_INT).contains(&x) => Ok(x),
        _ => Err(RuntimeErrorKind::Overflow),
    }
}

impl<'r> Interpreter<'r> {
    pub fn new(routine: &'r Routine) -> Self {
        let mut slots = HashMap::new();
        for (i, name) in routine
            .params
            .iter()
            .map(|p| p.name.as_str())
            .chain(routine.locals.iter().map(|l| l.name.as_str()))
            .enumerate()
        {
            slots.insert(name, i);
        }
        let mut leaves = HashMap::new();
        visit_instrs(&routine.body, &mut |i| {
            if let InstrKind::Loop { body, label, .. } = &i.kind {
                for (k, leaf) in branch_leaves(body).into_iter().enumerate() {
                    leaves.insert((leaf.if_id, leaf.side), (label.as_str(), k + 1));
                }
            }
        });
        Interpreter {
            routine,
            slots,
            leaves,
        }
    }

    pub fn routine(&self) -> &'r Routine {
        self.routine
    }

    pub fn check_input(&self, input: &[Value]) -> Result<(), InputError> {
        let params = &self.routine.params;
        if input.len() != params.len() {
            return Err(InputError::Arity {
                expected: params.len(),
                got: input.len(),
            });
        }
        for (p, v) in params.iter().zip(input) {
            if v.type_of() != p.ty {
                return Err(InputError::Type {
                    name: p.name.clone(),
                    expected: p.ty,
                    got: v.clone(),
                });
            }
        }
        Ok(())
    }

    /// Whether the precondition holds; evaluation errors count as false.
    pub fn require_holds(&self, input: &[Value]) -> bool {
        match &self.routine.require {
            None => true,
            Some(req) => {
                // The precondition only reads parameters.
                matches!(self.eval(req, input, &mut Vec::new()), Ok(Value::Bool(true)))
            }
        }
    }

    /// The state before the body runs: the input followed by initialized
    /// locals.
    pub fn initial_state(&self, input: &[Value]) -> Result<ProgState, RuntimeErrorKind> {
        let mut values: Vec<Value> = input.to_vec();
        values.extend(self.routine.locals.iter().map(|l| Value::default_for(l.ty)));
        for (k, local) in self.routine.locals.iter().enumerate() {
            if let Some(init) = &local.init {
                values[input.len() + k] = self.eval(init, &values, &mut Vec::new())?;
            }
        }
        Ok(ProgState {
            location: Location::Entry,
            values,
        })
    }

    pub fn eval(
        &self,
        e: &Expr,
        values: &[Value],
        bound: &mut Vec<(String, i64)>,
    ) -> Result<Value, RuntimeErrorKind> {
        Ok(match e {
            Expr::Int(v) => Value::Int(*v),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(n) => match bound.iter().rev().find(|(b, _)| b == n) {
                Some((_, v)) => Value::Int(*v),
                None => values[self.slots[n.as_str()]].clone(),
            },
            Expr::Index { array, index } => {
                let i = self.eval_int(index, values, bound)?;
                let arr = self.array(array, values);
                let v = usize::try_from(i)
                    .ok()
                    .and_then(|i| arr.get(i))
                    .ok_or(RuntimeErrorKind::IndexOutOfRange)?;
                Value::Int(*v)
            }
            Expr::Count(array) => Value::Int(self.array(array, values).len() as i64),
            Expr::Unary(UnOp::Not, inner) => Value::Bool(!self.eval_bool(inner, values, bound)?),
            Expr::Unary(UnOp::Neg, inner) => {
                Value::Int(check_int(self.eval_int(inner, values, bound)?.checked_neg())?)
            }
            Expr::Binary(op, l, r) => match op {
                BinOp::And => Value::Bool(
                    self.eval_bool(l, values, bound)? && self.eval_bool(r, values, bound)?,
                ),
                BinOp::Or => Value::Bool(
                    self.eval_bool(l, values, bound)? || self.eval_bool(r, values, bound)?,
                ),
                BinOp::Implies => Value::Bool(
                    !self.eval_bool(l, values, bound)? || self.eval_bool(r, values, bound)?,
                ),
                BinOp::Eq | BinOp::Ne => {
                    let a = self.eval(l, values, bound)?;
                    let b = self.eval(r, values, bound)?;
                    Value::Bool((a == b) == (*op == BinOp::Eq))
                }
                _ => {
                    let a = self.eval_int(l, values, bound)?;
                    let b = self.eval_int(r, values, bound)?;
                    match op {
                        BinOp::Add => Value::Int(check_int(a.checked_add(b))?),
                        BinOp::Sub => Value::Int(check_int(a.checked_sub(b))?),
                        BinOp::Mul => Value::Int(check_int(a.checked_mul(b))?),
                        BinOp::Div | BinOp::Mod => {
                            if b == 0 {
                                return Err(RuntimeErrorKind::DivByZero);
                            }
                            let v = if *op == BinOp::Div { a / b } else { a % b };
                            Value::Int(check_int(Some(v))?)
                        }
                        BinOp::Lt => Value::Bool(a < b),
                        BinOp::Le => Value::Bool(a <= b),
                        BinOp::Gt => Value::Bool(a > b),
                        BinOp::Ge => Value::Bool(a >= b),
                        _ => unreachable!("handled above"),
                    }
                }
            },
            Expr::Across {
                var,
                lo,
                hi,
                quantifier,
                body,
            } => {
                let lo = self.eval_int(lo, values, bound)?;
                let hi = self.eval_int(hi, values, bound)?;
                if hi - lo >= MAX_RANGE {
                    return Err(RuntimeErrorKind::Overflow);
                }
                let mut acc = match quantifier {
                    Quantifier::All => Value::Bool(true),
                    Quantifier::Some => Value::Bool(false),
                    Quantifier::Sum => Value::Int(0),
                    Quantifier::Product => Value::Int(1),
                };
                for k in lo..=hi {
                    bound.push((var.clone(), k));
                    let v = self.eval(body, values, bound);
                    bound.pop();
                    acc = match (quantifier, acc, v?) {
                        (Quantifier::All, _, Value::Bool(false)) => return Ok(Value::Bool(false)),
                        (Quantifier::Some, _, Value::Bool(true)) => return Ok(Value::Bool(true)),
                        (Quantifier::Sum, Value::Int(a), Value::Int(b)) => {
                            Value::Int(check_int(a.checked_add(b))?)
                        }
                        (Quantifier::Product, Value::Int(a), Value::Int(b)) => {
                            Value::Int(check_int(a.checked_mul(b))?)
                        }
                        (_, acc, _) => acc,
                    };
                }
                acc
            }
        })
    }

    fn array<'v>(&self, name: &str, values: &'v [Value]) -> &'v [i64] {
        match &values[self.slots[name]] {
            Value::Array(a) => a,
            other => panic!("`{name}` holds {other}, not an array"),
        }
    }

    fn eval_int(
        &self,
        e: &Expr,
        values: &[Value],
        bound: &mut Vec<(String, i64)>,
    ) -> Result<i64, RuntimeErrorKind> {
        match self.eval(e, values, bound)? {
            Value::Int(v) => Ok(v),
            other => panic!("ill-typed expression `{e}` evaluated to {other}"),
        }
    }

    pub fn eval_bool(
        &self,
        e: &Expr,
        values: &[Value],
        bound: &mut Vec<(String, i64)>,
    ) -> Result<bool, RuntimeErrorKind> {
        match self.eval(e, values, bound)? {
            Value::Bool(b) => Ok(b),
            other => panic!("ill-typed expression `{e}` evaluated to {other}"),
        }
    }

    /// Applies one assignment to a state.
    pub fn assign(&self, instr: &Instr, state: &ProgState) -> Result<ProgState, RuntimeErrorKind> {
        let mut values = state.values.clone();
        self.assign_in_place(instr, &mut values)?;
        Ok(ProgState {
            location: Location::Node(instr.id),
            values,
        })
    }

    fn assign_in_place(&self, instr: &Instr, values: &mut [Value]) -> Result<(), RuntimeErrorKind> {
        match &instr.kind {
            InstrKind::Assign { target, value } => {
                let v = self.eval(value, values, &mut Vec::new())?;
                values[self.slots[target.as_str()]] = v;
            }
            InstrKind::AssignIndex { array, index, value } => {
                let i = self.eval_int(index, values, &mut Vec::new())?;
                let v = self.eval_int(value, values, &mut Vec::new())?;
                let Value::Array(arr) = &mut values[self.slots[array.as_str()]] else {
                    panic!("`{array}` is not an array");
                };
                let slot = usize::try_from(i)
                    .ok()
                    .and_then(|i| arr.get_mut(i))
                    .ok_or(RuntimeErrorKind::IndexOutOfRange)?;
                *slot = v;
            }
            _ => panic!("not an assignment"),
        }
        Ok(())
    }

    /// Runs the routine body on `input` and checks the postcondition. The
    /// precondition is the caller's responsibility.
    pub fn run(&self, input: &[Value], opts: RunOptions) -> Result<RunOutcome, InputError> {
        self.check_input(input)?;
        let line = self.routine.span.line;
        let initial = match self.initial_state(input) {
            Ok(s) => s,
            Err(kind) => {
                let mut values = input.to_vec();
                values.extend(self.routine.locals.iter().map(|l| Value::default_for(l.ty)));
                return Ok(RunOutcome {
                    status: RunStatus::RuntimeError { kind, line },
                    trace: vec![ProgState {
                        location: Location::Entry,
                        values,
                    }],
                    iterations: BTreeMap::new(),
                    branch_log: Vec::new(),
                });
            }
        };
        let mut frame = Frame {
            trace: opts.record_trace.then(|| vec![initial.clone()]),
            values: initial.values,
            location: Location::Entry,
            iterations: BTreeMap::new(),
            branch_log: Vec::new(),
            loops: Vec::new(),
            fuel: opts.fuel,
        };
        let status = match self.block(&self.routine.body, &mut frame) {
            Err(s) => s,
            Ok(()) => self.postcondition(&frame.values),
        };
        let trace = match frame.trace.take() {
            Some(t) => t,
            None => vec![frame.snapshot()],
        };
        Ok(RunOutcome {
            status,
            trace,
            iterations: frame.iterations,
            branch_log: frame.branch_log,
        })
    }

    fn postcondition(&self, values: &[Value]) -> RunStatus {
        for clause in &self.routine.ensure {
            match self.eval_bool(&clause.expr, values, &mut Vec::new()) {
                Ok(true) => {}
                Ok(false) => {
                    return RunStatus::ContractViolation {
                        tag: clause.tag.clone(),
                        line: clause.span.line,
                    }
                }
                Err(kind) => {
                    return RunStatus::RuntimeError {
                        kind,
                        line: clause.span.line,
                    }
                }
            }
        }
        RunStatus::Ok
    }

    fn cond(&self, e: &Expr, instr: &Instr, frame: &Frame) -> Exec<bool> {
        self.eval_bool(e, &frame.values, &mut Vec::new()).map_err(|kind| {
            RunStatus::RuntimeError {
                kind,
                line: instr.span.line,
            }
        })
    }

    fn block<'a>(&'a self, block: &'a Block, frame: &mut Frame<'a>) -> Exec<()> {
        for instr in block {
            self.instr(instr, frame)?;
        }
        Ok(())
    }

    fn instr<'a>(&'a self, instr: &'a Instr, frame: &mut Frame<'a>) -> Exec<()> {
        match &instr.kind {
            InstrKind::Assign { .. } | InstrKind::AssignIndex { .. } => {
                self.assign_in_place(instr, &mut frame.values).map_err(|kind| {
                    RunStatus::RuntimeError {
                        kind,
                        line: instr.span.line,
                    }
                })?;
                frame.location = Location::Node(instr.id);
                let s = frame.trace.is_some().then(|| frame.snapshot());
                if let (Some(trace), Some(s)) = (frame.trace.as_mut(), s) {
                    trace.push(s);
                }
            }
            InstrKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let taken = self.cond(cond, instr, frame)?;
                let side = if taken { Side::Then } else { Side::Else };
                if let Some(&(label, branch)) = self.leaves.get(&(instr.id, side)) {
                    let level = frame
                        .loops
                        .iter()
                        .rev()
                        .find(|(l, _)| *l == label)
                        .map_or(0, |(_, it)| *it);
                    frame.branch_log.push(BranchEvent {
                        label: label.to_string(),
                        level,
                        branch,
                    });
                }
                if taken {
                    self.block(then_branch, frame)?;
                } else if let Some(b) = else_branch {
                    self.block(b, frame)?;
                }
            }
            InstrKind::Loop {
                from,
                until,
                body,
                label,
            } => {
                if let Some(f) = from {
                    self.block(f, frame)?;
                }
                frame.iterations.entry(label.clone()).or_insert(0);
                frame.loops.push((label.as_str(), 0));
                loop {
                    if self.cond(until, instr, frame)? {
                        break;
                    }
                    let top = frame.loops.last_mut().unwrap();
                    if top.1 >= frame.fuel {
                        return Err(RunStatus::FuelExhausted {
                            label: label.clone(),
                            line: instr.span.line,
                        });
                    }
                    top.1 += 1;
                    *frame.iterations.get_mut(label).unwrap() += 1;
                    self.block(body, frame)?;
                }
                frame.loops.pop();
            }
            InstrKind::Check { cond, tag, origin } => {
                if !self.cond(cond, instr, frame)? {
                    return Err(RunStatus::CheckViolation {
                        tag: tag.clone(),
                        target: match origin {
                            CheckOrigin::Seeded { target } => Some(*target),
                            CheckOrigin::User => None,
                        },
                        line: instr.span.line,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `e` in `state` of routine `r`.
pub fn eval_expr(r: &Routine, state: &ProgState, e: &Expr) -> Result<Value, RuntimeErrorKind> {
    Interpreter::new(r).eval(e, &state.values, &mut Vec::new())
}

/// Runs `r` on `input`; see [`Interpreter::run`].
pub fn run(r: &Routine, input: &[Value], opts: RunOptions) -> Result<RunOutcome, InputError> {
    Interpreter::new(r).run(input, opts)
}

/// One line per state: `@<line>: x=1 a=[3,1]`.
pub fn dump_trace(r: &Routine, trace: &[ProgState]) -> String {
    let names: Vec<String> = r.variables().into_iter().map(|(n, _)| n).collect();
    let mut out = String::new();
    for s in trace {
        let line = match s.location {
            Location::Entry => r.span.line,
            Location::Node(id) => r.find(id).map_or(0, |i| i.span.line),
        };
        let vars: Vec<String> = names
            .iter()
            .zip(&s.values)
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        out.push_str(&format!("@{line}: {}\n", vars.join(" ")));
    }
    out
}
