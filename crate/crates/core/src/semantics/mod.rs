//! Operational and bounded denotational semantics of routines.

mod denote;
mod interp;
mod value;

pub use denote::{denote, DenoteSummary, Denotation, DEFAULT_DENOTE_FUEL};
pub use interp::{
    dump_trace, eval_expr, run, BranchEvent, InputError, Interpreter, Location, ProgState,
    RunOptions, RunOutcome, RunStatus, RuntimeErrorKind, DEFAULT_RUN_FUEL, SAFE_INT,
};
pub use value::{Domain, DomainError, Value};
