//! Trace-set semantics of loop unrolling, checked as an executable algebra,
//! and a coverage-driven test pipeline over a small imperative language:
//! parse, unroll, instrument with per-level seeded checks, search bounded
//! input domains for tests, and evaluate the suites against mutants.

pub mod corpus;
pub mod evaluate;
pub mod lang;
pub mod lawcheck;
pub mod mutate;
pub mod scu;
pub mod semantics;
pub mod testgen;
pub mod trace;
pub mod unroll;

use thiserror::Error;

pub use lang::{parse, pretty, ParseError, Routine};
pub use scu::ScuError;
pub use semantics::{Domain, DomainError, InputError};
pub use testgen::TestgenError;
pub use unroll::UnrollError;

/// Any error raised by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error(transparent)]
    Unroll(#[from] UnrollError),
    #[error(transparent)]
    Instrument(#[from] ScuError),
    #[error(transparent)]
    Testgen(#[from] TestgenError),
}
