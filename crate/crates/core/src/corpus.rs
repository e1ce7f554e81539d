//! The bundled benchmark routines.

use crate::lang::{parse, ParseError, Routine};
use crate::semantics::Domain;

#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    /// File stem, e.g. `binary_search`.
    pub name: &'static str,
    /// Benchmark label, e.g. `BINARY_SEARCH`.
    pub label: &'static str,
    pub source: &'static str,
    /// Expected branch count of the loop body.
    pub branches: usize,
    pub domain: Domain,
    /// Deepest unrolling level used for this routine.
    pub max_depth: u32,
}

impl CorpusEntry {
    pub fn routine(&self) -> Result<Routine, ParseError> {
        parse(self.source)
    }

    pub fn file_name(&self) -> String {
        format!("{}.mil", self.name)
    }
}

const fn domain(int_min: i64, int_max: i64, array_len_max: usize) -> Domain {
    Domain {
        int_min,
        int_max,
        array_len_max,
    }
}

macro_rules! entry {
    ($name:literal, $label:literal, $branches:expr, $domain:expr, $depth:expr) => {
        CorpusEntry {
            name: $name,
            label: $label,
            source: include_str!(concat!("../../../corpus/", $name, ".mil")),
            branches: $branches,
            domain: $domain,
            max_depth: $depth,
        }
    };
}

pub static CORPUS: [CorpusEntry; 12] = [
    entry!("binary_search", "BINARY_SEARCH", 3, domain(0, 2, 8), 4),
    entry!("max_in_array", "MAX_IN_ARRAY", 2, domain(0, 3, 6), 5),
    entry!("square_root", "SQUARE_ROOT", 3, domain(0, 200, 0), 8),
    entry!("factorial", "FACTORIAL", 0, domain(0, 15, 0), 12),
    entry!("gcd", "GCD", 2, domain(0, 12, 0), 8),
    entry!("sum_and_max", "SUM_AND_MAX", 2, domain(0, 3, 6), 6),
    entry!("prime_check", "PRIME_CHECK", 2, domain(0, 120, 0), 8),
    entry!("linear_search", "LINEAR_SEARCH", 0, domain(0, 2, 6), 6),
    entry!("arithmetic_add", "ARITHMETIC_ADD", 0, domain(0, 15, 0), 15),
    entry!("arithmetic_multiply", "ARITHMETIC_MULTIPLY", 0, domain(0, 15, 0), 15),
    entry!("arithmetic_divide", "ARITHMETIC_DIVIDE", 0, domain(0, 15, 0), 15),
    entry!("inverse", "INVERSE", 2, domain(0, 12, 0), 8),
];

pub fn find(name: &str) -> Option<&'static CorpusEntry> {
    let key = name.trim_end_matches(".mil").to_ascii_lowercase();
    CORPUS.iter().find(|e| e.name == key)
}
