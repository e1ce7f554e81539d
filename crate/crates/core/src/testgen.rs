//! Test generation by bounded search: every input of a finite domain is run
//! on the instrumented routine, and each seeded target is covered by the
//! first input (in a lexicographic or seeded random order) that violates it.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lang::Routine;
use crate::scu::{instrument, InstrumentedRoutine, Mode, ScuError, Target, TargetKind};
use crate::semantics::{
    Domain, InputError, Interpreter, RunOptions, RunStatus, Value, DEFAULT_RUN_FUEL,
};
use crate::unroll::GUARD_TARGET;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "snake_case")]
pub enum SearchOrder {
    Lex,
    Random { seed: u64 },
}

impl fmt::Display for SearchOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchOrder::Lex => f.write_str("lex"),
            SearchOrder::Random { seed } => write!(f, "random({seed})"),
        }
    }
}

/// A parameter valuation, serialized as a `{name: value}` map in parameter
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Input(pub Vec<(String, Value)>);

impl Input {
    pub fn from_values(r: &Routine, values: &[Value]) -> Input {
        Input(
            r.params
                .iter()
                .zip(values)
                .map(|(p, v)| (p.name.clone(), v.clone()))
                .collect(),
        )
    }

    /// Values in `r`'s parameter order.
    pub fn values_for(&self, r: &Routine) -> Result<Vec<Value>, TestgenError> {
        if let Some((extra, _)) = self.0.iter().find(|(n, _)| !r.params.iter().any(|p| p.name == *n)) {
            return Err(TestgenError::UnknownParam(extra.clone()));
        }
        r.params
            .iter()
            .map(|p| {
                self.0
                    .iter()
                    .find(|(n, _)| *n == p.name)
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| TestgenError::MissingParam(p.name.clone()))
            })
            .collect()
    }
}

impl fmt::Display for Input {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{n}={v}")?;
        }
        Ok(())
    }
}

impl Serialize for Input {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (n, v) in &self.0 {
            map.serialize_entry(n, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Input {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct InputVisitor;
        impl<'de> Visitor<'de> for InputVisitor {
            type Value = Input;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from parameter names to values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Input, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Input(out))
            }
        }
        d.deserialize_map(InputVisitor)
    }
}

/// What a replay of a test on the original routine observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub iterations: u32,
    /// Branch taken at the target's level (level 1 for SC), 1-based.
    pub branch: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub target: u32,
    pub kind: TargetKind,
    pub level: u32,
    pub branch: u32,
    pub input: Input,
    pub certified: Certificate,
    /// Outcome of the original routine on this input.
    pub baseline: RunStatus,
    /// Seed of the search order that found the input, if random.
    pub origin_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSuite {
    pub routine: String,
    pub mode: Mode,
    pub depth: u32,
    pub domain: Domain,
    #[serde(flatten)]
    pub order: SearchOrder,
    /// Branch count of the loop body.
    pub m: usize,
    pub target_count: usize,
    pub tests: Vec<TestCase>,
    /// Targets no input of the domain reaches.
    pub uncovered: Vec<u32>,
    /// Targets not reached within the search budget.
    pub unknown: Vec<u32>,
}

impl TestSuite {
    pub fn covered(&self) -> Vec<u32> {
        self.tests.iter().map(|t| t.target).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suites serialize")
    }

    pub fn from_json(text: &str) -> Result<TestSuite, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TestgenError {
    #[error(transparent)]
    Instrument(#[from] ScuError),
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("input lacks parameter `{0}`")]
    MissingParam(String),
    #[error("input names unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("test {test} does not replay to its target: {detail}")]
    Certification { test: String, detail: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchOptions {
    /// Loop fuel for runs of routines that still contain loops.
    pub fuel: u32,
    /// Maximum number of inputs examined per target.
    pub budget: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            fuel: DEFAULT_RUN_FUEL,
            budget: None,
        }
    }
}

/// The target each input of the domain violates on the instrumented
/// routine. Independent of search order, so one map serves every run.
#[derive(Clone, Debug)]
pub struct TargetMap {
    /// Inputs satisfying the precondition, in lexicographic order.
    pub inputs: Vec<Vec<Value>>,
    /// Seeded target violated by each input, if any.
    pub hits: Vec<Option<u32>>,
}

impl TargetMap {
    pub fn build(ir: &InstrumentedRoutine, d: &Domain, fuel: u32) -> TargetMap {
        let interp = Interpreter::new(&ir.routine);
        let opts = RunOptions {
            fuel,
            record_trace: false,
        };
        let mut inputs = Vec::new();
        let mut hits = Vec::new();
        for input in d.inputs(&ir.routine.params) {
            if !interp.require_holds(&input) {
                continue;
            }
            let out = interp.run(&input, opts).expect("domain inputs are well-typed");
            hits.push(out.status.seeded_target().filter(|&t| t != GUARD_TARGET));
            inputs.push(input);
        }
        TargetMap { inputs, hits }
    }

    /// Indices into `inputs` in the given search order.
    pub fn order(&self, order: SearchOrder) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.inputs.len()).collect();
        if let SearchOrder::Random { seed } = order {
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        idx
    }
}

/// Outcome of searching for one target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Found(Vec<Value>),
    Unreachable,
    Unknown,
}

struct Selection {
    found: BTreeMap<u32, usize>,
    uncovered: Vec<u32>,
    unknown: Vec<u32>,
}

fn select(ir: &InstrumentedRoutine, map: &TargetMap, order: SearchOrder, budget: Option<usize>) -> Selection {
    let permutation = map.order(order);
    let limit = budget.unwrap_or(usize::MAX).min(permutation.len());
    let mut found = BTreeMap::new();
    for &i in &permutation[..limit] {
        if let Some(t) = map.hits[i] {
            found.entry(t).or_insert(i);
        }
    }
    let mut uncovered = Vec::new();
    let mut unknown = Vec::new();
    for t in &ir.targets {
        if !found.contains_key(&t.target_id) {
            if limit < permutation.len() {
                unknown.push(t.target_id);
            } else {
                uncovered.push(t.target_id);
            }
        }
    }
    Selection {
        found,
        uncovered,
        unknown,
    }
}

/// Searches `d` in `order` for an input violating target `t`'s seeded
/// check on `ir`.
pub fn solve_target(
    ir: &InstrumentedRoutine,
    t: &Target,
    d: &Domain,
    order: SearchOrder,
    opts: SearchOptions,
) -> Solution {
    let interp = Interpreter::new(&ir.routine);
    let run_opts = RunOptions {
        fuel: opts.fuel,
        record_trace: false,
    };
    let mut inputs: Vec<Vec<Value>> = d
        .inputs(&ir.routine.params)
        .into_iter()
        .filter(|i| interp.require_holds(i))
        .collect();
    if let SearchOrder::Random { seed } = order {
        inputs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let limit = opts.budget.unwrap_or(usize::MAX).min(inputs.len());
    for input in &inputs[..limit] {
        let out = interp.run(input, run_opts).expect("domain inputs are well-typed");
        if out.status.seeded_target() == Some(t.target_id) {
            return Solution::Found(input.clone());
        }
    }
    if limit < inputs.len() {
        Solution::Unknown
    } else {
        Solution::Unreachable
    }
}

/// Checks what a replay on the original routine must show for `target`.
fn certify(
    original: &Interpreter,
    target: &Target,
    m: usize,
    label: &str,
    input: &[Value],
    fuel: u32,
) -> Result<(Certificate, RunStatus), String> {
    let out = original
        .run(
            input,
            RunOptions {
                fuel,
                record_trace: false,
            },
        )
        .map_err(|e| e.to_string())?;
    let iterations = out.iterations.get(label).copied().unwrap_or(0);
    let at_level = |level: u32| {
        out.branch_log
            .iter()
            .rev()
            .find(|e| e.label == label && e.level == level)
            .map(|e| e.branch)
    };
    let (ok, branch) = match target.kind {
        TargetKind::ScuPlainLevel => (iterations == target.level, None),
        TargetKind::ScuBranchLevel => {
            let b = at_level(target.level);
            (
                iterations == target.level && b == target.local_branch(m),
                b,
            )
        }
        TargetKind::ScBranch if m == 0 => (iterations >= 1, None),
        TargetKind::ScBranch => {
            let first = out
                .branch_log
                .iter()
                .find(|e| e.label == label && e.level == 1)
                .map(|e| e.branch);
            (first == target.local_branch(m), first)
        }
    };
    let cert = Certificate { iterations, branch };
    if ok {
        Ok((cert, out.status))
    } else {
        Err(format!(
            "target {} expects level {} branch {:?}, observed {} iterations and branch {:?}",
            target.target_id,
            target.level,
            target.local_branch(m),
            iterations,
            branch
        ))
    }
}

/// Builds a suite from a precomputed target map.
pub fn generate_from_map(
    r: &Routine,
    ir: &InstrumentedRoutine,
    map: &TargetMap,
    d: &Domain,
    order: SearchOrder,
    opts: SearchOptions,
) -> Result<TestSuite, TestgenError> {
    let sel = select(ir, map, order, opts.budget);
    let original = Interpreter::new(r);
    let mut tests = Vec::new();
    for (&target_id, &idx) in &sel.found {
        let target = ir.target(target_id).expect("hit targets are declared");
        let values = &map.inputs[idx];
        let id = format!("t{target_id}");
        let (certified, baseline) =
            certify(&original, target, ir.m, &ir.loop_label, values, opts.fuel)
                .map_err(|detail| TestgenError::Certification {
                    test: id.clone(),
                    detail,
                })?;
        tests.push(TestCase {
            id,
            target: target_id,
            kind: target.kind,
            level: target.level,
            branch: target.branch,
            input: Input::from_values(r, values),
            certified,
            baseline,
            origin_seed: match order {
                SearchOrder::Lex => None,
                SearchOrder::Random { seed } => Some(seed),
            },
        });
    }
    Ok(TestSuite {
        routine: r.name.clone(),
        mode: ir.mode,
        depth: ir.n,
        domain: *d,
        order,
        m: ir.m,
        target_count: ir.targets.len(),
        tests,
        uncovered: sel.uncovered,
        unknown: sel.unknown,
    })
}

/// Instruments `r` (SC, or SCU at depth `n`), covers every reachable
/// target and certifies each test by replay on `r`.
pub fn generate(
    r: &Routine,
    n: u32,
    d: &Domain,
    order: SearchOrder,
    mode: Mode,
    opts: SearchOptions,
) -> Result<TestSuite, TestgenError> {
    let ir = instrument(r, mode, n)?;
    let map = TargetMap::build(&ir, d, opts.fuel);
    generate_from_map(r, &ir, &map, d, order, opts)
}

/// Replays every test of `suite` on the original routine and checks that
/// it still exercises its target. Returns the observed certificates.
pub fn replay(r: &Routine, suite: &TestSuite, fuel: u32) -> Result<Vec<Certificate>, TestgenError> {
    let label = crate::lang::analyze(r)
        .loops
        .first()
        .map(|l| l.label.clone())
        .unwrap_or_default();
    let original = Interpreter::new(r);
    suite
        .tests
        .iter()
        .map(|tc| {
            let target = Target {
                target_id: tc.target,
                kind: tc.kind,
                level: tc.level,
                branch: tc.branch,
                location: crate::lang::NodeId::new(0),
                line: 0,
                seeded_expr: String::new(),
                tag: String::new(),
            };
            let values = tc.input.values_for(r)?;
            original.check_input(&values)?;
            let (cert, _) = certify(&original, &target, suite.m, &label, &values, fuel).map_err(
                |detail| TestgenError::Certification {
                    test: tc.id.clone(),
                    detail,
                },
            )?;
            if cert != tc.certified {
                return Err(TestgenError::Certification {
                    test: tc.id.clone(),
                    detail: format!("recorded {:?}, observed {:?}", tc.certified, cert),
                });
            }
            Ok(cert)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::scu::instrument_scu;

    const FACT: &str = "routine fact (n: INTEGER)
  require n >= 0 and n <= 10
  local i: INTEGER; f: INTEGER
  do from i := 1; f := 1 until i > n loop f := f * i; i := i + 1 end
  ensure ok: f >= 1 end";

    const GCD: &str = "routine gcd (a: INTEGER, b: INTEGER)
  require a > 0 and b > 0
  local x: INTEGER; y: INTEGER
  do
    from x := a; y := b until x = y loop
      if x > y then x := x - y else y := y - x end
    end
  end";

    #[test]
    fn factorial_level_i_needs_n_equal_i() {
        let r = parse(FACT).unwrap();
        let d = Domain::new(0, 10, 0).unwrap();
        let ir = instrument_scu(&r, 6).unwrap();
        for t in &ir.targets {
            let sol = solve_target(&ir, t, &d, SearchOrder::Lex, SearchOptions::default());
            assert_eq!(sol, Solution::Found(vec![Value::Int(i64::from(t.level))]));
        }
        let ir = instrument_scu(&r, 12).unwrap();
        let t11 = ir.target(11).unwrap();
        assert_eq!(
            solve_target(&ir, t11, &d, SearchOrder::Lex, SearchOptions::default()),
            Solution::Unreachable
        );
        let budgeted = SearchOptions {
            budget: Some(3),
            ..SearchOptions::default()
        };
        assert_eq!(solve_target(&ir, ir.target(5).unwrap(), &d, SearchOrder::Lex, budgeted), Solution::Unknown);
    }

    #[test]
    fn gcd_depth_two_covers_four() {
        let r = parse(GCD).unwrap();
        let d = Domain::new(0, 6, 0).unwrap();
        let suite = generate(&r, 2, &d, SearchOrder::Lex, Mode::Scu, SearchOptions::default()).unwrap();
        assert_eq!(suite.tests.len(), 4);
        assert!(suite.uncovered.is_empty() && suite.unknown.is_empty());
        assert_eq!(replay(&r, &suite, DEFAULT_RUN_FUEL).unwrap().len(), 4);
        let sc = generate(&r, 0, &d, SearchOrder::Lex, Mode::Sc, SearchOptions::default()).unwrap();
        assert_eq!(sc.tests.len(), 2);
    }

    #[test]
    fn map_agrees_with_direct_search() {
        let r = parse(GCD).unwrap();
        let d = Domain::new(0, 5, 0).unwrap();
        let ir = instrument_scu(&r, 3).unwrap();
        let order = SearchOrder::Random { seed: 9 };
        let suite = generate(&r, 3, &d, order, Mode::Scu, SearchOptions::default()).unwrap();
        for t in &ir.targets {
            let direct = solve_target(&ir, t, &d, order, SearchOptions::default());
            let via_map = suite.tests.iter().find(|tc| tc.target == t.target_id);
            match (direct, via_map) {
                (Solution::Found(v), Some(tc)) => assert_eq!(tc.input.values_for(&r).unwrap(), v),
                (Solution::Unreachable, None) => {}
                other => panic!("disagreement on target {}: {other:?}", t.target_id),
            }
        }
    }

    #[test]
    fn suite_json_round_trip() {
        let r = parse(GCD).unwrap();
        let d = Domain::new(0, 4, 0).unwrap();
        let suite = generate(&r, 2, &d, SearchOrder::Random { seed: 3 }, Mode::Scu, SearchOptions::default()).unwrap();
        let json = suite.to_json();
        assert!(json.contains("\"input\": {\n"), "{json}");
        assert_eq!(TestSuite::from_json(&json).unwrap(), suite);
    }

    #[test]
    fn input_mapping_errors() {
        let r = parse(GCD).unwrap();
        let missing = Input(vec![("a".into(), Value::Int(1))]);
        assert_eq!(missing.values_for(&r), Err(TestgenError::MissingParam("b".into())));
        let extra = Input(vec![("z".into(), Value::Int(1))]);
        assert_eq!(extra.values_for(&r), Err(TestgenError::UnknownParam("z".into())));
    }
}
