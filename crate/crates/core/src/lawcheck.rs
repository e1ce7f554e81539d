//! Randomized and exhaustive checking of the trace-set laws.
//!
//! Every law in [`registry`] is a decision procedure over an [`Instance`]:
//! a few traces, trace sets, predicates and a loop index. Random mode samples
//! instances from a seeded generator; exhaustive mode enumerates every
//! instance over a two-state universe with traces of length at most two.

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{loop_rec, loop_union, Predicate, StateId, Trace, TraceSet, Universe};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LawError {
    #[error("unknown law `{0}`")]
    UnknownLaw(String),
    #[error("bounds must be at least 1 (got {0})")]
    ZeroBound(&'static str),
}

/// Sizes used when sampling instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub universe_size: u16,
    pub max_trace_len: usize,
    pub max_set_size: usize,
    /// Largest loop index drawn for loop laws.
    pub max_loop_index: usize,
    /// Fuel bound `K` standing in for the infinite union in `Under_approx`.
    pub fuel: usize,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            universe_size: 5,
            max_trace_len: 4,
            max_set_size: 8,
            max_loop_index: 6,
            fuel: 8,
        }
    }
}

impl Bounds {
    /// The bounds used by exhaustive mode.
    pub fn exhaustive() -> Self {
        Bounds {
            universe_size: 2,
            max_trace_len: 2,
            max_set_size: 6,
            max_loop_index: 6,
            fuel: 8,
        }
    }

    fn validate(&self) -> Result<(), LawError> {
        if self.universe_size == 0 {
            return Err(LawError::ZeroBound("universe_size"));
        }
        if self.max_trace_len == 0 {
            return Err(LawError::ZeroBound("max_trace_len"));
        }
        if self.max_set_size == 0 {
            return Err(LawError::ZeroBound("max_set_size"));
        }
        Ok(())
    }
}

/// One set of law inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub traces: [Trace; 3],
    pub sets: [TraceSet; 3],
    pub preds: [Predicate; 2],
    pub index: usize,
}

/// Which parts of an [`Instance`] a law reads. Exhaustive mode only
/// enumerates these.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arity {
    pub traces: usize,
    pub sets: usize,
    pub preds: usize,
    pub index: bool,
}

const fn arity(traces: usize, sets: usize, preds: usize, index: bool) -> Arity {
    Arity {
        traces,
        sets,
        preds,
        index,
    }
}

pub type LawFn = fn(&Instance, &Universe, &Bounds) -> bool;

/// A named law and its decision procedure.
#[derive(Clone, Copy)]
pub struct LawCase {
    pub name: &'static str,
    pub arity: Arity,
    pub check: LawFn,
}

impl std::fmt::Debug for LawCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LawCase")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawReport {
    pub law_name: String,
    pub samples_run: usize,
    pub counterexample: Option<String>,
    #[serde(with = "duration_ms")]
    pub elapsed: Duration,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1e3)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms / 1e3))
    }
}

fn holds(p: &Predicate) -> impl Fn(&StateId) -> bool + '_ {
    move |s| p.holds(s)
}

fn concat_assoc(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [x, y, w] = &i.traces;
    let left = x.concat(y).and_then(|xy| xy.concat(w));
    let right = y.concat(w).and_then(|yw| x.concat(&yw));
    // Both groupings must agree on definedness as well as value.
    match (&left, &right) {
        (Some(l), Some(r)) => l == r,
        (None, None) => true,
        _ => false,
    }
}

fn concat_station(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [x, y, _] = &i.traces;
    let left_unit = Trace::stationary(*x.first());
    let right_unit = Trace::stationary(*x.last());
    let mut ok = left_unit.concat(x).as_ref() == Some(x) && x.concat(&right_unit).as_ref() == Some(x);
    if let Some(z) = x.concat(y) {
        if x.is_stationary() {
            ok &= &z == y;
        }
        if y.is_stationary() {
            ok &= &z == x;
        }
    }
    ok
}

/// Builds the chain `x`, `x + y`, `(x + y) + w`, falling back to the raw
/// traces when a junction does not match.
fn prefix_chain(i: &Instance) -> [Trace; 3] {
    let [x, y, w] = &i.traces;
    let xy = x.concat(y).unwrap_or_else(|| y.clone());
    let xyw = xy.concat(w).unwrap_or_else(|| w.clone());
    [x.clone(), xy, xyw]
}

fn concat_order(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let chain = prefix_chain(i);
    let le = |a: &Trace, b: &Trace| a.prefix_of(b).holds();
    let mut ok = true;
    for a in &chain {
        ok &= le(a, a);
        for b in &chain {
            if le(a, b) && le(b, a) {
                ok &= a == b;
            }
            for c in &chain {
                if le(a, b) && le(b, c) {
                    ok &= le(a, c);
                }
            }
        }
    }
    // Proper prefix iff the suffix is not stationary.
    let [x, y, _] = &i.traces;
    if let Some(z) = x.concat(y) {
        ok &= x.prefix_of(&z).holds();
        ok &= (x.prefix_of(&z) == crate::trace::PrefixOrder::ProperPrefix) == !y.is_stationary();
    }
    ok
}

fn extension_stable(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [x, _, _] = &i.traces;
    let v = &i.preds[0];
    prefix_chain(i)
        .iter()
        .filter(|z| x.prefix_of(z).holds())
        .all(|z| !x.satisfies(holds(v)) || z.satisfies(holds(v)))
}

fn concat_fail1(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    TraceSet::fail().concat(&i.sets[0]).is_empty()
}

fn concat_fail2(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    i.sets[0].concat(&TraceSet::fail()).is_empty()
}

fn concat_skip1(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    i.sets[0].concat(&TraceSet::skip(u)) == i.sets[0]
}

fn concat_skip2(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    TraceSet::skip(u).concat(&i.sets[0]) == i.sets[0]
}

fn false_restrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    i.sets[0].restrict(|_| false).is_empty()
}

fn true_restrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    i.sets[0].restrict(|_| true) == i.sets[0]
}

fn false_corestrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    i.sets[0].corestrict(|_| false).is_empty()
}

fn true_corestrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    i.sets[0].corestrict(|_| true) == i.sets[0]
}

fn two_restrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [c, d] = &i.preds;
    let a = &i.sets[0];
    a.restrict(holds(d)).restrict(holds(c)) == a.restrict(holds(&c.and(d)))
}

fn two_corestrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [c, d] = &i.preds;
    let a = &i.sets[0];
    a.corestrict(holds(c)).corestrict(holds(d)) == a.corestrict(holds(&c.and(d)))
}

fn corestrict_then_restrict(i: &Instance) -> TraceSet {
    let [c, d] = &i.preds;
    i.sets[0].corestrict(holds(c)).concat(&i.sets[1].restrict(holds(d)))
}

fn corestrict_restrict1(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [c, d] = &i.preds;
    corestrict_then_restrict(i) == i.sets[0].corestrict(holds(&c.and(d))).concat(&i.sets[1])
}

fn corestrict_restrict2(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [c, d] = &i.preds;
    corestrict_then_restrict(i) == i.sets[0].concat(&i.sets[1].restrict(holds(&c.and(d))))
}

fn corestrict_restrict3(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    corestrict_then_restrict(i).is_subset(&i.sets[0].concat(&i.sets[1]))
}

fn corestrict_restrict4(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let c = &i.preds[0];
    let not_c = c.negate();
    i.sets[0]
        .corestrict(holds(c))
        .concat(&i.sets[1].restrict(holds(&not_c)))
        .is_empty()
}

fn corestrict_restrict5(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let c = &i.preds[0];
    i.sets[0].corestrict(holds(c)).concat(&i.sets[1]) == i.sets[0].concat(&i.sets[1].restrict(holds(c)))
}

fn restrict_compose(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let v = &i.preds[0];
    let [a, b, _] = &i.sets;
    a.restrict(holds(v)).concat(b) == a.concat(b).restrict(holds(v))
}

fn compose_corestrict(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let v = &i.preds[0];
    let [a, b, _] = &i.sets;
    a.concat(&b.corestrict(holds(v))) == a.concat(b).corestrict(holds(v))
}

fn restrict_union(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let v = &i.preds[0];
    let [a, b, _] = &i.sets;
    a.union(b).restrict(holds(v)) == a.restrict(holds(v)).union(&b.restrict(holds(v)))
}

fn corestrict_union(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let v = &i.preds[0];
    let [a, b, _] = &i.sets;
    a.union(b).corestrict(holds(v)) == a.corestrict(holds(v)).union(&b.corestrict(holds(v)))
}

fn compose_union1(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [a, b, c] = &i.sets;
    a.concat(&b.union(c)) == a.concat(b).union(&a.concat(c))
}

fn compose_union2(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let [a, b, c] = &i.sets;
    a.union(b).concat(c) == a.concat(c).union(&b.concat(c))
}

fn test_leq(i: &Instance, _: &Universe, _: &Bounds) -> bool {
    let t = &i.preds[0];
    let [a, b, _] = &i.sets;
    !(a.tests(holds(t)) && a.leq(b)) || b.tests(holds(t))
}

fn loop_skip1(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    let e = &i.preds[0];
    loop_union(holds(e), &i.sets[0], 1, u) == TraceSet::skip(u).corestrict(holds(e))
}

fn loop_skip2(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    let e = &i.preds[0];
    loop_union(holds(e), &i.sets[0], 1, u) == TraceSet::skip(u).restrict(holds(e))
}

fn loop3_l0(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    loop_union(holds(&i.preds[0]), &i.sets[0], 0, u).is_empty()
}

fn loop3_li(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    let e = &i.preds[0];
    let b = &i.sets[0];
    let guarded = b.restrict(holds(&e.negate()));
    let step = guarded.power(i.index, u).corestrict(holds(e));
    loop_union(holds(e), b, i.index + 1, u) == loop_union(holds(e), b, i.index, u).union(&step)
}

fn fixdef2_step(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    let e = &i.preds[0];
    let b = &i.sets[0];
    let prev = loop_rec(holds(e), b, i.index, u);
    let expanded = TraceSet::skip(u)
        .restrict(holds(e))
        .union(&b.concat(&prev).restrict(holds(&e.negate())));
    loop_rec(holds(e), b, i.index + 1, u) == expanded
}

fn def_equiv(i: &Instance, u: &Universe, _: &Bounds) -> bool {
    let e = &i.preds[0];
    loop_rec(holds(e), &i.sets[0], i.index, u) == loop_union(holds(e), &i.sets[0], i.index, u)
}

fn under_approx(i: &Instance, u: &Universe, b: &Bounds) -> bool {
    let e = &i.preds[0];
    let limit = loop_union(holds(e), &i.sets[0], b.fuel, u);
    (0..=i.index.min(b.fuel)).all(|k| loop_union(holds(e), &i.sets[0], k, u).is_subset(&limit))
}

/// Every law, in the order the theory introduces them.
pub fn registry() -> &'static [LawCase] {
    const LAWS: &[LawCase] = &[
        LawCase { name: "Concat_assoc", arity: arity(3, 0, 0, false), check: concat_assoc },
        LawCase { name: "Concat_station", arity: arity(2, 0, 0, false), check: concat_station },
        LawCase { name: "Concat_order", arity: arity(3, 0, 0, false), check: concat_order },
        LawCase { name: "Extension_stable", arity: arity(3, 0, 1, false), check: extension_stable },
        LawCase { name: "Concat_fail1", arity: arity(0, 1, 0, false), check: concat_fail1 },
        LawCase { name: "Concat_fail2", arity: arity(0, 1, 0, false), check: concat_fail2 },
        LawCase { name: "Concat_skip1", arity: arity(0, 1, 0, false), check: concat_skip1 },
        LawCase { name: "Concat_skip2", arity: arity(0, 1, 0, false), check: concat_skip2 },
        LawCase { name: "False_restrict", arity: arity(0, 1, 0, false), check: false_restrict },
        LawCase { name: "True_restrict", arity: arity(0, 1, 0, false), check: true_restrict },
        LawCase { name: "False_corestrict", arity: arity(0, 1, 0, false), check: false_corestrict },
        LawCase { name: "True_corestrict", arity: arity(0, 1, 0, false), check: true_corestrict },
        LawCase { name: "Two_restrict", arity: arity(0, 1, 2, false), check: two_restrict },
        LawCase { name: "Two_corestrict", arity: arity(0, 1, 2, false), check: two_corestrict },
        LawCase { name: "Corestrict_restrict1", arity: arity(0, 2, 2, false), check: corestrict_restrict1 },
        LawCase { name: "Corestrict_restrict2", arity: arity(0, 2, 2, false), check: corestrict_restrict2 },
        LawCase { name: "Corestrict_restrict3", arity: arity(0, 2, 2, false), check: corestrict_restrict3 },
        LawCase { name: "Corestrict_restrict4", arity: arity(0, 2, 1, false), check: corestrict_restrict4 },
        LawCase { name: "Corestrict_restrict5", arity: arity(0, 2, 1, false), check: corestrict_restrict5 },
        LawCase { name: "Restrict_compose", arity: arity(0, 2, 1, false), check: restrict_compose },
        LawCase { name: "Compose_corestrict", arity: arity(0, 2, 1, false), check: compose_corestrict },
        LawCase { name: "Restrict_union", arity: arity(0, 2, 1, false), check: restrict_union },
        LawCase { name: "Corestrict_union", arity: arity(0, 2, 1, false), check: corestrict_union },
        LawCase { name: "Compose_union1", arity: arity(0, 3, 0, false), check: compose_union1 },
        LawCase { name: "Compose_union2", arity: arity(0, 3, 0, false), check: compose_union2 },
        LawCase { name: "Test_leq", arity: arity(0, 2, 1, false), check: test_leq },
        LawCase { name: "Loop_Skip1", arity: arity(0, 1, 1, false), check: loop_skip1 },
        LawCase { name: "Loop_Skip2", arity: arity(0, 1, 1, false), check: loop_skip2 },
        LawCase { name: "Loop3_L0", arity: arity(0, 1, 1, false), check: loop3_l0 },
        LawCase { name: "Loop3_Li", arity: arity(0, 1, 1, true), check: loop3_li },
        LawCase { name: "Fixdef2_step", arity: arity(0, 1, 1, true), check: fixdef2_step },
        LawCase { name: "Def_equiv", arity: arity(0, 1, 1, true), check: def_equiv },
        LawCase { name: "Under_approx", arity: arity(0, 1, 1, true), check: under_approx },
    ];
    LAWS
}

/// Looks a law up by name; surrounding slashes (`/Def_equiv/`) are ignored.
pub fn find_law(name: &str) -> Result<&'static LawCase, LawError> {
    let bare = name.trim_matches('/');
    registry()
        .iter()
        .find(|l| l.name == bare)
        .ok_or_else(|| LawError::UnknownLaw(name.to_string()))
}

fn random_state(rng: &mut ChaCha8Rng, b: &Bounds) -> StateId {
    StateId(rng.gen_range(0..b.universe_size))
}

fn random_trace_from(rng: &mut ChaCha8Rng, b: &Bounds, first: Option<StateId>) -> Trace {
    let len = rng.gen_range(1..=b.max_trace_len);
    let mut states = Vec::with_capacity(len);
    states.push(first.unwrap_or_else(|| random_state(rng, b)));
    while states.len() < len {
        states.push(random_state(rng, b));
    }
    Trace::new(states).expect("non-empty")
}

fn random_set(rng: &mut ChaCha8Rng, b: &Bounds) -> TraceSet {
    let n = rng.gen_range(0..=b.max_set_size);
    (0..n).map(|_| random_trace_from(rng, b, None)).collect()
}

fn random_pred(rng: &mut ChaCha8Rng, u: &Universe) -> Predicate {
    let states: Vec<StateId> = u.states().copied().filter(|_| rng.gen_bool(0.5)).collect();
    Predicate::new(u, states)
}

/// Samples one instance. Junctions between the three traces match with high
/// probability, and the second set extends the first one in a quarter of the
/// samples, so that conditional laws are not vacuous.
pub fn random_instance(bounds: &Bounds, rng: &mut ChaCha8Rng) -> Result<Instance, LawError> {
    bounds.validate()?;
    let u = Universe::opaque(bounds.universe_size);
    let x = random_trace_from(rng, bounds, None);
    let y_first = rng.gen_bool(0.75).then(|| *x.last());
    let y = random_trace_from(rng, bounds, y_first);
    let w_first = rng.gen_bool(0.75).then(|| *y.last());
    let w = random_trace_from(rng, bounds, w_first);
    let a = random_set(rng, bounds);
    let b = if rng.gen_bool(0.25) {
        let mut ext = random_set(rng, bounds);
        for t in a.iter() {
            let tail = random_trace_from(rng, bounds, Some(*t.last()));
            ext.insert(t.concat(&tail).expect("tail starts at junction"));
        }
        ext
    } else {
        random_set(rng, bounds)
    };
    let c = random_set(rng, bounds);
    Ok(Instance {
        traces: [x, y, w],
        sets: [a, b, c],
        preds: [random_pred(rng, &u), random_pred(rng, &u)],
        index: rng.gen_range(0..=bounds.max_loop_index),
    })
}

/// Deterministic instance sampler for a seed.
pub fn sample_instances(
    bounds: &Bounds,
    seed: u64,
    count: usize,
) -> Result<Vec<Instance>, LawError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(bounds, &mut rng)).collect()
}

/// All traces over a universe of `universe_size` states with length at most
/// `max_len`, in canonical order.
pub fn all_traces(universe_size: u16, max_len: usize) -> Vec<Trace> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<StateId>> = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &layer {
            for s in 0..universe_size {
                let mut v = prefix.clone();
                v.push(StateId(s));
                next.push(v);
            }
        }
        out.extend(next.iter().cloned().map(|v| Trace::new(v).unwrap()));
        layer = next;
    }
    out.sort();
    out
}

/// Every subset of `traces`. Only usable for small inputs.
pub fn all_sets(traces: &[Trace]) -> Vec<TraceSet> {
    assert!(traces.len() < 20, "power set too large");
    (0u32..(1 << traces.len()))
        .map(|mask| {
            traces
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, t)| t.clone())
                .collect()
        })
        .collect()
}

pub fn all_predicates(u: &Universe) -> Vec<Predicate> {
    let states: Vec<StateId> = u.states().copied().collect();
    (0u32..(1 << states.len()))
        .map(|mask| {
            Predicate::new(
                u,
                states
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, s)| *s),
            )
        })
        .collect()
}

fn render_counterexample(law: &LawCase, inst: &Instance) -> String {
    let mut parts = Vec::new();
    let tnames = ["x", "y", "w"];
    let snames = ["A", "B", "C"];
    let pnames = ["c", "d"];
    for (name, t) in tnames.iter().zip(&inst.traces).take(law.arity.traces) {
        parts.push(format!("{name}={t}"));
    }
    for (name, s) in snames.iter().zip(&inst.sets).take(law.arity.sets) {
        parts.push(format!("{name}={s}"));
    }
    for (name, p) in pnames.iter().zip(&inst.preds).take(law.arity.preds) {
        parts.push(format!("{name}={p}"));
    }
    if law.arity.index {
        parts.push(format!("i={}", inst.index));
    }
    parts.join(" ")
}

/// Runs `law` on `samples` random instances.
pub fn check_case(law: &LawCase, samples: usize, seed: u64, bounds: &Bounds) -> Result<LawReport, LawError> {
    bounds.validate()?;
    let start = Instant::now();
    let u = Universe::opaque(bounds.universe_size);
    // Mix the law name into the seed so laws see independent streams.
    let law_seed = law
        .name
        .bytes()
        .fold(seed ^ 0x9e37_79b9_7f4a_7c15, |h, b| h.rotate_left(5) ^ b as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(law_seed);
    let mut counterexample = None;
    let mut run = 0;
    while run < samples {
        let inst = random_instance(bounds, &mut rng)?;
        run += 1;
        if !(law.check)(&inst, &u, bounds) {
            counterexample = Some(render_counterexample(law, &inst));
            break;
        }
    }
    Ok(LawReport {
        law_name: law.name.to_string(),
        samples_run: run,
        counterexample,
        elapsed: start.elapsed(),
    })
}

pub fn check_law(name: &str, samples: usize, seed: u64, bounds: &Bounds) -> Result<LawReport, LawError> {
    check_case(find_law(name)?, samples, seed, bounds)
}

pub fn check_all(samples: usize, seed: u64, bounds: &Bounds) -> Result<Vec<LawReport>, LawError> {
    registry()
        .iter()
        .map(|law| check_case(law, samples, seed, bounds))
        .collect()
}

/// Checks `law` on every instance over a two-state universe with traces of
/// length at most two, enumerating only the inputs the law reads.
pub fn check_case_exhaustive(law: &LawCase) -> LawReport {
    let bounds = Bounds::exhaustive();
    let start = Instant::now();
    let u = Universe::opaque(bounds.universe_size);
    let traces = all_traces(bounds.universe_size, bounds.max_trace_len);
    let sets = all_sets(&traces);
    let preds = all_predicates(&u);
    let indices: Vec<usize> = if law.arity.index {
        (0..=bounds.max_loop_index).collect()
    } else {
        vec![0]
    };

    let a = law.arity;
    let radices: Vec<usize> = std::iter::repeat_n(traces.len(), a.traces)
        .chain(std::iter::repeat_n(sets.len(), a.sets))
        .chain(std::iter::repeat_n(preds.len(), a.preds))
        .chain(std::iter::once(indices.len()))
        .collect();
    let mut digits = vec![0usize; radices.len()];
    let mut inst = Instance {
        traces: [traces[0].clone(), traces[0].clone(), traces[0].clone()],
        sets: Default::default(),
        preds: [preds[0].clone(), preds[0].clone()],
        index: 0,
    };
    let mut samples = 0;
    let mut counterexample = None;
    loop {
        let mut d = digits.iter();
        for k in 0..a.traces {
            inst.traces[k] = traces[*d.next().unwrap()].clone();
        }
        for k in 0..a.sets {
            inst.sets[k] = sets[*d.next().unwrap()].clone();
        }
        for k in 0..a.preds {
            inst.preds[k] = preds[*d.next().unwrap()].clone();
        }
        inst.index = indices[*d.next().unwrap()];
        samples += 1;
        if !(law.check)(&inst, &u, &bounds) {
            counterexample = Some(render_counterexample(law, &inst));
            break;
        }
        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                return LawReport {
                    law_name: law.name.to_string(),
                    samples_run: samples,
                    counterexample,
                    elapsed: start.elapsed(),
                };
            }
            digits[pos] += 1;
            if digits[pos] < radices[pos] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
    LawReport {
        law_name: law.name.to_string(),
        samples_run: samples,
        counterexample,
        elapsed: start.elapsed(),
    }
}

pub fn check_all_exhaustive() -> Vec<LawReport> {
    registry().iter().map(check_case_exhaustive).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_complete() {
        let names: Vec<&str> = registry().iter().map(|l| l.name).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(names.len() >= 28);
        assert_eq!(names.len(), 33);
    }

    #[test]
    fn lookup_accepts_slashed_names() {
        assert_eq!(find_law("/Def_equiv/").unwrap().name, "Def_equiv");
        assert_eq!(
            find_law("No_such_law").unwrap_err(),
            LawError::UnknownLaw("No_such_law".into())
        );
    }

    #[test]
    fn single_state_universe_has_one_trace() {
        let b = Bounds {
            universe_size: 1,
            max_trace_len: 1,
            max_set_size: 1,
            ..Bounds::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let inst = random_instance(&b, &mut rng).unwrap();
            for t in &inst.traces {
                assert_eq!(t.states(), &[StateId(0)]);
            }
        }
    }

    #[test]
    fn zero_bounds_rejected() {
        let b = Bounds {
            universe_size: 0,
            ..Bounds::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            random_instance(&b, &mut rng).unwrap_err(),
            LawError::ZeroBound("universe_size")
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let b = Bounds::default();
        assert_eq!(sample_instances(&b, 42, 25).unwrap(), sample_instances(&b, 42, 25).unwrap());
    }

    #[test]
    fn exhaustive_enumeration_sizes() {
        let traces = all_traces(2, 2);
        assert_eq!(traces.len(), 6);
        assert_eq!(all_sets(&traces).len(), 64);
        assert_eq!(all_predicates(&Universe::opaque(2)).len(), 4);
    }

    #[test]
    fn zero_samples_is_vacuous() {
        for r in check_all(0, 1, &Bounds::default()).unwrap() {
            assert_eq!(r.samples_run, 0);
            assert!(r.passed());
        }
    }

    #[test]
    fn commutativity_of_concat_is_refuted() {
        fn commutes(i: &Instance, _: &Universe, _: &Bounds) -> bool {
            i.sets[0].concat(&i.sets[1]) == i.sets[1].concat(&i.sets[0])
        }
        let fake = LawCase {
            name: "Concat_comm",
            arity: arity(0, 2, 0, false),
            check: commutes,
        };
        let r = check_case(&fake, 1000, 7, &Bounds::default()).unwrap();
        assert!(!r.passed());
        assert!(r.samples_run <= 1000);
        // The hand-built witness A = {<a,b>}, B = {<b,a>}.
        let u = Universe::opaque(2);
        let ab = Trace::new(vec![StateId(0), StateId(1)]).unwrap();
        let ba = Trace::new(vec![StateId(1), StateId(0)]).unwrap();
        let inst = Instance {
            traces: [ab.clone(), ab.clone(), ab.clone()],
            sets: [
                [ab].into_iter().collect(),
                [ba].into_iter().collect(),
                TraceSet::fail(),
            ],
            preds: [Predicate::never(&u), Predicate::never(&u)],
            index: 0,
        };
        assert!(!commutes(&inst, &u, &Bounds::default()));
    }
}
