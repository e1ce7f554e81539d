//! Finite traces, trace sets, and the algebra used to give loops a meaning.
//!
//! A [`Trace`] is a non-empty sequence of states; a [`TraceSet`] is a finite
//! set of traces. The operations here are generic over the state type so the
//! same code serves both the opaque universes used by the law checker and the
//! program states produced by [`crate::semantics`].

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An opaque state token drawn from a finite [`Universe`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateId(pub u16);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.0 as u32;
        if i < 26 {
            write!(f, "{}", char::from_u32('a' as u32 + i).unwrap())
        } else {
            write!(f, "s{i}")
        }
    }
}

/// The finite set of states over which `skip` and predicate complements are
/// taken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Universe<S = StateId> {
    states: BTreeSet<S>,
}

impl Universe<StateId> {
    /// The universe `{a, b, ...}` of `size` opaque states.
    pub fn opaque(size: u16) -> Self {
        Universe {
            states: (0..size).map(StateId).collect(),
        }
    }
}

impl<S: Ord + Clone> Universe<S> {
    pub fn from_states(states: impl IntoIterator<Item = S>) -> Self {
        Universe {
            states: states.into_iter().collect(),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = &S> {
        self.states.iter()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains(&self, s: &S) -> bool {
        self.states.contains(s)
    }
}

/// Result of comparing two traces under the prefix order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefixOrder {
    NotPrefix,
    Prefix,
    ProperPrefix,
}

impl PrefixOrder {
    pub fn holds(self) -> bool {
        self != PrefixOrder::NotPrefix
    }
}

/// A finite, non-empty sequence of states.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trace<S = StateId> {
    states: Vec<S>,
}

impl<S> Trace<S> {
    /// Builds a trace; `None` for an empty sequence.
    pub fn new(states: Vec<S>) -> Option<Self> {
        if states.is_empty() {
            None
        } else {
            Some(Trace { states })
        }
    }

    pub fn stationary(s: S) -> Self {
        Trace { states: vec![s] }
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn into_states(self) -> Vec<S> {
        self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    /// Always false; traces are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> &S {
        &self.states[0]
    }

    pub fn last(&self) -> &S {
        &self.states[self.states.len() - 1]
    }

    pub fn is_stationary(&self) -> bool {
        self.states.len() == 1
    }
}

impl<S: Clone + PartialEq> Trace<S> {
    /// `self + other`: defined only when the last state of `self` is the first
    /// state of `other`; the junction state appears once.
    pub fn concat(&self, other: &Trace<S>) -> Option<Trace<S>> {
        if self.last() != other.first() {
            return None;
        }
        let mut states = Vec::with_capacity(self.len() + other.len() - 1);
        states.extend_from_slice(&self.states);
        states.extend_from_slice(&other.states[1..]);
        Some(Trace { states })
    }

    /// Whether `self` is a (proper) prefix of `other`.
    pub fn prefix_of(&self, other: &Trace<S>) -> PrefixOrder {
        if self.len() > other.len() || other.states[..self.len()] != self.states[..] {
            PrefixOrder::NotPrefix
        } else if self.len() == other.len() {
            PrefixOrder::Prefix
        } else {
            PrefixOrder::ProperPrefix
        }
    }

    pub fn satisfies(&self, test: impl Fn(&S) -> bool) -> bool {
        self.states.iter().any(test)
    }
}

// Canonical order: shorter traces first, then lexicographic on states.
impl<S: Ord> Ord for Trace<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.states
            .len()
            .cmp(&other.states.len())
            .then_with(|| self.states.cmp(&other.states))
    }
}

impl<S: Ord> PartialOrd for Trace<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: fmt::Display> fmt::Display for Trace<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<")?;
        for (i, s) in self.states.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(">")
    }
}

/// A test on states, stored extensionally as the subset of the universe where
/// it holds.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    universe_size: u16,
    holds: BTreeSet<StateId>,
}

impl Predicate {
    pub fn new(universe: &Universe, holds: impl IntoIterator<Item = StateId>) -> Self {
        let holds: BTreeSet<StateId> = holds
            .into_iter()
            .filter(|s| universe.contains(s))
            .collect();
        Predicate {
            universe_size: universe.len() as u16,
            holds,
        }
    }

    pub fn always(universe: &Universe) -> Self {
        Predicate::new(universe, universe.states().copied())
    }

    pub fn never(universe: &Universe) -> Self {
        Predicate::new(universe, [])
    }

    pub fn holds(&self, s: &StateId) -> bool {
        self.holds.contains(s)
    }

    pub fn extension(&self) -> &BTreeSet<StateId> {
        &self.holds
    }

    pub fn negate(&self) -> Self {
        Predicate {
            universe_size: self.universe_size,
            holds: (0..self.universe_size)
                .map(StateId)
                .filter(|s| !self.holds.contains(s))
                .collect(),
        }
    }

    pub fn and(&self, other: &Predicate) -> Self {
        Predicate {
            universe_size: self.universe_size,
            holds: self.holds.intersection(&other.holds).copied().collect(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, s) in self.holds.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str("}")
    }
}

/// A finite set of traces. The empty set is `fail`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceSet<S: Ord = StateId> {
    traces: BTreeSet<Trace<S>>,
}

impl<S: Ord> Default for TraceSet<S> {
    fn default() -> Self {
        TraceSet {
            traces: BTreeSet::new(),
        }
    }
}

impl<S: Ord> FromIterator<Trace<S>> for TraceSet<S> {
    fn from_iter<I: IntoIterator<Item = Trace<S>>>(iter: I) -> Self {
        TraceSet {
            traces: iter.into_iter().collect(),
        }
    }
}

impl<S: Ord> IntoIterator for TraceSet<S> {
    type Item = Trace<S>;
    type IntoIter = std::collections::btree_set::IntoIter<Trace<S>>;

    fn into_iter(self) -> Self::IntoIter {
        self.traces.into_iter()
    }
}

impl<'a, S: Ord> IntoIterator for &'a TraceSet<S> {
    type Item = &'a Trace<S>;
    type IntoIter = std::collections::btree_set::Iter<'a, Trace<S>>;

    fn into_iter(self) -> Self::IntoIter {
        self.traces.iter()
    }
}

impl<S: Ord + Clone> TraceSet<S> {
    /// The empty trace set.
    pub fn fail() -> Self {
        TraceSet::default()
    }

    /// All stationary traces over `universe`.
    pub fn skip(universe: &Universe<S>) -> Self {
        universe.states().cloned().map(Trace::stationary).collect()
    }

    pub fn insert(&mut self, t: Trace<S>) -> bool {
        self.traces.insert(t)
    }

    pub fn contains(&self, t: &Trace<S>) -> bool {
        self.traces.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trace<S>> {
        self.traces.iter()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// `A ; B`: every concatenation of a trace of `self` with a trace of
    /// `other`. Non-concatenable pairs contribute nothing.
    pub fn concat(&self, other: &TraceSet<S>) -> TraceSet<S> {
        let mut out = TraceSet::fail();
        if self.is_empty() || other.is_empty() {
            return out;
        }
        // Index `other` by first state so the join only visits matching pairs.
        let mut by_first: std::collections::BTreeMap<&S, Vec<&Trace<S>>> = Default::default();
        for y in &other.traces {
            by_first.entry(y.first()).or_default().push(y);
        }
        for x in &self.traces {
            if let Some(ys) = by_first.get(x.last()) {
                for y in ys {
                    out.traces.insert(x.concat(y).expect("junction states match"));
                }
            }
        }
        out
    }

    /// `c / A`: traces whose first state satisfies `c`.
    pub fn restrict(&self, c: impl Fn(&S) -> bool) -> TraceSet<S> {
        self.traces.iter().filter(|x| c(x.first())).cloned().collect()
    }

    /// `A \ c`: traces whose last state satisfies `c`.
    pub fn corestrict(&self, c: impl Fn(&S) -> bool) -> TraceSet<S> {
        self.traces.iter().filter(|x| c(x.last())).cloned().collect()
    }

    pub fn union(&self, other: &TraceSet<S>) -> TraceSet<S> {
        self.traces.union(&other.traces).cloned().collect()
    }

    pub fn union_with(&mut self, other: TraceSet<S>) {
        self.traces.extend(other.traces);
    }

    pub fn is_subset(&self, other: &TraceSet<S>) -> bool {
        self.traces.is_subset(&other.traces)
    }

    /// Whether some trace of the set satisfies `c`.
    pub fn tests(&self, c: impl Fn(&S) -> bool) -> bool {
        self.traces.iter().any(|x| x.satisfies(&c))
    }

    /// `A <= B`: every trace of `self` has an extension in `other`. This is
    /// a preorder, not a partial order.
    pub fn leq(&self, other: &TraceSet<S>) -> bool {
        self.traces
            .iter()
            .all(|x| other.traces.iter().any(|y| x.prefix_of(y).holds()))
    }

    pub fn first_states(&self) -> BTreeSet<S> {
        self.traces.iter().map(|x| x.first().clone()).collect()
    }

    pub fn last_states(&self) -> BTreeSet<S> {
        self.traces.iter().map(|x| x.last().clone()).collect()
    }

    /// `A^i`, with `A^0 = skip` and `A^(i+1) = A ; A^i`.
    pub fn power(&self, i: usize, universe: &Universe<S>) -> TraceSet<S> {
        let mut acc = TraceSet::skip(universe);
        for _ in 0..i {
            acc = self.concat(&acc);
        }
        acc
    }
}

/// `if v then A end`, i.e. `(not v / skip) ∪ (v / A)`.
pub fn cond_set<S: Ord + Clone>(
    v: impl Fn(&S) -> bool,
    a: &TraceSet<S>,
    universe: &Universe<S>,
) -> TraceSet<S> {
    let mut out = TraceSet::skip(universe).restrict(|s| !v(s));
    out.union_with(a.restrict(&v));
    out
}

/// `L_i`: executions of `until e loop B end` that reach `e` after strictly
/// fewer than `i` iterations, as the union over `j < i` of
/// `(not e / B)^j \ e`.
pub fn loop_union<S: Ord + Clone>(
    e: impl Fn(&S) -> bool,
    body: &TraceSet<S>,
    i: usize,
    universe: &Universe<S>,
) -> TraceSet<S> {
    let guarded = body.restrict(|s| !e(s));
    let mut out = TraceSet::fail();
    let mut power = TraceSet::skip(universe);
    for j in 0..i {
        if j > 0 {
            power = guarded.concat(&power);
        }
        out.union_with(power.corestrict(&e));
    }
    out
}

/// The `i`-unrolling built from the recursive conditional:
/// `L0 = fail`, `L(i+1) = if not e then B ; L(i) end`.
pub fn loop_rec<S: Ord + Clone>(
    e: impl Fn(&S) -> bool,
    body: &TraceSet<S>,
    i: usize,
    universe: &Universe<S>,
) -> TraceSet<S> {
    let mut acc = TraceSet::fail();
    for _ in 0..i {
        acc = cond_set(|s| !e(s), &body.concat(&acc), universe);
    }
    acc
}

impl<S: Ord + fmt::Display> fmt::Display for TraceSet<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.traces.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Trace {
        Trace::new(s.bytes().map(|b| StateId((b - b'a') as u16)).collect()).unwrap()
    }

    fn set(ts: &[&str]) -> TraceSet {
        ts.iter().map(|s| t(s)).collect()
    }

    #[test]
    fn concat_shares_junction_state() {
        // <m,n> + <n,o,p> = <m,n,o,p>
        assert_eq!(t("mn").concat(&t("nop")), Some(t("mnop")));
        assert_eq!(t("a").concat(&t("a")), Some(t("a")));
        assert_eq!(t("ab").concat(&t("cd")), None);
    }

    #[test]
    fn prefix_classification() {
        assert_eq!(t("ab").prefix_of(&t("abc")), PrefixOrder::ProperPrefix);
        assert_eq!(t("a").prefix_of(&t("a")), PrefixOrder::Prefix);
        assert_eq!(t("ab").prefix_of(&t("bc")), PrefixOrder::NotPrefix);
        assert_eq!(t("abc").prefix_of(&t("ab")), PrefixOrder::NotPrefix);
    }

    #[test]
    fn satisfies_some_state() {
        let u = Universe::opaque(3);
        assert!(t("ab").satisfies(|s| Predicate::new(&u, [StateId(1)]).holds(s)));
        assert!(!t("a").satisfies(|s| Predicate::never(&u).holds(s)));
    }

    #[test]
    fn skip_and_fail() {
        let u = Universe::opaque(2);
        assert_eq!(TraceSet::skip(&u), set(&["a", "b"]));
        assert!(TraceSet::<StateId>::fail().is_empty());
        let a = set(&["ab", "ba", "a"]);
        assert_eq!(a.concat(&TraceSet::skip(&u)), a);
        assert_eq!(TraceSet::skip(&u).concat(&a), a);
        assert_eq!(TraceSet::fail().concat(&a), TraceSet::fail());
    }

    #[test]
    fn concat_sets_without_junction_is_fail() {
        assert!(set(&["ab"]).concat(&set(&["c"])).is_empty());
    }

    #[test]
    fn restrict_and_corestrict() {
        let u = Universe::opaque(3);
        let a = set(&["ab", "bc", "c"]);
        let yes = Predicate::always(&u);
        let no = Predicate::never(&u);
        assert_eq!(a.restrict(|s| yes.holds(s)), a);
        assert!(a.restrict(|s| no.holds(s)).is_empty());
        assert_eq!(a.corestrict(|s| yes.holds(s)), a);
        assert!(a.corestrict(|s| no.holds(s)).is_empty());
        let c = Predicate::new(&u, [StateId(1)]);
        assert_eq!(a.restrict(|s| c.holds(s)), set(&["bc"]));
        assert_eq!(a.corestrict(|s| c.holds(s)), set(&["ab"]));
    }

    #[test]
    fn set_tests_and_leq() {
        let u = Universe::opaque(3);
        let b = Predicate::new(&u, [StateId(1)]);
        assert!(!TraceSet::fail().tests(|s| b.holds(s)));
        assert!(set(&["ab"]).tests(|s| b.holds(s)));
        assert!(TraceSet::fail().leq(&set(&["ab"])));
        assert!(set(&["a"]).leq(&set(&["ab"])));
        assert!(!set(&["ab"]).leq(&set(&["a"])));
        // Not antisymmetric: both directions hold for different sets.
        let x = set(&["a", "ab"]);
        let y = set(&["ab"]);
        assert!(x.leq(&y) && y.leq(&x) && x != y);
    }

    #[test]
    fn power_definition() {
        let u = Universe::opaque(3);
        let a = set(&["ab", "ba", "bc"]);
        assert_eq!(a.power(0, &u), TraceSet::skip(&u));
        assert!(TraceSet::fail().power(1, &u).is_empty());
        let a3 = a.power(3, &u);
        assert_eq!(a3, a.concat(&a.concat(&a)));
        assert_eq!(a3, a.concat(&a).concat(&a));
    }

    #[test]
    fn cond_set_extremes() {
        let u = Universe::opaque(3);
        let a = set(&["ab", "ca"]);
        assert_eq!(cond_set(|_| true, &a, &u), a);
        assert_eq!(cond_set(|_| false, &a, &u), TraceSet::skip(&u));
        let v = Predicate::new(&u, [StateId(0)]);
        assert_eq!(
            cond_set(|s| v.holds(s), &TraceSet::fail(), &u),
            TraceSet::skip(&u).restrict(|s| !v.holds(s))
        );
    }

    #[test]
    fn loop_base_cases() {
        let u = Universe::opaque(3);
        let e = Predicate::new(&u, [StateId(2)]);
        let b = set(&["ab", "bc"]);
        assert!(loop_union(|s| e.holds(s), &b, 0, &u).is_empty());
        assert_eq!(
            loop_union(|s| e.holds(s), &b, 1, &u),
            TraceSet::skip(&u).corestrict(|s| e.holds(s))
        );
        assert!(loop_rec(|s| e.holds(s), &b, 0, &u).is_empty());
        assert_eq!(
            loop_rec(|s| e.holds(s), &b, 1, &u),
            TraceSet::skip(&u).restrict(|s| e.holds(s))
        );
        // a -> b -> c takes two iterations, so it first appears in L_3.
        assert!(!loop_union(|s| e.holds(s), &b, 2, &u).contains(&t("abc")));
        assert!(loop_union(|s| e.holds(s), &b, 3, &u).contains(&t("abc")));
        for i in 0..6 {
            assert_eq!(
                loop_union(|s| e.holds(s), &b, i, &u),
                loop_rec(|s| e.holds(s), &b, i, &u)
            );
        }
    }

    #[test]
    fn canonical_text_form() {
        assert_eq!(set(&["ab", "a"]).to_string(), "{<a>,<a,b>}");
        assert_eq!(TraceSet::<StateId>::fail().to_string(), "{}");
    }
}
