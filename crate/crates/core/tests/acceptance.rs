//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use looptrace::corpus::{CorpusEntry, CORPUS};
use looptrace::evaluate::{aggregate, evaluate, totals, Cell, EvalConfig, EvalReport, FaultRecord, Variant};
use looptrace::lawcheck::{check_all, check_all_exhaustive, sample_instances, Bounds};
use looptrace::mutate::{mutate, Operator};
use looptrace::scu::Mode;
use looptrace::semantics::{Domain, Interpreter, RunOptions};
use looptrace::testgen::{generate, replay, SearchOptions, SearchOrder};
use looptrace::trace::{loop_rec, loop_union, Predicate, StateId, Universe};
use looptrace::unroll::{semantic_check, unroll_routine, UnrollConfig};

type Outcome = Result<String, String>;

const LAW_SAMPLES: usize = 1000;
const LAW_TIME_LIMIT: Duration = Duration::from_secs(30);
const EQUIV_INSTANCES: usize = 200;
const EQUIV_MAX_INDEX: usize = 6;
const EQUIV_TIME_LIMIT: Duration = Duration::from_secs(10);
const APPROX_LIMIT: usize = 8;
const CERT_MAX_DEPTH: u32 = 8;
const MUTANTS: usize = 30;
const MUTATION_SEED: u64 = 2024;
const RUNS: u32 = 20;
const EVAL_DEPTH: u32 = 5;
const EVAL_SEED: u64 = 1;
const EVAL_TIME_LIMIT: Duration = Duration::from_secs(300);
const TREND_ROUTINES: [&str; 4] = ["binary_search", "gcd", "factorial", "sum_and_max"];
const PLAIN_ROUTINES: [&str; 5] = [
    "factorial",
    "linear_search",
    "arithmetic_add",
    "arithmetic_multiply",
    "arithmetic_divide",
];
const TIMING_DEPTH: u32 = 15;
const TIMING_RATIO: f64 = 10.0;
const TIMING_REPEATS: usize = 21;

fn criterion_laws() -> Outcome {
    let start = Instant::now();
    let sampled = check_all(LAW_SAMPLES, 0, &Bounds::default()).map_err(|e| e.to_string())?;
    let exhaustive = check_all_exhaustive();
    let elapsed = start.elapsed();
    let failed: Vec<&str> = sampled
        .iter()
        .chain(&exhaustive)
        .filter(|r| !r.passed())
        .map(|r| r.law_name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(format!("counterexamples for {failed:?}"));
    }
    if elapsed > LAW_TIME_LIMIT {
        return Err(format!("took {elapsed:.1?}, limit {LAW_TIME_LIMIT:?}"));
    }
    Ok(format!(
        "{} laws x {LAW_SAMPLES} samples and exhaustive mode, no counterexample, {elapsed:.1?}",
        sampled.len()
    ))
}

fn universe() -> Universe {
    Universe::opaque(Bounds::default().universe_size)
}

fn holds(p: &Predicate) -> impl Fn(&StateId) -> bool + '_ {
    |s| p.holds(s)
}

fn criterion_equivalence() -> Outcome {
    let start = Instant::now();
    let u = universe();
    let instances = sample_instances(&Bounds::default(), 11, EQUIV_INSTANCES).map_err(|e| e.to_string())?;
    for (k, inst) in instances.iter().enumerate() {
        let e = &inst.preds[0];
        for i in 0..=EQUIV_MAX_INDEX {
            if loop_union(holds(e), &inst.sets[0], i, &u) != loop_rec(holds(e), &inst.sets[0], i, &u) {
                return Err(format!("instance {k}, index {i}: unions differ from recursive unrolling"));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > EQUIV_TIME_LIMIT {
        return Err(format!("took {elapsed:.1?}, limit {EQUIV_TIME_LIMIT:?}"));
    }
    Ok(format!(
        "{EQUIV_INSTANCES} instances, indices 0..={EQUIV_MAX_INDEX}, all equal, {elapsed:.1?}"
    ))
}

fn criterion_under_approximation() -> Outcome {
    let u = universe();
    let instances = sample_instances(&Bounds::default(), 12, EQUIV_INSTANCES).map_err(|e| e.to_string())?;
    for (k, inst) in instances.iter().enumerate() {
        let e = &inst.preds[0];
        let limit = loop_union(holds(e), &inst.sets[0], APPROX_LIMIT, &u);
        for i in 0..=APPROX_LIMIT {
            if !loop_union(holds(e), &inst.sets[0], i, &u).is_subset(&limit) {
                return Err(format!("instance {k}: L_{i} not within L_{APPROX_LIMIT}"));
            }
        }
    }
    let mut checked = 0;
    for entry in &CORPUS {
        let r = entry.routine().map_err(|e| e.to_string())?;
        let d = tiny_domain(entry);
        let interp_for = |n: u32| unroll_routine(&r, &UnrollConfig::strict(n)).map_err(|e| e.to_string());
        let mut previous: Option<Vec<(Vec<_>, Vec<_>)>> = None;
        for n in 0..=entry.max_depth {
            let unrolled = interp_for(n)?;
            let interp = Interpreter::new(&unrolled);
            let mut accepted = Vec::new();
            for input in d.inputs(&r.params) {
                if !interp.require_holds(&input) {
                    continue;
                }
                let out = interp.run(&input, RunOptions::default()).map_err(|e| e.to_string())?;
                if out.status.is_ok() {
                    accepted.push((input, out.final_state().values.clone()));
                }
            }
            if let Some(prev) = &previous {
                for item in prev {
                    if !accepted.contains(item) {
                        return Err(format!("{}: input {:?} accepted at depth {} but not {}", entry.name, item.0, n - 1, n));
                    }
                }
            }
            checked += accepted.len();
            previous = Some(accepted);
        }
    }
    Ok(format!(
        "L_i within L_{APPROX_LIMIT} on {EQUIV_INSTANCES} instances; corpus acceptance nests across depths ({checked} accepted runs)"
    ))
}

fn tiny_domain(entry: &CorpusEntry) -> Domain {
    let d = entry.domain;
    Domain::new(d.int_min, d.int_max.min(d.int_min + 12), d.array_len_max.min(4)).expect("valid domain")
}

fn criterion_unroll_soundness() -> Outcome {
    let mut inputs = 0;
    for entry in &CORPUS {
        let r = entry.routine().map_err(|e| e.to_string())?;
        for n in 0..=entry.max_depth {
            let report = semantic_check(&r, &UnrollConfig::strict(n), &entry.domain).map_err(|e| e.to_string())?;
            if let Some(m) = report.mismatches.first() {
                return Err(format!("{} depth {n}: {} mismatches, first on {:?}: {}", entry.name, report.mismatches.len(), m.input, m.detail));
            }
            inputs += report.inputs;
        }
    }
    Ok(format!("every corpus routine at depths 0..=max, {inputs} input runs, zero mismatches"))
}

/// Targets no input can reach, as (level, branch within the level).
fn documented_unreachable(name: &str, n: u32) -> BTreeSet<(u32, usize)> {
    let prime = |k: u32| k >= 2 && (2..k).take_while(|d| d * d <= k).all(|d| !k.is_multiple_of(d));
    match name {
        // One iteration only happens for n = 1, through the exact branch.
        "square_root" => [(1, 1), (1, 2)].into_iter().collect(),
        // Exiting through the divisor branch at level k needs smallest
        // divisor k + 1, which must be prime.
        "prime_check" => (1..=n).filter(|&k| !prime(k + 1)).map(|k| (k, 1)).collect(),
        // Exhausting candidates at level k needs p = k + 1 sharing a factor
        // with a, impossible when k + 1 is prime.
        "inverse" => (1..=n).filter(|&k| prime(k + 1)).map(|k| (k, 2)).collect(),
        _ => BTreeSet::new(),
    }
}

fn criterion_certification() -> Outcome {
    let mut tests = 0;
    let mut unreachable = 0;
    for entry in &CORPUS {
        let r = entry.routine().map_err(|e| e.to_string())?;
        for n in 1..=entry.max_depth.min(CERT_MAX_DEPTH) {
            let suite = generate(&r, n, &entry.domain, SearchOrder::Lex, Mode::Scu, SearchOptions::default())
                .map_err(|e| format!("{} depth {n}: {e}", entry.name))?;
            let expected = if suite.m == 0 { n as usize } else { suite.m * n as usize };
            if suite.target_count != expected {
                return Err(format!("{} depth {n}: {} targets, expected {expected}", entry.name, suite.target_count));
            }
            let certs = replay(&r, &suite, RunOptions::default().fuel)
                .map_err(|e| format!("{} depth {n}: {e}", entry.name))?;
            for (tc, cert) in suite.tests.iter().zip(&certs) {
                let branch = (suite.m > 0).then(|| tc.branch as usize - suite.m * (tc.level as usize - 1));
                if cert.iterations != tc.level || cert.branch != branch {
                    return Err(format!("{} depth {n}: {} replays to {cert:?}", entry.name, tc.id));
                }
            }
            let m = suite.m.max(1) as u32;
            let missing: BTreeSet<(u32, usize)> = suite
                .uncovered
                .iter()
                .chain(&suite.unknown)
                .map(|&id| ((id - 1) / m + 1, ((id - 1) % m + 1) as usize))
                .collect();
            let documented = documented_unreachable(entry.name, n);
            if missing != documented {
                return Err(format!("{} depth {n}: uncovered {missing:?}, documented {documented:?}", entry.name));
            }
            tests += suite.tests.len();
            unreachable += missing.len();
        }
    }
    Ok(format!(
        "{tests} tests all replay to their (level, branch); {unreachable} documented unreachable targets"
    ))
}

fn evaluate_corpus() -> Result<(Vec<EvalReport>, Duration), String> {
    let start = Instant::now();
    let mut reports = Vec::new();
    for entry in &CORPUS {
        let r = entry.routine().map_err(|e| e.to_string())?;
        let variants: Vec<Variant> = mutate(&r, &Operator::ALL, MUTANTS, MUTATION_SEED)
            .into_iter()
            .map(|m| Variant {
                id: m.id,
                routine: m.routine,
            })
            .collect();
        if variants.len() < MUTANTS {
            return Err(format!("{}: only {} mutants", entry.name, variants.len()));
        }
        let cfg = EvalConfig::new(EVAL_DEPTH, RUNS, entry.domain, EVAL_SEED);
        reports.push(evaluate(&r, &variants, &cfg).map_err(|e| format!("{}: {e}", entry.name))?);
    }
    Ok((reports, start.elapsed()))
}

fn na(rep: &EvalReport, depth: u32) -> usize {
    rep.stats_at(depth).map_or(0, |s| s.na)
}

fn criterion_monotonicity(reports: &[EvalReport]) -> Outcome {
    let mut cells = 0;
    for rep in reports {
        if let Some((depth, run)) = rep.inclusion_violations().first() {
            return Err(format!("{}: run {run} loses faults from depth {depth} to {}", rep.routine, depth + 1));
        }
        for w in rep.stats.windows(2) {
            if w[1].na < w[0].na {
                return Err(format!("{}: Na drops at depth {}", rep.routine, w[1].depth));
            }
        }
        cells += rep.cells.len();
    }
    Ok(format!("{cells} cells nest across depths; Na non-decreasing for all {} routines", reports.len()))
}

fn criterion_trend(reports: &[EvalReport], elapsed: Duration) -> Outcome {
    let mut gains = Vec::new();
    for name in TREND_ROUTINES {
        let rep = reports.iter().find(|r| r.routine == name).ok_or(format!("{name} missing"))?;
        let (a, b) = (na(rep, 1), na(rep, 2));
        if b <= a {
            return Err(format!("{name}: Na(1) = {a}, Na(2) = {b}"));
        }
        gains.push(format!("{name} {a}->{b}"));
    }
    let total = totals(reports);
    let (t1, t2) = (total[0].na, total[1].na);
    if t2 <= t1 {
        return Err(format!("corpus Na(1) = {t1}, Na(2) = {t2}"));
    }
    if elapsed > EVAL_TIME_LIMIT {
        return Err(format!("evaluation took {elapsed:.1?}"));
    }
    let curve: Vec<usize> = total.iter().map(|s| s.na).collect();
    Ok(format!(
        "{}; corpus Na by depth {curve:?}; {MUTANTS} mutants x {RUNS} runs in {elapsed:.1?}",
        gains.join(", ")
    ))
}

fn median_generation(entry: &CorpusEntry, n: u32) -> Result<Duration, String> {
    let r = entry.routine().map_err(|e| e.to_string())?;
    let mut times = Vec::with_capacity(TIMING_REPEATS);
    for _ in 0..TIMING_REPEATS {
        let start = Instant::now();
        generate(&r, n, &entry.domain, SearchOrder::Lex, Mode::Scu, SearchOptions::default())
            .map_err(|e| e.to_string())?;
        times.push(start.elapsed());
    }
    times.sort();
    Ok(times[TIMING_REPEATS / 2])
}

fn criterion_timing() -> Outcome {
    let mut ratios = Vec::new();
    for name in PLAIN_ROUTINES {
        let entry = CORPUS.iter().find(|e| e.name == name).ok_or(format!("{name} missing"))?;
        let t1 = median_generation(entry, 1)?;
        let t15 = median_generation(entry, TIMING_DEPTH)?;
        let ratio = t15.as_secs_f64() / t1.as_secs_f64();
        if ratio > TIMING_RATIO {
            return Err(format!("{name}: depth {TIMING_DEPTH} takes {ratio:.1}x depth 1 ({t15:.1?} vs {t1:.1?})"));
        }
        ratios.push(format!("{name} {ratio:.1}x"));
    }
    Ok(format!("depth {TIMING_DEPTH} / depth 1 generation time: {}", ratios.join(", ")))
}

fn criterion_formulas() -> Outcome {
    let rec = |v: &str, line| FaultRecord {
        variant: v.into(),
        tag: "post".into(),
        line,
    };
    let cell = |depth, run, faults: Vec<FaultRecord>| Cell {
        depth,
        run,
        seed: 0,
        tests: 0,
        faults: faults.into_iter().collect(),
    };
    // F(1,1) = {a}, F(1,2) = {a, b}, F(2,1) = {a, c}, F(2,2) = {a, b, d}
    let (a, b, c, d) = (rec("m1", 3), rec("m2", 3), rec("m3", 7), rec("m4", 9));
    let cells = vec![
        cell(1, 1, vec![a.clone()]),
        cell(1, 2, vec![a.clone(), b.clone()]),
        cell(2, 1, vec![a.clone(), c]),
        cell(2, 2, vec![a, b, d]),
    ];
    let stats = aggregate(&[1, 2], 2, &cells);
    let got: Vec<(f64, usize)> = stats.iter().map(|s| (s.np, s.na)).collect();
    let want = vec![(1.5, 2), (2.5, 4)];
    if got != want {
        return Err(format!("got {got:?}, expected {want:?}"));
    }
    Ok("Np = [1.5, 2.5], Na = [2, 4] on the 2-run x 2-depth fixture".to_string())
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |k: u32, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("criterion {k} {name}: PASS ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("criterion {k} {name}: FAIL ({detail})");
            }
        }
    };
    report(1, "law suite", criterion_laws());
    report(2, "loop equivalence", criterion_equivalence());
    report(3, "under-approximation", criterion_under_approximation());
    report(4, "unroll soundness", criterion_unroll_soundness());
    report(5, "SCU certification", criterion_certification());
    match evaluate_corpus() {
        Ok((reports, elapsed)) => {
            report(6, "monotonicity", criterion_monotonicity(&reports));
            report(7, "trend", criterion_trend(&reports, elapsed));
        }
        Err(e) => {
            report(6, "monotonicity", Err(e.clone()));
            report(7, "trend", Err(e));
        }
    }
    report(8, "timing shape", criterion_timing());
    report(9, "Np/Na formulas", criterion_formulas());
    if failures == 0 {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria fail");
        ExitCode::FAILURE
    }
}
