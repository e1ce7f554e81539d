//! Mutation-based evaluation of generated suites across unrolling depths
//! and repeated randomized runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lang::Routine;
use crate::scu::{instrument, Mode};
use crate::semantics::{Domain, Interpreter, RunOptions, RunStatus, DEFAULT_RUN_FUEL};
use crate::testgen::{generate_from_map, SearchOptions, SearchOrder, TargetMap, TestSuite, TestgenError};

/// A distinct fault: which variant failed, with which tag, where.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultRecord {
    pub variant: String,
    pub tag: String,
    pub line: u32,
}

/// Tag used for runs that exhaust their loop fuel.
pub const NONTERMINATION: &str = "nontermination";

/// Tag and line of a failing status, or `None` for a passing run.
pub fn fault_of(status: &RunStatus) -> Option<(String, u32)> {
    match status {
        RunStatus::Ok => None,
        RunStatus::CheckViolation { tag, target, line } => {
            let tag = match (tag, target) {
                (Some(t), _) => t.clone(),
                (None, Some(t)) => format!("target{t}"),
                (None, None) => "check".to_string(),
            };
            Some((tag, *line))
        }
        RunStatus::ContractViolation { tag, line } => Some((tag.clone(), *line)),
        RunStatus::RuntimeError { kind, line } => Some((kind.to_string(), *line)),
        RunStatus::FuelExhausted { line, .. } => Some((NONTERMINATION.to_string(), *line)),
    }
}

/// Runs every test of `suite` on `routine` and collects the distinct
/// faults, attributed to `variant`. Inputs outside the routine's
/// signature or precondition are skipped.
pub fn run_suite(variant: &str, routine: &Routine, suite: &TestSuite, fuel: u32) -> BTreeSet<FaultRecord> {
    let interp = Interpreter::new(routine);
    let opts = RunOptions {
        fuel,
        record_trace: false,
    };
    let mut faults = BTreeSet::new();
    for tc in &suite.tests {
        let Ok(values) = tc.input.values_for(routine) else {
            continue;
        };
        let Ok(out) = interp.run(&values, opts) else {
            continue;
        };
        if let Some((tag, line)) = fault_of(&out.status) {
            faults.insert(FaultRecord {
                variant: variant.to_string(),
                tag,
                line,
            });
        }
    }
    faults
}

/// A named program variant under evaluation.
#[derive(Clone, Debug)]
pub struct Variant {
    pub id: String,
    pub routine: Routine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_depth: u32,
    pub runs: u32,
    pub domain: Domain,
    pub base_seed: u64,
    pub fuel: u32,
    pub mode: Mode,
    /// Per-target search budget.
    pub budget: Option<usize>,
}

impl EvalConfig {
    pub fn new(max_depth: u32, runs: u32, domain: Domain, base_seed: u64) -> Self {
        EvalConfig {
            max_depth,
            runs,
            domain,
            base_seed,
            fuel: DEFAULT_RUN_FUEL,
            mode: Mode::Scu,
            budget: None,
        }
    }
}

/// Faults found by one run at one depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub depth: u32,
    pub run: u32,
    pub seed: u64,
    pub tests: usize,
    pub faults: BTreeSet<FaultRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthStats {
    pub depth: u32,
    /// Sum over runs of the number of distinct faults per run.
    pub fault_sum: usize,
    /// Mean distinct faults per run.
    pub np: f64,
    /// Distinct faults over all runs.
    pub na: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DepthTiming {
    pub depth: u32,
    /// Seconds spent instrumenting and searching.
    pub generation_secs: f64,
    /// Seconds spent running suites on variants.
    pub execution_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub routine: String,
    pub depths: Vec<u32>,
    pub runs: u32,
    pub base_seed: u64,
    pub variants: Vec<String>,
    pub stats: Vec<DepthStats>,
    pub timing: Vec<DepthTiming>,
    pub cells: Vec<Cell>,
}

/// Per-run seeds derived from the base seed; shared by every depth.
pub fn run_seeds(base_seed: u64, runs: u32) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    (0..runs).map(|_| rng.gen()).collect()
}

/// Np and Na per depth from the cells of a report.
pub fn aggregate(depths: &[u32], runs: u32, cells: &[Cell]) -> Vec<DepthStats> {
    depths
        .iter()
        .map(|&depth| {
            let row: Vec<&Cell> = cells.iter().filter(|c| c.depth == depth).collect();
            let fault_sum: usize = row.iter().map(|c| c.faults.len()).sum();
            let union: BTreeSet<&FaultRecord> = row.iter().flat_map(|c| &c.faults).collect();
            DepthStats {
                depth,
                fault_sum,
                np: if runs == 0 { 0.0 } else { fault_sum as f64 / f64::from(runs) },
                na: union.len(),
            }
        })
        .collect()
}

/// Generates suites at depths `1..=max_depth` for `runs` seeded runs and
/// runs them over `variants`.
pub fn evaluate(r: &Routine, variants: &[Variant], cfg: &EvalConfig) -> Result<EvalReport, TestgenError> {
    let depths: Vec<u32> = (1..=cfg.max_depth).collect();
    let seeds = run_seeds(cfg.base_seed, cfg.runs);
    let opts = SearchOptions {
        fuel: cfg.fuel,
        budget: cfg.budget,
    };
    let mut cells = Vec::new();
    let mut timing = Vec::new();
    for &depth in &depths {
        let gen_start = Instant::now();
        let ir = instrument(r, cfg.mode, depth)?;
        let map = TargetMap::build(&ir, &cfg.domain, cfg.fuel);
        let suites = seeds
            .iter()
            .map(|&seed| generate_from_map(r, &ir, &map, &cfg.domain, SearchOrder::Random { seed }, opts))
            .collect::<Result<Vec<_>, _>>()?;
        let generation_secs = gen_start.elapsed().as_secs_f64();

        let exec_start = Instant::now();
        let row: Vec<Cell> = std::thread::scope(|s| {
            let handles: Vec<_> = suites
                .iter()
                .zip(&seeds)
                .enumerate()
                .map(|(j, (suite, &seed))| {
                    s.spawn(move || Cell {
                        depth,
                        run: j as u32 + 1,
                        seed,
                        tests: suite.tests.len(),
                        faults: variants
                            .iter()
                            .flat_map(|v| run_suite(&v.id, &v.routine, suite, cfg.fuel))
                            .collect(),
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        cells.extend(row);
        timing.push(DepthTiming {
            depth,
            generation_secs,
            execution_secs: exec_start.elapsed().as_secs_f64(),
        });
    }
    Ok(EvalReport {
        routine: r.name.clone(),
        stats: aggregate(&depths, cfg.runs, &cells),
        depths,
        runs: cfg.runs,
        base_seed: cfg.base_seed,
        variants: variants.iter().map(|v| v.id.clone()).collect(),
        timing,
        cells,
    })
}

/// `value / max * 100`, with an all-zero series mapping to zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|&v| if max > 0.0 { v / max * 100.0 } else { 0.0 })
        .collect()
}

/// Relative change from `a` to `b` in percent; `None` when `a` is zero.
pub fn relative_gain(a: f64, b: f64) -> Option<f64> {
    (a != 0.0).then(|| (b - a) / a * 100.0)
}

/// One row of a normalized curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub depth: u32,
    pub np: f64,
    pub na: usize,
    pub p_np: f64,
    pub p_na: f64,
}

pub fn curve(stats: &[DepthStats]) -> Vec<CurvePoint> {
    let p_np = normalize(&stats.iter().map(|s| s.np).collect::<Vec<_>>());
    let p_na = normalize(&stats.iter().map(|s| s.na as f64).collect::<Vec<_>>());
    stats
        .iter()
        .zip(p_np.into_iter().zip(p_na))
        .map(|(s, (p_np, p_na))| CurvePoint {
            depth: s.depth,
            np: s.np,
            na: s.na,
            p_np,
            p_na,
        })
        .collect()
}

/// Sums Np and Na per depth over several reports (depths present in all).
pub fn totals(reports: &[EvalReport]) -> Vec<DepthStats> {
    let mut by_depth: BTreeMap<u32, (usize, f64, usize, usize)> = BTreeMap::new();
    for rep in reports {
        for s in &rep.stats {
            let e = by_depth.entry(s.depth).or_default();
            e.0 += s.fault_sum;
            e.1 += s.np;
            e.2 += s.na;
            e.3 += 1;
        }
    }
    by_depth
        .into_iter()
        .filter(|(_, e)| e.3 == reports.len())
        .map(|(depth, (fault_sum, np, na, _))| DepthStats {
            depth,
            fault_sum,
            np,
            na,
        })
        .collect()
}

fn fmt_gain(g: Option<f64>) -> String {
    g.map_or_else(|| "n/a".to_string(), |g| format!("{g:+.1}%"))
}

/// Plain-text table of a curve plus the depth 1 to 2 gains.
pub fn table(title: &str, stats: &[DepthStats], timing: &[DepthTiming]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:>5} {:>9} {:>5} {:>7} {:>7} {:>9} {:>9}",
        "depth", "Np", "Na", "P(Np)", "P(Na)", "gen_s", "exec_s"
    );
    for p in curve(stats) {
        let t = timing.iter().find(|t| t.depth == p.depth).cloned().unwrap_or_default();
        let _ = writeln!(
            out,
            "{:>5} {:>9.3} {:>5} {:>6.1}% {:>6.1}% {:>9.3} {:>9.3}",
            p.depth, p.np, p.na, p.p_np, p.p_na, t.generation_secs, t.execution_secs
        );
    }
    let at = |d: u32| stats.iter().find(|s| s.depth == d);
    if let (Some(a), Some(b)) = (at(1), at(2)) {
        let _ = writeln!(
            out,
            "depth 1 -> 2: Np {}, Na {}",
            fmt_gain(relative_gain(a.np, b.np)),
            fmt_gain(relative_gain(a.na as f64, b.na as f64))
        );
    }
    out
}

/// CSV rows `depth,p_np,p_na` for plotting.
pub fn plot_csv(stats: &[DepthStats]) -> String {
    let mut out = String::from("depth,p_np,p_na\n");
    for p in curve(stats) {
        let _ = writeln!(out, "{},{:.4},{:.4}", p.depth, p.p_np, p.p_na);
    }
    out
}

impl EvalReport {
    pub fn stats_at(&self, depth: u32) -> Option<&DepthStats> {
        self.stats.iter().find(|s| s.depth == depth)
    }

    pub fn cell(&self, depth: u32, run: u32) -> Option<&Cell> {
        self.cells.iter().find(|c| c.depth == depth && c.run == run)
    }

    /// Pairs `(depth, run)` where a fault found at `depth` is missing at
    /// `depth + 1` in the same run.
    pub fn inclusion_violations(&self) -> Vec<(u32, u32)> {
        let mut bad = Vec::new();
        for c in &self.cells {
            if let Some(next) = self.cell(c.depth + 1, c.run) {
                if !c.faults.is_subset(&next.faults) {
                    bad.push((c.depth, c.run));
                }
            }
        }
        bad
    }

    pub fn table(&self) -> String {
        table(
            &format!("{} ({} runs, {} variants)", self.routine, self.runs, self.variants.len()),
            &self.stats,
            &self.timing,
        )
    }

    pub fn plot_csv(&self) -> String {
        plot_csv(&self.stats)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::mutate::{mutate, Operator};

    fn rec(variant: &str, tag: &str, line: u32) -> FaultRecord {
        FaultRecord {
            variant: variant.into(),
            tag: tag.into(),
            line,
        }
    }

    #[test]
    fn aggregate_matches_definitions() {
        let cell = |depth, run, faults: &[FaultRecord]| Cell {
            depth,
            run,
            seed: 0,
            tests: 0,
            faults: faults.iter().cloned().collect(),
        };
        let a = rec("m1", "post", 3);
        let b = rec("m2", "post", 3);
        let c = rec("m2", "nontermination", 5);
        let cells = vec![
            cell(1, 1, std::slice::from_ref(&a)),
            cell(1, 2, std::slice::from_ref(&b)),
            cell(2, 1, &[a.clone(), c.clone()]),
            cell(2, 2, &[b.clone(), c.clone()]),
        ];
        let stats = aggregate(&[1, 2], 2, &cells);
        assert_eq!((stats[0].np, stats[0].na), (1.0, 2));
        assert_eq!((stats[1].np, stats[1].na), (2.0, 3));
    }

    #[test]
    fn normalization_peaks_at_hundred() {
        assert_eq!(normalize(&[1.0, 2.0, 4.0]), vec![25.0, 50.0, 100.0]);
        assert_eq!(normalize(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(relative_gain(2.0, 3.0), Some(50.0));
    }

    #[test]
    fn factorial_mutant_breaks_ensure() {
        let entry = corpus::find("factorial").unwrap();
        let r = entry.routine().unwrap();
        let src = entry.source.replace("f := f * i", "f := f + i");
        let m = crate::lang::parse(&src).unwrap();
        let cfg = EvalConfig::new(3, 1, entry.domain, 7);
        let suite = crate::testgen::generate(
            &r,
            3,
            &cfg.domain,
            SearchOrder::Lex,
            Mode::Scu,
            SearchOptions::default(),
        )
        .unwrap();
        assert!(run_suite("orig", &r, &suite, DEFAULT_RUN_FUEL).is_empty());
        let faults = run_suite("m", &m, &suite, DEFAULT_RUN_FUEL);
        assert_eq!(faults.len(), 1, "{faults:?}");
        let f = faults.iter().next().unwrap();
        assert_eq!(f.tag, r.ensure[0].tag);
    }

    #[test]
    fn shared_seeds_give_inclusion() {
        let entry = corpus::find("gcd").unwrap();
        let r = entry.routine().unwrap();
        let variants: Vec<Variant> = mutate(&r, &Operator::ALL, 20, 3)
            .into_iter()
            .map(|m| Variant {
                id: m.id,
                routine: m.routine,
            })
            .collect();
        let cfg = EvalConfig::new(3, 3, entry.domain, 11);
        let rep = evaluate(&r, &variants, &cfg).unwrap();
        assert!(rep.inclusion_violations().is_empty());
        for w in rep.stats.windows(2) {
            assert!(w[0].na <= w[1].na);
            assert!(w[0].np <= w[1].np);
        }
        for s in &rep.stats {
            assert!(s.np <= s.na as f64);
        }
        assert_eq!(rep, evaluate(&r, &variants, &cfg).map(|mut x| {
            x.timing = rep.timing.clone();
            x
        }).unwrap());
    }
}
