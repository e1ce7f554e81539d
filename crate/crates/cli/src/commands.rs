use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use looptrace::corpus::{self, CORPUS};
use looptrace::evaluate::{self, evaluate, run_suite, EvalConfig, EvalReport, Variant};
use looptrace::lang::{analyze, parse, pretty, Routine};
use looptrace::lawcheck::{self, Bounds, LawReport};
use looptrace::mutate::{mutate, ManifestEntry, Operator};
use looptrace::scu::{instrument, Mode};
use looptrace::semantics::{Domain, Interpreter, RunOptions};
use looptrace::testgen::{generate, SearchOptions, SearchOrder, TestSuite};
use looptrace::unroll::{semantic_check, unroll_routine, UnrollConfig, UnrollForm};

use crate::{Command, CorpusCommand, DomainArgs, Form, ModeArg, OrderArg, SearchArgs};

const DEFAULT_INT_RANGE: (i64, i64) = (0, 10);
const DEFAULT_ARRAY_MAX: usize = 3;

pub fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Parse { file } => {
            print!("{}", pretty(&load(&file)?));
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { file } => {
            println!("{}", serde_json::to_string_pretty(&analyze(&load(&file)?))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Unroll {
            file,
            depth,
            form,
            loop_label,
            check,
            domain,
        } => cmd_unroll(&file, depth, form, loop_label, check, &domain),
        Command::Instrument {
            file,
            depth,
            mode,
            targets,
        } => {
            let ir = instrument(&load(&file)?, mode.into(), depth)?;
            print!("{}", ir.source());
            if let Some(path) = targets {
                write(&path, &serde_json::to_string_pretty(&ir.targets)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            file,
            depth,
            domain,
            search,
            mode,
            output,
        } => {
            let r = load(&file)?;
            let d = resolve_domain(&file, &domain)?;
            let suite = generate(&r, depth, &d, order(&search), mode.into(), options(&search))?;
            write(&output, &suite.to_json())?;
            println!("{}", suite_summary(&suite));
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { file, suite, fuel } => cmd_run(&file, &suite, fuel),
        Command::Mutate {
            file,
            count,
            seed,
            ops,
            output,
        } => {
            let r = load(&file)?;
            let ops = operators(&ops)?;
            let entries = write_mutants(&r, &ops, count, seed, &output)?;
            println!("wrote {} mutants to {}", entries.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            file,
            mutants,
            max_depth,
            runs,
            seed,
            domain,
            output,
        } => {
            let r = load(&file)?;
            let d = resolve_domain(&file, &domain)?;
            let variants = load_variants(&mutants)?;
            let rep = evaluate(&r, &variants, &EvalConfig::new(max_depth, runs, d, seed))?;
            write_report(&rep, &output)?;
            print!("{}", rep.table());
            Ok(ExitCode::SUCCESS)
        }
        Command::Laws {
            samples,
            seed,
            exhaustive,
            law,
        } => cmd_laws(samples, seed, exhaustive, law.as_deref()),
        Command::Corpus(CorpusCommand::List) => cmd_corpus_list(),
        Command::Corpus(CorpusCommand::GenAll {
            depth,
            search,
            output,
        }) => cmd_gen_all(depth, &search, &output),
        Command::Corpus(CorpusCommand::EvalAll {
            count,
            runs,
            max_depth,
            seed,
            output,
        }) => cmd_eval_all(count, runs, max_depth, seed, &output),
    }
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Sc => Mode::Sc,
            ModeArg::Scu => Mode::Scu,
        }
    }
}

fn load(path: &Path) -> Result<Routine> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse(&text).with_context(|| format!("{}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Domain flags, falling back to the corpus entry named by the file stem.
fn resolve_domain(file: &Path, args: &DomainArgs) -> Result<Domain> {
    let entry = file
        .file_stem()
        .and_then(|s| s.to_str())
        .and_then(corpus::find);
    let (lo, hi) = match &args.int_range {
        Some(text) => Domain::parse_range(text)?,
        None => entry.map_or(DEFAULT_INT_RANGE, |e| (e.domain.int_min, e.domain.int_max)),
    };
    let array_max = args
        .array_max
        .unwrap_or_else(|| entry.map_or(DEFAULT_ARRAY_MAX, |e| e.domain.array_len_max));
    Ok(Domain::new(lo, hi, array_max)?)
}

fn order(s: &SearchArgs) -> SearchOrder {
    match s.order {
        OrderArg::Lex => SearchOrder::Lex,
        OrderArg::Random => SearchOrder::Random { seed: s.seed },
    }
}

fn options(s: &SearchArgs) -> SearchOptions {
    SearchOptions {
        fuel: s.fuel,
        budget: s.budget,
    }
}

fn suite_summary(s: &TestSuite) -> String {
    let mut line = format!(
        "{}: {} tests for {} targets (depth {}, m = {})",
        s.routine,
        s.tests.len(),
        s.target_count,
        s.depth,
        s.m
    );
    if !s.uncovered.is_empty() {
        line.push_str(&format!("; unreachable {:?}", s.uncovered));
    }
    if !s.unknown.is_empty() {
        line.push_str(&format!("; over budget {:?}", s.unknown));
    }
    line
}

fn cmd_unroll(
    file: &Path,
    depth: u32,
    form: Form,
    loop_label: Option<String>,
    check: bool,
    domain: &DomainArgs,
) -> Result<ExitCode> {
    let r = load(file)?;
    let cfg = UnrollConfig {
        loop_label,
        form: match form {
            Form::Strict => UnrollForm::Strict,
            Form::Truncated => UnrollForm::Truncated,
        },
        ..UnrollConfig::strict(depth)
    };
    print!("{}", pretty(&unroll_routine(&r, &cfg)?));
    if !check {
        return Ok(ExitCode::SUCCESS);
    }
    let report = semantic_check(&r, &cfg, &resolve_domain(file, domain)?)?;
    eprintln!(
        "{} inputs: {} accepted, {} hit the depth guard, {} mismatches",
        report.inputs,
        report.accepted,
        report.guard_hits,
        report.mismatches.len()
    );
    for m in &report.mismatches {
        eprintln!("mismatch on {:?}: {}", m.input, m.detail);
    }
    Ok(if report.mismatches.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_run(file: &Path, suite_path: &Path, fuel: u32) -> Result<ExitCode> {
    let r = load(file)?;
    let text = fs::read_to_string(suite_path)
        .with_context(|| format!("cannot read {}", suite_path.display()))?;
    let suite = TestSuite::from_json(&text).with_context(|| format!("{}", suite_path.display()))?;
    let interp = Interpreter::new(&r);
    let opts = RunOptions {
        fuel,
        record_trace: false,
    };
    let mut failures = 0;
    for tc in &suite.tests {
        let values = tc.input.values_for(&r)?;
        let out = interp.run(&values, opts)?;
        if !out.status.is_ok() {
            failures += 1;
        }
        println!("{} ({}): {}", tc.id, tc.input, out.status);
    }
    let faults = run_suite(&r.name, &r, &suite, fuel);
    println!("{} tests, {} failing, {} distinct faults", suite.tests.len(), failures, faults.len());
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn operators(names: &[String]) -> Result<Vec<Operator>> {
    if names.is_empty() {
        return Ok(Operator::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| Operator::from_name(n.trim()).with_context(|| format!("unknown operator `{n}`")))
        .collect()
}

fn write_mutants(r: &Routine, ops: &[Operator], count: usize, seed: u64, dir: &Path) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mutants = mutate(r, ops, count, seed);
    let mut manifest = Vec::new();
    for m in &mutants {
        write(&dir.join(m.file_name()), &pretty(&m.routine))?;
        manifest.push(m.manifest_entry());
    }
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Mutants listed in `manifest.json`, or every `.mil` file in the
/// directory by name.
fn load_variants(dir: &Path) -> Result<Vec<Variant>> {
    let manifest = dir.join("manifest.json");
    let files: Vec<PathBuf> = if manifest.exists() {
        let text = fs::read_to_string(&manifest)?;
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(&text).with_context(|| format!("{}", manifest.display()))?;
        entries.iter().map(|e| dir.join(&e.file)).collect()
    } else {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("cannot read {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "mil"))
            .collect();
        files.sort();
        files
    };
    if files.is_empty() {
        bail!("no mutants found in {}", dir.display());
    }
    files
        .iter()
        .map(|f| {
            Ok(Variant {
                id: f
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string(),
                routine: load(f)?,
            })
        })
        .collect()
}

fn write_report(rep: &EvalReport, path: &Path) -> Result<()> {
    write(path, &rep.to_json())?;
    write(&path.with_extension("csv"), &rep.plot_csv())?;
    write(&path.with_extension("txt"), &rep.table())
}

fn cmd_laws(samples: usize, seed: u64, exhaustive: bool, law: Option<&str>) -> Result<ExitCode> {
    let reports: Vec<LawReport> = match (law, exhaustive) {
        (Some(name), true) => vec![lawcheck::check_case_exhaustive(lawcheck::find_law(name)?)],
        (Some(name), false) => vec![lawcheck::check_law(name, samples, seed, &Bounds::default())?],
        (None, true) => lawcheck::check_all_exhaustive(),
        (None, false) => lawcheck::check_all(samples, seed, &Bounds::default())?,
    };
    let mut failed = 0;
    for r in &reports {
        match &r.counterexample {
            None => println!("pass  {:<28} {:>7} samples  {:>8.1?}", r.law_name, r.samples_run, r.elapsed),
            Some(cex) => {
                failed += 1;
                println!("FAIL  {:<28} {:>7} samples  counterexample: {cex}", r.law_name, r.samples_run);
            }
        }
    }
    println!("{} laws, {} failed", reports.len(), failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_corpus_list() -> Result<ExitCode> {
    let mut ok = true;
    println!(
        "{:<20} {:<20} {:>8} {:>5} {:>9}  domain",
        "name", "label", "branches", "loops", "max_depth"
    );
    for e in CORPUS.iter() {
        let info = analyze(&e.routine()?);
        let branches = info.loops.first().map_or(0, |l| l.branches);
        let flag = if branches == e.branches && info.loop_count == 1 {
            ""
        } else {
            ok = false;
            "  (expected a single loop with the listed branch count)"
        };
        println!(
            "{:<20} {:<20} {:>8} {:>5} {:>9}  {}{flag}",
            e.name, e.label, branches, info.loop_count, e.max_depth, e.domain
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_gen_all(depth: Option<u32>, search: &SearchArgs, dir: &Path) -> Result<ExitCode> {
    for e in CORPUS.iter() {
        let r = e.routine()?;
        let n = depth.unwrap_or(e.max_depth);
        let suite = generate(&r, n, &e.domain, order(search), Mode::Scu, options(search))?;
        write(&dir.join(format!("{}.suite.json", e.name)), &suite.to_json())?;
        println!("{}", suite_summary(&suite));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval_all(count: usize, runs: u32, max_depth: u32, seed: u64, dir: &Path) -> Result<ExitCode> {
    let mut reports = Vec::new();
    for e in CORPUS.iter() {
        let r = e.routine()?;
        let mutants_dir = dir.join("mutants").join(e.name);
        write_mutants(&r, &Operator::ALL, count, seed, &mutants_dir)?;
        let variants = load_variants(&mutants_dir)?;
        let rep = evaluate(&r, &variants, &EvalConfig::new(max_depth, runs, e.domain, seed))?;
        write_report(&rep, &dir.join(format!("{}.report.json", e.name)))?;
        print!("{}", rep.table());
        reports.push(rep);
    }
    let totals = evaluate::totals(&reports);
    let table = evaluate::table(
        &format!("corpus total ({} routines, {runs} runs)", reports.len()),
        &totals,
        &[],
    );
    write(&dir.join("totals.txt"), &table)?;
    write(&dir.join("totals.csv"), &evaluate::plot_csv(&totals))?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}
