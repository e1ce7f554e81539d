mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Loop unrolling, SCU test generation and mutation evaluation for the
/// mini-language.
#[derive(Parser, Debug)]
#[command(name = "looptrace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and type-check a routine, printing its canonical form.
    Parse { file: PathBuf },
    /// Report loops, nesting and branch counts as JSON.
    Analyze { file: PathBuf },
    /// Print the routine with its loop unrolled to a fixed depth.
    Unroll {
        file: PathBuf,
        #[arg(long)]
        depth: u32,
        #[arg(long, value_enum, default_value_t = Form::Strict)]
        form: Form,
        /// Label of the loop to unroll when there are several (`loop1`, ...).
        #[arg(long = "loop")]
        loop_label: Option<String>,
        /// Also compare the unrolling with the original over the domain.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        domain: DomainArgs,
    },
    /// Print the routine instrumented with seeded checks.
    Instrument {
        file: PathBuf,
        #[arg(long)]
        depth: u32,
        #[arg(long, value_enum, default_value_t = ModeArg::Scu)]
        mode: ModeArg,
        /// Write the target table as JSON to this file.
        #[arg(long)]
        targets: Option<PathBuf>,
    },
    /// Generate a test suite covering the seeded targets.
    Gen {
        file: PathBuf,
        #[arg(long)]
        depth: u32,
        #[command(flatten)]
        domain: DomainArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Scu)]
        mode: ModeArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a suite on a routine; fails if any test exposes a fault.
    Run {
        file: PathBuf,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = looptrace::semantics::DEFAULT_RUN_FUEL)]
        fuel: u32,
    },
    /// Write seeded mutants and a manifest to a directory.
    Mutate {
        file: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated operator names (default: all).
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate suites at depths 1..N over the mutants in a directory.
    Eval {
        file: PathBuf,
        #[arg(long)]
        mutants: PathBuf,
        #[arg(long)]
        max_depth: u32,
        #[arg(long, default_value_t = 20)]
        runs: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        domain: DomainArgs,
        /// JSON report; the plot data goes next to it with a `.csv` suffix.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check the trace-algebra laws.
    Laws {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Enumerate every instance over a 2-state universe and traces of
        /// length at most 2 instead of sampling.
        #[arg(long)]
        exhaustive: bool,
        /// Check only this law.
        #[arg(long)]
        law: Option<String>,
    },
    /// Work with the bundled benchmark routines.
    #[command(subcommand)]
    Corpus(CorpusCommand),
}

#[derive(Subcommand, Debug)]
enum CorpusCommand {
    /// List the routines with branch counts, domains and depths.
    List,
    /// Write one SCU suite per routine at its maximum depth.
    GenAll {
        #[arg(long)]
        depth: Option<u32>,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Mutate and evaluate every routine, then total the results.
    EvalAll {
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 20)]
        runs: u32,
        #[arg(long, default_value_t = 5)]
        max_depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct DomainArgs {
    /// Integer parameter range `A..B` (default: the corpus entry's, else 0..10).
    #[arg(long)]
    int_range: Option<String>,
    /// Longest array parameter (default: the corpus entry's, else 3).
    #[arg(long)]
    array_max: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = OrderArg::Lex)]
    order: OrderArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum inputs examined per target.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = looptrace::semantics::DEFAULT_RUN_FUEL)]
    fuel: u32,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Form {
    Strict,
    Truncated,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Sc,
    Scu,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OrderArg {
    Lex,
    Random,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
