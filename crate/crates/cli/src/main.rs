use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use msep::par;
use msep::sim::compare_methods;
use msep_cli::config::parse_run_config;
use msep_cli::figure::{assess, describe, figure, Assessment, MIN_DECISIONS};
use msep_cli::output::{summary_line, write_csv};
use msep_cli::verify::{run_suite, Suite, SuiteOptions};
use msep_cli::Failure;

/// Symbol error rate experiments for constellation-constrained precoding.
#[derive(Debug, Parser)]
#[command(name = "msep", version)]
struct Cli {
    /// Base seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Channel realizations (run, figure) or cases per property (verify).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write CSV here instead of the configured output or stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Run a property suite: gradients, hessians, bounds, bnb-vs-exhaustive, sep-vs-mc.
    Verify { suite: String },
    /// Reproduce a reference figure and check it against its tolerance bands.
    Figure { name: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads;
    let outcome = if threads == Some(0) {
        Err(Failure::Invalid("--threads must be at least 1".into()))
    } else {
        par::with_threads(threads, move || dispatch(&cli)).map_err(Failure::from).and_then(|r| r)
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if cli.trials == Some(0) {
        return Err(Failure::Invalid("--trials must be at least 1".into()));
    }
    match &cli.command {
        Command::Run { config } => run(cli, config),
        Command::Verify { suite } => verify(cli, suite.parse()?),
        Command::Figure { name } => run_figure(cli, name),
    }
}

fn write_points(path: Option<&Path>, points: &[msep::sim::SerPoint], seed: u64) -> Result<(), Failure> {
    let io_err = |e: &dyn std::fmt::Display| Failure::Runtime(format!("writing CSV: {e}"));
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            write_csv(BufWriter::new(f), points, seed).map_err(|e| io_err(&e))
        }
        None => write_csv(io::stdout().lock(), points, seed).map_err(|e| io_err(&e)),
    }
}

fn run(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let mut plan = parse_run_config(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    if let Some(s) = cli.seed {
        plan.experiment.seed = s;
    }
    if let Some(t) = cli.trials {
        plan.experiment.trials = t;
    }
    let result = compare_methods(&plan.experiment, &plan.methods)?;
    let out = cli.out.as_deref().or(plan.output.as_deref());
    write_points(out, &result.points, plan.experiment.seed)?;
    if plan.verbosity >= 1 {
        let mut err = io::stderr().lock();
        for p in &result.points {
            let _ = writeln!(err, "{}", summary_line(p));
        }
        if plan.verbosity >= 2 {
            let wall: std::time::Duration = result.points.iter().map(|p| p.wall_time).sum();
            let _ = writeln!(err, "total precoding time {:.3} s", wall.as_secs_f64());
        }
    }
    Ok(())
}

fn verify(cli: &Cli, suite: Suite) -> Result<(), Failure> {
    let mut opts = SuiteOptions::for_suite(suite);
    if let Some(s) = cli.seed {
        opts.seed = s;
    }
    if let Some(t) = cli.trials {
        opts.count = t;
    }
    let report = run_suite(suite, &opts);
    let mut out = io::stdout().lock();
    for p in &report.properties {
        let _ = writeln!(out, "{} {}: {}", if p.passed { "PASS" } else { "FAIL" }, p.name, p.detail);
        if let Some(c) = &p.counterexample {
            let _ = writeln!(out, "--- counterexample\n{}---", c.to_toml());
        }
    }
    if report.passed() {
        Ok(())
    } else {
        let failed = report.properties.iter().filter(|p| !p.passed).count();
        Err(Failure::Runtime(format!("suite {suite}: {failed} properties failed")))
    }
}

fn run_figure(cli: &Cli, name: &str) -> Result<(), Failure> {
    let fig = figure(name)?;
    let cfg = fig.experiment(cli.trials, cli.seed.unwrap_or(0));
    let result = compare_methods(&cfg, &fig.methods())?;
    if let Some(p) = &cli.out {
        write_points(Some(p), &result.points, cfg.seed)?;
    }
    match assess(&fig, &result)? {
        Assessment::Skipped { decisions } => {
            println!("{name}: insufficient samples, skipped ({decisions} decisions per cell, need {MIN_DECISIONS})");
            Ok(())
        }
        Assessment::Checked(checks) => {
            for c in &checks {
                println!("{}", describe(c));
            }
            let outside: Vec<String> =
                checks.iter().filter(|c| !c.within).map(|c| format!("{} at {} dB", c.cell.method, c.cell.snr_db)).collect();
            if outside.is_empty() {
                println!("{name}: all {} cells within tolerance", checks.len());
                Ok(())
            } else {
                Err(Failure::Runtime(format!("{name}: cells outside tolerance: {}", outside.join(", "))))
            }
        }
    }
}
