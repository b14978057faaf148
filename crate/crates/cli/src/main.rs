//! Command-line front end: tune, replay, simulate, surfaces, validate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eigentune::harness::{
    self, Controller, HarnessError, MatrixKind, RunRecord, Scenario, TuneOptions, APPENDIX_FIXTURES, BUNDLED_SCENARIOS,
};

#[derive(Parser)]
#[command(
    name = "eigentune",
    version,
    about = "Penalty-matrix tuning for feedback control testbeds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the swarm optimizer R times per matrix kind and write summaries.
    Tune(TuneArgs),
    /// Simulate fixed penalty matrices from a fixture file (no optimization).
    Replay(ReplayArgs),
    /// Simulate once with identity matrices, or with --matrices, and write the trajectory.
    Simulate(ReplayArgs),
    /// Write Zermelo V, dV/dt and |u| on the scenario grid.
    Surfaces(ReplayArgs),
    /// Load and check a scenario; without --scenario, check every bundled file.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario file or bundled name (e.g. caseA, zermelo, attitude_lqr_detumbling).
    #[arg(long)]
    scenario: String,
    /// Restrict to one matrix kind; both by default.
    #[arg(long, value_parser = parse_kind)]
    matrix_kind: Option<MatrixKind>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the scenario's full swarm budget instead of the desk budget.
    #[arg(long)]
    full_budget: bool,
    /// Skip the per-run trajectory CSVs.
    #[arg(long)]
    no_trajectories: bool,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    /// Fixture file or bundled appendix name (A1 … A5).
    #[arg(long)]
    matrices: Option<String>,
    /// Coasting cutoff for minimum-fuel Q-law.
    #[arg(long)]
    eta_cut: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: Option<String>,
}

fn parse_kind(s: &str) -> Result<MatrixKind, String> {
    MatrixKind::parse(s).ok_or_else(|| format!("expected diag or full, got '{s}'"))
}

fn kinds(k: Option<MatrixKind>) -> Vec<MatrixKind> {
    k.map_or_else(|| MatrixKind::BOTH.to_vec(), |k| vec![k])
}

fn print_records(records: &[RunRecord]) {
    for r in records {
        println!(
            "{} {} run {} seed {}: objective {:.6} (converged: {}, final time {:.4}, {} evaluations, {:.1} s)",
            r.case,
            r.matrix_kind.label(),
            r.run,
            r.seed,
            r.objective,
            r.converged,
            r.final_time,
            r.evaluations,
            r.wall_time_s
        );
        if let Some(note) = &r.note {
            println!("  note: {note}");
        }
    }
}

fn controllers(s: &Scenario, args: &ReplayArgs, required: bool) -> Result<Vec<(MatrixKind, Controller)>, HarnessError> {
    let mut out = Vec::new();
    match &args.matrices {
        Some(m) => {
            let fixture = harness::resolve_fixture(m)?;
            if fixture.testbed != s.testbed() {
                return Err(harness::ConfigError::Schema {
                    field: "testbed".into(),
                    message: format!(
                        "fixture is for {}, scenario is {}",
                        fixture.testbed.label(),
                        s.testbed().label()
                    ),
                }
                .into());
            }
            for k in kinds(args.common.matrix_kind) {
                out.push((k, fixture.controller(k)?));
            }
        }
        None if required => {
            return Err(harness::ConfigError::Schema {
                field: "--matrices".into(),
                message: "replay needs a fixture file or appendix name".into(),
            }
            .into())
        }
        None => out.push((
            args.common.matrix_kind.unwrap_or(MatrixKind::Full),
            s.identity_controller(),
        )),
    }
    if let Some(eta) = args.eta_cut {
        for (_, c) in &mut out {
            c.eta_cut = Some(eta);
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Tune(a) => {
            let s = harness::resolve_scenario(&a.common.scenario)?;
            let budget = if a.full_budget { s.config.full_budget } else { None };
            let mut records = Vec::new();
            for kind in kinds(a.common.matrix_kind) {
                let mut opts = TuneOptions::from_scenario(&s, kind);
                opts.runs = a.runs.unwrap_or(opts.runs);
                opts.seed = a.seed.unwrap_or(opts.seed);
                opts.budget = budget;
                records.extend(harness::tune(&s, &opts)?);
            }
            let files = harness::emit(&s, &mut records, &a.common.out_dir, !a.no_trajectories)?;
            print_records(&records);
            for row in harness::comparison_rows(&records) {
                println!(
                    "{}: mean diag {:.6}, mean full {:.6}, best diag {:.6}, best full {:.6}, mean(J(K2))-mean(J(K1)) {:.6}",
                    row.case, row.mean_diag, row.mean_full, row.best_diag, row.best_full, row.mean_difference
                );
            }
            println!("wrote {} files to {}", files.len(), a.common.out_dir.display());
            Ok(())
        }
        Command::Replay(a) => replay_like(a, true),
        Command::Simulate(a) => replay_like(a, false),
        Command::Surfaces(a) => {
            let s = harness::resolve_scenario(&a.common.scenario)?;
            for (_, c) in controllers(&s, &a, false)? {
                let path = harness::emit_surfaces(&s, &c, &a.common.out_dir)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Validate(a) => {
            match a.scenario {
                Some(name) => println!("{}", harness::resolve_scenario(&name)?.describe()),
                None => {
                    for (name, _) in BUNDLED_SCENARIOS {
                        let s = harness::bundled_scenario(name)?;
                        println!("[ok] {name}: {}", s.describe());
                    }
                    for (name, _) in APPENDIX_FIXTURES {
                        let f = harness::resolve_fixture(name)?;
                        println!(
                            "[ok] fixture {name}: {} {} sha256 {}",
                            f.testbed.label(),
                            f.case,
                            f.checksum()
                        );
                    }
                }
            }
            Ok(())
        }
    }
}

fn replay_like(a: ReplayArgs, require_matrices: bool) -> Result<(), HarnessError> {
    let s = harness::resolve_scenario(&a.common.scenario)?;
    let mut records = Vec::new();
    for (kind, c) in controllers(&s, &a, require_matrices)? {
        records.push(harness::replay(&s, kind, &c)?);
    }
    harness::emit(&s, &mut records, &a.common.out_dir, true)?;
    print_records(&records);
    if let Some(bad) = records.iter().find(|r| !r.converged) {
        return Err(HarnessError::Simulation(format!(
            "{} {} did not converge: {}",
            bad.case,
            bad.matrix_kind.label(),
            bad.note.as_deref().unwrap_or("no detail")
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
