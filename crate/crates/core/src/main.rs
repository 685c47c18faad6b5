//! Command-line driver: run auctions, verify outcomes, generate scenarios
//! and reproduce the built-in worked example.
//!
//! Exit codes: 0 all checks pass, 1 some check failed, 2 input error.

use clap::{Parser, Subcommand, ValueEnum};
use polyclinch::auction::{run_with, RunOptions};
use polyclinch::rational::{parse_nonneg_rat, rat_int, rat_to_string};
use polyclinch::scenario_io::{
    build_run_report, example1, generate, ConstraintMix, EnvKind, GenerateParams, ScenarioFile,
    TraceMode,
};
use polyclinch::verification::{
    pareto_check, vcg_baseline, verify_scenario, CheckStatus, ParetoCheck, VerifyOptions,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "polyclinch",
    version,
    about = "Clinching auctions over polymatroids with exact-rational verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TraceArg {
    Summary,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    MultiUnit,
    SponsoredSearch,
    ExplicitTable,
}

#[derive(Clone, Copy, ValueEnum)]
enum MixArg {
    Hard,
    Average,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Run the clinching auction on a scenario and write a report.
    Run {
        scenario: PathBuf,
        /// Check the loop invariants at every checkpoint; a violation
        /// fails the run.
        #[arg(long)]
        check_invariants: bool,
        #[arg(long, value_enum, default_value = "summary")]
        trace: TraceArg,
        /// Report destination (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite against a scenario.
    Verify {
        scenario: PathBuf,
        /// Certify Pareto-efficiency with the exact LP oracle.
        #[arg(long)]
        pareto: bool,
        /// Sweep every agent over the epsilon grid of misreports.
        #[arg(long)]
        ic: bool,
        /// Compare clinch amounts against the definition oracle.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a seeded random scenario.
    Generate {
        /// Generation seed; falls back to CLINCH_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value = "multi-unit")]
        kind: KindArg,
        /// Upper bound for values, as an exact rational.
        #[arg(long, default_value = "6")]
        v_max: String,
        #[arg(long, default_value = "1")]
        epsilon: String,
        #[arg(long, value_enum, default_value = "mixed")]
        constraint_mix: MixArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the built-in worked example and its VCG refutation.
    Example1,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            scenario,
            check_invariants,
            trace,
            out,
        } => {
            let file = load_scenario(&scenario)?;
            let parsed = file.to_scenario().map_err(|e| e.to_string())?;
            let started = std::time::Instant::now();
            let options = RunOptions {
                check_invariants,
                ..Default::default()
            };
            let (outcome, full_trace) = match run_with(&parsed, &options) {
                Ok(result) => result,
                // A violated invariant is a failed check (exit 1), not an
                // input error; rerun unchecked to still emit the report.
                Err(polyclinch::auction::AuctionError::InvariantViolation {
                    iteration,
                    detail,
                }) => {
                    eprintln!("invariant violation at checkpoint {iteration}: {detail}");
                    let relaxed = RunOptions {
                        check_invariants: false,
                        ..options
                    };
                    let (outcome, full_trace) =
                        run_with(&parsed, &relaxed).map_err(|e| e.to_string())?;
                    let mode = match trace {
                        TraceArg::Summary => TraceMode::Summary,
                        TraceArg::Full => TraceMode::Full,
                    };
                    let report =
                        build_run_report(&file, &parsed, &outcome, &full_trace, None, mode);
                    emit(&report.to_json(), &out)?;
                    return Ok(false);
                }
                Err(other) => return Err(other.to_string()),
            };
            let mode = match trace {
                TraceArg::Summary => TraceMode::Summary,
                TraceArg::Full => TraceMode::Full,
            };
            let report = build_run_report(&file, &parsed, &outcome, &full_trace, None, mode);
            let ok = report.invariants.violations.is_empty();
            emit(&report.to_json(), &out)?;
            eprintln!(
                "run finished in {} ms ({} checkpoints)",
                started.elapsed().as_millis(),
                full_trace.checkpoints.len()
            );
            Ok(ok)
        }
        Command::Verify {
            scenario,
            pareto,
            ic,
            oracle,
            out,
        } => {
            let file = load_scenario(&scenario)?;
            let parsed = file.to_scenario().map_err(|e| e.to_string())?;
            let started = std::time::Instant::now();
            let options = VerifyOptions {
                pareto,
                ic,
                oracle,
                oracle_seed: file.seed.unwrap_or(0),
            };
            let report = verify_scenario(&parsed, &options).map_err(|e| e.to_string())?;
            let (outcome, trace) = polyclinch::run(&parsed).map_err(|e| e.to_string())?;
            let doc = build_run_report(
                &file,
                &parsed,
                &outcome,
                &trace,
                Some(&report),
                TraceMode::Summary,
            );
            emit(&doc.to_json(), &out)?;
            for entry in &report.entries {
                let status = match entry.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Warn => "warn",
                    CheckStatus::Fail => "FAIL",
                };
                eprintln!("[{status}] {}", entry.name);
            }
            eprintln!(
                "verification finished in {} ms",
                started.elapsed().as_millis()
            );
            Ok(report.passed())
        }
        Command::Generate {
            seed,
            n,
            kind,
            v_max,
            epsilon,
            constraint_mix,
            out,
        } => {
            let seed = seed
                .or_else(|| {
                    std::env::var("CLINCH_SEED")
                        .ok()
                        .and_then(|s| s.parse().ok())
                })
                .unwrap_or(0);
            let params = GenerateParams {
                n,
                kind: match kind {
                    KindArg::MultiUnit => EnvKind::MultiUnit,
                    KindArg::SponsoredSearch => EnvKind::SponsoredSearch,
                    KindArg::ExplicitTable => EnvKind::ExplicitTable,
                },
                v_max: parse_nonneg_rat(&v_max).map_err(|e| e.to_string())?,
                epsilon: parse_nonneg_rat(&epsilon).map_err(|e| e.to_string())?,
                constraint_mix: match constraint_mix {
                    MixArg::Hard => ConstraintMix::HardOnly,
                    MixArg::Average => ConstraintMix::AverageOnly,
                    MixArg::Mixed => ConstraintMix::Mixed,
                },
            };
            let file = generate(seed, &params).map_err(|e| e.to_string())?;
            emit(&file.to_json(), &out)?;
            Ok(true)
        }
        Command::Example1 => {
            let file = example1();
            let scenario = file.to_scenario().map_err(|e| e.to_string())?;
            let vcg = vcg_baseline(&scenario.f, &scenario.agents);
            let refutation = pareto_check(&scenario.f, &scenario.agents, &vcg)
                .map_err(|e| e.to_string())?;
            let welfare: polyclinch::Rat = scenario
                .agents
                .iter()
                .zip(vcg.x.iter())
                .map(|(a, x)| &a.value * x)
                .sum();
            println!("{}", file.to_json());
            println!();
            println!(
                "VCG on min(v, beta): x = [{}], pi = [{}], welfare = {}",
                vcg.x
                    .iter()
                    .map(rat_to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
                vcg.pi
                    .iter()
                    .map(rat_to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
                rat_to_string(&welfare),
            );
            match refutation {
                ParetoCheck::Improvable(imp) => {
                    let improved = &welfare + &imp.welfare_gain;
                    println!(
                        "Pareto improvement found: x' = [{}], pi' = [{}], welfare {} > {}",
                        imp.x
                            .iter()
                            .map(rat_to_string)
                            .collect::<Vec<_>>()
                            .join(", "),
                        imp.pi
                            .iter()
                            .map(rat_to_string)
                            .collect::<Vec<_>>()
                            .join(", "),
                        rat_to_string(&improved),
                        rat_to_string(&welfare),
                    );
                    let expected_gain = rat_int(4);
                    Ok(imp.welfare_gain == expected_gain)
                }
                ParetoCheck::Pass { .. } => {
                    println!("unexpected: VCG outcome certified as efficient");
                    Ok(false)
                }
            }
        }
    }
}

fn load_scenario(path: &PathBuf) -> Result<ScenarioFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ScenarioFile::parse(&text).map_err(|e| e.to_string())
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
