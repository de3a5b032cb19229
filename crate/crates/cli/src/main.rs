//! `coverlab`: experiment runner for the covering-set laboratory.
//!
//! Exit codes: 0 all checks passed, 1 a check failed (or a manifest did not
//! verify), 2 usage/configuration error, 3 resource cap exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coverlab_cli::scenarios::{builtin, builtin_scenarios, RunError, Scenario};
use coverlab_cli::{manifest, runner};

#[derive(Parser)]
#[command(name = "coverlab", version, about = "Random covering set experiments on the torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the built-in scenarios.
    List {
        /// Emit a JSON array instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run a scenario and write CSV tables, a JSON summary and a manifest.
    Reproduce {
        /// Scenario name (see `list`).
        scenario: String,
        /// JSON file overriding the scenario configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the number of seeds (trials).
        #[arg(long)]
        seeds: Option<u64>,
        /// Override the master seed.
        #[arg(long)]
        master_seed: Option<u64>,
        /// Restrict the alpha grid (repeatable).
        #[arg(long = "alpha")]
        alphas: Vec<f64>,
        /// Largest size ratio for the two-cubes scenario (doubling from 2).
        #[arg(long)]
        ratio: Option<f64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output root (default $COVERLAB_OUT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Recompute the checksums recorded in a run's manifest.
    Verify { run_dir: PathBuf },
}

fn out_root(cli_out: Option<PathBuf>) -> PathBuf {
    cli_out
        .or_else(|| std::env::var_os("COVERLAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn apply_overrides(
    scenario: &mut Scenario,
    seeds: Option<u64>,
    master_seed: Option<u64>,
    alphas: &[f64],
    ratio: Option<f64>,
) -> Result<(), String> {
    match scenario {
        Scenario::ShrinkingBalls(p) => {
            if let Some(s) = seeds {
                p.seeds = s;
            }
            if let Some(m) = master_seed {
                p.master_seed = m;
            }
            if !alphas.is_empty() {
                p.alphas = alphas.to_vec();
            }
        }
        Scenario::CriticalExponent(p) => {
            if !alphas.is_empty() {
                p.alphas = alphas.to_vec();
            }
        }
        Scenario::FatCantor(p) => {
            if let Some(s) = seeds {
                p.seeds = s;
            }
            if let Some(m) = master_seed {
                p.master_seed = m;
            }
        }
        Scenario::PackingSaturation(p) => {
            if let Some(s) = seeds {
                p.seeds = s;
            }
            if let Some(m) = master_seed {
                p.master_seed = m;
            }
        }
        Scenario::TwoCubes(p) => {
            if let Some(r) = ratio {
                if r < 2.0 {
                    return Err("--ratio must be at least 2".into());
                }
                let mut ratios = vec![2.0];
                while *ratios.last().unwrap() * 2.0 <= r {
                    let next = ratios.last().unwrap() * 2.0;
                    ratios.push(next);
                }
                p.ratios = ratios;
            }
        }
        Scenario::NonlinearConsistency(p) => {
            if let Some(s) = seeds {
                p.base.seeds = s;
            }
            if let Some(m) = master_seed {
                p.base.master_seed = m;
            }
            if !alphas.is_empty() {
                p.base.alphas = alphas.to_vec();
            }
        }
        _ => {
            if seeds.is_some() || master_seed.is_some() || !alphas.is_empty() || ratio.is_some() {
                return Err("this scenario takes overrides only via --config".into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List { json } => {
            let all = builtin_scenarios();
            if json {
                let arr: Vec<serde_json::Value> = all
                    .iter()
                    .map(|(name, _, desc)| serde_json::json!({"name": name, "description": desc}))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&arr).unwrap());
            } else {
                for (name, _, desc) in all {
                    println!("{name:<24} {desc}");
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Reproduce {
            scenario,
            config,
            seeds,
            master_seed,
            alphas,
            ratio,
            jobs,
            out,
            json,
        } => {
            let mut sc = match config {
                Some(path) => {
                    let text = match std::fs::read_to_string(&path) {
                        Ok(t) => t,
                        Err(e) => {
                            eprintln!("cannot read config {}: {e}", path.display());
                            return ExitCode::from(2);
                        }
                    };
                    match serde_json::from_str::<Scenario>(&text) {
                        Ok(s) => {
                            if s.name() != scenario {
                                eprintln!("config is for `{}`, requested `{scenario}`", s.name());
                                return ExitCode::from(2);
                            }
                            s
                        }
                        Err(e) => {
                            eprintln!("invalid config: {e}");
                            return ExitCode::from(2);
                        }
                    }
                }
                None => match builtin(&scenario) {
                    Some(s) => s,
                    None => {
                        eprintln!("unknown scenario `{scenario}`; known scenarios:");
                        for (name, _, _) in builtin_scenarios() {
                            eprintln!("  {name}");
                        }
                        return ExitCode::from(2);
                    }
                },
            };
            if let Err(msg) = apply_overrides(&mut sc, seeds, master_seed, &alphas, ratio) {
                eprintln!("{msg}");
                return ExitCode::from(2);
            }
            let jobs = jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let root = out_root(out);
            match runner::run_to_dir(&sc, jobs, &root) {
                Ok(run) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&run.outcome.summary()).unwrap()
                        );
                    } else {
                        for c in &run.outcome.checks {
                            println!(
                                "{} {}: {:.6} {} {:.6}",
                                if c.pass { "PASS" } else { "FAIL" },
                                c.name,
                                c.value,
                                c.op,
                                c.threshold
                            );
                        }
                        println!(
                            "{}: reports in {}",
                            if run.outcome.passed() { "ok" } else { "FAILED" },
                            run.dir.display()
                        );
                    }
                    if run.outcome.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(runner::RunnerError::Run(RunError::Resource(msg))) => {
                    eprintln!("resource cap exceeded: {msg}");
                    ExitCode::from(3)
                }
                Err(runner::RunnerError::Run(RunError::Config(msg))) => {
                    eprintln!("configuration error: {msg}");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(1)
                }
            }
        }
        Cmd::Verify { run_dir } => match manifest::verify_manifest(&run_dir) {
            Ok(bad) if bad.is_empty() => {
                println!("ok: all checksums match");
                ExitCode::SUCCESS
            }
            Ok(bad) => {
                eprintln!("checksum mismatch: {}", bad.join(", "));
                ExitCode::from(1)
            }
            Err(e) => {
                eprintln!("cannot verify {}: {e}", run_dir.display());
                ExitCode::from(2)
            }
        },
    }
}
