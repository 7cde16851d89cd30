use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use helene_core::fortuna::Fortuna;
use helene_core::harness::{bench, campaign, scenario, ScenarioConfig};
use helene_core::nist::{run_suite, NistParams};

#[derive(Parser)]
#[command(name = "helene", version, about = "Scenario, benchmark and randomness-testing runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scripted marketplace runs.
    Scenario {
        #[arg(value_enum)]
        which: ScenarioKind,
        /// TOML config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Virtual-time benchmarks.
    Bench {
        #[command(subcommand)]
        which: BenchCmd,
    },
    /// NIST SP 800-22 campaign over Fortuna output.
    Nist(NistArgs),
    /// Fortuna output.
    Fortuna {
        #[command(subcommand)]
        which: FortunaCmd,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ScenarioKind {
    E2e,
    Incentive,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Sequential transfers against one batch transfer.
    Batch {
        #[arg(long, default_value_t = bench::BATCH_LEGS)]
        legs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Adds a wall-clock column; output is then no longer reproducible.
        #[arg(long)]
        wall_time: bool,
    },
    /// Oracle finalization time across node counts and payload sizes.
    Oracle {
        #[arg(long, value_delimiter = ',', default_values_t = bench::ORACLE_NODE_COUNTS)]
        nodes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = bench::ORACLE_PAYLOAD_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = bench::ORACLE_REQUESTS)]
        requests: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        wall_time: bool,
    },
}

#[derive(Args)]
struct NistArgs {
    #[command(subcommand)]
    run: Option<NistCmd>,
    #[command(flatten)]
    common: NistCommon,
    #[arg(long, default_value_t = campaign::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct NistCommon {
    #[arg(long, default_value_t = campaign::DEFAULT_SEQUENCES)]
    sequences: usize,
    #[arg(long, default_value_t = campaign::DEFAULT_BITS)]
    bits: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Markdown summary table.
    #[arg(long)]
    markdown: Option<PathBuf>,
}

#[derive(Subcommand)]
enum NistCmd {
    /// Runs the suite on existing files instead of generating them.
    Run {
        #[arg(long)]
        input_dir: PathBuf,
        #[command(flatten)]
        common: NistCommon,
    },
}

#[derive(Subcommand)]
enum FortunaCmd {
    /// Raw bytes; written to --out as binary, else printed as hex.
    Gen {
        #[arg(long)]
        bytes: usize,
        #[arg(long)]
        seed_hex: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Password {
        #[arg(long)]
        seed_hex: Option<String>,
    },
    Challenge {
        #[arg(long)]
        seed_hex: Option<String>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `Ok(false)` means the run completed but a check failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Scenario { which, config, seed } => {
            let mut cfg = match &config {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (lines, failure) = match which {
                ScenarioKind::E2e => {
                    let r = scenario::e2e(&cfg);
                    (r.transcript, r.outcome.err())
                }
                ScenarioKind::Incentive => {
                    let r = scenario::incentive(&cfg);
                    (r.transcript, r.outcome.err())
                }
            };
            let mut out = std::io::stdout().lock();
            for l in &lines {
                writeln!(out, "{l}")?;
            }
            match failure {
                None => {
                    writeln!(out, "OK")?;
                    Ok(true)
                }
                Some(f) => {
                    writeln!(out, "FAILED {f}")?;
                    eprintln!("{f}");
                    Ok(false)
                }
            }
        }
        Cmd::Bench { which } => match which {
            BenchCmd::Batch { legs, out, wall_time } => {
                let r = bench::batch(legs)?;
                write_out(&out, &r.to_csv(wall_time))?;
                Ok(true)
            }
            BenchCmd::Oracle {
                nodes,
                sizes,
                requests,
                seed,
                out,
                wall_time,
            } => {
                let r = bench::oracle(&nodes, &sizes, requests, seed)?;
                write_out(&out, &r.to_csv(wall_time))?;
                let bad = r.monotonicity_violations();
                for b in &bad {
                    eprintln!("ordering violated: {b}");
                }
                Ok(bad.is_empty())
            }
        },
        Cmd::Nist(args) => nist(args),
        Cmd::Fortuna { which } => fortuna(which),
    }
}

fn params(alpha: f64) -> Result<NistParams> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("alpha must be in (0, 1)");
    }
    Ok(NistParams {
        alpha,
        ..NistParams::default()
    })
}

fn nist(args: NistArgs) -> Result<bool> {
    let (report, verdict, common) = match args.run {
        Some(NistCmd::Run { input_dir, common }) => {
            let mut seqs = campaign::load_dir(&input_dir, Some(common.bits))?;
            seqs.truncate(common.sequences);
            let report = run_suite(&seqs, &params(common.alpha)?);
            let verdict = campaign::evaluate(&report);
            (report, verdict, common)
        }
        None => {
            let c = args.common;
            let camp = campaign::run(args.seed, c.sequences, c.bits, &params(c.alpha)?)?;
            for r in &camp.runs[..camp.runs.len() - 1] {
                eprintln!("seed {} failed ({}); rerunning once", r.seed, r.verdict.failures.join("; "));
            }
            let last = camp.runs.last().expect("one run").clone();
            (last.report, last.verdict, c)
        }
    };
    write_out(&common.out, &report.to_csv())?;
    let md = format!(
        "{}\nMedian proportion: {:.4}\nVerdict: {}\n",
        report.to_markdown(),
        report.median_proportion(),
        if verdict.pass { "PASS" } else { "FAIL" }
    );
    match &common.markdown {
        Some(p) => fs::write(p, &md).with_context(|| format!("writing {}", p.display()))?,
        None if common.out.is_some() => print!("{md}"),
        None => {}
    }
    for f in &verdict.failures {
        eprintln!("{f}");
    }
    Ok(verdict.pass)
}

fn fortuna_from(seed_hex: &Option<String>) -> Result<Fortuna> {
    Ok(match seed_hex {
        Some(h) => Fortuna::from_seed(&hex::decode(h).context("--seed-hex")?)?,
        None => Fortuna::from_host_entropy(),
    })
}

fn fortuna(which: FortunaCmd) -> Result<bool> {
    match which {
        FortunaCmd::Gen { bytes, seed_hex, out } => {
            let mut f = fortuna_from(&seed_hex)?;
            let mut buf = vec![0u8; bytes];
            f.fill(&mut buf)?;
            match out {
                Some(p) => write_bytes(&p, &buf)?,
                None => println!("{}", hex::encode(&buf)),
            }
        }
        FortunaCmd::Password { seed_hex } => println!("{}", fortuna_from(&seed_hex)?.random_password()?),
        FortunaCmd::Challenge { seed_hex } => println!("{}", fortuna_from(&seed_hex)?.random_challenge()?),
    }
    Ok(true)
}

fn write_bytes(p: &Path, data: &[u8]) -> Result<()> {
    fs::write(p, data).with_context(|| format!("writing {}", p.display()))
}
