use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use critlab::circle_maps::Family;
use critlab::rotation::{estimate_rho, tune_parameter};
use critlab::Dd;
use critlab_cli::acceptance::{self, SuiteOptions};
use critlab_cli::config::{FamilyName, MapConfig, ThetaConfig, ThetaKind, PRECISION_ENV};
use critlab_cli::experiments::{run, Scalar};
use critlab_cli::report::freeze_baseline;
use critlab_cli::{Baseline, ExperimentConfig, Precision};
use serde_json::json;

/// Experiments on critical circle maps and unimodal renormalization.
#[derive(Parser)]
#[command(name = "critlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Freeze the regression constants of a report into a baseline.
    Freeze {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to `<report>.baseline.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Run the acceptance suite and print the summary table.
    Acceptance {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Baseline to gate regressions against; defaults to the bundled one.
        #[arg(long, conflicts_with = "no_baseline")]
        baseline: Option<PathBuf>,
        /// Skip regression gating (for bootstrapping a baseline).
        #[arg(long)]
        no_baseline: bool,
        /// Skip the second run of the determinism criterion.
        #[arg(long)]
        no_determinism: bool,
    },
    /// Rotation-number tools printing JSON records.
    #[command(subcommand)]
    Rotation(RotationCommand),
}

#[derive(Subcommand)]
enum RotationCommand {
    /// Estimate ρ(f_ω) with a certified bracket.
    Estimate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        omega: f64,
        #[arg(long, default_value_t = 1_000_000)]
        iterates: u64,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
    },
    /// Find ω with ρ(f_ω) = θ to within a tolerance.
    Tune {
        #[command(flatten)]
        family: FamilyArgs,
        /// golden, silver, bounded:A, quotients:A,B,... or value:X
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 40)]
        depth: usize,
    },
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    c2: Option<f64>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FamilyArg {
    Rigid,
    Arnold,
    Bicritical,
    Blaschke,
}

impl FamilyArgs {
    fn family(&self) -> anyhow::Result<Family> {
        let family = match self.family {
            FamilyArg::Rigid => FamilyName::Rigid,
            FamilyArg::Arnold => FamilyName::Arnold,
            FamilyArg::Bicritical => FamilyName::Bicritical,
            FamilyArg::Blaschke => FamilyName::Blaschke,
        };
        let mc = MapConfig {
            family,
            c2: self.c2,
            omega: None,
            tune_tol: 1e-12,
        };
        Ok(mc.family()?)
    }
}

fn parse_target(s: &str, depth: usize) -> anyhow::Result<ThetaConfig> {
    let mut t = ThetaConfig::golden(depth);
    let (head, arg) = s.split_once(':').unwrap_or((s, ""));
    match head {
        "golden" => {}
        "silver" => t.kind = ThetaKind::Silver,
        "bounded" => {
            t.kind = ThetaKind::Bounded;
            t.a = Some(arg.parse().context("bounded:A needs an integer A")?);
        }
        "quotients" => {
            t.kind = ThetaKind::Quotients;
            let qs = arg.split(',').map(|x| x.trim().parse()).collect::<Result<Vec<u64>, _>>();
            t.quotients = Some(qs.context("quotients:A,B,... needs integers")?);
        }
        "value" => {
            t.kind = ThetaKind::Value;
            t.value = Some(arg.to_string());
        }
        other => bail!("unknown target {other:?}"),
    }
    Ok(t)
}

fn env_precision() -> anyhow::Result<Precision> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) if !v.trim().is_empty() => Ok(v.parse()?),
        _ => Ok(Precision::F64),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn estimate<T: Scalar>(fam: Family, omega: f64, iterates: u64, x0: f64) -> anyhow::Result<()> {
    let m = fam.build(T::of(omega))?;
    let e = estimate_rho(&m, T::of(x0), iterates, true);
    print_json(&json!({
        "family": fam,
        "omega": omega,
        "precision": T::NAME,
        "estimate": e,
        "bracket_width": e.upper - e.lower,
    }));
    Ok(())
}

fn tune<T: Scalar>(fam: Family, target: &ThetaConfig, tol: f64) -> anyhow::Result<()> {
    let theta = target.build::<T>()?;
    let t = tune_parameter(|w| fam.build(w), &theta, tol, None)?;
    print_json(&json!({
        "family": fam,
        "precision": T::NAME,
        "theta": theta.value().as_f64(),
        "tuned": t,
        "bracket_width": t.bracket_width(),
    }));
    Ok(())
}

fn main_inner() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?.with_env_precision()?;
            if let Some(d) = out_dir {
                cfg.output.dir = d;
            }
            let art = run(&cfg)?;
            for p in art.write(&cfg.output.dir, &cfg.stem())? {
                eprintln!("wrote {}", p.display());
            }
            let r = &art.report;
            for f in r.hard_failures.iter().chain(&r.soft_failures) {
                eprintln!("FAIL {f}");
            }
            if let Some(c) = &r.baseline {
                for e in c.entries.iter().filter(|e| !e.within) {
                    let tag = if c.gated { "MISMATCH" } else { "DRIFT" };
                    eprintln!("{tag} {}: {} vs baseline {} (rel {:.2e})", e.name, e.current, e.baseline, e.rel_diff);
                }
                for m in &c.missing {
                    eprintln!("MISSING {m}");
                }
            }
            Ok(!r.failed())
        }
        Command::Freeze { report, out, force } => {
            let p = freeze_baseline(&report, out.as_deref(), force)?;
            eprintln!("wrote {}", p.display());
            Ok(true)
        }
        Command::Acceptance {
            out_dir,
            baseline,
            no_baseline,
            no_determinism,
        } => {
            let baseline = match (baseline, no_baseline) {
                (_, true) => None,
                (Some(p), false) => Some(Baseline::load(&p)?),
                (None, false) => Some(acceptance::embedded_baseline()?),
            };
            let opts = SuiteOptions {
                baseline,
                determinism: !no_determinism,
            };
            let suite = acceptance::run_suite_with(&opts, |c| println!("{}", c.line()))?;
            print!("\n{}", suite.table());
            let art = suite.artifacts();
            if let Some(d) = out_dir {
                for p in art.write(&d, "acceptance")? {
                    eprintln!("wrote {}", p.display());
                }
            }
            Ok(!art.report.failed())
        }
        Command::Rotation(rc) => {
            let precision = env_precision()?;
            match rc {
                RotationCommand::Estimate {
                    family,
                    omega,
                    iterates,
                    x0,
                } => {
                    let fam = family.family()?;
                    match precision {
                        Precision::F64 => estimate::<f64>(fam, omega, iterates, x0)?,
                        Precision::Dd => estimate::<Dd>(fam, omega, iterates, x0)?,
                    }
                }
                RotationCommand::Tune {
                    family,
                    target,
                    tol,
                    depth,
                } => {
                    let fam = family.family()?;
                    let t = parse_target(&target, depth)?;
                    match precision {
                        Precision::F64 => tune::<f64>(fam, &t, tol)?,
                        Precision::Dd => tune::<Dd>(fam, &t, tol)?,
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
