use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use degen_cli::acceptance::{run_acceptance, CRITERIA};
use degen_cli::checks::{self, Check};
use degen_cli::config::{ConfigError, ExperimentConfig};
use degen_cli::experiments::{forward, run};
use degen_cli::output::write_json;
use degen_cli::suite::{expand, run_suite};
use degen_core::inversion::PAPER_NOISE_LEVELS;
use degen_core::presets::{Preset, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "degen",
    version,
    about = "Coefficient identification for degenerate diffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Preset name: test1..test14 or custom.
    #[arg(long)]
    preset: Option<String>,
    /// Key-value config file; command-line flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Noise seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    /// Noise levels as fractions, 0.01 = 1% (comma separated).
    #[arg(long, value_delimiter = ',')]
    noise: Vec<f64>,
    #[arg(long)]
    ell: Option<f64>,
    #[arg(long)]
    t0: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem at the preset's true coefficient.
    Forward {
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Recover the coefficient of a preset.
    #[command(alias = "run")]
    Invert {
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Inversions over noise levels and seeds (default levels 1%..0.001% and 0).
    NoiseSweep {
        name: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Lipschitz stability grids and randomized stability quotients.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = checks::QUOTIENT_TRIALS)]
        trials: usize,
    },
    /// Weighted Poincare inequality on random admissible functions.
    Poincare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Boundedness of the one-dimensional Carleman ratio.
    Carleman {
        #[command(flatten)]
        common: Common,
    },
    /// Wave-kernel transform against the parabolic solver.
    ReznitskayaCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Run several presets, or the acceptance criteria.
    Suite {
        /// Presets to run; all of them when empty and no other selector is given.
        names: Vec<String>,
        #[command(flatten)]
        common: Common,
        /// Expand test8 and test9 over the ell sweep.
        #[arg(long)]
        ell_sweep: bool,
        /// Run acceptance criteria (all when no id is given) instead of presets.
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        acceptance: Option<Vec<u32>>,
    },
}

fn config(name: Option<String>, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(name.as_deref().or(c.preset.as_deref()).unwrap_or("test1")),
    };
    if let (Some(_), Some(n)) = (&c.config, name.or_else(|| c.preset.clone())) {
        cfg.preset = n;
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if !c.seed.is_empty() {
        cfg.seeds = c.seed.clone();
    }
    if !c.noise.is_empty() {
        cfg.noise = c.noise.clone();
    }
    cfg.nx = c.nx.or(cfg.nx);
    cfg.nt = c.nt.or(cfg.nt);
    cfg.ell = c.ell.or(cfg.ell);
    cfg.t0 = c.t0.or(cfg.t0);
    cfg.preset()?;
    Ok(cfg)
}

fn out_dir(c: &Common, default: &str) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("results").join(default))
}

fn report(checks: &[Check], dir: &Path) -> Result<bool> {
    checks::checks_table(checks).write(&dir.join("checks.csv"))?;
    for c in checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.pass))
}

fn print_rows(s: &degen_cli::experiments::RunSummary, dir: &Path) {
    for r in &s.rows {
        println!(
            "{} noise={}% seed={} cost={:.3e} iterations={} params={:?}",
            s.preset,
            r.noise * 100.0,
            r.seed,
            r.cost,
            r.iterations,
            r.params
        );
        for w in &r.warnings {
            println!("  warning: {w}");
        }
    }
    if let Some(c) = &s.check {
        println!("[{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    println!("artifacts in {}", dir.display());
}

fn jobs(cmd: &Command) -> usize {
    match cmd {
        Command::Forward { common, .. }
        | Command::Invert { common, .. }
        | Command::NoiseSweep { common, .. }
        | Command::Stability { common, .. }
        | Command::Poincare { common, .. }
        | Command::Carleman { common }
        | Command::ReznitskayaCheck { common }
        | Command::Suite { common, .. } => common.jobs,
    }
}

fn execute(cmd: Command) -> Result<bool> {
    let jobs = jobs(&cmd);
    if jobs > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cmd {
        Command::Forward { name, common } => {
            let cfg = config(name, &common)?;
            let s = forward(&cfg)?;
            if let Some(false) = s.contractive {
                println!("[FAIL] L2 norm grew by {:.3e}", s.max_violation.unwrap_or(0.0));
            }
            println!("final L2 norm {:.6e}; artifacts in {}", s.final_l2, cfg.out.display());
            Ok(s.contractive != Some(false))
        }
        Command::Invert { name, common } => {
            let cfg = config(name, &common)?;
            let s = run(&cfg)?;
            print_rows(&s, &cfg.out);
            Ok(s.check.is_none_or(|c| c.pass))
        }
        Command::NoiseSweep { name, common } => {
            let mut cfg = config(name, &common)?;
            if common.noise.is_empty() && common.config.is_none() {
                cfg.noise = PAPER_NOISE_LEVELS.to_vec();
            }
            if common.seed.is_empty() && common.config.is_none() {
                cfg.seeds = vec![1, 2, 3, 4, 5];
            }
            let s = run(&cfg)?;
            print_rows(&s, &cfg.out);
            Ok(s.check.is_none_or(|c| c.pass))
        }
        Command::Stability { common, trials } => {
            let dir = out_dir(&common, "stability");
            let (linear, power) = checks::lipschitz_grids()?;
            let mut table = checks::stability_table("linear", &linear);
            table.rows.extend(checks::stability_table("power", &power).rows);
            table.write(&dir.join("lipschitz.csv"))?;
            let preset = Preset::by_name(common.preset.as_deref().unwrap_or("test1"))?;
            let seed = common.seed.first().copied().unwrap_or(2024);
            let q = checks::quotients(&preset, trials, checks::QUOTIENT_EPS, seed)?;
            checks::quotient_table(&q).write(&dir.join("quotients.csv"))?;
            let mut out: Vec<Check> = linear
                .iter()
                .map(|r| ("linear", r))
                .chain(power.iter().map(|r| ("power", r)))
                .map(|(f, r)| {
                    Check::new(
                        format!("{f} ({}, {})", r.p1, r.p2),
                        r.pass,
                        format!("lhs {:.3e} <= C rhs {:.3e}", r.lhs, r.constant * r.rhs),
                    )
                })
                .collect();
            out.push(Check::new(
                "quotients",
                q.all_finite() && q.max_over_median() <= 20.0,
                format!("max/median {:.3}", q.max_over_median()),
            ));
            report(&out, &dir)
        }
        Command::Poincare { common, samples } => {
            let dir = out_dir(&common, "poincare");
            let seed = common.seed.first().copied().unwrap_or(13);
            let rs = checks::poincare_sweep(&checks::POINCARE_ALPHAS, samples, seed)?;
            checks::poincare_table(&rs).write(&dir.join("poincare.csv"))?;
            let out: Vec<Check> = rs
                .iter()
                .map(|r| {
                    Check::new(
                        format!("alpha = {}", r.alpha),
                        r.pass,
                        format!("max ratio {:.4} vs C_p {:.4}", r.max_ratio, r.constant),
                    )
                })
                .collect();
            report(&out, &dir)
        }
        Command::Carleman { common } => {
            let dir = out_dir(&common, "carleman");
            let rs = checks::carleman_reports()?;
            checks::carleman_table(&rs).write(&dir.join("carleman.csv"))?;
            let out: Vec<Check> = rs
                .iter()
                .map(|(f, r)| {
                    Check::new(
                        format!("f = {f}"),
                        r.pass,
                        format!("ratio at 2 s_max {:.3e}", r.ratio_at_double),
                    )
                })
                .collect();
            report(&out, &dir)
        }
        Command::ReznitskayaCheck { common } => {
            let dir = out_dir(&common, "reznitskaya");
            let runs = checks::equivalence_runs()?;
            let defects = checks::lemma2_defects()?;
            checks::equivalence_table(&runs, &defects).write(&dir.join("equivalence.csv"))?;
            let mut out: Vec<Check> = runs
                .iter()
                .map(|r| {
                    Check::new(
                        format!("{} t={}", r.case, r.t),
                        r.rel_error <= r.tolerance,
                        format!("relative error {:.3e}", r.rel_error),
                    )
                })
                .collect();
            out.extend(
                defects
                    .iter()
                    .map(|(n, d)| Check::new(format!("identity eta={n}"), *d <= 1e-4, format!("defect {d:.3e}"))),
            );
            report(&out, &dir)
        }
        Command::Suite {
            names,
            common,
            ell_sweep,
            acceptance,
        } => {
            let root = out_dir(&common, "suite");
            if let Some(ids) = acceptance {
                let ids: Vec<u32> = if ids.is_empty() {
                    CRITERIA.iter().map(|c| c.0).collect()
                } else {
                    ids
                };
                let r = run_acceptance(&ids, &root, |c| println!("{}", c.line()));
                r.table().write(&root.join("acceptance.csv"))?;
                write_json(&root.join("acceptance.json"), &r)?;
                let failing = r.criteria.iter().filter(|c| !c.pass()).count();
                println!(
                    "{} of {} criteria passed in {:.1} s ({} unexpected failing checks)",
                    r.criteria.len() - failing,
                    r.criteria.len(),
                    r.total_s,
                    r.unexpected_failures()
                );
                return Ok(failing == 0);
            }
            let names: Vec<String> = if names.is_empty() && common.preset.is_none() && common.config.is_none() {
                PRESET_NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                names
            };
            let base = config(common.preset.clone(), &common)?;
            let names = if names.is_empty() {
                vec![base.preset.clone()]
            } else {
                names
            };
            for n in &names {
                ExperimentConfig {
                    preset: n.clone(),
                    ..base.clone()
                }
                .preset()?;
            }
            let entries = expand(&names, &base, ell_sweep);
            let jobs = if jobs == 0 {
                std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
            } else {
                jobs
            };
            let r = run_suite(&entries, &root, jobs)?;
            for row in &r.rows {
                let tag = match row.pass {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "----",
                };
                println!("[{tag}] {}: {}", row.label, row.detail);
            }
            Ok(r.success())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
