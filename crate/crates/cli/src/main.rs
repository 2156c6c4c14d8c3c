use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hetnet_ce::harness::{
    oracle_check, run_experiment, sensitivity_sweep, ExperimentPlan, ExperimentResult, MethodSpec,
    SweepGrid,
};
use hetnet_ce::netmodel::{compute_link_gains, generate_deployment};
use hetnet_ce::output::ResultWriter;
use hetnet_ce::overrides::{resolve, Override};
use hetnet_ce::scenario::ScenarioConfig;
use hetnet_ce::{Error, Result};

/// Cross-entropy user association experiments for two-tier HetNets.
#[derive(Parser)]
#[command(name = "hetnet-ce", version)]
struct Cli {
    /// Suppress tables and progress output.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file. Built-in defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set scenario.n_users=60`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one deployment and print its checksum.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Deployment seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; without it the deployment JSON goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment plan and write all artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        plan: PlanFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several methods on common drops and print a comparison table.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        plan: PlanFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CEAS sensitivity sweep over sample size, elite count and smoothing.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        plan: PlanFlags,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_samples: Vec<usize>,
        /// Comma-separated elite counts.
        #[arg(long, value_delimiter = ',')]
        n_elites: Vec<usize>,
        /// Comma-separated smoothing factors.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare CEAS against exhaustive search on small instances.
    ///
    /// Without --config the scenario defaults to 6 users and 2 small cells.
    OracleCheck {
        #[command(flatten)]
        common: Common,
        /// Base seed for the drops.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of drops to check.
        #[arg(long, default_value_t = 100)]
        drops: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct PlanFlags {
    /// Base seed; drop seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of drops.
    #[arg(long)]
    drops: Option<usize>,
    /// Comma-separated methods: ceas, max_sinr, dual, oracle.
    #[arg(long)]
    methods: Option<String>,
}

impl PlanFlags {
    fn overrides(&self) -> Result<Vec<Override>> {
        let mut out = Vec::new();
        if let Some(s) = self.seed {
            out.push(Override::parse(&format!("base_seed={s}"))?);
        }
        if let Some(d) = self.drops {
            out.push(Override::parse(&format!("n_drops={d}"))?);
        }
        if let Some(list) = &self.methods {
            let methods = MethodSpec::parse_list(list)?;
            if methods.is_empty() {
                return Err(Error::Config("--methods is empty".into()));
            }
            out.push(Override {
                path: vec!["methods".into()],
                value: serde_json::to_value(methods)?,
                raw: format!("--methods {list}"),
            });
        }
        Ok(out)
    }
}

fn read_doc(path: Option<&Path>) -> Result<Option<Value>> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(Some(doc))
}

fn parse_sets(sets: &[String]) -> Result<Vec<Override>> {
    sets.iter().map(|s| Override::parse(s)).collect()
}

struct Loaded<T> {
    value: T,
    doc: Value,
    overrides: Vec<String>,
}

fn load_plan(
    common: &Common,
    extra: Vec<Override>,
    default: ExperimentPlan,
) -> Result<Loaded<ExperimentPlan>> {
    let doc = match read_doc(common.config.as_deref())? {
        Some(d) => d,
        None => serde_json::to_value(default)?,
    };
    let mut ovs = parse_sets(&common.set)?;
    ovs.extend(extra);
    let (plan, doc): (ExperimentPlan, Value) = resolve(doc, &ovs)?;
    plan.validate()?;
    Ok(Loaded {
        value: plan,
        doc,
        overrides: ovs.into_iter().map(|o| o.raw).collect(),
    })
}

/// A config for `generate` may be a bare scenario or a whole plan.
fn load_scenario(common: &Common) -> Result<Loaded<ScenarioConfig>> {
    let doc = match read_doc(common.config.as_deref())? {
        Some(Value::Object(mut m)) if m.contains_key("scenario") => {
            m.remove("scenario").unwrap_or(Value::Null)
        }
        Some(d) => d,
        None => serde_json::to_value(ScenarioConfig::default())?,
    };
    let ovs = parse_sets(&common.set)?;
    let (cfg, doc): (ScenarioConfig, Value) = resolve(doc, &ovs)?;
    cfg.validate()?;
    Ok(Loaded {
        value: cfg,
        doc,
        overrides: ovs.into_iter().map(|o| o.raw).collect(),
    })
}

fn write_effective(
    dir: &Path,
    command: &str,
    common: &Common,
    doc: &Value,
    overrides: &[String],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let snapshot = json!({
        "command": command,
        "config_file": common.config.as_ref().map(|p| p.display().to_string()),
        "overrides": overrides,
        "config": doc,
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(
        dir.join("effective_config.json"),
        serde_json::to_string_pretty(&snapshot)? + "\n",
    )?;
    Ok(())
}

fn print_table(result: &ExperimentResult) {
    println!(
        "{:<20} {:>12} {:>14} {:>10} {:>6} {:>7}",
        "method", "utility", "rate (Mbps)", "MBS share", "ok", "failed"
    );
    for a in &result.aggregates {
        println!(
            "{:<20} {:>12.4} {:>14.4} {:>9.1}% {:>6} {:>7}",
            a.method,
            a.mean_utility,
            a.mean_rate_bps / 1e6,
            a.load_share.mbs_share_pct,
            a.n_ok,
            a.n_failed
        );
    }
    if let (Some(c), Some(m)) = (result.aggregate("ceas"), result.aggregate("max_sinr")) {
        if c.n_ok > 0 && m.n_ok > 0 && m.mean_utility != 0.0 {
            println!(
                "utility ratio ceas/max_sinr: {:.4}",
                c.mean_utility / m.mean_utility
            );
        }
    }
}

fn report_failures(result: &ExperimentResult) -> bool {
    let failed: Vec<_> = result.records.iter().filter(|r| !r.is_ok()).collect();
    for r in failed.iter().take(5) {
        eprintln!(
            "drop {} {}: {}",
            r.drop,
            r.method,
            r.error.as_deref().unwrap_or("failed")
        );
    }
    if failed.len() > 5 {
        eprintln!("... {} more failures", failed.len() - 5);
    }
    failed.is_empty()
}

fn experiment(
    name: &str,
    common: &Common,
    flags: &PlanFlags,
    out: Option<&Path>,
    quiet: bool,
) -> Result<bool> {
    let loaded = load_plan(common, flags.overrides()?, ExperimentPlan::default())?;
    let plan = &loaded.value;
    if !quiet {
        eprintln!(
            "{} drops, {} users, {} base stations, methods: {}",
            plan.n_drops,
            plan.scenario.n_users,
            plan.scenario.n_bs(),
            plan.methods
                .iter()
                .map(MethodSpec::name)
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    let result = match out {
        Some(dir) => {
            write_effective(dir, name, common, &loaded.doc, &loaded.overrides)?;
            let mut w = ResultWriter::create(dir, plan.scenario.n_sbs)?;
            run_experiment(plan, Some(&mut w))?
        }
        None => run_experiment(plan, None)?,
    };
    if !quiet {
        print_table(&result);
    }
    Ok(report_failures(&result))
}

fn run(cli: Cli) -> Result<bool> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Generate { common, seed, out } => {
            let loaded = load_scenario(&common)?;
            let dep = generate_deployment(&loaded.value, seed)?;
            let gains = compute_link_gains(&dep)?;
            let checksum = dep.checksum();
            match out {
                Some(dir) => {
                    write_effective(&dir, "generate", &common, &loaded.doc, &loaded.overrides)?;
                    fs::write(dir.join("deployment.json"), dep.to_json() + "\n")?;
                    println!("{checksum}");
                    if !quiet {
                        eprintln!("gains checksum {}", gains.checksum());
                        eprintln!("wrote {}", dir.join("deployment.json").display());
                    }
                }
                None => {
                    println!("{}", dep.to_json());
                    if !quiet {
                        eprintln!("checksum {checksum}");
                    }
                }
            }
            Ok(true)
        }
        Command::Run { common, plan, out } => experiment("run", &common, &plan, Some(&out), quiet),
        Command::Compare { common, plan, out } => {
            experiment("compare", &common, &plan, out.as_deref(), quiet)
        }
        Command::Sweep {
            common,
            plan,
            n_samples,
            n_elites,
            alpha,
            out,
        } => {
            let mut extra = plan.overrides()?;
            if !(n_samples.is_empty() && n_elites.is_empty() && alpha.is_empty()) {
                let grid = SweepGrid {
                    n_samples,
                    n_elites,
                    smoothing_alpha: alpha,
                };
                extra.push(Override {
                    path: vec!["sweep".into()],
                    value: serde_json::to_value(&grid)?,
                    raw: format!("--sweep {}", serde_json::to_string(&grid)?),
                });
            }
            let loaded = load_plan(&common, extra, ExperimentPlan::default())?;
            if loaded.value.sweep.is_none() {
                return Err(Error::Config(
                    "no sweep grid; set `sweep` or pass --n-samples/--n-elites/--alpha".into(),
                ));
            }
            write_effective(&out, "sweep", &common, &loaded.doc, &loaded.overrides)?;
            let mut w = ResultWriter::create(&out, loaded.value.scenario.n_sbs)?;
            let cells = sensitivity_sweep(&loaded.value, Some(&mut w))?;
            if !quiet {
                println!(
                    "{:>9} {:>8} {:>6} {:>14} {:>12} {:>12}",
                    "n_samples",
                    "n_elites",
                    "alpha",
                    "final utility",
                    "conv (mean)",
                    "conv (curve)"
                );
                for c in &cells {
                    println!(
                        "{:>9} {:>8} {:>6} {:>14.4} {:>12.2} {:>12}",
                        c.n_samples,
                        c.n_elites,
                        c.smoothing_alpha,
                        c.mean_final_utility,
                        c.mean_convergence_iteration,
                        c.curve_convergence_iteration
                    );
                }
            }
            Ok(true)
        }
        Command::OracleCheck {
            common,
            seed,
            drops,
            out,
        } => {
            let default = ExperimentPlan {
                scenario: ScenarioConfig {
                    n_users: 6,
                    n_sbs: 2,
                    ..ScenarioConfig::default()
                },
                methods: vec![MethodSpec::ceas(), MethodSpec::oracle()],
                ..ExperimentPlan::default()
            };
            let mut extra = Vec::new();
            if let Some(s) = seed {
                extra.push(Override::parse(&format!("base_seed={s}"))?);
            }
            let loaded = load_plan(&common, extra, default)?;
            let check = oracle_check(&loaded.value, drops)?;
            if let Some(dir) = &out {
                write_effective(dir, "oracle-check", &common, &loaded.doc, &loaded.overrides)?;
                fs::write(
                    dir.join("oracle_check.json"),
                    serde_json::to_string_pretty(&check)? + "\n",
                )?;
            }
            if !quiet {
                println!(
                    "{:>5} {:>20} {:>12} {:>12} {:>10}",
                    "drop", "seed", "oracle", "ceas", "gap"
                );
                for g in &check.per_drop {
                    println!(
                        "{:>5} {:>20} {:>12.4} {:>12.4} {:>10.2e}",
                        g.drop, g.drop_seed, g.oracle_utility, g.ceas_utility, g.gap
                    );
                }
            }
            println!(
                "within 1%: {}/{} ({:.1}%)",
                check.within_1pct,
                check.per_drop.len(),
                100.0 * check.fraction_within_1pct
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
