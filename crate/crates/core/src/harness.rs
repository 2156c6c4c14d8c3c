//! Seeded Monte-Carlo experiments over random drops.
//!
//! Drop `d` of a plan uses deployment seed `derive_seed(base_seed, [d])`,
//! independent of which methods run, so method sets can change without
//! changing the drops. Every method within a drop sees the same link tables.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{bs_loads, evaluate_utility, is_feasible, user_rates, Association, LoadCaps};
use crate::baselines::{
    candidate_count, dual_subgradient_assoc, exhaustive_search, max_sinr_assoc, max_sinr_repaired,
    DualConfig, DEFAULT_ENUMERATION_BUDGET,
};
use crate::ce::{ceas_run, CEConfig, CERunTrace};
use crate::error::{Error, Result};
use crate::netmodel::{compute_link_gains, generate_deployment, LinkGains, Tier};
use crate::output::ResultWriter;
use crate::scenario::ScenarioConfig;
use crate::seed::derive_seed;

fn default_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MethodSpec {
    Ceas {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        config: CEConfig,
    },
    MaxSinr {
        #[serde(default)]
        label: Option<String>,
    },
    Dual {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        config: DualConfig,
    },
    Oracle {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_budget")]
        budget: u64,
    },
}

impl MethodSpec {
    pub fn ceas() -> Self {
        MethodSpec::Ceas {
            label: None,
            config: CEConfig::default(),
        }
    }

    pub fn max_sinr() -> Self {
        MethodSpec::MaxSinr { label: None }
    }

    pub fn dual(config: DualConfig) -> Self {
        MethodSpec::Dual {
            label: None,
            config,
        }
    }

    pub fn oracle() -> Self {
        MethodSpec::Oracle {
            label: None,
            budget: DEFAULT_ENUMERATION_BUDGET,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MethodSpec::Ceas { .. } => "ceas",
            MethodSpec::MaxSinr { .. } => "max_sinr",
            MethodSpec::Dual { .. } => "dual",
            MethodSpec::Oracle { .. } => "oracle",
        }
    }

    /// Name used in records; the explicit label when given.
    pub fn name(&self) -> String {
        let label = match self {
            MethodSpec::Ceas { label, .. }
            | MethodSpec::MaxSinr { label }
            | MethodSpec::Dual { label, .. }
            | MethodSpec::Oracle { label, .. } => label,
        };
        label.clone().unwrap_or_else(|| self.kind().to_string())
    }

    /// Parses a comma-separated list such as `ceas,max_sinr,dual`.
    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "ceas" => Ok(Self::ceas()),
                "max_sinr" | "max-sinr" => Ok(Self::max_sinr()),
                "dual" => Ok(Self::dual(DualConfig::default())),
                "oracle" => Ok(Self::oracle()),
                other => Err(Error::Config(format!("unknown method {other:?}"))),
            })
            .collect()
    }
}

/// Grid for sensitivity sweeps. An empty axis keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub n_samples: Vec<usize>,
    pub n_elites: Vec<usize>,
    pub smoothing_alpha: Vec<f64>,
}

impl SweepGrid {
    pub fn cells(&self, base: &CEConfig) -> Vec<CEConfig> {
        fn axis<T: Copy>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for &s in &axis(&self.n_samples, base.n_samples) {
            for &e in &axis(&self.n_elites, base.n_elites) {
                for &a in &axis(&self.smoothing_alpha, base.smoothing_alpha) {
                    out.push(CEConfig {
                        n_samples: s,
                        n_elites: e,
                        smoothing_alpha: a,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: ScenarioConfig,
    pub methods: Vec<MethodSpec>,
    pub n_drops: usize,
    pub base_seed: u64,
    pub sweep: Option<SweepGrid>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            methods: vec![
                MethodSpec::ceas(),
                MethodSpec::max_sinr(),
                MethodSpec::dual(DualConfig::default()),
            ],
            n_drops: 50,
            base_seed: 2018,
            sweep: None,
        }
    }
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.n_drops == 0 {
            return Err(Error::Config("n_drops must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods list is empty".into()));
        }
        for m in &self.methods {
            match m {
                MethodSpec::Ceas { config, .. } => config.validate()?,
                MethodSpec::Dual { config, .. } => config.validate()?,
                MethodSpec::Oracle { budget, .. } => {
                    let n = candidate_count(self.scenario.n_users, self.scenario.n_bs());
                    if n > *budget as f64 {
                        return Err(Error::Config(format!(
                            "oracle needs {n} candidates (J^I), over the enumeration budget {budget}"
                        )));
                    }
                }
                MethodSpec::MaxSinr { .. } => {}
            }
        }
        let mut names: Vec<String> = self.methods.iter().map(MethodSpec::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(
                "method names must be unique; add labels".into(),
            ));
        }
        if let Some(grid) = &self.sweep {
            for c in grid.cells(&self.base_ce_config()) {
                c.validate()?;
            }
        }
        Ok(())
    }

    /// CE config of the first CEAS method, or the defaults.
    pub fn base_ce_config(&self) -> CEConfig {
        self.methods
            .iter()
            .find_map(|m| match m {
                MethodSpec::Ceas { config, .. } => Some(config.clone()),
                _ => None,
            })
            .unwrap_or_default()
    }

    pub fn drop_seed(&self, drop: usize) -> u64 {
        derive_seed(self.base_seed, &[drop as u64])
    }
}

/// One method's outcome on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub drop: usize,
    pub drop_seed: u64,
    pub method: String,
    pub gains_checksum: String,
    /// `None` when the method failed or the utility is undefined.
    pub utility: Option<f64>,
    pub mean_rate_bps: f64,
    pub per_user_rates: Vec<f64>,
    pub bs_loads: Vec<usize>,
    pub bs_tiers: Vec<Tier>,
    pub association: Vec<usize>,
    pub feasible: bool,
    pub runtime_ms: f64,
    #[serde(default)]
    pub trace_file: Option<String>,
    #[serde(default)]
    pub error: Option<String>,
}

impl DropRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn macro_load(&self) -> usize {
        self.bs_loads
            .iter()
            .zip(&self.bs_tiers)
            .filter(|(_, t)| **t == Tier::Macro)
            .map(|(l, _)| l)
            .sum()
    }

    pub fn small_loads(&self) -> Vec<usize> {
        self.bs_loads
            .iter()
            .zip(&self.bs_tiers)
            .filter(|(_, t)| **t == Tier::Small)
            .map(|(l, _)| *l)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadShare {
    pub mbs_share_pct: f64,
    pub sbs_share_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAggregate {
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_utility: f64,
    pub mean_rate_bps: f64,
    pub load_share: LoadShare,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<DropRecord>,
    pub aggregates: Vec<MethodAggregate>,
    #[serde(skip)]
    pub traces: Vec<(usize, String, CERunTrace)>,
}

impl ExperimentResult {
    pub fn aggregate(&self, method: &str) -> Option<&MethodAggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn records_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a DropRecord> + 'a {
        self.records.iter().filter(move |r| r.method == method)
    }

    pub fn all_ok(&self) -> bool {
        self.records.iter().all(DropRecord::is_ok)
    }
}

/// Method names in order of first appearance.
fn method_order(records: &[DropRecord]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in records {
        if !names.contains(&r.method) {
            names.push(r.method.clone());
        }
    }
    names
}

/// Macro/small user shares averaged over successful drops, per method.
pub fn load_shares(records: &[DropRecord]) -> Vec<(String, LoadShare)> {
    method_order(records)
        .into_iter()
        .map(|m| {
            let fracs: Vec<f64> = records
                .iter()
                .filter(|r| r.method == m && r.is_ok())
                .filter_map(|r| {
                    let total: usize = r.bs_loads.iter().sum();
                    (total > 0).then(|| r.macro_load() as f64 / total as f64)
                })
                .collect();
            let mbs = if fracs.is_empty() {
                0.0
            } else {
                100.0 * fracs.iter().sum::<f64>() / fracs.len() as f64
            };
            (
                m,
                LoadShare {
                    mbs_share_pct: mbs,
                    sbs_share_pct: 100.0 - mbs,
                },
            )
        })
        .collect()
}

/// Empirical CDF over all per-user rates pooled across drops.
/// Returns `(rate_bps, fraction <= rate)` at each distinct rate.
pub fn rate_cdf(records: &[&DropRecord]) -> Result<Vec<(f64, f64)>> {
    let mut pool: Vec<f64> = records
        .iter()
        .filter(|r| r.is_ok())
        .flat_map(|r| r.per_user_rates.iter().copied())
        .collect();
    if pool.is_empty() {
        return Err(Error::Contract("rate CDF of an empty pool".into()));
    }
    pool.sort_by(f64::total_cmp);
    let n = pool.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (k, &r) in pool.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 = frac,
            _ => out.push((r, frac)),
        }
    }
    Ok(out)
}

/// Recomputes per-method aggregates from drop records.
pub fn aggregate(records: &[DropRecord]) -> Vec<MethodAggregate> {
    let shares = load_shares(records);
    method_order(records)
        .into_iter()
        .zip(shares)
        .map(|(m, (_, share))| {
            let ok: Vec<&DropRecord> = records
                .iter()
                .filter(|r| r.method == m && r.is_ok())
                .collect();
            let n_failed = records
                .iter()
                .filter(|r| r.method == m && !r.is_ok())
                .count();
            let with_utility: Vec<f64> = ok.iter().filter_map(|r| r.utility).collect();
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let rates: Vec<f64> = ok.iter().map(|r| r.mean_rate_bps).collect();
            MethodAggregate {
                method: m,
                n_ok: ok.len(),
                n_failed,
                mean_utility: mean(&with_utility),
                mean_rate_bps: mean(&rates),
                load_share: share,
            }
        })
        .collect()
}

struct DropContext {
    drop: usize,
    drop_seed: u64,
    gains: LinkGains,
    checksum: String,
    tiers: Vec<Tier>,
}

fn record_for(
    ctx: &DropContext,
    method: String,
    a: &Association,
    caps: &LoadCaps,
    plan: &ExperimentPlan,
    ms: f64,
) -> DropRecord {
    let rates = user_rates(a, &ctx.gains).expect("dimensions match");
    let n = rates.len();
    DropRecord {
        drop: ctx.drop,
        drop_seed: ctx.drop_seed,
        method,
        gains_checksum: ctx.checksum.clone(),
        utility: evaluate_utility(a, &ctx.gains, &plan.scenario.utility).ok(),
        mean_rate_bps: if n == 0 {
            0.0
        } else {
            rates.iter().sum::<f64>() / n as f64
        },
        per_user_rates: rates,
        bs_loads: bs_loads(a),
        bs_tiers: ctx.tiers.clone(),
        association: a.as_slice().to_vec(),
        feasible: is_feasible(a, caps).unwrap_or(false),
        runtime_ms: ms,
        trace_file: None,
        error: None,
    }
}

fn failed_record(
    drop: usize,
    drop_seed: u64,
    checksum: &str,
    method: String,
    err: &Error,
) -> DropRecord {
    DropRecord {
        drop,
        drop_seed,
        method,
        gains_checksum: checksum.to_string(),
        utility: None,
        mean_rate_bps: 0.0,
        per_user_rates: Vec::new(),
        bs_loads: Vec::new(),
        bs_tiers: Vec::new(),
        association: Vec::new(),
        feasible: false,
        runtime_ms: 0.0,
        trace_file: None,
        error: Some(err.to_string()),
    }
}

/// File-system safe form of a method name.
pub(crate) fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn trace_file_name(method: &str, drop: usize) -> String {
    format!("traces/{}_drop{drop:04}.jsonl", slug(method))
}

type DropOutput = (Vec<DropRecord>, Vec<(usize, String, CERunTrace)>);

fn run_drop(plan: &ExperimentPlan, drop: usize) -> DropOutput {
    let drop_seed = plan.drop_seed(drop);
    let setup = (|| -> Result<(LinkGains, Vec<Tier>, LoadCaps)> {
        let dep = generate_deployment(&plan.scenario, drop_seed)?;
        Ok((
            compute_link_gains(&dep)?,
            dep.tiers(),
            plan.scenario.caps()?,
        ))
    })();
    let (gains, tiers, caps) = match setup {
        Ok(s) => s,
        Err(e) => {
            let recs = plan
                .methods
                .iter()
                .map(|m| failed_record(drop, drop_seed, "", m.name(), &e))
                .collect();
            return (recs, Vec::new());
        }
    };
    let ctx = DropContext {
        drop,
        drop_seed,
        checksum: gains.checksum(),
        gains,
        tiers,
    };
    let caps_binding = !caps.is_inactive_for(ctx.gains.n_users());
    let utility = &plan.scenario.utility;

    let mut records = Vec::new();
    let mut traces = Vec::new();
    for m in &plan.methods {
        let name = m.name();
        let start = Instant::now();
        let outcome: Result<Vec<(String, Association)>> = match m {
            MethodSpec::Ceas { config, .. } => {
                let cfg = CEConfig {
                    seed: derive_seed(config.seed, &[drop_seed]),
                    ..config.clone()
                };
                ceas_run(&ctx.gains, &caps, utility, &cfg).map(|(a, trace)| {
                    traces.push((drop, name.clone(), trace));
                    vec![(name.clone(), a)]
                })
            }
            MethodSpec::MaxSinr { .. } => {
                let raw = max_sinr_assoc(&ctx.gains);
                if caps_binding {
                    max_sinr_repaired(&ctx.gains, &caps)
                        .map(|rep| vec![(name.clone(), raw), (format!("{name}_repaired"), rep)])
                } else {
                    Ok(vec![(name.clone(), raw)])
                }
            }
            MethodSpec::Dual { config, .. } => dual_subgradient_assoc(&ctx.gains, utility, config)
                .map(|(a, _)| vec![(name.clone(), a)]),
            MethodSpec::Oracle { budget, .. } => {
                exhaustive_search(&ctx.gains, &caps, utility, *budget)
                    .map(|(a, _)| vec![(name.clone(), a)])
            }
        };
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match outcome {
            Ok(list) => {
                for (label, a) in list {
                    let mut r = record_for(&ctx, label, &a, &caps, plan, ms);
                    if matches!(m, MethodSpec::Ceas { .. }) {
                        r.trace_file = Some(trace_file_name(&r.method, drop));
                    }
                    records.push(r);
                }
            }
            Err(e) => records.push(failed_record(drop, drop_seed, &ctx.checksum, name, &e)),
        }
    }
    (records, traces)
}

/// Runs every method on every drop. Method failures are recorded per drop;
/// only an invalid plan or a failing writer aborts the experiment.
/// Drops run in parallel in batches; `writer` receives them in drop order.
pub fn run_experiment(
    plan: &ExperimentPlan,
    mut writer: Option<&mut ResultWriter>,
) -> Result<ExperimentResult> {
    plan.validate()?;
    let batch = rayon::current_num_threads().max(1) * 2;
    let mut records = Vec::new();
    let mut traces = Vec::new();
    let mut start = 0;
    while start < plan.n_drops {
        let end = (start + batch).min(plan.n_drops);
        let outputs: Vec<DropOutput> = (start..end)
            .into_par_iter()
            .map(|d| run_drop(plan, d))
            .collect();
        for (recs, trs) in outputs {
            if let Some(w) = writer.as_deref_mut() {
                w.append_drop(&recs, &trs)?;
            }
            records.extend(recs);
            traces.extend(trs);
        }
        start = end;
    }
    let aggregates = aggregate(&records);
    let result = ExperimentResult {
        records,
        aggregates,
        traces,
    };
    if let Some(w) = writer {
        w.finish(&result)?;
    }
    Ok(result)
}

/// First iteration whose value is within `1 - frac` of the final value
/// (relative to its magnitude).
pub fn convergence_iteration(curve: &[f64], frac: f64) -> usize {
    let Some(&last) = curve.last() else { return 0 };
    if !last.is_finite() {
        return curve.len() - 1;
    }
    let threshold = last - (1.0 - frac) * last.abs();
    curve
        .iter()
        .position(|&v| v >= threshold)
        .unwrap_or(curve.len() - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub n_samples: usize,
    pub n_elites: usize,
    pub smoothing_alpha: f64,
    pub n_drops: usize,
    /// Per-iteration best score averaged over drops.
    pub mean_best_curve: Vec<f64>,
    pub mean_incumbent_curve: Vec<f64>,
    /// Mean utility of the returned (best-so-far) association.
    pub mean_final_utility: f64,
    /// Mean best sample score of the last iteration.
    pub mean_last_iteration_best: f64,
    /// Mean over drops of each drop's 99%-of-final iteration.
    pub mean_convergence_iteration: f64,
    /// 99%-of-final iteration of the averaged best-score curve.
    pub curve_convergence_iteration: usize,
}

/// Runs CEAS for every grid cell on the plan's drops (common across cells)
/// and averages the per-iteration curves.
pub fn sensitivity_sweep(
    plan: &ExperimentPlan,
    writer: Option<&mut ResultWriter>,
) -> Result<Vec<SweepCell>> {
    plan.validate()?;
    let grid = plan.sweep.clone().unwrap_or_default();
    let cells = grid.cells(&plan.base_ce_config());
    if cells.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let caps = plan.scenario.caps()?;
    let gains: Vec<(u64, LinkGains)> = (0..plan.n_drops)
        .into_par_iter()
        .map(|d| {
            let seed = plan.drop_seed(d);
            let dep = generate_deployment(&plan.scenario, seed)?;
            Ok((seed, compute_link_gains(&dep)?))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(cells.len());
    for cfg in cells {
        let traces: Vec<CERunTrace> = gains
            .par_iter()
            .map(|(seed, g)| {
                let c = CEConfig {
                    seed: derive_seed(cfg.seed, &[*seed]),
                    ..cfg.clone()
                };
                ceas_run(g, &caps, &plan.scenario.utility, &c).map(|(_, t)| t)
            })
            .collect::<Result<_>>()?;
        let len = traces.iter().map(|t| t.iterations_run).max().unwrap_or(0);
        let mean_curve = |f: fn(&CERunTrace) -> Vec<f64>| -> Vec<f64> {
            let mut acc = vec![0.0; len];
            for t in &traces {
                let c = f(t);
                // runs stopped early hold their last value
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += c.get(k).or(c.last()).copied().unwrap_or(f64::NAN);
                }
            }
            acc.iter().map(|a| a / traces.len() as f64).collect()
        };
        let best = mean_curve(CERunTrace::best_curve);
        let inc = mean_curve(CERunTrace::incumbent_curve);
        let conv: f64 = traces
            .iter()
            .map(|t| convergence_iteration(&t.best_curve(), 0.99) as f64)
            .sum::<f64>()
            / traces.len() as f64;
        out.push(SweepCell {
            n_samples: cfg.n_samples,
            n_elites: cfg.n_elites,
            smoothing_alpha: cfg.smoothing_alpha,
            n_drops: traces.len(),
            mean_final_utility: *inc.last().unwrap_or(&f64::NAN),
            mean_last_iteration_best: *best.last().unwrap_or(&f64::NAN),
            curve_convergence_iteration: convergence_iteration(&best, 0.99),
            mean_convergence_iteration: conv,
            mean_best_curve: best,
            mean_incumbent_curve: inc,
        });
    }
    if let Some(w) = writer {
        w.write_sweep(&out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleGap {
    pub drop: usize,
    pub drop_seed: u64,
    pub oracle_utility: f64,
    pub ceas_utility: f64,
    /// `(oracle - ceas) / max(1, |oracle|)`.
    pub gap: f64,
    pub raw_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub per_drop: Vec<OracleGap>,
    pub within_1pct: usize,
    pub fraction_within_1pct: f64,
}

/// Relative shortfall of `value` against `reference`, safe for negative utilities.
pub fn relative_gap(reference: f64, value: f64) -> f64 {
    (reference - value) / reference.abs().max(1.0)
}

/// Compares CEAS (the plan's base CE config) with exhaustive search on
/// `n_drops` drops.
pub fn oracle_check(plan: &ExperimentPlan, n_drops: usize) -> Result<OracleCheck> {
    plan.scenario.validate()?;
    let cfg = plan.base_ce_config();
    cfg.validate()?;
    let budget = plan
        .methods
        .iter()
        .find_map(|m| match m {
            MethodSpec::Oracle { budget, .. } => Some(*budget),
            _ => None,
        })
        .unwrap_or(DEFAULT_ENUMERATION_BUDGET);
    let n = candidate_count(plan.scenario.n_users, plan.scenario.n_bs());
    if n > budget as f64 {
        return Err(Error::BudgetExceeded {
            candidates: n,
            budget,
        });
    }
    let caps = plan.scenario.caps()?;
    let utility = plan.scenario.utility;
    let per_drop: Vec<OracleGap> = (0..n_drops)
        .into_par_iter()
        .map(|d| {
            let seed = plan.drop_seed(d);
            let g = compute_link_gains(&generate_deployment(&plan.scenario, seed)?)?;
            let (_, oracle) = exhaustive_search(&g, &caps, &utility, budget)?;
            let c = CEConfig {
                seed: derive_seed(cfg.seed, &[seed]),
                ..cfg.clone()
            };
            let (_, trace) = ceas_run(&g, &caps, &utility, &c)?;
            let ceas = trace.incumbent.score;
            Ok(OracleGap {
                drop: d,
                drop_seed: seed,
                oracle_utility: oracle,
                ceas_utility: ceas,
                gap: relative_gap(oracle, ceas),
                raw_difference: oracle - ceas,
            })
        })
        .collect::<Result<_>>()?;
    let within = per_drop.iter().filter(|g| g.gap <= 0.01).count();
    Ok(OracleCheck {
        fraction_within_1pct: if per_drop.is_empty() {
            0.0
        } else {
            within as f64 / per_drop.len() as f64
        },
        within_1pct: within,
        per_drop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, rates: &[f64], loads: &[usize]) -> DropRecord {
        let mut tiers = vec![Tier::Small; loads.len()];
        tiers[0] = Tier::Macro;
        DropRecord {
            drop: 0,
            drop_seed: 0,
            method: method.into(),
            gains_checksum: String::new(),
            utility: Some(0.0),
            mean_rate_bps: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
            per_user_rates: rates.to_vec(),
            bs_loads: loads.to_vec(),
            bs_tiers: tiers,
            association: Vec::new(),
            feasible: true,
            runtime_ms: 0.0,
            trace_file: None,
            error: None,
        }
    }

    #[test]
    fn cdf_examples() {
        let r = rec("m", &[3.0, 1.0, 2.0], &[3]);
        let cdf = rate_cdf(&[&r]).unwrap();
        assert_eq!(cdf, vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]);
        let r = rec("m", &[5.0; 4], &[4]);
        assert_eq!(rate_cdf(&[&r]).unwrap(), vec![(5.0, 1.0)]);
        assert!(rate_cdf(&[]).is_err());
    }

    #[test]
    fn load_share_examples() {
        let all_macro = rec("a", &[1.0; 4], &[4, 0, 0, 0]);
        let even = rec("b", &[1.0; 4], &[1, 1, 1, 1]);
        let shares = load_shares(&[all_macro, even]);
        assert_eq!(
            shares[0].1,
            LoadShare {
                mbs_share_pct: 100.0,
                sbs_share_pct: 0.0
            }
        );
        assert_eq!(
            shares[1].1,
            LoadShare {
                mbs_share_pct: 25.0,
                sbs_share_pct: 75.0
            }
        );
    }

    #[test]
    fn convergence_index() {
        assert_eq!(convergence_iteration(&[-10.0, 5.0, 9.95, 10.0], 0.99), 2);
        assert_eq!(
            convergence_iteration(&[-30.0, -20.0, -10.05, -10.0], 0.99),
            2
        );
        assert_eq!(convergence_iteration(&[1.0], 0.99), 0);
    }

    #[test]
    fn gap_uses_shifted_denominator() {
        assert_eq!(relative_gap(0.5, 0.0), 0.5);
        assert!((relative_gap(-20.0, -20.2) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn method_list_parsing() {
        let m = MethodSpec::parse_list("ceas, max_sinr,oracle").unwrap();
        assert_eq!(
            m.iter().map(MethodSpec::name).collect::<Vec<_>>(),
            vec!["ceas", "max_sinr", "oracle"]
        );
        assert!(MethodSpec::parse_list("ceas,foo").is_err());
        assert!(MethodSpec::parse_list("").unwrap().is_empty());
    }

    #[test]
    fn plan_validation() {
        let mut plan = ExperimentPlan::default();
        plan.validate().unwrap();
        plan.methods.clear();
        assert!(plan.validate().is_err());
        let plan = ExperimentPlan {
            methods: vec![MethodSpec::oracle()],
            ..Default::default()
        };
        assert!(plan.validate().is_err());
        let plan = ExperimentPlan {
            methods: vec![MethodSpec::ceas(), MethodSpec::ceas()],
            ..Default::default()
        };
        assert!(plan.validate().is_err());
    }

    #[test]
    fn plan_json_with_tagged_methods() {
        let text = r#"{
            "scenario": {"n_users": 6, "n_sbs": 2},
            "methods": [
                {"kind": "ceas", "config": {"n_samples": 200}},
                {"kind": "dual", "label": "dual-1", "config": {"step_size": 0.01}},
                {"kind": "oracle"}
            ],
            "n_drops": 3,
            "base_seed": 1
        }"#;
        let plan = ExperimentPlan::from_json(text).unwrap();
        assert_eq!(plan.base_ce_config().n_samples, 200);
        assert_eq!(plan.methods[1].name(), "dual-1");
    }
}
