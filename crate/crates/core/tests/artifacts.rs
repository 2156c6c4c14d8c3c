mod common;

use std::collections::BTreeMap;
use std::fs;

use hetnet_ce::assoc::{bs_loads, evaluate_utility, user_rates, Association};
use hetnet_ce::harness::{
    aggregate, rate_cdf, run_experiment, sensitivity_sweep, DropRecord, ExperimentPlan, MethodSpec,
    SweepGrid,
};
use hetnet_ce::netmodel::{compute_link_gains, generate_deployment};
use hetnet_ce::output::{read_records, ResultWriter};
use hetnet_ce::scenario::ScenarioConfig;

fn small_plan(n_drops: usize) -> ExperimentPlan {
    ExperimentPlan {
        scenario: ScenarioConfig {
            n_users: 12,
            ..ScenarioConfig::default()
        },
        methods: vec![
            MethodSpec::Ceas {
                label: None,
                config: hetnet_ce::ce::CEConfig {
                    n_samples: 120,
                    ..Default::default()
                },
            },
            MethodSpec::max_sinr(),
            MethodSpec::dual(Default::default()),
        ],
        n_drops,
        ..ExperimentPlan::default()
    }
}

#[test]
fn aggregates_recompute_from_records_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = small_plan(6);
    let mut w = ResultWriter::create(dir.path(), plan.scenario.n_sbs).unwrap();
    let result = run_experiment(&plan, Some(&mut w)).unwrap();
    let recs = read_records(dir.path().join("records.jsonl")).unwrap();
    assert_eq!(recs.len(), result.records.len());

    let mut by_method: BTreeMap<&str, Vec<&DropRecord>> = BTreeMap::new();
    for r in &recs {
        by_method.entry(&r.method).or_default().push(r);
    }
    for agg in &result.aggregates {
        let rs = &by_method[agg.method.as_str()];
        let mu = rs.iter().map(|r| r.utility.unwrap()).sum::<f64>() / rs.len() as f64;
        let rate = rs.iter().map(|r| r.mean_rate_bps).sum::<f64>() / rs.len() as f64;
        assert!((mu - agg.mean_utility).abs() <= 1e-9 * mu.abs().max(1.0));
        assert!((rate - agg.mean_rate_bps).abs() <= 1e-9 * rate);
    }
    let again = aggregate(&recs);
    assert_eq!(again.len(), result.aggregates.len());

    // Records are self-consistent with a fresh evaluation of their association.
    for r in &recs {
        let dep = generate_deployment(&plan.scenario, r.drop_seed).unwrap();
        let g = compute_link_gains(&dep).unwrap();
        assert_eq!(g.checksum(), r.gains_checksum);
        let a = Association::new(r.association.clone(), g.n_bs()).unwrap();
        assert_eq!(bs_loads(&a), r.bs_loads);
        assert_eq!(user_rates(&a, &g).unwrap(), r.per_user_rates);
        let u = evaluate_utility(&a, &g, &plan.scenario.utility).unwrap();
        assert!((u - r.utility.unwrap()).abs() <= 1e-9 * u.abs().max(1.0));
    }

    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + recs.len());
    for f in [
        "summary.csv",
        "load_shares.csv",
        "aggregates.json",
        "cdf_ceas.csv",
        "cdf_max_sinr.csv",
        "cdf_dual.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    for d in 0..plan.n_drops {
        assert!(dir
            .path()
            .join(format!("traces/ceas_drop{d:04}.jsonl"))
            .exists());
    }
}

#[test]
fn methods_share_each_drop() {
    let result = run_experiment(&small_plan(5), None).unwrap();
    for d in 0..5 {
        let sums: Vec<&str> = result
            .records
            .iter()
            .filter(|r| r.drop == d)
            .map(|r| r.gains_checksum.as_str())
            .collect();
        assert_eq!(sums.len(), 3);
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
    }
    let distinct: std::collections::HashSet<_> =
        result.records.iter().map(|r| &r.gains_checksum).collect();
    assert_eq!(distinct.len(), 5);
}

#[test]
fn single_cell_sweep_matches_experiment() {
    let mut plan = small_plan(4);
    plan.methods.truncate(1);
    let result = run_experiment(&plan, None).unwrap();
    plan.sweep = Some(SweepGrid::default());
    let cells = sensitivity_sweep(&plan, None).unwrap();
    assert_eq!(cells.len(), 1);
    let mean = result.aggregate("ceas").unwrap().mean_utility;
    let swept = *cells[0].mean_incumbent_curve.last().unwrap();
    assert!((mean - swept).abs() < 1e-9, "{mean} vs {swept}");
}

#[test]
fn load_balancing_lifts_the_lower_tail() {
    let plan = ExperimentPlan {
        n_drops: 10,
        ..common::reference_plan(vec![MethodSpec::ceas(), MethodSpec::max_sinr()], 10)
    };
    let result = run_experiment(&plan, None).unwrap();
    let cdf = |m: &str| rate_cdf(&result.records_for(m).collect::<Vec<_>>()).unwrap();
    let (c, s) = (cdf("ceas"), cdf("max_sinr"));
    let quantile = |v: &[(f64, f64)], q: f64| v.iter().find(|p| p.1 >= q).unwrap().0;
    // Balancing helps the worst users and costs the best ones.
    assert!(quantile(&c, 0.1) > quantile(&s, 0.1));
    assert!(quantile(&c, 0.99) <= quantile(&s, 0.99));
}
