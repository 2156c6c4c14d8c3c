//! Checks shared by the focused test files and the acceptance target.
//! Each returns `Ok(detail)` or `Err(detail)` so callers can either assert
//! or print a one-line verdict.
#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use hetnet_ce::assoc::{Association, LoadCaps};
use hetnet_ce::ce::{
    elite_log_likelihood, sample_feasible, smooth_update, update_params, BernoulliParams,
    SamplingLimits,
};
use hetnet_ce::harness::{ExperimentPlan, MethodSpec};
use hetnet_ce::scenario::ScenarioConfig;
use hetnet_ce::seed::rng_for;

pub type Check = Result<String, String>;

pub fn random_assoc(rng: &mut impl Rng, n_users: usize, n_bs: usize) -> Association {
    Association::new(
        (0..n_users).map(|_| rng.random_range(0..n_bs)).collect(),
        n_bs,
    )
    .unwrap()
}

/// True when `x` is the double nearest to `exact` (ties either way).
fn is_nearest_double(x: f64, exact: &BigRational) -> bool {
    let err = |y: f64| {
        let r = BigRational::from_float(y).expect("finite");
        let d = r - exact;
        if d < BigRational::from_integer(0.into()) {
            -d
        } else {
            d
        }
    };
    let e = err(x);
    e <= err(x.next_up()) && e <= err(x.next_down())
}

/// Elite-mean update against exact rational counts on hand-built and
/// random elite sets.
pub fn update_params_exact() -> Check {
    let mut cases: Vec<(Vec<Vec<usize>>, usize)> = vec![
        (vec![vec![0, 1], vec![0, 0], vec![1, 1]], 2),
        (vec![vec![2, 0, 1]; 7], 3),
        (vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]], 3),
        (vec![vec![0]], 1),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (i, j, k) = (
            rng.random_range(1..8),
            rng.random_range(1..5),
            rng.random_range(1..40),
        );
        cases.push((
            (0..k)
                .map(|_| (0..i).map(|_| rng.random_range(0..j)).collect())
                .collect(),
            j,
        ));
    }
    for (n, (rows, n_bs)) in cases.iter().enumerate() {
        let elites: Vec<Association> = rows
            .iter()
            .map(|r| Association::new(r.clone(), *n_bs).unwrap())
            .collect();
        let refs: Vec<&Association> = elites.iter().collect();
        let v = update_params(&refs).map_err(|e| e.to_string())?;
        let k = rows.len() as i64;
        for i in 0..rows[0].len() {
            for j in 0..*n_bs {
                let count = rows.iter().filter(|r| r[i] == j).count() as i64;
                let exact = BigRational::new(count.into(), k.into());
                if !is_nearest_double(v.get(i, j), &exact) {
                    return Err(format!(
                        "case {n}: u[{i}][{j}] = {} but exact value is {exact}",
                        v.get(i, j)
                    ));
                }
            }
        }
    }
    Ok(format!(
        "{} elite sets match exact rational means",
        cases.len()
    ))
}

/// Smoothed parameters against a rational evaluation of the convex combination.
pub fn smoothing_exact() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (i, j) = (rng.random_range(1..10), rng.random_range(1..6));
        let prev: Vec<f64> = (0..i * j).map(|_| rng.random::<f64>()).collect();
        let v: Vec<f64> = (0..i * j).map(|_| rng.random::<f64>()).collect();
        let alpha: f64 = rng.random();
        let p = BernoulliParams::from_vec(i, j, prev.clone()).unwrap();
        let q = BernoulliParams::from_vec(i, j, v.clone()).unwrap();
        let out = smooth_update(&p, &q, alpha).map_err(|e| e.to_string())?;
        let a = BigRational::from_float(alpha).unwrap();
        let one = BigRational::from_integer(1.into());
        for k in 0..i * j {
            let exact = &a * BigRational::from_float(v[k]).unwrap()
                + (&one - &a) * BigRational::from_float(prev[k]).unwrap();
            let err = (out.as_slice()[k] - exact.to_f64().unwrap()).abs();
            worst = worst.max(err);
        }
    }
    if worst <= 1e-15 {
        Ok(format!("max deviation {worst:.2e}"))
    } else {
        Err(format!("max deviation {worst:.2e} exceeds 1e-15"))
    }
}

/// The elite mean beats 100 random perturbations of itself on 20 random
/// elite sets.
pub fn likelihood_maximizer() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for set in 0..20 {
        let (i, j, k) = (
            rng.random_range(2..8),
            rng.random_range(2..5),
            rng.random_range(2..15),
        );
        let elites: Vec<Association> = (0..k).map(|_| random_assoc(&mut rng, i, j)).collect();
        let refs: Vec<&Association> = elites.iter().collect();
        let v = update_params(&refs).unwrap();
        let best = elite_log_likelihood(&refs, &v, 100).unwrap();
        for p in 0..100 {
            let scale = [0.3, 0.05, 1e-3][p % 3];
            let u: Vec<f64> = v
                .as_slice()
                .iter()
                .map(|&x| (x + scale * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
                .collect();
            let pert = BernoulliParams::from_vec(i, j, u).unwrap();
            let ll = elite_log_likelihood(&refs, &pert, 100).unwrap();
            if ll > best {
                return Err(format!("set {set}, perturbation {p}: {ll} > {best}"));
            }
        }
    }
    Ok("maximizer beats 2000 perturbations".into())
}

/// Chi-square p-value of BS counts from `n` sampler draws at u = 1/2.
pub fn chi_square_uniform(n_bs: usize, draws: usize, seed: u64) -> f64 {
    let params = BernoulliParams::from_vec(1, n_bs, vec![0.5; n_bs]).unwrap();
    let caps = LoadCaps::inactive(1, n_bs);
    let limits = SamplingLimits {
        max_row_resamples: 20,
        max_vector_resamples: 100,
    };
    let mut rng = rng_for(seed, &[]);
    let mut counts = vec![0u64; n_bs];
    for _ in 0..draws {
        counts[sample_feasible(&params, &caps, limits, &mut rng)
            .unwrap()
            .bs_of(0)] += 1;
    }
    let expected = draws as f64 / n_bs as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    1.0 - ChiSquared::new((n_bs - 1) as f64).unwrap().cdf(stat)
}

/// I=6, J=3 with the default physical parameters.
pub fn desk_plan(n_drops: usize) -> ExperimentPlan {
    ExperimentPlan {
        scenario: ScenarioConfig {
            n_users: 6,
            n_sbs: 2,
            ..ScenarioConfig::default()
        },
        methods: vec![MethodSpec::ceas(), MethodSpec::oracle()],
        n_drops,
        ..ExperimentPlan::default()
    }
}

/// I=30, J=4, 50 drops by default.
pub fn reference_plan(methods: Vec<MethodSpec>, n_drops: usize) -> ExperimentPlan {
    ExperimentPlan {
        methods,
        n_drops,
        ..ExperimentPlan::default()
    }
}

pub fn verdict(id: u32, name: &str, outcome: &Check) -> bool {
    match outcome {
        Ok(d) => println!("criterion {id:>2} PASS  {name}: {d}"),
        Err(d) => println!("criterion {id:>2} FAIL  {name}: {d}"),
    }
    outcome.is_ok()
}
