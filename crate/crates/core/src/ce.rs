//! Cross-entropy association search (CEAS).
//!
//! Each iteration draws `S` feasible associations from an independent
//! Bernoulli model over the flattened assignment bits, scores them, keeps
//! the `S_elite` best, refits the Bernoulli parameters to the elite bit
//! frequencies and blends the fit into the previous parameters with a
//! smoothing factor `alpha`.
//!
//! Independent bits almost never form one-hot rows, so sampling is done
//! per user: a row of `J` Bernoulli bits is redrawn until exactly one bit
//! is set, falling back to a categorical draw over the normalized row after
//! `max_row_resamples` failures. Whole vectors that break a load cap are
//! redrawn up to `max_vector_resamples` times and then repaired
//! deterministically with [`repair_to_caps`] using `u` as the preference.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{is_feasible, repair_to_caps, score, Association, LoadCaps, UtilitySpec};
use crate::error::{Error, Result};
use crate::netmodel::LinkGains;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CEConfig {
    /// Samples per iteration, `S`. Around `c * I * J` for a small constant `c`.
    pub n_samples: usize,
    /// Elite count, `S_elite`.
    pub n_elites: usize,
    /// Iterations, `T`.
    pub n_iterations: usize,
    pub smoothing_alpha: f64,
    pub max_row_resamples: u32,
    pub max_vector_resamples: u32,
    pub seed: u64,
    /// Stop once the incumbent has not improved for this many iterations.
    pub stagnation_stop: Option<usize>,
    /// Keep a copy of `u` in every trace record.
    pub record_params: bool,
    /// Reserved for warm starts from a previous association; must be unset.
    pub prior_association: Option<Vec<usize>>,
}

impl Default for CEConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            n_elites: 10,
            n_iterations: 20,
            smoothing_alpha: 0.7,
            max_row_resamples: 20,
            max_vector_resamples: 100,
            seed: 0,
            stagnation_stop: None,
            record_params: false,
            prior_association: None,
        }
    }
}

impl CEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_elites == 0 || self.n_iterations == 0 {
            return Err(Error::Config(
                "n_samples, n_elites and n_iterations must be positive".into(),
            ));
        }
        if self.n_elites > self.n_samples {
            return Err(Error::Config(format!(
                "n_elites ({}) exceeds n_samples ({})",
                self.n_elites, self.n_samples
            )));
        }
        if !(0.0..=1.0).contains(&self.smoothing_alpha) {
            return Err(Error::Config(format!(
                "smoothing_alpha {} outside [0, 1]",
                self.smoothing_alpha
            )));
        }
        if self.max_row_resamples == 0 || self.max_vector_resamples == 0 {
            return Err(Error::Config("resample limits must be positive".into()));
        }
        if self.stagnation_stop == Some(0) {
            return Err(Error::Config(
                "stagnation_stop must be positive when set".into(),
            ));
        }
        if self.prior_association.is_some() {
            return Err(Error::Config(
                "prior_association (warm start) is reserved and not supported".into(),
            ));
        }
        Ok(())
    }

    pub fn limits(&self) -> SamplingLimits {
        SamplingLimits {
            max_row_resamples: self.max_row_resamples,
            max_vector_resamples: self.max_vector_resamples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingLimits {
    pub max_row_resamples: u32,
    pub max_vector_resamples: u32,
}

impl Default for SamplingLimits {
    fn default() -> Self {
        CEConfig::default().limits()
    }
}

/// Success probabilities of the flattened assignment bits, `n = i * J + j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliParams {
    n_users: usize,
    n_bs: usize,
    u: Vec<f64>,
}

impl BernoulliParams {
    /// All probabilities at 1/2: no prior information.
    pub fn uniform(n_users: usize, n_bs: usize) -> Self {
        Self {
            n_users,
            n_bs,
            u: vec![0.5; n_users * n_bs],
        }
    }

    pub fn from_vec(n_users: usize, n_bs: usize, u: Vec<f64>) -> Result<Self> {
        if u.len() != n_users * n_bs {
            return Err(Error::Contract(format!(
                "{} parameters for a {n_users}x{n_bs} problem",
                u.len()
            )));
        }
        if let Some(p) = u.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Contract(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { n_users, n_bs, u })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    #[inline]
    pub fn get(&self, user: usize, bs: usize) -> f64 {
        self.u[user * self.n_bs + bs]
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.u[user * self.n_bs..(user + 1) * self.n_bs]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SampleStats {
    pub fallback_rows: u64,
    pub rejected_vectors: u64,
    pub repaired_vectors: u64,
}

impl SampleStats {
    fn add(&mut self, o: &SampleStats) {
        self.fallback_rows += o.fallback_rows;
        self.rejected_vectors += o.rejected_vectors;
        self.repaired_vectors += o.repaired_vectors;
    }
}

fn sample_row(
    row: &[f64],
    max_resamples: u32,
    rng: &mut impl Rng,
    stats: &mut SampleStats,
) -> usize {
    for _ in 0..max_resamples {
        let mut hit = None;
        let mut ones = 0;
        for (j, &p) in row.iter().enumerate() {
            // `p == 1` must always fire, `p == 0` never
            if rng.random::<f64>() < p {
                ones += 1;
                hit = Some(j);
            }
        }
        if ones == 1 {
            return hit.expect("one bit set");
        }
    }
    stats.fallback_rows += 1;
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..row.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (j, &p) in row.iter().enumerate() {
        if target < p {
            return j;
        }
        target -= p;
    }
    // rounding residue: last positive entry
    row.iter().rposition(|&p| p > 0.0).expect("positive total")
}

/// Draws one association satisfying the one-hot and load-cap constraints.
pub fn sample_feasible(
    params: &BernoulliParams,
    caps: &LoadCaps,
    limits: SamplingLimits,
    rng: &mut impl Rng,
) -> Result<Association> {
    sample_feasible_with_stats(params, caps, limits, rng).map(|(a, _)| a)
}

pub fn sample_feasible_with_stats(
    params: &BernoulliParams,
    caps: &LoadCaps,
    limits: SamplingLimits,
    rng: &mut impl Rng,
) -> Result<(Association, SampleStats)> {
    let (n_users, n_bs) = (params.n_users(), params.n_bs());
    if caps.n_bs() != n_bs {
        return Err(Error::Contract(format!(
            "caps have J={}, parameters have J={n_bs}",
            caps.n_bs()
        )));
    }
    if caps.total() < n_users as u64 {
        return Err(Error::Contract(format!(
            "load caps sum to {}, fewer than {n_users} users",
            caps.total()
        )));
    }
    if n_bs == 0 {
        return Association::new(Vec::new(), 0).map(|a| (a, SampleStats::default()));
    }
    let mut stats = SampleStats::default();
    let check_caps = !caps.is_inactive_for(n_users);
    let mut attempt = 0;
    loop {
        let assign: Vec<usize> = (0..n_users)
            .map(|i| sample_row(params.row(i), limits.max_row_resamples, rng, &mut stats))
            .collect();
        let mut a = Association::new(assign, n_bs)?;
        if !check_caps || is_feasible(&a, caps)? {
            return Ok((a, stats));
        }
        stats.rejected_vectors += 1;
        attempt += 1;
        if attempt >= limits.max_vector_resamples {
            repair_to_caps(&mut a, caps, |i, j| params.get(i, j))?;
            stats.repaired_vectors += 1;
            return Ok((a, stats));
        }
    }
}

/// Objective value of every sample, order preserved. Zero-rate users
/// under log utility score as negative infinity.
pub fn score_samples(
    samples: &[Association],
    gains: &LinkGains,
    utility: &UtilitySpec,
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|a| score(a, gains, utility))
        .collect()
}

/// Indices of the `n_elites` best samples, best first; equal scores keep
/// their sample order.
pub fn select_elites(scores: &[f64], n_elites: usize) -> Result<Vec<usize>> {
    if n_elites > scores.len() {
        return Err(Error::Contract(format!(
            "{n_elites} elites requested from {} samples",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(n_elites);
    Ok(idx)
}

/// Closed-form maximizer of the elite log-likelihood: per-bit elite mean.
pub fn update_params(elites: &[&Association]) -> Result<BernoulliParams> {
    let first = elites
        .first()
        .ok_or_else(|| Error::Contract("empty elite set".into()))?;
    let (n_users, n_bs) = (first.n_users(), first.n_bs());
    if elites
        .iter()
        .any(|e| e.n_users() != n_users || e.n_bs() != n_bs)
    {
        return Err(Error::Contract("elites have mixed dimensions".into()));
    }
    let mut counts = vec![0u32; n_users * n_bs];
    for e in elites {
        for (i, &j) in e.as_slice().iter().enumerate() {
            counts[i * n_bs + j] += 1;
        }
    }
    let k = elites.len() as f64;
    let u = counts.into_iter().map(|c| f64::from(c) / k).collect();
    Ok(BernoulliParams { n_users, n_bs, u })
}

/// `(1/S) * sum over elites of ln p(x; u)` for the product-Bernoulli law.
/// Bits that contradict a saturated parameter give negative infinity.
pub fn elite_log_likelihood(
    elites: &[&Association],
    params: &BernoulliParams,
    n_samples: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for e in elites {
        if e.n_users() != params.n_users() || e.n_bs() != params.n_bs() {
            return Err(Error::Contract(
                "elite and parameter dimensions differ".into(),
            ));
        }
        for (&x, &u) in e.to_binary().iter().zip(params.as_slice()) {
            total += if x == 1 { u.ln() } else { (1.0 - u).ln() };
        }
    }
    Ok(total / n_samples as f64)
}

/// `alpha * v + (1 - alpha) * prev`, elementwise.
pub fn smooth_update(
    prev: &BernoulliParams,
    v: &BernoulliParams,
    alpha: f64,
) -> Result<BernoulliParams> {
    if prev.n_users != v.n_users || prev.n_bs != v.n_bs {
        return Err(Error::Contract("parameter dimensions differ".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!("alpha {alpha} outside [0, 1]")));
    }
    let u = prev
        .u
        .iter()
        .zip(&v.u)
        .map(|(&p, &q)| (alpha * q + (1.0 - alpha) * p).clamp(0.0, 1.0))
        .collect();
    Ok(BernoulliParams {
        n_users: prev.n_users,
        n_bs: prev.n_bs,
        u,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub t: usize,
    /// Score of this iteration's top sample.
    pub best_score: f64,
    pub elite_mean_score: f64,
    /// Mean over samples with a finite score.
    pub mean_score: f64,
    pub incumbent_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params_snapshot: Option<Vec<f64>>,
    #[serde(skip)]
    pub sample_stats: SampleStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incumbent {
    pub association: Association,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CERunTrace {
    pub per_iteration: Vec<IterationRecord>,
    pub incumbent: Incumbent,
    /// Top sample of the final iteration.
    pub final_iteration_best: Incumbent,
    pub iterations_run: usize,
    pub sample_stats: SampleStats,
}

impl CERunTrace {
    /// One JSON object per iteration.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.per_iteration {
            let line = serde_json::json!({
                "t": r.t,
                "best_score": r.best_score,
                "elite_mean_score": r.elite_mean_score,
                "mean_score": r.mean_score,
                "incumbent_score": r.incumbent_score,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn best_curve(&self) -> Vec<f64> {
        self.per_iteration.iter().map(|r| r.best_score).collect()
    }

    pub fn incumbent_curve(&self) -> Vec<f64> {
        self.per_iteration
            .iter()
            .map(|r| r.incumbent_score)
            .collect()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NEG_INFINITY
    } else {
        s / n as f64
    }
}

/// Runs the full CE loop and returns the best association seen in any
/// iteration together with the run trace.
///
/// Sample `s` of iteration `t` draws from its own RNG stream derived from
/// `(cfg.seed, t, s)`, so the result does not depend on the thread count.
pub fn ceas_run(
    gains: &LinkGains,
    caps: &LoadCaps,
    utility: &UtilitySpec,
    cfg: &CEConfig,
) -> Result<(Association, CERunTrace)> {
    cfg.validate()?;
    utility.validate()?;
    let (n_users, n_bs) = (gains.n_users(), gains.n_bs());
    if caps.n_bs() != n_bs {
        return Err(Error::Contract(format!(
            "caps have J={}, link tables have J={n_bs}",
            caps.n_bs()
        )));
    }
    if caps.total() < n_users as u64 {
        return Err(Error::Contract(format!(
            "load caps sum to {}, fewer than {n_users} users",
            caps.total()
        )));
    }
    let limits = cfg.limits();
    let mut params = BernoulliParams::uniform(n_users, n_bs);
    let mut records = Vec::with_capacity(cfg.n_iterations);
    let mut incumbent: Option<Incumbent> = None;
    let mut last_best: Option<Incumbent> = None;
    let mut totals = SampleStats::default();
    let mut stale = 0usize;

    for t in 0..cfg.n_iterations {
        let drawn: Vec<(Association, SampleStats, f64)> = (0..cfg.n_samples)
            .into_par_iter()
            .map(|s| {
                let mut rng = rng_for(cfg.seed, &[t as u64, s as u64]);
                let (a, st) = sample_feasible_with_stats(&params, caps, limits, &mut rng)?;
                let f = score(&a, gains, utility)?;
                Ok((a, st, f))
            })
            .collect::<Result<_>>()?;

        let mut iter_stats = SampleStats::default();
        for (_, st, _) in &drawn {
            iter_stats.add(st);
        }
        totals.add(&iter_stats);
        let scores: Vec<f64> = drawn.iter().map(|d| d.2).collect();
        let elite_idx = select_elites(&scores, cfg.n_elites)?;
        let elites: Vec<&Association> = elite_idx.iter().map(|&k| &drawn[k].0).collect();

        let top = Incumbent {
            association: elites[0].clone(),
            score: scores[elite_idx[0]],
        };
        match &incumbent {
            Some(inc) if top.score <= inc.score => stale += 1,
            _ => {
                incumbent = Some(top.clone());
                stale = 0;
            }
        }

        let v = update_params(&elites)?;
        params = smooth_update(&params, &v, cfg.smoothing_alpha)?;

        records.push(IterationRecord {
            t,
            best_score: top.score,
            elite_mean_score: mean(elite_idx.iter().map(|&k| scores[k])),
            mean_score: mean(scores.iter().copied().filter(|f| f.is_finite())),
            incumbent_score: incumbent.as_ref().map_or(f64::NEG_INFINITY, |i| i.score),
            params_snapshot: cfg.record_params.then(|| params.as_slice().to_vec()),
            sample_stats: iter_stats,
        });
        last_best = Some(top);

        if cfg.stagnation_stop.is_some_and(|k| stale >= k) {
            break;
        }
    }

    let incumbent = incumbent.expect("at least one iteration ran");
    let trace = CERunTrace {
        iterations_run: records.len(),
        per_iteration: records,
        final_iteration_best: last_best.expect("at least one iteration ran"),
        incumbent: incumbent.clone(),
        sample_stats: totals,
    };
    Ok((incumbent.association, trace))
}
