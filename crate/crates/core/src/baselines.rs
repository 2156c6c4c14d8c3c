//! Reference association methods: max-SINR, exhaustive search, and a
//! dual-decomposition/subgradient scheme for log utility.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{
    bs_loads, is_feasible, repair_to_caps, score, Association, LoadCaps, UtilityKind, UtilitySpec,
};
use crate::error::{Error, Result};
use crate::netmodel::LinkGains;

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 10_000_000;

fn argmax_lowest(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((j, v));
        }
    }
    best.map(|(j, _)| j)
}

/// Every user picks its highest-SINR BS (ties: lowest index). Caps are ignored.
pub fn max_sinr_assoc(gains: &LinkGains) -> Association {
    let assign = (0..gains.n_users())
        .map(|i| argmax_lowest(gains.sinr.row(i).iter().copied()).expect("at least one BS"))
        .collect();
    Association::new(assign, gains.n_bs()).expect("argmax is in range")
}

/// Max-SINR followed by the sampler's deterministic cap repair, with SINR
/// as the preference.
pub fn max_sinr_repaired(gains: &LinkGains, caps: &LoadCaps) -> Result<Association> {
    let mut a = max_sinr_assoc(gains);
    repair_to_caps(&mut a, caps, |i, j| gains.sinr.get(i, j))?;
    Ok(a)
}

/// `J^I` as a float, so that huge instances do not overflow.
pub fn candidate_count(n_users: usize, n_bs: usize) -> f64 {
    (n_bs as f64).powi(n_users as i32)
}

/// Decodes enumeration index `k` into an assignment; user 0 is the most
/// significant digit, so index order is lexicographic order.
fn decode(mut k: u64, n_users: usize, n_bs: usize, out: &mut [usize]) {
    for i in (0..n_users).rev() {
        out[i] = (k % n_bs as u64) as usize;
        k /= n_bs as u64;
    }
}

/// Global optimum by enumerating all `J^I` one-hot associations.
/// Ties go to the lexicographically smallest assignment.
pub fn exhaustive_search(
    gains: &LinkGains,
    caps: &LoadCaps,
    utility: &UtilitySpec,
    budget: u64,
) -> Result<(Association, f64)> {
    let (n_users, n_bs) = (gains.n_users(), gains.n_bs());
    let count = candidate_count(n_users, n_bs);
    if count > budget as f64 {
        return Err(Error::BudgetExceeded {
            candidates: count,
            budget,
        });
    }
    if caps.n_bs() != n_bs {
        return Err(Error::Contract(format!(
            "caps have J={}, link tables have J={n_bs}",
            caps.n_bs()
        )));
    }
    if caps.total() < n_users as u64 {
        return Err(Error::Contract("load caps cannot host every user".into()));
    }
    let total = count as u64;
    let chunk = 4096u64;
    let n_chunks = total.div_ceil(chunk);

    let best = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Option<(u64, f64)>> {
            let mut assign = vec![0usize; n_users];
            let mut local: Option<(u64, f64)> = None;
            for k in c * chunk..((c + 1) * chunk).min(total) {
                decode(k, n_users, n_bs, &mut assign);
                let a = Association::new(assign.clone(), n_bs)?;
                if !is_feasible(&a, caps)? {
                    continue;
                }
                let f = score(&a, gains, utility)?;
                if local.is_none_or(|(_, b)| f > b) {
                    local = Some((k, f));
                }
            }
            Ok(local)
        })
        .try_reduce(
            || None,
            |x, y| {
                Ok(match (x, y) {
                    (Some(a), Some(b)) => Some(if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }),
                    (a, None) => a,
                    (None, b) => b,
                })
            },
        )?;

    let (k, f) = best.ok_or_else(|| Error::Contract("no feasible association".into()))?;
    let mut assign = vec![0usize; n_users];
    decode(k, n_users, n_bs, &mut assign);
    Ok((Association::new(assign, n_bs)?, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualConfig {
    pub step_size: f64,
    pub n_iterations: usize,
    /// Initial price for every BS.
    pub init_price: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            step_size: 0.05,
            n_iterations: 100,
            init_price: 1.0,
        }
    }
}

impl DualConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "dual step_size must be nonnegative, got {}",
                self.step_size
            )));
        }
        if !self.init_price.is_finite() {
            return Err(Error::Config("dual init_price must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualTrace {
    /// Prices after each update; `prices[0]` is the initial vector.
    pub prices: Vec<Vec<f64>>,
}

/// Dual decomposition of the relaxed log-utility problem with equal sharing.
///
/// Writing the load of BS `j` as `K_j` and pricing `K_j = sum_i x_ij` with
/// `mu_j`, users pick `argmax_j ln r_ij - mu_j`, each BS's optimal `K_j` is
/// `exp(mu_j - 1)`, and prices follow the subgradient
/// `mu_j += step * (load_j - exp(mu_j - 1))`.
///
/// This is a reconstruction of the usual Lagrangian baseline, not a port of
/// a published implementation; its step size and iteration count are free.
pub fn dual_subgradient_assoc(
    gains: &LinkGains,
    utility: &UtilitySpec,
    cfg: &DualConfig,
) -> Result<(Association, DualTrace)> {
    if utility.kind != UtilityKind::Logarithmic {
        return Err(Error::Contract(
            "dual baseline requires logarithmic utility".into(),
        ));
    }
    utility.validate()?;
    cfg.validate()?;
    let (n_users, n_bs) = (gains.n_users(), gains.n_bs());

    // ln of per-link rate in utility units; None for dead links
    let log_rate: Vec<Vec<Option<f64>>> = (0..n_users)
        .map(|i| {
            gains
                .full_rate
                .row(i)
                .iter()
                .map(|&r| (r > 0.0).then(|| (r / utility.rate_unit_scale).ln()))
                .collect()
        })
        .collect();
    if let Some(i) = log_rate
        .iter()
        .position(|row| row.iter().all(Option::is_none))
    {
        return Err(Error::UnreachableUser { user: i });
    }

    let user_rule = |mu: &[f64]| -> Association {
        let assign = log_rate
            .iter()
            .map(|row| {
                argmax_lowest(
                    row.iter()
                        .zip(mu)
                        .map(|(l, m)| l.map_or(f64::NEG_INFINITY, |l| l - m)),
                )
                .unwrap()
            })
            .collect();
        Association::new(assign, n_bs).expect("argmax is in range")
    };

    let mut mu = vec![cfg.init_price; n_bs];
    let mut prices = vec![mu.clone()];
    for _ in 0..cfg.n_iterations {
        let loads = bs_loads(&user_rule(&mu));
        for (m, &l) in mu.iter_mut().zip(&loads) {
            *m += cfg.step_size * (l as f64 - (*m - 1.0).exp());
        }
        prices.push(mu.clone());
    }
    Ok((user_rule(&mu), DualTrace { prices }))
}
