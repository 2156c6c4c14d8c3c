//! The association decision variable, load caps, and the network utility
//! objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::LinkGains;

/// Each user's serving BS. Canonical form of the one-hot matrix `x`;
/// the flattened binary view has `x[i * J + j] = 1` iff `assign[i] == j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Association {
    assign: Vec<usize>,
    n_bs: usize,
}

impl Association {
    pub fn new(assign: Vec<usize>, n_bs: usize) -> Result<Self> {
        if let Some((i, &j)) = assign.iter().enumerate().find(|(_, &j)| j >= n_bs) {
            return Err(Error::Contract(format!(
                "user {i} assigned to BS {j}, only {n_bs} exist"
            )));
        }
        if n_bs == 0 && !assign.is_empty() {
            return Err(Error::Contract("users present but no base stations".into()));
        }
        Ok(Self { assign, n_bs })
    }

    pub fn n_users(&self) -> usize {
        self.assign.len()
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assign
    }

    #[inline]
    pub fn bs_of(&self, user: usize) -> usize {
        self.assign[user]
    }

    /// Flattened binary vector of length `I * J`.
    pub fn to_binary(&self) -> Vec<u8> {
        let mut x = vec![0u8; self.assign.len() * self.n_bs];
        for (i, &j) in self.assign.iter().enumerate() {
            x[i * self.n_bs + j] = 1;
        }
        x
    }

    /// Inverse of [`to_binary`](Self::to_binary); every row must be one-hot.
    pub fn from_binary(x: &[u8], n_bs: usize) -> Result<Self> {
        if n_bs == 0 {
            // only the empty association has no base stations
            return if x.is_empty() {
                Self::new(Vec::new(), 0)
            } else {
                Err(Error::Contract("non-empty binary vector with J=0".into()))
            };
        }
        if !x.len().is_multiple_of(n_bs) {
            return Err(Error::Contract(format!(
                "binary vector length {} not divisible by J={n_bs}",
                x.len()
            )));
        }
        let assign = x
            .chunks(n_bs)
            .enumerate()
            .map(|(i, row)| {
                let mut ones = row.iter().enumerate().filter(|(_, &b)| b != 0);
                match (ones.next(), ones.next()) {
                    (Some((j, &1)), None) => Ok(j),
                    _ => Err(Error::Contract(format!("row {i} is not one-hot"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(assign, n_bs)
    }

    /// Parses the JSON integer-array form.
    pub fn from_json(text: &str, n_bs: usize) -> Result<Self> {
        let assign: Vec<usize> = serde_json::from_str(text)?;
        Self::new(assign, n_bs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.assign).expect("integer array serializes")
    }

    pub(crate) fn set(&mut self, user: usize, bs: usize) {
        debug_assert!(bs < self.n_bs);
        self.assign[user] = bs;
    }
}

impl Serialize for Association {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.assign.serialize(s)
    }
}

/// Per-BS load caps `L_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadCaps {
    cap: Vec<u32>,
}

impl LoadCaps {
    /// Fails when the caps cannot host `n_users` in total.
    pub fn new(cap: Vec<u32>, n_users: usize) -> Result<Self> {
        let total: u64 = cap.iter().map(|&c| u64::from(c)).sum();
        if total < n_users as u64 {
            return Err(Error::Contract(format!(
                "load caps sum to {total}, fewer than {n_users} users"
            )));
        }
        Ok(Self { cap })
    }

    /// Caps equal to the user count everywhere, i.e. never binding.
    pub fn inactive(n_users: usize, n_bs: usize) -> Self {
        let c = u32::try_from(n_users).unwrap_or(u32::MAX);
        Self { cap: vec![c; n_bs] }
    }

    pub fn n_bs(&self) -> usize {
        self.cap.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.cap
    }

    pub fn total(&self) -> u64 {
        self.cap.iter().map(|&c| u64::from(c)).sum()
    }

    /// True when no association of `n_users` users can exceed any cap.
    pub fn is_inactive_for(&self, n_users: usize) -> bool {
        self.cap.iter().all(|&c| c as usize >= n_users)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Logarithmic,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    Natural,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub log_base: LogBase,
    /// Rates in bit/s are divided by this before the utility (1e6 = Mbps).
    pub rate_unit_scale: f64,
}

impl Default for UtilitySpec {
    fn default() -> Self {
        Self {
            kind: UtilityKind::Logarithmic,
            log_base: LogBase::Natural,
            rate_unit_scale: 1e6,
        }
    }
}

impl UtilitySpec {
    pub fn identity() -> Self {
        Self {
            kind: UtilityKind::Identity,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_unit_scale > 0.0 && self.rate_unit_scale.is_finite()) {
            return Err(Error::Config(
                "utility.rate_unit_scale must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// U(rate) for one user, rate in bit/s. `None` when the log is undefined.
    #[inline]
    pub fn of_rate(&self, rate_bps: f64) -> Option<f64> {
        let r = rate_bps / self.rate_unit_scale;
        match self.kind {
            UtilityKind::Identity => Some(r),
            UtilityKind::Logarithmic if r > 0.0 => Some(match self.log_base {
                LogBase::Natural => r.ln(),
                LogBase::Two => r.log2(),
            }),
            UtilityKind::Logarithmic => None,
        }
    }
}

fn check_dims(a: &Association, g: &LinkGains) -> Result<()> {
    if a.n_users() != g.n_users() || a.n_bs() != g.n_bs() {
        return Err(Error::Contract(format!(
            "association is {}x{}, link tables are {}x{}",
            a.n_users(),
            a.n_bs(),
            g.n_users(),
            g.n_bs()
        )));
    }
    Ok(())
}

pub fn bs_loads(a: &Association) -> Vec<usize> {
    let mut loads = vec![0usize; a.n_bs()];
    for &j in a.as_slice() {
        loads[j] += 1;
    }
    loads
}

pub fn is_feasible(a: &Association, caps: &LoadCaps) -> Result<bool> {
    if a.n_bs() != caps.n_bs() {
        return Err(Error::Contract(format!(
            "association has J={}, caps have J={}",
            a.n_bs(),
            caps.n_bs()
        )));
    }
    Ok(bs_loads(a)
        .iter()
        .zip(caps.as_slice())
        .all(|(&l, &c)| l as u64 <= u64::from(c)))
}

/// Per-user rate in bit/s under equal sharing of each BS's bandwidth.
pub fn user_rates(a: &Association, g: &LinkGains) -> Result<Vec<f64>> {
    check_dims(a, g)?;
    let loads = bs_loads(a);
    Ok(a.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &j)| g.full_rate.get(i, j) / loads[j] as f64)
        .collect())
}

/// Sums per-user utilities; fails on the first user whose log utility is undefined.
pub fn utility_of_rates(rates: &[f64], u: &UtilitySpec) -> Result<f64> {
    rates.iter().enumerate().try_fold(0.0, |acc, (i, &r)| {
        u.of_rate(r)
            .map(|v| acc + v)
            .ok_or(Error::NonPositiveRate { user: i, rate: r })
    })
}

/// Network utility: sum of U(R_i) over users.
pub fn evaluate_utility(a: &Association, g: &LinkGains, u: &UtilitySpec) -> Result<f64> {
    utility_of_rates(&user_rates(a, g)?, u)
}

/// Optimizer-side objective: like [`evaluate_utility`] but a zero-rate user
/// scores the association as negative infinity instead of erroring.
pub fn score(a: &Association, g: &LinkGains, u: &UtilitySpec) -> Result<f64> {
    match evaluate_utility(a, g, u) {
        Err(Error::NonPositiveRate { .. }) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

/// Moves users off over-cap BSs until every cap holds.
///
/// Over-cap BSs are drained in index order. The evicted user is the one
/// with the lowest `preference(user, current_bs)` (ties: highest user
/// index); it moves to the BS with spare capacity maximizing
/// `preference(user, bs)` (ties: lowest BS index).
pub fn repair_to_caps(
    a: &mut Association,
    caps: &LoadCaps,
    preference: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    if a.n_bs() != caps.n_bs() {
        return Err(Error::Contract(format!(
            "association has J={}, caps have J={}",
            a.n_bs(),
            caps.n_bs()
        )));
    }
    if caps.total() < a.n_users() as u64 {
        return Err(Error::Contract("load caps cannot host every user".into()));
    }
    let cap: Vec<usize> = caps.as_slice().iter().map(|&c| c as usize).collect();
    let mut loads = bs_loads(a);
    for j in 0..a.n_bs() {
        while loads[j] > cap[j] {
            let evict = (0..a.n_users())
                .filter(|&i| a.bs_of(i) == j)
                .min_by(|&x, &y| {
                    preference(x, j)
                        .total_cmp(&preference(y, j))
                        .then(y.cmp(&x))
                })
                .expect("over-cap BS has users");
            let target = (0..a.n_bs())
                .filter(|&k| k != j && loads[k] < cap[k])
                .max_by(|&x, &y| {
                    preference(evict, x)
                        .total_cmp(&preference(evict, y))
                        .then(y.cmp(&x))
                })
                .expect("caps total covers all users");
            a.set(evict, target);
            loads[j] -= 1;
            loads[target] += 1;
        }
    }
    Ok(())
}
