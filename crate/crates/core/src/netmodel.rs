//! Network deployments and the physical layer: path loss, channel gains,
//! SINR and full-bandwidth link rates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenario::{PathLossParams, ScenarioConfig};
use crate::units::{db_to_linear, dbm_to_watts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Macro,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseStation {
    pub position: [f64; 2],
    pub tx_power_dbm: f64,
    pub tier: Tier,
}

/// Dense row-major matrix of reals, users along rows and BSs along columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Contract("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn is_consistent(&self) -> bool {
        self.data.len() == self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub bss: Vec<BaseStation>,
    pub users: Vec<[f64; 2]>,
    pub cell_radius_m: f64,
    pub bandwidth_hz: f64,
    pub noise_power_dbm: f64,
    pub pathloss: PathLossParams,
    pub min_user_bs_m: f64,
    /// Per-link shadowing in dB (users x BSs), present only when enabled.
    #[serde(default)]
    pub shadowing_db: Option<Matrix>,
    pub seed: u64,
}

impl Deployment {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_bs(&self) -> usize {
        self.bss.len()
    }

    pub fn tiers(&self) -> Vec<Tier> {
        self.bss.iter().map(|b| b.tier).collect()
    }

    fn center(&self) -> [f64; 2] {
        self.bss
            .iter()
            .find(|b| b.tier == Tier::Macro)
            .map_or([0.0, 0.0], |b| b.position)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::Config(
                "bandwidth_hz must be positive and finite".into(),
            ));
        }
        if !(self.cell_radius_m > 0.0 && self.cell_radius_m.is_finite()) {
            return Err(Error::Config(
                "cell_radius_m must be positive and finite".into(),
            ));
        }
        if !(self.min_user_bs_m > 0.0 && self.min_user_bs_m.is_finite()) {
            return Err(Error::Config(
                "min_user_bs_m must be positive and finite".into(),
            ));
        }
        if !self.noise_power_dbm.is_finite()
            || !self.pathloss.intercept_db.is_finite()
            || !self.pathloss.slope_db_per_decade.is_finite()
        {
            return Err(Error::Config(
                "noise and path-loss parameters must be finite".into(),
            ));
        }
        if self.bss.is_empty() {
            return Err(Error::Config("deployment has no base stations".into()));
        }
        if self.bss.iter().any(|b| !b.tx_power_dbm.is_finite()) {
            return Err(Error::Config("transmit powers must be finite".into()));
        }
        let c = self.center();
        let tol = self.cell_radius_m * (1.0 + 1e-9);
        let points = self.users.iter().chain(
            self.bss
                .iter()
                .filter(|b| b.tier == Tier::Small)
                .map(|b| &b.position),
        );
        for p in points {
            if !(p[0].is_finite() && p[1].is_finite()) || distance(*p, c) > tol {
                return Err(Error::Config(format!(
                    "position {p:?} lies outside the cell"
                )));
            }
        }
        if let Some(s) = &self.shadowing_db {
            if !s.is_consistent()
                || s.rows() != self.n_users()
                || s.cols() != self.n_bs()
                || s.as_slice().iter().any(|v| !v.is_finite())
            {
                return Err(Error::Config(
                    "shadowing matrix does not match deployment".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dep: Self = serde_json::from_str(text)?;
        dep.validate()?;
        Ok(dep)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("deployment serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    /// Linear channel gain per link.
    pub gain: Matrix,
    /// Linear SINR per link.
    pub sinr: Matrix,
    /// W log2(1 + SINR) in bit/s, before division by the BS load.
    pub full_rate: Matrix,
    pub bandwidth_hz: f64,
}

impl LinkGains {
    pub fn n_users(&self) -> usize {
        self.sinr.rows()
    }

    pub fn n_bs(&self) -> usize {
        self.sinr.cols()
    }

    /// Builds link tables straight from an SINR matrix; used by tests and
    /// by callers that bring their own channel model.
    pub fn from_sinr(sinr: Matrix, bandwidth_hz: f64) -> Self {
        let full_rate = sinr.map(|s| bandwidth_hz * (1.0 + s).log2());
        Self {
            gain: sinr.clone(),
            sinr,
            full_rate,
            bandwidth_hz,
        }
    }

    /// Builds link tables from full-bandwidth rates; `sinr` is back-solved.
    pub fn from_full_rates(full_rate: Matrix, bandwidth_hz: f64) -> Self {
        let sinr = full_rate.map(|r| (r / bandwidth_hz).exp2() - 1.0);
        Self {
            gain: sinr.clone(),
            sinr,
            full_rate,
            bandwidth_hz,
        }
    }

    /// SHA-256 over the bit patterns of all three tables.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_users() as u64).to_le_bytes());
        h.update((self.n_bs() as u64).to_le_bytes());
        for m in [&self.gain, &self.sinr, &self.full_rate] {
            for v in m.as_slice() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Path loss in dB at `distance_m` meters: intercept + slope * log10(d_km).
pub fn path_loss_db(distance_m: f64, pathloss: &PathLossParams) -> Result<f64> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(Error::Domain(format!(
            "path loss needs a positive finite distance, got {distance_m}"
        )));
    }
    Ok(pathloss.intercept_db + pathloss.slope_db_per_decade * (distance_m / 1000.0).log10())
}

pub fn compute_link_gains(dep: &Deployment) -> Result<LinkGains> {
    dep.validate()?;
    let (n_users, n_bs) = (dep.n_users(), dep.n_bs());
    let powers: Vec<f64> = dep
        .bss
        .iter()
        .map(|b| dbm_to_watts(b.tx_power_dbm))
        .collect();
    let noise = dbm_to_watts(dep.noise_power_dbm);

    let mut gain = Matrix::zeros(n_users, n_bs);
    for (i, u) in dep.users.iter().enumerate() {
        for (j, bs) in dep.bss.iter().enumerate() {
            let d = distance(*u, bs.position).max(dep.min_user_bs_m);
            let mut loss_db = path_loss_db(d, &dep.pathloss)?;
            if let Some(sh) = &dep.shadowing_db {
                loss_db += sh.get(i, j);
            }
            gain.set(i, j, db_to_linear(-loss_db));
        }
    }

    let mut sinr = Matrix::zeros(n_users, n_bs);
    let mut full_rate = Matrix::zeros(n_users, n_bs);
    for i in 0..n_users {
        for j in 0..n_bs {
            let signal = gain.get(i, j) * powers[j];
            let interference: f64 = (0..n_bs)
                .filter(|&q| q != j)
                .map(|q| gain.get(i, q) * powers[q])
                .sum();
            let s = signal / (interference + noise);
            sinr.set(i, j, s);
            full_rate.set(i, j, dep.bandwidth_hz * s.ln_1p() / std::f64::consts::LN_2);
        }
    }
    Ok(LinkGains {
        gain,
        sinr,
        full_rate,
        bandwidth_hz: dep.bandwidth_hz,
    })
}

fn uniform_in_disk(rng: &mut impl Rng, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Draws one network realization. Deterministic in `(cfg, seed)`.
pub fn generate_deployment(cfg: &ScenarioConfig, seed: u64) -> Result<Deployment> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = [0.0, 0.0];

    let mut bss = vec![BaseStation {
        position: origin,
        tx_power_dbm: cfg.mbs_power_dbm,
        tier: Tier::Macro,
    }];
    for k in 0..cfg.n_sbs {
        let placed = (0..cfg.placement_retries).find_map(|_| {
            let p = uniform_in_disk(&mut rng, cfg.cell_radius_m);
            let ok = distance(p, origin) >= cfg.min_distances.mbs_sbs_m
                && bss[1..]
                    .iter()
                    .all(|b| distance(p, b.position) >= cfg.min_distances.sbs_sbs_m);
            ok.then_some(p)
        });
        let Some(position) = placed else {
            return Err(Error::Generation(format!(
                "could not place small cell {k} after {} attempts",
                cfg.placement_retries
            )));
        };
        bss.push(BaseStation {
            position,
            tx_power_dbm: cfg.sbs_power_dbm,
            tier: Tier::Small,
        });
    }

    let users: Vec<[f64; 2]> = (0..cfg.n_users)
        .map(|_| uniform_in_disk(&mut rng, cfg.cell_radius_m))
        .collect();

    let shadowing_db = if cfg.shadowing.enabled && cfg.shadowing.sigma_db > 0.0 {
        let normal =
            Normal::new(0.0, cfg.shadowing.sigma_db).map_err(|e| Error::Config(e.to_string()))?;
        let mut m = Matrix::zeros(users.len(), bss.len());
        for i in 0..users.len() {
            for j in 0..bss.len() {
                m.set(i, j, normal.sample(&mut rng));
            }
        }
        Some(m)
    } else {
        None
    };

    Ok(Deployment {
        bss,
        users,
        cell_radius_m: cfg.cell_radius_m,
        bandwidth_hz: cfg.bandwidth_hz,
        noise_power_dbm: cfg.noise_dbm,
        pathloss: cfg.pathloss,
        min_user_bs_m: cfg.min_distances.user_bs_m,
        shadowing_db,
        seed,
    })
}
