//! Scenario configuration document.
//!
//! Defaults reproduce the single-cell two-tier setup: one macro BS at
//! 43 dBm, three small cells at 23 dBm, thirty users in a 500 m disk,
//! 10 MHz of shared bandwidth and a 128.1 + 37.6 log10(d_km) path loss.

use serde::{Deserialize, Serialize};

use crate::assoc::{LoadCaps, UtilitySpec};
use crate::error::{Error, Result};

/// Size limits enforced by validation; link tables hold `users x BSs` entries.
pub const MAX_USERS: usize = 100_000;
pub const MAX_SBS: usize = 10_000;
pub const MAX_LINKS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            intercept_db: 128.1,
            slope_db_per_decade: 37.6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowingParams {
    pub enabled: bool,
    pub sigma_db: f64,
}

impl Default for ShadowingParams {
    fn default() -> Self {
        Self {
            enabled: false,
            sigma_db: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinDistances {
    pub mbs_sbs_m: f64,
    pub sbs_sbs_m: f64,
    /// User-BS distances below this are clamped before path loss.
    pub user_bs_m: f64,
}

impl Default for MinDistances {
    fn default() -> Self {
        Self {
            mbs_sbs_m: 75.0,
            sbs_sbs_m: 40.0,
            user_bs_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_users: usize,
    pub n_sbs: usize,
    pub cell_radius_m: f64,
    pub mbs_power_dbm: f64,
    pub sbs_power_dbm: f64,
    pub bandwidth_hz: f64,
    /// Noise power over the full bandwidth.
    pub noise_dbm: f64,
    pub pathloss: PathLossParams,
    pub shadowing: ShadowingParams,
    pub min_distances: MinDistances,
    pub placement_retries: u32,
    pub utility: UtilitySpec,
    /// Per-BS load caps, macro first. `None` means inactive (cap = I everywhere).
    pub load_caps: Option<Vec<u32>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_users: 30,
            n_sbs: 3,
            cell_radius_m: 500.0,
            mbs_power_dbm: 43.0,
            sbs_power_dbm: 23.0,
            bandwidth_hz: 10e6,
            // -174 dBm/Hz thermal floor over 10 MHz, 0 dB noise figure
            noise_dbm: -104.0,
            pathloss: PathLossParams::default(),
            shadowing: ShadowingParams::default(),
            min_distances: MinDistances::default(),
            placement_retries: 1000,
            utility: UtilitySpec::default(),
            load_caps: None,
        }
    }
}

impl ScenarioConfig {
    pub fn n_bs(&self) -> usize {
        self.n_sbs.saturating_add(1)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("cell_radius_m", self.cell_radius_m),
            ("mbs_power_dbm", self.mbs_power_dbm),
            ("sbs_power_dbm", self.sbs_power_dbm),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_dbm", self.noise_dbm),
            ("pathloss.intercept_db", self.pathloss.intercept_db),
            (
                "pathloss.slope_db_per_decade",
                self.pathloss.slope_db_per_decade,
            ),
            ("shadowing.sigma_db", self.shadowing.sigma_db),
            ("min_distances.mbs_sbs_m", self.min_distances.mbs_sbs_m),
            ("min_distances.sbs_sbs_m", self.min_distances.sbs_sbs_m),
            ("min_distances.user_bs_m", self.min_distances.user_bs_m),
        ];
        if let Some((k, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Config(format!("{k} must be finite")));
        }
        if self.cell_radius_m <= 0.0 {
            return Err(Error::Config(format!(
                "cell_radius_m must be > 0, got {}",
                self.cell_radius_m
            )));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::Config(format!(
                "bandwidth_hz must be > 0, got {}",
                self.bandwidth_hz
            )));
        }
        if self.min_distances.user_bs_m <= 0.0 {
            return Err(Error::Config("min_distances.user_bs_m must be > 0".into()));
        }
        if self.min_distances.mbs_sbs_m < 0.0 || self.min_distances.sbs_sbs_m < 0.0 {
            return Err(Error::Config("min_distances must be nonnegative".into()));
        }
        if self.shadowing.sigma_db < 0.0 {
            return Err(Error::Config(
                "shadowing.sigma_db must be nonnegative".into(),
            ));
        }
        if self.n_users > MAX_USERS
            || self.n_sbs > MAX_SBS
            || self.n_users * self.n_bs() > MAX_LINKS
        {
            return Err(Error::Config(format!(
                "network too large: {} users x {} base stations (limits {MAX_USERS} users, {MAX_SBS} small cells, \
                 {MAX_LINKS} links)",
                self.n_users,
                self.n_bs()
            )));
        }
        if self.placement_retries == 0 {
            return Err(Error::Config("placement_retries must be > 0".into()));
        }
        self.utility.validate()?;
        if self.load_caps.is_some() {
            self.caps()?;
        }
        Ok(())
    }

    /// Resolved load caps; inactive caps become `n_users` for every BS.
    pub fn caps(&self) -> Result<LoadCaps> {
        match &self.load_caps {
            None => Ok(LoadCaps::inactive(self.n_users, self.n_bs())),
            Some(c) => {
                if c.len() != self.n_bs() {
                    return Err(Error::Config(format!(
                        "load_caps has {} entries, scenario has {} base stations",
                        c.len(),
                        self.n_bs()
                    )));
                }
                LoadCaps::new(c.clone(), self.n_users).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }
}
