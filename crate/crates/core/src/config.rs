//! System parameters, derived physical constants and the flat key-value
//! configuration format.
//!
//! Configuration files are flat `key = value` lines (a TOML subset). Keys
//! mirror the [`SystemConfig`] field names. Power keys also accept a `_dbm`
//! suffixed spelling, e.g. `noise_power_dbm = -90`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which transmitter a waveguide belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Primary transmitter (PT), serving the primary user.
    Primary,
    /// Secondary transmitter (ST), serving the secondary user.
    Secondary,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Primary => write!(f, "PT"),
            Role::Secondary => write!(f, "ST"),
        }
    }
}

/// Closed interval `[lo, hi]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }
}

/// Converts dBm to watts (0 dBm = 1 mW).
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

/// All physical and protocol parameters of a scenario. Powers are in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub carrier_frequency: f64,
    pub light_speed: f64,
    pub effective_index: f64,
    pub ricean_factor: f64,
    pub pathloss_exponent: f64,
    pub waveguide_length: f64,
    pub waveguide_height: f64,
    /// Distance between the two waveguides along y; PT sits at `-d/2`, ST at `+d/2`.
    pub waveguide_separation: f64,
    pub feed_x_pt: f64,
    pub feed_x_st: f64,
    pub pa_count_primary: usize,
    pub pa_count_secondary: usize,
    pub power_pt: f64,
    pub power_st_max: f64,
    pub interference_threshold: f64,
    pub noise_power: f64,
    pub user_region_width: f64,
    pub k_max: u32,
    /// `None` means the whole waveguide `[0, waveguide_length]`.
    pub deployment_region_pt: Option<Interval>,
    pub deployment_region_st: Option<Interval>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 28e9,
            light_speed: 3e8,
            effective_index: 1.4,
            ricean_factor: 4.0,
            pathloss_exponent: 2.2,
            waveguide_length: 15.0,
            waveguide_height: 3.0,
            waveguide_separation: 12.0,
            feed_x_pt: 0.0,
            feed_x_st: 0.0,
            pa_count_primary: 5,
            pa_count_secondary: 5,
            power_pt: dbm_to_watts(0.0),
            power_st_max: dbm_to_watts(0.0),
            interference_threshold: dbm_to_watts(-80.0),
            noise_power: dbm_to_watts(-90.0),
            user_region_width: 10.0,
            k_max: DEFAULT_K_MAX,
            deployment_region_pt: None,
            deployment_region_st: None,
        }
    }
}

/// Default integer search bound for the wavelength-level phase search.
pub const DEFAULT_K_MAX: u32 = 2;

/// Constants that follow from the carrier and waveguide parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    /// Free-space wavelength `c / fc`.
    pub wavelength: f64,
    /// In-waveguide wavelength `wavelength / effective_index`.
    pub guided_wavelength: f64,
    /// Channel gain at the reference distance, `c^2 / (16 pi^2 fc^2)`.
    pub reference_gain: f64,
    /// Minimum inter-element spacing, half a free-space wavelength.
    pub min_spacing: f64,
}

/// Computes wavelength, guided wavelength, reference gain and minimum spacing.
pub fn derive_constants(config: &SystemConfig) -> Result<DerivedConstants> {
    if !(config.carrier_frequency > 0.0) || !config.carrier_frequency.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "carrier_frequency must be positive, got {}",
            config.carrier_frequency
        )));
    }
    if !(config.light_speed > 0.0) || !config.light_speed.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "light_speed must be positive, got {}",
            config.light_speed
        )));
    }
    if !(config.effective_index >= 1.0) || !config.effective_index.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "effective_index must be >= 1, got {}",
            config.effective_index
        )));
    }
    let wavelength = config.light_speed / config.carrier_frequency;
    Ok(DerivedConstants {
        wavelength,
        guided_wavelength: wavelength / config.effective_index,
        reference_gain: wavelength * wavelength / (16.0 * PI * PI),
        min_spacing: wavelength / 2.0,
    })
}

impl SystemConfig {
    /// Validated derived constants; fails on any invalid field.
    pub fn constants(&self) -> Result<DerivedConstants> {
        self.validate()?;
        derive_constants(self)
    }

    pub fn validate(&self) -> Result<()> {
        derive_constants(self)?;
        let finite = [
            ("ricean_factor", self.ricean_factor),
            ("pathloss_exponent", self.pathloss_exponent),
            ("waveguide_length", self.waveguide_length),
            ("waveguide_height", self.waveguide_height),
            ("waveguide_separation", self.waveguide_separation),
            ("feed_x_pt", self.feed_x_pt),
            ("feed_x_st", self.feed_x_st),
            ("user_region_width", self.user_region_width),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite")));
            }
        }
        if self.ricean_factor < 0.0 {
            return Err(Error::InvalidConfig("ricean_factor must be >= 0".into()));
        }
        if self.pathloss_exponent < 2.0 {
            return Err(Error::InvalidConfig("pathloss_exponent must be >= 2".into()));
        }
        for (name, p) in [
            ("power_pt", self.power_pt),
            ("power_st_max", self.power_st_max),
            ("interference_threshold", self.interference_threshold),
            ("noise_power", self.noise_power),
        ] {
            if !(p > 0.0) || p.is_nan() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {p}")));
            }
        }
        if self.pa_count_primary == 0 || self.pa_count_secondary == 0 {
            return Err(Error::InvalidConfig("PA counts must be >= 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be >= 1".into()));
        }
        if !(self.waveguide_length > 0.0) {
            return Err(Error::InvalidConfig("waveguide_length must be positive".into()));
        }
        if self.user_region_width < 0.0 {
            return Err(Error::InvalidConfig("user_region_width must be >= 0".into()));
        }
        for role in [Role::Primary, Role::Secondary] {
            let r = self.deployment_region(role);
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo > r.hi {
                return Err(Error::InvalidConfig(format!("deployment region of {role} is empty")));
            }
            if r.lo < 0.0 || r.hi > self.waveguide_length {
                return Err(Error::InvalidConfig(format!(
                    "deployment region of {role} [{}, {}] exceeds the waveguide [0, {}]",
                    r.lo, r.hi, self.waveguide_length
                )));
            }
        }
        Ok(())
    }

    pub fn pa_count(&self, role: Role) -> usize {
        match role {
            Role::Primary => self.pa_count_primary,
            Role::Secondary => self.pa_count_secondary,
        }
    }

    pub fn feed_x(&self, role: Role) -> f64 {
        match role {
            Role::Primary => self.feed_x_pt,
            Role::Secondary => self.feed_x_st,
        }
    }

    /// y-coordinate of the waveguide: `-d/2` for PT, `+d/2` for ST.
    pub fn waveguide_y(&self, role: Role) -> f64 {
        match role {
            Role::Primary => -self.waveguide_separation / 2.0,
            Role::Secondary => self.waveguide_separation / 2.0,
        }
    }

    pub fn deployment_region(&self, role: Role) -> Interval {
        let explicit = match role {
            Role::Primary => self.deployment_region_pt,
            Role::Secondary => self.deployment_region_st,
        };
        explicit.unwrap_or(Interval::new(0.0, self.waveguide_length))
    }

    /// Transmit power budget: `P_PT` for the primary, `P_ST` for the secondary.
    pub fn power_budget(&self, role: Role) -> f64 {
        match role {
            Role::Primary => self.power_pt,
            Role::Secondary => self.power_st_max,
        }
    }

    /// Parses a flat key-value configuration on top of the defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))?;
        let mut config = SystemConfig::default();
        for (key, value) in &table {
            if !config.set_param(key, value)? {
                return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one key. Returns `Ok(false)` when the key is not a config key.
    pub fn set_param(&mut self, key: &str, value: &toml::Value) -> Result<bool> {
        let float = || as_f64(key, value);
        let int = || -> Result<i64> {
            value
                .as_integer()
                .ok_or_else(|| Error::InvalidConfig(format!("`{key}` must be an integer")))
        };
        match key {
            "carrier_frequency" => self.carrier_frequency = float()?,
            "light_speed" => self.light_speed = float()?,
            "effective_index" => self.effective_index = float()?,
            "ricean_factor" => self.ricean_factor = float()?,
            "pathloss_exponent" => self.pathloss_exponent = float()?,
            "waveguide_length" => self.waveguide_length = float()?,
            "waveguide_height" => self.waveguide_height = float()?,
            "waveguide_separation" => self.waveguide_separation = float()?,
            "feed_x_pt" => self.feed_x_pt = float()?,
            "feed_x_st" => self.feed_x_st = float()?,
            "power_pt" => self.power_pt = float()?,
            "power_st_max" => self.power_st_max = float()?,
            "interference_threshold" => self.interference_threshold = float()?,
            "noise_power" => self.noise_power = float()?,
            "power_pt_dbm" => self.power_pt = dbm_to_watts(float()?),
            "power_st_max_dbm" => self.power_st_max = dbm_to_watts(float()?),
            "interference_threshold_dbm" => self.interference_threshold = dbm_to_watts(float()?),
            "noise_power_dbm" => self.noise_power = dbm_to_watts(float()?),
            "user_region_width" => self.user_region_width = float()?,
            "pa_count_primary" => self.pa_count_primary = positive(key, int()?)? as usize,
            "pa_count_secondary" => self.pa_count_secondary = positive(key, int()?)? as usize,
            "k_max" => self.k_max = positive(key, int()?)?.min(u32::MAX as i64) as u32,
            "deployment_region_pt" => self.deployment_region_pt = Some(as_interval(key, value)?),
            "deployment_region_st" => self.deployment_region_st = Some(as_interval(key, value)?),
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn as_f64(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::InvalidConfig(format!("`{key}` must be a number"))),
    }
}

fn positive(key: &str, v: i64) -> Result<i64> {
    if v < 1 {
        return Err(Error::InvalidConfig(format!("`{key}` must be >= 1, got {v}")));
    }
    Ok(v)
}

fn as_interval(key: &str, value: &toml::Value) -> Result<Interval> {
    let arr = value
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::InvalidConfig(format!("`{key}` must be a two-element array")))?;
    Ok(Interval::new(as_f64(key, &arr[0])?, as_f64(key, &arr[1])?))
}
