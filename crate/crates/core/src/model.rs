//! Geometry, deterministic channel terms and the closed-form average
//! spectral efficiency.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel_mc::ChannelRealization;
use crate::config::{Role, SystemConfig};
use crate::error::{Error, Result};

/// Distances below this are treated as a model singularity.
pub const MIN_LINK_DISTANCE: f64 = 1e-6;

/// Slack allowed on the minimum-spacing constraint.
pub const SPACING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// x-coordinates of the activated pinching antennas on one waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchLayout {
    pub role: Role,
    pub xs: Vec<f64>,
}

impl PinchLayout {
    pub fn new(role: Role, xs: Vec<f64>) -> Self {
        Self { role, xs }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Position of element `i` in 3D (on the waveguide at height `l`).
    pub fn position(&self, i: usize, config: &SystemConfig) -> Vec3 {
        Vec3::new(self.xs[i], config.waveguide_y(self.role), config.waveguide_height)
    }

    /// Checks ordering, minimum spacing and region membership.
    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        let k = config.constants()?;
        let region = config.deployment_region(self.role);
        if self.xs.is_empty() {
            return Err(Error::InvalidArgument("layout has no elements".into()));
        }
        for (i, &x) in self.xs.iter().enumerate() {
            if !x.is_finite() || !region.contains(x, SPACING_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "{} element {i} at x = {x} lies outside [{}, {}]",
                    self.role, region.lo, region.hi
                )));
            }
        }
        for (i, w) in self.xs.windows(2).enumerate() {
            if w[1] - w[0] < k.min_spacing - SPACING_TOL {
                return Err(Error::InvalidArgument(format!(
                    "{} gap {} is {:.6e} m, below the minimum spacing {:.6e} m",
                    self.role,
                    i + 2,
                    w[1] - w[0],
                    k.min_spacing
                )));
            }
        }
        Ok(())
    }
}

/// In-waveguide phase from the feed to an element, `2 pi |x_pa - x_feed| / lambda_g`.
pub fn guided_phase(x_pa: f64, x_feed: f64, guided_wavelength: f64) -> f64 {
    2.0 * PI / guided_wavelength * (x_pa - x_feed).abs()
}

/// Squared y/z distance between a waveguide of `role` and `user`.
pub fn lateral_offset_sq(user: &Vec3, role: Role, config: &SystemConfig) -> f64 {
    (config.waveguide_y(role) - user.y).powi(2) + (config.waveguide_height - user.z).powi(2)
}

/// Free-space plus in-waveguide phase from the feed of `role` through an
/// element at `x_pa` to `user`.
pub fn cumulative_phase(x_pa: f64, user: &Vec3, role: Role, config: &SystemConfig) -> Result<f64> {
    let k = config.constants()?;
    let c = lateral_offset_sq(user, role, config);
    let free = 2.0 * PI / k.wavelength * ((x_pa - user.x).powi(2) + c).sqrt();
    Ok(free + guided_phase(x_pa, config.feed_x(role), k.guided_wavelength))
}

/// Deterministic per-element terms of one element-to-user link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerm {
    pub distance: f64,
    /// `distance^(-chi/2)`.
    pub amplitude: f64,
    /// Free-space phase `2 pi d / lambda`.
    pub free_phase: f64,
    /// In-waveguide phase `2 pi |x - x0| / lambda_g`.
    pub guided_phase: f64,
}

impl LinkTerm {
    pub fn total_phase(&self) -> f64 {
        self.free_phase + self.guided_phase
    }
}

/// Link terms for every element of `layout` towards `user`.
pub fn link_terms(layout: &PinchLayout, user: &Vec3, config: &SystemConfig) -> Result<Vec<LinkTerm>> {
    let k = config.constants()?;
    let half_chi = config.pathloss_exponent / 2.0;
    let x0 = config.feed_x(layout.role);
    (0..layout.len())
        .map(|i| {
            let p = layout.position(i, config);
            let d = user.distance(&p);
            if !(d >= MIN_LINK_DISTANCE) {
                return Err(Error::Singularity { distance: d });
            }
            Ok(LinkTerm {
                distance: d,
                amplitude: d.powf(-half_chi),
                free_phase: 2.0 * PI / k.wavelength * d,
                guided_phase: guided_phase(layout.xs[i], x0, k.guided_wavelength),
            })
        })
        .collect()
}

/// Expected coherent channel gain `E|sum_t h_t g_t|^2` at `user` under Ricean fading.
pub fn psi(layout: &PinchLayout, user: &Vec3, config: &SystemConfig) -> Result<f64> {
    let k = config.constants()?;
    let terms = link_terms(layout, user, config)?;
    let kappa = config.ricean_factor;
    let los: Complex64 = terms
        .iter()
        .map(|t| Complex64::from_polar(t.amplitude, -t.total_phase()))
        .sum();
    let nlos: f64 = terms.iter().map(|t| t.amplitude * t.amplitude).sum();
    Ok(k.reference_gain / (kappa + 1.0) * (kappa * los.norm_sqr() + nlos))
}

/// Closed-form average spectral efficiencies of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AseReport {
    pub ase_pu: f64,
    pub ase_su: f64,
    pub sum_se: f64,
    /// PT -> PU.
    pub psi_pp: f64,
    /// ST -> PU.
    pub psi_ps: f64,
    /// PT -> SU.
    pub psi_sp: f64,
    /// ST -> SU.
    pub psi_ss: f64,
    /// Expected interference power at the PU, `(p_st / M) psi_ps`.
    pub interference_pu: f64,
    pub p_st: f64,
}

/// The four expected gains between both transmitters and both users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub psi_pp: f64,
    pub psi_ps: f64,
    pub psi_sp: f64,
    pub psi_ss: f64,
}

impl GainSet {
    pub fn evaluate(
        layout_pt: &PinchLayout,
        layout_st: &PinchLayout,
        pu: &Vec3,
        su: &Vec3,
        config: &SystemConfig,
    ) -> Result<Self> {
        Ok(Self {
            psi_pp: psi(layout_pt, pu, config)?,
            psi_ps: psi(layout_st, pu, config)?,
            psi_sp: psi(layout_pt, su, config)?,
            psi_ss: psi(layout_st, su, config)?,
        })
    }
}

impl AseReport {
    /// Average SEs from the expected gains at ST power `p_st`.
    pub fn from_gains(g: &GainSet, p_st: f64, config: &SystemConfig) -> Self {
        let n = config.pa_count_primary as f64;
        let m = config.pa_count_secondary as f64;
        let p_pt = config.power_pt;
        let nm_noise = n * m * config.noise_power;
        let ase_pu = (1.0 + m * p_pt * g.psi_pp / (n * p_st * g.psi_ps + nm_noise)).log2();
        let ase_su = (1.0 + n * p_st * g.psi_ss / (m * p_pt * g.psi_sp + nm_noise)).log2();
        Self {
            ase_pu,
            ase_su,
            sum_se: ase_pu + ase_su,
            psi_pp: g.psi_pp,
            psi_ps: g.psi_ps,
            psi_sp: g.psi_sp,
            psi_ss: g.psi_ss,
            interference_pu: p_st / m * g.psi_ps,
            p_st,
        }
    }
}

/// Closed-form average SE of PU and SU for the given layouts and ST power.
pub fn ase_report(
    layout_pt: &PinchLayout,
    layout_st: &PinchLayout,
    p_st: f64,
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
) -> Result<AseReport> {
    if !(p_st > 0.0 && p_st <= config.power_st_max) {
        return Err(Error::InvalidArgument(format!(
            "ST power {p_st} outside (0, {}]",
            config.power_st_max
        )));
    }
    if layout_pt.xs.len() != config.pa_count_primary || layout_st.xs.len() != config.pa_count_secondary {
        return Err(Error::InvalidArgument(format!(
            "layout sizes ({}, {}) differ from configured counts ({}, {})",
            layout_pt.xs.len(),
            layout_st.xs.len(),
            config.pa_count_primary,
            config.pa_count_secondary
        )));
    }
    let gains = GainSet::evaluate(layout_pt, layout_st, pu, su, config)?;
    Ok(AseReport::from_gains(&gains, p_st, config))
}

/// Instantaneous SINRs `(gamma_p, gamma_s)` of one channel realization.
pub fn instantaneous_sinrs(
    realization: &ChannelRealization,
    p_st: f64,
    config: &SystemConfig,
) -> (f64, f64) {
    let n = realization.g_pt.len() as f64;
    let m = realization.g_st.len() as f64;
    let pp = realization.combined_pt_to_pu().norm_sqr();
    let sp = realization.combined_pt_to_su().norm_sqr();
    let ps = realization.combined_st_to_pu().norm_sqr();
    let ss = realization.combined_st_to_su().norm_sqr();
    let sigma2 = config.noise_power;
    let gamma_p = config.power_pt / n * pp / (p_st / m * ps + sigma2);
    let gamma_s = p_st / m * ss / (config.power_pt / n * sp + sigma2);
    (gamma_p, gamma_s)
}
