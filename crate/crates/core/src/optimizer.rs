//! Three-stage placement and power optimization.
//!
//! 1. Waveguide level: place the PT elements at minimum spacing around the
//!    PU's x-coordinate, then nudge every gap by a wavelength-scale step that
//!    keeps the PU phases coherent while pushing the SU phases toward
//!    cancellation.
//! 2. The same for the ST, toward the SU and away from the PU.
//! 3. Closed-form ST power control under the interference constraint.
//!
//! Steps come from a first-order expansion of the free-space phase around the
//! previous element, so each gap is searched with its own anchor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::{Role, SystemConfig};
use crate::error::{Error, Result};
use crate::model::{lateral_offset_sq, AseReport, GainSet, PinchLayout, Vec3, SPACING_TOL};

/// Default gate on the exact phase error at the intended user after refinement.
pub const ALIGNMENT_TOL_RAD: f64 = 0.05;

/// Phase-increment table for odd element counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum OddSchemeMode {
    /// `k + 1/3` on the two gaps entering and leaving the central element,
    /// `k + 1/2` elsewhere. Leaves a unit residual for `N = 5`.
    #[default]
    Literal,
    /// Central triplet at `{0, 2 pi/3, 4 pi/3}`, the remaining elements in
    /// mirrored anti-phase pairs. Sums to zero for every odd count.
    ExactCancel,
}

impl std::str::FromStr for OddSchemeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(Self::Literal),
            "exact-cancel" | "exact_cancel" => Ok(Self::ExactCancel),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OddSchemeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Literal => "literal",
            Self::ExactCancel => "exact-cancel",
        })
    }
}

/// Fractional cycle targeted at the unintended user on gap `gap_index`
/// (the gap between elements `gap_index - 1` and `gap_index`, 1-based).
pub fn scheme_fraction(count: usize, gap_index: usize, mode: OddSchemeMode) -> f64 {
    if count.is_multiple_of(2) || count < 3 {
        return 0.5;
    }
    let center = count.div_ceil(2);
    let third = match mode {
        OddSchemeMode::Literal => gap_index == center || gap_index == center + 1,
        // the extra gap re-pairs the element right of the triplet with its
        // mirror on the left
        OddSchemeMode::ExactCancel => (center..=center + 2).contains(&gap_index),
    };
    if third {
        1.0 / 3.0
    } else {
        0.5
    }
}

/// Phase increment, in cycles, required at the unintended user.
pub fn b_increment(k: u32, count: usize, gap_index: usize, mode: OddSchemeMode) -> f64 {
    k as f64 + scheme_fraction(count, gap_index, mode)
}

/// How each gap treats the unintended user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CancelRule {
    /// Proposed even/odd phase assignment.
    Scheme(OddSchemeMode),
    /// The same fractional cycle on every gap.
    FixedOffset { cycles: f64 },
    /// Ignore the unintended user; smallest feasible coherent step.
    ConstructiveOnly,
}

impl From<OddSchemeMode> for CancelRule {
    fn from(mode: OddSchemeMode) -> Self {
        CancelRule::Scheme(mode)
    }
}

impl CancelRule {
    fn fraction(&self, count: usize, gap_index: usize) -> f64 {
        match *self {
            CancelRule::Scheme(mode) => scheme_fraction(count, gap_index, mode),
            CancelRule::FixedOffset { cycles } => cycles,
            CancelRule::ConstructiveOnly => 0.0,
        }
    }
}

/// Outcome of one wavelength-level gap search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSearchResult {
    pub gap_index: usize,
    pub k_intended: u32,
    pub k_unintended: u32,
    pub delta_x: f64,
    /// `|dx_intended - dx_unintended|` at the chosen pair.
    pub residual_mismatch: f64,
}

/// Places `count` elements at minimum spacing, centered on `x_target`, and
/// shifts them minimally to stay inside the deployment region.
pub fn coarse_placement(
    x_target: f64,
    count: usize,
    role: Role,
    config: &SystemConfig,
) -> Result<PinchLayout> {
    let k = config.constants()?;
    if count == 0 {
        return Err(Error::InvalidArgument("element count must be >= 1".into()));
    }
    let spacing = k.min_spacing;
    let region = config.deployment_region(role);
    if count as f64 * spacing > region.length() {
        return Err(Error::InfeasibleRegion { count, spacing, length: region.length() });
    }
    let span = (count - 1) as f64 * spacing;
    let mut x1 = x_target - span / 2.0;
    if x1 < region.lo {
        x1 = region.lo;
    }
    if x1 + span > region.hi {
        x1 = region.hi - span;
    }
    Ok(PinchLayout::new(role, (0..count).map(|n| x1 + n as f64 * spacing).collect()))
}

/// `(1/lambda) cos(angle) + 1/lambda_g` at `anchor_x` toward `target`.
fn step_denominator(anchor_x: f64, target: &Vec3, role: Role, config: &SystemConfig) -> Result<f64> {
    let k = config.constants()?;
    let c = lateral_offset_sq(target, role, config);
    let dx = anchor_x - target.x;
    let r = (dx * dx + c).sqrt();
    let cos = if r > 0.0 { dx / r } else { 0.0 };
    let den = cos / k.wavelength + 1.0 / k.guided_wavelength;
    if !(den > 0.0) {
        return Err(Error::Internal(format!(
            "non-positive step denominator {den:e}; requires effective_index > 1"
        )));
    }
    Ok(den)
}

/// Displacement from `anchor_x` that advances the phase at `target` by
/// `b_cycles` cycles, to first order.
pub fn candidate_step(
    b_cycles: f64,
    anchor_x: f64,
    target: &Vec3,
    role: Role,
    config: &SystemConfig,
) -> Result<f64> {
    Ok(b_cycles / step_denominator(anchor_x, target, role, config)?)
}

/// Exhaustive integer search for the step of gap `gap_index`.
///
/// Scans `k_int in 1..=k_max` and `k_unint in 0..=k_max`, discarding steps
/// shorter than the minimum spacing, and keeps the pair whose two candidate
/// steps differ least (ties go to smaller `k_int`, then smaller `k_unint`).
/// The returned step is always the intended-user step.
#[allow(clippy::too_many_arguments)]
pub fn phase_pair_search(
    anchor_x: f64,
    intended: &Vec3,
    unintended: &Vec3,
    role: Role,
    count: usize,
    gap_index: usize,
    rule: CancelRule,
    config: &SystemConfig,
) -> Result<PhaseSearchResult> {
    let min_spacing = config.constants()?.min_spacing;
    let k_max = config.k_max;
    let den_int = step_denominator(anchor_x, intended, role, config)?;

    if rule == CancelRule::ConstructiveOnly {
        return (1..=k_max)
            .map(|k| (k, k as f64 / den_int))
            .find(|&(_, dx)| dx >= min_spacing)
            .map(|(k, dx)| PhaseSearchResult {
                gap_index,
                k_intended: k,
                k_unintended: 0,
                delta_x: dx,
                residual_mismatch: 0.0,
            })
            .ok_or(Error::InfeasibleSearch { gap: gap_index, k_max });
    }

    let den_un = step_denominator(anchor_x, unintended, role, config)?;
    let frac = rule.fraction(count, gap_index);
    let mut best: Option<PhaseSearchResult> = None;
    for k_int in 1..=k_max {
        let dx_int = k_int as f64 / den_int;
        if dx_int < min_spacing {
            continue;
        }
        for k_un in 0..=k_max {
            let dx_un = (k_un as f64 + frac) / den_un;
            let diff = (dx_int - dx_un).abs();
            if best.is_none_or(|b| diff < b.residual_mismatch) {
                best = Some(PhaseSearchResult {
                    gap_index,
                    k_intended: k_int,
                    k_unintended: k_un,
                    delta_x: dx_int,
                    residual_mismatch: diff,
                });
            }
        }
    }
    best.ok_or(Error::InfeasibleSearch { gap: gap_index, k_max })
}

/// Wavelength-level refinement: element 1 stays put and each later element is
/// placed one searched step to the right of its predecessor.
pub fn refine_layout(
    coarse: &PinchLayout,
    intended: &Vec3,
    unintended: &Vec3,
    rule: CancelRule,
    config: &SystemConfig,
) -> Result<(PinchLayout, Vec<PhaseSearchResult>)> {
    if coarse.is_empty() {
        return Err(Error::InvalidArgument("layout has no elements".into()));
    }
    let count = coarse.len();
    let role = coarse.role;
    let mut xs = Vec::with_capacity(count);
    let mut trace = Vec::with_capacity(count.saturating_sub(1));
    xs.push(coarse.xs[0]);
    for gap in 2..=count {
        let anchor = xs[gap - 2];
        let res = phase_pair_search(anchor, intended, unintended, role, count, gap, rule, config)?;
        xs.push(anchor + res.delta_x);
        trace.push(res);
    }

    let region = config.deployment_region(role);
    let last = *xs.last().expect("non-empty");
    if last > region.hi {
        let shift = last - region.hi;
        for x in &mut xs {
            *x -= shift;
        }
        if xs[0] < region.lo - SPACING_TOL {
            return Err(Error::RegionOverflow { span: last - coarse.xs[0] });
        }
    }
    let layout = PinchLayout::new(role, xs);
    layout.validate(config)?;
    Ok((layout, trace))
}

/// Largest ST power meeting both the budget and the average interference limit.
pub fn power_control(psi_p_st: f64, config: &SystemConfig) -> f64 {
    if !(psi_p_st > 0.0) {
        return config.power_st_max;
    }
    let itc_cap = config.pa_count_secondary as f64 * config.interference_threshold / psi_p_st;
    config.power_st_max.min(itc_cap)
}

/// Result of the three-stage optimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub layout_pt: PinchLayout,
    pub layout_st: PinchLayout,
    pub p_st: f64,
    pub report: AseReport,
    pub trace_pt: Vec<PhaseSearchResult>,
    pub trace_st: Vec<PhaseSearchResult>,
}

impl Solution {
    /// Largest residual mismatch over all gaps of both waveguides.
    pub fn max_mismatch(&self) -> f64 {
        self.trace_pt
            .iter()
            .chain(&self.trace_st)
            .map(|r| r.residual_mismatch)
            .fold(0.0, f64::max)
    }
}

fn check_users(pu: &Vec3, su: &Vec3) -> Result<()> {
    if !pu.is_finite() || !su.is_finite() {
        return Err(Error::InvalidArgument("user positions must be finite".into()));
    }
    Ok(())
}

/// Both waveguides' refined layouts for arbitrary per-side rules.
pub fn place_both(
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
    rule_pt: CancelRule,
    rule_st: CancelRule,
) -> Result<(PinchLayout, Vec<PhaseSearchResult>, PinchLayout, Vec<PhaseSearchResult>)> {
    config.validate()?;
    check_users(pu, su)?;
    let coarse_pt = coarse_placement(pu.x, config.pa_count_primary, Role::Primary, config)?;
    let (layout_pt, trace_pt) = refine_layout(&coarse_pt, pu, su, rule_pt, config)?;
    let coarse_st = coarse_placement(su.x, config.pa_count_secondary, Role::Secondary, config)?;
    let (layout_st, trace_st) = refine_layout(&coarse_st, su, pu, rule_st, config)?;
    Ok((layout_pt, trace_pt, layout_st, trace_st))
}

/// Runs all three stages with per-side rules.
pub fn three_stage_with(
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
    rule_pt: CancelRule,
    rule_st: CancelRule,
) -> Result<Solution> {
    let (layout_pt, trace_pt, layout_st, trace_st) = place_both(pu, su, config, rule_pt, rule_st)?;
    let gains = GainSet::evaluate(&layout_pt, &layout_st, pu, su, config)?;
    let p_st = power_control(gains.psi_ps, config);
    Ok(Solution {
        report: AseReport::from_gains(&gains, p_st, config),
        layout_pt,
        layout_st,
        p_st,
        trace_pt,
        trace_st,
    })
}

/// The proposed three-stage algorithm.
pub fn three_stage(pu: &Vec3, su: &Vec3, config: &SystemConfig, mode: OddSchemeMode) -> Result<Solution> {
    three_stage_with(pu, su, config, mode.into(), mode.into())
}

/// Exact per-gap phase error at `user`: distance of `phi_n - phi_{n-1}` from
/// the nearest multiple of `2 pi`.
pub fn alignment_errors(layout: &PinchLayout, user: &Vec3, config: &SystemConfig) -> Result<Vec<f64>> {
    let phases = layout
        .xs
        .iter()
        .map(|&x| crate::model::cumulative_phase(x, user, layout.role, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(phases
        .windows(2)
        .map(|w| {
            let d = (w[1] - w[0]).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        })
        .collect())
}
