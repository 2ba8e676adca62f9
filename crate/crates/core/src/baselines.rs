//! Comparison schemes: the interference-free ideal case, fixed-offset
//! interference cancellation, and a fixed-position antenna array with MRT and
//! an interference-constrained secondary beamformer.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel_mc::{run_chunked, LinkSampler, McEstimate, RunningStats, MIN_SAMPLES};
use crate::config::{Role, SystemConfig};
use crate::error::{Error, Result};
use crate::model::{psi, PinchLayout, Vec3};
use crate::optimizer::{place_both, three_stage_with, CancelRule, Solution};

/// Sum SE with cross-link interference removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealReport {
    pub r_p: f64,
    pub r_s: f64,
    pub sum_se: f64,
    pub psi_pp: f64,
    pub psi_ss: f64,
    pub p_st: f64,
    pub layout_pt: PinchLayout,
    pub layout_st: PinchLayout,
}

/// Constructive-only placement on both waveguides with the cross terms
/// zeroed, so the full ST budget is usable.
pub fn ideal_case(pu: &Vec3, su: &Vec3, config: &SystemConfig) -> Result<IdealReport> {
    let (layout_pt, _, layout_st, _) = place_both(
        pu,
        su,
        config,
        CancelRule::ConstructiveOnly,
        CancelRule::ConstructiveOnly,
    )?;
    let psi_pp = psi(&layout_pt, pu, config)?;
    let psi_ss = psi(&layout_st, su, config)?;
    let n = config.pa_count_primary as f64;
    let m = config.pa_count_secondary as f64;
    let p_st = config.power_st_max;
    let r_p = (1.0 + config.power_pt * psi_pp / (n * config.noise_power)).log2();
    let r_s = (1.0 + p_st * psi_ss / (m * config.noise_power)).log2();
    Ok(IdealReport { r_p, r_s, sum_se: r_p + r_s, psi_pp, psi_ss, p_st, layout_pt, layout_st })
}

pub fn ideal_sum_se(pu: &Vec3, su: &Vec3, config: &SystemConfig) -> Result<f64> {
    Ok(ideal_case(pu, su, config)?.sum_se)
}

/// Inter-element phase offset of the fixed-offset cancellation baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FocOffset {
    /// `pi` on every gap.
    Pi,
    /// `2 pi / N` for the PT, `2 pi / M` for the ST.
    Uniform,
    /// A fixed angle in radians on both waveguides.
    Radians(f64),
}

impl FocOffset {
    pub fn cycles(self, count: usize) -> f64 {
        match self {
            FocOffset::Pi => 0.5,
            FocOffset::Uniform => 1.0 / count as f64,
            FocOffset::Radians(theta) => theta / (2.0 * std::f64::consts::PI),
        }
    }
}

/// Three-stage pipeline with a constant phase offset at the unintended user.
pub fn foc_ic_solution(offset: FocOffset, pu: &Vec3, su: &Vec3, config: &SystemConfig) -> Result<Solution> {
    three_stage_with(
        pu,
        su,
        config,
        CancelRule::FixedOffset { cycles: offset.cycles(config.pa_count_primary) },
        CancelRule::FixedOffset { cycles: offset.cycles(config.pa_count_secondary) },
    )
}

/// Uniform linear array at half-wavelength pitch centered on the feed point
/// of `role`'s waveguide.
pub fn fpa_positions(role: Role, config: &SystemConfig) -> Result<Vec<Vec3>> {
    let k = config.constants()?;
    let count = config.pa_count(role);
    let center = (count as f64 - 1.0) / 2.0;
    Ok((0..count)
        .map(|i| {
            Vec3::new(
                config.feed_x(role) + (i as f64 - center) * k.min_spacing,
                config.waveguide_y(role),
                config.waveguide_height,
            )
        })
        .collect())
}

/// Channels of the fixed-position arrays to both users.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedArrayChannel {
    pub h_pt_to_pu: Vec<Complex64>,
    pub h_pt_to_su: Vec<Complex64>,
    pub h_st_to_pu: Vec<Complex64>,
    pub h_st_to_su: Vec<Complex64>,
    pub positions_pt: Vec<Vec3>,
    pub positions_st: Vec<Vec3>,
}

/// Deterministic link parts of the fixed arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct FpaSampler {
    pt_to_pu: LinkSampler,
    pt_to_su: LinkSampler,
    st_to_pu: LinkSampler,
    st_to_su: LinkSampler,
    positions_pt: Vec<Vec3>,
    positions_st: Vec<Vec3>,
}

impl FpaSampler {
    pub fn new(pu: &Vec3, su: &Vec3, config: &SystemConfig) -> Result<Self> {
        let positions_pt = fpa_positions(Role::Primary, config)?;
        let positions_st = fpa_positions(Role::Secondary, config)?;
        Ok(Self {
            pt_to_pu: LinkSampler::from_positions(&positions_pt, pu, config)?,
            pt_to_su: LinkSampler::from_positions(&positions_pt, su, config)?,
            st_to_pu: LinkSampler::from_positions(&positions_st, pu, config)?,
            st_to_su: LinkSampler::from_positions(&positions_st, su, config)?,
            positions_pt,
            positions_st,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FixedArrayChannel {
        let mut ch = FixedArrayChannel {
            h_pt_to_pu: Vec::new(),
            h_pt_to_su: Vec::new(),
            h_st_to_pu: Vec::new(),
            h_st_to_su: Vec::new(),
            positions_pt: self.positions_pt.clone(),
            positions_st: self.positions_st.clone(),
        };
        self.sample_into(rng, &mut ch);
        ch
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, ch: &mut FixedArrayChannel) {
        self.pt_to_pu.sample_into(rng, &mut ch.h_pt_to_pu);
        self.pt_to_su.sample_into(rng, &mut ch.h_pt_to_su);
        self.st_to_pu.sample_into(rng, &mut ch.h_st_to_pu);
        self.st_to_su.sample_into(rng, &mut ch.h_st_to_su);
    }
}

/// One Ricean draw of the fixed-array channels.
pub fn fpa_channels<R: Rng + ?Sized>(
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<FixedArrayChannel> {
    Ok(FpaSampler::new(pu, su, config)?.sample(rng))
}

/// Complex transmit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Vec<Complex64>,
}

impl Beamformer {
    /// Transmit power `||w||^2`.
    pub fn power(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }

    /// Received power `|h^H w|^2` through channel `h`.
    pub fn gain(&self, h: &[Complex64]) -> f64 {
        inner(h, &self.weights).norm_sqr()
    }
}

/// `a^H b`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(a, b)| a.conj() * b).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum-ratio transmission, `w = sqrt(P) h / ||h||`.
pub fn fpa_mrt(h: &[Complex64], power: f64) -> Result<Beamformer> {
    let n = norm(h);
    if !(n > 0.0) {
        return Err(Error::DegenerateChannel("MRT over a zero channel"));
    }
    let s = power.sqrt() / n;
    Ok(Beamformer { weights: h.iter().map(|x| x * s).collect() })
}

/// Maximizes `|h_ss^H w|^2` subject to `||w||^2 <= power` and
/// `|h_sp^H w|^2 <= threshold`.
///
/// The optimum lies in `span{h_ss, h_sp}`. Writing `w = alpha u_perp +
/// beta u_par` with `u_par` along `h_sp` and `u_perp` along the part of
/// `h_ss` orthogonal to it, the objective is `(alpha q + beta p)^2` with
/// `q = ||h_ss_perp||`, `p = |u_par^H h_ss|`. If MRT violates the
/// interference limit, the limit is tight (`beta = sqrt(threshold)/||h_sp||`)
/// and the rest of the budget goes to `u_perp`.
pub fn fpa_st_beamformer(
    h_ss: &[Complex64],
    h_sp: &[Complex64],
    power: f64,
    threshold: f64,
) -> Result<Beamformer> {
    let mrt = fpa_mrt(h_ss, power)?;
    let c_norm = norm(h_sp);
    if !(c_norm > 0.0) || mrt.gain(h_sp) <= threshold {
        return Ok(mrt);
    }
    let u_par: Vec<Complex64> = h_sp.iter().map(|x| x / c_norm).collect();
    // s = u_par^H h_ss
    let s = inner(&u_par, h_ss);
    let perp: Vec<Complex64> = h_ss.iter().zip(&u_par).map(|(a, u)| a - u * s).collect();
    let q = norm(&perp);
    let beta = (threshold.sqrt() / c_norm).min(power.sqrt());
    let rotate = if s.norm() > 0.0 { s / s.norm() } else { Complex64::new(1.0, 0.0) };
    let alpha = if q > 1e-14 * norm(h_ss) { (power - beta * beta).max(0.0).sqrt() } else { 0.0 };
    let weights = perp
        .iter()
        .zip(&u_par)
        .map(|(pv, u)| {
            let along = if alpha > 0.0 { pv * (alpha / q) } else { Complex64::new(0.0, 0.0) };
            along + u * rotate * beta
        })
        .collect();
    Ok(Beamformer { weights })
}

/// Monte Carlo SEs of the fixed-position array baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FpaReport {
    pub r_p: McEstimate,
    pub r_s: McEstimate,
    pub sum: McEstimate,
    /// Mean ST transmit power `||w_ST||^2`.
    pub mean_p_st: f64,
}

/// Averages instantaneous SEs over `n_samples` channel draws, recomputing both
/// beamformers per draw.
pub fn fpa_sum_se(pu: &Vec3, su: &Vec3, config: &SystemConfig, n_samples: usize, seed: u64) -> Result<FpaReport> {
    config.validate()?;
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples required, got {n_samples}"
        )));
    }
    let sampler = FpaSampler::new(pu, su, config)?;
    let sigma2 = config.noise_power;
    let out: ([RunningStats; 4], Option<Error>) = run_chunked(n_samples, seed, |rng, len| {
        let mut acc = [RunningStats::default(); 4];
        let mut ch = sampler.sample(rng);
        for i in 0..len {
            if i > 0 {
                sampler.sample_into(rng, &mut ch);
            }
            let step = (|| -> Result<()> {
                let w_pt = fpa_mrt(&ch.h_pt_to_pu, config.power_pt)?;
                let w_st = fpa_st_beamformer(
                    &ch.h_st_to_su,
                    &ch.h_st_to_pu,
                    config.power_st_max,
                    config.interference_threshold,
                )?;
                let gp = w_pt.gain(&ch.h_pt_to_pu) / (w_st.gain(&ch.h_st_to_pu) + sigma2);
                let gs = w_st.gain(&ch.h_st_to_su) / (w_pt.gain(&ch.h_pt_to_su) + sigma2);
                let rp = (1.0 + gp).log2();
                let rs = (1.0 + gs).log2();
                acc[0].push(rp);
                acc[1].push(rs);
                acc[2].push(rp + rs);
                acc[3].push(w_st.power());
                Ok(())
            })();
            if let Err(e) = step {
                return (acc, Some(e));
            }
        }
        (acc, None)
    });
    if let Some(e) = out.1 {
        return Err(e);
    }
    let [rp, rs, sum, pst] = out.0;
    Ok(FpaReport { r_p: rp.estimate(), r_s: rs.estimate(), sum: sum.estimate(), mean_p_st: pst.mean() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_mc::{chunk_rng, complex_gaussian};
    use crate::optimizer::{three_stage, OddSchemeMode};

    const PU: Vec3 = Vec3::new(7.5, -5.0, 0.0);
    const SU: Vec3 = Vec3::new(7.5, 5.0, 0.0);

    fn random_vec(seed: u64, n: usize) -> Vec<Complex64> {
        let mut rng = chunk_rng(seed, 0);
        (0..n).map(|_| complex_gaussian(&mut rng)).collect()
    }

    #[test]
    fn mrt_reaches_full_array_gain() {
        let h = random_vec(1, 5);
        let w = fpa_mrt(&h, 2.0).unwrap();
        assert!((w.power() - 2.0).abs() < 1e-12);
        let expected = 2.0 * h.iter().map(|x| x.norm_sqr()).sum::<f64>();
        assert!((w.gain(&h) - expected).abs() < 1e-12 * expected);
        assert!(fpa_mrt(&[Complex64::new(0.0, 0.0); 3], 1.0).is_err());
    }

    #[test]
    fn st_beamformer_is_mrt_when_limit_is_loose() {
        let h_ss = random_vec(2, 4);
        let h_sp = random_vec(3, 4);
        let w = fpa_st_beamformer(&h_ss, &h_sp, 1.0, 1e9).unwrap();
        assert_eq!(w, fpa_mrt(&h_ss, 1.0).unwrap());
    }

    #[test]
    fn st_beamformer_makes_limit_tight() {
        let h_ss = random_vec(4, 5);
        let h_sp = random_vec(5, 5);
        let t = 1e-3;
        let w = fpa_st_beamformer(&h_ss, &h_sp, 1.0, t).unwrap();
        assert!((w.gain(&h_sp) - t).abs() < 1e-12);
        assert!((w.power() - 1.0).abs() < 1e-12);
        // Better than projecting MRT out of the interference direction.
        let c2: f64 = h_sp.iter().map(|x| x.norm_sqr()).sum();
        let s: Complex64 = h_sp.iter().zip(&h_ss).map(|(a, b)| a.conj() * b).sum();
        let zf: Vec<Complex64> = h_ss.iter().zip(&h_sp).map(|(a, b)| a - b * (s / c2)).collect();
        let zf = fpa_mrt(&zf, 1.0).unwrap();
        assert!(w.gain(&h_ss) >= zf.gain(&h_ss));
    }

    #[test]
    fn st_beamformer_parallel_channels() {
        let h = random_vec(6, 3);
        let h_sp: Vec<Complex64> = h.iter().map(|x| x * Complex64::new(0.0, 2.0)).collect();
        let w = fpa_st_beamformer(&h, &h_sp, 1.0, 1e-4).unwrap();
        assert!(w.gain(&h_sp) <= 1e-4 * (1.0 + 1e-9));
        assert!(w.power() <= 1.0 + 1e-12);
    }

    #[test]
    fn st_beamformer_beats_random_feasible_search() {
        let h_ss = random_vec(7, 3);
        let h_sp = random_vec(8, 3);
        let (p, t) = (1.0, 0.05);
        let w = fpa_st_beamformer(&h_ss, &h_sp, p, t).unwrap();
        let mut rng = chunk_rng(9, 0);
        let mut best = 0.0f64;
        for _ in 0..20_000 {
            let v: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng)).collect();
            let b = fpa_mrt(&v, p * rng.random::<f64>()).unwrap();
            if b.gain(&h_sp) <= t {
                best = best.max(b.gain(&h_ss));
            }
        }
        assert!(w.gain(&h_ss) >= best * (1.0 - 1e-9));
    }

    #[test]
    fn fpa_geometry() {
        let c = SystemConfig::default();
        let half = c.constants().unwrap().min_spacing;
        let pos = fpa_positions(Role::Secondary, &c).unwrap();
        assert_eq!(pos.len(), c.pa_count_secondary);
        assert!((pos[2].x - c.feed_x(Role::Secondary)).abs() < 1e-15);
        for w in pos.windows(2) {
            assert!((w[1].x - w[0].x - half).abs() < 1e-15);
        }
        assert!(pos.iter().all(|p| p.y == c.waveguide_y(Role::Secondary) && p.z == c.waveguide_height));
    }

    #[test]
    fn fpa_sum_se_is_seeded() {
        let c = SystemConfig::default();
        let a = fpa_sum_se(&PU, &SU, &c, 500, 3).unwrap();
        let b = fpa_sum_se(&PU, &SU, &c, 500, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.sum.mean > 0.0);
        assert!(a.mean_p_st <= c.power_st_max * (1.0 + 1e-12));
        assert!(fpa_sum_se(&PU, &SU, &c, 10, 3).is_err());
    }

    #[test]
    fn ideal_dominates_proposed_at_default_drop() {
        let c = SystemConfig::default();
        let ideal = ideal_case(&PU, &SU, &c).unwrap();
        let proposed = three_stage(&PU, &SU, &c, OddSchemeMode::Literal).unwrap();
        assert!(ideal.sum_se >= proposed.report.sum_se);
        assert_eq!(ideal.p_st, c.power_st_max);
    }

    #[test]
    fn pi_offset_matches_proposed_for_even_counts() {
        let mut c = SystemConfig::default();
        c.pa_count_primary = 4;
        c.pa_count_secondary = 6;
        let foc = foc_ic_solution(FocOffset::Pi, &PU, &SU, &c).unwrap();
        let proposed = three_stage(&PU, &SU, &c, OddSchemeMode::Literal).unwrap();
        assert_eq!(foc.layout_pt, proposed.layout_pt);
        assert_eq!(foc.layout_st, proposed.layout_st);
    }

    #[test]
    fn offset_cycles() {
        assert_eq!(FocOffset::Pi.cycles(5), 0.5);
        assert_eq!(FocOffset::Uniform.cycles(4), 0.25);
        assert!((FocOffset::Radians(std::f64::consts::FRAC_PI_2).cycles(3) - 0.25).abs() < 1e-15);
    }
}
