//! Monte Carlo sampling of Ricean channel realizations, used as an
//! independent check of the closed-form expected gains and average SEs.
//!
//! Sampling is split into fixed chunks of [`CHUNK_SIZE`] realizations. Chunk
//! `i` draws from a ChaCha8 generator seeded with the caller's seed on stream
//! `i`, and chunk statistics are merged in chunk order, so results depend only
//! on `(seed, n_samples, inputs)` and never on the rayon worker count.
//!
//! NLoS components are `(a + j b) / sqrt(2)` with `a, b` drawn from
//! `rand_distr::StandardNormal` (ziggurat), real part first.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{instantaneous_sinrs, link_terms, PinchLayout, Vec3};

/// Realizations per independent RNG stream.
pub const CHUNK_SIZE: usize = 4096;

/// Smallest accepted Monte Carlo sample count.
pub const MIN_SAMPLES: usize = 100;

/// Default sample count for validation runs.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// One sampled set of element-to-user coefficients plus in-waveguide phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_pt_to_pu: Vec<Complex64>,
    pub h_pt_to_su: Vec<Complex64>,
    pub h_st_to_pu: Vec<Complex64>,
    pub h_st_to_su: Vec<Complex64>,
    pub g_pt: Vec<Complex64>,
    pub g_st: Vec<Complex64>,
}

fn combine(h: &[Complex64], g: &[Complex64]) -> Complex64 {
    h.iter().zip(g).map(|(h, g)| h * g).sum()
}

impl ChannelRealization {
    pub fn combined_pt_to_pu(&self) -> Complex64 {
        combine(&self.h_pt_to_pu, &self.g_pt)
    }
    pub fn combined_pt_to_su(&self) -> Complex64 {
        combine(&self.h_pt_to_su, &self.g_pt)
    }
    pub fn combined_st_to_pu(&self) -> Complex64 {
        combine(&self.h_st_to_pu, &self.g_st)
    }
    pub fn combined_st_to_su(&self) -> Complex64 {
        combine(&self.h_st_to_su, &self.g_st)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub sample_count: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Welford accumulator; merges are order-dependent only in rounding, and
/// callers always merge in chunk order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn std_dev(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean,
            std_error: if self.count == 0 { 0.0 } else { self.std_dev() / (self.count as f64).sqrt() },
            sample_count: self.count,
        }
    }
}

/// Generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `n_samples` draws in fixed chunks, in parallel, and merges `S`
/// accumulators in chunk order.
pub(crate) fn run_chunked<S, F>(n_samples: usize, seed: u64, work: F) -> S
where
    S: Send + Default + Merge,
    F: Fn(&mut ChaCha8Rng, usize) -> S + Sync,
{
    let chunks = n_samples.div_ceil(CHUNK_SIZE);
    let parts: Vec<S> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK_SIZE.min(n_samples - c * CHUNK_SIZE);
            let mut rng = chunk_rng(seed, c as u64);
            work(&mut rng, len)
        })
        .collect();
    let mut total = S::default();
    for p in &parts {
        total.merge_from(p);
    }
    total
}

pub(crate) trait Merge {
    fn merge_from(&mut self, other: &Self);
}

impl Merge for RunningStats {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other);
    }
}

impl<T: Merge> Merge for (T, Option<Error>) {
    fn merge_from(&mut self, other: &Self) {
        self.0.merge_from(&other.0);
        if self.1.is_none() {
            self.1.clone_from(&other.1);
        }
    }
}

impl<const K: usize> Merge for [RunningStats; K] {
    fn merge_from(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

/// Draws one `CN(0, 1)` variate.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Precomputed deterministic parts of the links from one layout to one user.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSampler {
    /// `sqrt(eta / ((kappa + 1) d^chi))` per element.
    scale: Vec<f64>,
    /// `sqrt(kappa) exp(-j 2 pi d / lambda)` per element.
    los: Vec<Complex64>,
}

impl LinkSampler {
    pub fn new(layout: &PinchLayout, user: &Vec3, config: &SystemConfig) -> Result<Self> {
        let k = config.constants()?;
        let kappa = config.ricean_factor;
        let terms = link_terms(layout, user, config)?;
        Ok(Self {
            scale: terms
                .iter()
                .map(|t| (k.reference_gain / (kappa + 1.0)).sqrt() * t.amplitude)
                .collect(),
            los: terms
                .iter()
                .map(|t| Complex64::from_polar(kappa.sqrt(), -t.free_phase))
                .collect(),
        })
    }

    /// Links from fixed element positions (no waveguide) to `user`.
    pub fn from_positions(positions: &[Vec3], user: &Vec3, config: &SystemConfig) -> Result<Self> {
        let k = config.constants()?;
        let kappa = config.ricean_factor;
        let mut scale = Vec::with_capacity(positions.len());
        let mut los = Vec::with_capacity(positions.len());
        for p in positions {
            let d = user.distance(p);
            if !(d >= crate::model::MIN_LINK_DISTANCE) {
                return Err(Error::Singularity { distance: d });
            }
            scale.push((k.reference_gain / (kappa + 1.0)).sqrt() * d.powf(-config.pathloss_exponent / 2.0));
            los.push(Complex64::from_polar(
                kappa.sqrt(),
                -2.0 * std::f64::consts::PI * d / k.wavelength,
            ));
        }
        Ok(Self { scale, los })
    }

    /// A link whose coefficients are identically zero.
    pub fn silent(count: usize) -> Self {
        Self { scale: vec![0.0; count], los: vec![Complex64::new(0.0, 0.0); count] }
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    /// Samples the coefficients into `out`, consuming two normals per element.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Complex64>) {
        out.clear();
        for (s, los) in self.scale.iter().zip(&self.los) {
            let nlos = complex_gaussian(rng);
            out.push(*s * (los + nlos));
        }
    }

    /// Deterministic LoS coefficients (the `kappa -> infinity` shape).
    pub fn los_coefficients(&self) -> Vec<Complex64> {
        self.scale.iter().zip(&self.los).map(|(s, l)| *s * l).collect()
    }
}

/// In-waveguide phasors `exp(-j 2 pi |x - x0| / lambda_g)` for a layout.
pub fn waveguide_phasors(layout: &PinchLayout, config: &SystemConfig) -> Result<Vec<Complex64>> {
    let k = config.constants()?;
    let x0 = config.feed_x(layout.role);
    Ok(layout
        .xs
        .iter()
        .map(|&x| Complex64::from_polar(1.0, -crate::model::guided_phase(x, x0, k.guided_wavelength)))
        .collect())
}

/// All four links of a scenario, ready for repeated sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSampler {
    pub pt_to_pu: LinkSampler,
    pub pt_to_su: LinkSampler,
    pub st_to_pu: LinkSampler,
    pub st_to_su: LinkSampler,
    pub g_pt: Vec<Complex64>,
    pub g_st: Vec<Complex64>,
}

impl ScenarioSampler {
    pub fn new(
        layout_pt: &PinchLayout,
        layout_st: &PinchLayout,
        pu: &Vec3,
        su: &Vec3,
        config: &SystemConfig,
    ) -> Result<Self> {
        Ok(Self {
            pt_to_pu: LinkSampler::new(layout_pt, pu, config)?,
            pt_to_su: LinkSampler::new(layout_pt, su, config)?,
            st_to_pu: LinkSampler::new(layout_st, pu, config)?,
            st_to_su: LinkSampler::new(layout_st, su, config)?,
            g_pt: waveguide_phasors(layout_pt, config)?,
            g_st: waveguide_phasors(layout_st, config)?,
        })
    }

    fn empty_realization(&self) -> ChannelRealization {
        ChannelRealization {
            h_pt_to_pu: Vec::with_capacity(self.g_pt.len()),
            h_pt_to_su: Vec::with_capacity(self.g_pt.len()),
            h_st_to_pu: Vec::with_capacity(self.g_st.len()),
            h_st_to_su: Vec::with_capacity(self.g_st.len()),
            g_pt: self.g_pt.clone(),
            g_st: self.g_st.clone(),
        }
    }

    /// Fills `out` with a fresh draw: PT->PU, PT->SU, ST->PU, ST->SU in that order.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut ChannelRealization) {
        self.pt_to_pu.sample_into(rng, &mut out.h_pt_to_pu);
        self.pt_to_su.sample_into(rng, &mut out.h_pt_to_su);
        self.st_to_pu.sample_into(rng, &mut out.h_st_to_pu);
        self.st_to_su.sample_into(rng, &mut out.h_st_to_su);
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let mut r = self.empty_realization();
        self.sample_into(rng, &mut r);
        r
    }
}

/// Samples one Ricean realization of all four links.
pub fn sample_realization<R: Rng + ?Sized>(
    layout_pt: &PinchLayout,
    layout_st: &PinchLayout,
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(ScenarioSampler::new(layout_pt, layout_st, pu, su, config)?.sample(rng))
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples required, got {n_samples}"
        )));
    }
    Ok(())
}

/// Empirical mean of `|sum_t h_t g_t|^2` at `user`.
pub fn mc_psi(
    layout: &PinchLayout,
    user: &Vec3,
    config: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_samples(n_samples)?;
    let link = LinkSampler::new(layout, user, config)?;
    let g = waveguide_phasors(layout, config)?;
    let stats: RunningStats = run_chunked(n_samples, seed, |rng, len| {
        let mut st = RunningStats::default();
        let mut h = Vec::with_capacity(link.len());
        for _ in 0..len {
            link.sample_into(rng, &mut h);
            st.push(combine(&h, &g).norm_sqr());
        }
        st
    });
    Ok(stats.estimate())
}

/// Monte Carlo estimates of the instantaneous SEs and PU interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McAse {
    pub r_p: McEstimate,
    pub r_s: McEstimate,
    pub sum: McEstimate,
    pub interference: McEstimate,
}

/// Empirical average SEs and interference for a scenario.
#[allow(clippy::too_many_arguments)]
pub fn mc_ase(
    layout_pt: &PinchLayout,
    layout_st: &PinchLayout,
    p_st: f64,
    pu: &Vec3,
    su: &Vec3,
    config: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McAse> {
    let sampler = ScenarioSampler::new(layout_pt, layout_st, pu, su, config)?;
    mc_ase_with(&sampler, p_st, config, n_samples, seed)
}

/// [`mc_ase`] over a prebuilt (possibly modified) sampler.
pub fn mc_ase_with(
    sampler: &ScenarioSampler,
    p_st: f64,
    config: &SystemConfig,
    n_samples: usize,
    seed: u64,
) -> Result<McAse> {
    check_samples(n_samples)?;
    if !(p_st > 0.0) {
        return Err(Error::InvalidArgument(format!("ST power must be positive, got {p_st}")));
    }
    let m = sampler.g_st.len() as f64;
    let stats: [RunningStats; 4] = run_chunked(n_samples, seed, |rng, len| {
        let mut acc = [RunningStats::default(); 4];
        let mut r = sampler.empty_realization();
        for _ in 0..len {
            sampler.sample_into(rng, &mut r);
            let (gp, gs) = instantaneous_sinrs(&r, p_st, config);
            let rp = (1.0 + gp).log2();
            let rs = (1.0 + gs).log2();
            acc[0].push(rp);
            acc[1].push(rs);
            acc[2].push(rp + rs);
            acc[3].push(p_st / m * r.combined_st_to_pu().norm_sqr());
        }
        acc
    });
    Ok(McAse {
        r_p: stats[0].estimate(),
        r_s: stats[1].estimate(),
        sum: stats[2].estimate(),
        interference: stats[3].estimate(),
    })
}
