//! Random user drops, per-drop comparison of all schemes, and parameter
//! sweeps written as CSV.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{foc_ic_solution, fpa_sum_se, ideal_case, FocOffset};
use crate::channel_mc::RunningStats;
use crate::config::{dbm_to_watts, Role, SystemConfig};
use crate::error::{Error, Result};
use crate::model::Vec3;
use crate::optimizer::{three_stage, OddSchemeMode, Solution};

/// Default channel draws per drop for the fixed-array baseline.
pub const DEFAULT_FPA_SAMPLES: usize = 1000;

/// Default drops averaged per swept value.
pub const DEFAULT_DROPS: usize = 100;

pub const CSV_HEADER: [&str; 10] = [
    "swept_param",
    "value",
    "algorithm",
    "mean_sum_se",
    "stderr_sum_se",
    "mean_r_p",
    "mean_r_s",
    "mean_p_st",
    "drops_ok",
    "drops_failed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Algorithm {
    Proposed,
    Ideal,
    PiFoc,
    UniformFoc,
    Fpa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Proposed, Algorithm::Ideal, Algorithm::PiFoc, Algorithm::UniformFoc, Algorithm::Fpa];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::Ideal => "ideal",
            Algorithm::PiFoc => "pi_foc",
            Algorithm::UniformFoc => "uniform_foc",
            Algorithm::Fpa => "fpa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// Parameter varied by a sweep. Power values are given in dBm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweptParameter {
    PtStDistance,
    NPrimary,
    MSecondary,
    WaveguideLength,
    PowerPt,
    PowerSt,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::PtStDistance => "pt_st_distance",
            SweptParameter::NPrimary => "n_primary",
            SweptParameter::MSecondary => "m_secondary",
            SweptParameter::WaveguideLength => "waveguide_length",
            SweptParameter::PowerPt => "power_pt",
            SweptParameter::PowerSt => "power_st",
        }
    }

    /// Returns a copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = base.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidArgument(format!("{} needs a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweptParameter::PtStDistance => c.waveguide_separation = value,
            SweptParameter::NPrimary => c.pa_count_primary = count()?,
            SweptParameter::MSecondary => c.pa_count_secondary = count()?,
            SweptParameter::WaveguideLength => c.waveguide_length = value,
            SweptParameter::PowerPt => c.power_pt = dbm_to_watts(value),
            SweptParameter::PowerSt => c.power_st_max = dbm_to_watts(value),
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweptParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use SweptParameter::*;
        [PtStDistance, NPrimary, MSecondary, WaveguideLength, PowerPt, PowerSt]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown swept parameter `{s}`")))
    }
}

/// Uniform user placement: each user's x over the waveguide, y within
/// `user_region_width / 2` of its own transmitter's waveguide, z = 0.
pub fn random_user_drop<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> (Vec3, Vec3) {
    let lx = config.waveguide_length;
    let ly = config.user_region_width;
    let mut draw = |role: Role| {
        let x = rng.random::<f64>() * lx;
        let y = config.waveguide_y(role) + (rng.random::<f64>() - 0.5) * ly;
        Vec3::new(x, y, 0.0)
    };
    let pu = draw(Role::Primary);
    let su = draw(Role::Secondary);
    (pu, su)
}

/// Per-algorithm metrics for one drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgoMetrics {
    pub sum_se: f64,
    pub r_p: f64,
    pub r_s: f64,
    pub p_st: f64,
    /// Largest residual step mismatch over all gaps (pinching schemes only).
    pub max_mismatch: Option<f64>,
}

impl AlgoMetrics {
    fn from_solution(s: &Solution) -> Self {
        Self {
            sum_se: s.report.sum_se,
            r_p: s.report.ase_pu,
            r_s: s.report.ase_su,
            p_st: s.p_st,
            max_mismatch: Some(s.max_mismatch()),
        }
    }

    fn is_finite(&self) -> bool {
        self.sum_se.is_finite() && self.r_p.is_finite() && self.r_s.is_finite() && self.p_st.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropResult {
    pub drop_index: usize,
    pub pu: Vec3,
    pub su: Vec3,
    /// One entry per requested algorithm; failures carry the reason.
    pub outcomes: Vec<(Algorithm, std::result::Result<AlgoMetrics, String>)>,
}

impl DropResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&std::result::Result<AlgoMetrics, String>> {
        self.outcomes.iter().find(|(a, _)| *a == algorithm).map(|(_, r)| r)
    }

    pub fn sum_se(&self, algorithm: Algorithm) -> Option<f64> {
        match self.get(algorithm) {
            Some(Ok(m)) => Some(m.sum_se),
            _ => None,
        }
    }
}

/// Knobs shared by every drop of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioOptions {
    pub mode: OddSchemeMode,
    pub fpa_samples: usize,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { mode: OddSchemeMode::default(), fpa_samples: DEFAULT_FPA_SAMPLES }
    }
}

/// Evaluates every requested algorithm on the same users. `seed` drives the
/// fixed-array channel draws.
pub fn run_scenario(
    drop_index: usize,
    pu: &Vec3,
    su: &Vec3,
    algorithms: &[Algorithm],
    config: &SystemConfig,
    options: &ScenarioOptions,
    seed: u64,
) -> DropResult {
    let outcomes = algorithms
        .iter()
        .map(|&alg| {
            let r: Result<AlgoMetrics> = match alg {
                Algorithm::Proposed => three_stage(pu, su, config, options.mode).map(|s| AlgoMetrics::from_solution(&s)),
                Algorithm::PiFoc => foc_ic_solution(FocOffset::Pi, pu, su, config).map(|s| AlgoMetrics::from_solution(&s)),
                Algorithm::UniformFoc => {
                    foc_ic_solution(FocOffset::Uniform, pu, su, config).map(|s| AlgoMetrics::from_solution(&s))
                }
                Algorithm::Ideal => ideal_case(pu, su, config).map(|r| AlgoMetrics {
                    sum_se: r.sum_se,
                    r_p: r.r_p,
                    r_s: r.r_s,
                    p_st: r.p_st,
                    max_mismatch: None,
                }),
                Algorithm::Fpa => fpa_sum_se(pu, su, config, options.fpa_samples, seed).map(|r| AlgoMetrics {
                    sum_se: r.sum.mean,
                    r_p: r.r_p.mean,
                    r_s: r.r_s.mean,
                    p_st: r.mean_p_st,
                    max_mismatch: None,
                }),
            };
            let r = r.map_err(|e| e.to_string()).and_then(|m| {
                if m.is_finite() {
                    Ok(m)
                } else {
                    Err("non-finite metric".to_string())
                }
            });
            (alg, r)
        })
        .collect();
    DropResult { drop_index, pu: *pu, su: *su, outcomes }
}

/// Generator of drop `drop_index`. The same drop index yields the same
/// uniform draws at every swept value.
pub fn drop_rng(seed: u64, drop_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d409_0000_0000);
    rng.set_stream(drop_index as u64);
    rng
}

/// Draws users for drop `drop_index` and runs all algorithms on them.
pub fn run_drop(
    drop_index: usize,
    algorithms: &[Algorithm],
    config: &SystemConfig,
    options: &ScenarioOptions,
    seed: u64,
) -> DropResult {
    let mut rng = drop_rng(seed, drop_index);
    let (pu, su) = random_user_drop(config, &mut rng);
    let channel_seed: u64 = rng.random();
    run_scenario(drop_index, &pu, &su, algorithms, config, options, channel_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub swept_parameter: SweptParameter,
    pub values: Vec<f64>,
    pub drops_per_point: usize,
    pub algorithms: Vec<Algorithm>,
    pub base_config: SystemConfig,
    pub seed: u64,
    pub options: ScenarioOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidArgument("sweep has no values".into()));
        }
        if self.drops_per_point == 0 {
            return Err(Error::InvalidArgument("drops_per_point must be >= 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("sweep lists no algorithms".into()));
        }
        self.base_config.validate()
    }

    /// Parses a flat key-value sweep description. Keys other than the sweep
    /// keys are applied to the base configuration.
    pub fn from_kv_str(text: &str, base: SystemConfig, seed: u64) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))?;
        let mut swept = None;
        let mut values = None;
        let mut drops = DEFAULT_DROPS;
        let mut algorithms = Algorithm::ALL.to_vec();
        let mut options = ScenarioOptions::default();
        let mut config = base;
        let bad = |k: &str, what: &str| Error::InvalidConfig(format!("`{k}` must be {what}"));
        for (key, value) in &table {
            match key.as_str() {
                "swept_param" => {
                    swept = Some(value.as_str().ok_or_else(|| bad(key, "a string"))?.parse()?)
                }
                "values" => {
                    let arr = value.as_array().ok_or_else(|| bad(key, "an array"))?;
                    values = Some(
                        arr.iter()
                            .map(|v| match v {
                                toml::Value::Float(f) => Ok(*f),
                                toml::Value::Integer(i) => Ok(*i as f64),
                                _ => Err(bad(key, "numeric")),
                            })
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                "drops_per_point" => {
                    drops = value.as_integer().filter(|&d| d >= 1).ok_or_else(|| bad(key, "a positive integer"))?
                        as usize
                }
                "fpa_samples" => {
                    options.fpa_samples = value
                        .as_integer()
                        .filter(|&d| d >= 100)
                        .ok_or_else(|| bad(key, "an integer >= 100"))? as usize
                }
                "mode" => options.mode = value.as_str().ok_or_else(|| bad(key, "a string"))?.parse()?,
                "algorithms" => {
                    let arr = value.as_array().ok_or_else(|| bad(key, "an array"))?;
                    algorithms = arr
                        .iter()
                        .map(|v| v.as_str().ok_or_else(|| bad(key, "strings"))?.parse())
                        .collect::<Result<Vec<Algorithm>>>()?;
                }
                _ => {
                    if !config.set_param(key, value)? {
                        return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
                    }
                }
            }
        }
        let spec = SweepSpec {
            swept_parameter: swept.ok_or_else(|| Error::InvalidConfig("missing `swept_param`".into()))?,
            values: values.ok_or_else(|| Error::InvalidConfig("missing `values`".into()))?,
            drops_per_point: drops,
            algorithms,
            base_config: config,
            seed,
            options,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Aggregate of one algorithm at one swept value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub swept_param: &'static str,
    pub value: f64,
    pub algorithm: Algorithm,
    pub mean_sum_se: f64,
    pub stderr_sum_se: f64,
    pub mean_r_p: f64,
    pub mean_r_s: f64,
    pub mean_p_st: f64,
    pub drops_ok: usize,
    pub drops_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, value: f64, algorithm: Algorithm) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.algorithm == algorithm)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Internal(format!("csv: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.swept_param.to_string(),
                r.value.to_string(),
                r.algorithm.name().to_string(),
                r.mean_sum_se.to_string(),
                r.stderr_sum_se.to_string(),
                r.mean_r_p.to_string(),
                r.mean_r_s.to_string(),
                r.mean_p_st.to_string(),
                r.drops_ok.to_string(),
                r.drops_failed.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Internal(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Aggregates drops into one row per algorithm.
pub fn aggregate(
    swept: SweptParameter,
    value: f64,
    algorithms: &[Algorithm],
    drops: &[DropResult],
) -> Vec<SweepRow> {
    algorithms
        .iter()
        .map(|&alg| {
            let mut sum = RunningStats::default();
            let (mut rp, mut rs, mut pst) = (RunningStats::default(), RunningStats::default(), RunningStats::default());
            let mut failed = 0;
            for d in drops {
                match d.get(alg) {
                    Some(Ok(m)) => {
                        sum.push(m.sum_se);
                        rp.push(m.r_p);
                        rs.push(m.r_s);
                        pst.push(m.p_st);
                    }
                    _ => failed += 1,
                }
            }
            let ok = sum.count();
            let nan_if_empty = |s: &RunningStats| if ok == 0 { f64::NAN } else { s.mean() };
            SweepRow {
                swept_param: swept.name(),
                value,
                algorithm: alg,
                mean_sum_se: nan_if_empty(&sum),
                stderr_sum_se: if ok == 0 { f64::NAN } else { sum.estimate().std_error },
                mean_r_p: nan_if_empty(&rp),
                mean_r_s: nan_if_empty(&rs),
                mean_p_st: nan_if_empty(&pst),
                drops_ok: ok,
                drops_failed: failed,
            }
        })
        .collect()
}

/// Drop-level results of a sweep, grouped per swept value.
pub fn sweep_drops(spec: &SweepSpec) -> Result<Vec<(f64, Vec<DropResult>)>> {
    spec.validate()?;
    spec.values
        .iter()
        .map(|&value| {
            let config = spec.swept_parameter.apply(&spec.base_config, value)?;
            let drops: Vec<DropResult> = (0..spec.drops_per_point)
                .into_par_iter()
                .map(|d| run_drop(d, &spec.algorithms, &config, &spec.options, spec.seed))
                .collect();
            Ok((value, drops))
        })
        .collect()
}

/// Runs the sweep and aggregates each swept value.
pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    let rows = sweep_drops(spec)?
        .iter()
        .flat_map(|(value, drops)| aggregate(spec.swept_parameter, *value, &spec.algorithms, drops))
        .collect();
    Ok(SweepTable { rows })
}

/// Metadata recorded next to a sweep CSV.
#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata<'a> {
    pub seed: u64,
    pub swept_param: &'static str,
    pub values: &'a [f64],
    pub drops_per_point: usize,
    pub algorithms: Vec<&'static str>,
    pub mode: String,
    pub fpa_samples: usize,
    pub power_values_unit: &'static str,
    pub config: &'a SystemConfig,
}

impl<'a> SweepMetadata<'a> {
    pub fn new(spec: &'a SweepSpec) -> Self {
        Self {
            seed: spec.seed,
            swept_param: spec.swept_parameter.name(),
            values: &spec.values,
            drops_per_point: spec.drops_per_point,
            algorithms: spec.algorithms.iter().map(|a| a.name()).collect(),
            mode: spec.options.mode.to_string(),
            fpa_samples: spec.options.fpa_samples,
            power_values_unit: "dBm",
            config: &spec.base_config,
        }
    }
}
