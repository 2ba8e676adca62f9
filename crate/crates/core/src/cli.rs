//! `pinching-cr` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
//! scenario, 3 validation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::channel_mc::{mc_ase, mc_psi, DEFAULT_SAMPLES};
use crate::config::SystemConfig;
use crate::error::Error;
use crate::experiments::{sweep, SweepMetadata, SweepSpec};
use crate::model::{psi, Vec3};
use crate::optimizer::{alignment_errors, three_stage, OddSchemeMode, Solution};
use crate::phasor::{residual_phasor_sum, scheme_phases, PhasorScheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Relative tolerance between the closed-form and simulated sum SE.
pub const SUM_SE_REL_TOL: f64 = 0.05;

/// Default users: PU 1 m inside its strip, SU 1 m inside its own.
pub const DEFAULT_PU: Vec3 = Vec3::new(7.5, -5.0, 0.0);
pub const DEFAULT_SU: Vec3 = Vec3::new(7.5, 5.0, 0.0);

#[derive(Debug, Parser)]
#[command(name = "pinching-cr", about = "Pinching-antenna cognitive radio optimizer and simulator")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Literal,
    ExactCancel,
}

impl From<ModeArg> for OddSchemeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Literal => OddSchemeMode::Literal,
            ModeArg::ExactCancel => OddSchemeMode::ExactCancel,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Uniform,
    Pi,
    Literal,
    ExactCancel,
}

#[derive(Debug, clap::Args)]
struct ScenarioArgs {
    /// Flat key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Odd-count phase assignment [default: literal].
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override of the integer search bound.
    #[arg(long)]
    kmax: Option<u32>,
}

#[derive(Debug, clap::Args)]
struct UserArgs {
    /// PU position as x,y,z in meters.
    #[arg(long, value_parser = parse_vec3, default_value = "7.5,-5,0")]
    pu: Vec3,
    /// SU position as x,y,z in meters.
    #[arg(long, value_parser = parse_vec3, default_value = "7.5,5,0")]
    su: Vec3,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Run the three-stage optimizer and print the solution as JSON.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        users: UserArgs,
    },
    /// Run a sweep description and write CSV (plus a JSON sidecar with --out).
    Sweep {
        /// Sweep description file.
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: u64,
        /// Channel draws per drop for the fixed-array baseline.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed forms against Monte Carlo at an optimized scenario.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        users: UserArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Residual magnitude of the unit phasors implied by a scheme.
    Phasor {
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected x,y,z, got `{s}`")),
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_infeasible() {
        EXIT_INFEASIBLE
    } else {
        EXIT_USAGE
    }
}

impl ScenarioArgs {
    fn mode(&self) -> OddSchemeMode {
        self.mode.map(Into::into).unwrap_or_default()
    }
}

fn load_config(args: &ScenarioArgs) -> Result<SystemConfig, Error> {
    let mut config = match &args.config {
        Some(p) => SystemConfig::from_kv_str(&read(p)?)?,
        None => SystemConfig::default(),
    };
    if let Some(k) = args.kmax {
        config.k_max = k;
    }
    config.validate()?;
    Ok(config)
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn parse_and_dispatch<O: Write, E: Write>(argv: &[String], out: &mut O, err: &mut E) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    return EXIT_OK;
                }
                _ => EXIT_USAGE,
            };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    let result = match cli.command {
        CliCommand::Optimize { scenario, users } => run_optimize(&scenario, &users, out),
        CliCommand::Sweep { spec, scenario, seed, samples, out: path } => {
            run_sweep(&spec, &scenario, seed, samples, path.as_deref(), out)
        }
        CliCommand::Validate { scenario, users, seed, samples } => {
            run_validate(&scenario, &users, seed, samples, out)
        }
        CliCommand::Phasor { count, scheme } => run_phasor(count, scheme, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Serialize)]
struct OptimizeOutput<'a> {
    pu: Vec3,
    su: Vec3,
    mode: String,
    k_max: u32,
    solution: &'a Solution,
    alignment_error_pt_rad: Vec<f64>,
    alignment_error_st_rad: Vec<f64>,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Internal(format!("write failed: {e}"))
}

fn run_optimize<O: Write>(scenario: &ScenarioArgs, users: &UserArgs, out: &mut O) -> Result<i32, Error> {
    let config = load_config(scenario)?;
    let mode = scenario.mode();
    let sol = three_stage(&users.pu, &users.su, &config, mode)?;
    let output = OptimizeOutput {
        pu: users.pu,
        su: users.su,
        mode: mode.to_string(),
        k_max: config.k_max,
        alignment_error_pt_rad: alignment_errors(&sol.layout_pt, &users.pu, &config)?,
        alignment_error_st_rad: alignment_errors(&sol.layout_st, &users.su, &config)?,
        solution: &sol,
    };
    let json = serde_json::to_string_pretty(&output).map_err(|e| Error::Internal(e.to_string()))?;
    writeln!(out, "{json}").map_err(io_err)?;
    Ok(EXIT_OK)
}

fn run_sweep<O: Write>(
    spec_path: &Path,
    scenario: &ScenarioArgs,
    seed: u64,
    samples: Option<usize>,
    out_path: Option<&Path>,
    out: &mut O,
) -> Result<i32, Error> {
    let base = load_config(scenario)?;
    let mut spec = SweepSpec::from_kv_str(&read(spec_path)?, base, seed)?;
    // Flags take precedence over the description file.
    if let Some(k) = scenario.kmax {
        spec.base_config.k_max = k;
    }
    if let Some(m) = scenario.mode {
        spec.options.mode = m.into();
    }
    if let Some(n) = samples {
        spec.options.fpa_samples = n;
    }
    spec.validate()?;
    let table = sweep(&spec)?;
    match out_path {
        Some(p) => {
            let file = fs::File::create(p).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display())))?;
            table.write_csv(file)?;
            let meta = serde_json::to_string_pretty(&SweepMetadata::new(&spec))
                .map_err(|e| Error::Internal(e.to_string()))?;
            let mut meta_path = p.as_os_str().to_owned();
            meta_path.push(".meta.json");
            fs::write(&meta_path, meta + "\n").map_err(io_err)?;
        }
        None => table.write_csv(&mut *out)?,
    }
    Ok(EXIT_OK)
}

/// One pass/fail line of the validation suite.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub passed: bool,
    pub criterion: String,
}

/// Closed forms versus Monte Carlo at the optimized solution for `pu`, `su`.
pub fn validation_suite(
    config: &SystemConfig,
    mode: OddSchemeMode,
    pu: &Vec3,
    su: &Vec3,
    samples: usize,
    seed: u64,
) -> Result<Vec<CheckLine>, Error> {
    let sol = three_stage(pu, su, config, mode)?;
    let mut lines = Vec::new();
    let links = [
        ("psi_pp", &sol.layout_pt, pu),
        ("psi_ps", &sol.layout_st, pu),
        ("psi_sp", &sol.layout_pt, su),
        ("psi_ss", &sol.layout_st, su),
    ];
    for (i, (name, layout, user)) in links.into_iter().enumerate() {
        let closed = psi(layout, user, config)?;
        let mc = mc_psi(layout, user, config, samples, seed.wrapping_add(i as u64))?;
        lines.push(CheckLine {
            name: name.into(),
            closed_form: closed,
            estimate: mc.mean,
            std_error: mc.std_error,
            passed: mc.agrees_with(closed, 3.0),
            criterion: "|mc - closed| <= 3 se".into(),
        });
    }
    let mc = mc_ase(&sol.layout_pt, &sol.layout_st, sol.p_st, pu, su, config, samples, seed.wrapping_add(4))?;
    lines.push(CheckLine {
        name: "interference_pu".into(),
        closed_form: sol.report.interference_pu,
        estimate: mc.interference.mean,
        std_error: mc.interference.std_error,
        passed: mc.interference.agrees_with(sol.report.interference_pu, 3.0),
        criterion: "|mc - closed| <= 3 se".into(),
    });
    let rel = (sol.report.sum_se - mc.sum.mean).abs() / mc.sum.mean;
    lines.push(CheckLine {
        name: "sum_se".into(),
        closed_form: sol.report.sum_se,
        estimate: mc.sum.mean,
        std_error: mc.sum.std_error,
        passed: rel <= SUM_SE_REL_TOL,
        criterion: format!("relative gap {rel:.4} <= {SUM_SE_REL_TOL}"),
    });
    Ok(lines)
}

fn run_validate<O: Write>(
    scenario: &ScenarioArgs,
    users: &UserArgs,
    seed: u64,
    samples: usize,
    out: &mut O,
) -> Result<i32, Error> {
    let config = load_config(scenario)?;
    let lines = validation_suite(&config, scenario.mode(), &users.pu, &users.su, samples, seed)?;
    let mut all = true;
    for l in &lines {
        all &= l.passed;
        writeln!(
            out,
            "{} {:<16} closed={:.6e} mc={:.6e} se={:.3e} ({})",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.closed_form,
            l.estimate,
            l.std_error,
            l.criterion
        )
        .map_err(io_err)?;
    }
    writeln!(out, "{}", if all { "all checks passed" } else { "validation failed" }).map_err(io_err)?;
    Ok(if all { EXIT_OK } else { EXIT_VALIDATION })
}

fn clean(x: f64) -> f64 {
    if x.abs() < 5e-13 {
        0.0
    } else {
        x
    }
}

fn run_phasor<O: Write>(count: usize, scheme: SchemeArg, out: &mut O) -> Result<i32, Error> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    let (scheme, name) = match scheme {
        SchemeArg::Uniform => (PhasorScheme::Uniform, "uniform"),
        SchemeArg::Pi => (PhasorScheme::Pi, "pi"),
        SchemeArg::Literal => (PhasorScheme::Literal, "literal"),
        SchemeArg::ExactCancel => (PhasorScheme::ExactCancel, "exact-cancel"),
    };
    let (mag, sum) = residual_phasor_sum(&scheme_phases(count, scheme))?;
    writeln!(out, "count: {count}").map_err(io_err)?;
    writeln!(out, "scheme: {name}").map_err(io_err)?;
    writeln!(out, "magnitude: {:.12}", clean(mag)).map_err(io_err)?;
    writeln!(out, "sum: {:.12} {:+.12}j", clean(sum.re), clean(sum.im)).map_err(io_err)?;
    Ok(EXIT_OK)
}
