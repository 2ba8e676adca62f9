//! Simulator and optimizer for a cognitive radio network whose primary and
//! secondary transmitters each radiate through pinching antennas on a single
//! dielectric waveguide.
//!
//! * [`model`]: geometry, expected channel gains and closed-form average SE.
//! * [`channel_mc`]: seeded Ricean Monte Carlo used to check the closed forms.
//! * [`optimizer`]: coarse placement, wavelength-level phase search and ST
//!   power control.
//! * [`baselines`]: ideal, fixed-offset cancellation and fixed-array schemes.
//! * [`experiments`]: random drops and CSV sweeps.
//! * [`cli`]: the `pinching-cr` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel_mc;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod model;
pub mod optimizer;
pub mod phasor;

pub use config::{derive_constants, DerivedConstants, Interval, Role, SystemConfig};
pub use error::{Error, Result};
pub use model::{ase_report, psi, AseReport, PinchLayout, Vec3};
pub use optimizer::{three_stage, OddSchemeMode, Solution};
