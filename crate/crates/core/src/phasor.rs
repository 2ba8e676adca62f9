//! Unit-phasor sums used to reason about residual interference.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optimizer::{scheme_fraction, OddSchemeMode};

/// Returns `|sum_n exp(j phi_n)|` together with the complex sum.
pub fn residual_phasor_sum(phases: &[f64]) -> Result<(f64, Complex64)> {
    if phases.is_empty() {
        return Err(Error::InvalidArgument("phase list is empty".into()));
    }
    let sum: Complex64 = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).sum();
    Ok((sum.norm(), sum))
}

/// `|sin(N theta / 2) / sin(theta / 2)|`, the magnitude of `N` unit phasors
/// with uniform increment `theta`. Returns `N` at `theta = 0 (mod 2 pi)`.
pub fn uniform_sum_magnitude(count: usize, theta: f64) -> f64 {
    let den = (theta / 2.0).sin();
    if den.abs() < 1e-300 {
        return count as f64;
    }
    ((count as f64 * theta / 2.0).sin() / den).abs()
}

/// Per-gap phase increment pattern applied at the unintended user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhasorScheme {
    /// `2 pi / N` on every gap.
    Uniform,
    /// `pi` on every gap.
    Pi,
    /// Center-pair `2 pi / 3` rule, `pi` elsewhere.
    Literal,
    /// Zero-sum target table.
    ExactCancel,
}

impl PhasorScheme {
    /// Fractional cycle added on gap `gap_index` (2-based) of an array of `count`.
    pub fn fraction(self, count: usize, gap_index: usize) -> f64 {
        match self {
            PhasorScheme::Uniform => 1.0 / count as f64,
            PhasorScheme::Pi => 0.5,
            PhasorScheme::Literal => scheme_fraction(count, gap_index, OddSchemeMode::Literal),
            PhasorScheme::ExactCancel => {
                scheme_fraction(count, gap_index, OddSchemeMode::ExactCancel)
            }
        }
    }
}

/// Target phases (radians, first element at 0) implied by per-gap fractions.
pub fn implied_phases(count: usize, fraction: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut phases = Vec::with_capacity(count);
    let mut acc = 0.0;
    for n in 1..=count {
        if n > 1 {
            acc += 2.0 * PI * fraction(n);
        }
        phases.push(acc);
    }
    phases
}

/// Target phases for `count` elements under `scheme`.
pub fn scheme_phases(count: usize, scheme: PhasorScheme) -> Vec<f64> {
    implied_phases(count, |gap| scheme.fraction(count, gap))
}
