use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("user lies {distance:.3e} m from a radiating element (minimum 1e-6 m)")]
    Singularity { distance: f64 },

    #[error("{count} elements at spacing {spacing:.4e} m do not fit in a region of length {length:.4e} m")]
    InfeasibleRegion { count: usize, spacing: f64, length: f64 },

    #[error("no step for gap {gap} reaches the minimum spacing within k_max = {k_max}")]
    InfeasibleSearch { gap: usize, k_max: u32 },

    #[error("refined layout spans {span:.4e} m, beyond the deployment region")]
    RegionOverflow { span: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by an unreachable or unplaceable scenario rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Singularity { .. }
                | Error::InfeasibleRegion { .. }
                | Error::InfeasibleSearch { .. }
                | Error::RegionOverflow { .. }
                | Error::DegenerateChannel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
