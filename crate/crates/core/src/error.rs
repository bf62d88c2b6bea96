use alloc::string::String;

use crate::fit::nlls::FitError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("timestamps not sorted at index {index}")]
    Unsorted { index: usize },

    #[error("cannot normalize correlation: {0}")]
    InvalidNormalization(&'static str),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("line width {observed_nm} nm is not resolved by a {resolution_nm} nm instrument")]
    UnresolvableLine { observed_nm: f64, resolution_nm: f64 },

    #[error("wavelength {wavelength_nm} nm outside supported band {min_nm}-{max_nm} nm")]
    OutOfBand { wavelength_nm: f64, min_nm: f64, max_nm: f64 },

    #[error("no guided mode: {0}")]
    NoGuidedMode(String),

    #[error("efficiency {target} is not reachable (surface maximum {maximum})")]
    UnreachableEfficiency { target: f64, maximum: f64 },

    #[error("coupling efficiency undefined: no guided or radiated counts")]
    UndefinedEfficiency,

    #[error(transparent)]
    Fit(#[from] FitError),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Fails with [`Error::InvalidParameter`] unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::param(name, reason))
    }
}
