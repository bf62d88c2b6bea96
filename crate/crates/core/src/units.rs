//! Unit conversions. All cross-unit arithmetic in the crate goes through here.

use core::f64::consts::PI;

use crate::error::{ensure, Result};

/// Mean intensity (MW/cm²) of `power_mw` spread uniformly over a disk of
/// diameter `spot_diameter_um`.
pub fn power_to_intensity(power_mw: f64, spot_diameter_um: f64) -> Result<f64> {
    ensure(spot_diameter_um > 0.0 && spot_diameter_um.is_finite(), "spot_diameter_um", "must be positive")?;
    ensure(power_mw >= 0.0 && power_mw.is_finite(), "power_mw", "must be non-negative")?;
    Ok(power_mw * MW_CM2_PER_MW_UM2 / spot_area_um2(spot_diameter_um))
}

/// Inverse of [`power_to_intensity`].
pub fn intensity_to_power(intensity: f64, spot_diameter_um: f64) -> Result<f64> {
    ensure(spot_diameter_um > 0.0 && spot_diameter_um.is_finite(), "spot_diameter_um", "must be positive")?;
    ensure(intensity >= 0.0 && intensity.is_finite(), "intensity", "must be non-negative")?;
    Ok(intensity * spot_area_um2(spot_diameter_um) / MW_CM2_PER_MW_UM2)
}

fn spot_area_um2(diameter_um: f64) -> f64 {
    let r = 0.5 * diameter_um;
    PI * r * r
}

/// 1 mW/μm² expressed in MW/cm².
const MW_CM2_PER_MW_UM2: f64 = 0.1;

/// kcps to events per picosecond.
pub fn kcps_to_per_ps(kcps: f64) -> f64 {
    kcps * 1e-9
}

/// kcps to events per nanosecond.
pub fn kcps_to_per_ns(kcps: f64) -> f64 {
    kcps * 1e-6
}

/// Events observed over `duration_ps` to kcps.
pub fn count_rate_kcps(count: u64, duration_ps: u64) -> f64 {
    if duration_ps == 0 {
        return 0.0;
    }
    count as f64 / duration_ps as f64 * 1e9
}

pub fn seconds_to_ps(seconds: f64) -> u64 {
    libm::round(seconds * 1e12) as u64
}

pub fn ps_to_ns(ps: f64) -> f64 {
    ps * 1e-3
}

pub fn ns_to_ps(ns: f64) -> f64 {
    ns * 1e3
}

/// Gaussian FWHM to standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// 2·sqrt(2·ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
