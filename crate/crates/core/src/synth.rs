//! Seeded synthetic datasets for exercising the fits: saturation tables,
//! polarization sweeps and spectra with multiplicative Gaussian noise.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::emitter::{saturation_rate, PolarizationCurve, ZplSpectrum};
use crate::error::{ensure, Result};
use crate::fit::Spectrum;
use crate::photostream::substream;

/// Excitation intensities (MW/cm²) of the reference nine-point saturation
/// series, spanning roughly 0.08–3 saturation intensities.
pub const SATURATION_INTENSITIES: [f64; 9] = [10.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0, 300.0, 400.0];

/// `y · (1 + rel_sigma · N(0, 1))` for each value, from substream `unit`.
pub fn with_relative_noise(values: &[f64], rel_sigma: f64, seed: u64, unit: u64) -> Result<Vec<f64>> {
    ensure(rel_sigma >= 0.0 && rel_sigma.is_finite(), "rel_sigma", "must be non-negative")?;
    let mut rng = substream(seed, unit);
    Ok(values
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v * (1.0 + rel_sigma * z)
        })
        .collect())
}

/// `(intensity, rate)` pairs on the saturation law with relative noise.
pub fn saturation_dataset(
    n_inf_kcps: f64,
    i_sat: f64,
    intensities: &[f64],
    rel_sigma: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let clean: Vec<f64> = intensities.iter().map(|&i| saturation_rate(i, n_inf_kcps, i_sat)).collect::<Result<_>>()?;
    let noisy = with_relative_noise(&clean, rel_sigma, seed, 0)?;
    Ok(intensities.iter().copied().zip(noisy).collect())
}

/// Rates of `curve` sampled at `angles_deg` with relative noise.
pub fn polarization_dataset(curve: &PolarizationCurve, angles_deg: &[f64], rel_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let clean: Vec<f64> = angles_deg.iter().map(|&a| curve.eval(a)).collect();
    with_relative_noise(&clean, rel_sigma, seed, 0)
}

/// `model` sampled on a uniform grid `[lo, hi]` with `points` samples, noise
/// clamped so intensities stay non-negative.
pub fn spectrum_dataset(
    model: &ZplSpectrum,
    range_nm: (f64, f64),
    points: usize,
    resolution_nm: f64,
    rel_sigma: f64,
    seed: u64,
) -> Result<Spectrum> {
    ensure(points >= 2, "points", "need at least two samples")?;
    ensure(range_nm.0 < range_nm.1, "range_nm", "min must be below max")?;
    let step = (range_nm.1 - range_nm.0) / (points - 1) as f64;
    let wl: Vec<f64> = (0..points).map(|i| range_nm.0 + i as f64 * step).collect();
    let clean: Vec<f64> = wl.iter().map(|&w| model.eval(w)).collect();
    let noisy = with_relative_noise(&clean, rel_sigma, seed, 0)?.into_iter().map(|v| v.max(0.0)).collect();
    Spectrum::new(wl, noisy, resolution_nm)
}
