//! Saturation curve `n(I) = n_inf · I / (I + I_sat)`.

use alloc::vec;
use alloc::vec::Vec;


use super::nlls::{fit_curve, Bounds, CurveModel, FitError, NllsOptions};
use super::sorted_pairs;
use crate::error::{ensure, Result};
use crate::units;

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationFit {
    pub n_inf_kcps: f64,
    pub i_sat: f64,
    pub sigma_n_inf: f64,
    pub sigma_i_sat: f64,
    /// Data minus model, in ascending intensity order.
    pub residuals: Vec<f64>,
    pub chi2: f64,
    /// Laser power at the saturation intensity, when a spot size was given.
    pub saturation_power_mw: Option<f64>,
    /// Highest intensity is below a fifth of the fitted `I_sat`.
    pub poorly_constrained: bool,
    /// Fewer than three points or less than a factor three in intensity.
    pub narrow_span: bool,
}

struct SaturationModel;

// params: [n_inf, i_sat]
impl CurveModel for SaturationModel {
    fn num_params(&self) -> usize {
        2
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * x / (x + p[1])
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) -> bool {
        let d = x + p[1];
        grad[0] = x / d;
        grad[1] = -p[0] * x / (d * d);
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaturationOptions<'a> {
    /// `(intensity, rate)` off the emitter; a straight-line fit of these is
    /// subtracted from the signal before fitting.
    pub background: Option<&'a [(f64, f64)]>,
    pub spot_diameter_um: Option<f64>,
}

/// Fits `points` of `(intensity MW/cm², rate kcps)`.
pub fn fit_saturation(points: &[(f64, f64)], options: &SaturationOptions<'_>) -> Result<SaturationFit> {
    if points.len() < 2 {
        return Err(FitError::Underdetermined { points: points.len(), params: 2 }.into());
    }
    for &(i, n) in points {
        ensure(i >= 0.0 && i.is_finite(), "intensity", "must be non-negative")?;
        ensure(n.is_finite(), "rate", "must be finite")?;
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (x, mut y) = sorted_pairs(&xs, &ys);
    if let Some(bg) = options.background {
        let (b0, b1) = linear_background(bg)?;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi -= b0 + b1 * xi;
        }
    }

    let initial = initial_guess(&x, &y);
    let bounds = Bounds::new(vec![0.0, 1e-12 * initial[1]], vec![f64::INFINITY, f64::INFINITY]);
    let sol = fit_curve(&SaturationModel, &x, &y, None, &initial, Some(&bounds), &NllsOptions::default())?;
    let (n_inf, i_sat) = (sol.params[0], sol.params[1]);
    let residuals = x.iter().zip(&y).map(|(xi, yi)| yi - SaturationModel.value(*xi, &sol.params)).collect();
    let saturation_power_mw = match options.spot_diameter_um {
        Some(d) => Some(units::intensity_to_power(i_sat, d)?),
        None => None,
    };
    let positive: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    let span = positive.last().zip(positive.first()).map_or(0.0, |(hi, lo)| hi / lo);
    Ok(SaturationFit {
        n_inf_kcps: n_inf,
        i_sat,
        sigma_n_inf: sol.sigma(0),
        sigma_i_sat: sol.sigma(1),
        residuals,
        chi2: sol.chi2,
        saturation_power_mw,
        poorly_constrained: x[x.len() - 1] < 0.2 * i_sat,
        narrow_span: points.len() < 3 || span < 3.0,
    })
}

/// Closed-form saturation parameters through two exact points.
pub fn saturation_two_point(p1: (f64, f64), p2: (f64, f64)) -> Option<(f64, f64)> {
    let (i1, n1) = p1;
    let (i2, n2) = p2;
    let den = n1 / i1 - n2 / i2;
    if den == 0.0 {
        return None;
    }
    let i_sat = (n2 - n1) / den;
    Some((n1 * (i1 + i_sat) / i1, i_sat))
}

// Lineweaver-Burk line 1/n = 1/n_inf + (I_sat/n_inf)/I, else a crude guess.
fn initial_guess(x: &[f64], y: &[f64]) -> [f64; 2] {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(xi, yi)| **xi > 0.0 && **yi > 0.0).map(|(xi, yi)| (1.0 / xi, 1.0 / yi)).collect();
    let ymax = y.iter().copied().fold(0.0, f64::max);
    let xmax = x.iter().copied().fold(0.0, f64::max);
    let fallback = [2.0 * ymax.max(1e-9), xmax.max(1e-9)];
    if pts.len() < 2 {
        return fallback;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return fallback;
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    if icpt > 0.0 && slope > 0.0 {
        [1.0 / icpt, slope / icpt]
    } else {
        fallback
    }
}

fn linear_background(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    ensure(!points.is_empty(), "background", "needs at least one point")?;
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Ok((my, 0.0));
    }
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Ok((my - slope * mx, slope))
}
