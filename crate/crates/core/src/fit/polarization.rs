//! Polarization dependence `offset + amplitude · sin²(θ - phase)`.

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;


use super::nlls::{fit_curve, Bounds, CurveModel, FitError, NllsOptions};
use super::sorted_pairs;
use crate::emitter::{polarization_response, visibility, wrap_degrees};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationFit {
    pub offset: f64,
    pub amplitude: f64,
    /// In [0, 180).
    pub phase_deg: f64,
    pub visibility: f64,
    pub sigma_offset: f64,
    pub sigma_amplitude: f64,
    pub sigma_phase_deg: f64,
    pub sigma_visibility: f64,
    pub chi2: f64,
    /// Angles cover less than 180°; phase and visibility may be ambiguous.
    pub ambiguity_warning: bool,
}

struct SinSquared;

// params: [offset, amplitude, phase_deg]
impl CurveModel for SinSquared {
    fn num_params(&self) -> usize {
        3
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        polarization_response(x, p[0], p[1], p[2])
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) -> bool {
        let arg = (x - p[2]).to_radians();
        let s = arg.sin();
        grad[0] = 1.0;
        grad[1] = s * s;
        grad[2] = -p[1] * (2.0 * arg).sin() * core::f64::consts::PI / 180.0;
        true
    }
}

pub fn fit_polarization(angles_deg: &[f64], rates: &[f64]) -> Result<PolarizationFit> {
    ensure(angles_deg.len() == rates.len(), "rates", "length differs from angles")?;
    if angles_deg.len() < 3 {
        return Err(FitError::Underdetermined { points: angles_deg.len(), params: 3 }.into());
    }
    ensure(angles_deg.iter().chain(rates).all(|v| v.is_finite()), "rates", "must be finite")?;
    let (x, y) = sorted_pairs(angles_deg, rates);
    let ambiguity_warning = x[x.len() - 1] - x[0] < 180.0;

    // Exact linear solution in the basis {1, cos 2θ, sin 2θ} as the start.
    let (c0, c1, c2) = harmonic_fit(&x, &y);
    let amp0 = 2.0 * (c1 * c1 + c2 * c2).sqrt();
    let phase0 = wrap_degrees((0.5 * (-c2).atan2(-c1)).to_degrees(), 180.0);
    let offset0 = (c0 - 0.5 * amp0).max(0.0);

    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if amp0 <= 1e-12 * scale {
        return Ok(PolarizationFit {
            offset: c0,
            amplitude: 0.0,
            phase_deg: 0.0,
            visibility: 0.0,
            sigma_offset: f64::NAN,
            sigma_amplitude: f64::NAN,
            sigma_phase_deg: f64::INFINITY,
            sigma_visibility: f64::NAN,
            chi2: y.iter().map(|v| (v - c0) * (v - c0)).sum(),
            ambiguity_warning,
        });
    }

    let bounds = Bounds::new(vec![0.0, 0.0, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY, f64::INFINITY]);
    let sol = fit_curve(&SinSquared, &x, &y, None, &[offset0, amp0, phase0], Some(&bounds), &NllsOptions::default())?;
    let (o, a) = (sol.params[0], sol.params[1]);
    let cov = &sol.covariance;
    // V = A/(A + 2o): ∂V/∂o = -2A/D², ∂V/∂A = 2o/D²
    let d = a + 2.0 * o;
    let (dv_o, dv_a) = (-2.0 * a / (d * d), 2.0 * o / (d * d));
    let var_v = dv_o * dv_o * cov[0] + 2.0 * dv_o * dv_a * cov[1] + dv_a * dv_a * cov[4];
    Ok(PolarizationFit {
        offset: o,
        amplitude: a,
        phase_deg: wrap_degrees(sol.params[2], 180.0),
        visibility: visibility(o, a),
        sigma_offset: sol.sigma(0),
        sigma_amplitude: sol.sigma(1),
        sigma_phase_deg: sol.sigma(2),
        sigma_visibility: var_v.max(0.0).sqrt(),
        chi2: sol.chi2,
        ambiguity_warning,
    })
}

fn harmonic_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&th, &v) in x.iter().zip(y) {
        let t = (2.0 * th).to_radians();
        let row = [1.0, t.cos(), t.sin()];
        for a in 0..3 {
            aty[a] += row[a] * v;
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    let sol = solve3(ata, aty).unwrap_or([y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0]);
    (sol[0], sol[1], sol[2])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut xs = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * xs[c]).sum();
        xs[r] = (b[r] - s) / a[r][r];
    }
    Some(xs)
}

/// Angles `0, step, ..., < 360` in degrees.
pub fn angle_sweep(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg).round() as usize;
    (0..n).map(|i| i as f64 * step_deg).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::PolarizationCurve;

    fn data(v: f64, dipole: f64) -> (Vec<f64>, Vec<f64>) {
        let c = PolarizationCurve::from_mixture(10.0, v, dipole);
        let x = angle_sweep(10.0);
        let y = x.iter().map(|&t| c.eval(t)).collect();
        (x, y)
    }

    #[test]
    fn constant_rates_have_zero_visibility() {
        let x = angle_sweep(15.0);
        let y = vec![4.0; x.len()];
        let f = fit_polarization(&x, &y).unwrap();
        assert_eq!(f.visibility, 0.0);
        assert!((f.offset - 4.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_visibility() {
        for v in [0.54, 0.25, 1.0] {
            let (x, y) = data(v, 30.0);
            let f = fit_polarization(&x, &y).unwrap();
            assert!((f.visibility - v).abs() < 1e-6, "{v}: {f:?}");
            assert!(!f.ambiguity_warning);
        }
    }

    #[test]
    fn phase_shift_keeps_visibility() {
        let (x, y0) = data(0.54, 30.0);
        let (_, y1) = data(0.54, 120.0);
        let a = fit_polarization(&x, &y0).unwrap();
        let b = fit_polarization(&x, &y1).unwrap();
        assert!((a.visibility - b.visibility).abs() < 1e-9);
        let dphi = wrap_degrees(b.phase_deg - a.phase_deg, 180.0);
        assert!((dphi - 90.0).abs() < 1e-6, "{dphi}");
        assert!((a.phase_deg - 120.0).abs() < 1e-6);
    }

    #[test]
    fn short_span_warns() {
        let c = PolarizationCurve::from_mixture(10.0, 0.5, 40.0);
        let x: Vec<f64> = (0..15).map(|i| i as f64 * 10.0).collect();
        let y: Vec<f64> = x.iter().map(|&t| c.eval(t)).collect();
        assert!(fit_polarization(&x, &y).unwrap().ambiguity_warning);
    }

    #[test]
    fn reorder_invariant() {
        let (x, y) = data(0.4, 75.0);
        let mut xr = x.clone();
        let mut yr = y.clone();
        xr.reverse();
        yr.reverse();
        assert_eq!(fit_polarization(&x, &y).unwrap(), fit_polarization(&xr, &yr).unwrap());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [3.0, 5.0, 40.0];
        for x in [0.0, 27.0, 95.0, 170.0] {
            let mut g = [0.0; 3];
            SinSquared.gradient(x, &p, &mut g);
            let fd = super::super::nlls::finite_difference_gradient(&SinSquared, x, &p);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-6), "{a} vs {b}");
            }
        }
    }
}
