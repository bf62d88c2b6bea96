//! Curve fitting: the shared least-squares engine and the spectral,
//! saturation and polarization analyses built on it.

pub mod nlls;
pub mod polarization;
pub mod saturation;
pub mod spectrum;

pub use nlls::{fit_curve, nlls_fit, Bounds, CurveModel, FitError, LeastSquaresProblem, NllsOptions, NllsSolution};
pub use polarization::{fit_polarization, PolarizationFit};
pub use saturation::{fit_saturation, SaturationFit};
pub use spectrum::{correct_instrument_width, debye_waller, fit_lorentzian, DebyeWaller, LorentzianFit, Spectrum};

use alloc::vec::Vec;

/// Sorts paired samples by `(x, y)` so fits do not depend on input order.
pub(crate) fn sorted_pairs(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.into_iter().unzip()
}
