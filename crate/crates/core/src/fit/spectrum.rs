//! Emission spectra: Lorentzian ZPL fitting, instrument-width correction and
//! the Debye-Waller fraction.

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;


use super::nlls::{fit_curve, Bounds, CurveModel, FitError, NllsOptions};
use crate::emitter::Pedestal;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    wavelengths_nm: Vec<f64>,
    intensities: Vec<f64>,
    resolution_nm: f64,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, intensities: Vec<f64>, resolution_nm: f64) -> Result<Self> {
        if wavelengths_nm.len() != intensities.len() {
            return Err(Error::InvalidSpectrum(format!(
                "{} wavelengths but {} intensities",
                wavelengths_nm.len(),
                intensities.len()
            )));
        }
        if let Some(i) = wavelengths_nm.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpectrum(format!("wavelengths not strictly increasing at index {}", i + 1)));
        }
        if let Some(i) = intensities.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSpectrum(format!("intensity at index {i} is negative or not finite")));
        }
        ensure(resolution_nm >= 0.0, "resolution_nm", "must be non-negative")?;
        Ok(Spectrum { wavelengths_nm, intensities, resolution_nm })
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn resolution_nm(&self) -> f64 {
        self.resolution_nm
    }

    pub fn len(&self) -> usize {
        self.wavelengths_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths_nm.is_empty()
    }

    /// Same spectrum with every intensity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Spectrum::new(self.wavelengths_nm.clone(), self.intensities.iter().map(|v| v * factor).collect(), self.resolution_nm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub peak_amplitude: f64,
    /// Polynomial in `(λ - pedestal_reference_nm)`.
    pub pedestal: Pedestal,
    pub pedestal_reference_nm: f64,
    pub sigma_center_nm: f64,
    pub sigma_fwhm_nm: f64,
    pub sigma_amplitude: f64,
    pub sigma_pedestal: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    /// Peak sits on the first/last sample or within one FWHM of an edge.
    pub edge_warning: bool,
}

impl LorentzianFit {
    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        self.zpl(wavelength_nm) + self.pedestal.eval(wavelength_nm - self.pedestal_reference_nm)
    }

    /// The Lorentzian part alone.
    pub fn zpl(&self, wavelength_nm: f64) -> f64 {
        self.peak_amplitude * crate::emitter::lorentzian(wavelength_nm, self.center_nm, self.fwhm_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianOptions {
    /// Polynomial order of the pedestal (0 = constant).
    pub pedestal_order: usize,
}

impl Default for LorentzianOptions {
    fn default() -> Self {
        LorentzianOptions { pedestal_order: 1 }
    }
}

struct LorentzianModel {
    reference: f64,
    pedestal_terms: usize,
}

// params: [amplitude, center, fwhm, pedestal...]
impl CurveModel for LorentzianModel {
    fn num_params(&self) -> usize {
        3 + self.pedestal_terms
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let g = 0.5 * p[2];
        let d = x - p[1];
        let u = x - self.reference;
        let ped = p[3..].iter().rev().fold(0.0, |acc, c| acc * u + c);
        p[0] * g * g / (d * d + g * g) + ped
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) -> bool {
        let g = 0.5 * p[2];
        let d = x - p[1];
        let den = d * d + g * g;
        grad[0] = g * g / den;
        grad[1] = p[0] * g * g * 2.0 * d / (den * den);
        grad[2] = p[0] * g * d * d / (den * den);
        let u = x - self.reference;
        let mut pow = 1.0;
        for gk in &mut grad[3..] {
            *gk = pow;
            pow *= u;
        }
        true
    }
}

/// Fits a Lorentzian plus polynomial pedestal with the default options.
pub fn fit_lorentzian(s: &Spectrum) -> Result<LorentzianFit> {
    fit_lorentzian_with(s, &LorentzianOptions::default())
}

pub fn fit_lorentzian_with(s: &Spectrum, options: &LorentzianOptions) -> Result<LorentzianFit> {
    let x = &s.wavelengths_nm;
    let y = &s.intensities;
    let terms = options.pedestal_order + 1;
    if x.len() < 3 + terms {
        return Err(FitError::Underdetermined { points: x.len(), params: 3 + terms }.into());
    }
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let span = hi - lo;

    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    if !(ymax - ymin > 1e-12 * ymax.abs().max(f64::MIN_POSITIVE)) {
        return Err(FitError::Degenerate("spectrum has no peak above its pedestal").into());
    }
    let ped0 = y[0].min(y[y.len() - 1]);
    let amp0 = ymax - ped0;
    let half = ped0 + 0.5 * amp0;
    let left = (0..imax).rev().find(|&i| y[i] < half).map(|i| interp_crossing(x, y, i, half));
    let right = (imax + 1..x.len()).find(|&i| y[i] < half).map(|i| interp_crossing(x, y, i - 1, half));
    let center0 = x[imax];
    let fwhm0 = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (center0 - l),
        (None, Some(r)) => 2.0 * (r - center0),
        (None, None) => 0.25 * span,
    }
    .max(min_spacing(x));

    let reference = 0.5 * (lo + hi);
    let model = LorentzianModel { reference, pedestal_terms: terms };
    let mut initial = vec![amp0, center0, fwhm0, ped0];
    initial.resize(3 + terms, 0.0);
    let mut lower = vec![0.0, lo, 0.1 * min_spacing(x)];
    let mut upper = vec![f64::INFINITY, hi, 10.0 * span];
    lower.resize(3 + terms, f64::NEG_INFINITY);
    upper.resize(3 + terms, f64::INFINITY);
    let bounds = Bounds::new(lower, upper);

    let sol = fit_curve(&model, x, y, None, &initial, Some(&bounds), &NllsOptions::default())?;
    let p = &sol.params;
    let (center, fwhm) = (p[1], p[2]);
    let edge_warning = imax == 0 || imax == x.len() - 1 || center - lo < fwhm || hi - center < fwhm;
    Ok(LorentzianFit {
        center_nm: center,
        fwhm_nm: fwhm,
        peak_amplitude: p[0],
        pedestal: Pedestal { coefficients: p[3..].to_vec() },
        pedestal_reference_nm: reference,
        sigma_amplitude: sol.sigma(0),
        sigma_center_nm: sol.sigma(1),
        sigma_fwhm_nm: sol.sigma(2),
        sigma_pedestal: (3..p.len()).map(|i| sol.sigma(i)).collect(),
        chi2: sol.chi2,
        dof: sol.dof,
        edge_warning,
    })
}

fn interp_crossing(x: &[f64], y: &[f64], i: usize, level: f64) -> f64 {
    // level lies between y[i] and y[i + 1]
    let (x0, x1, y0, y1) = (x[i], x[i + 1], y[i], y[i + 1]);
    if y1 == y0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

fn min_spacing(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Removes the instrument width from an observed line width, treating the
/// instrument response as Gaussian and adding widths in quadrature.
pub fn correct_instrument_width(fwhm_observed_nm: f64, resolution_nm: f64) -> Result<f64> {
    ensure(fwhm_observed_nm > 0.0, "fwhm_observed_nm", "must be positive")?;
    ensure(resolution_nm >= 0.0, "resolution_nm", "must be non-negative")?;
    if resolution_nm >= fwhm_observed_nm {
        return Err(Error::UnresolvableLine { observed_nm: fwhm_observed_nm, resolution_nm });
    }
    Ok((fwhm_observed_nm * fwhm_observed_nm - resolution_nm * resolution_nm).sqrt())
}

/// How the background is treated in the Debye-Waller denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DwBackground {
    /// Everything inside the window counts as emission.
    #[default]
    Included,
    /// A constant level is subtracted from the data before integration.
    Subtract(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebyeWaller {
    pub fraction: f64,
    pub window_nm: (f64, f64),
    pub zpl_area: f64,
    pub total_area: f64,
    /// Raw ratio fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

/// ZPL fraction: trapezoidal area of the fitted Lorentzian over the total
/// emission, both integrated over the samples inside `window_nm`.
pub fn debye_waller(s: &Spectrum, fit: &LorentzianFit, window_nm: (f64, f64)) -> Result<DebyeWaller> {
    debye_waller_with(s, fit, window_nm, DwBackground::Included)
}

pub fn debye_waller_with(
    s: &Spectrum,
    fit: &LorentzianFit,
    window_nm: (f64, f64),
    background: DwBackground,
) -> Result<DebyeWaller> {
    ensure(window_nm.0 < window_nm.1, "window_nm", "min must be below max")?;
    let inside: Vec<usize> =
        (0..s.len()).filter(|&i| (window_nm.0..=window_nm.1).contains(&s.wavelengths_nm[i])).collect();
    if inside.len() < 2 {
        return Err(Error::InvalidSpectrum("fewer than two samples inside the integration window".to_string()));
    }
    if !(window_nm.0..=window_nm.1).contains(&fit.center_nm) {
        return Err(Error::InvalidSpectrum("integration window does not contain the ZPL".to_string()));
    }
    let offset = match background {
        DwBackground::Included => 0.0,
        DwBackground::Subtract(level) => level,
    };
    let mut zpl = 0.0;
    let mut total = 0.0;
    for w in inside.windows(2) {
        let (i, j) = (w[0], w[1]);
        let h = s.wavelengths_nm[j] - s.wavelengths_nm[i];
        zpl += 0.5 * h * (fit.zpl(s.wavelengths_nm[i]) + fit.zpl(s.wavelengths_nm[j]));
        total += 0.5 * h * (s.intensities[i] - offset + s.intensities[j] - offset);
    }
    if total <= 0.0 {
        return Err(Error::InvalidSpectrum("zero integrated emission in window".to_string()));
    }
    let raw = zpl / total;
    let fraction = raw.clamp(0.0, 1.0);
    Ok(DebyeWaller { fraction, window_nm, zpl_area: zpl, total_area: total, clamped: fraction != raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emitter::{EmitterModel, ZplSpectrum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    fn synthetic(pedestal: Pedestal, amplitude: f64) -> Spectrum {
        let m = EmitterModel::default();
        let z = ZplSpectrum::new(&m, amplitude, pedestal).unwrap();
        let x = grid(720.0, 760.0, 0.1);
        let y = x.iter().map(|&l| z.eval(l)).collect();
        Spectrum::new(x, y, 1.5).unwrap()
    }

    #[test]
    fn rejects_malformed_spectra() {
        assert!(Spectrum::new(vec![1.0, 2.0], vec![1.0], 0.0).is_err());
        assert!(Spectrum::new(vec![2.0, 1.0], vec![1.0, 1.0], 0.0).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![1.0, f64::NAN], 0.0).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![1.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn noiseless_recovery() {
        let s = synthetic(Pedestal { coefficients: vec![0.2, 0.004] }, 3.0);
        let f = fit_lorentzian(&s).unwrap();
        assert!((f.center_nm - 738.8).abs() / 738.8 < 1e-4);
        assert!((f.fwhm_nm - 7.0).abs() / 7.0 < 1e-4);
        assert!((f.peak_amplitude - 3.0).abs() / 3.0 < 1e-4);
        assert!(!f.edge_warning);
    }

    #[test]
    fn noisy_recovery_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let clean = synthetic(Pedestal::constant(0.1), 1.0);
        let trials = 100;
        let (mut dc, mut dw) = (0.0, 0.0);
        for _ in 0..trials {
            let y: Vec<f64> = clean.intensities().iter().map(|v| v * (1.0 + 0.05 * gauss(&mut rng))).collect();
            let s = Spectrum::new(clean.wavelengths_nm().to_vec(), y, 1.5).unwrap();
            let f = fit_lorentzian(&s).unwrap();
            dc += f.center_nm - 738.8;
            dw += f.fwhm_nm - 7.0;
        }
        let (bias_c, bias_w) = (dc / trials as f64, dw / trials as f64);
        assert!(bias_c.abs() < 0.1, "center bias {bias_c}");
        assert!(bias_w.abs() / 7.0 < 0.05, "fwhm bias {bias_w}");
    }

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller; test-only
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
    }

    #[test]
    fn pedestal_only_is_degenerate_or_zero() {
        let x = grid(720.0, 760.0, 0.1);
        let flat = Spectrum::new(x.clone(), vec![0.5; x.len()], 1.5).unwrap();
        assert!(matches!(fit_lorentzian(&flat), Err(Error::Fit(FitError::Degenerate(_)))));
        // sloped pedestal: peak at the edge; either fails or finds ~no amplitude
        let sloped = Spectrum::new(x.clone(), x.iter().map(|l| 0.5 + 0.01 * (l - 720.0)).collect(), 1.5).unwrap();
        match fit_lorentzian(&sloped) {
            Err(_) => {}
            Ok(f) => {
                let area = f.peak_amplitude * f.fwhm_nm;
                assert!(f.edge_warning || area < 1e-3, "{f:?}");
            }
        }
    }

    #[test]
    fn edge_peak_flagged() {
        let m = EmitterModel { zpl_center_nm: 721.0, ..EmitterModel::default() };
        let z = ZplSpectrum::new(&m, 1.0, Pedestal::constant(0.05)).unwrap();
        let x = grid(720.0, 760.0, 0.1);
        let y = x.iter().map(|&l| z.eval(l)).collect();
        let f = fit_lorentzian(&Spectrum::new(x, y, 1.5).unwrap()).unwrap();
        assert!(f.edge_warning);
    }

    #[test]
    fn width_correction() {
        let w = correct_instrument_width(7.0, 1.5).unwrap();
        assert!((w - 6.837_397_165_588_672).abs() < 1e-12);
        assert!(w < 7.0);
        assert_eq!(correct_instrument_width(4.2, 0.0).unwrap(), 4.2);
        assert!(matches!(correct_instrument_width(1.0, 1.5), Err(Error::UnresolvableLine { .. })));
        assert!(correct_instrument_width(1.5, 1.5).is_err());
    }

    #[test]
    fn dw_pure_zpl_is_one() {
        let s = synthetic(Pedestal::zero(), 2.0);
        let f = fit_lorentzian_with(&s, &LorentzianOptions { pedestal_order: 0 }).unwrap();
        let dw = debye_waller(&s, &f, (727.0, 752.0)).unwrap();
        assert!((dw.fraction - 1.0).abs() < 1e-3, "{dw:?}");
    }

    #[test]
    fn dw_recovers_constructed_fraction() {
        // Oracle: constant pedestal chosen so the Lorentzian holds 74% of the
        // window area, from the closed-form Lorentzian integral.
        let (lo, hi) = (727.0, 752.0);
        let g = 3.5;
        let zpl_area = g * (((hi - 738.8) / g).atan() - ((lo - 738.8) / g).atan());
        let level = zpl_area * (1.0 - 0.74) / (0.74 * (hi - lo));
        let s = synthetic(Pedestal::constant(level), 1.0);
        let f = fit_lorentzian(&s).unwrap();
        let dw = debye_waller(&s, &f, (lo, hi)).unwrap();
        assert!((dw.fraction - 0.74).abs() < 0.01, "{dw:?}");
    }

    #[test]
    fn dw_depends_on_window() {
        let m = EmitterModel::default();
        let z = ZplSpectrum::with_debye_waller(&m, 1.0, (727.0, 752.0)).unwrap();
        let x = grid(715.0, 765.0, 0.05);
        let y = x.iter().map(|&l| z.eval(l)).collect();
        let s = Spectrum::new(x, y, 1.5).unwrap();
        let f = fit_lorentzian(&s).unwrap();
        let full = debye_waller(&s, &f, (727.0, 752.0)).unwrap();
        let narrow = debye_waller(&s, &f, (738.8 - 21.0, 738.8 + 21.0)).unwrap();
        let tight = debye_waller(&s, &f, (738.8 - 3.0 * 7.0 / 2.0, 738.8 + 3.0 * 7.0 / 2.0)).unwrap();
        assert!((full.fraction - narrow.fraction).abs() > 1e-3);
        assert!((tight.fraction - full.fraction).abs() > 1e-3);
        // a narrower window around the line holds relatively more ZPL
        assert!(tight.fraction > full.fraction);
    }

    #[test]
    fn dw_background_subtraction_raises_fraction() {
        let s = synthetic(Pedestal::constant(0.2), 1.0);
        let f = fit_lorentzian(&s).unwrap();
        let incl = debye_waller(&s, &f, (727.0, 752.0)).unwrap();
        let sub = debye_waller_with(&s, &f, (727.0, 752.0), DwBackground::Subtract(0.1)).unwrap();
        assert!(sub.fraction > incl.fraction);
        let err = debye_waller_with(&s, &f, (727.0, 752.0), DwBackground::Subtract(100.0));
        assert!(err.is_err());
    }

    #[test]
    fn rescaling_preserves_shape_parameters() {
        let s = synthetic(Pedestal { coefficients: vec![0.2, 0.004] }, 3.0);
        let a = fit_lorentzian(&s).unwrap();
        let b = fit_lorentzian(&s.scaled(17.0).unwrap()).unwrap();
        assert!((a.center_nm - b.center_nm).abs() < 1e-8);
        assert!((a.fwhm_nm - b.fwhm_nm).abs() < 1e-8);
        assert!((b.peak_amplitude / a.peak_amplitude - 17.0).abs() < 1e-7);
        let dwa = debye_waller(&s, &a, (727.0, 752.0)).unwrap().fraction;
        let dwb = debye_waller(&s.scaled(17.0).unwrap(), &b, (727.0, 752.0)).unwrap().fraction;
        assert!((dwa - dwb).abs() < 1e-9);
    }

    #[test]
    fn model_gradient_matches_finite_difference() {
        let model = LorentzianModel { reference: 740.0, pedestal_terms: 3 };
        let p = [2.0, 738.8, 7.0, 0.3, 0.01, -0.002];
        for x in [725.0, 736.0, 738.8, 741.3, 755.0] {
            let mut g = vec![0.0; 6];
            assert!(model.gradient(x, &p, &mut g));
            let fd = super::super::nlls::finite_difference_gradient(&model, x, &p);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-5 * a.abs().max(1e-6), "{a} vs {b}");
            }
        }
    }
}
