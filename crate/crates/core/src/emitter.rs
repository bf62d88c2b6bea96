//! Effective two-level emitter, excitation, background and detection-chain
//! parameters, with the closed-form responses everything else builds on.

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use alloc::vec::Vec;


use crate::error::{ensure, Result};
use crate::units;

/// Ground-truth description of a single emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterModel {
    pub lifetime_ns: f64,
    pub n_inf_kcps: f64,
    pub i_sat: f64,
    pub zpl_center_nm: f64,
    pub zpl_fwhm_nm: f64,
    pub dw_factor: f64,
    pub emission_dipole_angle_deg: f64,
    pub excitation_dipole_angle_deg: f64,
    pub emission_visibility: f64,
    pub excitation_visibility: f64,
}

impl Default for EmitterModel {
    fn default() -> Self {
        EmitterModel {
            lifetime_ns: 1.0,
            n_inf_kcps: 29.0,
            i_sat: 130.0,
            zpl_center_nm: 738.8,
            zpl_fwhm_nm: 7.0,
            dw_factor: 0.74,
            emission_dipole_angle_deg: 0.0,
            excitation_dipole_angle_deg: 0.0,
            emission_visibility: 0.54,
            excitation_visibility: 0.25,
        }
    }
}

impl EmitterModel {
    pub fn validate(&self) -> Result<()> {
        ensure(self.lifetime_ns > 0.0 && self.lifetime_ns.is_finite(), "lifetime_ns", "must be positive")?;
        ensure(self.i_sat > 0.0 && self.i_sat.is_finite(), "i_sat", "must be positive")?;
        ensure(self.n_inf_kcps >= 0.0 && self.n_inf_kcps.is_finite(), "n_inf_kcps", "must be non-negative")?;
        ensure(self.zpl_fwhm_nm > 0.0, "zpl_fwhm_nm", "must be positive")?;
        ensure(self.zpl_center_nm > 0.0, "zpl_center_nm", "must be positive")?;
        ensure(unit_interval(self.dw_factor), "dw_factor", "must lie in [0, 1]")?;
        ensure(unit_interval(self.emission_visibility), "emission_visibility", "must lie in [0, 1]")?;
        ensure(unit_interval(self.excitation_visibility), "excitation_visibility", "must lie in [0, 1]")?;
        ensure(self.emission_dipole_angle_deg.is_finite(), "emission_dipole_angle_deg", "must be finite")?;
        ensure(self.excitation_dipole_angle_deg.is_finite(), "excitation_dipole_angle_deg", "must be finite")?;
        Ok(())
    }

    /// Detected count rate (kcps) at excitation intensity `intensity` (MW/cm²).
    pub fn detected_rate(&self, intensity: f64) -> Result<f64> {
        saturation_rate(intensity, self.n_inf_kcps, self.i_sat)
    }

    /// Detected rate versus emission analyzer angle, realized as a mixture of
    /// a fully polarized fraction (the visibility) and an unpolarized rest.
    pub fn emission_polarization(&self, total_rate_kcps: f64) -> PolarizationCurve {
        PolarizationCurve::from_mixture(total_rate_kcps, self.emission_visibility, self.emission_dipole_angle_deg)
    }

    pub fn excitation_polarization(&self, total_rate_kcps: f64) -> PolarizationCurve {
        PolarizationCurve::from_mixture(total_rate_kcps, self.excitation_visibility, self.excitation_dipole_angle_deg)
    }
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationField {
    pub power_mw: f64,
    pub spot_diameter_um: f64,
    pub polarization_angle_deg: f64,
    pub wavelength_nm: f64,
}

impl Default for ExcitationField {
    fn default() -> Self {
        ExcitationField { power_mw: 135.0, spot_diameter_um: 0.6, polarization_angle_deg: 0.0, wavelength_nm: 532.0 }
    }
}

impl ExcitationField {
    pub fn validate(&self) -> Result<()> {
        ensure(self.power_mw >= 0.0 && self.power_mw.is_finite(), "power_mw", "must be non-negative")?;
        ensure(self.spot_diameter_um > 0.0, "spot_diameter_um", "must be positive")?;
        ensure(self.wavelength_nm > 0.0, "wavelength_nm", "must be positive")
    }

    pub fn intensity(&self) -> Result<f64> {
        units::power_to_intensity(self.power_mw, self.spot_diameter_um)
    }
}

/// Uncorrelated background accompanying the emitter signal.
///
/// When `sb_ratio` is present it takes precedence: the background rate is
/// derived from the signal rate as `signal / sb_ratio`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundContext {
    pub background_rate_kcps: f64,
    pub sb_ratio: Option<f64>,
}

impl Default for BackgroundContext {
    fn default() -> Self {
        BackgroundContext { background_rate_kcps: 0.3, sb_ratio: None }
    }
}

impl BackgroundContext {
    pub fn none() -> Self {
        BackgroundContext { background_rate_kcps: 0.0, sb_ratio: None }
    }

    pub fn with_sb_ratio(sb_ratio: f64) -> Self {
        BackgroundContext { background_rate_kcps: 0.0, sb_ratio: Some(sb_ratio) }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.background_rate_kcps >= 0.0 && self.background_rate_kcps.is_finite(),
            "background_rate_kcps",
            "must be non-negative",
        )?;
        if let Some(sb) = self.sb_ratio {
            ensure(sb > 0.0 && !sb.is_nan(), "sb_ratio", "must be positive")?;
        }
        Ok(())
    }

    /// Background rate (kcps) accompanying `signal_kcps`.
    pub fn rate_for_signal(&self, signal_kcps: f64) -> f64 {
        match self.sb_ratio {
            Some(sb) if sb.is_infinite() => 0.0,
            Some(sb) => signal_kcps / sb,
            None => self.background_rate_kcps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionChain {
    pub quantum_efficiency: f64,
    /// Gaussian FWHM of each detector's timing response.
    pub jitter_fwhm_ps: f64,
    pub dead_time_ns: f64,
    pub filter_pass_nm: (f64, f64),
}

impl Default for DetectionChain {
    fn default() -> Self {
        DetectionChain { quantum_efficiency: 0.65, jitter_fwhm_ps: 300.0, dead_time_ns: 50.0, filter_pass_nm: (727.0, 752.0) }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        ensure(unit_interval(self.quantum_efficiency), "quantum_efficiency", "must lie in [0, 1]")?;
        ensure(self.jitter_fwhm_ps >= 0.0 && self.jitter_fwhm_ps.is_finite(), "jitter_fwhm_ps", "must be non-negative")?;
        ensure(self.dead_time_ns >= 0.0 && self.dead_time_ns.is_finite(), "dead_time_ns", "must be non-negative")?;
        ensure(self.filter_pass_nm.0 < self.filter_pass_nm.1, "filter_pass_nm", "min must be below max")
    }

    /// FWHM of the timing response of a start-stop difference between two
    /// independent detectors of this chain.
    pub fn pair_jitter_fwhm_ps(&self) -> f64 {
        self.jitter_fwhm_ps * core::f64::consts::SQRT_2
    }
}

/// `n_inf · I / (I + I_sat)`.
pub fn saturation_rate(intensity: f64, n_inf_kcps: f64, i_sat: f64) -> Result<f64> {
    ensure(i_sat > 0.0 && i_sat.is_finite(), "i_sat", "must be positive")?;
    ensure(intensity >= 0.0, "intensity", "must be non-negative")?;
    ensure(n_inf_kcps >= 0.0, "n_inf_kcps", "must be non-negative")?;
    if intensity.is_infinite() {
        return Ok(n_inf_kcps);
    }
    Ok(n_inf_kcps * intensity / (intensity + i_sat))
}

/// `offset + amplitude · sin²(θ - phase)`, angles in degrees.
pub fn polarization_response(angle_deg: f64, offset_kcps: f64, amplitude_kcps: f64, phase_deg: f64) -> f64 {
    let s = sin_deg(wrap_degrees(angle_deg, 180.0) - phase_deg);
    offset_kcps + amplitude_kcps * s * s
}

fn sin_deg(deg: f64) -> f64 {
    wrap_degrees(deg, 180.0).to_radians().sin()
}

/// `deg` reduced into `[0, period)`.
pub fn wrap_degrees(deg: f64, period: f64) -> f64 {
    let r = deg % period;
    let r = if r < 0.0 { r + period } else { r };
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Visibility `(max - min)/(max + min) = A/(A + 2·offset)` of a sin² curve.
pub fn visibility(offset: f64, amplitude: f64) -> f64 {
    let denom = amplitude + 2.0 * offset;
    if denom <= 0.0 {
        0.0
    } else {
        amplitude / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationCurve {
    pub offset: f64,
    pub amplitude: f64,
    pub phase_deg: f64,
}

impl PolarizationCurve {
    /// A polarized fraction `v` along `dipole_angle_deg` plus an unpolarized
    /// remainder; the resulting visibility equals `v`. `total_rate` is the
    /// rate without an analyzer.
    pub fn from_mixture(total_rate: f64, v: f64, dipole_angle_deg: f64) -> Self {
        PolarizationCurve {
            offset: 0.5 * (1.0 - v) * total_rate,
            amplitude: v * total_rate,
            phase_deg: wrap_degrees(dipole_angle_deg - 90.0, 180.0),
        }
    }

    pub fn eval(&self, angle_deg: f64) -> f64 {
        polarization_response(angle_deg, self.offset, self.amplitude, self.phase_deg)
    }

    pub fn visibility(&self) -> f64 {
        visibility(self.offset, self.amplitude)
    }
}

/// Lorentzian of unit peak height and full width `fwhm` at half maximum.
pub fn lorentzian(x: f64, center: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    let d = x - center;
    g * g / (d * d + g * g)
}

/// Area of a unit-peak Lorentzian between `lo` and `hi`.
pub fn lorentzian_area(center: f64, fwhm: f64, lo: f64, hi: f64) -> f64 {
    let g = 0.5 * fwhm;
    g * (((hi - center) / g).atan() - ((lo - center) / g).atan())
}

/// Polynomial in `(λ - center)`, coefficients in increasing order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pedestal {
    pub coefficients: Vec<f64>,
}

impl Pedestal {
    pub fn zero() -> Self {
        Pedestal { coefficients: Vec::new() }
    }

    pub fn constant(level: f64) -> Self {
        Pedestal { coefficients: alloc::vec![level] }
    }

    pub fn eval(&self, offset_nm: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * offset_nm + c)
    }

    /// Exact integral of the polynomial between two offsets.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let prim = |x: f64| {
            self.coefficients
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * x + c / (k as f64 + 1.0))
                * x
        };
        prim(hi) - prim(lo)
    }
}

/// ZPL line shape: a Lorentzian at the emitter's ZPL plus a slowly varying
/// pedestal standing for the phonon sideband and host background.
#[derive(Debug, Clone, PartialEq)]
pub struct ZplSpectrum {
    pub amplitude: f64,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub pedestal: Pedestal,
}

impl ZplSpectrum {
    pub fn new(model: &EmitterModel, amplitude: f64, pedestal: Pedestal) -> Result<Self> {
        ensure(model.zpl_fwhm_nm > 0.0, "zpl_fwhm_nm", "must be positive")?;
        Ok(ZplSpectrum { amplitude, center_nm: model.zpl_center_nm, fwhm_nm: model.zpl_fwhm_nm, pedestal })
    }

    /// Constant pedestal sized so that the Lorentzian holds the model's
    /// Debye-Waller fraction of the emission within `window_nm`.
    pub fn with_debye_waller(model: &EmitterModel, amplitude: f64, window_nm: (f64, f64)) -> Result<Self> {
        model.validate()?;
        ensure(window_nm.0 < window_nm.1, "window_nm", "min must be below max")?;
        ensure(model.dw_factor > 0.0, "dw_factor", "must be positive to build a spectrum")?;
        let zpl = amplitude * lorentzian_area(model.zpl_center_nm, model.zpl_fwhm_nm, window_nm.0, window_nm.1);
        let width = window_nm.1 - window_nm.0;
        let level = zpl * (1.0 - model.dw_factor) / (model.dw_factor * width);
        Self::new(model, amplitude, Pedestal::constant(level))
    }

    pub fn eval(&self, wavelength_nm: f64) -> f64 {
        self.amplitude * lorentzian(wavelength_nm, self.center_nm, self.fwhm_nm)
            + self.pedestal.eval(wavelength_nm - self.center_nm)
    }

    /// Analytic ZPL fraction of the emission within a window.
    pub fn debye_waller(&self, window_nm: (f64, f64)) -> f64 {
        let zpl = self.amplitude * lorentzian_area(self.center_nm, self.fwhm_nm, window_nm.0, window_nm.1);
        let ped = self.pedestal.integral(window_nm.0 - self.center_nm, window_nm.1 - self.center_nm);
        if zpl + ped == 0.0 {
            return 0.0;
        }
        zpl / (zpl + ped)
    }
}

/// Spectral intensity of a unit-peak ZPL plus `pedestal`.
pub fn zpl_spectrum_model(wavelength_nm: f64, model: &EmitterModel, pedestal: &Pedestal) -> Result<f64> {
    ensure(model.zpl_fwhm_nm > 0.0, "zpl_fwhm_nm", "must be positive")?;
    Ok(lorentzian(wavelength_nm, model.zpl_center_nm, model.zpl_fwhm_nm) + pedestal.eval(wavelength_nm - model.zpl_center_nm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate() {
        EmitterModel::default().validate().unwrap();
        ExcitationField::default().validate().unwrap();
        BackgroundContext::default().validate().unwrap();
        DetectionChain::default().validate().unwrap();
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = EmitterModel::default();
        m.lifetime_ns = 0.0;
        assert!(m.validate().is_err());
        let mut m = EmitterModel::default();
        m.dw_factor = 1.2;
        assert!(m.validate().is_err());
        let mut d = DetectionChain::default();
        d.filter_pass_nm = (752.0, 727.0);
        assert!(d.validate().is_err());
        assert!(BackgroundContext::with_sb_ratio(0.0).validate().is_err());
    }

    #[test]
    fn saturation_examples() {
        assert!((saturation_rate(130.0, 29.0, 130.0).unwrap() - 14.5).abs() < 1e-12);
        // 29 · 47.7 / 177.7
        let r = saturation_rate(47.7, 29.0, 130.0).unwrap();
        assert!((r - 7.784_468_204_839_617).abs() < 1e-9, "{r}");
        assert!((r - 7.79).abs() < 0.01);
        let big = saturation_rate(130.0e6, 29.0, 130.0).unwrap();
        assert!((29.0 - big) / 29.0 < 1e-5);
        assert!(saturation_rate(1.0, 29.0, 0.0).is_err());
        assert!(saturation_rate(1.0, 29.0, -1.0).is_err());
    }

    #[test]
    fn polarization_examples() {
        for th in [0.0, 33.0, 90.0, 171.0] {
            assert_eq!(polarization_response(th, 5.0, 0.0, 12.0), 5.0);
        }
        assert_eq!(visibility(5.0, 0.0), 0.0);
        assert_eq!(visibility(0.0, 3.0), 1.0);
        let c = PolarizationCurve::from_mixture(10.0, 0.54, 20.0);
        assert!((c.visibility() - 0.54).abs() < 1e-15);
        let max = c.offset + c.amplitude;
        let min = c.offset;
        assert!((max / min - 1.54 / 0.46).abs() < 1e-12);
        assert!((max / min - 3.35).abs() < 0.01);
        // peak along dipole axis
        assert!((c.eval(20.0) - max).abs() < 1e-12);
    }

    #[test]
    fn zpl_shape() {
        let m = EmitterModel::default();
        let s = ZplSpectrum::new(&m, 2.0, Pedestal::zero()).unwrap();
        assert_eq!(s.debye_waller((727.0, 752.0)), 1.0);
        assert!((s.eval(738.8) - 2.0).abs() < 1e-15);
        assert!((s.eval(738.8 + 3.5) - 1.0).abs() < 1e-12);
        assert!((s.eval(738.8 - 3.5) - 1.0).abs() < 1e-12);
        let ped = Pedestal::constant(0.3);
        let c = zpl_spectrum_model(738.8, &m, &ped).unwrap();
        assert!((c - 1.3).abs() < 1e-15);
        let hw = zpl_spectrum_model(738.8 + 3.5, &m, &ped).unwrap();
        assert!((hw - (0.3 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn zpl_area_matches_analytic() {
        // trapezoid over ±500 FWHM against the closed-form area π·Γ/2
        let m = EmitterModel::default();
        let (lo, hi) = (738.8 - 3500.0, 738.8 + 3500.0);
        let n = 700_000;
        let h = (hi - lo) / n as f64;
        let mut area = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            area += w * zpl_spectrum_model(lo + i as f64 * h, &m, &Pedestal::zero()).unwrap();
        }
        area *= h;
        let analytic = core::f64::consts::PI * 3.5;
        assert!((area - analytic).abs() / analytic < 0.01, "{area} vs {analytic}");
    }

    #[test]
    fn debye_waller_construction() {
        let m = EmitterModel::default();
        let s = ZplSpectrum::with_debye_waller(&m, 1.0, (727.0, 752.0)).unwrap();
        assert!((s.debye_waller((727.0, 752.0)) - 0.74).abs() < 1e-12);
    }

    #[test]
    fn pedestal_integral() {
        let p = Pedestal { coefficients: alloc::vec![1.0, 2.0, 3.0] };
        // ∫_{-1}^{2} 1 + 2x + 3x² = 3 + 3 + 9
        assert!((p.integral(-1.0, 2.0) - 15.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn saturation_monotone_concave(i in 0.0f64..1e4, d in 1e-3f64..10.0, n_inf in 0.1f64..100.0, i_sat in 1.0f64..1e3) {
            let f = |x| saturation_rate(x, n_inf, i_sat).unwrap();
            prop_assert!(f(i + d) > f(i));
            prop_assert!(f(i) + f(i + 2.0 * d) <= 2.0 * f(i + d) + 1e-12);
            let frac = f(i) / n_inf;
            prop_assert!((0.0..1.0).contains(&frac));
        }

        #[test]
        fn intensity_linear_in_power(p in 0.0f64..1e3, a in 0.0f64..50.0) {
            let base = units::power_to_intensity(p, 0.6).unwrap();
            let scaled = units::power_to_intensity(a * p, 0.6).unwrap();
            prop_assert!((scaled - a * base).abs() <= 1e-12 * scaled.abs().max(1.0));
        }

        #[test]
        fn polarization_period(th in -720.0f64..720.0, off in 0.0f64..10.0, amp in 0.0f64..10.0, ph in 0.0f64..180.0) {
            let a = polarization_response(th, off, amp, ph);
            let b = polarization_response(th + 180.0, off, amp, ph);
            // θ + 180 is itself rounded, so equality holds to a few ulps of the angle
            prop_assert!((a - b).abs() <= 1e-13 * (off + amp).max(1.0), "{} vs {}", a, b);
        }

        #[test]
        fn sweep_visibility(off in 0.0f64..10.0, amp in 0.01f64..10.0, ph in 0.0f64..180.0) {
            let n = 36_000;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in 0..n {
                let v = polarization_response(k as f64 * 180.0 / n as f64, off, amp, ph);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let swept = (hi - lo) / (hi + lo);
            prop_assert!((swept - visibility(off, amp)).abs() < 1e-6);
        }

        #[test]
        fn zpl_symmetric(d in 0.0f64..50.0, level in 0.0f64..5.0) {
            let m = EmitterModel::default();
            let p = Pedestal::constant(level);
            let a = zpl_spectrum_model(m.zpl_center_nm + d, &m, &p).unwrap();
            let b = zpl_spectrum_model(m.zpl_center_nm - d, &m, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}
