//! HE11 mode of a vacuum-clad silica nanofiber, channeling of dipole
//! emission into it, and the count-rate bookkeeping that turns measured
//! rates into a coupling efficiency.

use alloc::format;

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use core::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::special::{bessel_j0, bessel_j1, bessel_j2, bessel_k_scaled};

/// First zero of J0: the single-mode cutoff of a step-index fiber.
pub const SINGLE_MODE_CUTOFF: f64 = 2.404_825_557_695_773;

/// Three-term Sellmeier dispersion `n² = 1 + Σ Bᵢλ²/(λ² - Cᵢ)`, λ in μm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sellmeier {
    pub b: [f64; 3],
    pub c_um2: [f64; 3],
    pub band_nm: (f64, f64),
}

impl Sellmeier {
    /// Fused silica (Malitson 1965), restricted to 400–1000 nm.
    pub fn fused_silica() -> Self {
        Sellmeier {
            b: [0.696_166_3, 0.407_942_6, 0.897_479_4],
            c_um2: [0.068_404_3 * 0.068_404_3, 0.116_241_4 * 0.116_241_4, 9.896_161 * 9.896_161],
            band_nm: (400.0, 1000.0),
        }
    }

    pub fn index(&self, wavelength_nm: f64) -> Result<f64> {
        let (lo, hi) = self.band_nm;
        if !(lo..=hi).contains(&wavelength_nm) {
            return Err(Error::OutOfBand { wavelength_nm, min_nm: lo, max_nm: hi });
        }
        let l2 = (wavelength_nm * 1e-3).powi(2);
        let n2 = 1.0 + self.b.iter().zip(&self.c_um2).map(|(b, c)| b * l2 / (l2 - c)).sum::<f64>();
        Ok(n2.sqrt())
    }
}

/// Refractive index of fused silica.
pub fn silica_index(wavelength_nm: f64) -> Result<f64> {
    Sellmeier::fused_silica().index(wavelength_nm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoreIndex {
    Sellmeier(Sellmeier),
    /// Wavelength-independent index, valid at any wavelength.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    pub diameter_nm: f64,
    pub core: CoreIndex,
    pub cladding_index: f64,
}

impl Default for FiberSpec {
    fn default() -> Self {
        FiberSpec { diameter_nm: 530.0, core: CoreIndex::Sellmeier(Sellmeier::fused_silica()), cladding_index: 1.0 }
    }
}

impl FiberSpec {
    pub fn with_diameter(diameter_nm: f64) -> Self {
        FiberSpec { diameter_nm, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.diameter_nm > 0.0 && self.diameter_nm.is_finite(), "diameter_nm", "must be positive")?;
        ensure(self.cladding_index >= 1.0, "cladding_index", "must be at least 1")?;
        if let CoreIndex::Constant(n) = self.core {
            ensure(n > self.cladding_index, "core index", "must exceed the cladding index")?;
        }
        Ok(())
    }

    pub fn core_index(&self, wavelength_nm: f64) -> Result<f64> {
        ensure(wavelength_nm > 0.0 && wavelength_nm.is_finite(), "wavelength_nm", "must be positive")?;
        match self.core {
            CoreIndex::Sellmeier(s) => s.index(wavelength_nm),
            CoreIndex::Constant(n) => Ok(n),
        }
    }

    pub fn radius_um(&self) -> f64 {
        0.5e-3 * self.diameter_nm
    }
}

/// `V = (π d / λ) √(n₁² - n₂²)`.
pub fn v_number(spec: &FiberSpec, wavelength_nm: f64) -> Result<f64> {
    spec.validate()?;
    let n1 = spec.core_index(wavelength_nm)?;
    let n2 = spec.cladding_index;
    ensure(n1 > n2, "core index", "must exceed the cladding index")?;
    Ok(PI * spec.diameter_nm / wavelength_nm * (n1 * n1 - n2 * n2).sqrt())
}

pub fn is_single_mode(v: f64) -> bool {
    v < SINGLE_MODE_CUTOFF
}

/// Field components of one circularly polarized HE11 mode at radius `r`,
/// normalized so that `∫ n² |e|² dA = 1` (μm⁻²). Only magnitudes matter for
/// the emission rate, so the `i` phase of the radial component is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub r_um: f64,
    pub e_r: f64,
    pub e_phi: f64,
    pub e_z: f64,
}

impl FieldSample {
    pub fn intensity(&self) -> f64 {
        self.e_r * self.e_r + self.e_phi * self.e_phi + self.e_z * self.e_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedMode {
    pub wavelength_nm: f64,
    pub radius_um: f64,
    pub core_index: f64,
    pub cladding_index: f64,
    /// Propagation constant (rad/μm).
    pub beta: f64,
    pub effective_index: f64,
    /// Transverse wavenumber inside the core (1/μm).
    pub h: f64,
    /// Evanescent decay constant outside the fiber (1/μm).
    pub q: f64,
    /// `dβ/dk₀` at fixed material index.
    pub group_index: f64,
    /// |characteristic function| at the returned root.
    pub residual: f64,
    s: f64,
    amplitude: f64,
}

/// HE11 characteristic function of the effective index `neff` in
/// `(n2, n1)`; the guided mode is a zero.
pub fn he11_characteristic(neff: f64, radius_um: f64, wavelength_nm: f64, n1: f64, n2: f64) -> f64 {
    let k = 2.0 * PI / (wavelength_nm * 1e-3);
    let beta = neff * k;
    let h = (n1 * n1 * k * k - beta * beta).sqrt();
    let q = (beta * beta - n2 * n2 * k * k).sqrt();
    let (ha, qa) = (h * radius_um, q * radius_um);
    if !(ha > 0.0 && qa > 0.0) {
        return f64::NAN;
    }
    let jterm = bessel_j0(ha) / (ha * bessel_j1(ha));
    let kterm = k1_log_derivative(qa) / qa;
    let n1s = n1 * n1;
    let contrast = (n1s - n2 * n2) / (2.0 * n1s);
    let mix = 1.0 / (qa * qa) + 1.0 / (ha * ha);
    let root = ((contrast * kterm).powi(2) + (beta / (n1 * k)).powi(2) * mix * mix).sqrt();
    jterm + (n1s + n2 * n2) / (2.0 * n1s) * kterm - 1.0 / (ha * ha) + root
}

// K1'(x)/K1(x) = -(K0 + K2)/(2 K1), ratio of scaled values
fn k1_log_derivative(x: f64) -> f64 {
    -(bessel_k_scaled(0, x) + bessel_k_scaled(2, x)) / (2.0 * bessel_k_scaled(1, x))
}

// J1'(x)/J1(x) = (J0 - J2)/(2 J1)
fn j1_log_derivative(x: f64) -> f64 {
    (bessel_j0(x) - bessel_j2(x)) / (2.0 * bessel_j1(x))
}

const SCAN_POINTS: usize = 4000;

/// Effective index of the HE11 mode: the largest root of the characteristic
/// function in `(n2, n1)`, bracketed by a dense sign scan and refined by
/// bisection to the resolution of `f64`.
pub fn he11_effective_index(radius_um: f64, wavelength_nm: f64, n1: f64, n2: f64) -> Result<(f64, f64)> {
    let f = |x: f64| he11_characteristic(x, radius_um, wavelength_nm, n1, n2);
    let span = n1 - n2;
    let node = |i: usize| n2 + span * (i as f64 + 0.5) / SCAN_POINTS as f64 * (1.0 - 1e-12);
    let mut hi = node(SCAN_POINTS - 1);
    let mut f_hi = f(hi);
    for i in (0..SCAN_POINTS - 1).rev() {
        let lo = node(i);
        let f_lo = f(lo);
        if f_lo.is_finite() && f_hi.is_finite() && f_lo.signum() != f_hi.signum() {
            let (root, res) = bisect(&f, lo, hi, f_lo);
            // a sign change across a pole of J0/J1 leaves a large residual
            if res < 1e-6 {
                return Ok((root, res));
            }
        }
        hi = lo;
        f_hi = f_lo;
    }
    Err(Error::NoGuidedMode(format!("no HE11 root for radius {radius_um} μm at {wavelength_nm} nm")))
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> (f64, f64) {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, 0.0);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (f(lo).abs(), f(hi).abs());
    if flo <= fhi {
        (lo, flo)
    } else {
        (hi, fhi)
    }
}

pub fn solve_he11(spec: &FiberSpec, wavelength_nm: f64) -> Result<GuidedMode> {
    let v = v_number(spec, wavelength_nm)?;
    ensure(v > 0.0, "v_number", "must be positive")?;
    let a = spec.radius_um();
    let n1 = spec.core_index(wavelength_nm)?;
    let n2 = spec.cladding_index;
    let (neff, residual) = he11_effective_index(a, wavelength_nm, n1, n2)?;

    let k = 2.0 * PI / (wavelength_nm * 1e-3);
    let beta = neff * k;
    let h = (n1 * n1 * k * k - beta * beta).sqrt();
    let q = (beta * beta - n2 * n2 * k * k).sqrt();
    let (ha, qa) = (h * a, q * a);
    let s = (1.0 / (ha * ha) + 1.0 / (qa * qa)) / (j1_log_derivative(ha) / ha + k1_log_derivative(qa) / qa);

    // dβ/dk at fixed index by central difference in wavelength
    let dl = 1e-4 * wavelength_nm;
    let (np, _) = he11_effective_index(a, wavelength_nm - dl, n1, n2)?;
    let (nm, _) = he11_effective_index(a, wavelength_nm + dl, n1, n2)?;
    let (kp, km) = (2.0 * PI / ((wavelength_nm - dl) * 1e-3), 2.0 * PI / ((wavelength_nm + dl) * 1e-3));
    let group_index = (np * kp - nm * km) / (kp - km);

    let mut mode = GuidedMode {
        wavelength_nm,
        radius_um: a,
        core_index: n1,
        cladding_index: n2,
        beta,
        effective_index: neff,
        h,
        q,
        group_index,
        residual,
        s,
        amplitude: 1.0,
    };
    mode.amplitude = 1.0 / mode.power_integral(8000).sqrt();
    Ok(mode)
}

/// Dipole orientation relative to the fiber axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Radial,
    Azimuthal,
    Axial,
    /// Average of the three principal orientations.
    Random,
}

impl GuidedMode {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / (self.wavelength_nm * 1e-3)
    }

    /// Normalized field at distance `r_um` from the fiber axis.
    pub fn field(&self, r_um: f64) -> FieldSample {
        let (a, h, q, s, beta) = (self.radius_um, self.h, self.q, self.s, self.beta);
        let amp = self.amplitude;
        let (e_r, e_phi, e_z) = if r_um < a {
            let (j0, j2) = (bessel_j0(h * r_um), bessel_j2(h * r_um));
            let c = beta / (2.0 * h);
            (c * ((1.0 - s) * j0 - (1.0 + s) * j2), -c * ((1.0 - s) * j0 + (1.0 + s) * j2), bessel_j1(h * r_um))
        } else {
            // J1(ha)/K1(qa) · K_ν(qr), with the K ratio taken from scaled values
            let ratio = |nu| {
                bessel_j1(h * a) * bessel_k_scaled(nu, q * r_um) / bessel_k_scaled(1, q * a) * (q * (a - r_um)).exp()
            };
            let (k0, k1, k2) = (ratio(0), ratio(1), ratio(2));
            let c = beta / (2.0 * q);
            (c * ((1.0 - s) * k0 + (1.0 + s) * k2), -c * ((1.0 - s) * k0 - (1.0 + s) * k2), k1)
        };
        FieldSample { r_um, e_r: amp * e_r, e_phi: amp * e_phi, e_z: amp * e_z }
    }

    /// `∫ n² |e|² dA` by composite Simpson with `intervals` subintervals on
    /// each side of the interface; the outer range extends to 60/q.
    pub fn power_integral(&self, intervals: usize) -> f64 {
        let n = intervals + intervals % 2;
        let a = self.radius_um;
        let n1s = self.core_index * self.core_index;
        let n2s = self.cladding_index * self.cladding_index;
        let inside = simpson(|r| n1s * self.field(r.min(a * (1.0 - 1e-15))).intensity() * r, 0.0, a, n);
        let outside = simpson(|r| n2s * self.field(r).intensity() * r, a, a + 60.0 / self.q, n);
        2.0 * PI * (inside + outside)
    }

    /// Emission rate into all four HE11 channels (two polarizations, two
    /// directions) relative to the free-space rate, for a dipole at `r_um`
    /// from the axis.
    pub fn guided_rate_ratio(&self, r_um: f64, orientation: Orientation) -> f64 {
        let e = self.field(r_um);
        let k = self.wavenumber();
        let pref = 3.0 * PI / (2.0 * k * k) * self.group_index * 4.0;
        let comp = |x: f64| pref * x * x;
        match orientation {
            Orientation::Radial => comp(e.e_r),
            Orientation::Azimuthal => comp(e.e_phi),
            Orientation::Axial => comp(e.e_z),
            Orientation::Random => (comp(e.e_r) + comp(e.e_phi) + comp(e.e_z)) / 3.0,
        }
    }

    /// Channeling efficiency with the non-guided rate approximated by the
    /// free-space rate, for a dipole `r_from_surface_nm` outside the fiber.
    pub fn channeling_efficiency(&self, r_from_surface_nm: f64, orientation: Orientation) -> f64 {
        let r = self.radius_um + 1e-3 * r_from_surface_nm;
        let eta = |o| {
            let x = self.guided_rate_ratio(r, o);
            x / (1.0 + x)
        };
        match orientation {
            Orientation::Random => {
                (eta(Orientation::Radial) + eta(Orientation::Azimuthal) + eta(Orientation::Axial)) / 3.0
            }
            o => eta(o),
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

fn check_mode(mode: &GuidedMode, spec: &FiberSpec) -> Result<()> {
    ensure(
        (mode.radius_um - spec.radius_um()).abs() <= 1e-12 * spec.radius_um(),
        "mode",
        "was solved for a different fiber diameter",
    )
}

/// η of a dipole `r_from_surface_nm` outside the fiber surface.
pub fn channeling_efficiency(
    mode: &GuidedMode,
    spec: &FiberSpec,
    r_from_surface_nm: f64,
    orientation: Orientation,
) -> Result<f64> {
    check_mode(mode, spec)?;
    ensure(r_from_surface_nm >= 0.0 && r_from_surface_nm.is_finite(), "r_from_surface_nm", "must be non-negative")?;
    Ok(mode.channeling_efficiency(r_from_surface_nm, orientation))
}

/// Distance from the surface (nm) at which η equals `eta_target`.
pub fn invert_channeling(mode: &GuidedMode, spec: &FiberSpec, eta_target: f64, orientation: Orientation) -> Result<f64> {
    check_mode(mode, spec)?;
    ensure(eta_target > 0.0 && eta_target.is_finite(), "eta_target", "must be positive")?;
    let eta = |r: f64| mode.channeling_efficiency(r, orientation);
    let maximum = eta(0.0);
    if eta_target > maximum {
        return Err(Error::UnreachableEfficiency { target: eta_target, maximum });
    }
    if eta_target == maximum {
        return Ok(0.0);
    }
    let mut hi = 1e3 / mode.q; // 1/q in nm
    while eta(hi) > eta_target {
        hi *= 2.0;
        ensure(hi < 1e7, "eta_target", "too small to invert")?;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eta(mid) > eta_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Transmission and collection factors between the emitter and detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionBudget {
    /// Fiber end to detector.
    pub kappa_onf: f64,
    pub sigma_kappa_onf: f64,
    /// Objective focus to detector.
    pub kappa_ol: f64,
    pub sigma_kappa_ol: f64,
    pub na: f64,
    /// Solid-angle collection fraction of the objective; derived from `na`
    /// when absent.
    pub f_ol: Option<f64>,
    /// Guided emission leaves through both fiber ends but is detected at
    /// one; counting both ends doubles the guided rate.
    pub guided_ends_counted: u8,
}

impl Default for CollectionBudget {
    fn default() -> Self {
        CollectionBudget {
            kappa_onf: 0.25,
            sigma_kappa_onf: 0.03,
            kappa_ol: 0.022,
            sigma_kappa_ol: 0.004,
            na: 0.85,
            f_ol: Some(0.23),
            guided_ends_counted: 2,
        }
    }
}

/// `(1 - √(1 - NA²))/2`: fraction of isotropic emission inside the cone.
pub fn solid_angle_fraction(na: f64) -> f64 {
    0.5 * (1.0 - (1.0 - na * na).sqrt())
}

impl CollectionBudget {
    pub fn validate(&self) -> Result<()> {
        let frac = |x: f64| x > 0.0 && x <= 1.0;
        ensure(frac(self.kappa_onf), "kappa_onf", "must lie in (0, 1]")?;
        ensure(frac(self.kappa_ol), "kappa_ol", "must lie in (0, 1]")?;
        ensure(frac(self.na) && self.na < 1.0, "na", "must lie in (0, 1)")?;
        ensure(self.sigma_kappa_onf >= 0.0 && self.sigma_kappa_ol >= 0.0, "sigma_kappa", "must be non-negative")?;
        if let Some(f) = self.f_ol {
            ensure(frac(f), "f_ol", "must lie in (0, 1]")?;
        }
        ensure(matches!(self.guided_ends_counted, 1 | 2), "guided_ends_counted", "must be 1 or 2")
    }

    pub fn collection_fraction(&self) -> f64 {
        self.f_ol.unwrap_or_else(|| solid_angle_fraction(self.na))
    }
}

/// A measured rate with its standard uncertainty (kcps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredRate {
    pub kcps: f64,
    pub sigma_kcps: f64,
}

impl MeasuredRate {
    pub fn exact(kcps: f64) -> Self {
        MeasuredRate { kcps, sigma_kcps: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingEstimate {
    pub eta: f64,
    /// First-order uncertainty from the transmission factors and rates.
    pub sigma_eta: f64,
    /// Absolute emission rate into guided modes.
    pub guided_kcps: f64,
    /// Absolute emission rate into radiation modes.
    pub radiated_kcps: f64,
    /// Distance from the surface consistent with `eta`, when inverted.
    pub r_nm: Option<f64>,
}

/// `η = G / (G + R)` with `G = ends · n_g / κ_ONF` and
/// `R = n_r / (κ_OL · f_OL)`.
pub fn efficiency_from_counts(n_guided_kcps: f64, n_radiated_kcps: f64, budget: &CollectionBudget) -> Result<CouplingEstimate> {
    efficiency_from_measured(MeasuredRate::exact(n_guided_kcps), MeasuredRate::exact(n_radiated_kcps), budget)
}

pub fn efficiency_from_measured(guided: MeasuredRate, radiated: MeasuredRate, budget: &CollectionBudget) -> Result<CouplingEstimate> {
    budget.validate()?;
    ensure(guided.kcps >= 0.0 && guided.kcps.is_finite(), "n_guided_kcps", "must be non-negative")?;
    ensure(radiated.kcps >= 0.0 && radiated.kcps.is_finite(), "n_radiated_kcps", "must be non-negative")?;
    ensure(guided.sigma_kcps >= 0.0 && radiated.sigma_kcps >= 0.0, "sigma_kcps", "must be non-negative")?;
    let g = budget.guided_ends_counted as f64 * guided.kcps / budget.kappa_onf;
    let r = radiated.kcps / (budget.kappa_ol * budget.collection_fraction());
    let total = g + r;
    if total <= 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    let eta = g / total;
    // relative errors of G and R; dη = η(1-η)(dG/G - dR/R)
    let rel = |s: f64, x: f64| if x > 0.0 { s / x } else { 0.0 };
    let rg2 = rel(budget.sigma_kappa_onf, budget.kappa_onf).powi(2) + rel(guided.sigma_kcps, guided.kcps).powi(2);
    let rr2 = rel(budget.sigma_kappa_ol, budget.kappa_ol).powi(2) + rel(radiated.sigma_kcps, radiated.kcps).powi(2);
    let sigma_eta = eta * (1.0 - eta) * (rg2 + rr2).sqrt();
    Ok(CouplingEstimate { eta, sigma_eta, guided_kcps: g, radiated_kcps: r, r_nm: None })
}

/// Computed coupling efficiency set against a reference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDiscrepancy {
    pub computed: f64,
    pub computed_sigma: f64,
    pub reference: f64,
    pub reference_sigma: f64,
    /// `reference / computed`.
    pub ratio: f64,
    /// The two 1σ intervals overlap.
    pub overlaps: bool,
}

impl CouplingEstimate {
    pub fn compare(&self, reference: f64, reference_sigma: f64) -> CouplingDiscrepancy {
        let gap = (reference - self.eta).abs();
        CouplingDiscrepancy {
            computed: self.eta,
            computed_sigma: self.sigma_eta,
            reference,
            reference_sigma,
            ratio: reference / self.eta,
            overlaps: gap <= self.sigma_eta + reference_sigma,
        }
    }

    pub fn with_position(mut self, mode: &GuidedMode, spec: &FiberSpec, orientation: Orientation) -> Result<Self> {
        self.r_nm = Some(invert_channeling(mode, spec, self.eta, orientation)?);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn mode738() -> (FiberSpec, GuidedMode) {
        let spec = FiberSpec::default();
        let mode = solve_he11(&spec, 738.0).unwrap();
        (spec, mode)
    }

    #[test]
    fn silica_index_values() {
        // direct evaluation of the Malitson coefficients
        let oracle = |l: f64| {
            let l2 = l * l;
            (1.0 + 0.6961663 * l2 / (l2 - 0.0684043f64.powi(2))
                + 0.4079426 * l2 / (l2 - 0.1162414f64.powi(2))
                + 0.8974794 * l2 / (l2 - 9.896161f64.powi(2)))
            .sqrt()
        };
        let n = silica_index(738.0).unwrap();
        assert!((n - oracle(0.738)).abs() < 1e-14);
        assert!((n - 1.454_476).abs() < 1e-6);
        assert!(silica_index(600.0).unwrap() > n && n > silica_index(900.0).unwrap());
        for l in (400..=1000).step_by(10) {
            assert!(silica_index(l as f64).unwrap() > 1.0);
        }
        assert!(matches!(silica_index(1200.0), Err(Error::OutOfBand { .. })));
        assert!(silica_index(399.0).is_err());
    }

    #[test]
    fn v_numbers() {
        let spec = FiberSpec::default();
        let v = v_number(&spec, 738.0).unwrap();
        let n = silica_index(738.0).unwrap();
        assert!((v - PI * 530.0 / 738.0 * (n * n - 1.0).sqrt()).abs() < 1e-12);
        assert!((v - 2.383).abs() < 0.001 && is_single_mode(v));
        let v532 = v_number(&spec, 532.0).unwrap();
        assert!((v532 - 3.33).abs() < 0.01 && !is_single_mode(v532));
        let fixed = FiberSpec { core: CoreIndex::Constant(n), ..spec };
        let ratio = v_number(&fixed, 738.0).unwrap() / v_number(&fixed, 7380.0).unwrap();
        assert!((ratio - 10.0).abs() < 1e-12);
    }

    #[test]
    fn he11_root() {
        let (_, m) = mode738();
        assert!(m.residual < 1e-10, "residual {}", m.residual);
        assert!(m.effective_index > 1.0 && m.effective_index < m.core_index);
        assert!((1.05..=1.35).contains(&m.effective_index));
        // pinned against an independent SciPy solution of the same equation
        assert!((m.effective_index - 1.217_879_409_381_411).abs() < 1e-9, "{}", m.effective_index);
        assert!((m.q - 5.918_348_920_103).abs() < 1e-7);
        assert!((m.group_index - 1.559_05).abs() < 1e-4, "{}", m.group_index);
    }

    #[test]
    fn single_root_in_bracket() {
        let (_, m) = mode738();
        let (n1, n2) = (m.core_index, 1.0);
        let f = |x| he11_characteristic(x, m.radius_um, 738.0, n1, n2);
        let pts: Vec<f64> = (1..20_000).map(|i| n2 + (n1 - n2) * i as f64 / 20_000.0).collect();
        let changes = pts.windows(2).filter(|w| f(w[0]).signum() != f(w[1]).signum()).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn dispersion_is_smooth() {
        let spec = FiberSpec::default();
        let a = solve_he11(&spec, 738.0).unwrap();
        let b = solve_he11(&spec, 739.0).unwrap();
        assert!((a.beta / b.beta - 1.0).abs() < 0.01);
        assert!(b.effective_index < a.effective_index);
    }

    #[test]
    fn field_is_normalized_and_continuous() {
        let (_, m) = mode738();
        let p = m.power_integral(12_000);
        assert!((p - 1.0).abs() < 1e-9, "{p}");
        let a = m.radius_um;
        let inner = m.field(a * (1.0 - 1e-12));
        let outer = m.field(a);
        // tangential components are continuous, normal D is continuous
        assert!((inner.e_phi - outer.e_phi).abs() < 1e-8 * outer.e_phi.abs());
        assert!((inner.e_z - outer.e_z).abs() < 1e-8 * outer.e_z.abs());
        let n1s = m.core_index * m.core_index;
        assert!((n1s * inner.e_r - outer.e_r).abs() < 1e-7 * outer.e_r.abs());
    }

    #[test]
    fn cutoff_is_reported() {
        let spec = FiberSpec { diameter_nm: 530.0, core: CoreIndex::Constant(1.0 + 1e-14), cladding_index: 1.0 };
        assert!(solve_he11(&spec, 738.0).is_err());
    }

    #[test]
    fn efficiency_profile() {
        let (spec, m) = mode738();
        let e = |r, o| channeling_efficiency(&m, &spec, r, o).unwrap();
        let r = Orientation::Random;
        assert!(e(50.0, r) > e(110.0, r) && e(110.0, r) > e(200.0, r));
        let at110 = e(110.0, r);
        assert!((0.02..=0.06).contains(&at110), "{at110}");
        assert!(e(5e3 / m.q, r) < 1e-3);
        let mean = (e(110.0, Orientation::Radial) + e(110.0, Orientation::Azimuthal) + e(110.0, Orientation::Axial)) / 3.0;
        assert_eq!(at110, mean);
        assert!(e(0.0, Orientation::Radial) > e(0.0, Orientation::Azimuthal));
        let mut last = 1.0;
        for i in 0..300 {
            let v = e(i as f64 * 2.0, r);
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn log_slope_approaches_two_q() {
        // |e|² ~ exp(-2qr)/r far out, so the relative gap to -2q shrinks as 1/r
        let (_, m) = mode738();
        let slope = |r_nm: f64| {
            let d = 1.0;
            let f = |x| m.channeling_efficiency(x, Orientation::Random).ln();
            (f(r_nm + d) - f(r_nm - d)) / (2.0 * d * 1e-3)
        };
        let gaps: Vec<f64> = [3.0, 5.0, 10.0, 20.0].iter().map(|k| slope(k * 1e3 / m.q) / (-2.0 * m.q) - 1.0).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0), "{gaps:?}");
        assert!(gaps[3] < 0.03);
    }

    #[test]
    fn inversion() {
        let (spec, m) = mode738();
        for o in [Orientation::Random, Orientation::Radial, Orientation::Axial] {
            let eta = channeling_efficiency(&m, &spec, 110.0, o).unwrap();
            let r = invert_channeling(&m, &spec, eta, o).unwrap();
            let back = channeling_efficiency(&m, &spec, r, o).unwrap();
            assert!((back - eta).abs() < 1e-8);
            assert!((r - 110.0).abs() < 1e-6);
        }
        assert!(matches!(
            invert_channeling(&m, &spec, 0.99, Orientation::Random),
            Err(Error::UnreachableEfficiency { .. })
        ));
        let r41 = invert_channeling(&m, &spec, 0.041, Orientation::Random).unwrap();
        assert!((70.0..=150.0).contains(&r41), "{r41}");
        let other = FiberSpec::with_diameter(400.0);
        assert!(channeling_efficiency(&m, &other, 10.0, Orientation::Random).is_err());
    }

    #[test]
    fn coupling_from_counts() {
        let b = CollectionBudget::default();
        let c = efficiency_from_counts(1.176, 1.5, &b).unwrap();
        let g = 2.0 * 1.176 / 0.25;
        let r = 1.5 / (0.022 * 0.23);
        assert!((c.eta - g / (g + r)).abs() < 1e-15);
        assert!((c.eta - 0.0308).abs() < 0.0005);
        let d = c.compare(0.041, 0.008);
        assert!(d.overlaps && d.ratio > 1.2);
        assert_eq!(efficiency_from_counts(0.0, 1.5, &b).unwrap().eta, 0.0);
        assert!(matches!(efficiency_from_counts(0.0, 0.0, &b), Err(Error::UndefinedEfficiency)));
        let doubled = efficiency_from_counts(2.352, 3.0, &b).unwrap();
        assert!((doubled.eta - c.eta).abs() < 1e-15);
        let one_end = CollectionBudget { guided_ends_counted: 1, ..b };
        assert!(efficiency_from_counts(1.176, 1.5, &one_end).unwrap().eta < c.eta);
    }

    #[test]
    fn budget_gains() {
        let b = CollectionBudget::default();
        let base = efficiency_from_counts(1.176, 1.5, &b).unwrap().eta;
        // a gain applied equally to both transmission factors cancels
        let both = CollectionBudget { kappa_onf: 0.5 * b.kappa_onf, kappa_ol: 0.5 * b.kappa_ol, ..b };
        assert!((efficiency_from_counts(1.176, 1.5, &both).unwrap().eta - base).abs() < 1e-15);
        let one = CollectionBudget { kappa_onf: 0.5 * b.kappa_onf, ..b };
        assert!(efficiency_from_counts(1.176, 1.5, &one).unwrap().eta > base);
        let derived = CollectionBudget { f_ol: None, ..b };
        assert!((derived.collection_fraction() - 0.23).abs() < 0.01);
        assert!(CollectionBudget { kappa_ol: 0.0, ..b }.validate().is_err());
        assert!(CollectionBudget { guided_ends_counted: 3, ..b }.validate().is_err());
    }

    #[test]
    fn uncertainty_propagation() {
        let b = CollectionBudget::default();
        let c = efficiency_from_measured(
            MeasuredRate { kcps: 1.176, sigma_kcps: 0.120 },
            MeasuredRate { kcps: 1.5, sigma_kcps: 0.150 },
            &b,
        )
        .unwrap();
        let only_kappa = efficiency_from_counts(1.176, 1.5, &b).unwrap();
        assert!(c.sigma_eta > only_kappa.sigma_eta && only_kappa.sigma_eta > 0.0);
        // finite-difference check of dη/dκ_ONF
        let h = 1e-7;
        let f = |k| efficiency_from_counts(1.176, 1.5, &CollectionBudget { kappa_onf: k, ..b }).unwrap().eta;
        let d = (f(0.25 + h) - f(0.25 - h)) / (2.0 * h);
        let analytic = -only_kappa.eta * (1.0 - only_kappa.eta) / 0.25;
        assert!((d - analytic).abs() < 1e-6 * analytic.abs());
    }
}
