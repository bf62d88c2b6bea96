//! Reference scenarios. Each one runs a synthetic measurement through the
//! analysis chain and returns the numbers worth checking; `reproduce` joins
//! them into one deterministic TOML report.

use serde::Serialize;
use sivkit_core::correlator::{
    background_correct, fit_antibunching, normalize_g2, predict_measured_dip, AntibunchingOptions, InstrumentResponse,
};
use sivkit_core::emitter::{DetectionChain, EmitterModel, ExcitationField, PolarizationCurve, ZplSpectrum};
use sivkit_core::fiber::{self, efficiency_from_counts, efficiency_from_measured, invert_channeling, solve_he11, FiberSpec, MeasuredRate, Orientation};
use sivkit_core::fit::polarization::angle_sweep;
use sivkit_core::fit::saturation::SaturationOptions;
use sivkit_core::fit::{correct_instrument_width, debye_waller, fit_lorentzian, fit_polarization, fit_saturation};
use sivkit_core::photostream::{self, EmitterScene, HbtSource, ScanConfig};
use sivkit_core::synth::{self, SATURATION_INTENSITIES};
use sivkit_core::units;

use crate::cli::to_toml;
use crate::error::AppResult;
use crate::parallel;

/// Seed for realization `i` of a Monte Carlo loop.
fn realization_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i)
}

#[derive(Debug, Serialize)]
pub struct ConversionPair {
    pub power_mw: f64,
    pub intensity: f64,
    pub reference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Serialize)]
pub struct Conversion {
    pub spot_diameter_um: f64,
    pub pairs: Vec<ConversionPair>,
    pub saturation_power_mw: f64,
    pub saturation_intensity: f64,
    pub saturation_relative_error: f64,
}

pub fn conversion() -> AppResult<Conversion> {
    let spot = ExcitationField::default().spot_diameter_um;
    let pairs = [(135.0, 47.7), (56.0, 19.8), (25.0, 8.8), (11.0, 3.9)]
        .iter()
        .map(|&(p, reference)| {
            let intensity = units::power_to_intensity(p, spot)?;
            Ok(ConversionPair { power_mw: p, intensity, reference, relative_error: (intensity / reference - 1.0).abs() })
        })
        .collect::<AppResult<Vec<_>>>()?;
    let i_sat = units::power_to_intensity(370.0, spot)?;
    Ok(Conversion {
        spot_diameter_um: spot,
        pairs,
        saturation_power_mw: 370.0,
        saturation_intensity: i_sat,
        saturation_relative_error: (i_sat / 130.0 - 1.0).abs(),
    })
}

#[derive(Debug, Serialize)]
pub struct Saturation {
    pub n_inf_kcps: f64,
    pub i_sat: f64,
    pub relative_noise: f64,
    pub example_n_inf_kcps: f64,
    pub example_i_sat: f64,
    pub realizations: usize,
    /// Fraction of realizations with n_inf within 10% and I_sat within 20%.
    pub fraction_within: f64,
}

pub fn saturation(seed: u64, realizations: usize) -> AppResult<Saturation> {
    let (n_inf, i_sat, rel) = (29.0, 130.0, 0.05);
    let mut good = 0;
    let mut example = (f64::NAN, f64::NAN);
    for i in 0..realizations {
        let data = synth::saturation_dataset(n_inf, i_sat, &SATURATION_INTENSITIES, rel, realization_seed(seed, i as u64))?;
        let f = fit_saturation(&data, &SaturationOptions::default())?;
        if i == 0 {
            example = (f.n_inf_kcps, f.i_sat);
        }
        if (f.n_inf_kcps / n_inf - 1.0).abs() <= 0.10 && (f.i_sat / i_sat - 1.0).abs() <= 0.20 {
            good += 1;
        }
    }
    Ok(Saturation {
        n_inf_kcps: n_inf,
        i_sat,
        relative_noise: rel,
        example_n_inf_kcps: example.0,
        example_i_sat: example.1,
        realizations,
        fraction_within: good as f64 / realizations.max(1) as f64,
    })
}

#[derive(Debug, Serialize)]
pub struct G2Chain {
    pub duration_s: f64,
    pub signal_kcps: f64,
    pub background_kcps: f64,
    pub sb_ratio: f64,
    pub lifetime_ns: f64,
    pub detector_jitter_fwhm_ps: f64,
    pub irf_fwhm_ps: f64,
    pub bin_width_ps: u64,
    pub max_lag_ps: u64,
    pub events_a: u64,
    pub events_b: u64,
    /// IRF-convolved model at zero delay: the dip as the histogram shows it.
    pub apparent_dip_g2_0: f64,
    /// Unconvolved model at zero delay, still including background.
    pub unconvolved_dip_g2_0: f64,
    pub sigma_dip: f64,
    pub decay_time_ns: f64,
    pub sigma_decay_time_ns: f64,
    pub decay_identifiable: bool,
    pub reduced_chi2: f64,
    /// Dip of the bare model fitted without any IRF.
    pub bare_fit_dip_g2_0: f64,
    /// Measured dip expected from a perfect emitter at this S/B.
    pub background_floor: f64,
    pub corrected_dip_g2_0: f64,
    pub corrected_clamped: bool,
}

/// Bright-source operating point of the correlation chain; see README for why
/// the rate is above what saturation predicts for the default emitter.
pub const G2_SIGNAL_KCPS: f64 = 200.0;
pub const G2_SB_RATIO: f64 = 3.5;
pub const G2_DURATION_S: f64 = 120.0;

pub fn g2_chain(seed: u64, threads: usize) -> AppResult<G2Chain> {
    let source = HbtSource { signal_kcps: G2_SIGNAL_KCPS, background_kcps: G2_SIGNAL_KCPS / G2_SB_RATIO, lifetime_ns: 1.0 };
    let detection = DetectionChain::default();
    let (a, b) = photostream::simulate_hbt_source(&source, &detection, G2_DURATION_S, seed)?;
    let (w, lag) = (128, 25_600);
    let h = parallel::coincidence_histogram(&a, &b, w, lag, threads)?;
    let curve = normalize_g2(&h)?;
    let irf_fwhm = detection.pair_jitter_fwhm_ps();
    let with_irf = AntibunchingOptions { irf: Some(InstrumentResponse::gaussian(irf_fwhm)?), ..Default::default() };
    let f = fit_antibunching(&curve, &with_irf)?;
    let bare = fit_antibunching(&curve, &AntibunchingOptions { irf: None, ..Default::default() })?;
    let corrected = background_correct(f.dip_g2_0, G2_SB_RATIO)?;
    Ok(G2Chain {
        duration_s: G2_DURATION_S,
        signal_kcps: source.signal_kcps,
        background_kcps: source.background_kcps,
        sb_ratio: G2_SB_RATIO,
        lifetime_ns: source.lifetime_ns,
        detector_jitter_fwhm_ps: detection.jitter_fwhm_ps,
        irf_fwhm_ps: irf_fwhm,
        bin_width_ps: w,
        max_lag_ps: lag,
        events_a: h.events_a,
        events_b: h.events_b,
        apparent_dip_g2_0: f.apparent_dip_g2_0,
        unconvolved_dip_g2_0: f.dip_g2_0,
        sigma_dip: f.sigma_dip,
        decay_time_ns: f.decay_time_ns,
        sigma_decay_time_ns: f.sigma_decay_time_ns,
        decay_identifiable: f.decay_identifiable,
        reduced_chi2: f.reduced_chi2,
        bare_fit_dip_g2_0: bare.dip_g2_0,
        background_floor: predict_measured_dip(0.0, G2_SB_RATIO)?,
        corrected_dip_g2_0: corrected.g2_0,
        corrected_clamped: corrected.clamped,
    })
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub constructed_dw: f64,
    pub constructed_center_nm: f64,
    pub constructed_fwhm_nm: f64,
    pub resolution_nm: f64,
    pub relative_noise: f64,
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub debye_waller: f64,
    pub fwhm_corrected_nm: f64,
}

pub fn spectrum(seed: u64) -> AppResult<SpectrumReport> {
    let model = EmitterModel::default();
    let window = (727.0, 752.0);
    let (res, rel) = (1.5, 0.01);
    let z = ZplSpectrum::with_debye_waller(&model, 100.0, window)?;
    let s = synth::spectrum_dataset(&z, (715.0, 765.0), 1001, res, rel, seed)?;
    let f = fit_lorentzian(&s)?;
    let dw = debye_waller(&s, &f, window)?;
    Ok(SpectrumReport {
        constructed_dw: z.debye_waller(window),
        constructed_center_nm: model.zpl_center_nm,
        constructed_fwhm_nm: model.zpl_fwhm_nm,
        resolution_nm: res,
        relative_noise: rel,
        center_nm: f.center_nm,
        fwhm_nm: f.fwhm_nm,
        debye_waller: dw.fraction,
        fwhm_corrected_nm: correct_instrument_width(f.fwhm_nm, res)?,
    })
}

#[derive(Debug, Serialize)]
pub struct VisibilityRecovery {
    pub visibility: f64,
    pub mean_recovered: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Serialize)]
pub struct Polarization {
    pub relative_noise: f64,
    pub angle_step_deg: f64,
    pub realizations: usize,
    pub curves: Vec<VisibilityRecovery>,
}

pub fn polarization(seed: u64, realizations: usize) -> AppResult<Polarization> {
    let (rel, step) = (0.03, 5.0);
    let angles = angle_sweep(step);
    let mut curves = Vec::new();
    for (k, &v) in [0.54, 0.25].iter().enumerate() {
        let curve = PolarizationCurve::from_mixture(10.0, v, 30.0);
        let (mut sum, mut worst) = (0.0, 0.0f64);
        for i in 0..realizations {
            let s = realization_seed(seed, (k * realizations + i) as u64);
            let rates = synth::polarization_dataset(&curve, &angles, rel, s)?;
            let f = fit_polarization(&angles, &rates)?;
            sum += f.visibility;
            worst = worst.max((f.visibility - v).abs());
        }
        curves.push(VisibilityRecovery { visibility: v, mean_recovered: sum / realizations.max(1) as f64, max_abs_error: worst });
    }
    Ok(Polarization { relative_noise: rel, angle_step_deg: step, realizations, curves })
}

#[derive(Debug, Serialize)]
pub struct Fiber {
    pub diameter_nm: f64,
    pub wavelength_nm: f64,
    pub v_number: f64,
    pub single_mode: bool,
    pub effective_index: f64,
    pub q_per_um: f64,
    pub group_index: f64,
    pub residual: f64,
    pub eta_110nm_random: f64,
    /// η(r) decreases at every step of a 1 nm grid out to 1 μm.
    pub monotone_decreasing: bool,
    /// Least-squares slope of ln η on [3/q, 5/q] divided by −2q.
    pub far_slope_ratio: f64,
    pub max_inversion_error: f64,
}

pub fn fiber_numbers() -> AppResult<Fiber> {
    let spec = FiberSpec::default();
    let wl = 738.0;
    let v = fiber::v_number(&spec, wl)?;
    let m = solve_he11(&spec, wl)?;
    let o = Orientation::Random;
    let eta = |r: f64| m.channeling_efficiency(r, o);
    let monotone = (0..1000).all(|i| eta(i as f64 + 1.0) < eta(i as f64));
    let far_slope_ratio = far_slope(&|r| eta(r), 3.0e3 / m.q, 5.0e3 / m.q) / (-2.0 * m.q);
    let mut worst = 0.0f64;
    for r in [0.0, 20.0, 50.0, 110.0, 200.0, 350.0] {
        let target = eta(r);
        let back = invert_channeling(&m, &spec, target, o)?;
        worst = worst.max((eta(back) - target).abs());
    }
    Ok(Fiber {
        diameter_nm: spec.diameter_nm,
        wavelength_nm: wl,
        v_number: v,
        single_mode: fiber::is_single_mode(v),
        effective_index: m.effective_index,
        q_per_um: m.q,
        group_index: m.group_index,
        residual: m.residual,
        eta_110nm_random: eta(110.0),
        monotone_decreasing: monotone,
        far_slope_ratio,
        max_inversion_error: worst,
    })
}

/// Least-squares slope of `ln f` against r (per μm) on `[lo, hi]` nm.
fn far_slope(f: &dyn Fn(f64) -> f64, lo_nm: f64, hi_nm: f64) -> f64 {
    let n = 201;
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let r = lo_nm + (hi_nm - lo_nm) * i as f64 / (n - 1) as f64;
            (r * 1e-3, f(r).ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Serialize)]
pub struct CouplingReport {
    pub guided_kcps: f64,
    pub radiated_kcps: f64,
    pub eta: f64,
    /// Propagated from the stated κ uncertainties only.
    pub sigma_eta: f64,
    /// Also including the measured-rate uncertainties.
    pub sigma_eta_with_rates: f64,
    pub reference_eta: f64,
    pub reference_sigma: f64,
    pub reference_over_computed: f64,
    pub intervals_overlap: bool,
    pub r_nm_at_reference_eta: f64,
    pub r_nm_at_computed_eta: f64,
}

pub fn coupling() -> AppResult<CouplingReport> {
    let budget = fiber::CollectionBudget::default();
    let (g, r) = (1.176, 1.5);
    let est = efficiency_from_counts(g, r, &budget)?;
    let with_rates = efficiency_from_measured(
        MeasuredRate { kcps: g, sigma_kcps: 0.120 },
        MeasuredRate { kcps: r, sigma_kcps: 0.150 },
        &budget,
    )?;
    let d = est.compare(0.041, 0.008);
    let spec = FiberSpec::default();
    let m = solve_he11(&spec, 738.0)?;
    Ok(CouplingReport {
        guided_kcps: g,
        radiated_kcps: r,
        eta: est.eta,
        sigma_eta: est.sigma_eta,
        sigma_eta_with_rates: with_rates.sigma_eta,
        reference_eta: d.reference,
        reference_sigma: d.reference_sigma,
        reference_over_computed: d.ratio,
        intervals_overlap: d.overlaps,
        r_nm_at_reference_eta: invert_channeling(&m, &spec, 0.041, Orientation::Random)?,
        r_nm_at_computed_eta: invert_channeling(&m, &spec, est.eta, Orientation::Random)?,
    })
}

#[derive(Debug, Serialize)]
pub struct Scan {
    pub pixels: usize,
    pub background_rate_kcps: f64,
    pub dwell_s: f64,
    pub background_mean_counts: f64,
    /// Pixels farther than 3·FWHM from the removed emitter that changed.
    pub changed_outside_exclusion: usize,
    /// Pixels within the exclusion zone, where changes are allowed.
    pub exclusion_pixels: usize,
    pub peak_change_counts: i64,
}

pub fn scan(seed: u64, threads: usize) -> AppResult<Scan> {
    let cfg = ScanConfig { extent_um: (50.0, 50.0), ..Default::default() };
    let field = ExcitationField::default();
    let bg = 0.3;
    let empty = EmitterScene::new(cfg.extent_um, bg)?;
    let img = parallel::simulate_scan(&empty, &cfg, &field, seed, threads)?;

    let model = EmitterModel::default();
    let full = empty.clone().with_emitter((12.5, 20.0), model.clone())?.with_emitter((30.0, 30.0), model.clone())?.with_emitter((31.0, 29.5), model)?;
    let removed = 1;
    let at = full.emitters()[removed].position_um;
    let before = parallel::simulate_scan(&full, &cfg, &field, seed, threads)?;
    let after = parallel::simulate_scan(&full.without(removed)?, &cfg, &field, seed, threads)?;
    let diff = before.difference(&after)?;
    let (nx, ny) = cfg.shape();
    let (mut outside, mut inside, mut peak) = (0, 0, 0i64);
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = cfg.pixel_position(ix, iy);
            let d = diff[iy * nx + ix];
            if ((x - at.0).powi(2) + (y - at.1).powi(2)).sqrt() > 3.0 * cfg.psf_fwhm_um {
                outside += (d != 0) as usize;
            } else {
                inside += 1;
                peak = peak.max(d.abs());
            }
        }
    }
    Ok(Scan {
        pixels: nx * ny,
        background_rate_kcps: bg,
        dwell_s: cfg.dwell_s,
        background_mean_counts: img.mean(),
        changed_outside_exclusion: outside,
        exclusion_pixels: inside,
        peak_change_counts: peak,
    })
}

#[derive(Debug, Serialize)]
struct Report {
    seed: u64,
    conversion: Conversion,
    saturation: Saturation,
    g2: G2Chain,
    spectrum: SpectrumReport,
    polarization: Polarization,
    fiber: Fiber,
    coupling: CouplingReport,
    scan: Scan,
}

/// Runs every scenario with `seed` and renders the TOML report. Contains no
/// timings or host details, so equal seeds give identical bytes.
pub fn reproduce(seed: u64) -> AppResult<String> {
    let report = Report {
        seed,
        conversion: conversion()?,
        saturation: saturation(seed, 200)?,
        g2: g2_chain(seed, 0)?,
        spectrum: spectrum(seed)?,
        polarization: polarization(seed, 100)?,
        fiber: fiber_numbers()?,
        coupling: coupling()?,
        scan: scan(seed, 0)?,
    };
    to_toml(&report)
}
