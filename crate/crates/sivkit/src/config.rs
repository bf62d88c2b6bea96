//! TOML run configuration. Sections are named after the library modules;
//! every key is optional and defaults to the reference operating point.
//!
//! ```toml
//! [emitter_model]
//! lifetime_ns = 1.0
//!
//! [emitter_model.excitation]
//! power_mw = 135.0
//!
//! [correlator]
//! bin_width_ps = 64
//! ```

use std::path::Path;

use serde::Deserialize;
use sivkit_core::correlator::{BackgroundCorrection, Normalization};
use sivkit_core::emitter::{BackgroundContext, DetectionChain, EmitterModel, ExcitationField};
use sivkit_core::fiber::{CollectionBudget, FiberSpec, Orientation};
use sivkit_core::photostream::ScanConfig;

use crate::error::{AppError, AppResult};
use crate::formats::{IngestMode, TimestampFormat};

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cli: CliSection,
    pub emitter_model: EmitterSection,
    pub photostream_sim: PhotostreamSection,
    pub correlator: CorrelatorSection,
    pub analysis_fits: FitSection,
    pub fibermode: FiberSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::data(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.context(path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliSection {
    pub seed: Option<u64>,
    /// Lenient ingestion repairs ordering problems instead of failing.
    pub lenient: bool,
}

impl CliSection {
    pub fn ingest_mode(&self) -> IngestMode {
        if self.lenient {
            IngestMode::Lenient
        } else {
            IngestMode::Strict
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitterSection {
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
    pub excitation: ExcitationSection,
    pub background: BackgroundSection,
    pub detection: DetectionSection,
}

impl Default for EmitterSection {
    fn default() -> Self {
        let m = EmitterModel::default();
        EmitterSection {
            lifetime_ns: m.lifetime_ns,
            n_inf_kcps: m.n_inf_kcps,
            i_sat: m.i_sat,
            zpl_center_nm: m.zpl_center_nm,
            zpl_fwhm_nm: m.zpl_fwhm_nm,
            dw_factor: m.dw_factor,
            emission_dipole_angle_deg: m.emission_dipole_angle_deg,
            excitation_dipole_angle_deg: m.excitation_dipole_angle_deg,
            emission_visibility: m.emission_visibility,
            excitation_visibility: m.excitation_visibility,
            excitation: ExcitationSection::default(),
            background: BackgroundSection::default(),
            detection: DetectionSection::default(),
        }
    }
}

impl EmitterSection {
    pub fn model(&self) -> AppResult<EmitterModel> {
        let m = EmitterModel {
            lifetime_ns: self.lifetime_ns,
            n_inf_kcps: self.n_inf_kcps,
            i_sat: self.i_sat,
            zpl_center_nm: self.zpl_center_nm,
            zpl_fwhm_nm: self.zpl_fwhm_nm,
            dw_factor: self.dw_factor,
            emission_dipole_angle_deg: self.emission_dipole_angle_deg,
            excitation_dipole_angle_deg: self.excitation_dipole_angle_deg,
            emission_visibility: self.emission_visibility,
            excitation_visibility: self.excitation_visibility,
        };
        m.validate().map_err(|e| AppError::from(e).context("emitter_model"))?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationSection {
    pub power_mw: f64,
    /// Overrides `power_mw` when present (MW/cm²).
    pub intensity: Option<f64>,
    pub spot_diameter_um: f64,
    pub polarization_angle_deg: f64,
    pub wavelength_nm: f64,
}

impl Default for ExcitationSection {
    fn default() -> Self {
        let e = ExcitationField::default();
        ExcitationSection {
            power_mw: e.power_mw,
            intensity: None,
            spot_diameter_um: e.spot_diameter_um,
            polarization_angle_deg: e.polarization_angle_deg,
            wavelength_nm: e.wavelength_nm,
        }
    }
}

impl ExcitationSection {
    pub fn field(&self) -> AppResult<ExcitationField> {
        let mut f = ExcitationField {
            power_mw: self.power_mw,
            spot_diameter_um: self.spot_diameter_um,
            polarization_angle_deg: self.polarization_angle_deg,
            wavelength_nm: self.wavelength_nm,
        };
        if let Some(i) = self.intensity {
            f.power_mw = sivkit_core::units::intensity_to_power(i, f.spot_diameter_um)
                .map_err(|e| AppError::from(e).context("emitter_model.excitation.intensity"))?;
        }
        f.validate().map_err(|e| AppError::from(e).context("emitter_model.excitation"))?;
        Ok(f)
    }

    pub fn intensity(&self) -> AppResult<f64> {
        Ok(self.field()?.intensity()?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundSection {
    pub background_rate_kcps: f64,
    pub sb_ratio: Option<f64>,
}

impl Default for BackgroundSection {
    fn default() -> Self {
        let b = BackgroundContext::default();
        BackgroundSection { background_rate_kcps: b.background_rate_kcps, sb_ratio: b.sb_ratio }
    }
}

impl BackgroundSection {
    pub fn context(&self) -> AppResult<BackgroundContext> {
        let b = BackgroundContext { background_rate_kcps: self.background_rate_kcps, sb_ratio: self.sb_ratio };
        b.validate().map_err(|e| AppError::from(e).context("emitter_model.background"))?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub quantum_efficiency: f64,
    pub jitter_fwhm_ps: f64,
    pub dead_time_ns: f64,
    pub filter_pass_nm: (f64, f64),
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionChain::default();
        DetectionSection {
            quantum_efficiency: d.quantum_efficiency,
            jitter_fwhm_ps: d.jitter_fwhm_ps,
            dead_time_ns: d.dead_time_ns,
            filter_pass_nm: d.filter_pass_nm,
        }
    }
}

impl DetectionSection {
    pub fn chain(&self) -> AppResult<DetectionChain> {
        let d = DetectionChain {
            quantum_efficiency: self.quantum_efficiency,
            jitter_fwhm_ps: self.jitter_fwhm_ps,
            dead_time_ns: self.dead_time_ns,
            filter_pass_nm: self.filter_pass_nm,
        };
        d.validate().map_err(|e| AppError::from(e).context("emitter_model.detection"))?;
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    #[default]
    Text,
    Binary,
}

impl From<FormatName> for TimestampFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Text => TimestampFormat::Text,
            FormatName::Binary => TimestampFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotostreamSection {
    pub duration_s: f64,
    pub format: FormatName,
    /// Rate-level source: detected signal rate (kcps) used instead of the
    /// saturation law when present.
    pub signal_kcps: Option<f64>,
    pub scan: ScanSection,
}

impl Default for PhotostreamSection {
    fn default() -> Self {
        PhotostreamSection { duration_s: 10.0, format: FormatName::Text, signal_kcps: None, scan: ScanSection::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub extent_um: (f64, f64),
    pub step_um: f64,
    pub dwell_s: f64,
    pub psf_fwhm_um: f64,
    pub background_rate_kcps: f64,
    /// Emitter positions (μm); each uses the `[emitter_model]` parameters.
    pub emitters: Vec<(f64, f64)>,
}

impl Default for ScanSection {
    fn default() -> Self {
        let c = ScanConfig::default();
        ScanSection {
            extent_um: c.extent_um,
            step_um: c.step_um,
            dwell_s: c.dwell_s,
            psf_fwhm_um: c.psf_fwhm_um,
            background_rate_kcps: 0.3,
            emitters: vec![(12.5, 12.5)],
        }
    }
}

impl ScanSection {
    pub fn config(&self) -> AppResult<ScanConfig> {
        let c = ScanConfig {
            extent_um: self.extent_um,
            step_um: self.step_um,
            dwell_s: self.dwell_s,
            psf_fwhm_um: self.psf_fwhm_um,
        };
        c.validate().map_err(|e| AppError::from(e).context("photostream_sim.scan"))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationName {
    #[default]
    RateProduct,
    Plateau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionName {
    #[default]
    TwoSource,
    Linear,
}

impl From<CorrectionName> for BackgroundCorrection {
    fn from(c: CorrectionName) -> Self {
        match c {
            CorrectionName::TwoSource => BackgroundCorrection::TwoSource,
            CorrectionName::Linear => BackgroundCorrection::LinearSubtraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelatorSection {
    pub bin_width_ps: u64,
    pub max_lag_ps: u64,
    /// Worker threads for histogramming; 0 picks the available parallelism.
    pub threads: usize,
    pub normalization: NormalizationName,
    pub plateau_min_lag_ns: f64,
    /// Correlation IRF FWHM; defaults to √2 × the detector jitter.
    pub irf_fwhm_ps: Option<f64>,
    pub use_irf: bool,
    pub poisson_weights: bool,
    pub sb_ratio: Option<f64>,
    pub correction: CorrectionName,
}

impl Default for CorrelatorSection {
    fn default() -> Self {
        CorrelatorSection {
            bin_width_ps: 128,
            max_lag_ps: 25_600,
            threads: 0,
            normalization: NormalizationName::RateProduct,
            plateau_min_lag_ns: 15.0,
            irf_fwhm_ps: None,
            use_irf: true,
            poisson_weights: false,
            sb_ratio: Some(3.5),
            correction: CorrectionName::TwoSource,
        }
    }
}

impl CorrelatorSection {
    pub fn normalization(&self) -> Normalization {
        match self.normalization {
            NormalizationName::RateProduct => Normalization::RateProduct,
            NormalizationName::Plateau => Normalization::Plateau { min_lag_ns: self.plateau_min_lag_ns },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub pedestal_order: usize,
    pub resolution_nm: f64,
    pub dw_window_nm: (f64, f64),
    pub spot_diameter_um: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection { pedestal_order: 1, resolution_nm: 1.5, dw_window_nm: (727.0, 752.0), spot_diameter_um: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrientationName {
    Radial,
    Azimuthal,
    Axial,
    #[default]
    Random,
}

impl From<OrientationName> for Orientation {
    fn from(o: OrientationName) -> Self {
        match o {
            OrientationName::Radial => Orientation::Radial,
            OrientationName::Azimuthal => Orientation::Azimuthal,
            OrientationName::Axial => Orientation::Axial,
            OrientationName::Random => Orientation::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSection {
    pub diameter_nm: f64,
    pub wavelength_nm: f64,
    pub orientation: OrientationName,
    pub sweep_max_nm: f64,
    pub sweep_step_nm: f64,
    pub kappa_onf: f64,
    pub sigma_kappa_onf: f64,
    pub kappa_ol: f64,
    pub sigma_kappa_ol: f64,
    pub na: f64,
    /// Taken from `na` when absent.
    pub f_ol: Option<f64>,
    pub guided_ends_counted: u8,
    pub reference_eta: f64,
    pub reference_sigma: f64,
}

impl Default for FiberSection {
    fn default() -> Self {
        let b = CollectionBudget::default();
        FiberSection {
            diameter_nm: FiberSpec::default().diameter_nm,
            wavelength_nm: 738.0,
            orientation: OrientationName::Random,
            sweep_max_nm: 500.0,
            sweep_step_nm: 5.0,
            kappa_onf: b.kappa_onf,
            sigma_kappa_onf: b.sigma_kappa_onf,
            kappa_ol: b.kappa_ol,
            sigma_kappa_ol: b.sigma_kappa_ol,
            na: b.na,
            f_ol: b.f_ol,
            guided_ends_counted: b.guided_ends_counted,
            reference_eta: 0.041,
            reference_sigma: 0.008,
        }
    }
}

impl FiberSection {
    pub fn spec(&self) -> AppResult<FiberSpec> {
        let s = FiberSpec::with_diameter(self.diameter_nm);
        s.validate().map_err(|e| AppError::from(e).context("fibermode"))?;
        Ok(s)
    }

    pub fn budget(&self) -> AppResult<CollectionBudget> {
        let b = CollectionBudget {
            kappa_onf: self.kappa_onf,
            sigma_kappa_onf: self.sigma_kappa_onf,
            kappa_ol: self.kappa_ol,
            sigma_kappa_ol: self.sigma_kappa_ol,
            na: self.na,
            f_ol: self.f_ol,
            guided_ends_counted: self.guided_ends_counted,
        };
        b.validate().map_err(|e| AppError::from(e).context("fibermode"))?;
        Ok(b)
    }
}
