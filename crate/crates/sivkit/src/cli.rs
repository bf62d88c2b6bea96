//! Command-line front end. Every subcommand reads its inputs, runs one
//! analysis, and writes a TOML report (or a data file) to `--out` or stdout.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sivkit_core::correlator::{
    self, background_correct_with, fit_antibunching, normalize_g2_with, predict_measured_dip, AntibunchingOptions,
    InstrumentResponse,
};
use sivkit_core::fiber::{self, efficiency_from_measured, invert_channeling, solve_he11, v_number, MeasuredRate};
use sivkit_core::fit::saturation::SaturationOptions;
use sivkit_core::fit::spectrum::{debye_waller_with, fit_lorentzian_with, DwBackground, LorentzianOptions};
use sivkit_core::fit::{correct_instrument_width, fit_polarization, fit_saturation};
use sivkit_core::photostream::{self, EmitterScene, HbtSource};

use crate::config::{CorrectionName, OrientationName, RunConfig};
use crate::error::{AppError, AppResult};
use crate::formats::{self, TimestampFormat};
use crate::{parallel, report};

#[derive(Debug, Parser)]
#[command(name = "sivkit", version, about = "Photon statistics, spectra and nanofiber coupling of single emitters")]
pub struct Cli {
    /// TOML configuration; sections are named after the library modules.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for stochastic subcommands.
    #[arg(long, global = true, env = "SIVKIT_SEED")]
    pub seed: Option<u64>,

    /// Repair ordering problems in input files instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate both detector channels of a correlation measurement.
    SimulateHbt(SimulateHbt),
    /// Simulate a confocal raster-scan image.
    SimulateScan(SimulateScan),
    /// Histogram coincidences between two timestamp files.
    Correlate(Correlate),
    /// Fit the antibunching dip of a correlation histogram.
    FitG2(FitG2),
    /// Fit the zero-phonon line of a spectrum.
    FitSpectrum(FitSpectrum),
    /// Fit count rate versus excitation intensity.
    FitSaturation(FitSaturation),
    /// Fit count rate versus polarizer angle.
    FitPolarization(FitPolarization),
    /// Solve the nanofiber HE11 mode and tabulate channeling efficiency.
    FiberMode(FiberMode),
    /// Estimate the coupling efficiency from guided and radiated count rates.
    Coupling(Coupling),
    /// Regenerate every reference number into a single report.
    ReproducePaper(Output),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

#[derive(Debug, Args)]
pub struct SimulateHbt {
    /// Directory for the two channel files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "hbt")]
    pub prefix: String,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Detected signal rate (kcps) instead of the saturation law.
    #[arg(long)]
    pub signal_kcps: Option<f64>,
    #[arg(long)]
    pub sb_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateScan {
    #[command(flatten)]
    pub output: Output,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct Correlate {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub bin_width_ps: Option<u64>,
    #[arg(long)]
    pub max_lag_ps: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorrectionArg {
    TwoSource,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    RateProduct,
    Plateau,
}

#[derive(Debug, Args)]
pub struct FitG2 {
    pub histogram: PathBuf,
    /// Correlation IRF FWHM in ps (default √2 × detector jitter).
    #[arg(long)]
    pub irf_fwhm_ps: Option<f64>,
    /// Fit the bare model without IRF convolution.
    #[arg(long)]
    pub no_irf: bool,
    #[arg(long)]
    pub sb_ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub correction: Option<CorrectionArg>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormalizationArg>,
    #[arg(long)]
    pub poisson_weights: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FitSpectrum {
    pub spectrum: PathBuf,
    #[arg(long)]
    pub pedestal_order: Option<usize>,
    /// Instrument resolution when the file does not declare one.
    #[arg(long)]
    pub resolution_nm: Option<f64>,
    /// Constant background subtracted before the Debye-Waller integration.
    #[arg(long)]
    pub background: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FitSaturation {
    /// Columns: intensity (MW/cm²), rate (kcps).
    pub table: PathBuf,
    /// Background table with the same columns, subtracted as a linear fit.
    #[arg(long)]
    pub background: Option<PathBuf>,
    #[arg(long)]
    pub spot_diameter_um: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct FitPolarization {
    /// Columns: angle (degrees), rate (kcps).
    pub table: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OrientationArg {
    Radial,
    Azimuthal,
    Axial,
    Random,
}

#[derive(Debug, Args)]
pub struct FiberMode {
    #[arg(long)]
    pub diameter_nm: Option<f64>,
    #[arg(long)]
    pub wavelength_nm: Option<f64>,
    #[arg(long, value_enum)]
    pub orientation: Option<OrientationArg>,
    /// CSV table of efficiency versus distance from the surface.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct Coupling {
    #[arg(long, default_value_t = 1.176)]
    pub guided_kcps: f64,
    /// Rate uncertainties; zero propagates only the collection-budget terms.
    #[arg(long, default_value_t = 0.120)]
    pub guided_sigma_kcps: f64,
    #[arg(long, default_value_t = 1.5)]
    pub radiated_kcps: f64,
    #[arg(long, default_value_t = 0.150)]
    pub radiated_sigma_kcps: f64,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `argv`, runs the subcommand, prints any diagnostic to stderr, and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sivkit: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> AppResult<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.lenient {
        config.cli.lenient = true;
    }
    let seed = cli.seed.or(config.cli.seed);
    let need_seed = || seed.ok_or_else(|| AppError::usage("seed: required (--seed, SIVKIT_SEED or [cli] seed)"));
    match &cli.command {
        Command::SimulateHbt(args) => simulate_hbt(&config, args, need_seed()?),
        Command::SimulateScan(args) => simulate_scan(&config, args, need_seed()?),
        Command::Correlate(args) => correlate(&config, args),
        Command::FitG2(args) => fit_g2(&config, args),
        Command::FitSpectrum(args) => fit_spectrum(&config, args),
        Command::FitSaturation(args) => fit_saturation_cmd(&config, args),
        Command::FitPolarization(args) => fit_polarization_cmd(args),
        Command::FiberMode(args) => fiber_mode(&config, args),
        Command::Coupling(args) => coupling(&config, args),
        Command::ReproducePaper(out) => emit(&out.out, &report::reproduce(need_seed()?)?),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> AppResult<()> {
    match out {
        Some(p) => formats::write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| AppError::data(format!("stdout: {e}")))
        }
    }
}

pub(crate) fn to_toml<T: Serialize>(value: &T) -> AppResult<String> {
    toml::to_string(value).map_err(|e| AppError::numerical(format!("report: {e}")))
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("sivkit: warning: {w}");
    }
}

fn simulate_hbt(config: &RunConfig, args: &SimulateHbt, seed: u64) -> AppResult<()> {
    let em = &config.emitter_model;
    let mut background = em.background.context()?;
    if let Some(sb) = args.sb_ratio {
        background.sb_ratio = Some(sb);
    }
    let detection = em.detection.chain()?;
    let model = em.model()?;
    let mut source = HbtSource::from_model(&model, em.excitation.intensity()?, &background)?;
    if let Some(rate) = args.signal_kcps.or(config.photostream_sim.signal_kcps) {
        source.signal_kcps = rate;
        source.background_kcps = background.rate_for_signal(rate);
    }
    let duration = args.duration_s.unwrap_or(config.photostream_sim.duration_s);
    let (a, b) = photostream::simulate_hbt_source(&source, &detection, duration, seed)?;
    let format = match args.format {
        Some(FormatArg::Text) => TimestampFormat::Text,
        Some(FormatArg::Binary) => TimestampFormat::Binary,
        None => config.photostream_sim.format.into(),
    };
    let ext = match format {
        TimestampFormat::Text => "txt",
        TimestampFormat::Binary => "bin",
    };
    for s in [&a, &b] {
        let path = args.out_dir.join(format!("{}_ch{}.{ext}", args.prefix, s.channel()));
        formats::write_timestamps(&path, s, format)?;
    }
    #[derive(Serialize)]
    struct Summary {
        seed: u64,
        duration_s: f64,
        signal_kcps: f64,
        background_kcps: f64,
        events_ch0: usize,
        events_ch1: usize,
        rate_ch0_kcps: f64,
        rate_ch1_kcps: f64,
    }
    emit(
        &None,
        &to_toml(&Summary {
            seed,
            duration_s: duration,
            signal_kcps: source.signal_kcps,
            background_kcps: source.background_kcps,
            events_ch0: a.len(),
            events_ch1: b.len(),
            rate_ch0_kcps: a.rate_kcps(),
            rate_ch1_kcps: b.rate_kcps(),
        })?,
    )
}

fn simulate_scan(config: &RunConfig, args: &SimulateScan, seed: u64) -> AppResult<()> {
    let scan = &config.photostream_sim.scan;
    let cfg = scan.config()?;
    let model = config.emitter_model.model()?;
    let mut scene = EmitterScene::new(cfg.extent_um, scan.background_rate_kcps)?;
    for &p in &scan.emitters {
        scene.add(p, model.clone()).map_err(|e| AppError::from(e).context("photostream_sim.scan.emitters"))?;
    }
    let img = parallel::simulate_scan(&scene, &cfg, &config.emitter_model.excitation.field()?, seed, args.threads)?;
    emit(&args.output.out, &formats::encode_image(&img))
}

fn correlate(config: &RunConfig, args: &Correlate) -> AppResult<()> {
    let mode = config.cli.ingest_mode();
    let a = formats::read_timestamps(&args.a, mode)?;
    let b = formats::read_timestamps(&args.b, mode)?;
    warn_all(&a.warnings);
    warn_all(&b.warnings);
    let c = &config.correlator;
    let w = args.bin_width_ps.unwrap_or(c.bin_width_ps);
    let lag = args.max_lag_ps.unwrap_or(c.max_lag_ps);
    let h = parallel::coincidence_histogram(&a.value, &b.value, w, lag, args.threads.unwrap_or(c.threads))?;
    let g2 = normalize_g2_with(&h, c.normalization()).ok();
    emit(&args.output.out, &formats::encode_histogram(&h, g2.as_ref().map(|g| g.g2.as_slice())))
}

#[derive(Serialize)]
struct G2Report {
    dip_g2_0: f64,
    apparent_dip_g2_0: f64,
    decay_time_ns: f64,
    amplitude: f64,
    plateau: f64,
    sigma_dip: f64,
    sigma_decay_time_ns: f64,
    sigma_plateau: f64,
    chi2: f64,
    dof: usize,
    reduced_chi2: f64,
    decay_identifiable: bool,
    short_span: bool,
    irf_fwhm_ps: Option<f64>,
    background: Option<G2Background>,
}

#[derive(Serialize)]
struct G2Background {
    sb_ratio: f64,
    correction: &'static str,
    floor_for_ideal_emitter: f64,
    corrected_dip_g2_0: f64,
    clamped: bool,
}

fn fit_g2(config: &RunConfig, args: &FitG2) -> AppResult<()> {
    let h = formats::read_histogram(&args.histogram)?;
    let c = &config.correlator;
    let mut norm = c.normalization();
    if let Some(n) = args.normalization {
        norm = match n {
            NormalizationArg::RateProduct => correlator::Normalization::RateProduct,
            NormalizationArg::Plateau => correlator::Normalization::Plateau { min_lag_ns: c.plateau_min_lag_ns },
        };
    }
    let curve = normalize_g2_with(&h, norm)?;
    let use_irf = c.use_irf && !args.no_irf;
    let irf = if use_irf {
        let fwhm = match args.irf_fwhm_ps.or(c.irf_fwhm_ps) {
            Some(f) => f,
            None => config.emitter_model.detection.chain()?.pair_jitter_fwhm_ps(),
        };
        Some(InstrumentResponse::gaussian(fwhm)?)
    } else {
        None
    };
    let opts = AntibunchingOptions { irf, poisson_weights: args.poisson_weights || c.poisson_weights, ..Default::default() };
    let f = fit_antibunching(&curve, &opts)?;
    let background = match args.sb_ratio.or(c.sb_ratio) {
        Some(sb) => {
            let mode = match args.correction {
                Some(CorrectionArg::TwoSource) => CorrectionName::TwoSource,
                Some(CorrectionArg::Linear) => CorrectionName::Linear,
                None => c.correction,
            };
            let corrected = background_correct_with(f.dip_g2_0, sb, mode.into())?;
            Some(G2Background {
                sb_ratio: sb,
                correction: match mode {
                    CorrectionName::TwoSource => "two-source",
                    CorrectionName::Linear => "linear",
                },
                floor_for_ideal_emitter: predict_measured_dip(0.0, sb)?,
                corrected_dip_g2_0: corrected.g2_0,
                clamped: corrected.clamped,
            })
        }
        None => None,
    };
    let report = G2Report {
        dip_g2_0: f.dip_g2_0,
        apparent_dip_g2_0: f.apparent_dip_g2_0,
        decay_time_ns: f.decay_time_ns,
        amplitude: f.amplitude,
        plateau: f.plateau,
        sigma_dip: f.sigma_dip,
        sigma_decay_time_ns: f.sigma_decay_time_ns,
        sigma_plateau: f.sigma_plateau,
        chi2: f.chi2,
        dof: f.dof,
        reduced_chi2: f.reduced_chi2,
        decay_identifiable: f.decay_identifiable,
        short_span: f.short_span,
        irf_fwhm_ps: f.irf_fwhm_ps,
        background,
    };
    emit(&args.output.out, &to_toml(&report)?)
}

fn fit_spectrum(config: &RunConfig, args: &FitSpectrum) -> AppResult<()> {
    let fits = &config.analysis_fits;
    let resolution = args.resolution_nm.unwrap_or(fits.resolution_nm);
    let s = formats::read_spectrum(&args.spectrum, resolution, config.cli.ingest_mode())?;
    warn_all(&s.warnings);
    let opts = LorentzianOptions { pedestal_order: args.pedestal_order.unwrap_or(fits.pedestal_order) };
    let fit = fit_lorentzian_with(&s.value, &opts)?;
    let bg = args.background.map_or(DwBackground::Included, DwBackground::Subtract);
    let dw = debye_waller_with(&s.value, &fit, fits.dw_window_nm, bg)?;
    let true_fwhm = correct_instrument_width(fit.fwhm_nm, s.value.resolution_nm()).ok();
    #[derive(Serialize)]
    struct Report {
        center_nm: f64,
        sigma_center_nm: f64,
        fwhm_nm: f64,
        sigma_fwhm_nm: f64,
        resolution_nm: f64,
        fwhm_corrected_nm: Option<f64>,
        peak_amplitude: f64,
        pedestal_coefficients: Vec<f64>,
        pedestal_reference_nm: f64,
        debye_waller: f64,
        dw_window_nm: (f64, f64),
        dw_clamped: bool,
        chi2: f64,
        dof: usize,
        edge_warning: bool,
    }
    let report = Report {
        center_nm: fit.center_nm,
        sigma_center_nm: fit.sigma_center_nm,
        fwhm_nm: fit.fwhm_nm,
        sigma_fwhm_nm: fit.sigma_fwhm_nm,
        resolution_nm: s.value.resolution_nm(),
        fwhm_corrected_nm: true_fwhm,
        peak_amplitude: fit.peak_amplitude,
        pedestal_coefficients: fit.pedestal.coefficients.clone(),
        pedestal_reference_nm: fit.pedestal_reference_nm,
        debye_waller: dw.fraction,
        dw_window_nm: dw.window_nm,
        dw_clamped: dw.clamped,
        chi2: fit.chi2,
        dof: fit.dof,
        edge_warning: fit.edge_warning,
    };
    emit(&args.output.out, &to_toml(&report)?)
}

fn pairs(path: &Path) -> AppResult<Vec<(f64, f64)>> {
    Ok(formats::read_table(path, 2)?.into_iter().map(|r| (r[0], r[1])).collect())
}

fn fit_saturation_cmd(config: &RunConfig, args: &FitSaturation) -> AppResult<()> {
    let points = pairs(&args.table)?;
    let background = args.background.as_deref().map(pairs).transpose()?;
    let opts = SaturationOptions {
        background: background.as_deref(),
        spot_diameter_um: Some(args.spot_diameter_um.unwrap_or(config.analysis_fits.spot_diameter_um)),
    };
    let f = fit_saturation(&points, &opts)?;
    #[derive(Serialize)]
    struct Report {
        n_inf_kcps: f64,
        sigma_n_inf_kcps: f64,
        i_sat: f64,
        sigma_i_sat: f64,
        saturation_power_mw: Option<f64>,
        chi2: f64,
        points: usize,
        poorly_constrained: bool,
        narrow_span: bool,
    }
    let report = Report {
        n_inf_kcps: f.n_inf_kcps,
        sigma_n_inf_kcps: f.sigma_n_inf,
        i_sat: f.i_sat,
        sigma_i_sat: f.sigma_i_sat,
        saturation_power_mw: f.saturation_power_mw,
        chi2: f.chi2,
        points: points.len(),
        poorly_constrained: f.poorly_constrained,
        narrow_span: f.narrow_span,
    };
    emit(&args.output.out, &to_toml(&report)?)
}

fn fit_polarization_cmd(args: &FitPolarization) -> AppResult<()> {
    let rows = pairs(&args.table)?;
    let (angles, rates): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let f = fit_polarization(&angles, &rates)?;
    #[derive(Serialize)]
    struct Report {
        offset_kcps: f64,
        amplitude_kcps: f64,
        phase_deg: f64,
        visibility: f64,
        sigma_offset_kcps: f64,
        sigma_amplitude_kcps: f64,
        sigma_phase_deg: f64,
        sigma_visibility: f64,
        chi2: f64,
        ambiguity_warning: bool,
    }
    let report = Report {
        offset_kcps: f.offset,
        amplitude_kcps: f.amplitude,
        phase_deg: f.phase_deg,
        visibility: f.visibility,
        sigma_offset_kcps: f.sigma_offset,
        sigma_amplitude_kcps: f.sigma_amplitude,
        sigma_phase_deg: f.sigma_phase_deg,
        sigma_visibility: f.sigma_visibility,
        chi2: f.chi2,
        ambiguity_warning: f.ambiguity_warning,
    };
    emit(&args.output.out, &to_toml(&report)?)
}

fn orientation(arg: Option<OrientationArg>, config: OrientationName) -> fiber::Orientation {
    match arg {
        Some(OrientationArg::Radial) => fiber::Orientation::Radial,
        Some(OrientationArg::Azimuthal) => fiber::Orientation::Azimuthal,
        Some(OrientationArg::Axial) => fiber::Orientation::Axial,
        Some(OrientationArg::Random) => fiber::Orientation::Random,
        None => config.into(),
    }
}

fn fiber_mode(config: &RunConfig, args: &FiberMode) -> AppResult<()> {
    let fc = &config.fibermode;
    let mut spec = fc.spec()?;
    if let Some(d) = args.diameter_nm {
        spec.diameter_nm = d;
    }
    let wavelength = args.wavelength_nm.unwrap_or(fc.wavelength_nm);
    let v = v_number(&spec, wavelength)?;
    let mode = solve_he11(&spec, wavelength)?;
    let o = orientation(args.orientation, fc.orientation);
    if let Some(path) = &args.table {
        ensure_positive(fc.sweep_step_nm, "fibermode.sweep_step_nm")?;
        let n = (fc.sweep_max_nm / fc.sweep_step_nm).floor() as usize;
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|i| {
                let r = i as f64 * fc.sweep_step_nm;
                vec![
                    r,
                    mode.channeling_efficiency(r, fiber::Orientation::Radial),
                    mode.channeling_efficiency(r, fiber::Orientation::Azimuthal),
                    mode.channeling_efficiency(r, fiber::Orientation::Axial),
                    mode.channeling_efficiency(r, fiber::Orientation::Random),
                ]
            })
            .collect();
        formats::write_file(path, formats::encode_table(&["r_nm", "eta_radial", "eta_azimuthal", "eta_axial", "eta_random"], &rows))?;
    }
    #[derive(Serialize)]
    struct Report {
        diameter_nm: f64,
        wavelength_nm: f64,
        core_index: f64,
        v_number: f64,
        single_mode: bool,
        effective_index: f64,
        beta_per_um: f64,
        q_per_um: f64,
        group_index: f64,
        residual: f64,
        eta_at_surface: f64,
    }
    let report = Report {
        diameter_nm: spec.diameter_nm,
        wavelength_nm: wavelength,
        core_index: mode.core_index,
        v_number: v,
        single_mode: fiber::is_single_mode(v),
        effective_index: mode.effective_index,
        beta_per_um: mode.beta,
        q_per_um: mode.q,
        group_index: mode.group_index,
        residual: mode.residual,
        eta_at_surface: mode.channeling_efficiency(0.0, o),
    };
    emit(&args.output.out, &to_toml(&report)?)
}

fn ensure_positive(v: f64, name: &str) -> AppResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AppError::data(format!("{name}: must be positive")))
    }
}

fn coupling(config: &RunConfig, args: &Coupling) -> AppResult<()> {
    let fc = &config.fibermode;
    let budget = fc.budget()?;
    let spec = fc.spec()?;
    let guided = MeasuredRate { kcps: args.guided_kcps, sigma_kcps: args.guided_sigma_kcps };
    let radiated = MeasuredRate { kcps: args.radiated_kcps, sigma_kcps: args.radiated_sigma_kcps };
    let est = efficiency_from_measured(guided, radiated, &budget)?;
    let budget_only = fiber::efficiency_from_counts(args.guided_kcps, args.radiated_kcps, &budget)?;
    let mode = solve_he11(&spec, fc.wavelength_nm)?;
    let o: fiber::Orientation = fc.orientation.into();
    let r_nm = invert_channeling(&mode, &spec, est.eta, o).ok();
    let r_ref = invert_channeling(&mode, &spec, fc.reference_eta, o).ok();
    let d = est.compare(fc.reference_eta, fc.reference_sigma);
    #[derive(Serialize)]
    struct Report {
        eta: f64,
        sigma_eta: f64,
        sigma_eta_budget_only: f64,
        guided_kcps_absolute: f64,
        radiated_kcps_absolute: f64,
        collection_fraction: f64,
        guided_ends_counted: u8,
        r_nm: Option<f64>,
        discrepancy: Discrepancy,
    }
    #[derive(Serialize)]
    struct Discrepancy {
        reference_eta: f64,
        reference_sigma: f64,
        reference_over_computed: f64,
        intervals_overlap: bool,
        r_nm_at_reference_eta: Option<f64>,
        note: &'static str,
    }
    let report = Report {
        eta: est.eta,
        sigma_eta: est.sigma_eta,
        sigma_eta_budget_only: budget_only.sigma_eta,
        guided_kcps_absolute: est.guided_kcps,
        radiated_kcps_absolute: est.radiated_kcps,
        collection_fraction: budget.collection_fraction(),
        guided_ends_counted: budget.guided_ends_counted,
        r_nm,
        discrepancy: Discrepancy {
            reference_eta: d.reference,
            reference_sigma: d.reference_sigma,
            reference_over_computed: d.ratio,
            intervals_overlap: d.overlaps,
            r_nm_at_reference_eta: r_ref,
            note: "eta = G/(G+R), G = ends*n_guided/kappa_onf, R = n_radiated/(kappa_ol*f_ol); \
                   the reference value is not reproduced by these inputs",
        },
    };
    emit(&args.output.out, &to_toml(&report)?)
}
