//! Two-channel coincidence histogramming, g² normalization, antibunching
//! fits with optional instrument-response forward convolution, and
//! background correction of the zero-delay value.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;

use crate::error::{ensure, Error, Result};
use crate::fit::nlls::{fit_curve, Bounds, CurveModel, FitError, NllsOptions};
use crate::photostream::TimestampStream;
use crate::special::{exp_gauss_conv, exp_gauss_conv_dtau};
use crate::units;

/// Coincidence counts of `b - a` delays in bins centered on `k·bin_width`.
///
/// Bin `k > 0` covers `[k·w - w/2, k·w + w/2)`, bin `-k` is its mirror
/// image `(-k·w - w/2, -k·w + w/2]`, and the zero bin is the open interval
/// `(-w/2, w/2)`. Swapping the two streams therefore mirrors the histogram
/// exactly, even for delays that land on a bin edge.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_width_ps: u64,
    /// Largest bin center; a requested lag between centers rounds down.
    pub max_lag_ps: u64,
    /// `2·max_lag/bin_width + 1` bins, zero lag in the middle.
    pub counts: Vec<u64>,
    pub total: u64,
    pub events_a: u64,
    pub events_b: u64,
    pub duration_ps: u64,
}

impl CorrelationHistogram {
    pub fn num_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn half_bins(&self) -> i64 {
        (self.counts.len() as i64 - 1) / 2
    }

    pub fn lag_ps(&self, index: usize) -> i64 {
        (index as i64 - self.half_bins()) * self.bin_width_ps as i64
    }

    pub fn rate_a_kcps(&self) -> f64 {
        units::count_rate_kcps(self.events_a, self.duration_ps)
    }

    pub fn rate_b_kcps(&self) -> f64 {
        units::count_rate_kcps(self.events_b, self.duration_ps)
    }

    /// Expected counts per bin for uncorrelated streams with the recorded
    /// rates: `r_a · r_b · T · w`.
    pub fn accidental_level(&self) -> f64 {
        let t = self.duration_ps as f64;
        if t == 0.0 {
            return 0.0;
        }
        self.events_a as f64 * self.events_b as f64 * self.bin_width_ps as f64 / t
    }

    fn empty(bin_width_ps: u64, max_lag_ps: u64, events_a: u64, events_b: u64, duration_ps: u64) -> Self {
        let k = max_lag_ps / bin_width_ps;
        CorrelationHistogram {
            bin_width_ps,
            max_lag_ps: k * bin_width_ps,
            counts: vec![0; (2 * k + 1) as usize],
            total: 0,
            events_a,
            events_b,
            duration_ps,
        }
    }
}

/// Histogram of `b - a` delays between two recorded streams.
pub fn coincidence_histogram(
    a: &TimestampStream,
    b: &TimestampStream,
    bin_width_ps: u64,
    max_lag_ps: u64,
) -> Result<CorrelationHistogram> {
    let duration = a.duration_ps().max(b.duration_ps());
    coincidence_histogram_slices(a.times_ps(), b.times_ps(), bin_width_ps, max_lag_ps, duration)
}

/// Same as [`coincidence_histogram`] on raw timestamp slices, which are
/// checked for ordering.
pub fn coincidence_histogram_slices(
    a: &[u64],
    b: &[u64],
    bin_width_ps: u64,
    max_lag_ps: u64,
    duration_ps: u64,
) -> Result<CorrelationHistogram> {
    check_geometry(bin_width_ps, max_lag_ps)?;
    check_sorted(a)?;
    check_sorted(b)?;
    let mut h = CorrelationHistogram::empty(bin_width_ps, max_lag_ps, a.len() as u64, b.len() as u64, duration_ps);
    accumulate(a, b, bin_width_ps, max_lag_ps / bin_width_ps, &mut h.counts);
    h.total = h.counts.iter().sum();
    Ok(h)
}

/// Splits `a` into `parts` contiguous slices, histograms each against the
/// overlapping window of `b`, and sums. The result does not depend on
/// `parts`; the slices are independent units of work.
pub fn coincidence_histogram_partitioned(
    a: &TimestampStream,
    b: &TimestampStream,
    bin_width_ps: u64,
    max_lag_ps: u64,
    parts: usize,
) -> Result<CorrelationHistogram> {
    check_geometry(bin_width_ps, max_lag_ps)?;
    let duration = a.duration_ps().max(b.duration_ps());
    let mut h = CorrelationHistogram::empty(bin_width_ps, max_lag_ps, a.len() as u64, b.len() as u64, duration);
    for chunk in partition(a.times_ps(), parts) {
        accumulate_chunk(chunk, b.times_ps(), bin_width_ps, max_lag_ps, &mut h.counts);
    }
    h.total = h.counts.iter().sum();
    Ok(h)
}

/// Contiguous, near-equal slices of `times`.
pub fn partition(times: &[u64], parts: usize) -> impl Iterator<Item = &[u64]> {
    let parts = parts.max(1);
    let size = times.len().div_ceil(parts).max(1);
    times.chunks(size)
}

/// Adds the coincidences of one slice of stream A against all of stream B
/// into `counts` (length `2·max_lag/bin_width + 1`). Both inputs must be
/// sorted.
pub fn accumulate_chunk(a: &[u64], b: &[u64], bin_width_ps: u64, max_lag_ps: u64, counts: &mut [u64]) {
    let k = max_lag_ps / bin_width_ps;
    assert_eq!(counts.len() as u64, 2 * k + 1, "counts length");
    let Some(&first) = a.first() else { return };
    let reach = (2 * k + 1) * bin_width_ps; // exclusive bound on 2|Δ|
    let start = b.partition_point(|&t| 2 * (first.saturating_sub(t)) >= reach && t < first);
    accumulate(a, &b[start..], bin_width_ps, k, counts);
}

// Two-pointer sweep: `lo` is the first b still inside the window of the
// current a; it only moves forward.
fn accumulate(a: &[u64], b: &[u64], w: u64, k: u64, counts: &mut [u64]) {
    let reach = ((2 * k + 1) * w) as i64;
    let w2 = 2 * w as i64;
    let w = w as i64;
    let half = k as i64;
    let mut lo = 0usize;
    for &ta in a {
        let ta = ta as i64;
        while lo < b.len() && 2 * (ta - b[lo] as i64) >= reach {
            lo += 1;
        }
        for &tb in &b[lo..] {
            let d2 = 2 * (tb as i64 - ta);
            if d2 >= reach {
                break;
            }
            let idx = if d2 >= 0 { (d2 + w) / w2 } else { -((w - d2) / w2) };
            counts[(idx + half) as usize] += 1;
        }
    }
}

fn check_geometry(bin_width_ps: u64, max_lag_ps: u64) -> Result<()> {
    ensure(bin_width_ps > 0, "bin_width_ps", "must be positive")?;
    ensure(max_lag_ps < (1 << 40), "max_lag_ps", "too large")
}

fn check_sorted(t: &[u64]) -> Result<()> {
    match t.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

/// Normalized second-order correlation sampled at bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    pub lag_ns: Vec<f64>,
    pub g2: Vec<f64>,
    /// Poisson standard error of each point (at least one count).
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Normalization {
    /// Divide by the accidental level `r_a · r_b · T · w`.
    #[default]
    RateProduct,
    /// Divide by the mean count of bins with `|lag| >= min_lag_ns`.
    Plateau { min_lag_ns: f64 },
}

/// `g²[k] = counts[k] / (r_a · r_b · T · w)`.
pub fn normalize_g2(h: &CorrelationHistogram) -> Result<G2Curve> {
    normalize_g2_with(h, Normalization::RateProduct)
}

pub fn normalize_g2_with(h: &CorrelationHistogram, mode: Normalization) -> Result<G2Curve> {
    if h.duration_ps == 0 {
        return Err(Error::InvalidNormalization("zero acquisition duration"));
    }
    if h.events_a == 0 || h.events_b == 0 {
        return Err(Error::InvalidNormalization("a channel recorded no events"));
    }
    let lag_ns: Vec<f64> = (0..h.num_bins()).map(|i| units::ps_to_ns(h.lag_ps(i) as f64)).collect();
    let level = match mode {
        Normalization::RateProduct => h.accidental_level(),
        Normalization::Plateau { min_lag_ns } => {
            let (sum, n) = h
                .counts
                .iter()
                .zip(&lag_ns)
                .filter(|(_, l)| l.abs() >= min_lag_ns)
                .fold((0u64, 0u64), |(s, n), (c, _)| (s + c, n + 1));
            if n == 0 || sum == 0 {
                return Err(Error::InvalidNormalization("no counts in the plateau region"));
            }
            sum as f64 / n as f64
        }
    };
    let g2 = h.counts.iter().map(|&c| c as f64 / level).collect();
    let sigma = h.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / level).collect();
    Ok(G2Curve { lag_ns, g2, sigma })
}

/// Gaussian timing response of the correlation (start-stop difference).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstrumentResponse {
    pub fwhm_ps: f64,
}

impl InstrumentResponse {
    pub fn gaussian(fwhm_ps: f64) -> Result<Self> {
        ensure(fwhm_ps >= 0.0 && fwhm_ps.is_finite(), "fwhm_ps", "must be non-negative")?;
        Ok(InstrumentResponse { fwhm_ps })
    }

    pub fn sigma_ns(&self) -> f64 {
        units::ps_to_ns(units::fwhm_to_sigma(self.fwhm_ps))
    }
}

/// Single-exponential antibunching `g²(τ) = 1 - a·exp(-|τ|/τ_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntibunchingModel {
    pub amplitude: f64,
    pub decay_time_ns: f64,
}

impl AntibunchingModel {
    pub fn eval(&self, lag_ns: f64) -> f64 {
        1.0 - self.amplitude * (-lag_ns.abs() / self.decay_time_ns).exp()
    }
}

/// The model convolved with a Gaussian IRF, sampled at `lags_ns`.
pub fn convolve_irf(model: &AntibunchingModel, irf: &InstrumentResponse, lags_ns: &[f64]) -> Vec<f64> {
    let sigma = irf.sigma_ns();
    lags_ns
        .iter()
        .map(|&t| 1.0 - model.amplitude * exp_gauss_conv(t, model.decay_time_ns, sigma))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntibunchingFit {
    /// Zero-delay value of the underlying (unconvolved) model.
    pub dip_g2_0: f64,
    /// Zero-delay value of the model as compared to the data, i.e. after
    /// IRF convolution when an IRF was supplied.
    pub apparent_dip_g2_0: f64,
    pub decay_time_ns: f64,
    pub amplitude: f64,
    /// Long-lag level of the data in units of the input normalization.
    pub plateau: f64,
    pub sigma_dip: f64,
    pub sigma_decay_time_ns: f64,
    pub sigma_amplitude: f64,
    pub sigma_plateau: f64,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    /// False when the data show no antibunching and `decay_time_ns` is
    /// meaningless.
    pub decay_identifiable: bool,
    /// Lag range covers fewer than ten decay times.
    pub short_span: bool,
    pub irf_fwhm_ps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntibunchingOptions {
    pub irf: Option<InstrumentResponse>,
    /// Weight residuals by the Poisson error of each bin.
    pub poisson_weights: bool,
    pub initial_decay_ns: f64,
}

impl Default for AntibunchingOptions {
    fn default() -> Self {
        AntibunchingOptions { irf: None, poisson_weights: false, initial_decay_ns: 1.0 }
    }
}

struct DipModel {
    sigma_ns: f64,
}

// params: [plateau, amplitude, decay_ns]; f = c·(1 - a·E(τ))
impl CurveModel for DipModel {
    fn num_params(&self) -> usize {
        3
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] * (1.0 - p[1] * exp_gauss_conv(x, p[2], self.sigma_ns))
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) -> bool {
        let e = exp_gauss_conv(x, p[2], self.sigma_ns);
        grad[0] = 1.0 - p[1] * e;
        grad[1] = -p[0] * e;
        grad[2] = -p[0] * p[1] * exp_gauss_conv_dtau(x, p[2], self.sigma_ns);
        true
    }
}

/// Least-squares fit of the single-exponential dip (times a free plateau),
/// forward-convolved with the IRF when one is given.
pub fn fit_antibunching(curve: &G2Curve, options: &AntibunchingOptions) -> Result<AntibunchingFit> {
    let n = curve.lag_ns.len();
    ensure(curve.g2.len() == n && curve.sigma.len() == n, "g2", "curve arrays differ in length")?;
    ensure(options.initial_decay_ns > 0.0, "initial_decay_ns", "must be positive")?;
    if n < 4 {
        return Err(FitError::Underdetermined { points: n, params: 3 }.into());
    }
    let sigma_ns = options.irf.map_or(0.0, |r| r.sigma_ns());
    let model = DipModel { sigma_ns };
    let weights: Option<Vec<f64>> = options.poisson_weights.then(|| curve.sigma.iter().map(|s| 1.0 / s).collect());
    let span = curve.lag_ns.iter().map(|l| l.abs()).fold(0.0, f64::max);

    // plateau from the outer half of the lag range; dip depth from the center
    let outer: Vec<f64> =
        curve.lag_ns.iter().zip(&curve.g2).filter(|(l, _)| l.abs() >= 0.5 * span).map(|(_, g)| *g).collect();
    let plateau0 = if outer.is_empty() { 1.0 } else { outer.iter().sum::<f64>() / outer.len() as f64 };
    let center = curve
        .lag_ns
        .iter()
        .zip(&curve.g2)
        .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()))
        .map_or(plateau0, |(_, g)| *g);
    let plateau0 = if plateau0 > 0.0 { plateau0 } else { 1.0 };
    let amp0 = (1.0 - center / plateau0).clamp(0.05, 1.0);
    let tau_hi = 10.0 * span.max(options.initial_decay_ns);
    let tau0 = options.initial_decay_ns.min(0.5 * tau_hi);

    let bounds = Bounds::new(vec![1e-9 * plateau0, 0.0, 1e-6], vec![f64::INFINITY, 1.0, tau_hi]);
    let sol = fit_curve(&model, &curve.lag_ns, &curve.g2, weights.as_deref(), &[plateau0, amp0, tau0], Some(&bounds), &NllsOptions::default())?;
    let (c, a, tau) = (sol.params[0], sol.params[1], sol.params[2]);

    let sigma_a = sol.sigma(1);
    let decay_identifiable = a > 1e-6 && !sol.covariance_singular && a > 2.0 * sigma_a;
    let (amplitude, decay_time_ns, dip, apparent) = if decay_identifiable {
        (a, tau, 1.0 - a, 1.0 - a * exp_gauss_conv(0.0, tau, sigma_ns))
    } else {
        (0.0, tau, 1.0, 1.0)
    };
    Ok(AntibunchingFit {
        dip_g2_0: dip,
        apparent_dip_g2_0: apparent,
        decay_time_ns,
        amplitude,
        plateau: c,
        sigma_dip: sigma_a,
        sigma_decay_time_ns: if decay_identifiable { sol.sigma(2) } else { f64::INFINITY },
        sigma_amplitude: sigma_a,
        sigma_plateau: sol.sigma(0),
        chi2: sol.chi2,
        dof: sol.dof,
        reduced_chi2: sol.reduced_chi2(),
        decay_identifiable,
        short_span: span < 10.0 * tau,
        irf_fwhm_ps: options.irf.map(|r| r.fwhm_ps),
    })
}

/// How the uncorrelated-background correction is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundCorrection {
    /// `(g - (1 - ρ²)) / ρ²` with `ρ = S/(S+B)`.
    #[default]
    TwoSource,
    /// `g - (1 - ρ²)`: subtract the background floor without rescaling.
    LinearSubtraction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedDip {
    pub g2_0: f64,
    /// The raw correction was negative and has been clamped to zero.
    pub clamped: bool,
    pub rho: f64,
    pub mode: BackgroundCorrection,
}

/// Signal fraction `ρ = S/(S+B)` for a signal-to-background ratio.
pub fn signal_fraction(sb_ratio: f64) -> Result<f64> {
    ensure(sb_ratio > 0.0 && !sb_ratio.is_nan(), "sb_ratio", "must be positive")?;
    if sb_ratio.is_infinite() {
        return Ok(1.0);
    }
    Ok(sb_ratio / (sb_ratio + 1.0))
}

pub fn background_correct(g2_0_measured: f64, sb_ratio: f64) -> Result<CorrectedDip> {
    background_correct_with(g2_0_measured, sb_ratio, BackgroundCorrection::TwoSource)
}

pub fn background_correct_with(g2_0_measured: f64, sb_ratio: f64, mode: BackgroundCorrection) -> Result<CorrectedDip> {
    ensure(g2_0_measured >= 0.0 && g2_0_measured.is_finite(), "g2_0_measured", "must be non-negative")?;
    let rho = signal_fraction(sb_ratio)?;
    let floor = 1.0 - rho * rho;
    let raw = match mode {
        BackgroundCorrection::TwoSource => (g2_0_measured - floor) / (rho * rho),
        BackgroundCorrection::LinearSubtraction => g2_0_measured - floor,
    };
    Ok(CorrectedDip { g2_0: raw.max(0.0), clamped: raw < 0.0, rho, mode })
}

/// Measured zero-delay value expected for an emitter with true value
/// `g2_0_true` diluted by uncorrelated background: `1 - ρ² + ρ²·g_true`.
pub fn predict_measured_dip(g2_0_true: f64, sb_ratio: f64) -> Result<f64> {
    ensure(g2_0_true >= 0.0 && g2_0_true.is_finite(), "g2_0_true", "must be non-negative")?;
    let rho = signal_fraction(sb_ratio)?;
    Ok(1.0 - rho * rho + rho * rho * g2_0_true)
}
