//! Seeded Monte Carlo photon streams for a two-detector correlation setup
//! and confocal raster-scan images.
//!
//! Every independent unit of work (emitter, each background channel, each
//! jitter channel, each scan pixel) draws from its own ChaCha stream keyed
//! by `(seed, unit)`, so results do not depend on evaluation order.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::emitter::{BackgroundContext, DetectionChain, EmitterModel, ExcitationField};
use crate::error::{ensure, Error, Result};
use crate::units;

const UNIT_EMITTER: u64 = 0;
const UNIT_BACKGROUND: [u64; 2] = [1, 2];
const UNIT_JITTER: [u64; 2] = [3, 4];
const UNIT_PIXEL_BASE: u64 = 1 << 32;

/// Substream `unit` of the generator seeded by `seed`.
pub fn substream(seed: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Arrival times (ps since acquisition start) recorded on one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampStream {
    channel: u8,
    times_ps: Vec<u64>,
    duration_ps: u64,
}

impl TimestampStream {
    /// Times must be strictly ascending and lie in `[0, duration_ps]`.
    pub fn new(channel: u8, times_ps: Vec<u64>, duration_ps: u64) -> Result<Self> {
        ensure(duration_ps > 0, "duration_ps", "must be positive")?;
        if let Some(i) = times_ps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Unsorted { index: i + 1 });
        }
        if let Some(&last) = times_ps.last() {
            ensure(last <= duration_ps, "times_ps", "event after the end of the acquisition")?;
        }
        Ok(TimestampStream { channel, times_ps, duration_ps })
    }

    pub fn channel(&self) -> u8 {
        self.channel
    }

    pub fn times_ps(&self) -> &[u64] {
        &self.times_ps
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn len(&self) -> usize {
        self.times_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ps.is_empty()
    }

    pub fn rate_kcps(&self) -> f64 {
        units::count_rate_kcps(self.times_ps.len() as u64, self.duration_ps)
    }

    pub fn into_times(self) -> Vec<u64> {
        self.times_ps
    }
}

/// Emission process: after each emission the emitter waits an exponential
/// re-excitation time, then an exponential emission time.
#[derive(Debug, Clone, Copy)]
pub struct RenewalProcess {
    excitation: Exp<f64>,
    emission: Exp<f64>,
}

impl RenewalProcess {
    /// Mean re-excitation wait and emission lifetime, both in ps.
    pub fn new(mean_wait_ps: f64, lifetime_ps: f64) -> Result<Self> {
        ensure(mean_wait_ps > 0.0 && mean_wait_ps.is_finite(), "mean_wait_ps", "must be positive")?;
        ensure(lifetime_ps > 0.0 && lifetime_ps.is_finite(), "lifetime_ps", "must be positive")?;
        Ok(RenewalProcess {
            excitation: Exp::new(1.0 / mean_wait_ps).map_err(|_| Error::param("mean_wait_ps", "invalid rate"))?,
            emission: Exp::new(1.0 / lifetime_ps).map_err(|_| Error::param("lifetime_ps", "invalid rate"))?,
        })
    }

    /// Process whose long-run emission rate is `rate_per_ps`.
    pub fn with_rate(rate_per_ps: f64, lifetime_ps: f64) -> Result<Self> {
        ensure(rate_per_ps > 0.0, "rate", "must be positive")?;
        let wait = 1.0 / rate_per_ps - lifetime_ps;
        ensure(wait > 0.0, "rate", "emission rate exceeds what the lifetime allows")?;
        Self::new(wait, lifetime_ps)
    }

    pub fn interval<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.excitation.sample(rng) + self.emission.sample(rng)
    }
}

/// Hypoexponential CDF of the sum of two exponentials with means `m1`, `m2`.
pub fn hypoexponential_cdf(t: f64, m1: f64, m2: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let (l1, l2) = (1.0 / m1, 1.0 / m2);
    if (l1 - l2).abs() <= 1e-12 * l1.max(l2) {
        let x = l1 * t;
        return 1.0 - (-x).exp() * (1.0 + x);
    }
    1.0 - (l2 * (-l1 * t).exp() - l1 * (-l2 * t).exp()) / (l2 - l1)
}

/// Rate-level description of what reaches the two detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbtSource {
    /// Detected emitter rate summed over both channels.
    pub signal_kcps: f64,
    /// Background rate summed over both channels.
    pub background_kcps: f64,
    pub lifetime_ns: f64,
}

impl HbtSource {
    pub fn from_model(
        emitter: &EmitterModel,
        excitation_intensity: f64,
        background: &BackgroundContext,
    ) -> Result<Self> {
        emitter.validate()?;
        background.validate()?;
        let signal_kcps = emitter.detected_rate(excitation_intensity)?;
        Ok(HbtSource { signal_kcps, background_kcps: background.rate_for_signal(signal_kcps), lifetime_ns: emitter.lifetime_ns })
    }

    fn validate(&self) -> Result<()> {
        ensure(self.signal_kcps >= 0.0 && self.signal_kcps.is_finite(), "signal_kcps", "must be non-negative")?;
        ensure(self.background_kcps >= 0.0 && self.background_kcps.is_finite(), "background_kcps", "must be non-negative")?;
        ensure(self.lifetime_ns > 0.0 && self.lifetime_ns.is_finite(), "lifetime_ns", "must be positive")
    }
}

/// Simulates both detector channels behind a 50/50 beam splitter.
pub fn simulate_hbt(
    emitter: &EmitterModel,
    excitation_intensity: f64,
    background: &BackgroundContext,
    detection: &DetectionChain,
    duration_s: f64,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    let source = HbtSource::from_model(emitter, excitation_intensity, background)?;
    simulate_hbt_source(&source, detection, duration_s, seed)
}

pub fn simulate_hbt_source(
    source: &HbtSource,
    detection: &DetectionChain,
    duration_s: f64,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    source.validate()?;
    detection.validate()?;
    ensure(duration_s > 0.0 && duration_s.is_finite(), "duration_s", "must be positive")?;
    let duration_ps = units::seconds_to_ps(duration_s);
    ensure(duration_ps > 0, "duration_s", "shorter than one picosecond")?;
    let dur = duration_ps as f64;

    let mut raw: [Vec<f64>; 2] = [Vec::new(), Vec::new()];

    if source.signal_kcps > 0.0 {
        ensure(detection.quantum_efficiency > 0.0, "quantum_efficiency", "must be positive when the emitter is bright")?;
        let emission_rate = units::kcps_to_per_ps(source.signal_kcps) / detection.quantum_efficiency;
        let process = RenewalProcess::with_rate(emission_rate, units::ns_to_ps(source.lifetime_ns))?;
        let mut rng = substream(seed, UNIT_EMITTER);
        let mut t = 0.0;
        loop {
            t += process.interval(&mut rng);
            if t > dur {
                break;
            }
            if rng.random::<f64>() < detection.quantum_efficiency {
                raw[rng.random::<bool>() as usize].push(t);
            }
        }
    }

    if source.background_kcps > 0.0 {
        let per_channel = units::kcps_to_per_ps(0.5 * source.background_kcps);
        let gap = Exp::new(per_channel).map_err(|_| Error::param("background_kcps", "invalid rate"))?;
        for (ch, events) in raw.iter_mut().enumerate() {
            let mut rng = substream(seed, UNIT_BACKGROUND[ch]);
            let mut t = gap.sample(&mut rng);
            while t <= dur {
                events.push(t);
                t += gap.sample(&mut rng);
            }
        }
    }

    let sigma = units::fwhm_to_sigma(detection.jitter_fwhm_ps);
    let dead_ps = units::ns_to_ps(detection.dead_time_ns);
    let [a, b] = raw;
    let mut out = [a, b].into_iter().enumerate().map(|(ch, events)| {
        let mut rng = substream(seed, UNIT_JITTER[ch]);
        let jitter = Normal::new(0.0, sigma).map_err(|_| Error::param("jitter_fwhm_ps", "invalid width"))?;
        let mut times: Vec<u64> = events
            .into_iter()
            .filter_map(|t| {
                let t = if sigma > 0.0 { t + jitter.sample(&mut rng) } else { t };
                (0.0..=dur).contains(&t).then(|| t.round() as u64)
            })
            .collect();
        times.sort_unstable();
        let times = enforce_dead_time(&times, dead_ps);
        TimestampStream::new(ch as u8, times, duration_ps)
    });
    let a = out.next().unwrap()?;
    let b = out.next().unwrap()?;
    Ok((a, b))
}

/// Non-paralyzable dead time on sorted times: an event is kept only if it
/// arrives at least `dead_ps` after the last kept event (and never at the
/// same picosecond).
pub fn enforce_dead_time(sorted: &[u64], dead_ps: f64) -> Vec<u64> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut last: Option<u64> = None;
    for &t in sorted {
        let keep = match last {
            None => true,
            Some(l) => t > l && (t - l) as f64 >= dead_ps,
        };
        if keep {
            out.push(t);
            last = Some(t);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub extent_um: (f64, f64),
    pub step_um: f64,
    pub dwell_s: f64,
    pub psf_fwhm_um: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { extent_um: (25.0, 25.0), step_um: 0.5, dwell_s: 0.5, psf_fwhm_um: 0.6 }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.extent_um;
        ensure(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite(), "extent_um", "must be positive")?;
        ensure(self.step_um > 0.0 && self.step_um.is_finite(), "step_um", "must be positive")?;
        ensure(self.step_um <= w.min(h), "step_um", "must not exceed the extent")?;
        ensure(self.dwell_s > 0.0 && self.dwell_s.is_finite(), "dwell_s", "must be positive")?;
        ensure(self.psf_fwhm_um > 0.0 && self.psf_fwhm_um.is_finite(), "psf_fwhm_um", "must be positive")
    }

    /// Pixels per axis: positions `0, step, 2·step, …` up to the extent.
    pub fn shape(&self) -> (usize, usize) {
        let n = |e: f64| (e / self.step_um + 1e-9).floor() as usize + 1;
        (n(self.extent_um.0), n(self.extent_um.1))
    }

    pub fn pixel_position(&self, ix: usize, iy: usize) -> (f64, f64) {
        (ix as f64 * self.step_um, iy as f64 * self.step_um)
    }

    /// Gaussian PSF weight (unit peak) at distance `r_um`, zero beyond three
    /// FWHM.
    pub fn psf_weight(&self, r_um: f64) -> f64 {
        if r_um > 3.0 * self.psf_fwhm_um {
            return 0.0;
        }
        let s = units::fwhm_to_sigma(self.psf_fwhm_um);
        (-0.5 * (r_um / s) * (r_um / s)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEmitter {
    pub position_um: (f64, f64),
    pub model: EmitterModel,
}

/// Emitters on a substrate with uniform background fluorescence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterScene {
    extent_um: (f64, f64),
    emitters: Vec<SceneEmitter>,
    background_rate_kcps: f64,
}

impl EmitterScene {
    pub fn new(extent_um: (f64, f64), background_rate_kcps: f64) -> Result<Self> {
        ensure(extent_um.0 > 0.0 && extent_um.1 > 0.0, "extent_um", "must be positive")?;
        ensure(
            background_rate_kcps >= 0.0 && background_rate_kcps.is_finite(),
            "background_rate_kcps",
            "must be non-negative",
        )?;
        Ok(EmitterScene { extent_um, emitters: Vec::new(), background_rate_kcps })
    }

    pub fn add(&mut self, position_um: (f64, f64), model: EmitterModel) -> Result<()> {
        model.validate()?;
        let (x, y) = position_um;
        ensure(
            (0.0..=self.extent_um.0).contains(&x) && (0.0..=self.extent_um.1).contains(&y),
            "position_um",
            "emitter lies outside the scan extent",
        )?;
        self.emitters.push(SceneEmitter { position_um, model });
        Ok(())
    }

    pub fn with_emitter(mut self, position_um: (f64, f64), model: EmitterModel) -> Result<Self> {
        self.add(position_um, model)?;
        Ok(self)
    }

    /// The same scene with emitter `index` picked up.
    pub fn without(&self, index: usize) -> Result<Self> {
        ensure(index < self.emitters.len(), "index", "no such emitter")?;
        let mut s = self.clone();
        s.emitters.remove(index);
        Ok(s)
    }

    pub fn emitters(&self) -> &[SceneEmitter] {
        &self.emitters
    }

    pub fn extent_um(&self) -> (f64, f64) {
        self.extent_um
    }

    pub fn background_rate_kcps(&self) -> f64 {
        self.background_rate_kcps
    }
}

/// Row-major photon counts, `counts[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanImage {
    pub nx: usize,
    pub ny: usize,
    pub extent_um: (f64, f64),
    pub step_um: f64,
    pub dwell_s: f64,
    pub counts: Vec<u64>,
}

impl ScanImage {
    pub fn get(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx + ix]
    }

    pub fn mean(&self) -> f64 {
        self.counts.iter().sum::<u64>() as f64 / self.counts.len() as f64
    }

    /// Pixel of the (first) maximum.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = i;
            }
        }
        (best % self.nx, best / self.nx)
    }

    /// `self - other`, pixel by pixel.
    pub fn difference(&self, other: &ScanImage) -> Result<Vec<i64>> {
        ensure(self.nx == other.nx && self.ny == other.ny, "image", "shapes differ")?;
        Ok(self.counts.iter().zip(&other.counts).map(|(&a, &b)| a as i64 - b as i64).collect())
    }
}

fn check_scan(scene: &EmitterScene, config: &ScanConfig, excitation: &ExcitationField) -> Result<()> {
    config.validate()?;
    excitation.validate()?;
    let (w, h) = config.extent_um;
    for e in &scene.emitters {
        let (x, y) = e.position_um;
        ensure(x <= w && y <= h, "position_um", "emitter lies outside the scan extent")?;
    }
    Ok(())
}

/// Expected count of pixel `(ix, iy)`: `dwell · (background + Σ rate·psf)`.
pub fn expected_pixel(
    scene: &EmitterScene,
    config: &ScanConfig,
    intensity: f64,
    ix: usize,
    iy: usize,
) -> Result<f64> {
    let (px, py) = config.pixel_position(ix, iy);
    let mut rate = scene.background_rate_kcps;
    for e in &scene.emitters {
        let (dx, dy) = (e.position_um.0 - px, e.position_um.1 - py);
        let w = config.psf_weight((dx * dx + dy * dy).sqrt());
        if w > 0.0 {
            rate += e.model.detected_rate(intensity)? * w;
        }
    }
    Ok(rate * 1e3 * config.dwell_s)
}

/// One Poisson-sampled pixel. Each pixel owns its own substream, so pixels
/// may be generated in any order or in parallel.
pub fn simulate_pixel(
    scene: &EmitterScene,
    config: &ScanConfig,
    intensity: f64,
    seed: u64,
    ix: usize,
    iy: usize,
) -> Result<u64> {
    let (nx, _) = config.shape();
    let mean = expected_pixel(scene, config, intensity, ix, iy)?;
    if mean <= 0.0 {
        return Ok(0);
    }
    let mut rng = substream(seed, UNIT_PIXEL_BASE + (iy * nx + ix) as u64);
    let p = Poisson::new(mean).map_err(|_| Error::param("rate", "invalid Poisson mean"))?;
    Ok(p.sample(&mut rng) as u64)
}

pub fn simulate_scan(
    scene: &EmitterScene,
    config: &ScanConfig,
    excitation: &ExcitationField,
    seed: u64,
) -> Result<ScanImage> {
    check_scan(scene, config, excitation)?;
    let intensity = excitation.intensity()?;
    let (nx, ny) = config.shape();
    let mut counts = vec![0u64; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            counts[iy * nx + ix] = simulate_pixel(scene, config, intensity, seed, ix, iy)?;
        }
    }
    Ok(ScanImage { nx, ny, extent_um: config.extent_um, step_um: config.step_um, dwell_s: config.dwell_s, counts })
}
