//! Thread-parallel drivers for the independent units of work exposed by the
//! core crate. Results are identical to the serial versions for any thread
//! count.

use std::num::NonZeroUsize;
use std::thread;

use sivkit_core::correlator::{self, CorrelationHistogram};
use sivkit_core::emitter::ExcitationField;
use sivkit_core::photostream::{self, EmitterScene, ScanConfig, ScanImage, TimestampStream};

use crate::error::AppResult;

/// `requested`, or the available parallelism when zero.
pub fn thread_count(requested: usize) -> usize {
    if requested > 0 {
        return requested;
    }
    thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

/// Coincidence histogram with stream A split into one contiguous slice per
/// thread; partial histograms are summed.
pub fn coincidence_histogram(
    a: &TimestampStream,
    b: &TimestampStream,
    bin_width_ps: u64,
    max_lag_ps: u64,
    threads: usize,
) -> AppResult<CorrelationHistogram> {
    let threads = thread_count(threads);
    // validates geometry and yields the empty result shape
    let mut h = correlator::coincidence_histogram_slices(&[], &[], bin_width_ps, max_lag_ps, 0)?;
    h.events_a = a.len() as u64;
    h.events_b = b.len() as u64;
    h.duration_ps = a.duration_ps().max(b.duration_ps());
    if threads == 1 || a.len() < 10_000 {
        correlator::accumulate_chunk(a.times_ps(), b.times_ps(), bin_width_ps, max_lag_ps, &mut h.counts);
    } else {
        let nbins = h.counts.len();
        let partials: Vec<Vec<u64>> = thread::scope(|s| {
            let handles: Vec<_> = correlator::partition(a.times_ps(), threads)
                .map(|chunk| {
                    s.spawn(move || {
                        let mut counts = vec![0u64; nbins];
                        correlator::accumulate_chunk(chunk, b.times_ps(), bin_width_ps, max_lag_ps, &mut counts);
                        counts
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("histogram worker panicked")).collect()
        });
        for p in partials {
            for (acc, c) in h.counts.iter_mut().zip(p) {
                *acc += c;
            }
        }
    }
    h.total = h.counts.iter().sum();
    Ok(h)
}

/// Raster scan with rows distributed over threads.
pub fn simulate_scan(
    scene: &EmitterScene,
    config: &ScanConfig,
    excitation: &ExcitationField,
    seed: u64,
    threads: usize,
) -> AppResult<ScanImage> {
    config.validate()?;
    if scene.emitters().iter().any(|e| e.position_um.0 > config.extent_um.0 || e.position_um.1 > config.extent_um.1) {
        return Err(sivkit_core::Error::InvalidParameter {
            name: "position_um",
            reason: "emitter lies outside the scan extent".into(),
        }
        .into());
    }
    excitation.validate()?;
    let intensity = excitation.intensity()?;
    let (nx, ny) = config.shape();
    let threads = thread_count(threads).min(ny);
    let rows_per = ny.div_ceil(threads);
    let rows: Vec<sivkit_core::Result<Vec<u64>>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut out = Vec::with_capacity(rows_per * nx);
                    for iy in t * rows_per..((t + 1) * rows_per).min(ny) {
                        for ix in 0..nx {
                            out.push(photostream::simulate_pixel(scene, config, intensity, seed, ix, iy)?);
                        }
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
    });
    let mut counts = Vec::with_capacity(nx * ny);
    for r in rows {
        counts.extend(r?);
    }
    Ok(ScanImage { nx, ny, extent_um: config.extent_um, step_um: config.step_um, dwell_s: config.dwell_s, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use sivkit_core::emitter::{DetectionChain, EmitterModel};
    use sivkit_core::photostream::HbtSource;

    #[test]
    fn threads_match_serial() {
        let src = HbtSource { signal_kcps: 500.0, background_kcps: 100.0, lifetime_ns: 1.0 };
        let (a, b) = photostream::simulate_hbt_source(&src, &DetectionChain::default(), 0.2, 3).unwrap();
        let serial = correlator::coincidence_histogram(&a, &b, 64, 6400).unwrap();
        for t in [1, 2, 3, 8] {
            assert_eq!(coincidence_histogram(&a, &b, 64, 6400, t).unwrap(), serial);
        }
    }

    #[test]
    fn parallel_scan_matches_serial() {
        let cfg = ScanConfig { extent_um: (6.0, 4.0), ..Default::default() };
        let scene = EmitterScene::new(cfg.extent_um, 0.3).unwrap().with_emitter((3.0, 2.0), EmitterModel::default()).unwrap();
        let ex = ExcitationField::default();
        let serial = photostream::simulate_scan(&scene, &cfg, &ex, 4).unwrap();
        for t in [1, 3, 16] {
            assert_eq!(simulate_scan(&scene, &cfg, &ex, 4, t).unwrap(), serial);
        }
    }
}
