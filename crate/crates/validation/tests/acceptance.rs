//! End-to-end acceptance checks, one line per criterion. Runs as a plain
//! binary (`harness = false`) and exits nonzero when any criterion fails.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sivkit::{cli, parallel};
use sivkit_core::correlator::{
    background_correct, coincidence_histogram_slices, fit_antibunching, normalize_g2, predict_measured_dip,
    AntibunchingOptions, InstrumentResponse,
};
use sivkit_core::emitter::{DetectionChain, EmitterModel, ExcitationField, PolarizationCurve, ZplSpectrum};
use sivkit_core::fiber::{
    channeling_efficiency, efficiency_from_counts, invert_channeling, is_single_mode, solve_he11, v_number,
    CollectionBudget, FiberSpec, Orientation,
};
use sivkit_core::fit::polarization::angle_sweep;
use sivkit_core::fit::saturation::SaturationOptions;
use sivkit_core::fit::{correct_instrument_width, debye_waller, fit_lorentzian, fit_polarization, fit_saturation};
use sivkit_core::photostream::{simulate_hbt_source, simulate_scan, EmitterScene, HbtSource, ScanConfig, TimestampStream};
use sivkit_core::synth::{polarization_dataset, saturation_dataset, spectrum_dataset, SATURATION_INTENSITIES};
use sivkit_core::units::power_to_intensity;

type Outcome = Result<(bool, String), String>;

struct Check {
    ok: bool,
    parts: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { ok: true, parts: Vec::new() }
    }

    fn test(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        self.parts.push(format!("{}{what}", if ok { "" } else { "✗ " }));
    }

    fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        self.test((value - target).abs() <= tol, format!("{name} {value:.4} (want {target} ± {tol})"));
    }

    fn runtime(&mut self, elapsed: Duration, limit_s: f64) {
        let s = elapsed.as_secs_f64();
        self.test(s < limit_s, format!("runtime {s:.2} s (< {limit_s} s)"));
    }

    fn done(self) -> Outcome {
        Ok((self.ok, self.parts.join("; ")))
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn conversion_chain() -> Outcome {
    let mut c = Check::new();
    for (p, i) in [(135.0, 47.7), (56.0, 19.8), (25.0, 8.8), (11.0, 3.9)] {
        let got = power_to_intensity(p, 0.6).map_err(err)?;
        c.test((got / i - 1.0).abs() < 0.02, format!("{p} mW → {got:.2}"));
    }
    let i_sat = power_to_intensity(370.0, 0.6).map_err(err)?;
    c.test((i_sat / 130.0 - 1.0).abs() < 0.02, format!("370 mW → {i_sat:.1}"));
    c.done()
}

fn saturation_recovery() -> Outcome {
    let start = Instant::now();
    let mut good = 0;
    let runs = 200;
    for seed in 0..runs {
        let data = saturation_dataset(29.0, 130.0, &SATURATION_INTENSITIES, 0.05, seed).map_err(err)?;
        let f = fit_saturation(&data, &SaturationOptions::default()).map_err(err)?;
        if (f.n_inf_kcps / 29.0 - 1.0).abs() <= 0.10 && (f.i_sat / 130.0 - 1.0).abs() <= 0.20 {
            good += 1;
        }
    }
    let mut c = Check::new();
    let frac = good as f64 / runs as f64;
    c.test(frac >= 0.8, format!("{good}/{runs} realizations within tolerance ({:.0}% ≥ 80%)", frac * 100.0));
    c.runtime(start.elapsed(), 10.0);
    c.done()
}

fn g2_chain() -> Outcome {
    let start = Instant::now();
    let sb = 3.5;
    let source = HbtSource { signal_kcps: 200.0, background_kcps: 200.0 / sb, lifetime_ns: 1.0 };
    let detection = DetectionChain { jitter_fwhm_ps: 300.0, ..Default::default() };
    let (a, b) = simulate_hbt_source(&source, &detection, 120.0, 7).map_err(err)?;
    let h = parallel::coincidence_histogram(&a, &b, 128, 25_600, 0).map_err(err)?;
    let curve = normalize_g2(&h).map_err(err)?;
    let irf = InstrumentResponse::gaussian(detection.pair_jitter_fwhm_ps()).map_err(err)?;
    let f = fit_antibunching(&curve, &AntibunchingOptions { irf: Some(irf), ..Default::default() }).map_err(err)?;
    let floor = predict_measured_dip(0.0, sb).map_err(err)?;
    let corrected = background_correct(f.dip_g2_0, sb).map_err(err)?;

    let mut c = Check::new();
    c.within("(a) convolved dip", f.apparent_dip_g2_0, 0.60, 0.08);
    c.within("(b) floor", floor, 0.395, 0.001);
    c.test(corrected.g2_0 < 0.2, format!("(c) corrected dip {:.3} (< 0.2)", corrected.g2_0));
    c.within("(d) decay time ns", f.decay_time_ns, 1.0, 0.3);
    c.runtime(start.elapsed(), 60.0);
    c.done()
}

/// Every pair, binned by rounding the delay to the nearest multiple of the
/// bin width with halves going away from zero.
fn brute_force(a: &[u64], b: &[u64], w: u64, max_lag: u64) -> Vec<u64> {
    let k = (max_lag / w) as i64;
    let mut out = vec![0u64; (2 * k + 1) as usize];
    let w = w as i128;
    for &ta in a {
        for &tb in b {
            let d = tb as i128 - ta as i128;
            let idx = if d >= 0 { (2 * d + w) / (2 * w) } else { -((-2 * d + w) / (2 * w)) } as i64;
            if idx.abs() <= k {
                out[(idx + k) as usize] += 1;
            }
        }
    }
    out
}

fn sorted_times(rng: &mut StdRng, n: usize, span: u64) -> Vec<u64> {
    let mut t: Vec<u64> = (0..n).map(|_| rng.random_range(0..span)).collect();
    t.sort_unstable();
    t.dedup();
    t
}

fn correlator_exactness() -> Outcome {
    let mut c = Check::new();
    let mut rng = StdRng::seed_from_u64(4);
    let cases = 300;
    let mut mismatches = 0;
    for i in 0..cases {
        let na = rng.random_range(0..=1000);
        let nb = rng.random_range(0..=1000);
        // dense spans force many in-window pairs and exact bin-edge delays
        let span = if i % 3 == 0 { 2_000 } else { rng.random_range(1_000..10_000_000) };
        let a = sorted_times(&mut rng, na, span);
        let b = sorted_times(&mut rng, nb, span);
        let w = [1, 2, 7, 64, 128, 1000][rng.random_range(0..6)];
        let lag = w * rng.random_range(0..200);
        let h = coincidence_histogram_slices(&a, &b, w, lag, span).map_err(err)?;
        if h.counts != brute_force(&a, &b, w, lag) {
            mismatches += 1;
        }
    }
    c.test(mismatches == 0, format!("{cases} brute-force cases, {mismatches} mismatches"));

    let n = 1_000_000;
    let span = 1_000_000_000_000; // 1 s at 1 MHz per channel
    let a = TimestampStream::new(0, sorted_times(&mut rng, n, span), span).map_err(err)?;
    let b = TimestampStream::new(1, sorted_times(&mut rng, n, span), span).map_err(err)?;
    let start = Instant::now();
    let h = parallel::coincidence_histogram(&a, &b, 64, 50_000, 0).map_err(err)?;
    let elapsed = start.elapsed();
    c.test(h.num_bins() == 2 * (50_000 / 64) + 1, format!("{} bins", h.num_bins()));
    c.runtime(elapsed, 2.0);
    c.done()
}

fn spectrum_analysis() -> Outcome {
    let model = EmitterModel::default();
    let window = (727.0, 752.0);
    let z = ZplSpectrum::with_debye_waller(&model, 100.0, window).map_err(err)?;
    let s = spectrum_dataset(&z, (715.0, 765.0), 1001, 1.5, 0.01, 3).map_err(err)?;
    let f = fit_lorentzian(&s).map_err(err)?;
    let dw = debye_waller(&s, &f, window).map_err(err)?;
    let corrected = correct_instrument_width(f.fwhm_nm, 1.5).map_err(err)?;
    let mut c = Check::new();
    c.within("DW", dw.fraction, 0.74, 0.01);
    c.within("center nm", f.center_nm, 738.8, 0.1);
    c.within("FWHM nm", f.fwhm_nm, 7.0, 0.14);
    c.test(corrected < 7.0, format!("corrected FWHM {corrected:.3} nm (< 7)"));
    c.done()
}

fn polarization_recovery() -> Outcome {
    let start = Instant::now();
    let angles = angle_sweep(5.0);
    let mut c = Check::new();
    for (k, v) in [0.54, 0.25].into_iter().enumerate() {
        let curve = PolarizationCurve::from_mixture(10.0, v, 30.0);
        let mut worst = 0.0f64;
        for i in 0..100 {
            let rates = polarization_dataset(&curve, &angles, 0.03, 1000 * k as u64 + i).map_err(err)?;
            let f = fit_polarization(&angles, &rates).map_err(err)?;
            worst = worst.max((f.visibility - v).abs());
        }
        c.test(worst <= 0.02, format!("V={v}: worst error {worst:.4} over 100 (≤ 0.02)"));
    }
    c.runtime(start.elapsed(), 5.0);
    c.done()
}

fn fiber_numerics() -> Outcome {
    let spec = FiberSpec::default();
    let v = v_number(&spec, 738.0).map_err(err)?;
    let m = solve_he11(&spec, 738.0).map_err(err)?;
    let o = Orientation::Random;
    let eta = |r: f64| m.channeling_efficiency(r, o);
    let mut c = Check::new();
    c.test((2.33..=2.43).contains(&v) && is_single_mode(v), format!("V {v:.4} single-mode"));
    c.test(m.residual < 1e-10, format!("residual {:.1e}", m.residual));
    let monotone = (0..4000).all(|i| eta((i + 1) as f64 * 0.5) < eta(i as f64 * 0.5));
    c.test(monotone, "η strictly decreasing on 0–2000 nm".into());

    // least-squares slope of ln η over r ∈ [3/q, 5/q]
    let (lo, hi) = (3.0e3 / m.q, 5.0e3 / m.q);
    let pts: Vec<(f64, f64)> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).map(|r| (r * 1e-3, eta(r).ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let ratio = slope / (-2.0 * m.q);
    c.test((ratio - 1.0).abs() <= 0.05, format!("slope/(−2q) {ratio:.4} on [3/q, 5/q] (within 5%)"));

    let mut worst = 0.0f64;
    for r in [0.0, 10.0, 50.0, 110.0, 250.0, 500.0] {
        let target = channeling_efficiency(&m, &spec, r, o).map_err(err)?;
        let back = invert_channeling(&m, &spec, target, o).map_err(err)?;
        worst = worst.max((eta(back) - target).abs());
    }
    c.test(worst < 1e-8, format!("inversion round trip {worst:.1e}"));
    c.done()
}

fn coupling_estimate() -> Outcome {
    let est = efficiency_from_counts(1.176, 1.5, &CollectionBudget::default()).map_err(err)?;
    let d = est.compare(0.041, 0.008);
    let m = solve_he11(&FiberSpec::default(), 738.0).map_err(err)?;
    let r = invert_channeling(&m, &FiberSpec::default(), 0.041, Orientation::Random).map_err(err)?;
    let mut c = Check::new();
    c.test(d.overlaps, format!("η {:.2} ± {:.2}% overlaps 4.1 ± 0.8%", 100.0 * est.eta, 100.0 * est.sigma_eta));
    c.test((70.0..=150.0).contains(&r), format!("r(4.1%) {r:.1} nm in [70, 150]"));
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("coupling.toml");
    let code = cli::run(["sivkit", "coupling", "--out", path.to_str().unwrap()]);
    let text = std::fs::read_to_string(&path).unwrap_or_default();
    c.test(code == 0 && text.contains("[discrepancy]"), "discrepancy report emitted".into());
    c.done()
}

fn scan_simulation() -> Outcome {
    let cfg = ScanConfig { extent_um: (50.0, 50.0), ..Default::default() };
    let field = ExcitationField::default();
    let empty = EmitterScene::new(cfg.extent_um, 0.3).map_err(err)?;
    let img = simulate_scan(&empty, &cfg, &field, 11).map_err(err)?;
    let pixels = img.counts.len();
    let mut c = Check::new();
    c.test(pixels >= 10_000, format!("{pixels} pixels"));
    c.within("background mean", img.mean(), 150.0, 3.0);

    let model = EmitterModel::default();
    let scene = empty
        .with_emitter((10.0, 10.0), model.clone())
        .and_then(|s| s.with_emitter((25.0, 24.0), model.clone()))
        .and_then(|s| s.with_emitter((26.0, 25.0), model))
        .map_err(err)?;
    let at = scene.emitters()[1].position_um;
    let before = simulate_scan(&scene, &cfg, &field, 11).map_err(err)?;
    let after = simulate_scan(&scene.without(1).map_err(err)?, &cfg, &field, 11).map_err(err)?;
    let diff = before.difference(&after).map_err(err)?;
    let (nx, ny) = cfg.shape();
    let mut outside = 0;
    let mut inside_changed = 0;
    for iy in 0..ny {
        for ix in 0..nx {
            let (x, y) = cfg.pixel_position(ix, iy);
            let far = ((x - at.0).powi(2) + (y - at.1).powi(2)).sqrt() > 3.0 * cfg.psf_fwhm_um;
            let changed = diff[iy * nx + ix] != 0;
            if far {
                outside += changed as usize;
            } else {
                inside_changed += changed as usize;
            }
        }
    }
    c.test(outside == 0 && inside_changed > 0, format!("{outside} changed pixels beyond 3·PSF ({inside_changed} inside)"));
    c.done()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let run = |name: &str| {
        let path = dir.path().join(name);
        let code = cli::run(["sivkit", "reproduce-paper", "--seed", "7", "--out", path.to_str().unwrap()]);
        (code, std::fs::read(&path).unwrap_or_default())
    };
    let ((ca, a), (cb, b)) = (run("first.toml"), run("second.toml"));
    let mut c = Check::new();
    c.test(ca == 0 && cb == 0, format!("exit {ca}/{cb}"));
    c.test(!a.is_empty() && a == b, format!("{} report bytes, identical: {}", a.len(), a == b));
    c.done()
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("conversion chain", conversion_chain),
        ("saturation recovery", saturation_recovery),
        ("g2 chain", g2_chain),
        ("correlator exactness and speed", correlator_exactness),
        ("spectrum analysis", spectrum_analysis),
        ("polarization", polarization_recovery),
        ("fiber numerics", fiber_numerics),
        ("coupling estimate", coupling_estimate),
        ("scan simulation", scan_simulation),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !ok as usize;
        println!("criterion {}: {} {name}: {detail}", i + 1, if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
