//! Special functions not provided by `libm`: the scaled complementary error
//! function, modified Bessel functions of the second kind, and the Gaussian
//! convolution of a two-sided exponential.

#[allow(unused_imports)] // float methods when std is absent
use num_traits::Float;
use core::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};


/// `exp(x²)·erfc(x)`, finite for all `x` where it does not overflow.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(-x) = 2 - erfc(x)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 4.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        // Laplace continued fraction erfcx(x) = 1/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
        // evaluated bottom-up.
        let mut tail = x;
        for k in (1..=CF_TERMS).rev() {
            tail = x + 0.5 * k as f64 / tail;
        }
        1.0 / (PI.sqrt() * tail)
    }
}

const CF_TERMS: u32 = 120;

/// Two-sided exponential `exp(-|t|/tau)` convolved with a unit-area Gaussian
/// of standard deviation `sigma`. `sigma == 0` returns the bare exponential.
pub fn exp_gauss_conv(t: f64, tau: f64, sigma: f64) -> f64 {
    let t = t.abs();
    if sigma <= 0.0 {
        return (-t / tau).exp();
    }
    let (t1, t2) = conv_terms(t, tau, sigma);
    0.5 * (t1 + t2)
}

/// Derivative of [`exp_gauss_conv`] with respect to `tau`.
pub fn exp_gauss_conv_dtau(t: f64, tau: f64, sigma: f64) -> f64 {
    let t = t.abs();
    if sigma <= 0.0 {
        return (-t / tau).exp() * t / (tau * tau);
    }
    let (t1, t2) = conv_terms(t, tau, sigma);
    let tau2 = tau * tau;
    let s2_tau3 = sigma * sigma / (tau2 * tau);
    let gauss = (-t * t / (2.0 * sigma * sigma)).exp();
    0.5 * (t1 * (t / tau2 - s2_tau3) + t2 * (-t / tau2 - s2_tau3))
        + FRAC_2_SQRT_PI / SQRT_2 * sigma / tau2 * gauss
}

// T1 = exp(σ²/2τ² - t/τ)·erfc(u), T2 = exp(σ²/2τ² + t/τ)·erfc(v), written in
// terms of erfcx so neither factor overflows. Requires t >= 0.
fn conv_terms(t: f64, tau: f64, sigma: f64) -> (f64, f64) {
    let r = sigma / tau;
    let u = (r - t / sigma) / SQRT_2;
    let v = (r + t / sigma) / SQRT_2;
    let gauss = (-t * t / (2.0 * sigma * sigma)).exp();
    let t1 = if u >= 0.0 {
        gauss * erfcx(u)
    } else {
        2.0 * (0.5 * r * r - t / tau).exp() - gauss * erfcx(-u)
    };
    let t2 = gauss * erfcx(v);
    (t1, t2)
}

/// Bessel function of the first kind, order 0.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order 1.
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// Bessel function of the first kind, order 2.
pub fn bessel_j2(x: f64) -> f64 {
    libm::jn(2, x)
}

/// `exp(x)·K_nu(x)` for `x > 0`, integer `nu`, from the integral
/// `K_nu(x) = ∫₀^∞ exp(-x cosh t) cosh(nu t) dt` by the trapezoidal rule.
///
/// The integrand is entire and decays double-exponentially, so the
/// trapezoidal sum converges geometrically in the step count.
pub fn bessel_k_scaled(nu: u32, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled needs x > 0");
    let nu = nu as f64;
    let h = 0.1f64.min(0.5 / x.sqrt());
    // exp(-x(cosh t - 1)) cosh(nu t) ~ exp(-x e^t/2 + nu t); stop once it is
    // far below the t = 0 contribution.
    let mut sum = 0.5;
    let mut k = 1u32;
    loop {
        let t = k as f64 * h;
        let sh = (0.5 * t).sinh();
        let f = (-2.0 * x * sh * sh).exp() * (nu * t).cosh();
        sum += f;
        if f < 1e-18 * sum && x * (t.cosh() - 1.0) > 40.0 + nu * t {
            break;
        }
        k += 1;
    }
    sum * h
}

pub fn bessel_k0(x: f64) -> f64 {
    bessel_k_scaled(0, x) * (-x).exp()
}

pub fn bessel_k1(x: f64) -> f64 {
    bessel_k_scaled(1, x) * (-x).exp()
}

pub fn bessel_k2(x: f64) -> f64 {
    bessel_k_scaled(2, x) * (-x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn k_reference_values() {
        // Reference values to 16 digits (Abramowitz & Stegun table 9.8, mpmath).
        let cases = [
            (0, 1.0, 0.421_024_438_240_708_3),
            (1, 1.0, 0.601_907_230_197_234_6),
            (0, 2.0, 0.113_893_872_749_533_4),
            (1, 2.0, 0.139_865_881_816_522_4),
            (2, 1.0, 1.624_838_898_635_177_4),
            (0, 0.1, 2.427_069_024_702_017),
            (1, 10.0, 1.864_877_345_382_558_5e-5),
        ];
        for (nu, x, want) in cases {
            let got = bessel_k_scaled(nu, x) * (-x).exp();
            assert!(rel(got, want) < 1e-13, "K{nu}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn k_recurrence() {
        for x in [0.05, 0.7, 3.3, 12.0, 80.0, 400.0] {
            let k0 = bessel_k_scaled(0, x);
            let k1 = bessel_k_scaled(1, x);
            let k2 = bessel_k_scaled(2, x);
            assert!(rel(k2, k0 + 2.0 * k1 / x) < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn j2_matches_series() {
        // J2(x) = Σ (-1)^k (x/2)^(2k+2) / (k! (k+2)!)
        for x in [0.3f64, 1.7, 2.4] {
            let mut series = 0.0;
            let mut term = (0.5 * x).powi(2) / 2.0;
            for k in 0..30 {
                series += term;
                term *= -(0.5 * x).powi(2) / ((k + 1) as f64 * (k + 3) as f64);
            }
            assert!((bessel_j2(x) - series).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn erfcx_continuity_and_limits() {
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
        // mpmath exp(x²)·erfc(x), 30 digits
        let cases = [
            (0.5, 0.615_690_344_192_925_9),
            (3.9, 0.140_314_181_600_689_74),
            (4.0, 0.136_999_457_625_061_39),
            (4.1, 0.133_834_116_418_651_99),
            (10.0, 0.056_140_992_743_822_586),
            (25.0, 0.022_549_572_432_641_359),
            (100.0, 0.005_641_613_782_989_433),
        ];
        for (x, want) in cases {
            assert!(rel(erfcx(x), want) < 1e-13, "erfcx({x}) = {}", erfcx(x));
        }
        assert!(rel(erfcx(1e4), 1.0 / (1e4 * PI.sqrt())) < 1e-8);
        // erfc(-1) = 1.8427007929497148
        assert!(rel(erfcx(-1.0), 1.842_700_792_949_714_8 * 1f64.exp()) < 1e-14);
    }

    #[test]
    fn conv_reduces_to_exponential() {
        for t in [-3.0, -0.2, 0.0, 0.4, 5.0] {
            assert_eq!(exp_gauss_conv(t, 1.3, 0.0), (-f64::abs(t) / 1.3).exp());
        }
        // far tail: convolution of exp with gaussian -> exp shifted by σ²/2τ²
        let (tau, sigma) = (1.0, 0.13);
        let t = 30.0;
        let want = (sigma * sigma / (2.0 * tau * tau) - t / tau).exp();
        assert!(rel(exp_gauss_conv(t, tau, sigma), want) < 1e-10);
    }

    #[test]
    fn conv_dtau_matches_finite_difference() {
        for &(t, tau, sigma) in &[(0.0, 1.0, 0.13), (0.5, 0.8, 0.2), (-2.0, 1.1, 0.05), (4.0, 1.0, 0.3)] {
            let h = 1e-6;
            let fd = (exp_gauss_conv(t, tau + h, sigma) - exp_gauss_conv(t, tau - h, sigma)) / (2.0 * h);
            let an = exp_gauss_conv_dtau(t, tau, sigma);
            assert!((fd - an).abs() <= 1e-7 * an.abs().max(1e-3), "t={t}: {fd} vs {an}");
        }
    }
}
