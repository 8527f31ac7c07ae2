//! Error-function family and Gaussian tail helpers.
//!
//! `erf`/`erfc` come from `libm` (a port of the FreeBSD msun routines, under
//! one ulp). Everything that has to stay accurate deep in the lower Gaussian
//! tail goes through the scaled complementary error function `erfcx`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// 1/sqrt(pi)
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
/// sqrt(2/pi)
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
/// 1/sqrt(2 pi)
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this argument `ln Phi` and the inverse Mills ratio switch to the
/// `erfcx` branch.
pub const LOG_PHI_TAIL: f64 = -8.0;

const ERFCX_CF_START: f64 = 5.0;
const ERFCX_CF_TERMS: usize = 64;

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        // erfc(-y) = 2 - erfc(y)
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < ERFCX_CF_START {
        return (x * x).exp() * erfc(x);
    }
    // Laplace continued fraction, evaluated bottom-up:
    // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut tail = x;
    for k in (1..=ERFCX_CF_TERMS).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    FRAC_1_SQRT_PI / tail
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(a: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * a * a).exp()
}

/// Standard normal CDF, `Phi(a) = erfc(-a/sqrt 2)/2`.
#[inline]
pub fn norm_cdf(a: f64) -> f64 {
    0.5 * erfc(-a * FRAC_1_SQRT_2)
}

/// Gaussian tail `Q(a) = 1 - Phi(a)`.
#[inline]
pub fn q_function(a: f64) -> f64 {
    0.5 * erfc(a * FRAC_1_SQRT_2)
}

/// `ln Phi(a)`, accurate in both tails.
pub fn log_norm_cdf(a: f64) -> f64 {
    if a > 0.0 {
        (-q_function(a)).ln_1p()
    } else if a >= LOG_PHI_TAIL {
        norm_cdf(a).ln()
    } else {
        (0.5 * erfcx(-a * FRAC_1_SQRT_2)).ln() - 0.5 * a * a
    }
}

/// Inverse Mills ratio `phi(a) / Phi(a)`.
pub fn inv_mills(a: f64) -> f64 {
    if a >= LOG_PHI_TAIL {
        norm_pdf(a) / norm_cdf(a)
    } else {
        SQRT_2_OVER_PI / erfcx(-a * FRAC_1_SQRT_2)
    }
}

/// `r(a) * (a + r(a))` with `r` the inverse Mills ratio; this is the second
/// derivative of `-ln Phi(a)` and is nonnegative everywhere.
pub fn inv_mills_curvature(a: f64) -> f64 {
    if a >= LOG_PHI_TAIL {
        let r = inv_mills(a);
        r * (a + r)
    } else {
        let x = -a * FRAC_1_SQRT_2;
        let e = erfcx(x);
        let r = SQRT_2_OVER_PI / e;
        // a + r = sqrt2 * (1/(sqrt(pi) erfcx(x)) - x), kept in that form
        r * SQRT_2 * (FRAC_1_SQRT_PI / e - x)
    }
}

/// Derivative of `erf`: `(2/sqrt(pi)) exp(-u^2)`.
#[inline]
pub fn erf_prime(u: f64) -> f64 {
    2.0 * FRAC_1_SQRT_PI * (-u * u).exp()
}

/// Convenience for tests and diagnostics: `ln(2 pi)/2`.
pub fn half_ln_two_pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}
