//! Normal distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, via the complementary error function so that the
/// lower tail keeps full relative accuracy.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln Φ(x)`, accurate deep in the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // asymptotic Mills ratio
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// `e^a Φ(x)` without overflow when `a` is large and `Φ(x)` tiny.
pub fn exp_times_cdf(a: f64, x: f64) -> f64 {
    if a < 300.0 {
        let c = norm_cdf(x);
        if c > 0.0 && a > -700.0 {
            return a.exp() * c;
        }
    }
    (a + ln_norm_cdf(x)).exp()
}
