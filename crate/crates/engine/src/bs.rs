//! Black-Scholes prices, expected local time, `ρ(t)` and `z(u;λ)`.

use crate::error::Result;
use crate::market::MarketParams;
use crate::special::norm_cdf;

/// A market call quote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallQuote {
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
}

fn d1(s: f64, k: f64, tau: f64, sigma: f64, r: f64) -> f64 {
    ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / (sigma * tau.sqrt())
}

/// Black-Scholes call value.
pub fn bs_call(s: f64, k: f64, tau: f64, sigma: f64, r: f64) -> f64 {
    if k <= 0.0 {
        return s;
    }
    if s <= 0.0 {
        return 0.0;
    }
    if tau <= 0.0 {
        return (s - k).max(0.0);
    }
    let a = d1(s, k, tau, sigma, r);
    let b = a - sigma * tau.sqrt();
    let kd = k * (-r * tau).exp();
    if s >= kd {
        // in the money: parity on the put keeps the cancellation small
        s - kd + kd * norm_cdf(-b) - s * norm_cdf(-a)
    } else {
        s * norm_cdf(a) - kd * norm_cdf(b)
    }
}

/// Black-Scholes put value.
pub fn bs_put(s: f64, k: f64, tau: f64, sigma: f64, r: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    if s <= 0.0 {
        return k * (-r * tau.max(0.0)).exp();
    }
    if tau <= 0.0 {
        return (k - s).max(0.0);
    }
    let a = d1(s, k, tau, sigma, r);
    let b = a - sigma * tau.sqrt();
    k * (-r * tau).exp() * norm_cdf(-b) - s * norm_cdf(-a)
}

/// `E_Q[L_T − L_t | F_t]` for the local time of `S^D` at `K^D`: the time
/// value of an option on the martingale `S^D`,
/// `Φ(d1) sd − Φ(d1 − σ√τ) kd − (sd − kd)_+`, with
/// `d1 = (ln(sd/kd) + σ²τ/2)/(σ√τ)`.
pub fn expected_local_time(sd: f64, kd: f64, tau: f64, sigma: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    // the out-of-the-money side avoids subtracting the intrinsic value
    if sd >= kd {
        bs_put(sd, kd, tau, sigma, 0.0)
    } else {
        bs_call(sd, kd, tau, sigma, 0.0)
    }
}

/// At-the-money value `kd(2Φ(σ√τ/2) − 1)` of the expected local time.
pub fn atm_local_time(kd: f64, tau: f64, sigma: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    // 2Φ(a) − 1 = 1 − 2Φ(−a), accurate for small a
    kd * (1.0 - 2.0 * norm_cdf(-0.5 * sigma * tau.sqrt()))
}

/// `ρ(t) = φ(t) K^D (2Φ(σ√(T−t)/2) − 1)`.
pub fn rho(m: &MarketParams, t: f64, kd: f64) -> Result<f64> {
    let phi = m.phi_on_strike_line(t, kd)?;
    Ok(phi * atm_local_time(kd, m.horizon() - t, m.sigma()))
}

/// `z(u;λ) = λρ(u) − αφ(u)`.
pub fn z(m: &MarketParams, u: f64, lambda: f64, kd: f64, alpha: f64) -> Result<f64> {
    let phi = m.phi_on_strike_line(u, kd)?;
    Ok(phi * (lambda * atm_local_time(kd, m.horizon() - u, m.sigma()) - alpha))
}

/// Smallest `λ` beyond which `z(·;λ)` is decreasing on all of `[0, T]`
/// (a sufficient bound). On `{z > 0}` it decreases for every `λ > 0`
/// whenever [`MarketParams::z_decreasing`] holds; below zero `−αφ` pulls
/// the other way and needs `λ|∂_u A| ≥ |κ|α`, where `A` is the ATM local
/// time and `κ` the log-slope of `φ(u)`.
pub fn global_decrease_threshold(m: &MarketParams, kd: f64, alpha: f64) -> f64 {
    let th = m.theta();
    let p = m.p();
    let kappa = (th / (2.0 * p * p)) * (th - m.sigma() * p);
    if kappa >= 0.0 {
        return f64::INFINITY;
    }
    let t = m.horizon();
    let sig = m.sigma();
    let slope_min = kd * sig * crate::special::norm_pdf(0.5 * sig * t.sqrt()) / (2.0 * t.sqrt());
    -kappa * alpha / slope_min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{figure_market, MarketInputs};
    use crate::special::norm_pdf;
    use proptest::prelude::*;

    /// Textbook formula, used as an independent reference.
    fn reference_call(s: f64, k: f64, tau: f64, sigma: f64, r: f64) -> f64 {
        let sq = sigma * tau.sqrt();
        let a = ((s / k).ln() + (r + 0.5 * sigma * sigma) * tau) / sq;
        s * norm_cdf(a) - k * (-r * tau).exp() * norm_cdf(a - sq)
    }

    #[test]
    fn examples() {
        assert!((bs_call(1.2, 0.85, 0.0, 0.5, 0.01) - 0.35).abs() < 1e-15);
        assert_eq!(bs_call(1.2, 0.0, 1.0, 0.5, 0.01), 1.2);
        let (k, tau, sig, r): (f64, f64, f64, f64) = (0.85, 2.0, 0.5, 0.01);
        let kd = k * (-r * tau).exp();
        let atm = kd * (2.0 * norm_cdf(0.5 * sig * tau.sqrt()) - 1.0);
        assert!((bs_call(kd, k, tau, sig, r) - atm).abs() < 1e-14);
        // a textbook value: S=100, K=100, T=1, σ=0.2, r=0.05
        assert!((bs_call(100.0, 100.0, 1.0, 0.2, 0.05) - 10.450_583_572_185_565).abs() < 1e-10);
    }

    #[test]
    fn local_time_examples() {
        assert_eq!(expected_local_time(1.2, 0.8, 0.0, 0.5), 0.0);
        let (kd, tau, sig) = (0.83, 1.5, 0.5);
        assert!(
            (expected_local_time(kd, kd, tau, sig) - kd * (2.0 * norm_cdf(0.5 * sig * tau.sqrt()) - 1.0)).abs() < 1e-15
        );
        for sd in [0.3, 0.83, 1.2, 3.0] {
            let direct = reference_call(sd, kd, tau, sig, 0.0) - (sd - kd).max(0.0);
            assert!((expected_local_time(sd, kd, tau, sig) - direct).abs() < 1e-13);
        }
        // decays to zero with the horizon
        assert!(expected_local_time(1.0, 1.0, 1e-10, 0.5) < 1e-5);
    }

    #[test]
    fn rho_and_z_examples() {
        let m = figure_market(0.15);
        let kd = 0.85 * m.discount_horizon();
        assert_eq!(rho(&m, 2.0, kd).unwrap(), 0.0);
        let phi_t = m.phi_on_strike_line(2.0, kd).unwrap();
        assert!((z(&m, 2.0, 3.1, kd, 0.4).unwrap() + 0.4 * phi_t).abs() < 1e-15);
        assert!((z(&m, 0.0, 3.1, kd, 0.4).unwrap() - 0.3293).abs() < 5e-5);
        let flat = MarketParams::new(MarketInputs { mu: 0.01, ..m.inputs() }).unwrap();
        for t in [0.0, 0.5, 1.9] {
            let a = rho(&flat, t, kd).unwrap();
            assert!((a - expected_local_time(kd, kd, 2.0 - t, 0.5)).abs() < 1e-15);
        }
        // ρ positive and decreasing on [0, T)
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let r = rho(&m, i as f64 * 0.01, kd).unwrap();
            assert!(r > 0.0 && r < prev);
            prev = r;
        }
    }

    #[test]
    fn z_single_sign_change() {
        let m = figure_market(0.15);
        let kd = 0.85 * m.discount_horizon();
        let zs: Vec<f64> = (0..=400)
            .map(|i| z(&m, i as f64 * 0.005, 3.1, kd, 0.4).unwrap())
            .collect();
        assert!(zs[0] > 0.0 && zs[400] < 0.0);
        let changes = zs.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn local_time_matches_simulated_occupation() {
        // Tanaka: E(S_T^D − K^D)_+ − (sd − K^D)_+ from simulated terminal prices
        use crate::market::Measure;
        use crate::mc::{map_paths, Estimate, McConfig};
        use crate::par::Exec;
        let m = figure_market(0.15);
        let kd = 0.85 * m.discount_horizon();
        let cfg = McConfig::new(200_000, 1, 5);
        let xs = map_paths(
            Exec::default(),
            cfg,
            m.x0(),
            Measure::Q.level_drift(&m),
            0.0,
            2.0,
            |v| (m.price_at(v.last()) - kd).max(0.0) - (m.s0() - kd).max(0.0),
        );
        let e = Estimate::from_samples(&xs);
        let target = expected_local_time(m.s0(), kd, 2.0, 0.5);
        assert!(e.z_score(target).abs() < 3.0, "{e:?} vs {target}");
    }

    proptest! {
        #[test]
        fn put_call_parity(s in 0.01..5.0f64, k in 0.01..5.0f64, tau in 0.0..5.0f64, sig in 0.05..1.5f64, r in 0.0..0.1f64) {
            let lhs = bs_call(s, k, tau, sig, r) - bs_put(s, k, tau, sig, r);
            prop_assert!((lhs - (s - k * (-r * tau).exp())).abs() < 1e-12);
        }

        #[test]
        fn call_is_convex_and_increasing_in_spot(k in 0.2..3.0f64, tau in 0.01..3.0f64, sig in 0.05..1.0f64, r in 0.0..0.1f64) {
            let h = 0.01;
            let vals: Vec<f64> = (1..300).map(|i| bs_call(i as f64 * h, k, tau, sig, r)).collect();
            for w in vals.windows(3) {
                prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
                prop_assert!(w[1] >= w[0] - 1e-15);
            }
            let a = bs_call(1.0, k, tau, sig, r);
            let b = bs_call(1.0, k, tau, sig * 1.1, r);
            prop_assert!(b >= a - 1e-15);
        }

        #[test]
        fn discounted_call_decreases_in_time(s in 0.2..3.0f64, k in 0.2..3.0f64, sig in 0.05..1.0f64, r in 0.0..0.1f64) {
            let big_t = 2.0;
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let t = big_t * i as f64 / 40.0;
                let d = (-r * t).exp();
                let v = d * bs_call(s / d, k, big_t - t, sig, r);
                prop_assert!(v <= prev + 1e-12);
                prev = v;
            }
        }

        #[test]
        fn atm_identity_random(k in 0.1..5.0f64, tau in 0.01..5.0f64, sig in 0.05..1.5f64, r in 0.0..0.1f64) {
            let kd = k * (-r * tau).exp();
            let expect = kd * (2.0 * norm_cdf(0.5 * sig * tau.sqrt()) - 1.0);
            prop_assert!((bs_call(kd, k, tau, sig, r) - expect).abs() < 1e-10);
        }

        #[test]
        fn z_decreasing_where_positive(mu in 0.011..0.2f64, p in 0.05..0.95f64, lam in 0.0..10.0f64, alpha in 0.0..1.0f64) {
            let base = figure_market(0.1).inputs();
            let m = MarketParams::new(MarketInputs { mu, p, ..base }).unwrap();
            prop_assume!(m.z_decreasing());
            let kd = 0.85 * m.discount_horizon();
            let zs: Vec<f64> = (0..=500).map(|i| z(&m, i as f64 * 0.004, lam, kd, alpha).unwrap()).collect();
            for w in zs.windows(2) {
                if w[0] >= 0.0 && lam > 0.0 {
                    prop_assert!(w[1] < w[0]);
                }
                // once non-positive, z stays non-positive
                if w[0] <= 0.0 {
                    prop_assert!(w[1] <= 0.0);
                }
            }
        }

        #[test]
        fn z_decreasing_for_large_quantity(mu in 0.011..0.2f64, p in 0.05..0.95f64, alpha in 0.0..1.0f64, extra in 0.0..5.0f64) {
            let base = figure_market(0.1).inputs();
            let m = MarketParams::new(MarketInputs { mu, p, ..base }).unwrap();
            prop_assume!(m.z_decreasing());
            let kd = 0.85 * m.discount_horizon();
            let lam = global_decrease_threshold(&m, kd, alpha) + extra + 1e-9;
            prop_assume!(lam > 0.0);
            let mut prev = f64::INFINITY;
            for i in 0..=500 {
                let v = z(&m, i as f64 * 0.004, lam, kd, alpha).unwrap();
                prop_assert!(v < prev, "not decreasing at step {}", i);
                prev = v;
            }
        }
    }

    #[test]
    fn z_without_option_increases() {
        // λ = 0 leaves −αφ(u), increasing when φ decreases
        let m = figure_market(0.15);
        let kd = 0.85 * m.discount_horizon();
        assert!(z(&m, 1.0, 0.0, kd, 0.4).unwrap() > z(&m, 0.0, 0.0, kd, 0.4).unwrap());
        assert!(global_decrease_threshold(&m, kd, 0.4) > 0.0);
    }

    #[test]
    fn density_of_atm_factor() {
        // d/dτ of kd(2Φ(σ√τ/2) − 1) = kd σ φ(σ√τ/2)/(2√τ) > 0
        let (kd, sig, tau) = (0.8, 0.5, 1.0);
        let h = 1e-6;
        let fd = (atm_local_time(kd, tau + h, sig) - atm_local_time(kd, tau - h, sig)) / (2.0 * h);
        let exact = kd * sig * norm_pdf(0.5 * sig) / (2.0 * tau.sqrt());
        assert!((fd - exact).abs() < 1e-8);
    }
}
