//! The Black-Scholes-Merton market: discounting, the state-price density,
//! the measure change to `Q̄` and the `φ` process.
//!
//! Prices are often handled in *level* coordinates `X = ln(S^D)/σ`, where
//! `S^D = D_t S_t` is the discounted price. Under every measure considered
//! `X` is a unit-variance Brownian motion with constant drift, so
//! first-passage problems against the discounted strike or barrier become
//! flat-boundary problems.

use crate::error::{domain, Error, Result};

/// Relative risk aversion `p ∈ (0, 1)` of the power utility
/// `u_p(x) = x^{1-p}/(1-p)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RiskAversion(f64);

impl RiskAversion {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(domain("p", p, "risk aversion must lie in (0, 1)"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A deterministic, decreasing discount curve with `D_0 = 1`.
pub trait DiscountCurve {
    fn discount(&self, t: f64) -> f64;
}

/// `D_t = e^{-rt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRate(pub f64);

impl DiscountCurve for ConstantRate {
    fn discount(&self, t: f64) -> f64 {
        (-self.0 * t).exp()
    }
}

/// Raw parameters, validated by [`MarketParams::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketInputs {
    pub s0: f64,
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub p: f64,
    pub w0: f64,
    pub alpha: f64,
}

/// Validated market and investor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    s0: f64,
    mu: f64,
    r: f64,
    sigma: f64,
    horizon: f64,
    p: RiskAversion,
    w0: f64,
    alpha: f64,
}

/// Probability measures used by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// The real-world measure.
    P,
    /// The risk-neutral measure, under which `S^D` is a martingale.
    Q,
    /// The power-utility measure `dQ̄ = ξ_T H_T dP`.
    QBar,
}

impl Measure {
    /// Slope `β` of the line `y + βt` met by `x + W_t` when the discounted
    /// price reaches a fixed level, `W` being this measure's Brownian
    /// motion. Equivalently `-β` is the drift of `X = ln(S^D)/σ`.
    pub fn beta(self, m: &MarketParams) -> f64 {
        let half = 0.5 * m.sigma;
        match self {
            Measure::Q => half,
            Measure::QBar => half - m.theta() / m.p(),
            Measure::P => half - m.theta(),
        }
    }

    pub fn level_drift(self, m: &MarketParams) -> f64 {
        -self.beta(m)
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::P => "P",
            Measure::Q => "Q",
            Measure::QBar => "Qbar",
        }
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p" => Ok(Measure::P),
            "q" => Ok(Measure::Q),
            "qbar" | "q_bar" | "q-bar" => Ok(Measure::QBar),
            _ => Err(Error::Invalid(format!("unknown measure `{s}`"))),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(name, v, "must be positive and finite"))
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(domain(name, v, "must be non-negative and finite"))
    }
}

impl MarketParams {
    pub fn new(i: MarketInputs) -> Result<Self> {
        let m = Self {
            s0: positive("s0", i.s0)?,
            mu: if i.mu.is_finite() {
                i.mu
            } else {
                return Err(domain("mu", i.mu, "must be finite"));
            },
            r: nonneg("r", i.r)?,
            sigma: positive("sigma", i.sigma)?,
            horizon: positive("T", i.horizon)?,
            p: RiskAversion::new(i.p)?,
            w0: nonneg("w0", i.w0)?,
            alpha: nonneg("alpha", i.alpha)?,
        };
        if !m.theta().is_finite() {
            return Err(domain("theta", m.theta(), "Sharpe ratio must be finite"));
        }
        Ok(m)
    }

    pub fn inputs(&self) -> MarketInputs {
        MarketInputs {
            s0: self.s0,
            mu: self.mu,
            r: self.r,
            sigma: self.sigma,
            horizon: self.horizon,
            p: self.p.get(),
            w0: self.w0,
            alpha: self.alpha,
        }
    }

    pub fn with_w0(&self, w0: f64) -> Result<Self> {
        Self::new(MarketInputs { w0, ..self.inputs() })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(MarketInputs { alpha, ..self.inputs() })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn p(&self) -> f64 {
        self.p.get()
    }
    pub fn w0(&self) -> f64 {
        self.w0
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Sharpe ratio `θ = (μ − r)/σ`.
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// True when `θ > 0` and `pσ > θ`, the regime in which `z(·;λ)` is
    /// strictly decreasing and the closed-form solution applies.
    pub fn z_decreasing(&self) -> bool {
        let th = self.theta();
        th > 0.0 && self.p() * self.sigma > th
    }

    pub fn curve(&self) -> ConstantRate {
        ConstantRate(self.r)
    }

    /// `D_t = e^{-rt}` for `t ∈ [0, T]`.
    pub fn discount(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.curve().discount(t))
    }

    /// `D_T`.
    pub fn discount_horizon(&self) -> f64 {
        self.curve().discount(self.horizon)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        // admit a sliver of round-off past T from accumulated grids
        if (0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            Ok(())
        } else {
            Err(domain("t", t, "time must lie in [0, T]"))
        }
    }

    /// `E_P[H_T^q] = exp{q²θ²T/2 − q(θ²/2 + r)T}`.
    pub fn spd_moment(&self, q: f64) -> f64 {
        let th2 = self.theta().powi(2);
        let t = self.horizon;
        (0.5 * q * q * th2 * t - q * (0.5 * th2 + self.r) * t).exp()
    }

    /// `c_p = (E_P[H_T^{1-1/p}])^p`.
    pub fn cp(&self) -> f64 {
        let p = self.p();
        self.spd_moment(1.0 - 1.0 / p).powf(p)
    }

    /// State-price density `H_t = exp{−θB_t − (θ²/2 + r)t}` given the
    /// real-world Brownian value `b = B_t`.
    pub fn state_price_density(&self, t: f64, b: f64) -> f64 {
        let th = self.theta();
        (-th * b - (0.5 * th * th + self.r) * t).exp()
    }

    /// Level coordinate `ln(S^D)/σ` of a discounted price.
    pub fn level(&self, sd: f64) -> f64 {
        sd.ln() / self.sigma
    }

    /// Discounted price at a level coordinate.
    pub fn price_at(&self, level: f64) -> f64 {
        (self.sigma * level).exp()
    }

    /// Level coordinate of the initial price.
    pub fn x0(&self) -> f64 {
        self.level(self.s0)
    }

    /// `φ_t = ξ_t^{-1} D_t^{-1} = exp{−(θ/p)B^Q_t + θ²t/(2p²)}` written as
    /// a function of time and level, using `B^Q_t = X_t − x0 + σt/2`.
    pub fn phi_level(&self, t: f64, level: f64) -> f64 {
        let th = self.theta();
        let p = self.p();
        let bq = level - self.x0() + 0.5 * self.sigma * t;
        (-(th / p) * bq + th * th * t / (2.0 * p * p)).exp()
    }

    /// `φ_t` as a function of time and discounted spot.
    pub fn phi(&self, t: f64, sd: f64) -> f64 {
        self.phi_level(t, self.level(sd))
    }

    /// `φ(t) = (S0/K^D)^{θ/(σp)} exp{(θ/2p²)(θ − σp)t}`, the value of `φ_t`
    /// on the line `S^D_t = K^D`.
    pub fn phi_on_strike_line(&self, t: f64, kd: f64) -> Result<f64> {
        self.check_time(t)?;
        if !(kd > 0.0) {
            return Err(domain("Kd", kd, "discounted strike must be positive"));
        }
        let th = self.theta();
        let p = self.p();
        let sig = self.sigma;
        Ok((self.s0 / kd).powf(th / (sig * p)) * ((th / (2.0 * p * p)) * (th - sig * p) * t).exp())
    }

    /// Power utility `u_p(x) = x^{1-p}/(1-p)`; negative wealth is an error.
    pub fn utility(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(domain("wealth", x, "power utility needs non-negative wealth"));
        }
        Ok(power_utility(x, self.p()))
    }

    /// Deterministic wealth whose objective value `c_p·u_p(w)` equals `u`.
    pub fn certainty_equivalent(&self, u: f64) -> Result<f64> {
        if u < 0.0 || !u.is_finite() {
            return Err(domain("utility", u, "outside the range of c_p·u_p"));
        }
        let p = self.p();
        Ok(((1.0 - p) * u / self.cp()).powf(1.0 / (1.0 - p)))
    }
}

pub(crate) fn power_utility(x: f64, p: f64) -> f64 {
    x.max(0.0).powf(1.0 - p) / (1.0 - p)
}

#[cfg(test)]
pub(crate) fn figure_market(w0: f64) -> MarketParams {
    MarketParams::new(MarketInputs {
        s0: 1.2,
        mu: 0.035,
        r: 0.01,
        sigma: 0.5,
        horizon: 2.0,
        p: 0.75,
        w0,
        alpha: 0.4,
    })
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn market(mu: f64, r: f64) -> MarketParams {
        MarketParams::new(MarketInputs {
            mu,
            r,
            ..figure_market(0.1).inputs()
        })
        .unwrap()
    }

    #[test]
    fn validation() {
        let base = figure_market(0.1).inputs();
        assert!(MarketParams::new(MarketInputs { sigma: 0.0, ..base }).is_err());
        assert!(MarketParams::new(MarketInputs { p: 1.0, ..base }).is_err());
        assert!(MarketParams::new(MarketInputs { horizon: -1.0, ..base }).is_err());
        assert!(MarketParams::new(MarketInputs { mu: f64::NAN, ..base }).is_err());
        assert!(MarketParams::new(base).is_ok());
    }

    #[test]
    fn discount_examples() {
        let m = figure_market(0.1);
        assert_eq!(m.discount(0.0).unwrap(), 1.0);
        assert!((m.discount(2.0).unwrap() - (-0.02f64).exp()).abs() < 1e-16);
        assert!(m.discount(2.5).is_err());
        assert!(m.discount(-0.1).is_err());
        let flat = market(0.035, 0.0);
        assert_eq!(flat.discount(1.3).unwrap(), 1.0);
    }

    #[test]
    fn theta_and_regime() {
        let m = figure_market(0.1);
        assert!((m.theta() - 0.05).abs() < 1e-15);
        assert!(m.z_decreasing());
        assert!(!market(0.01, 0.01).z_decreasing());
        // pσ = 0.375 < θ = 0.4
        assert!(!market(0.21, 0.01).z_decreasing());
    }

    #[test]
    fn spd_moment_examples() {
        let m = figure_market(0.1);
        assert_eq!(m.spd_moment(0.0), 1.0);
        assert!((m.spd_moment(1.0) - (-0.02f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cp_examples() {
        let m = market(0.0, 0.0);
        assert_eq!(m.cp(), 1.0);
        let m = market(0.03, 0.03);
        let p = m.p();
        assert!((m.cp() - (-0.03 * 2.0 * (p - 1.0)).exp()).abs() < 1e-14);
        assert!((figure_market(0.1).cp() - 1.005_85).abs() < 1e-5);
    }

    #[test]
    fn phi_examples() {
        let m = figure_market(0.1);
        let kd = 0.85 * m.discount_horizon();
        assert!((m.phi_on_strike_line(0.0, kd).unwrap() - (1.2 / kd).powf(0.05 / 0.375)).abs() < 1e-15);
        assert!(m.phi_on_strike_line(0.5, 0.0).is_err());
        for t in [0.0, 0.7, 2.0] {
            // the line formula is the process evaluated on the line
            let a = m.phi_on_strike_line(t, kd).unwrap();
            assert!((a - m.phi(t, kd)).abs() < 1e-13 * a);
        }
        let zero = market(0.01, 0.01);
        assert_eq!(zero.phi_on_strike_line(1.1, kd).unwrap(), 1.0);
        assert_eq!(m.phi_level(0.0, m.x0()), 1.0);
    }

    #[test]
    fn measure_betas() {
        let m = figure_market(0.1);
        assert_eq!(Measure::Q.beta(&m), 0.25);
        assert!((Measure::QBar.beta(&m) - (0.25 - 0.05 / 0.75)).abs() < 1e-15);
        assert!((Measure::P.beta(&m) - 0.2).abs() < 1e-15);
        assert_eq!("qbar".parse::<Measure>().unwrap(), Measure::QBar);
        assert!("R".parse::<Measure>().is_err());
    }

    #[test]
    fn utility_and_ce_invert() {
        let m = figure_market(0.1);
        for w in [0.0, 0.01, 0.3, 2.5] {
            let u = m.cp() * m.utility(w).unwrap();
            assert!((m.certainty_equivalent(u).unwrap() - w).abs() < 1e-13);
        }
        assert!(m.utility(-0.1).is_err());
        assert!(m.certainty_equivalent(-1.0).is_err());
        let half = MarketParams::new(MarketInputs { p: 0.5, ..m.inputs() }).unwrap();
        let ce = half.certainty_equivalent(1.0).unwrap();
        assert!((half.certainty_equivalent(2.0).unwrap() / ce - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn discount_is_nonincreasing(r in 0.0..0.2f64, a in 0.0..2.0f64, b in 0.0..2.0f64) {
            let m = market(r + 0.02, r);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(m.discount(hi).unwrap() <= m.discount(lo).unwrap());
            prop_assert_eq!(m.discount(0.0).unwrap(), 1.0);
        }

        #[test]
        fn spd_moment_is_log_convex(q in -3.0..3.0f64, h in 0.01..1.0f64) {
            let m = figure_market(0.1);
            let mid = m.spd_moment(q).ln();
            let avg = 0.5 * (m.spd_moment(q - h).ln() + m.spd_moment(q + h).ln());
            prop_assert!(avg >= mid - 1e-12);
        }

        #[test]
        fn phi_line_is_log_linear(mu in -0.2..0.4f64, t in 0.0..2.0f64) {
            let m = market(mu, 0.01);
            let kd = 0.85 * m.discount_horizon();
            let f = |t: f64| m.phi_on_strike_line(t, kd).unwrap().ln();
            let slope = (f(2.0) - f(0.0)) / 2.0;
            prop_assert!((f(t) - (f(0.0) + slope * t)).abs() < 1e-12);
            let th = m.theta();
            let expect = th * (th - m.sigma() * m.p());
            prop_assert!(slope == 0.0 || slope.signum() == expect.signum());
        }
    }
}
