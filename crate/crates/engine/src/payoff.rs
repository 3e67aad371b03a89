//! Piecewise-linear European payoffs and intrinsic values.
//!
//! The intrinsic value of a payoff is its worst-case mark-to-market value:
//! the largest amount that can be guaranteed by sub-replication under any
//! model. For a European payoff `h(S_T)` it is
//! `D_t^{-1} D_T h*(D_T^{-1} D_t S_t)` before maturity, where `h*` is the
//! greatest convex minorant of `h` on `[0, ∞)`, and `h(S_T)` at maturity.

use crate::error::{domain, Error, Result};
use crate::market::MarketParams;

/// A continuous piecewise-linear function on `[0, ∞)`.
///
/// It is linear between `(0, left_value)` and the breakpoints
/// `(k_i, v_i)`, and continues with `terminal_slope` after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePayoff {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_value: f64,
    terminal_slope: f64,
}

/// A call leg: `quantity` calls struck at `strike`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallLeg {
    pub strike: f64,
    pub quantity: f64,
}

impl PiecewisePayoff {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, left_value: f64, terminal_slope: f64) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::Invalid("breakpoints and values differ in length".into()));
        }
        if !left_value.is_finite() || !terminal_slope.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("payoff values must be finite".into()));
        }
        if breakpoints.iter().any(|k| !(*k >= 0.0) || !k.is_finite()) {
            return Err(Error::Invalid("breakpoints must be finite and non-negative".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("breakpoints must be strictly ascending".into()));
        }
        let (mut breakpoints, mut values) = (breakpoints, values);
        if breakpoints.first() == Some(&0.0) {
            if values[0] != left_value {
                return Err(Error::Invalid(
                    "value at a zero breakpoint must equal left_value".into(),
                ));
            }
            breakpoints.remove(0);
            values.remove(0);
        }
        Ok(Self {
            breakpoints,
            values,
            left_value,
            terminal_slope,
        })
    }

    /// Builds `cash + asset·x + Σ q_i (x − K_i)_+`.
    pub fn from_legs(calls: &[CallLeg], asset: f64, cash: f64) -> Result<Self> {
        let mut strikes: Vec<f64> = Vec::new();
        for c in calls {
            if !(c.strike >= 0.0) || !c.strike.is_finite() || !c.quantity.is_finite() {
                return Err(Error::Invalid(format!("bad call leg {c:?}")));
            }
            if c.strike > 0.0 {
                strikes.push(c.strike);
            }
        }
        strikes.sort_by(f64::total_cmp);
        strikes.dedup();
        let eval = |x: f64| cash + asset * x + calls.iter().map(|c| c.quantity * (x - c.strike).max(0.0)).sum::<f64>();
        let values = strikes.iter().map(|&k| eval(k)).collect();
        let slope = asset + calls.iter().map(|c| c.quantity).sum::<f64>();
        Self::new(strikes, values, cash, slope)
    }

    pub fn call(strike: f64) -> Result<Self> {
        Self::from_legs(&[CallLeg { strike, quantity: 1.0 }], 0.0, 0.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn left_value(&self) -> f64 {
        self.left_value
    }
    pub fn terminal_slope(&self) -> f64 {
        self.terminal_slope
    }

    /// Multiplies the payoff by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
            left_value: self.left_value * c,
            terminal_slope: self.terminal_slope * c,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ks = &self.breakpoints;
        if ks.is_empty() {
            return self.left_value + self.terminal_slope * x;
        }
        let n = ks.len();
        if x >= ks[n - 1] {
            return self.values[n - 1] + self.terminal_slope * (x - ks[n - 1]);
        }
        let i = ks.partition_point(|&k| k <= x);
        let (x0, y0) = if i == 0 {
            (0.0, self.left_value)
        } else {
            (ks[i - 1], self.values[i - 1])
        };
        let (x1, y1) = (ks[i], self.values[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.left_value))
            .chain(self.breakpoints.iter().copied().zip(self.values.iter().copied()))
            .collect()
    }

    /// True when the slopes never decrease.
    pub fn is_convex(&self) -> bool {
        let mut slopes: Vec<f64> = self
            .vertices()
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        slopes.push(self.terminal_slope);
        slopes.windows(2).all(|w| w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()))
    }

    /// Infimum over `[0, ∞)`; `None` when it is `−∞`.
    pub fn infimum(&self) -> Option<f64> {
        if self.terminal_slope < 0.0 {
            return None;
        }
        let v = self.vertices().iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        Some(v)
    }
}

/// Greatest convex minorant of `h` on `[0, ∞)`.
///
/// Lower convex hull of the vertices, cut where the hull slope would exceed
/// the terminal slope; from there the minorant runs with the terminal slope.
pub fn convex_minorant(h: &PiecewisePayoff) -> PiecewisePayoff {
    let pts = h.vertices();
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b unless it lies strictly below the chord a→p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let s = h.terminal_slope;
    let mut end = hull.len() - 1;
    for j in 0..hull.len() - 1 {
        let m = (hull[j + 1].1 - hull[j].1) / (hull[j + 1].0 - hull[j].0);
        if m > s {
            end = j;
            break;
        }
    }
    let kept = &hull[1..=end];
    PiecewisePayoff {
        breakpoints: kept.iter().map(|p| p.0).collect(),
        values: kept.iter().map(|p| p.1).collect(),
        left_value: hull[0].1,
        terminal_slope: s,
    }
}

fn check_spot(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(domain("s", s, "spot must be non-negative"))
    }
}

/// Intrinsic value at time `t` of `h(S_T)` given spot `s`.
pub fn intrinsic_european(h: &PiecewisePayoff, m: &MarketParams, t: f64, s: f64) -> Result<f64> {
    intrinsic_european_maturing(h, m, m.horizon(), t, s, s)
}

/// Intrinsic value at `t` of `h(S_{T'})` for a maturity `T' ≤ T`.
///
/// Before `T'` this is the European formula with `T'` in place of `T`.
/// From `T'` on the payoff is known, and its value is frozen in discounted
/// terms: `D_t^{-1} D_{T'} h(S_{T'})`. `s_mat` is the spot observed at `T'`
/// and is ignored when `t < T'`.
pub fn intrinsic_european_maturing(
    h: &PiecewisePayoff,
    m: &MarketParams,
    maturity: f64,
    t: f64,
    s: f64,
    s_mat: f64,
) -> Result<f64> {
    m.check_time(t)?;
    m.check_time(maturity)?;
    check_spot(s)?;
    let dt = m.discount(t)?;
    let dm = m.discount(maturity)?;
    if t < maturity {
        let hs = convex_minorant(h);
        Ok(dm / dt * hs.eval(dt / dm * s))
    } else {
        check_spot(s_mat)?;
        Ok(dm / dt * h.eval(s_mat))
    }
}

/// Long or short position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Long,
    Short,
}

/// Barrier-monitoring state of a one-touch option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneTouchState {
    pub barrier: f64,
    pub hit: bool,
    pub hit_time: Option<f64>,
}

impl OneTouchState {
    pub fn new(barrier: f64, hit_time: Option<f64>) -> Result<Self> {
        if !(barrier > 0.0) {
            return Err(domain("B", barrier, "barrier must be positive"));
        }
        Ok(Self {
            barrier,
            hit: hit_time.is_some(),
            hit_time,
        })
    }
}

/// Intrinsic value of a long or short one-touch paying 1 at `T` if the
/// running maximum reaches the barrier.
///
/// Long: the indicator of a hit, worth `D_T/D_t` before maturity. Short:
/// `−S_t/B` before a hit and `−D_T/D_t` after it. With `r = 0` these are
/// `1_{hit}`, `−S_t/B` and `−1`.
pub fn intrinsic_onetouch(side: Side, state: &OneTouchState, m: &MarketParams, t: f64, s: f64) -> Result<f64> {
    m.check_time(t)?;
    check_spot(s)?;
    if let Some(h) = state.hit_time {
        if h > t {
            return Err(domain("hit_time", h, "hit recorded after the valuation time"));
        }
    }
    let carry = m.discount_horizon() / m.discount(t)?;
    let at_maturity = t >= m.horizon();
    Ok(match (side, state.hit) {
        (Side::Long, true) => {
            if at_maturity {
                1.0
            } else {
                carry
            }
        }
        (Side::Long, false) => 0.0,
        (Side::Short, true) => {
            if at_maturity {
                -1.0
            } else {
                -carry
            }
        }
        (Side::Short, false) => {
            if at_maturity {
                0.0
            } else {
                -s / state.barrier
            }
        }
    })
}

/// Discounted intrinsic value `D_t In_t(C̃⁰ − C⁰)` of the Hobson
/// superhedge minus the one-touch it covers: zero before the barrier is
/// hit and `(K^D − D_t s)_+/(B − K)` afterwards.
pub fn intrinsic_hobson_package(m: &MarketParams, t: f64, s: f64, state: &OneTouchState, strike: f64) -> Result<f64> {
    m.check_time(t)?;
    check_spot(s)?;
    let b = state.barrier;
    if !(strike > 0.0 && strike < b) {
        return Err(domain("K", strike, "hedge strike must lie in (0, B)"));
    }
    if !state.hit {
        return Ok(0.0);
    }
    let kd = strike * m.discount_horizon();
    Ok((kd - m.discount(t)? * s).max(0.0) / (b - strike))
}
