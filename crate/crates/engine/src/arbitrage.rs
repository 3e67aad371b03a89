//! Static consistency of a call price curve at one maturity, explicit
//! arbitrage portfolios for each failure, and admissibility of single
//! call positions under an intrinsic-wealth constraint.
//!
//! A curve is consistent when, on the quoted strikes, `C` is convex,
//! non-increasing, non-negative, starts at `C(0) = S0` and has initial
//! slope at least `−D_T`. The last two need a quote at `K = 0`.

use crate::bs::{atm_local_time, bs_call, CallQuote};
use crate::error::{domain, Error, Result};
use crate::market::MarketParams;
use crate::payoff::{convex_minorant, CallLeg, PiecewisePayoff};
use std::fmt;

/// Call quotes at a common maturity, ascending in strike.
#[derive(Debug, Clone, PartialEq)]
pub struct CallCurve {
    quotes: Vec<CallQuote>,
    s0: f64,
    discount: f64,
}

impl CallCurve {
    /// `discount` is `D_T` for the common maturity.
    pub fn new(quotes: Vec<CallQuote>, s0: f64, discount: f64) -> Result<Self> {
        if quotes.is_empty() {
            return Err(Error::Invalid("a call curve needs at least one quote".into()));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(domain("s0", s0, "spot must be positive"));
        }
        if !(discount > 0.0 && discount <= 1.0) {
            return Err(domain("D_T", discount, "discount factor must lie in (0, 1]"));
        }
        let t = quotes[0].maturity;
        for q in &quotes {
            if !(q.strike >= 0.0 && q.strike.is_finite()) || !q.price.is_finite() {
                return Err(Error::Invalid(format!("bad quote {q:?}")));
            }
            if q.maturity != t {
                return Err(Error::Invalid("quotes must share one maturity".into()));
            }
        }
        if quotes.windows(2).any(|w| w[1].strike <= w[0].strike) {
            return Err(Error::Invalid("strikes must be strictly ascending".into()));
        }
        Ok(Self { quotes, s0, discount })
    }

    /// Black-Scholes prices at `strikes` for the market's maturity.
    pub fn black_scholes(m: &MarketParams, strikes: &[f64]) -> Result<Self> {
        let quotes = strikes
            .iter()
            .map(|&k| CallQuote {
                strike: k,
                maturity: m.horizon(),
                price: if k == 0.0 {
                    m.s0()
                } else {
                    bs_call(m.s0(), k, m.horizon(), m.sigma(), m.r())
                },
            })
            .collect();
        Self::new(quotes, m.s0(), m.discount_horizon())
    }

    pub fn quotes(&self) -> &[CallQuote] {
        &self.quotes
    }
    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Quoted price at `strike`, if any.
    pub fn price(&self, strike: f64) -> Option<f64> {
        self.quotes.iter().find(|q| q.strike == strike).map(|q| q.price)
    }

    fn tol(&self) -> f64 {
        1e-12 * self.s0
    }
}

/// The five consistency conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    Convexity,
    Monotonicity,
    SpotValue,
    Slope,
    Nonnegativity,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Convexity,
        Condition::Monotonicity,
        Condition::SpotValue,
        Condition::Slope,
        Condition::Nonnegativity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Convexity => "convexity",
            Condition::Monotonicity => "monotonicity",
            Condition::SpotValue => "spot_value",
            Condition::Slope => "slope",
            Condition::Nonnegativity => "nonnegativity",
        }
    }
}

/// A failed condition with its witnessing strikes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// `C(k2)` lies above the chord by `excess`.
    Convexity { k1: f64, k2: f64, k3: f64, excess: f64 },
    /// `C(k2) > C(k1)` with `k1 < k2`.
    Monotonicity { k1: f64, k2: f64 },
    /// `C(0) ≠ S0`.
    SpotValue { quoted: f64 },
    /// `(C(k1) − C(0))/k1 < −D_T`.
    Slope { k1: f64, slope: f64 },
    /// `C(k) < 0`.
    Nonnegativity { k: f64 },
}

impl Violation {
    pub fn condition(&self) -> Condition {
        match self {
            Violation::Convexity { .. } => Condition::Convexity,
            Violation::Monotonicity { .. } => Condition::Monotonicity,
            Violation::SpotValue { .. } => Condition::SpotValue,
            Violation::Slope { .. } => Condition::Slope,
            Violation::Nonnegativity { .. } => Condition::Nonnegativity,
        }
    }

    pub fn strikes(&self) -> Vec<f64> {
        match *self {
            Violation::Convexity { k1, k2, k3, .. } => vec![k1, k2, k3],
            Violation::Monotonicity { k1, k2 } => vec![k1, k2],
            Violation::SpotValue { .. } => vec![0.0],
            Violation::Slope { k1, .. } => vec![0.0, k1],
            Violation::Nonnegativity { k } => vec![k],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Convexity { k1, k2, k3, excess } => {
                write!(
                    f,
                    "convexity: C({k2}) exceeds the chord of C({k1}), C({k3}) by {excess:e}"
                )
            }
            Violation::Monotonicity { k1, k2 } => write!(f, "monotonicity: C({k2}) > C({k1})"),
            Violation::SpotValue { quoted } => write!(f, "spot value: C(0) = {quoted} differs from S0"),
            Violation::Slope { k1, slope } => write!(f, "slope: (C({k1}) − C(0))/{k1} = {slope} is below −D_T"),
            Violation::Nonnegativity { k } => write!(f, "nonnegativity: C({k}) < 0"),
        }
    }
}

/// Result of [`check_consistency`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
    /// Conditions that need a `K = 0` quote the curve does not have.
    pub not_checkable: Vec<Condition>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn flags(&self, c: Condition) -> bool {
        self.violations.iter().any(|v| v.condition() == c)
    }
}

/// Checks the five conditions on the quoted strikes.
///
/// Convexity uses second differences of consecutive quotes and
/// monotonicity first differences; a small round-off tolerance keeps model
/// curves clean.
pub fn check_consistency(curve: &CallCurve) -> ConsistencyReport {
    let q = &curve.quotes;
    let tol = curve.tol();
    let mut out = ConsistencyReport::default();
    for w in q.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        let lam = (c.strike - b.strike) / (c.strike - a.strike);
        let excess = b.price - lam * a.price - (1.0 - lam) * c.price;
        if excess > tol {
            out.violations.push(Violation::Convexity {
                k1: a.strike,
                k2: b.strike,
                k3: c.strike,
                excess,
            });
        }
    }
    for w in q.windows(2) {
        if w[1].price > w[0].price + tol {
            out.violations.push(Violation::Monotonicity {
                k1: w[0].strike,
                k2: w[1].strike,
            });
        }
    }
    if let Some(c0) = curve.price(0.0) {
        if (c0 - curve.s0).abs() > tol {
            out.violations.push(Violation::SpotValue { quoted: c0 });
        }
        if let Some(first) = q.iter().find(|x| x.strike > 0.0) {
            let slope = (first.price - c0) / first.strike;
            if slope < -curve.discount - tol / first.strike {
                out.violations.push(Violation::Slope {
                    k1: first.strike,
                    slope,
                });
            }
        }
    } else {
        out.not_checkable = vec![Condition::SpotValue, Condition::Slope];
    }
    for x in q {
        if x.price < -tol {
            out.violations.push(Violation::Nonnegativity { k: x.strike });
        }
    }
    out
}

/// Why the portfolio is an arbitrage.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub condition: Condition,
    pub witness: Vec<f64>,
    /// Infimum of the convex minorant of the terminal payoff. The
    /// intrinsic wealth before maturity is at least `D_T/D_t` times this,
    /// and the payoff itself at maturity dominates it.
    pub intrinsic_bound: f64,
    pub text: String,
}

/// Static portfolio: call legs, units of the asset and cash paid at `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbPortfolio {
    pub legs: Vec<CallLeg>,
    pub asset: f64,
    pub cash: f64,
    /// Initial credit from setting up the position.
    pub epsilon: f64,
    pub certificate: Certificate,
}

impl ArbPortfolio {
    pub fn payoff(&self) -> Result<PiecewisePayoff> {
        PiecewisePayoff::from_legs(&self.legs, self.asset, self.cash)
    }

    /// Multiplies every position by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain("c", c, "scale must be positive"));
        }
        let mut out = self.clone();
        for l in &mut out.legs {
            l.quantity *= c;
        }
        out.asset *= c;
        out.cash *= c;
        out.epsilon *= c;
        out.certificate.intrinsic_bound *= c;
        Ok(out)
    }

    /// Checks the certificate against the payoff and the curve.
    pub fn verify(&self, curve: &CallCurve) -> Result<bool> {
        let bound = intrinsic_bound(&self.payoff()?);
        let credit = credit(curve, &self.legs, self.asset, self.cash)?;
        let tol = 1e-10 * (1.0 + credit.abs());
        Ok(self.epsilon > 0.0
            && bound >= 0.0
            && (credit - self.epsilon).abs() <= tol
            && (bound - self.certificate.intrinsic_bound).abs() <= tol)
    }
}

/// Infimum of the convex minorant, with round-off in offsetting legs
/// (a butterfly's slopes sum to zero only up to rounding) snapped to zero.
fn intrinsic_bound(g: &PiecewisePayoff) -> f64 {
    let scale = 1.0 + g.values().iter().fold(g.left_value().abs(), |a, v| a.max(v.abs()));
    let eps = 1e-12 * scale;
    let slope = if g.terminal_slope().abs() <= eps {
        0.0
    } else {
        g.terminal_slope()
    };
    let clean = PiecewisePayoff::new(g.breakpoints().to_vec(), g.values().to_vec(), g.left_value(), slope)
        .expect("same vertices as a valid payoff");
    match convex_minorant(&clean).infimum() {
        Some(b) if b.abs() <= eps => 0.0,
        Some(b) => b,
        None => f64::NEG_INFINITY,
    }
}

/// Money received for the position at the curve's prices.
fn credit(curve: &CallCurve, legs: &[CallLeg], asset: f64, cash: f64) -> Result<f64> {
    let mut cost = asset * curve.s0 + cash * curve.discount;
    for l in legs {
        let p = curve
            .price(l.strike)
            .ok_or_else(|| Error::Invalid(format!("no quote at strike {}", l.strike)))?;
        cost += l.quantity * p;
    }
    Ok(-cost)
}

/// Builds the arbitrage portfolio for a reported violation.
///
/// Convexity gives the butterfly `(λ, −1, 1−λ)`; monotonicity the call
/// spread long `k1` short `k2`; a wrong `C(0)` trades the zero-strike call
/// against the asset; a steep initial slope sells the zero-strike call (the
/// asset), buys the `k1` call and holds `D_T k1` in cash; a negative quote
/// is bought outright.
pub fn construct_arbitrage(curve: &CallCurve, v: &Violation) -> Result<ArbPortfolio> {
    let leg = |strike: f64, quantity: f64| CallLeg { strike, quantity };
    let (legs, asset, cash) = match *v {
        Violation::Convexity { k1, k2, k3, .. } => {
            let lam = (k3 - k2) / (k3 - k1);
            (vec![leg(k1, lam), leg(k2, -1.0), leg(k3, 1.0 - lam)], 0.0, 0.0)
        }
        Violation::Monotonicity { k1, k2 } => (vec![leg(k1, 1.0), leg(k2, -1.0)], 0.0, 0.0),
        Violation::SpotValue { quoted } => {
            if quoted > curve.s0 {
                (vec![leg(0.0, -1.0)], 1.0, 0.0)
            } else {
                (vec![leg(0.0, 1.0)], -1.0, 0.0)
            }
        }
        Violation::Slope { k1, .. } => (vec![leg(0.0, -1.0), leg(k1, 1.0)], 0.0, k1),
        Violation::Nonnegativity { k } => (vec![leg(k, 1.0)], 0.0, 0.0),
    };
    let epsilon = credit(curve, &legs, asset, cash)?;
    let payoff = PiecewisePayoff::from_legs(&legs, asset, cash)?;
    let bound = intrinsic_bound(&payoff);
    if !(epsilon > 0.0) || bound < 0.0 {
        return Err(Error::Invalid(format!("{v} does not hold on this curve")));
    }
    let text = format!("{v}; credit {epsilon:e}; payoff convex minorant bounded below by {bound}");
    Ok(ArbPortfolio {
        legs,
        asset,
        cash,
        epsilon,
        certificate: Certificate {
            condition: v.condition(),
            witness: v.strikes(),
            intrinsic_bound: bound,
            text,
        },
    })
}

/// Copy of `curve` with one condition broken by roughly `size`.
///
/// `pick` selects the affected quote among the eligible ones. Spot value
/// and slope need a `K = 0` quote; convexity needs three quotes.
pub fn inject_violation(curve: &CallCurve, c: Condition, size: f64, pick: usize) -> Result<CallCurve> {
    let mut q = curve.quotes.clone();
    let n = q.len();
    let has_zero = q[0].strike == 0.0;
    let first = usize::from(has_zero);
    match c {
        Condition::Convexity => {
            if n < 3 {
                return Err(Error::Invalid("convexity needs three quotes".into()));
            }
            let j = 1 + pick % (n - 2);
            let lam = (q[j + 1].strike - q[j].strike) / (q[j + 1].strike - q[j - 1].strike);
            q[j].price = lam * q[j - 1].price + (1.0 - lam) * q[j + 1].price + size;
        }
        Condition::Monotonicity => {
            if n < 2 {
                return Err(Error::Invalid("monotonicity needs two quotes".into()));
            }
            let j = pick % (n - 1);
            q[j + 1].price = q[j].price + size;
        }
        Condition::SpotValue => {
            if !has_zero {
                return Err(Error::Invalid("spot value needs a zero-strike quote".into()));
            }
            q[0].price = curve.s0 + if pick % 2 == 0 { size } else { -size };
        }
        Condition::Slope => {
            if !has_zero || n < 2 {
                return Err(Error::Invalid("slope needs a zero-strike quote and another".into()));
            }
            q[1].price = q[0].price - curve.discount * q[1].strike - size;
        }
        Condition::Nonnegativity => {
            let j = first + pick % (n - first);
            q[j].price = -size;
        }
    }
    CallCurve::new(q, curve.s0, curve.discount)
}

/// Long or short a single call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Long,
    Short,
}

/// Outcome of an admissibility test; `slack` is left minus right side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub pass: bool,
    pub slack: f64,
}

/// Whether one call bought or sold at `c0` keeps intrinsic wealth above
/// `−α`, with `ΔC = C^BS(K) − c0`:
/// long needs `w0 + ΔC ≥ C^BS(K D_T; K) − α`, short needs
/// `w0 + α − ΔC ≥ K D_T`.
pub fn call_admissibility(dir: Direction, strike: f64, c0: f64, m: &MarketParams) -> Result<Admissibility> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(domain("K", strike, "strike must be positive"));
    }
    let kd = strike * m.discount_horizon();
    let dc = bs_call(m.s0(), strike, m.horizon(), m.sigma(), m.r()) - c0;
    let (w0, alpha) = (m.w0(), m.alpha());
    let (lhs, rhs) = match dir {
        Direction::Long => (w0 + dc, atm_local_time(kd, m.horizon(), m.sigma()) - alpha),
        Direction::Short => (w0 + alpha - dc, kd),
    };
    let slack = lhs - rhs;
    Ok(Admissibility {
        pass: slack >= -1e-12 * (1.0 + lhs.abs() + rhs.abs()),
        slack,
    })
}

/// `(K+, K−)`: the largest strike whose call can be held, and the
/// largest that can be written, at fair prices with wealth `w0 + α`.
pub fn critical_strikes(w0: f64, alpha: f64, m: &MarketParams) -> Result<(f64, f64)> {
    let budget = w0 + alpha;
    if !(budget > 0.0) {
        return Err(domain("w0+alpha", budget, "critical strikes need positive w0 + alpha"));
    }
    let dt = m.discount_horizon();
    let factor = atm_local_time(1.0, m.horizon(), m.sigma());
    Ok((budget / dt / factor, budget / dt))
}
