//! Short one-touch option with barrier `B`, hedged either semi-statically
//! with `1/(B−K)` calls struck at `K` (the Hobson superhedge) or by
//! dynamic trading alone, compared with not selling at all.
//!
//! The barrier is monitored on the discounted price: the option is hit
//! when `S^D` reaches `B^D = B·D_T`, which makes every boundary a straight
//! line in Brownian coordinates.
//!
//! Each hedging mode reduces to the law of a non-negative random variable
//! `G = sup J` under `Q̄`. Its excess function `h(c) = E[(G − c)_+]` gives
//! the budget equation `c + h(c) = w0 + premium` for the wealth floor, and
//! the optimal utility is `c_p E[u_p(G ∨ M)]`. For the semi-static hedge
//! `h` has a two-stage integral form; for the dynamic hedge it comes from
//! lattice Snell envelopes on a grid of floors.

use crate::bs::{atm_local_time, bs_call, bs_put, expected_local_time};
use crate::error::{domain, Error, Result};
use crate::lattice::{aligned_grid, snell_sweep, snell_value, Edge, GridShape, LatticeProcessSpec};
use crate::market::{power_utility, MarketParams, Measure};
use crate::maxplus::{CallPosition, CallProblem};
use crate::mc::{Estimate, McConfig};
use crate::par::{self, Exec};
use crate::passage::{
    gamma1_raw, gamma2_raw, gaussian_exp_integral, hit_probability_raw, mc_passage_times, LineBoundary,
};
use crate::quad::{brent, golden_min, integrate, integrate_sqrt_left, QuadOptions};
use crate::table::{Cell, ResultTable};
use std::fmt;
use std::str::FromStr;

const QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-12,
    max_intervals: 4000,
};

/// Barrier, hedge strike and the premium received above the replication
/// price. Initial wealth and the constraint level come from the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneTouchSpec {
    barrier: f64,
    strike: f64,
    premium: f64,
}

impl OneTouchSpec {
    pub fn new(barrier: f64, strike: f64, premium: f64) -> Result<Self> {
        if !(barrier.is_finite() && barrier > 0.0) {
            return Err(domain("B", barrier, "barrier must be positive"));
        }
        if !(strike > 0.0 && strike < barrier) {
            return Err(domain("K", strike, "hedge strike must lie in (0, B)"));
        }
        if !(premium >= 0.0 && premium.is_finite()) {
            return Err(domain("premium", premium, "premium must be non-negative"));
        }
        Ok(Self {
            barrier,
            strike,
            premium,
        })
    }

    pub fn barrier(&self) -> f64 {
        self.barrier
    }
    pub fn strike(&self) -> f64 {
        self.strike
    }
    pub fn premium(&self) -> f64 {
        self.premium
    }

    pub fn with_strike(&self, strike: f64) -> Result<Self> {
        Self::new(self.barrier, strike, self.premium)
    }

    /// `B − K`.
    fn width(&self) -> f64 {
        self.barrier - self.strike
    }
}

/// How the short one-touch is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HedgeMode {
    SemiStatic,
    DynamicOnly,
    NoSale,
}

impl HedgeMode {
    pub const ALL: [HedgeMode; 3] = [HedgeMode::SemiStatic, HedgeMode::DynamicOnly, HedgeMode::NoSale];

    pub fn name(self) -> &'static str {
        match self {
            HedgeMode::SemiStatic => "semi_static",
            HedgeMode::DynamicOnly => "dynamic_only",
            HedgeMode::NoSale => "no_sale",
        }
    }
}

impl fmt::Display for HedgeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HedgeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "semi_static" | "semistatic" => Ok(HedgeMode::SemiStatic),
            "dynamic_only" | "dynamic" => Ok(HedgeMode::DynamicOnly),
            "no_sale" | "none" => Ok(HedgeMode::NoSale),
            _ => Err(Error::Invalid(format!("unknown hedge mode `{s}`"))),
        }
    }
}

/// `C̃⁰_T − C⁰_T`: the superhedge minus the one-touch payoff,
/// `(S_T−K)_+/(B−K)` without a hit and `(K−S_T)_+/(B−K)` after one.
pub fn hobson_payoff(s_t: f64, hit: bool, spec: &OneTouchSpec) -> Result<f64> {
    if !(s_t >= 0.0) {
        return Err(domain("S_T", s_t, "terminal spot must be non-negative"));
    }
    let k = spec.strike;
    Ok(if hit { (k - s_t).max(0.0) } else { (s_t - k).max(0.0) } / spec.width())
}

fn levels(m: &MarketParams, barrier: f64) -> Result<(f64, f64)> {
    if !(barrier > 0.0 && barrier.is_finite()) {
        return Err(domain("B", barrier, "barrier must be positive"));
    }
    Ok((m.x0(), m.level(barrier * m.discount_horizon())))
}

/// `D_T·Q(H_B ≤ T)` from the closed-form passage probability with
/// `β = σ/2`; `D_T` when the barrier is already touched.
pub fn onetouch_price(m: &MarketParams, barrier: f64) -> Result<f64> {
    let (x, yb) = levels(m, barrier)?;
    let dt = m.discount_horizon();
    if yb <= x {
        return Ok(dt);
    }
    Ok(dt * hit_probability_raw(yb - x, Measure::Q.beta(m), m.horizon()))
}

/// Same price from quadrature of the passage density.
pub fn onetouch_price_integral(m: &MarketParams, barrier: f64) -> Result<f64> {
    let (x, yb) = levels(m, barrier)?;
    let dt = m.discount_horizon();
    if yb <= x {
        return Ok(dt);
    }
    let beta = Measure::Q.beta(m);
    let p = integrate_sqrt_left(|u| gamma1_raw(u, yb - x, beta), 0.0, m.horizon(), QUAD)?;
    Ok(dt * p)
}

/// Same price by simulation of bridge-corrected passage times.
pub fn onetouch_price_mc(m: &MarketParams, barrier: f64, cfg: McConfig, exec: Exec) -> Result<Estimate> {
    let (x, yb) = levels(m, barrier)?;
    let dt = m.discount_horizon();
    if yb <= x {
        return Ok(Estimate { mean: dt, std_err: 0.0 });
    }
    let b = LineBoundary::new(x, yb, Measure::Q.beta(m))?;
    let t = m.horizon();
    let pay: Vec<f64> = mc_passage_times(&b, t, cfg, exec)?
        .into_iter()
        .map(|h| if h <= t { dt } else { 0.0 })
        .collect();
    Ok(Estimate::from_samples(&pay))
}

/// `φ_Q(u) = K^D(2Φ(σ√(T−u)/2) − 1)/(B−K) − α`, the value of the
/// post-hit put leg on the strike line, net of the constraint.
pub fn varphi_q(m: &MarketParams, spec: &OneTouchSpec, u: f64) -> Result<f64> {
    m.check_time(u)?;
    let kd = spec.strike * m.discount_horizon();
    Ok(atm_local_time(kd, m.horizon() - u, m.sigma()) / spec.width() - m.alpha())
}

/// Strike minimising the cost `C(K)/(B−K)` of the static call leg.
pub fn hobson_optimal_strike(m: &MarketParams, barrier: f64) -> Result<f64> {
    if !(barrier > m.s0()) {
        return Err(domain("B", barrier, "barrier must exceed the spot"));
    }
    let cost = |k: f64| bs_call(m.s0(), k, m.horizon(), m.sigma(), m.r()) / (barrier - k);
    Ok(golden_min(cost, 1e-3 * barrier, barrier * (1.0 - 1e-9), 1e-6 * barrier))
}

/// Discounted-unit quantities shared by the hedge modes.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    x0: f64,
    yb: f64,
    yk: f64,
    kd: f64,
    bd: f64,
    dt: f64,
    width: f64,
    alpha: f64,
    sigma: f64,
    horizon: f64,
}

impl Geometry {
    fn new(m: &MarketParams, spec: &OneTouchSpec) -> Result<Self> {
        let dt = m.discount_horizon();
        let (x0, yb) = levels(m, spec.barrier)?;
        if yb <= x0 {
            return Err(domain("B", spec.barrier, "barrier must lie above the discounted spot"));
        }
        let kd = spec.strike * dt;
        Ok(Self {
            x0,
            yb,
            yk: m.level(kd),
            kd,
            bd: spec.barrier * dt,
            dt,
            width: spec.width(),
            alpha: m.alpha(),
            sigma: m.sigma(),
            horizon: m.horizon(),
        })
    }

    /// `E_Q[f 1{no hit by T}]` for `f = e^{c·w}` on `w ∈ [lo, hi]`, where
    /// `w = x + W_τ` and the barrier is the line `y_B + βs`.
    fn nohit_exp(&self, x: f64, tau: f64, beta: f64, c: f64, lo: f64, hi: f64) -> f64 {
        let a = self.yb - x;
        gaussian_exp_integral(x, tau, c, lo, hi)
            - (-2.0 * a * beta).exp() * gaussian_exp_integral(2.0 * self.yb - x, tau, c, lo, hi)
    }

    /// Pre-hit `Q`-value of the Hobson package,
    /// `E_Q[(S^D_T−K^D)_+ 1{no hit} + (K^D−S^D_T)_+ 1{hit} | X_t = x]/(B−K)`.
    fn package(&self, t: f64, x: f64) -> f64 {
        let tau = self.horizon - t;
        let s = (self.sigma * x).exp();
        if tau <= 0.0 {
            return (s - self.kd).max(0.0) / self.width;
        }
        let beta = 0.5 * self.sigma;
        let shift = (-self.sigma * beta * tau).exp();
        let lo = self.yk + beta * tau;
        let hi = self.yb + beta * tau;
        let call = shift * self.nohit_exp(x, tau, beta, self.sigma, lo, hi)
            - self.kd * self.nohit_exp(x, tau, beta, 0.0, lo, hi);
        let put_nohit = self.kd * self.nohit_exp(x, tau, beta, 0.0, f64::NEG_INFINITY, lo)
            - shift * self.nohit_exp(x, tau, beta, self.sigma, f64::NEG_INFINITY, lo);
        let put = bs_put(s, self.kd, tau, self.sigma, 0.0);
        (call + (put - put_nohit).max(0.0)) / self.width
    }

    /// `Q(H_B ≤ T | X_t = x)` before a hit.
    fn hit_prob(&self, t: f64, x: f64) -> f64 {
        if x >= self.yb {
            return 1.0;
        }
        hit_probability_raw(self.yb - x, 0.5 * self.sigma, self.horizon - t)
    }
}

/// `ζ̂` for the semi-static hedge in `Q`-units: `−α` plus the package value
/// before the hit and `−α` plus the put's time value after it.
pub fn zeta_hat_semi_static(m: &MarketParams, spec: &OneTouchSpec, t: f64, level: f64, hit: bool) -> Result<f64> {
    m.check_time(t)?;
    let g = Geometry::new(m, spec)?;
    Ok(if hit {
        -g.alpha + expected_local_time(m.price_at(level), g.kd, g.horizon - t, g.sigma) / g.width
    } else {
        -g.alpha + g.package(t, level)
    })
}

/// `ζ̂` for the dynamic-only hedge in `Q`-units:
/// `−α + D_T(S^D_t/B^D − Q(hit | F_t))` before the hit and `−α` after.
pub fn zeta_hat_dynamic(m: &MarketParams, spec: &OneTouchSpec, t: f64, level: f64, hit: bool) -> Result<f64> {
    m.check_time(t)?;
    let g = Geometry::new(m, spec)?;
    Ok(if hit {
        -g.alpha
    } else {
        -g.alpha + g.dt * (m.price_at(level) / g.bd - g.hit_prob(t, level))
    })
}

/// The law of `G = sup J` under `Q̄` through its excess function.
pub trait WealthLaw {
    /// `h(c) = E[(G − c)_+]` for `c ≥ 0`.
    fn excess(&self, c: f64) -> Result<f64>;
    /// `E[u_p(G ∨ c)]` for `c ≥ 0`.
    fn expected_utility(&self, c: f64) -> Result<f64>;
}

/// Semi-static law in closed form.
///
/// After the barrier is hit the package is a put, and `J` lives on the
/// next visit to the strike level, where it equals `z_K(u)∨0` with
/// `z_K` the call-case `z` for `λ = 1/(B−K)`. The time of that visit is
/// the sum of two passage times with a common slope, whose density is
/// again of passage type. Paths that never hit contribute the terminal
/// value `φ_T(−α + (S^D_T − K^D)_+/(B−K))_+` against the absorbed density.
#[derive(Debug, Clone)]
pub struct SemiStaticLaw {
    zk: CallProblem,
    geo: Geometry,
    beta: f64,
    p: f64,
    theta_p: f64,
    theta: f64,
}

impl SemiStaticLaw {
    pub fn new(m: &MarketParams, spec: &OneTouchSpec) -> Result<Self> {
        let geo = Geometry::new(m, spec)?;
        let zk = CallProblem::new(m, CallPosition::new(spec.strike, 1.0 / spec.width(), 0.0)?)?;
        // z_K must be monotone for the first strike visit to carry the supremum
        zk.rstar(0.0)?;
        Ok(Self {
            zk,
            geo,
            beta: Measure::QBar.beta(m),
            p: m.p(),
            theta_p: m.theta() / m.p(),
            theta: m.theta(),
        })
    }

    /// Density of the first strike visit after the first barrier hit.
    pub fn visit_density(&self, u: f64) -> f64 {
        let a1 = self.geo.yb - self.geo.x0;
        let a2 = self.geo.yk - self.geo.yb;
        gamma1_raw(u, a1 - a2, self.beta) * (-2.0 * a2 * self.beta).exp()
    }

    /// `z_K(u)`, the index value at a strike visit at time `u`.
    pub fn strike_index(&self, u: f64) -> f64 {
        self.zk.z(u)
    }

    /// Terminal index on a path that never hit, as a function of
    /// `v = x + W̄_T` (the barrier is the line `y_B + βt` in these units).
    pub fn terminal_index(&self, v: f64) -> f64 {
        let g = &self.geo;
        let x = v - self.beta * g.horizon;
        let s = (g.sigma * x).exp();
        let phi = (-self.theta_p * (v - g.x0) - 0.5 * self.theta * self.theta * g.horizon / (self.p * self.p)).exp();
        phi * (-g.alpha + (s - g.kd).max(0.0) / g.width)
    }

    fn survival(&self, v: f64) -> f64 {
        let g = &self.geo;
        gamma2_raw(v, g.horizon, g.x0, g.yb, g.yb - g.x0, self.beta)
    }

    /// `[v_c, top]`, the terminal values above `c`, or `None`.
    fn terminal_range(&self, c: f64) -> Option<(f64, f64)> {
        let g = &self.geo;
        let top = g.yb + self.beta * g.horizon;
        // the index is increasing once the call leg covers α
        let v0 = (g.kd + g.alpha * g.width).ln() / g.sigma + self.beta * g.horizon;
        if v0 >= top || self.terminal_index(top) <= c {
            return None;
        }
        let (mut a, mut b) = (v0, top);
        while b - a > 1e-13 * (1.0 + b.abs()) {
            let mid = 0.5 * (a + b);
            if self.terminal_index(mid) > c {
                b = mid;
            } else {
                a = mid;
            }
        }
        Some((0.5 * (a + b), top))
    }

    fn integrate_parts<F: Fn(f64) -> f64>(&self, c: f64, f: F) -> Result<f64> {
        let f = &f;
        let rs = self.zk.rstar(c)?;
        let visits = if rs > 0.0 {
            integrate_sqrt_left(|u| self.visit_density(u) * f(self.strike_index(u)), 0.0, rs, QUAD)?
        } else {
            0.0
        };
        let terminal = match self.terminal_range(c) {
            Some((lo, hi)) => integrate(|v| self.survival(v) * f(self.terminal_index(v)), lo, hi, QUAD)?,
            None => 0.0,
        };
        Ok(visits + terminal)
    }
}

impl WealthLaw for SemiStaticLaw {
    fn excess(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(domain("c", c, "floor must be non-negative"));
        }
        self.integrate_parts(c, |g| g - c)
    }

    fn expected_utility(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(domain("c", c, "floor must be non-negative"));
        }
        let base = power_utility(c, self.p);
        Ok(base + self.integrate_parts(c, |g| power_utility(g, self.p) - base)?)
    }
}

/// Lattice Snell envelope of the semi-static obstacle with floor `c`.
///
/// A post-hit layer aligned to the strike and barrier levels is solved
/// first; its values on the barrier become the upper boundary of a
/// pre-hit layer aligned to the start and barrier levels.
pub fn semi_static_lattice_value(m: &MarketParams, spec: &OneTouchSpec, c: f64, n: usize) -> Result<f64> {
    let g = Geometry::new(m, spec)?;
    let drift = Measure::QBar.level_drift(m);
    let post = aligned_grid(
        g.yk.min(g.yb),
        g.yk.max(g.yb),
        0.0,
        g.horizon,
        n,
        n,
        GridShape::Centered,
    )?;
    let pre = aligned_grid(g.x0, g.yb, 0.0, g.horizon, n, n, GridShape::EndAtUpper)?;
    if post.times.len() != pre.times.len() {
        return Err(Error::Invalid("lattice layers need a common time grid".into()));
    }
    let bar = if g.yb > g.yk { post.hi } else { post.lo };
    let post_obstacle = |t: f64, x: f64| {
        let elt = expected_local_time(m.price_at(x), g.kd, g.horizon - t, g.sigma);
        (m.phi_level(t, x) * (-g.alpha + elt / g.width)).max(c)
    };
    let floor = |_: f64| c.max(0.0);
    let mut at_barrier = vec![0.0; post.times.len()];
    snell_sweep(
        &LatticeProcessSpec {
            times: post.times.clone(),
            levels: post.levels.clone(),
            drift,
            obstacle: &post_obstacle,
            terminal: &floor,
            lower: Edge::ZeroGradient,
            upper: Edge::ZeroGradient,
            start: bar,
        },
        |k, v| at_barrier[k] = v[bar],
    )?;
    let pre_obstacle = |t: f64, x: f64| (m.phi_level(t, x) * (-g.alpha + g.package(t, x))).max(c);
    let pre_terminal = |x: f64| {
        let s = m.price_at(x);
        (m.phi_level(g.horizon, x) * (-g.alpha + (s - g.kd).max(0.0) / g.width))
            .max(0.0)
            .max(c)
    };
    let edge = |k: usize| at_barrier[k];
    snell_value(&LatticeProcessSpec {
        times: pre.times,
        levels: pre.levels,
        drift,
        obstacle: &pre_obstacle,
        terminal: &pre_terminal,
        lower: Edge::ZeroGradient,
        upper: Edge::Fixed(&edge),
        start: pre.lo,
    })
}

/// Numerical settings for the lattice-based law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneTouchOptions {
    /// Time steps (and roughly level nodes) per lattice.
    pub lattice_steps: usize,
    /// Number of floors at which the dynamic-only envelope is solved.
    pub floor_points: usize,
}

impl Default for OneTouchOptions {
    fn default() -> Self {
        Self {
            lattice_steps: 400,
            floor_points: 120,
        }
    }
}

/// Dynamic-only law, tabulated from lattice envelopes `F(c) = c + h(c)`
/// on the floors `c_i = G_max(i/n)²` and linear in between; `h` vanishes
/// beyond the largest obstacle value `G_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicLaw {
    pub floors: Vec<f64>,
    pub excess: Vec<f64>,
    p: f64,
}

impl DynamicLaw {
    pub fn new(m: &MarketParams, spec: &OneTouchSpec, opts: OneTouchOptions, exec: Exec) -> Result<Self> {
        let g = Geometry::new(m, spec)?;
        let grid = aligned_grid(
            g.x0,
            g.yb,
            0.0,
            g.horizon,
            opts.lattice_steps,
            opts.lattice_steps,
            GridShape::EndAtUpper,
        )?;
        let obstacle =
            |t: f64, x: f64| m.phi_level(t, x) * (-g.alpha + g.dt * (m.price_at(x) / g.bd - g.hit_prob(t, x)));
        let terminal = |x: f64| (m.phi_level(g.horizon, x) * (-g.alpha + g.dt * m.price_at(x) / g.bd)).max(0.0);
        let mut gmax: f64 = 0.0;
        for &t in &grid.times[..grid.times.len() - 1] {
            for &x in &grid.levels[..grid.levels.len() - 1] {
                gmax = gmax.max(obstacle(t, x));
            }
        }
        for &x in &grid.levels {
            gmax = gmax.max(terminal(x));
        }
        let n = opts.floor_points.max(2);
        let floors: Vec<f64> = (0..=n).map(|i| gmax * (i as f64 / n as f64).powi(2)).collect();
        let values = par::map(exec, &floors, |&c| {
            let ob = |t: f64, x: f64| obstacle(t, x).max(c);
            let term = |x: f64| terminal(x).max(c);
            let edge = |_: usize| c;
            snell_value(&LatticeProcessSpec {
                times: grid.times.clone(),
                levels: grid.levels.clone(),
                drift: Measure::QBar.level_drift(m),
                obstacle: &ob,
                terminal: &term,
                lower: Edge::ZeroGradient,
                upper: Edge::Fixed(&edge),
                start: grid.lo,
            })
            .map(|v| (v - c).max(0.0))
        });
        let excess = values.into_iter().collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            floors,
            excess,
            p: m.p(),
        })
    }

    /// Largest value of `G`.
    pub fn top(&self) -> f64 {
        *self.floors.last().expect("at least two floors")
    }
}

impl WealthLaw for DynamicLaw {
    fn excess(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(domain("c", c, "floor must be non-negative"));
        }
        if c >= self.top() {
            return Ok(0.0);
        }
        Ok(crate::lattice::interpolate(&self.floors, &self.excess, c))
    }

    /// `u(c) + ∫_c^∞ g^{−p} P(G > g) dg` with `P(G > g) = −h'(g)`
    /// constant on each segment.
    fn expected_utility(&self, c: f64) -> Result<f64> {
        if !(c >= 0.0) {
            return Err(domain("c", c, "floor must be non-negative"));
        }
        let q = 1.0 - self.p;
        let mut total = power_utility(c, self.p);
        for i in 0..self.floors.len() - 1 {
            let (a, b) = (self.floors[i], self.floors[i + 1]);
            if b <= c || b <= a {
                continue;
            }
            let tail = ((self.excess[i] - self.excess[i + 1]) / (b - a)).max(0.0);
            let lo = a.max(c);
            total += tail * (b.powf(q) - lo.powf(q)) / q;
        }
        Ok(total)
    }
}

/// Optimal floor and utility for one initial wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOutcome {
    pub mode: HedgeMode,
    pub w0: f64,
    /// Smallest feasible initial wealth.
    pub min_w0: f64,
    pub feasible: bool,
    pub floor: Option<f64>,
    pub utility: Option<f64>,
    pub ce: Option<f64>,
}

/// Solves `c + h(c) = w0 + premium` and evaluates `c_p E[u_p(G ∨ M)]`.
pub fn solve_law<L: WealthLaw + ?Sized>(
    law: &L,
    m: &MarketParams,
    premium: f64,
    mode: HedgeMode,
) -> Result<ModeOutcome> {
    let w0 = m.w0();
    let budget = w0 + premium;
    let need = law.excess(0.0)?;
    let mut out = ModeOutcome {
        mode,
        w0,
        min_w0: need - premium,
        feasible: false,
        floor: None,
        utility: None,
        ce: None,
    };
    if budget < need {
        return Ok(out);
    }
    let gap = |c: f64| law.excess(c).map_or(f64::NAN, |h| c + h - budget);
    let floor = if gap(budget) <= 0.0 {
        budget
    } else if budget == need {
        0.0
    } else {
        brent(gap, 0.0, budget, 1e-14)?
    };
    let utility = m.cp() * law.expected_utility(floor)?;
    out.feasible = true;
    out.floor = Some(floor);
    out.utility = Some(utility);
    out.ce = Some(m.certainty_equivalent(utility)?);
    Ok(out)
}

/// Keeping the wealth and not selling: `c_p u_p(w0)`.
pub fn utility_no_sale(m: &MarketParams) -> Result<ModeOutcome> {
    let w0 = m.w0();
    let utility = m.cp() * m.utility(w0)?;
    Ok(ModeOutcome {
        mode: HedgeMode::NoSale,
        w0,
        min_w0: 0.0,
        feasible: true,
        floor: Some(w0),
        utility: Some(utility),
        ce: Some(w0),
    })
}

/// Semi-static hedge with the closed-form law.
pub fn utility_semi_static(m: &MarketParams, spec: &OneTouchSpec) -> Result<ModeOutcome> {
    solve_law(&SemiStaticLaw::new(m, spec)?, m, spec.premium, HedgeMode::SemiStatic)
}

/// Dynamic-only hedge with the lattice law.
pub fn utility_dynamic_only(
    m: &MarketParams,
    spec: &OneTouchSpec,
    opts: OneTouchOptions,
    exec: Exec,
) -> Result<ModeOutcome> {
    solve_law(
        &DynamicLaw::new(m, spec, opts, exec)?,
        m,
        spec.premium,
        HedgeMode::DynamicOnly,
    )
}

/// Outcomes for every mode and every initial wealth in `grid`. Each law
/// is built once and reused across `w0`.
pub fn sweep_w0(
    m: &MarketParams,
    spec: &OneTouchSpec,
    modes: &[HedgeMode],
    grid: &[f64],
    opts: OneTouchOptions,
    exec: Exec,
) -> Result<Vec<ModeOutcome>> {
    let semi = if modes.contains(&HedgeMode::SemiStatic) {
        Some(SemiStaticLaw::new(m, spec)?)
    } else {
        None
    };
    let dynamic = if modes.contains(&HedgeMode::DynamicOnly) {
        Some(DynamicLaw::new(m, spec, opts, exec)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(grid.len() * modes.len());
    for &w0 in grid {
        let mw = m.with_w0(w0)?;
        for &mode in modes {
            out.push(match mode {
                HedgeMode::SemiStatic => solve_law(semi.as_ref().expect("built above"), &mw, spec.premium, mode)?,
                HedgeMode::DynamicOnly => solve_law(dynamic.as_ref().expect("built above"), &mw, spec.premium, mode)?,
                HedgeMode::NoSale => utility_no_sale(&mw)?,
            });
        }
    }
    Ok(out)
}

/// `w0,mode,M,utility,ce,feasible` table.
pub fn w0_table(rows: &[ModeOutcome]) -> Result<ResultTable> {
    let mut t = ResultTable::new("onetouch_utility", &["w0", "mode", "M", "utility", "ce", "feasible"]);
    for r in rows {
        t.push(vec![
            Cell::Num(r.w0),
            Cell::Text(r.mode.name().into()),
            r.floor.into(),
            r.utility.into(),
            r.ce.into(),
            r.feasible.into(),
        ])?;
    }
    Ok(t)
}

/// Semi-static outcomes for every hedge strike in `strikes`.
pub fn sweep_strike(m: &MarketParams, spec: &OneTouchSpec, strikes: &[f64], exec: Exec) -> Result<Vec<ModeOutcome>> {
    par::map(exec, strikes, |&k| utility_semi_static(m, &spec.with_strike(k)?))
        .into_iter()
        .collect()
}

/// `K,ce` table; infeasible strikes have an empty cell.
pub fn strike_table(strikes: &[f64], rows: &[ModeOutcome]) -> Result<ResultTable> {
    let mut t = ResultTable::new("onetouch_ce_k", &["K", "ce"]);
    for (&k, r) in strikes.iter().zip(rows) {
        t.push(vec![Cell::Num(k), r.ce.into()])?;
    }
    Ok(t)
}

/// Smallest feasible `w0` for a mode (zero for not selling).
pub fn minimal_w0(
    m: &MarketParams,
    spec: &OneTouchSpec,
    mode: HedgeMode,
    opts: OneTouchOptions,
    exec: Exec,
) -> Result<f64> {
    Ok(match mode {
        HedgeMode::SemiStatic => SemiStaticLaw::new(m, spec)?.excess(0.0)? - spec.premium,
        HedgeMode::DynamicOnly => DynamicLaw::new(m, spec, opts, exec)?.excess(0.0)? - spec.premium,
        HedgeMode::NoSale => 0.0,
    })
}
