//! First passage of Brownian motion to a line.
//!
//! `H = inf{t ≥ 0 : x + B_t = y + βt}`. With `a = y − x` this is the
//! first time the drifted motion `B_t − βt` reaches `a`, and the densities
//! have closed forms (Bachelier-Lévy for `γ1`, reflection plus a Girsanov
//! tilt for `γ2`). A Laplace-inversion route and a bridge-corrected Monte
//! Carlo route are kept alongside as independent checks.

use crate::error::{domain, Error, Result};
use crate::mc::{map_paths, McConfig};
use crate::par::Exec;
use crate::special::{exp_times_cdf, norm_cdf};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Start level `x`, boundary intercept `y` and boundary slope `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineBoundary {
    pub x: f64,
    pub y: f64,
    pub beta: f64,
}

impl LineBoundary {
    pub fn new(x: f64, y: f64, beta: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && beta.is_finite()) {
            return Err(Error::Invalid("line boundary parameters must be finite".into()));
        }
        Ok(Self { x, y, beta })
    }

    /// `a = y − x`.
    pub fn gap(&self) -> f64 {
        self.y - self.x
    }

    fn check(&self) -> Result<f64> {
        let a = self.gap();
        if a == 0.0 {
            Err(Error::DegenerateBoundary)
        } else {
            Ok(a)
        }
    }

    /// Boundary level at time `t`.
    pub fn at(&self, t: f64) -> f64 {
        self.y + self.beta * t
    }

    /// True when `v` lies on the starting side of the boundary at time `t`.
    pub fn on_start_side(&self, v: f64, t: f64) -> bool {
        if self.gap() > 0.0 {
            v < self.at(t)
        } else {
            v > self.at(t)
        }
    }
}

/// Gaussian density with mean `x` and variance `t`.
pub fn gamma0(v: f64, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("t", t, "variance must be positive"));
    }
    Ok(gauss(v, t, x))
}

pub(crate) fn gauss(v: f64, t: f64, x: f64) -> f64 {
    let d = v - x;
    (-d * d / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// First-passage density
/// `γ1(u) = |a|/√(2πu³) · exp(−(a + βu)²/(2u))`.
pub fn gamma1(u: f64, b: &LineBoundary) -> Result<f64> {
    let a = b.check()?;
    if u < 0.0 || u.is_nan() {
        return Err(domain("u", u, "passage time must be non-negative"));
    }
    Ok(gamma1_raw(u, a, b.beta))
}

pub(crate) fn gamma1_raw(u: f64, a: f64, beta: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let e = a + beta * u;
    a.abs() / (2.0 * PI * u * u * u).sqrt() * (-e * e / (2.0 * u)).exp()
}

/// `P(H ≤ t)` in closed form: with `s = sign(a)`,
/// `Φ((−|a| − sβt)/√t) + e^{−2aβ} Φ((−|a| + sβt)/√t)`.
pub fn hit_probability(b: &LineBoundary, t: f64) -> Result<f64> {
    let a = b.check()?;
    if t < 0.0 {
        return Err(domain("t", t, "horizon must be non-negative"));
    }
    Ok(hit_probability_raw(a, b.beta, t))
}

pub(crate) fn hit_probability_raw(a: f64, beta: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let s = a.signum();
    let abs_a = a.abs();
    let rt = t.sqrt();
    let p = norm_cdf((-abs_a - s * beta * t) / rt) + exp_times_cdf(-2.0 * a * beta, (-abs_a + s * beta * t) / rt);
    p.min(1.0)
}

/// `P(H < ∞) = min(1, e^{−2aβ})`.
pub fn total_hit_probability(b: &LineBoundary) -> Result<f64> {
    let a = b.check()?;
    Ok((-2.0 * a * b.beta).exp().min(1.0))
}

/// Survival density `γ2(v, t)` of `x + B_t` on `{H > t}`:
/// `γ0(v,t,x) − e^{−2aβ} γ0(v,t,2y−x)` on the starting side, 0 beyond.
pub fn gamma2(v: f64, t: f64, b: &LineBoundary) -> Result<f64> {
    let a = b.check()?;
    if !(t > 0.0) {
        return Err(domain("t", t, "time must be positive"));
    }
    if !b.on_start_side(v, t) {
        return Ok(0.0);
    }
    Ok(gamma2_raw(v, t, b.x, b.y, a, b.beta))
}

pub(crate) fn gamma2_raw(v: f64, t: f64, x: f64, y: f64, a: f64, beta: f64) -> f64 {
    (gauss(v, t, x) - (-2.0 * a * beta).exp() * gauss(v, t, 2.0 * y - x)).max(0.0)
}

/// `P(H > t, x + B_t ≤ v)` for a boundary approached from below, and
/// `P(H > t, x + B_t ≥ v)` for one approached from above.
pub fn survival_tail(b: &LineBoundary, t: f64, v: f64) -> Result<f64> {
    let a = b.check()?;
    if !(t > 0.0) {
        return Err(domain("t", t, "time must be positive"));
    }
    let rt = t.sqrt();
    let w = -2.0 * a * b.beta;
    let mirror = 2.0 * b.y - b.x;
    let edge = b.at(t);
    Ok(if a > 0.0 {
        let v = v.min(edge);
        norm_cdf((v - b.x) / rt) - exp_times_cdf(w, (v - mirror) / rt)
    } else {
        let v = v.max(edge);
        norm_cdf((b.x - v) / rt) - exp_times_cdf(w, (mirror - v) / rt)
    }
    .max(0.0))
}

/// `∫_lo^hi γ0(v,τ,m) e^{cv} dv
///  = e^{cm + c²τ/2} [Φ((hi−m−cτ)/√τ) − Φ((lo−m−cτ)/√τ)]`.
pub fn gaussian_exp_integral(m: f64, tau: f64, c: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let rt = tau.sqrt();
    let shift = m + c * tau;
    let scale = c * m + 0.5 * c * c * tau;
    // use the tail on the side that keeps the difference accurate
    let (u, l) = ((hi - shift) / rt, (lo - shift) / rt);
    if l > 0.0 {
        scale.exp() * (norm_cdf(-l) - norm_cdf(-u))
    } else {
        scale.exp() * (norm_cdf(u) - norm_cdf(l))
    }
}

/// Laplace transform `E[e^{−sH}] = exp(−aβ − |a|√(β² + 2s))` of the
/// (possibly defective) passage time.
pub fn gamma1_transform(b: &LineBoundary, s: Complex64) -> Complex64 {
    let a = b.gap();
    (Complex64::new(-a * b.beta, 0.0) - a.abs() * (b.beta * b.beta + 2.0 * s).sqrt()).exp()
}

/// Parameters of the Euler-summation inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerParams {
    /// Damping `A`; the discretisation error is about `e^{−A}`.
    pub a: f64,
    /// Terms summed before averaging.
    pub n: usize,
    /// Binomial averaging order.
    pub m: usize,
    /// Accepted change between consecutive Euler estimates.
    pub tol: f64,
}

impl Default for EulerParams {
    fn default() -> Self {
        Self {
            a: 18.4,
            n: 30,
            m: 11,
            tol: 1e-8,
        }
    }
}

/// Inverts a Laplace transform at `t > 0` by the Abate-Whitt Euler
/// algorithm: a trapezoidal Bromwich sum accelerated by binomial averaging
/// of partial sums.
pub fn laplace_invert<F>(transform: F, t: f64, p: EulerParams) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(t > 0.0) {
        return Err(domain("t", t, "inversion time must be positive"));
    }
    let scale = (0.5 * p.a).exp() / t;
    let total = p.n + p.m + 1;
    let mut partial = Vec::with_capacity(total + 1);
    let mut sum = 0.5 * transform(Complex64::new(p.a / (2.0 * t), 0.0)).re;
    partial.push(sum);
    for k in 1..=total {
        let s = Complex64::new(p.a / (2.0 * t), k as f64 * PI / t);
        let term = transform(s).re;
        sum += if k % 2 == 0 { term } else { -term };
        partial.push(sum);
    }
    let euler = |n: usize| {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for k in 0..=p.m {
            acc += binom * partial[n + k];
            binom *= (p.m - k) as f64 / (k + 1) as f64;
        }
        scale * acc / 2f64.powi(p.m as i32)
    };
    let e0 = euler(p.n);
    let e1 = euler(p.n + 1);
    let residual = (e1 - e0).abs();
    if !e1.is_finite() || residual > p.tol * (1.0 + e1.abs()) {
        return Err(Error::Accuracy {
            what: "Euler-summation Laplace inversion",
            residual,
        });
    }
    Ok(e1)
}

/// `γ1(u)` by numerical inversion of its Laplace transform.
pub fn gamma1_laplace(u: f64, b: &LineBoundary, p: EulerParams) -> Result<f64> {
    b.check()?;
    laplace_invert(|s| gamma1_transform(b, s), u, p)
}

/// Simulated passage times by `horizon`, with `+∞` for paths that do not
/// reach the line. Each step is tested with the Brownian-bridge crossing
/// probability, so there is no discrete-monitoring bias.
pub fn mc_passage_times(b: &LineBoundary, horizon: f64, cfg: McConfig, exec: Exec) -> Result<Vec<f64>> {
    b.check()?;
    Ok(map_paths(exec, cfg, b.x, -b.beta, 0.0, horizon, |v| {
        v.first_crossing(b.y).unwrap_or(f64::INFINITY)
    }))
}

/// Simulated values of `x + B_t` at `t` on paths that have not met the
/// line; `None` for absorbed paths.
pub fn mc_survivors(b: &LineBoundary, t: f64, cfg: McConfig, exec: Exec) -> Result<Vec<Option<f64>>> {
    b.check()?;
    Ok(map_paths(exec, cfg, b.x, -b.beta, 0.0, t, |v| {
        match v.first_crossing(b.y) {
            Some(_) => None,
            None => Some(v.last() + b.beta * t),
        }
    }))
}
