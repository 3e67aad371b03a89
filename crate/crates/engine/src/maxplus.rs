//! Long call position: the constraint process `ζ`, the binding horizon
//! `r*`, the budget equation for the wealth floor `M`, optimal utility and
//! the law of the optimal wealth.
//!
//! With `z(·;λ)` decreasing, the optimal wealth under `Q̄` is
//! `Ȳ_T = (z(H)∨0)∨M` where `H` is the first time the discounted price
//! meets the discounted strike. Everything here reduces to one-dimensional
//! integrals against the passage density of `H`. Outside that regime the
//! floor is found from a lattice Snell envelope instead.
//!
//! The second half of the module checks max-plus representations by
//! simulation: a candidate supermartingale is compared with Monte Carlo
//! estimates of `E[sup_{t≤u≤T} J_u | F_t]` started from chosen nodes.

use crate::bs::{atm_local_time, expected_local_time};
use crate::error::{domain, Error, Result};
use crate::lattice::{aligned_grid, snell_lattice, snell_value, Edge, GridShape, LatticeProcessSpec, LatticeSolution};
use crate::market::{power_utility, MarketParams, Measure};
use crate::mc::{map_paths, Estimate, McConfig, PathView, Seed};
use crate::par::{self, Exec};
use crate::passage::{gamma1_raw, hit_probability_raw, LineBoundary};
use crate::quad::{brent, integrate_sqrt_left, QuadOptions};
use crate::table::{Cell, ResultTable};

const QUAD: QuadOptions = QuadOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-12,
    max_intervals: 4000,
};

/// `lambda` calls struck at `strike`, bought `delta_c` per unit below
/// their replication price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallPosition {
    strike: f64,
    lambda: f64,
    delta_c: f64,
}

impl CallPosition {
    pub fn new(strike: f64, lambda: f64, delta_c: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(domain("K", strike, "strike must be positive"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(domain("lambda", lambda, "quantity must be non-negative"));
        }
        if !delta_c.is_finite() {
            return Err(domain("deltaC", delta_c, "price advantage must be finite"));
        }
        Ok(Self {
            strike,
            lambda,
            delta_c,
        })
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.strike, lambda, self.delta_c)
    }

    /// Discounted strike `K·D_T`.
    pub fn kd(&self, m: &MarketParams) -> f64 {
        self.strike * m.discount_horizon()
    }

    /// `w0 + λΔC`.
    pub fn budget(&self, m: &MarketParams) -> f64 {
        m.w0() + self.lambda * self.delta_c
    }
}

/// `ζ_t = φ_t (λ E_Q[L_T − L_t | F_t] − α)` at discounted spot `sd`, `L`
/// being the local time of `S^D` at `K^D`.
pub fn zeta(m: &MarketParams, pos: &CallPosition, t: f64, sd: f64) -> Result<f64> {
    m.check_time(t)?;
    if !(sd > 0.0) {
        return Err(domain("S^D", sd, "discounted spot must be positive"));
    }
    Ok(zeta_level(m, pos, t, m.level(sd)))
}

fn zeta_level(m: &MarketParams, pos: &CallPosition, t: f64, x: f64) -> f64 {
    let tau = (m.horizon() - t).max(0.0);
    let elt = expected_local_time(m.price_at(x), pos.kd(m), tau, m.sigma());
    m.phi_level(t, x) * (pos.lambda * elt - m.alpha())
}

/// How a solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Passage-time integrals; needs `z(·;λ)` decreasing.
    ClosedForm,
    /// Lattice Snell envelope; `r*` and utility are not available.
    Lattice,
}

/// Solution of the budget equation for one `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPlusSolution {
    pub lambda: f64,
    /// `w0 + λΔC`.
    pub budget: f64,
    /// Smallest budget that is feasible, `E_Q̄[z(H)∨0]`.
    pub min_budget: f64,
    pub feasible: bool,
    /// Wealth floor `M`.
    pub floor: Option<f64>,
    /// Binding horizon `r*(M;λ)`.
    pub rstar: Option<f64>,
    /// Optimal expected utility.
    pub utility: Option<f64>,
    /// `budget − E[sup J ∨ M]` at the returned floor, or the shortfall
    /// `budget − min_budget` when infeasible.
    pub residual: f64,
    pub route: Route,
}

/// The long-call problem with its passage-time law under `Q̄` prepared
/// for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CallProblem {
    pos: CallPosition,
    alpha: f64,
    kd: f64,
    sigma: f64,
    horizon: f64,
    phi0: f64,
    kappa: f64,
    p: f64,
    cp: f64,
    budget: f64,
    decreasing: bool,
    boundary: LineBoundary,
}

impl CallProblem {
    pub fn new(m: &MarketParams, pos: CallPosition) -> Result<Self> {
        let kd = pos.kd(m);
        let boundary = LineBoundary::new(m.x0(), m.level(kd), Measure::QBar.beta(m))?;
        if boundary.gap() == 0.0 {
            return Err(Error::DegenerateBoundary);
        }
        let th = m.theta();
        let p = m.p();
        Ok(Self {
            pos,
            alpha: m.alpha(),
            kd,
            sigma: m.sigma(),
            horizon: m.horizon(),
            phi0: m.phi_on_strike_line(0.0, kd)?,
            kappa: (th / (2.0 * p * p)) * (th - m.sigma() * p),
            p,
            cp: m.cp(),
            budget: pos.budget(m),
            decreasing: m.z_decreasing(),
            boundary,
        })
    }

    pub fn position(&self) -> &CallPosition {
        &self.pos
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Start level, strike level and slope of the strike line under `Q̄`.
    pub fn boundary(&self) -> LineBoundary {
        self.boundary
    }

    /// `z(u;λ) = φ(u)(λ K^D(2Φ(σ√(T−u)/2) − 1) − α)`, `u` clamped to `[0, T]`.
    pub fn z(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, self.horizon);
        let phi = self.phi0 * (self.kappa * u).exp();
        phi * (self.pos.lambda * atm_local_time(self.kd, self.horizon - u, self.sigma) - self.alpha)
    }

    fn regime(&self) -> Result<()> {
        if self.decreasing {
            Ok(())
        } else {
            Err(Error::UnsupportedRegime(
                "z(·;λ) is not decreasing (needs θ > 0 and pσ > θ)",
            ))
        }
    }

    fn gamma1(&self, u: f64) -> f64 {
        gamma1_raw(u, self.boundary.gap(), self.boundary.beta)
    }

    /// `r*(M) = inf{u < T : z(u;λ) < M} ∧ T`.
    ///
    /// For `M ≥ 0` the set `{z > M}` is an initial interval and the root is
    /// bisected directly. Below zero `z` need not be monotone, so the first
    /// crossing is located on a scan grid before bisecting.
    pub fn rstar(&self, floor: f64) -> Result<f64> {
        self.regime()?;
        if floor.is_nan() {
            return Err(domain("M", floor, "floor must be a number"));
        }
        let t = self.horizon;
        if floor >= self.z(0.0) {
            return Ok(0.0);
        }
        let (lo, hi) = if floor >= 0.0 {
            if self.z(t) >= floor {
                return Ok(t);
            }
            (0.0, t)
        } else {
            const SCAN: usize = 4096;
            let step = t / SCAN as f64;
            match (1..=SCAN).find(|&k| self.z(step * k as f64) < floor) {
                Some(k) => (step * (k - 1) as f64, step * k as f64),
                None => return Ok(t),
            }
        };
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-12 * t {
            let mid = 0.5 * (a + b);
            if self.z(mid) < floor {
                b = mid;
            } else {
                a = mid;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `E_Q̄[(z(H)∨0)∨M] = M + ∫_0^{r*} γ1(u)(z(u) − M) du` for `M ≥ 0`.
    pub fn expected_sup_j(&self, floor: f64) -> Result<f64> {
        if !(floor >= 0.0) {
            return Err(domain("M", floor, "wealth floor must be non-negative"));
        }
        let rs = self.rstar(floor)?;
        if rs == 0.0 {
            return Ok(floor);
        }
        let tail = integrate_sqrt_left(|u| self.gamma1(u) * (self.z(u) - floor), 0.0, rs, QUAD)?;
        Ok(floor + tail)
    }

    /// `c_p(u_p(M) + ∫_0^{r*} γ1(u)(u_p(z(u)) − u_p(M)) du)`.
    pub fn utility_at(&self, floor: f64) -> Result<f64> {
        if !(floor >= 0.0) {
            return Err(domain("M", floor, "wealth floor must be non-negative"));
        }
        let rs = self.rstar(floor)?;
        let base = power_utility(floor, self.p);
        let extra = if rs > 0.0 {
            integrate_sqrt_left(
                |u| self.gamma1(u) * (power_utility(self.z(u), self.p) - base),
                0.0,
                rs,
                QUAD,
            )?
        } else {
            0.0
        };
        Ok(self.cp * (base + extra))
    }

    /// Solves `w0 + λΔC = E_Q̄[(z(H)∨0)∨M]` for the floor `M`.
    pub fn solve(&self) -> Result<MaxPlusSolution> {
        self.regime()?;
        let budget = self.budget;
        let min_budget = self.expected_sup_j(0.0)?;
        let mut sol = MaxPlusSolution {
            lambda: self.pos.lambda,
            budget,
            min_budget,
            feasible: false,
            floor: None,
            rstar: None,
            utility: None,
            residual: budget - min_budget,
            route: Route::ClosedForm,
        };
        if budget < min_budget {
            return Ok(sol);
        }
        let floor = if budget >= self.z(0.0) {
            // no binding hit above the budget
            budget
        } else if budget == min_budget {
            0.0
        } else {
            // E[sup J ∨ M] − M ≥ 0, so [0, budget] brackets the root
            brent(
                |f| self.expected_sup_j(f).map_or(f64::NAN, |v| v - budget),
                0.0,
                budget,
                1e-15,
            )?
        };
        let residual = budget - self.expected_sup_j(floor)?;
        if residual.abs() >= 1e-9 * (1.0 + budget.abs()) {
            return Err(Error::Accuracy {
                what: "budget equation",
                residual,
            });
        }
        sol.feasible = true;
        sol.floor = Some(floor);
        sol.rstar = Some(self.rstar(floor)?);
        sol.utility = Some(self.utility_at(floor)?);
        sol.residual = residual;
        Ok(sol)
    }

    /// `P(Ȳ_T ≤ w)` for `Ȳ_T = (z(H)∨0)∨M`, with `H` distributed as the
    /// strike passage time under `measure`.
    pub fn wealth_cdf(&self, m: &MarketParams, floor: f64, w: f64, measure: Measure) -> Result<f64> {
        if w < floor {
            return Ok(0.0);
        }
        let u = self.rstar(w.max(0.0))?;
        Ok(1.0 - hit_probability_raw(self.boundary.gap(), measure.beta(m), u))
    }
}

/// `r*(M;λ)`.
pub fn rstar(m: &MarketParams, pos: &CallPosition, floor: f64) -> Result<f64> {
    CallProblem::new(m, *pos)?.rstar(floor)
}

/// `E_Q̄[(z(H)∨0)∨M]`.
pub fn expected_sup_j(m: &MarketParams, pos: &CallPosition, floor: f64) -> Result<f64> {
    CallProblem::new(m, *pos)?.expected_sup_j(floor)
}

/// Closed-form solution of the budget equation with `w0` from `m`.
pub fn solve_m(m: &MarketParams, pos: &CallPosition) -> Result<MaxPlusSolution> {
    CallProblem::new(m, *pos)?.solve()
}

/// Optimal expected utility; infeasible positions are an error.
pub fn optimal_utility(m: &MarketParams, pos: &CallPosition) -> Result<f64> {
    let sol = solve_m(m, pos)?;
    match sol.utility {
        Some(u) if sol.feasible => Ok(u),
        _ => Err(Error::Infeasible {
            w0: m.w0(),
            min_w0: sol.min_budget - pos.lambda * pos.delta_c,
        }),
    }
}

/// CDF of the optimal wealth `Ȳ_T` on `grid`, as a `wealth_level,cdf` table.
pub fn terminal_wealth_cdf(
    m: &MarketParams,
    pos: &CallPosition,
    grid: &[f64],
    measure: Measure,
) -> Result<ResultTable> {
    let prob = CallProblem::new(m, *pos)?;
    let sol = prob.solve()?;
    let floor = match sol.floor {
        Some(f) => f,
        None => {
            return Err(Error::Infeasible {
                w0: m.w0(),
                min_w0: sol.min_budget - pos.lambda * pos.delta_c,
            })
        }
    };
    let mut table = ResultTable::new("wealth_cdf", &["wealth_level", "cdf"]);
    table.add_provenance("lambda", &pos.lambda.to_string());
    table.add_provenance("measure", measure.name());
    table.add_provenance("M", &floor.to_string());
    for &w in grid {
        table.push_nums(&[w, prob.wealth_cdf(m, floor, w, measure)?])?;
    }
    Ok(table)
}

/// Snell envelope of `ζ⁰ ∨ floor` under `Q̄` on a trinomial grid with `n`
/// time steps, about `n` levels, and the start and strike levels on nodes.
/// The terminal value is `floor ∨ 0`.
pub fn call_lattice(m: &MarketParams, pos: &CallPosition, floor: f64, n: usize) -> Result<LatticeSolution> {
    let (spec_parts, start) = call_grid(m, pos, n)?;
    let obstacle = |t: f64, x: f64| zeta_level(m, pos, t, x).max(floor);
    let terminal = |_: f64| floor.max(0.0);
    snell_lattice(&LatticeProcessSpec {
        times: spec_parts.times,
        levels: spec_parts.levels,
        drift: Measure::QBar.level_drift(m),
        obstacle: &obstacle,
        terminal: &terminal,
        lower: Edge::ZeroGradient,
        upper: Edge::ZeroGradient,
        start,
    })
}

/// Start-node value of [`call_lattice`], i.e. the lattice estimate of
/// `E_Q̄[sup J ∨ M]`.
pub fn call_lattice_value(m: &MarketParams, pos: &CallPosition, floor: f64, n: usize) -> Result<f64> {
    let (g, start) = call_grid(m, pos, n)?;
    let obstacle = |t: f64, x: f64| zeta_level(m, pos, t, x).max(floor);
    let terminal = |_: f64| floor.max(0.0);
    snell_value(&LatticeProcessSpec {
        times: g.times,
        levels: g.levels,
        drift: Measure::QBar.level_drift(m),
        obstacle: &obstacle,
        terminal: &terminal,
        lower: Edge::ZeroGradient,
        upper: Edge::ZeroGradient,
        start,
    })
}

fn call_grid(m: &MarketParams, pos: &CallPosition, n: usize) -> Result<(crate::lattice::AlignedGrid, usize)> {
    let x = m.x0();
    let y = m.level(pos.kd(m));
    if x == y {
        return Err(Error::DegenerateBoundary);
    }
    let g = aligned_grid(x.min(y), x.max(y), 0.0, m.horizon(), n, n, GridShape::Centered)?;
    let start = if x > y { g.hi } else { g.lo };
    Ok((g, start))
}

/// Lattice solution of the budget equation, usable in any regime.
pub fn solve_m_lattice(m: &MarketParams, pos: &CallPosition, n: usize) -> Result<MaxPlusSolution> {
    let budget = pos.budget(m);
    let min_budget = call_lattice_value(m, pos, 0.0, n)?;
    let mut sol = MaxPlusSolution {
        lambda: pos.lambda,
        budget,
        min_budget,
        feasible: false,
        floor: None,
        rstar: None,
        utility: None,
        residual: budget - min_budget,
        route: Route::Lattice,
    };
    if budget < min_budget {
        return Ok(sol);
    }
    let value = |f: f64| call_lattice_value(m, pos, f, n).map_or(f64::NAN, |v| v - budget);
    let floor = if value(budget) <= 0.0 {
        budget
    } else {
        brent(value, 0.0, budget, 1e-12)?
    };
    sol.feasible = true;
    sol.floor = Some(floor);
    sol.residual = -value(floor);
    Ok(sol)
}

/// Closed form when `z(·;λ)` is decreasing, otherwise the lattice with
/// `lattice_steps` steps.
pub fn solve_call(m: &MarketParams, pos: &CallPosition, lattice_steps: usize) -> Result<MaxPlusSolution> {
    match solve_m(m, pos) {
        Err(Error::UnsupportedRegime(_)) => solve_m_lattice(m, pos, lattice_steps),
        other => other,
    }
}

/// Solves every `λ` in `lambdas`, in order.
pub fn lambda_sweep(
    m: &MarketParams,
    strike: f64,
    delta_c: f64,
    lambdas: &[f64],
    lattice_steps: usize,
    exec: Exec,
) -> Result<Vec<MaxPlusSolution>> {
    par::map(exec, lambdas, |&l| {
        let pos = CallPosition::new(strike, l, delta_c)?;
        solve_call(m, &pos, lattice_steps)
    })
    .into_iter()
    .collect()
}

/// `lambda,M,rstar,utility` table; infeasible rows have empty cells.
pub fn sweep_table(rows: &[MaxPlusSolution]) -> Result<ResultTable> {
    let mut table = ResultTable::new("call_sweep", &["lambda", "M", "rstar", "utility"]);
    for s in rows {
        table.push(vec![
            Cell::Num(s.lambda),
            s.floor.into(),
            s.rstar.into(),
            s.utility.into(),
        ])?;
    }
    Ok(table)
}

/// Feasible row with the largest utility.
pub fn best_lambda(rows: &[MaxPlusSolution]) -> Option<&MaxPlusSolution> {
    rows.iter()
        .filter(|s| s.utility.is_some())
        .max_by(|a, b| a.utility.partial_cmp(&b.utility).expect("utilities are finite"))
}

/// A candidate representation `X_t = E[sup_{t≤u≤T} J_u | F_t]` for a
/// functional of a unit-variance Brownian level with constant drift.
pub struct MaxPlusProblem<'a> {
    pub drift: f64,
    pub horizon: f64,
    /// Steps per unit time for the inner simulations.
    pub steps_per_unit: f64,
    /// `sup_{t≤u≤T} J_u` on a path started at `(view.t0, view.levels[0])`.
    pub sup_index: &'a (dyn Fn(&PathView) -> f64 + Sync),
    /// The supermartingale `X` at `(t, level)`.
    pub candidate: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

/// Comparison at one start node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckPoint {
    pub t: f64,
    pub level: f64,
    pub candidate: f64,
    pub estimate: Estimate,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPlusReport {
    pub points: Vec<CheckPoint>,
}

impl MaxPlusReport {
    pub fn max_abs_z(&self) -> f64 {
        self.points.iter().map(|p| p.z_score.abs()).fold(0.0, f64::max)
    }

    pub fn max_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p.estimate.mean - p.candidate).abs())
            .fold(0.0, f64::max)
    }

    /// True when every point lies within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.max_abs_z() <= k
    }
}

/// Estimates `E[sup J | X_t = level]` from each `(t, level)` in `starts`
/// and compares it with the candidate. Start `k` uses seed `cfg.seed + k`.
pub fn verify_maxplus(
    problem: &MaxPlusProblem,
    starts: &[(f64, f64)],
    cfg: McConfig,
    exec: Exec,
) -> Result<MaxPlusReport> {
    let mut points = Vec::with_capacity(starts.len());
    for (k, &(t, level)) in starts.iter().enumerate() {
        let rest = problem.horizon - t;
        if !(rest > 0.0) {
            return Err(domain("t", t, "start must precede the horizon"));
        }
        let steps = ((problem.steps_per_unit * rest).ceil() as usize).max(1);
        let inner = McConfig {
            n_paths: cfg.n_paths,
            n_steps: steps,
            seed: Seed(cfg.seed.0.wrapping_add(k as u64)),
        };
        let sups = map_paths(exec, inner, level, problem.drift, t, rest, problem.sup_index);
        let estimate = Estimate::from_samples(&sups);
        let candidate = (problem.candidate)(t, level);
        points.push(CheckPoint {
            t,
            level,
            candidate,
            estimate,
            z_score: estimate.z_score(candidate),
        });
    }
    Ok(MaxPlusReport { points })
}

/// Pathwise gap `|sup(J^Y + J^Z) − (sup J^Y + sup J^Z)|` for two index
/// sequences on a common grid. It vanishes when, from some index on, one
/// of the two is identically zero and before it neither index is larger
/// than its later supremum.
pub fn additive_split_gap(jy: &[f64], jz: &[f64]) -> f64 {
    let sup = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::NEG_INFINITY, f64::max);
    let joint = sup(&mut jy.iter().zip(jz).map(|(a, b)| a + b));
    let split = sup(&mut jy.iter().copied()) + sup(&mut jz.iter().copied());
    (joint - split).abs()
}

/// Outcome of the Monte Carlo checks on the long-call representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CallVerification {
    pub floor: f64,
    /// Lattice envelope of `ζ⁰ ∨ M` against `E_Q̄[(z(H_t)∨0)∨M]`.
    pub envelope: MaxPlusReport,
    /// The same with `z` shifted up by `shift`; should fail.
    pub control: MaxPlusReport,
    /// `λ E_Q[L_T−L_t] − α` against its representation simulated under `Q`.
    pub under_q: MaxPlusReport,
    /// The same process against `φ_t^{-1} E_Q̄[sup(J φ)]`.
    pub under_qbar: MaxPlusReport,
}

/// Runs the long-call checks from three levels at each time in `times`:
/// the start level, the midpoint towards the strike and a level as far
/// beyond the strike.
pub fn verify_call_maxplus(
    m: &MarketParams,
    pos: &CallPosition,
    lattice_steps: usize,
    times: &[f64],
    shift: f64,
    cfg: McConfig,
    exec: Exec,
) -> Result<CallVerification> {
    let prob = CallProblem::new(m, *pos)?;
    let sol = prob.solve()?;
    let floor = sol.floor.ok_or(Error::Infeasible {
        w0: m.w0(),
        min_w0: sol.min_budget - pos.lambda * pos.delta_c,
    })?;
    let lat = call_lattice(m, pos, floor, lattice_steps)?;
    let horizon = m.horizon();
    let x0 = m.x0();
    let y = prob.boundary.y;
    let h = lat.levels[1] - lat.levels[0];
    let snap = |v: f64| lat.levels[0] + h * ((v - lat.levels[0]) / h).round();
    let mut starts = Vec::new();
    for &t in times {
        for v in [x0, 0.5 * (x0 + y), y - 0.5 * (x0 - y)] {
            starts.push((lat.times[lat.time_index(t)], snap(v)));
        }
    }
    let steps_per_unit = cfg.n_steps as f64 / horizon;
    let drift = Measure::QBar.level_drift(m);

    let envelope_at = |t: f64, x: f64| lat.value_at(lat.time_index(t), x);
    let sup_shifted = |s: f64| {
        let prob = &prob;
        move |v: &PathView| {
            let hit = v.first_crossing(y).filter(|&u| u < horizon);
            let top = hit.map_or(0.0, |u| (prob.z(u) + s).max(0.0));
            top.max(floor)
        }
    };
    let sup_true = sup_shifted(0.0);
    let sup_wrong = sup_shifted(shift);
    let run =
        |sup: &(dyn Fn(&PathView) -> f64 + Sync), cand: &(dyn Fn(f64, f64) -> f64 + Sync), drift: f64, seed: u64| {
            verify_maxplus(
                &MaxPlusProblem {
                    drift,
                    horizon,
                    steps_per_unit,
                    sup_index: sup,
                    candidate: cand,
                },
                &starts,
                McConfig {
                    seed: Seed(seed),
                    ..cfg
                },
                exec,
            )
        };
    let envelope = run(&sup_true, &envelope_at, drift, cfg.seed.0)?;
    let control = run(&sup_wrong, &envelope_at, drift, cfg.seed.0)?;

    // X = λ·ELT − α is a Q-supermartingale whose index lives on strike hits
    let kd = pos.kd(m);
    let sigma = m.sigma();
    let lambda = pos.lambda;
    let alpha = m.alpha();
    let x_q = |t: f64, x: f64| lambda * expected_local_time(m.price_at(x), kd, horizon - t, sigma) - alpha;
    let sup_q = |v: &PathView| match v.first_crossing(y).filter(|&u| u < horizon) {
        Some(u) => lambda * atm_local_time(kd, horizon - u, sigma) - alpha,
        None => -alpha,
    };
    // dQ̄/dQ on F_t is 1/φ_t, so the index under Q̄ is J·φ
    let sup_qbar = |v: &PathView| {
        let t0 = v.t0;
        let scale = m.phi_level(t0, v.levels[0]);
        let top = match v.first_crossing(y).filter(|&u| u < horizon) {
            Some(u) => prob.z(u).max(-alpha * m.phi_level(horizon, v.last())),
            None => -alpha * m.phi_level(horizon, v.last()),
        };
        top / scale
    };
    let under_q = run(&sup_q, &x_q, Measure::Q.level_drift(m), cfg.seed.0 ^ 0x5151)?;
    let under_qbar = run(&sup_qbar, &x_q, drift, cfg.seed.0 ^ 0xa2a2)?;
    Ok(CallVerification {
        floor,
        envelope,
        control,
        under_q,
        under_qbar,
    })
}
