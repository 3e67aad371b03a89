use crate::config::{parse_measure, RunConfig};
use crate::error::CliError;
use crate::output::Output;
use intrinsic_engine::arbitrage::{check_consistency, construct_arbitrage, inject_violation, CallCurve, Condition};
use intrinsic_engine::bs::{bs_call, CallQuote};
use intrinsic_engine::maxplus::{
    best_lambda, call_lattice_value, expected_sup_j, lambda_sweep, solve_m, sweep_table, terminal_wealth_cdf, zeta,
    CallPosition,
};
use intrinsic_engine::mc::{ks_band_99, ks_distance, sample_increments, McConfig};
use intrinsic_engine::onetouch::{
    hobson_optimal_strike, minimal_w0, onetouch_price, onetouch_price_integral, onetouch_price_mc,
    semi_static_lattice_value, strike_table, sweep_strike, sweep_w0, w0_table, HedgeMode, OneTouchOptions,
    OneTouchSpec, SemiStaticLaw, WealthLaw,
};
use intrinsic_engine::passage::{
    gamma0, gamma1, gamma1_laplace, gamma2, hit_probability, mc_passage_times, EulerParams, LineBoundary,
};
use intrinsic_engine::quad::{integrate_sqrt_left, QuadOptions};
use intrinsic_engine::special::norm_cdf;
use intrinsic_engine::table::{format_num, Cell, ResultTable};
use intrinsic_engine::{Exec, MarketParams, Measure};
use std::path::Path;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub out: Output,
}

impl Ctx<'_> {
    fn exec(&self) -> Exec {
        if self.cfg.run.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }
}

fn onetouch_setup(cfg: &RunConfig) -> Result<(MarketParams, OneTouchSpec), CliError> {
    let ot = &cfg.onetouch;
    let m = cfg.market.params()?.with_alpha(ot.alpha)?;
    let spec = OneTouchSpec::new(ot.barrier, ot.strike, ot.premium)?;
    Ok((m, spec))
}

pub fn call_sweep(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let m = cfg.market.params()?;
    let lambdas = cfg.call.lambdas.values()?;
    let rows = lambda_sweep(
        &m,
        cfg.call.strike,
        cfg.call.delta_c,
        &lambdas,
        cfg.call.lattice_steps,
        ctx.exec(),
    )?;
    match best_lambda(&rows) {
        Some(b) => println!(
            "best lambda {} with utility {}",
            format_num(b.lambda),
            format_num(b.utility.unwrap_or(0.0))
        ),
        None => println!("no feasible lambda on the grid"),
    }
    let path = ctx.out.write("call_sweep.csv", sweep_table(&rows)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn call_cdf(ctx: &mut Ctx, measure: Option<&str>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let m = cfg.market.params()?;
    let measure = parse_measure(measure.unwrap_or(&cfg.call.measure))?;
    let levels = cfg.call.cdf_levels.values()?;
    for &l in &cfg.call.cdf_lambdas {
        let pos = CallPosition::new(cfg.call.strike, l, cfg.call.delta_c)?;
        let table = terminal_wealth_cdf(&m, &pos, &levels, measure)?;
        let path = ctx
            .out
            .write(&format!("cdf_lambda_{}_{}.csv", format_num(l), measure.name()), table)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn onetouch_utility(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let ot = &cfg.onetouch;
    let (m, spec) = onetouch_setup(cfg)?;
    let modes = ot
        .modes
        .iter()
        .map(|s| s.parse::<HedgeMode>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("onetouch.modes: {e}")))?;
    let opts = OneTouchOptions {
        lattice_steps: ot.lattice_steps,
        floor_points: ot.floor_points,
    };
    let rows = sweep_w0(&m, &spec, &modes, &ot.wealth.values()?, opts, ctx.exec())?;
    for mode in modes {
        if let Some(r) = rows.iter().find(|r| r.mode == mode) {
            println!("{mode}: minimal w0 {}", format_num(r.min_w0));
        }
    }
    let mut table = w0_table(&rows)?;
    table.add_provenance("barrier", &format_num(spec.barrier()));
    table.add_provenance("strike", &format_num(spec.strike()));
    table.add_provenance("premium", &format_num(spec.premium()));
    let path = ctx.out.write("onetouch_utility.csv", table)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn onetouch_ce_k(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let (m, spec) = onetouch_setup(cfg)?;
    let m = m.with_w0(cfg.onetouch.w0)?;
    let strikes: Vec<f64> = cfg.onetouch.strikes.values()?;
    if let Some(&k) = strikes.iter().find(|&&k| !(k > 0.0 && k < spec.barrier())) {
        return Err(CliError::Config(format!(
            "onetouch.strikes: {k} is outside (0, barrier)"
        )));
    }
    let rows = sweep_strike(&m, &spec, &strikes, ctx.exec())?;
    let hobson = hobson_optimal_strike(&m, spec.barrier())?;
    println!("cost-minimising strike {}", format_num(hobson));
    let mut table = strike_table(&strikes, &rows)?;
    table.add_provenance("w0", &format_num(m.w0()));
    table.add_provenance("optimal_strike", &format_num(hobson));
    let path = ctx.out.write("onetouch_ce_k.csv", table)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Reads a `strike,price` file; `#` lines and blank lines are skipped.
pub fn read_curve(path: &Path, m: &MarketParams) -> Result<CallCurve, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let bad = |n: usize, what: &str| CliError::Config(format!("{}:{}: {what}", path.display(), n + 1));
    match lines.next() {
        Some((_, h)) if h.split(',').map(str::trim).eq(["strike", "price"]) => {}
        Some((n, _)) => return Err(bad(n, "expected header `strike,price`")),
        None => return Err(CliError::Config(format!("{}: empty curve file", path.display()))),
    }
    let mut quotes = Vec::new();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(bad(n, "expected two fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("`{s}` is not a number")));
        quotes.push(CallQuote {
            strike: num(cells[0])?,
            maturity: m.horizon(),
            price: num(cells[1])?,
        });
    }
    CallCurve::new(quotes, m.s0(), m.discount_horizon())
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn arb_check(ctx: &mut Ctx, curve: Option<&Path>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let m = cfg.market.params()?;
    let path = curve
        .or(cfg.arbitrage.curve.as_deref())
        .ok_or_else(|| CliError::Config("arb-check needs --curve or arbitrage.curve".into()))?;
    let curve = read_curve(path, &m)?;
    let report = check_consistency(&curve);
    for c in &report.not_checkable {
        println!("not checkable: {} (no quote at strike 0)", c.name());
    }
    let mut violations = ResultTable::new(
        "arb_violations",
        &["violation", "condition", "k1", "k2", "k3", "epsilon", "intrinsic_bound"],
    );
    let mut legs = ResultTable::new("arb_legs", &["violation", "instrument", "strike", "quantity"]);
    if report.is_consistent() {
        println!("no violations");
    }
    for (i, v) in report.violations.iter().enumerate() {
        let p = construct_arbitrage(&curve, v)?;
        println!("violation {i}: {v}");
        println!("  {}", p.certificate.text);
        let ks = v.strikes();
        let k = |j: usize| ks.get(j).copied().into();
        let id = Cell::Num(i as f64);
        violations.push(vec![
            id.clone(),
            Cell::Text(v.condition().name().into()),
            k(0),
            k(1),
            k(2),
            Cell::Num(p.epsilon),
            Cell::Num(p.certificate.intrinsic_bound),
        ])?;
        for l in &p.legs {
            legs.push(vec![
                id.clone(),
                "call".into(),
                Cell::Num(l.strike),
                Cell::Num(l.quantity),
            ])?;
        }
        if p.asset != 0.0 {
            legs.push(vec![id.clone(), "asset".into(), Cell::Empty, Cell::Num(p.asset)])?;
        }
        if p.cash != 0.0 {
            legs.push(vec![id, "cash_at_maturity".into(), Cell::Empty, Cell::Num(p.cash)])?;
        }
    }
    ctx.out.write("arb_violations.csv", violations)?;
    ctx.out.write("arb_legs.csv", legs)?;
    Ok(())
}

fn density_line(cfg: &RunConfig, m: &MarketParams) -> Result<LineBoundary, CliError> {
    let d = &cfg.densities;
    let measure = parse_measure(&d.measure)?;
    let x = d.x.unwrap_or(m.x0());
    let y = d.y.unwrap_or_else(|| m.level(cfg.call.strike * m.discount_horizon()));
    let beta = d.beta.unwrap_or_else(|| measure.beta(m));
    Ok(LineBoundary::new(x, y, beta)?)
}

pub fn densities(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let m = cfg.market.params()?;
    let b = density_line(cfg, &m)?;
    let mut g1 = ResultTable::new("gamma1", &["u", "gamma1"]);
    for u in cfg.densities.times.values()? {
        g1.push_nums(&[u, gamma1(u, &b)?])?;
    }
    let t = cfg.densities.t;
    if !(t > 0.0) {
        return Err(CliError::Config(format!("densities.t = {t} must be positive")));
    }
    let n = cfg.densities.v_points.max(2);
    let edge = b.at(t);
    let reach = 6.0 * t.sqrt();
    let (lo, hi) = if b.gap() > 0.0 {
        (b.x.min(edge) - reach, edge)
    } else {
        (edge, b.x.max(edge) + reach)
    };
    let mut g2 = ResultTable::new("gamma2", &["v", "gamma2"]);
    for i in 0..n {
        let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        g2.push_nums(&[v, gamma2(v, t, &b)?])?;
    }
    for table in [&mut g1, &mut g2] {
        table.add_provenance("x", &format_num(b.x));
        table.add_provenance("y", &format_num(b.y));
        table.add_provenance("beta", &format_num(b.beta));
    }
    g2.add_provenance("t", &format_num(t));
    ctx.out.write("gamma1.csv", g1)?;
    ctx.out.write("gamma2.csv", g2)?;
    println!("wrote gamma1.csv and gamma2.csv to {}", ctx.out.dir().display());
    Ok(())
}

type Check = Result<String, String>;
type CheckFn<'a> = Box<dyn Fn() -> Result<Check, CliError> + 'a>;

fn check(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Invariant and oracle checks at the configured sizes; fails unless all pass.
pub fn verify(ctx: &mut Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let exec = ctx.exec();
    let v = &cfg.verify;
    let m = cfg.market.params()?;
    let (mo, spec) = onetouch_setup(cfg)?;
    let mc = |k: u64| McConfig::new(v.mc_paths, v.mc_steps, cfg.run.seed.wrapping_add(k));
    let line = LineBoundary::new(
        m.x0(),
        m.level(cfg.call.strike * m.discount_horizon()),
        Measure::QBar.beta(&m),
    )?;
    let pos = CallPosition::new(cfg.call.strike, 1.0, cfg.call.delta_c)?;

    let checks: Vec<(&str, CheckFn)> = vec![
        (
            "atm identity",
            Box::new(|| {
                let mut worst: f64 = 0.0;
                for i in 1..=40 {
                    for j in 1..=25 {
                        let (k, t, s) = (0.1 * i as f64, 0.2 * j as f64, 0.05 + 0.04 * j as f64);
                        let kd = k * (-m.r() * t).exp();
                        let atm = kd * (2.0 * norm_cdf(0.5 * s * t.sqrt()) - 1.0);
                        worst = worst.max((bs_call(kd, k, t, s, m.r()) - atm).abs());
                    }
                }
                Ok(check(worst < 1e-10, format!("max error {worst:.1e}")))
            }),
        ),
        (
            "passage density routes",
            Box::new(|| {
                let mut sup: f64 = 0.0;
                for i in 0..200 {
                    let u = 0.01 + 0.01 * i as f64;
                    sup = sup.max((gamma1_laplace(u, &line, EulerParams::default())? - gamma1(u, &line)?).abs());
                }
                Ok(check(sup < 1e-6, format!("sup difference {sup:.1e}")))
            }),
        ),
        (
            "chapman-kolmogorov",
            Box::new(|| {
                let mut worst: f64 = 0.0;
                for (dv, t) in [(0.3, 0.5), (0.8, 1.0), (1.6, 2.0)] {
                    let x = line.x + if line.gap() > 0.0 { -dv } else { dv };
                    let restart = integrate_sqrt_left(
                        |u| gamma1(u, &line).unwrap_or(0.0) * gamma0(x, t - u, line.at(u)).unwrap_or(0.0),
                        0.0,
                        t,
                        QuadOptions::abs(1e-12),
                    )?;
                    worst = worst.max((gamma0(x, t, line.x)? - gamma2(x, t, &line)? - restart).abs());
                }
                Ok(check(worst < 1e-6, format!("max gap {worst:.1e}")))
            }),
        ),
        (
            "passage simulation",
            Box::new(|| {
                let h = m.horizon();
                let times = mc_passage_times(&line, h, mc(1), exec)?;
                let d = ks_distance(&times, |t| hit_probability(&line, t.min(h)).unwrap_or(f64::NAN));
                let band = ks_band_99(times.len());
                Ok(check(d < band, format!("KS {d:.4} against band {band:.4}")))
            }),
        ),
        (
            "call lattice oracle",
            Box::new(|| {
                // a quantity where the floor binds only part of the time
                let pos = CallPosition::new(cfg.call.strike, 3.1, cfg.call.delta_c)?;
                let sol = solve_m(&m, &pos)?;
                let floor = sol.floor.ok_or(intrinsic_engine::Error::Infeasible {
                    w0: m.w0(),
                    min_w0: f64::NAN,
                })?;
                let exact = expected_sup_j(&m, &pos, floor)?;
                let lat = call_lattice_value(&m, &pos, floor, v.lattice_steps)?;
                let gap = (lat - exact).abs() / exact;
                Ok(check(gap < 5e-3, format!("relative gap {gap:.1e}")))
            }),
        ),
        (
            "call index drift",
            Box::new(|| {
                let steps: Vec<usize> = (0..=4).map(|k| k * v.mc_steps / 4).collect();
                let inc = sample_increments(
                    exec,
                    mc(2),
                    m.x0(),
                    Measure::QBar.level_drift(&m),
                    m.horizon(),
                    &steps,
                    |p, i| zeta(&m, &pos, p.time(i), m.price_at(p.levels[i])).unwrap_or(f64::NAN),
                );
                let worst = inc
                    .iter()
                    .map(|e| e.mean / e.std_err.max(1e-300))
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok(check(worst <= 3.0, format!("largest drift {worst:.2} standard errors")))
            }),
        ),
        (
            "one-touch price routes",
            Box::new(|| {
                let closed = onetouch_price(&mo, spec.barrier())?;
                let quad = onetouch_price_integral(&mo, spec.barrier())?;
                let sim = onetouch_price_mc(&mo, spec.barrier(), mc(3), exec)?;
                let z = sim.z_score(closed);
                Ok(check(
                    (closed - quad).abs() < 1e-8 && z.abs() < 3.0,
                    format!("{closed:.5}, quadrature {quad:.5}, simulation z {z:.2}"),
                ))
            }),
        ),
        (
            "semi-static lattice oracle",
            Box::new(|| {
                let law = SemiStaticLaw::new(&mo, &spec)?;
                let closed = law.excess(0.0)?;
                let lat = semi_static_lattice_value(&mo, &spec, 0.0, v.lattice_steps)?;
                let gap = (lat - closed).abs() / closed;
                Ok(check(gap < 0.01, format!("relative gap {gap:.1e}")))
            }),
        ),
        (
            "hedge mode ordering",
            Box::new(|| {
                let opts = OneTouchOptions {
                    lattice_steps: cfg.onetouch.lattice_steps,
                    floor_points: cfg.onetouch.floor_points,
                };
                let semi = minimal_w0(&mo, &spec, HedgeMode::SemiStatic, opts, exec)?;
                let dynamic = minimal_w0(&mo, &spec, HedgeMode::DynamicOnly, opts, exec)?;
                Ok(check(semi < dynamic, format!("minimal w0 {semi:.4} vs {dynamic:.4}")))
            }),
        ),
        (
            "arbitrage certificates",
            Box::new(|| {
                let strikes: Vec<f64> = (0..16).map(|i| 0.2 * i as f64).collect();
                let clean = CallCurve::black_scholes(&m, &strikes)?;
                if !check_consistency(&clean).is_consistent() {
                    return Ok(Err("false positive on a model curve".into()));
                }
                for (i, c) in Condition::ALL.into_iter().enumerate() {
                    let bad = inject_violation(&clean, c, 0.01, 3 * i)?;
                    let rep = check_consistency(&bad);
                    let Some(viol) = rep.violations.iter().find(|x| x.condition() == c) else {
                        return Ok(Err(format!("{} not flagged", c.name())));
                    };
                    if !construct_arbitrage(&bad, viol)?.verify(&bad)? {
                        return Ok(Err(format!("{} certificate invalid", c.name())));
                    }
                }
                Ok(Ok("five injected violations certified".into()))
            }),
        ),
    ];

    let mut table = ResultTable::new("verify", &["check", "passed"]);
    let mut failed = 0;
    for (name, run) in checks {
        let outcome = run().unwrap_or_else(|e| Err(e.to_string()));
        match &outcome {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
        table.push(vec![Cell::Text(name.replace(' ', "_")), outcome.is_ok().into()])?;
    }
    ctx.out.write("verify.csv", table)?;
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} check(s) failed")));
    }
    Ok(())
}
