//! Exit criteria for the engine. Each check prints one PASS or FAIL line;
//! the process fails if any check fails.

use intrinsic_engine::arbitrage::{check_consistency, construct_arbitrage, inject_violation, CallCurve, Condition};
use intrinsic_engine::bs::bs_call;
use intrinsic_engine::maxplus::{
    best_lambda, call_lattice_value, expected_sup_j, lambda_sweep, solve_m, verify_call_maxplus, zeta, CallPosition,
};
use intrinsic_engine::mc::{ks_band_99, ks_distance, sample_increments, McConfig};
use intrinsic_engine::onetouch::{
    hobson_optimal_strike, minimal_w0, onetouch_price, onetouch_price_integral, onetouch_price_mc, sweep_strike,
    zeta_hat_dynamic, zeta_hat_semi_static, HedgeMode, OneTouchOptions, OneTouchSpec,
};
use intrinsic_engine::passage::{
    gamma0, gamma1, gamma1_laplace, gamma1_transform, gamma2, hit_probability, laplace_invert, mc_passage_times,
    EulerParams, LineBoundary,
};
use intrinsic_engine::quad::{integrate_sqrt_left, QuadOptions};
use intrinsic_engine::special::norm_cdf;
use intrinsic_engine::{Exec, MarketInputs, MarketParams, Measure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

type Check = std::result::Result<String, String>;
type NamedCheck = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn call_market(w0: f64) -> MarketParams {
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

fn onetouch_market(w0: f64) -> MarketParams {
    MarketParams::new(MarketInputs {
        alpha: 0.1,
        ..call_market(w0).inputs()
    })
    .unwrap()
}

fn call_position(lambda: f64) -> CallPosition {
    CallPosition::new(0.85, lambda, 0.02).unwrap()
}

/// Passage line for the call strike under Q̄.
fn strike_line() -> LineBoundary {
    let m = call_market(0.15);
    let kd = 0.85 * m.discount_horizon();
    LineBoundary::new(m.x0(), m.level(kd), Measure::QBar.beta(&m)).unwrap()
}

fn atm_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(0.05..5.0);
        let t = rng.random_range(0.01..10.0);
        let sigma = rng.random_range(0.02..2.0);
        let r = rng.random_range(0.0..0.15);
        let kd = k * f64::exp(-r * t);
        let atm = kd * (2.0 * norm_cdf(0.5 * sigma * f64::sqrt(t)) - 1.0);
        worst = worst.max((bs_call(kd, k, t, sigma, r) - atm).abs());
    }
    ensure!(worst < 1e-10, "max error {worst:e}");
    Ok(format!("max error {worst:.1e} over 10000 draws"))
}

fn density_triangulation() -> Check {
    let b = strike_line();
    let p = EulerParams::default();
    let mut sup: f64 = 0.0;
    for i in 0..=1990 {
        let u = 0.01 + 0.001 * i as f64;
        let d = (gamma1_laplace(u, &b, p).map_err(|e| e.to_string())? - gamma1(u, &b).unwrap()).abs();
        sup = sup.max(d);
    }
    ensure!(sup < 1e-6, "closed form vs inversion {sup:e}");
    let horizon = 2.0;
    let times = mc_passage_times(&b, horizon, McConfig::new(100_000, 1024, 11), Exec::default()).unwrap();
    let band = ks_band_99(times.len());
    let closed = ks_distance(&times, |t| hit_probability(&b, t.min(horizon)).unwrap());
    let inverted = ks_distance(&times, |t| {
        laplace_invert(|s| gamma1_transform(&b, s) / s, t.min(horizon), p).unwrap_or(f64::NAN)
    });
    ensure!(closed < band, "closed-form KS {closed} over band {band}");
    ensure!(inverted < band, "inversion KS {inverted} over band {band}");
    Ok(format!(
        "sup diff {sup:.1e}; KS {closed:.4}/{inverted:.4} within {band:.4}"
    ))
}

fn chapman_kolmogorov() -> Check {
    let b = strike_line();
    let mut worst: f64 = 0.0;
    for (dv, t) in [(0.3, 0.5), (0.8, 1.0), (1.6, 2.0)] {
        let v = b.x + dv;
        let restart = integrate_sqrt_left(
            |u| gamma1(u, &b).unwrap() * gamma0(v, t - u, b.at(u)).unwrap_or(0.0),
            0.0,
            t,
            QuadOptions::abs(1e-12),
        )
        .map_err(|e| e.to_string())?;
        let gap = (gamma0(v, t, b.x).unwrap() - gamma2(v, t, &b).unwrap() - restart).abs();
        worst = worst.max(gap);
    }
    ensure!(worst < 1e-6, "identity gap {worst:e}");
    Ok(format!("max gap {worst:.1e} at three points"))
}

fn maxplus_verification() -> Check {
    let m = call_market(0.15);
    let v = verify_call_maxplus(
        &m,
        &call_position(3.1),
        800,
        &[0.0, 0.5, 1.0],
        0.1,
        McConfig::new(20_000, 800, 101),
        Exec::default(),
    )
    .map_err(|e| e.to_string())?;
    let z = v.envelope.max_abs_z();
    let control = v.control.max_abs_z();
    ensure!(v.envelope.within(3.0), "envelope max |z| {z:.2}");
    ensure!(
        !v.control.within(3.0),
        "shifted control passed with max |z| {control:.2}"
    );
    Ok(format!("max |z| {z:.2}; control max |z| {control:.1}"))
}

fn lambda_grid() -> Vec<f64> {
    (1..=60).map(|i| 0.1 * i as f64).collect()
}

fn m_equation() -> Check {
    let m = call_market(0.15);
    let mut linear = 0;
    let mut curved = Vec::new();
    for l in (0..=60).map(|i| 0.06 * i as f64) {
        let s = solve_m(&m, &call_position(l)).map_err(|e| e.to_string())?;
        if !s.feasible {
            continue;
        }
        ensure!(
            s.residual.abs() < 1e-9 * (1.0 + m.w0()),
            "residual {:e} at {l}",
            s.residual
        );
        let floor = s.floor.unwrap();
        if s.rstar == Some(0.0) {
            ensure!(
                (floor - (0.15 + 0.02 * l)).abs() < 1e-12,
                "M({l}) = {floor} off the line"
            );
            linear += 1;
        } else {
            curved.push((l, floor));
        }
    }
    ensure!(
        linear >= 2 && curved.len() >= 3,
        "segments too short: {linear} linear, {} curved",
        curved.len()
    );
    for w in curved.windows(3) {
        let d2 = w[2].1 - 2.0 * w[1].1 + w[0].1;
        ensure!(d2 <= 1e-12, "second difference {d2:e} at {}", w[1].0);
    }
    Ok(format!("{linear} points on the line, {} concave points", curved.len()))
}

fn headline_lambda() -> Check {
    let m = call_market(0.15);
    let rows = lambda_sweep(&m, 0.85, 0.02, &lambda_grid(), 400, Exec::default()).map_err(|e| e.to_string())?;
    let best = best_lambda(&rows).ok_or("no feasible lambda")?;
    ensure!((2.8..=3.4).contains(&best.lambda), "argmax at {}", best.lambda);
    Ok(format!("argmax lambda {:.1}", best.lambda))
}

fn lattice_agreement() -> Check {
    let m = call_market(0.15);
    let pos = call_position(3.1);
    let floor = solve_m(&m, &pos)
        .map_err(|e| e.to_string())?
        .floor
        .ok_or("infeasible")?;
    let exact = expected_sup_j(&m, &pos, floor).unwrap();
    let gap = |n| call_lattice_value(&m, &pos, floor, n).map(|v| (v - exact).abs() / exact);
    let g400 = gap(400).map_err(|e| e.to_string())?;
    let g800 = gap(800).map_err(|e| e.to_string())?;
    let ratio = g400 / g800;
    ensure!(g400 < 5e-3, "relative gap {g400:e} at 400");
    ensure!(
        (1.5..=2.7).contains(&ratio),
        "gap ratio {ratio:.2} ({g400:e} -> {g800:e})"
    );
    Ok(format!("gap {g400:.1e} at 400, {g800:.1e} at 800"))
}

fn onetouch_price_check() -> Check {
    let m = onetouch_market(0.1);
    let closed = onetouch_price(&m, 1.9).unwrap();
    let quad = onetouch_price_integral(&m, 1.9).unwrap();
    let mc = onetouch_price_mc(&m, 1.9, McConfig::new(100_000, 1024, 23), Exec::default()).unwrap();
    for (name, v) in [("closed", closed), ("quadrature", quad), ("simulation", mc.mean)] {
        ensure!((v - 0.41).abs() <= 0.01, "{name} price {v}");
    }
    ensure!((closed - quad).abs() < 1e-8, "routes differ by {:e}", closed - quad);
    ensure!(mc.z_score(closed).abs() < 3.0, "simulation z {:.2}", mc.z_score(closed));
    Ok(format!("{closed:.5} / {quad:.5} / {:.5}±{:.5}", mc.mean, mc.std_err))
}

fn onetouch_thresholds() -> Check {
    let m = onetouch_market(0.1);
    let spec = OneTouchSpec::new(1.9, 1.3, 0.02).unwrap();
    let opts = OneTouchOptions::default();
    let semi = minimal_w0(&m, &spec, HedgeMode::SemiStatic, opts, Exec::default()).map_err(|e| e.to_string())?;
    let dynamic = minimal_w0(&m, &spec, HedgeMode::DynamicOnly, opts, Exec::default()).map_err(|e| e.to_string())?;
    let msg = format!("semi-static {semi:.4}, dynamic-only {dynamic:.4}");
    ensure!(semi < dynamic, "ordering broken: {msg}");
    let mut out = Vec::new();
    if (semi - 0.08).abs() > 0.02 {
        out.push("semi-static outside 0.08±0.02");
    }
    if (dynamic - 0.18).abs() > 0.03 {
        out.push("dynamic-only outside 0.18±0.03");
    }
    ensure!(out.is_empty(), "{}: {msg}", out.join(", "));
    Ok(msg)
}

fn ce_unimodal() -> Check {
    let m = onetouch_market(0.1);
    let spec = OneTouchSpec::new(1.9, 1.3, 0.02).unwrap();
    let strikes: Vec<f64> = (1..52).map(|i| 0.5 + 0.025 * i as f64).collect();
    let rows = sweep_strike(&m, &spec, &strikes, Exec::default()).map_err(|e| e.to_string())?;
    let pts: Vec<(f64, f64)> = strikes
        .iter()
        .zip(&rows)
        .filter_map(|(&k, r)| r.ce.map(|c| (k, c)))
        .collect();
    ensure!(pts.len() >= 5, "only {} feasible strikes", pts.len());
    let first = strikes.iter().position(|&k| k == pts[0].0).unwrap();
    ensure!(
        strikes[first..first + pts.len()]
            .iter()
            .zip(&pts)
            .all(|(&k, p)| k == p.0),
        "feasible strikes are not contiguous"
    );
    let peak = pts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap()
        .0;
    ensure!(
        pts[..=peak].windows(2).all(|w| w[1].1 > w[0].1),
        "not increasing before the peak"
    );
    ensure!(
        pts[peak..].windows(2).all(|w| w[1].1 < w[0].1),
        "not decreasing after the peak"
    );
    let hobson = hobson_optimal_strike(&m, 1.9).unwrap();
    let k_peak = pts[peak].0;
    ensure!(
        (k_peak - hobson).abs() <= 0.2,
        "peak {k_peak} vs optimal strike {hobson}"
    );
    Ok(format!(
        "peak at K={k_peak:.3}, optimal strike {hobson:.3}, feasible on [{:.3}, {:.3}]",
        pts[0].0,
        pts[pts.len() - 1].0
    ))
}

fn arbitrage_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let m = MarketParams::new(MarketInputs {
            s0: rng.random_range(0.5..2.0),
            mu: 0.05,
            r: rng.random_range(0.0..0.06),
            sigma: rng.random_range(0.1..0.9),
            horizon: rng.random_range(0.25..4.0),
            p: 0.5,
            w0: 0.1,
            alpha: 0.1,
        })
        .unwrap();
        let n = rng.random_range(4..20);
        let top = m.s0() * rng.random_range(1.5..3.0);
        let strikes: Vec<f64> = (0..n).map(|j| top * j as f64 / (n - 1) as f64).collect();
        let clean = CallCurve::black_scholes(&m, &strikes).unwrap();
        let rep = check_consistency(&clean);
        ensure!(rep.is_consistent(), "false positive on curve {i}: {:?}", rep.violations);
        let cond = Condition::ALL[i % 5];
        let size = m.s0() * rng.random_range(1e-4..2e-2);
        let bad = inject_violation(&clean, cond, size, rng.random_range(0..n)).map_err(|e| e.to_string())?;
        let rep = check_consistency(&bad);
        ensure!(rep.flags(cond), "curve {i}: {cond:?} not flagged");
        for v in rep.violations.iter().filter(|v| v.condition() == cond) {
            let p = construct_arbitrage(&bad, v).map_err(|e| format!("curve {i}: {e}"))?;
            ensure!(
                p.epsilon > 0.0 && p.certificate.intrinsic_bound >= 0.0,
                "curve {i}: bad certificate {p:?}"
            );
            ensure!(p.verify(&bad).unwrap(), "curve {i}: certificate does not verify");
        }
    }
    Ok("100 injected violations flagged and certified, no false positives".into())
}

fn supermartingales() -> Check {
    let cfg = McConfig::new(100_000, 400, 29);
    let steps: Vec<usize> = (0..=8).map(|k| 50 * k).collect();
    let worst = |incs: &[intrinsic_engine::mc::Estimate]| {
        incs.iter()
            .map(|e| e.mean / e.std_err.max(1e-300))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let m = call_market(0.15);
    let pos = call_position(3.1);
    let call = sample_increments(
        Exec::default(),
        cfg,
        m.x0(),
        Measure::QBar.level_drift(&m),
        m.horizon(),
        &steps,
        |v, i| zeta(&m, &pos, v.time(i), m.price_at(v.levels[i])).unwrap(),
    );

    let mo = onetouch_market(0.1);
    let spec = OneTouchSpec::new(1.9, 1.3, 0.02).unwrap();
    let yb = mo.level(1.9 * mo.discount_horizon());
    let hit = |v: &intrinsic_engine::mc::PathView, i: usize| v.first_crossing(yb).is_some_and(|u| u <= v.time(i));
    let q_drift = Measure::Q.level_drift(&mo);
    let semi = sample_increments(Exec::default(), cfg, mo.x0(), q_drift, mo.horizon(), &steps, |v, i| {
        zeta_hat_semi_static(&mo, &spec, v.time(i), v.levels[i], hit(v, i)).unwrap()
    });
    let dynamic = sample_increments(Exec::default(), cfg, mo.x0(), q_drift, mo.horizon(), &steps, |v, i| {
        zeta_hat_dynamic(&mo, &spec, v.time(i), v.levels[i], hit(v, i)).unwrap()
    });
    let (a, b, c) = (worst(&call), worst(&semi), worst(&dynamic));
    ensure!(a <= 3.0, "call index drift {a:.2} standard errors above zero");
    ensure!(b <= 3.0, "semi-static index drift {b:.2} standard errors above zero");
    ensure!(c <= 3.0, "dynamic index drift {c:.2} standard errors above zero");
    Ok(format!(
        "largest drift in standard errors: call {a:.2}, semi-static {b:.2}, dynamic {c:.2}"
    ))
}

fn main() -> ExitCode {
    let checks: [NamedCheck; 12] = [
        ("atm identity", atm_identity),
        ("density triangulation", density_triangulation),
        ("chapman-kolmogorov", chapman_kolmogorov),
        ("max-plus verification", maxplus_verification),
        ("floor equation", m_equation),
        ("optimal call quantity", headline_lambda),
        ("lattice oracle agreement", lattice_agreement),
        ("one-touch price", onetouch_price_check),
        ("one-touch feasibility thresholds", onetouch_thresholds),
        ("ce vs strike unimodality", ce_unimodal),
        ("arbitrage suite", arbitrage_suite),
        ("supermartingale drift", supermartingales),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {name}: {msg} ({secs:.1}s)"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    }
}
