//! Seeded Monte Carlo plumbing: path generation, Brownian-bridge crossing
//! detection and summary statistics.
//!
//! Every path draws from its own ChaCha8 stream, selected by the path
//! index, so results do not depend on how paths are spread over threads.

use crate::market::{MarketParams, Measure};
use crate::par::{self, Exec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Explicit RNG seed, recorded with every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

/// Monte Carlo sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: Seed,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self {
            n_paths,
            n_steps,
            seed: Seed(seed),
        }
    }
}

/// Generator for path `index` under `seed`.
pub fn path_rng(seed: Seed, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(index);
    rng
}

/// One simulated path of a unit-variance Brownian motion with drift, on a
/// uniform grid, with one uniform per step for bridge-crossing tests.
#[derive(Debug, Clone)]
pub struct PathView {
    pub t0: f64,
    pub dt: f64,
    pub levels: Vec<f64>,
    pub uniforms: Vec<f64>,
}

impl PathView {
    fn with_steps(n: usize) -> Self {
        Self {
            t0: 0.0,
            dt: 0.0,
            levels: Vec::with_capacity(n + 1),
            uniforms: Vec::with_capacity(n),
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.dt * i as f64
    }

    pub fn last(&self) -> f64 {
        *self.levels.last().expect("paths have at least one point")
    }

    /// First time the path meets `level`, testing each step with the exact
    /// Brownian-bridge crossing probability `exp(−2 d0 d1 / dt)`.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        self.first_crossing_from(level, 0)
    }

    pub fn first_crossing_from(&self, level: f64, start: usize) -> Option<f64> {
        let n = self.uniforms.len();
        for i in start..n {
            let d0 = self.levels[i] - level;
            let d1 = self.levels[i + 1] - level;
            if d0 == 0.0 {
                return Some(self.time(i));
            }
            if d0 * d1 <= 0.0 {
                return Some(self.time(i) + self.dt * d0 / (d0 - d1));
            }
            if self.uniforms[i] < (-2.0 * d0 * d1 / self.dt).exp() {
                return Some(self.time(i) + 0.5 * self.dt);
            }
        }
        None
    }

    /// Step index containing time `t`.
    pub fn step_of(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).floor().max(0.0) as usize).min(self.uniforms.len())
    }
}

fn fill_path<R: Rng>(rng: &mut R, view: &mut PathView, x0: f64, drift: f64, t0: f64, horizon: f64, n: usize) {
    let dt = horizon / n as f64;
    let sd = dt.sqrt();
    view.t0 = t0;
    view.dt = dt;
    view.levels.clear();
    view.uniforms.clear();
    view.levels.push(x0);
    let mut x = x0;
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        x += drift * dt + sd * z;
        view.levels.push(x);
        view.uniforms.push(rng.random::<f64>());
    }
}

/// Simulates paths of `x0 + drift·t + W_t` on `[t0, t0 + horizon]` and maps
/// each through `f`, in path order. Paths are streamed, not stored.
pub fn map_paths<R, F>(exec: Exec, cfg: McConfig, x0: f64, drift: f64, t0: f64, horizon: f64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(&PathView) -> R + Sync + Send,
{
    let n = cfg.n_steps.max(1);
    par::map_range_init(
        exec,
        cfg.n_paths,
        || PathView::with_steps(n),
        |view, i| {
            let mut rng = path_rng(cfg.seed, i as u64);
            fill_path(&mut rng, view, x0, drift, t0, horizon, n);
            f(view)
        },
    )
}

/// Stored batch of level paths `X = ln(S^D)/σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl PathBatch {
    /// Terminal discounted prices.
    pub fn terminal_prices(&self, m: &MarketParams) -> Vec<f64> {
        self.paths.iter().map(|p| m.price_at(*p.last().unwrap())).collect()
    }
}

/// Exact Gaussian-increment paths of the level process under `measure`,
/// starting at `ln(s0)/σ` over `[0, T]`.
pub fn simulate_paths(m: &MarketParams, measure: Measure, n_paths: usize, n_steps: usize, seed: Seed) -> PathBatch {
    let n = n_steps.max(1);
    let cfg = McConfig {
        n_paths,
        n_steps: n,
        seed,
    };
    let paths = map_paths(
        Exec::default(),
        cfg,
        m.x0(),
        measure.level_drift(m),
        0.0,
        m.horizon(),
        |v| v.levels.clone(),
    );
    let dt = m.horizon() / n as f64;
    PathBatch {
        times: (0..=n).map(|i| dt * i as f64).collect(),
        paths,
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self {
            mean,
            std_err: (var / n).sqrt(),
        }
    }

    /// Deviation of the estimate from `target` in standard errors. The
    /// error is floored at round-off level so that degenerate samples
    /// compare equal to targets that differ only in the last bits.
    pub fn z_score(&self, target: f64) -> f64 {
        let se = self.std_err.max(1e-12 * (1.0 + self.mean.abs()));
        (self.mean - target) / se
    }
}

/// Mean increments `E[Y_{s_{k+1}} − Y_{s_k}]` of a path functional
/// `Y_s = f(path, s)` between consecutive step indices in `steps`, on
/// paths of `x0 + drift·t + W_t` over `[0, horizon]`.
pub fn sample_increments<F>(
    exec: Exec,
    cfg: McConfig,
    x0: f64,
    drift: f64,
    horizon: f64,
    steps: &[usize],
    f: F,
) -> Vec<Estimate>
where
    F: Fn(&PathView, usize) -> f64 + Sync + Send,
{
    let incs = map_paths(exec, cfg, x0, drift, 0.0, horizon, |v| {
        steps.windows(2).map(|w| f(v, w[1]) - f(v, w[0])).collect::<Vec<f64>>()
    });
    (0..steps.len().saturating_sub(1))
        .map(|k| Estimate::from_samples(&incs.iter().map(|r| r[k]).collect::<Vec<f64>>()))
        .collect()
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// a CDF. Samples may include `+∞` for defective laws.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        if x.is_finite() {
            let f = cdf(x);
            d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        }
        i = j;
    }
    d
}

/// Distance below which the empirical CDF of `n` samples stays with
/// probability 0.99, from the Dvoretzky-Kiefer-Wolfowitz-Massart bound.
pub fn ks_band_99(n: usize) -> f64 {
    ((2.0f64 / 0.01).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::figure_market;

    #[test]
    fn seeded_paths_are_reproducible() {
        let m = figure_market(0.1);
        let a = simulate_paths(&m, Measure::Q, 8, 16, Seed(7));
        let b = simulate_paths(&m, Measure::Q, 8, 16, Seed(7));
        assert_eq!(a, b);
        let c = simulate_paths(&m, Measure::Q, 8, 16, Seed(8));
        assert_ne!(a, c);
        assert_eq!(a.times.len(), 17);
        assert_eq!(a.times[16], 2.0);
    }

    #[test]
    fn sequential_and_parallel_paths_agree() {
        let cfg = McConfig::new(64, 32, 3);
        let a = map_paths(Exec::Sequential, cfg, 0.0, 0.1, 0.0, 1.0, |v| v.last());
        let b = map_paths(Exec::Parallel, cfg, 0.0, 0.1, 0.0, 1.0, |v| v.last());
        assert_eq!(a, b);
    }

    #[test]
    fn q_martingale_and_p_log_mean() {
        let m = figure_market(0.1);
        let cfg = McConfig::new(100_000, 1, 11);
        let sd = map_paths(
            Exec::default(),
            cfg,
            m.x0(),
            Measure::Q.level_drift(&m),
            0.0,
            m.horizon(),
            |v| m.price_at(v.last()),
        );
        let e = Estimate::from_samples(&sd);
        assert!(e.z_score(m.s0()).abs() < 4.0, "{e:?}");
        let logs = map_paths(
            Exec::default(),
            cfg,
            m.x0(),
            Measure::P.level_drift(&m),
            0.0,
            m.horizon(),
            |v| m.sigma() * v.last() + m.r() * m.horizon(),
        );
        let e = Estimate::from_samples(&logs);
        let target = m.s0().ln() + (m.mu() - 0.5 * m.sigma().powi(2)) * m.horizon();
        assert!(e.z_score(target).abs() < 3.5, "{e:?} vs {target}");
    }

    #[test]
    fn crossing_detects_sign_change_and_bridge() {
        let v = PathView {
            t0: 0.0,
            dt: 0.1,
            levels: vec![0.0, 0.5, 1.5],
            uniforms: vec![1.0, 1.0],
        };
        let t = v.first_crossing(1.0).unwrap();
        assert!((t - 0.15).abs() < 1e-12);
        let near = PathView {
            t0: 0.0,
            dt: 0.1,
            levels: vec![0.0, 0.99, 0.0],
            uniforms: vec![1e-3, 0.5],
        };
        assert_eq!(near.first_crossing(1.0), Some(0.05));
        assert_eq!(near.first_crossing(5.0), None);
    }

    #[test]
    fn ks_of_exact_sample() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_distance(&xs, |x| x);
        assert!(d <= 0.0005 + 1e-12);
        let with_atom: Vec<f64> = vec![0.25, 0.75, f64::INFINITY, f64::INFINITY];
        let d = ks_distance(&with_atom, |x| (x * 0.5).min(0.5));
        assert!((d - 0.125).abs() < 1e-12);
        assert!((ks_band_99(100_000) - 0.005_146).abs() < 1e-5);
    }

    #[test]
    fn increments_of_martingale_and_submartingale() {
        let cfg = McConfig::new(40_000, 20, 9);
        let steps = [0, 5, 10, 20];
        let flat = sample_increments(Exec::default(), cfg, 0.0, 0.0, 1.0, &steps, |v, i| v.levels[i]);
        assert!(flat.iter().all(|e| e.z_score(0.0).abs() < 4.0), "{flat:?}");
        let sq = sample_increments(Exec::default(), cfg, 0.0, 0.0, 1.0, &steps, |v, i| v.levels[i].powi(2));
        assert!(sq.iter().all(|e| e.z_score(0.0) > 10.0));
    }
}
