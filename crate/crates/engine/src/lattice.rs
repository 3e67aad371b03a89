//! Trinomial Snell-envelope solver for obstacles driven by a Brownian
//! motion with constant drift.
//!
//! The walk is skip-free: from level `x_i` it moves to `x_{i±1}` or stays,
//! with probabilities matching the drift and unit variance of each step.
//! Grids built with [`aligned_grid`] put two chosen levels (typically the
//! start and a strike or barrier line) exactly on nodes, which keeps the
//! discrete hitting times of those lines close to the continuous ones.

use crate::error::{Error, Result};

/// Boundary treatment at either end of the level grid.
pub enum Edge<'a> {
    /// Copy the neighbouring value (reflecting, zero gradient).
    ZeroGradient,
    /// Prescribed value per time index (absorbing, Dirichlet).
    Fixed(&'a dyn Fn(usize) -> f64),
}

/// Everything the backward recursion needs.
pub struct LatticeProcessSpec<'a> {
    /// Strictly increasing time grid `t_0 < … < t_N`.
    pub times: Vec<f64>,
    /// Uniform, increasing level grid.
    pub levels: Vec<f64>,
    /// Drift of the level process per unit time (its variance rate is 1).
    pub drift: f64,
    /// Obstacle `(t, level)` applied at `t_0, …, t_{N−1}`.
    pub obstacle: &'a dyn Fn(f64, f64) -> f64,
    /// Value at `t_N`.
    pub terminal: &'a dyn Fn(f64) -> f64,
    pub lower: Edge<'a>,
    pub upper: Edge<'a>,
    /// Index of the initial level.
    pub start: usize,
}

/// Envelope values on every node.
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    /// `values[n][i]` is the envelope at `(times[n], levels[i])`.
    pub values: Vec<Vec<f64>>,
    /// Envelope at the start node, which is also the initial value of the
    /// smallest martingale dominating the obstacle.
    pub initial: f64,
}

impl LatticeSolution {
    /// Envelope at time index `n`, linearly interpolated in level.
    pub fn value_at(&self, n: usize, level: f64) -> f64 {
        interpolate(&self.levels, &self.values[n], level)
    }

    /// Index of the grid time nearest to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&s| s < t).min(self.times.len() - 1);
        if i > 0 && (t - self.times[i - 1]) < (self.times[i] - t) {
            i - 1
        } else {
            i
        }
    }
}

pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x).min(n - 1);
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

impl LatticeProcessSpec<'_> {
    fn spacing(&self) -> Result<f64> {
        let t = &self.times;
        let x = &self.levels;
        if t.len() < 2 || x.len() < 3 {
            return Err(Error::Invalid(
                "lattice needs at least two times and three levels".into(),
            ));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("lattice times must be strictly increasing".into()));
        }
        let h = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        if !(h > 0.0) || x.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
            return Err(Error::Invalid("lattice levels must be uniform and increasing".into()));
        }
        if self.start >= x.len() {
            return Err(Error::Invalid("start index outside the level grid".into()));
        }
        for w in t.windows(2) {
            let dt = w[1] - w[0];
            if dt > h * h * (1.0 + 1e-12) || self.drift.abs() * dt / h > dt / (h * h) {
                return Err(Error::Invalid(format!(
                    "unstable lattice: dt = {dt} against spacing {h} and drift {}",
                    self.drift
                )));
            }
        }
        Ok(h)
    }
}

/// Backward recursion calling `observe(n, values)` at every time index
/// from `N` down to `0`; returns the envelope at the start node.
pub fn snell_sweep<F: FnMut(usize, &[f64])>(spec: &LatticeProcessSpec, mut observe: F) -> Result<f64> {
    let h = spec.spacing()?;
    let nx = spec.levels.len();
    let nt = spec.times.len() - 1;
    let mut v: Vec<f64> = spec.levels.iter().map(|&x| (spec.terminal)(x)).collect();
    if let Edge::Fixed(f) = spec.lower {
        v[0] = f(nt);
    }
    if let Edge::Fixed(f) = spec.upper {
        v[nx - 1] = f(nt);
    }
    observe(nt, &v);
    let mut w = vec![0.0; nx];
    let mut obs = vec![0.0; nx];
    for n in (0..nt).rev() {
        let t = spec.times[n];
        let dt = spec.times[n + 1] - t;
        let a = dt / (h * h);
        let b = spec.drift * dt / h;
        let pu = 0.5 * (a + b);
        let pd = 0.5 * (a - b);
        let pm = 1.0 - a;
        for i in 1..nx - 1 {
            w[i] = pu * v[i + 1] + pm * v[i] + pd * v[i - 1];
        }
        w[0] = match spec.lower {
            Edge::ZeroGradient => w[1],
            Edge::Fixed(f) => f(n),
        };
        w[nx - 1] = match spec.upper {
            Edge::ZeroGradient => w[nx - 2],
            Edge::Fixed(f) => f(n),
        };
        for (o, &x) in obs.iter_mut().zip(&spec.levels) {
            *o = (spec.obstacle)(t, x);
        }
        let lo = usize::from(matches!(spec.lower, Edge::Fixed(_)));
        let hi = nx - usize::from(matches!(spec.upper, Edge::Fixed(_)));
        for i in 0..nx {
            v[i] = if i >= lo && i < hi { w[i].max(obs[i]) } else { w[i] };
        }
        observe(n, &v);
    }
    Ok(v[spec.start])
}

/// Envelope on every node.
pub fn snell_lattice(spec: &LatticeProcessSpec) -> Result<LatticeSolution> {
    let mut values = vec![Vec::new(); spec.times.len()];
    let initial = snell_sweep(spec, |n, v| values[n] = v.to_vec())?;
    Ok(LatticeSolution {
        times: spec.times.clone(),
        levels: spec.levels.clone(),
        values,
        initial,
    })
}

/// Envelope at the start node only.
pub fn snell_value(spec: &LatticeProcessSpec) -> Result<f64> {
    snell_sweep(spec, |_, _| {})
}

/// A uniform time grid and a level grid with two anchor levels on nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedGrid {
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    /// Node index of the lower anchor.
    pub lo: usize,
    /// Node index of the upper anchor.
    pub hi: usize,
}

/// Where the level grid extends relative to the anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridShape {
    /// About `n_level` nodes centred on the anchors.
    Centered,
    /// The upper anchor is the top node; `n_level` nodes lie below it.
    EndAtUpper,
}

/// Builds a grid on `[t0, t0 + horizon]` with `n_time` steps whose spacing
/// `h = (hi − lo)/m` puts both anchors on nodes. `m` is as large as the
/// stability bound `dt ≤ h²` allows; when the anchors are closer than one
/// natural step, the time grid is refined instead.
pub fn aligned_grid(
    lo: f64,
    hi: f64,
    t0: f64,
    horizon: f64,
    n_time: usize,
    n_level: usize,
    shape: GridShape,
) -> Result<AlignedGrid> {
    if !(hi > lo) || !(horizon > 0.0) || n_time == 0 {
        return Err(Error::Invalid(
            "aligned grid needs lo < hi, a positive horizon and steps".into(),
        ));
    }
    let gap = hi - lo;
    let mut nt = n_time;
    let mut dt = horizon / nt as f64;
    let mut m = (gap / dt.sqrt()).floor() as usize;
    if m == 0 {
        m = 1;
        nt = (horizon / (gap * gap)).ceil() as usize;
        dt = horizon / nt as f64;
    }
    let h = gap / m as f64;
    debug_assert!(dt <= h * h * (1.0 + 1e-12));
    let (below, total) = match shape {
        GridShape::Centered => {
            let total = n_level.max(m + 2);
            ((total - m) / 2, total)
        }
        GridShape::EndAtUpper => {
            let total = n_level.max(m + 1);
            (total - m, total)
        }
    };
    let levels = (0..=total).map(|k| lo + h * (k as f64 - below as f64)).collect();
    let times = (0..=nt).map(|k| t0 + dt * k as f64).collect();
    Ok(AlignedGrid {
        times,
        levels,
        lo: below,
        hi: below + m,
    })
}
