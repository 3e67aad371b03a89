//! Run configuration: a TOML file with one table per subsystem, overlaid
//! with `section.key=value` overrides from the command line.

use crate::error::CliError;
use intrinsic_engine::{MarketInputs, MarketParams, Measure};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub market: MarketSection,
    pub call: CallSection,
    pub onetouch: OneTouchSection,
    pub densities: DensitySection,
    pub arbitrage: ArbitrageSection,
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    /// Run sweeps on the calling thread only.
    pub sequential: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 20240101,
            sequential: false,
            out_dir: None,
        }
    }
}

/// Model and investor. Give either `mu` or `theta` (market price of risk).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketSection {
    pub s0: f64,
    pub r: f64,
    pub sigma: f64,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub p: f64,
    pub w0: f64,
    pub alpha: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self {
            s0: 1.2,
            r: 0.01,
            sigma: 0.5,
            horizon: 2.0,
            mu: None,
            theta: Some(0.05),
            p: 0.75,
            w0: 0.15,
            alpha: 0.4,
        }
    }
}

impl MarketSection {
    pub fn params(&self) -> Result<MarketParams, CliError> {
        let mu = match (self.mu, self.theta) {
            (Some(mu), None) => mu,
            (None, Some(th)) => self.r + th * self.sigma,
            _ => return Err(CliError::Config("market: give exactly one of `mu` and `theta`".into())),
        };
        Ok(MarketParams::new(MarketInputs {
            s0: self.s0,
            mu,
            r: self.r,
            sigma: self.sigma,
            horizon: self.horizon,
            p: self.p,
            w0: self.w0,
            alpha: self.alpha,
        })?)
    }
}

/// Evenly spaced grid `min..=max` with `points` entries.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 || !(self.max >= self.min) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(CliError::Config(format!("bad grid {self:?}")));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let step = (self.max - self.min) / (self.points - 1) as f64;
        // snap off representation noise so 0.1 + 2 * 0.1 prints as 0.3
        Ok((0..self.points)
            .map(|i| {
                let v = self.min + step * i as f64;
                (v * 1e12).round() / 1e12
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CallSection {
    pub strike: f64,
    pub delta_c: f64,
    pub lambdas: Grid,
    /// Quantities for which the terminal wealth law is tabulated.
    pub cdf_lambdas: Vec<f64>,
    pub cdf_levels: Grid,
    pub measure: String,
    pub lattice_steps: usize,
}

impl Default for CallSection {
    fn default() -> Self {
        Self {
            strike: 0.85,
            delta_c: 0.02,
            lambdas: Grid {
                min: 0.1,
                max: 6.0,
                points: 60,
            },
            cdf_lambdas: vec![1.0, 2.0, 3.1],
            cdf_levels: Grid {
                min: 0.0,
                max: 1.5,
                points: 301,
            },
            measure: "Qbar".into(),
            lattice_steps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneTouchSection {
    pub barrier: f64,
    pub strike: f64,
    pub premium: f64,
    /// Constraint level for the one-touch runs, replacing `market.alpha`.
    pub alpha: f64,
    /// Initial wealth for the strike sweep, replacing `market.w0`.
    pub w0: f64,
    pub wealth: Grid,
    pub strikes: Grid,
    pub modes: Vec<String>,
    pub lattice_steps: usize,
    pub floor_points: usize,
}

impl Default for OneTouchSection {
    fn default() -> Self {
        Self {
            barrier: 1.9,
            strike: 1.3,
            premium: 0.02,
            alpha: 0.1,
            w0: 0.1,
            wealth: Grid {
                min: 0.02,
                max: 0.6,
                points: 59,
            },
            strikes: Grid {
                min: 0.55,
                max: 1.75,
                points: 49,
            },
            modes: vec!["semi_static".into(), "dynamic_only".into(), "no_sale".into()],
            lattice_steps: 400,
            floor_points: 120,
        }
    }
}

/// Passage line `x + W_t = y + βt`. Unset fields come from the market:
/// `x` is the start level, `y` the level of the discounted call strike and
/// `β` the slope under `measure`.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub measure: String,
    pub times: Grid,
    /// Time at which the survival density is tabulated.
    pub t: f64,
    pub v_points: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self {
            x: None,
            y: None,
            beta: None,
            measure: "Qbar".into(),
            times: Grid {
                min: 0.01,
                max: 2.0,
                points: 200,
            },
            t: 1.0,
            v_points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArbitrageSection {
    /// `strike,price` CSV.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub lattice_steps: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            mc_paths: 20_000,
            mc_steps: 512,
            lattice_steps: 400,
        }
    }
}

pub fn parse_measure(s: &str) -> Result<Measure, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("unknown measure `{s}` (use P, Q or Qbar)")))
}

/// Loads `path` (or the defaults), applies `section.key=value` overrides
/// and validates the result against the schema.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // lay the input over the defaults so partial grids such as
    // `call.lambdas.points = 5` keep their other fields
    let mut merged: toml::Table = RunConfig::default()
        .canonical()
        .parse()
        .expect("canonical config parses");
    let market = table.get("market").and_then(toml::Value::as_table);
    if market.is_some_and(|t| t.contains_key("mu") && !t.contains_key("theta")) {
        if let Some(m) = merged.get_mut("market").and_then(toml::Value::as_table_mut) {
            m.remove("theta");
        }
    }
    merge(&mut merged, table);
    let cfg: RunConfig = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override `{item}` has an empty key")));
    }
    // bare words are strings
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{item}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Canonical TOML text, used for the config hash and the manifest.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
