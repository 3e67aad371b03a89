//! Utility maximisation under intrinsic (worst-case mark-to-market) wealth
//! constraints in a complete Black-Scholes-Merton market.
//!
//! The crate is organised bottom-up:
//!
//! * [`market`] holds the model, discounting, the state-price density and
//!   the `φ` process, plus seeded path simulation.
//! * [`payoff`] represents piecewise-linear European payoffs and their
//!   intrinsic values.
//! * [`bs`] has Black-Scholes prices, expected local time, `ρ` and `z`.
//! * [`passage`] has first-passage and survival densities for Brownian
//!   motion against a line, with Laplace-inversion and Monte Carlo routes.
//! * [`lattice`] is a trinomial Snell-envelope solver used as an oracle.
//! * [`maxplus`] solves the long-call problem and verifies max-plus
//!   representations by simulation.
//! * [`onetouch`] compares hedging modes for a short one-touch option.
//! * [`arbitrage`] audits call curves and builds arbitrage portfolios.
//! * [`table`] is the CSV output type shared by every sweep.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod bs;
pub mod error;
pub mod lattice;
pub mod market;
pub mod maxplus;
pub mod mc;
pub mod onetouch;
pub mod par;
pub mod passage;
pub mod payoff;
pub mod quad;
pub mod special;
pub mod table;

pub use error::{Error, Result};
pub use market::{MarketInputs, MarketParams, Measure, RiskAversion};
pub use par::Exec;
