//! Rough-volatility filtering under Cox-process tick observations.
//!
//! Liouville fractional Brownian motion with `H < 1/2` is approximated by a
//! finite bank of Ornstein–Uhlenbeck factors driven by one Brownian motion
//! ([`kernel`]). The bank is Markovian, so the hidden log-intensity can be
//! filtered with a bootstrap particle filter and `H` estimated online with a
//! nested particle filter ([`filter`]), given per-bin event counts from a
//! doubly stochastic Poisson process ([`observation`]).

pub mod error;
pub mod filter;
pub mod hurst;
pub mod io;
pub mod kernel;
pub mod observation;
pub mod paths;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub use hurst::{HurstIndex, ParamBox};
pub use kernel::OUBankSpec;
pub use observation::{IntensityKind, IntensitySpec, ObservationSeries};
pub use paths::{Grid, OUBankState, StatePath};
pub use rng::{Domain, SeedTree, SimRng};
