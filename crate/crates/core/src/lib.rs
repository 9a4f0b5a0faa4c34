//! Simulation engine for the Bayesian predictive probability of success (PPoS)
//! of clinical trials whose time-to-event outcome has a competing event.
//!
//! The engine follows three phases:
//!
//! - **modelling**: Bayesian cause-specific hazard models (Weibull or
//!   piecewise-constant) are fitted to the interim data, see [`model`] and
//!   [`sampler`];
//! - **prediction**: for one posterior draw, event times of subjects still at
//!   risk are simulated beyond their censoring time, new enrollees are
//!   simulated from scratch, and the event type is assigned by a Bernoulli
//!   draw on the cause-specific hazards, see [`simulate`];
//! - **analysis**: the completed dataset is analysed with the final-analysis
//!   method and the decision rule gives a success indicator, see [`analysis`].
//!
//! [`ppos::run_ppos`] repeats prediction and analysis `K` times and reports
//! the proportion of successful trials.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! parallel execution live in the `ppos` companion crate.

#![no_std]
// Float methods come from `num_traits::Float` in no_std builds. Whenever
// num-traits' std feature is unified in (std builds, dev-dependencies) they
// resolve as inherent methods and the import goes unused.
#![allow(unused_imports)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod hazard;
pub mod model;
pub mod ppos;
pub mod prior;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod simulate;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
