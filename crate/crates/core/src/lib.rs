//! Average cost and average weighted delay rate of clearing policies for
//! several independent drifted Brownian inputs.
//!
//! [`analytic`] holds the closed forms, [`fpt`] the first-passage numerics
//! used for the capped rate policy, [`simulate`] an exact-sampling Monte
//! Carlo engine and [`verify`] the executable comparison checks.

pub mod analytic;
pub mod error;
pub mod fpt;
pub mod model;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use model::{discriminant, CustomRule, Discriminant, Policy, Sign, SystemParams};
