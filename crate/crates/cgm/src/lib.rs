//! Channel gain map (CGM) toolkit.
//!
//! Builds gain maps from finite spatial samples of a log-distance channel
//! with exponentially correlated shadowing, predicts channel gain at
//! arbitrary locations via model-based MMSE interpolation, and evaluates
//! closed-form expressions for the average mean square error (AMSE) of that
//! prediction as a function of sample density and neighbor count, with
//! Monte Carlo verification of every closed form.
//!
//! Modules:
//! - [`field`]: ground-truth field synthesis (path loss + shadowing + multipath)
//! - [`sampling`]: sample layouts (PPP / grid), gain maps, exact k-NN queries,
//!   nearest-neighbor distance densities
//! - [`predictor`]: MMSE spatial prediction with per-query model MSE
//! - [`analytic`]: closed-form AMSE expressions and their quadrature oracles
//! - [`estimation`]: LS channel-parameter estimation and error analysis
//! - [`harness`]: reproducible Monte Carlo experiment runners and CSV output

pub mod analytic;
pub mod error;
pub mod estimation;
pub mod field;
pub mod harness;
pub mod math;
pub mod predictor;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use field::{ChannelParams, FieldRealization, Location};
pub use sampling::{GainMap, Layout, LayoutKind};
