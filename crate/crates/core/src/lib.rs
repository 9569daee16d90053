//! Interval maps with several neutral fixed points: construction, the
//! first-return map to a set away from the fixed points, its invariant
//! density, and Monte Carlo estimates of occupation times.

pub mod arcsine;
pub mod asymptotics;
pub mod density;
pub mod error;
pub mod induced;
pub mod map;
pub mod montecarlo;

pub use error::{Error, Result};
