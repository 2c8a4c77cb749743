//! Numerical toolkit for the Hausdorff dimension of escaping sets of
//! meromorphic functions modelled by their pole data.
//!
//! A function with poles `a_j`, leading coefficients `b_j` and multiplicities
//! `m_j ≤ M` is represented by a [`polefield::PoleField`]. The dimension of its
//! escaping set equals the critical exponent of the weight series
//! `Σ (|b_j|/|a_j|^{1+1/M})^t`; [`critexp`] computes that exponent and the
//! order-based upper bound `2Mρ/(2+Mρ)`. Independently, [`dimest`] brackets the
//! same number from above by geometric cover sums and from below through the
//! conformal machinery in [`conjugacy`] driving the non-autonomous IFS engine
//! in [`nais`] (schedules, lower pressure, Bowen bisection).

pub mod conjugacy;
pub mod critexp;
pub mod dimest;
pub mod error;
pub mod nais;
pub mod polefield;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
