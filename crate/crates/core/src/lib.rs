//! Discrete 1-Wasserstein geometry for curves of bounded variation.
//!
//! The crate works on finite metric spaces. It computes exact `W1`
//! distances with dual certificates, builds superposition lifts of curves
//! of measures from glued optimal couplings, checks geodesic and
//! variation identities, and extracts velocity fields solving the discrete
//! current equation.

pub mod current;
pub mod curves;
pub mod error;
pub mod io;
pub mod lift;
pub mod registry;
pub mod report;
pub mod space;
pub mod suite;
pub mod transport;
pub mod wcurves;

pub use error::{Error, Result};
