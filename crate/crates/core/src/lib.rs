//! Numerical laboratory for random covering sets on the d-dimensional torus.
//!
//! Everything is built on one set representation: finite unions of half-open
//! dyadic cells (`dyadic`). On top of that sit singular-kernel energies with
//! rigorous enclosures (`energy`), Hausdorff-content and G-functional
//! machinery with critical-exponent estimators (`content`), the minimal
//! regular energy solver (`gamma`), and the covering-set simulator with its
//! dimension estimators (`sim`).

pub mod content;
pub mod dyadic;
pub mod energy;
pub mod gamma;
pub mod gauge;
mod grid_fft;
pub mod sim;

pub use dyadic::{DyadicCell, DyadicSet, TorusPoint};
pub use energy::{DiscreteMeasure, EnergyEngine};
pub use gauge::Gauge;
