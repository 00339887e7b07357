//! Semiclassical propagation of Gaussian wave packets through complex saddle
//! trajectories, with exposed saddles located from real reference trajectories
//! and hidden saddles recovered by continuation through caustics.

pub mod assembly;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod manifold;
pub mod quantum;
pub mod saddle;
pub mod wigner;
mod ode;

pub use error::{Error, Result};
