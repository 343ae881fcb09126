//! Ground states of the planar coupled logarithmic Hartree system
//!
//! ```text
//! −Δu + λ₁u = μ₁(Γ ∗ u²)u + β(Γ ∗ v²)u
//! −Δv + λ₂v = μ₂(Γ ∗ v²)v + β(Γ ∗ u²)v,     Γ(x) = −(1/2π) ln|x|
//! ```
//!
//! computed by minimizing the energy on the Nehari manifold over a truncated
//! box, together with diagnostics for symmetry, decay and energy ordering.

pub mod error;
mod fft;
pub mod grid;
pub mod kernel;
pub mod energy;
pub mod nehari;
mod optimize;
pub mod scalar;
pub mod solver;
pub mod analysis;
pub mod io;
#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, RadialProfile};
pub use energy::{EnergyBreakdown, FieldPair, SystemParams};
pub use kernel::{KernelTable, Part, Quadrature};
