//! Unnormalized self-attention dynamics with frozen auxiliary labels on the
//! unit sphere.
//!
//! Particles `(x_i, ξ_i)` move on S^{d-1} along the projected mean force of a
//! regular kernel while their labels (positions, prompts) stay fixed. The
//! crate provides the kernels, a projected Heun integrator, diagnostics,
//! closed-form energy maximizers, the clustered two-time-scale setting and
//! the experiment runner behind the `usaav` binary.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod maximizers;
pub mod metastability;
pub mod metrics;
pub mod sphere;

pub use dynamics::{energy, energy_production, simulate, step_rk2, velocity_field, ParticleSystem, SimConfig, TrajectoryRecord};
pub use error::{Error, Result};
pub use kernels::{AuxLabel, Bias, KernelFamily, KernelSpec, PhaseField, ToeplitzCoeffs};
pub use sphere::{OrthogonalGauge, PlanarRotation, RotationPlane, UnitVector};
