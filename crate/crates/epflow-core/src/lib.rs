//! Variational dynamics on Lie groups with noise-induced dissipation.
//!
//! The crate provides four layers that build on each other:
//!
//! * [`algebra`] / [`so3`] — exact basis-level geometry: brackets, invariant
//!   metrics and connections, the metric adjoint `ad*`, curvature, and the
//!   dissipative operator `K` induced by a family of noise directions.
//! * [`reduced`] — the reduced drift equation on the algebra, its closed-form
//!   rigid-body oracle, RK4 integration and energy diagnostics.
//! * [`sde`] / [`variational`] — rotation-valued sample paths with a weak
//!   generator check, perturbation flows, and the numerical verification that
//!   drifts solving the reduced equation are exactly the critical points of
//!   the kinetic action.
//! * [`torus`] — the same reduction realized on truncated divergence-free
//!   Fourier fields of the 2-torus, where the two invariant pairings produce
//!   the incompressible Navier-Stokes and viscous Camassa-Holm models.
//!
//! A dissipative rigid-body run, end to end:
//!
//! ```
//! use epflow_core::{ep_rhs, integrate, kinetic_energy, uniform_grid};
//! use epflow_core::{AlgebraVector, Invariance};
//! use epflow_core::so3;
//!
//! let inertia = [1.0, 2.0, 3.0];
//! let geo = so3::levi_civita_geometry(inertia, Invariance::Left)?;
//! let noise = so3::orthonormal_noise(inertia, 1.0)?;
//! let u = integrate(
//!     |u| ep_rhs(u, &noise, &geo),
//!     AlgebraVector::from_slice(&[1.0, 1.0, 1.0])?,
//!     uniform_grid(1.0, 1e-3)?,
//! )?;
//! let e0 = kinetic_energy(u.state(0), &geo);
//! let e1 = kinetic_energy(u.states().last().unwrap(), &geo);
//! assert!(e1 < e0, "the noise directions drain kinetic energy");
//! # Ok::<(), epflow_core::CoreError>(())
//! ```

pub mod algebra;
pub mod error;
pub mod reduced;
pub mod report;
pub mod sde;
pub mod so3;
pub mod torus;
pub mod variational;

pub use algebra::{AlgebraVector, GeometrySpec, Invariance, NoiseBasis, Tensor3};
pub use error::{CoreError, Result};
pub use reduced::{
    ep_rhs, integrate, kinetic_energy, rigid_body_rhs, uniform_grid, ReducedTrajectory,
};
pub use sde::{
    perturbation_flow, simulate, simulate_with_options, weak_generator_check, GeneratorReport,
    GroupElement, PathEnsemble, SimOptions, TestFunction, VariationCurve,
};
pub use torus::{
    ad_star_h1, ad_star_l2, energy_h1, energy_l2, integrate_fluid, k_operator_pairing,
    k_operator_spectral, laplacian_identity_check, FluidMetric, FluidTrajectory, ModeSet,
    VelocityField,
};
pub use variational::{
    action, ep_pairing, gateaux_derivative, perturbed_velocity, PerturbedVelocity, Quadrature,
    VariationalReport,
};
