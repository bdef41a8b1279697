//! phaselab-core: a desk-scale numerical laboratory for the phase of matter
//! waves.
//!
//! The crate treats the wavefunction phase as a dynamical, observable-bearing
//! quantity and provides four coordinated views of it:
//!
//! * [`schrodinger`] — split-step Fourier propagation of 1-D wavepackets,
//!   the ground truth every other module is validated against;
//! * [`madelung`] — polar decomposition psi = R exp(iS/hbar), the coupled
//!   quantum Hamilton-Jacobi / continuity equations as residual checks and
//!   as a directly integrated system, plus the quantum potential;
//! * [`bohm`] — trajectories of the velocity field grad S / m and action
//!   accumulated along them;
//! * [`twolevel`] — a driven two-level system decomposed into phase-sensitive
//!   dressed states, where optical-phase jumps steer populations;
//! * [`interference`] — two-packet matter-wave interference and fringe-shift
//!   extraction, where an applied phase becomes a measurable fringe offset.
//!
//! Everything runs on periodic power-of-two grids ([`grid::Grid1D`]) in
//! configurable units ([`constants::PhysicalConstants`], natural units by
//! default).

pub mod bohm;
pub mod constants;
pub mod error;
pub mod field;
pub mod grid;
pub mod interference;
pub mod madelung;
pub mod schrodinger;
pub mod spectral;
pub mod twolevel;

pub use constants::PhysicalConstants;
pub use error::{Error, Result};
pub use field::{make_gaussian, norm_squared, ComplexField, HydroFields};
pub use grid::Grid1D;
pub use spectral::{fd4_derivative, gradient, laplacian, Spectral};
