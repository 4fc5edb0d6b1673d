//! Complex classical trajectories for the 1D Coulomb atom in a strong laser
//! field: ground-state construction on orbiting complex-time contours,
//! coherent-state (FINCO) reconstruction of the wavefunction, and the
//! dipole-acceleration spectrum.
//!
//! All quantities are in atomic units. The crate is `no_std` and only needs
//! an allocator.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod model;
pub mod observables;
pub mod reconstruction;
pub mod trajectory;

pub use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("potential singularity at q = 0")]
    Singular,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("empty grid")]
    EmptyGrid,
    #[error("step size collapsed without a flagged cause")]
    ToleranceFailure,
    #[error("no singularity found within the probe horizon")]
    NoSingularity,
    #[error("contour recipe cannot be realized: {0}")]
    RecipeInfeasible(&'static str),
    #[error("caustic: |dxi/dq0| below cutoff")]
    Caustic,
    #[error("sampling stride does not divide the half period")]
    StrideMismatch,
    #[error("series does not span an integer number of field periods")]
    NonIntegerPeriods,
}
