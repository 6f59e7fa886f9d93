//! Two δ-interacting particles on an n-edge star graph: the explicit
//! real-momentum eigensolution basis, the transform-side linear systems and
//! residual checks of every boundary condition.

pub mod domain;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod one_particle;
pub mod quadrature;
pub mod sampling;
pub mod synthesis;
pub mod transform;
pub mod two_particle;
pub mod verifier;

pub use domain::{
    make_config, partner, AmplitudeKey, AmplitudeTensor, Assignment, BoundTensor, Direction, Field, MomentumPair,
    QuadrantPoint, Sector, Sign, StarConfig,
};
pub use error::{Error, Result};
pub use grid::{parse_float_grid, parse_int_grid};
pub use synthesis::{CoefficientProfile, Profile, QuadratureSpec, SynthesizedSolution};
pub use transform::{compute_kernel_decomposition, KernelReport, Subspace};
pub use two_particle::{build_basis, build_element, Basis, BasisElement, Family};
pub use verifier::{verify_full_basis, BasisReport, ResidualReport, VerifyOptions};
