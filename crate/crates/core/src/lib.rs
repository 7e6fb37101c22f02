//! Left invariant sprays on Lie groups, reduced to the Lie algebra.

pub mod curvature;
pub mod error;
pub mod group_curves;
pub mod holonomy;
pub mod integrator;
pub mod jet;
pub mod lie_algebra;
pub mod numdiff;
pub mod spray;
pub mod transport;

pub use error::{Error, Result};
pub use integrator::{IntegratorConfig, Method};
pub use lie_algebra::{AlgVec, LieAlgebra};
pub use spray::{DiffMode, SprayField, SprayVariant};
pub use transport::{CurveSpec, Trajectory, TrajectoryKind, VelocityPath};
pub use curvature::{CurvatureMethod, CurvatureReport};
pub use group_curves::MatrixRep;
pub use holonomy::{BracketWord, DimensionEstimate};
