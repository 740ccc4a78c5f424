//! Finite element model of the one-dimensional beam: P1 elements for the
//! stretching and twist fields, Hermite cubics for the two bending fields.

mod assembly;
mod mesh;
mod state;

pub use assembly::{
    assemble_energy, assemble_metric_sq, dual_norm, energy_gradient_hessian, generalized_convexity_check,
    metric_sq_gradient_hessian, metric_tensor_at, weak_residual, BeamForm, ConvexityReport,
};
pub(crate) use assembly::{energy_full, metric_sq_full, metric_tensor_full};
pub use mesh::{shapes, BeamMesh, DofMap, Shapes, GAUSS_POINTS_PER_ELEMENT, LOCAL_DOFS, MIN_ELEMS};
pub use state::{BeamFields, BeamState, BoundaryData, ForceProfile, Jet};
