//! The three-dimensional side at the scale of the thin beam: recovery
//! deformations of beam states, the scaled energy and dissipation distance,
//! displacement and twist extraction, rotation fields and the strain `G^h`.

mod deformation;
mod functionals;
mod geometry;
mod rotation;
mod table;

pub use deformation::{build_recovery, recovery_from_fields, FieldSource, PointSample, ScaledDeformation};
pub use functionals::{
    dist_h, extract_displacements, extract_twist, incremental_functional, phi_h, twist_at, DisplacementErrors,
    Displacements, PhiParts, TwistProfile, POLAR_MOMENT,
};
pub use geometry::{schedule, QuadGrid, QuadSizes, ScaledGeometry};
pub use rotation::{
    build_rotation_field, limit_strain_moments, rotation_sym_error, strain_G, RotationField, StrainComponent,
    StrainField, PROJECTION_RADIUS,
};
pub use table::{gamma_table, scaled_companion, GammaOptions, GammaRow, GammaTable, GAMMA_CSV_HEADER};
