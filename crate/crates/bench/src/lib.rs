//! Fixtures shared by the criterion benches.

use viscobeam::beam1d::{BeamMesh, BeamState, ForceProfile};
use viscobeam::dimred::{QuadSizes, ScaledGeometry};
use viscobeam::flow::BeamFlowSpace;
use viscobeam::{MaterialModel, QuadFormSet};

pub fn svk_forms() -> QuadFormSet {
    QuadFormSet::from_model(&MaterialModel::svk(1.0)).expect("svk forms exist")
}

/// Smooth datum on a uniform mesh of the unit beam.
pub fn datum(n_elems: usize, r: f64, amplitude: f64) -> BeamState {
    let mesh = BeamMesh::new(1.0, n_elems).expect("valid mesh");
    BeamState::smooth_datum(mesh, r, amplitude).expect("valid datum")
}

pub fn flow_space(state: &BeamState) -> BeamFlowSpace {
    BeamFlowSpace::new(state, &svk_forms(), ForceProfile::zero()).expect("valid space")
}

/// One row of the default sweep: `h = 0.1`, `r = 1`, `alpha = 1/2`, `p = 4`.
pub fn gamma_row_geometry() -> (ScaledGeometry, QuadSizes) {
    (
        ScaledGeometry::new(0.1, 1.0, 0.5, 4.0).expect("valid schedule"),
        QuadSizes::default(),
    )
}
