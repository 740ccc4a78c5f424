use serde::{Deserialize, Serialize};

use super::deformation::build_recovery;
use super::functionals::{dist_h, extract_displacements, extract_twist, phi_h};
use super::geometry::{schedule, QuadSizes, ScaledGeometry};
use super::rotation::{build_rotation_field, limit_strain_moments, strain_G, StrainComponent};
use crate::beam1d::{assemble_energy, assemble_metric_sq, BeamState, ForceProfile};
use crate::error::{Error, Result};
use crate::material::MaterialModel;
use crate::quadforms::QuadFormSet;

/// Column names of the CSV emitted by [`GammaTable::to_csv`].
pub const GAMMA_CSV_HEADER: &str =
    "h,delta_h,eps_h,zeta_h,phi_h,phi0,err_energy,err_metric,err_u3,err_theta,penalty_term";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub geometry: ScaledGeometry,
    pub phi_h: f64,
    pub phi0: f64,
    pub err_energy: f64,
    pub dist_h: f64,
    pub dist0: f64,
    pub err_metric: f64,
    pub err_u3: f64,
    pub err_theta: f64,
    pub penalty_term: f64,
    /// Euclidean norm of the difference of `G11` moment vectors.
    pub err_moments_g11: f64,
    /// Same for the odd-in-`x3` moments of `sym(G)_12`.
    pub err_moments_g12: f64,
    pub rotation_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub rows: Vec<GammaRow>,
    /// Reference norms: `||xi3||_{L2(Omega)}` and `||theta||_{L2(I)}`.
    pub norm_u3: f64,
    pub norm_theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaOptions {
    pub alpha: f64,
    pub sizes: QuadSizes,
    /// Skip the rotation field and strain moments.
    pub skip_strain: bool,
}

impl Default for GammaOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            sizes: QuadSizes::default(),
            skip_strain: false,
        }
    }
}

/// Recovery deformations of `u_theta` and `companion` for each `h`, compared
/// with the one-dimensional energy and metric.
pub fn gamma_table(
    u_theta: &BeamState,
    companion: &BeamState,
    model: &MaterialModel,
    force: &ForceProfile,
    h_list: &[f64],
    options: &GammaOptions,
) -> Result<GammaTable> {
    if h_list.len() < 3 {
        return Err(Error::Config(format!(
            "h_list needs at least 3 entries, got {}",
            h_list.len()
        )));
    }
    u_theta.compatible(companion)?;
    let geoms = schedule(h_list, u_theta.r, options.alpha, model.penalty.p)?;
    let forms = QuadFormSet::from_model(model)?;
    let phi0 = assemble_energy(u_theta, &forms.w, force)?;
    let dist0 = assemble_metric_sq(u_theta, companion, &forms.r)?.sqrt();
    let mut rows = Vec::with_capacity(geoms.len());
    let (mut norm_u3, mut norm_theta) = (0.0, 0.0);
    for geom in geoms {
        let row_err = |e: Error| Error::Domain(format!("row h = {}: {e}", geom.h));
        let y = build_recovery(u_theta, &geom, options.sizes)?;
        let y1 = build_recovery(companion, &geom, options.sizes)?;
        let parts = phi_h(&y, model, force).map_err(row_err)?;
        let d = dist_h(&y, &y1, model).map_err(row_err)?;
        let du = extract_displacements(&y).errors(&y, u_theta);
        let (err_theta, nt) = extract_twist(&y).l2_error(u_theta);
        norm_u3 = du.norm[2];
        norm_theta = nt;
        let (mut m11, mut m12, mut dev) = (0.0, 0.0, 0.0);
        if !options.skip_strain {
            let rot = build_rotation_field(&y)?;
            let strain = strain_G(&y, &rot)?;
            let diff = |c: StrainComponent| {
                let a = strain.moments(&y.grid, c);
                let b = limit_strain_moments(&y.grid, u_theta, c);
                a.iter().zip(&b).map(|(x, z)| (x - z).powi(2)).sum::<f64>().sqrt()
            };
            m11 = diff(StrainComponent::G11);
            m12 = diff(StrainComponent::SymG12);
            dev = rot.max_deviation();
        }
        rows.push(GammaRow {
            geometry: geom,
            phi_h: parts.total,
            phi0,
            err_energy: (parts.total - phi0).abs(),
            dist_h: d,
            dist0,
            err_metric: (d - dist0).abs(),
            err_u3: du.l2[2],
            err_theta,
            penalty_term: parts.penalty,
            err_moments_g11: m11,
            err_moments_g12: m12,
            rotation_deviation: dev,
        });
    }
    Ok(GammaTable {
        rows,
        norm_u3,
        norm_theta,
    })
}

impl GammaTable {
    /// Rows in the order of [`GAMMA_CSV_HEADER`], floats in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(GAMMA_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let g = &r.geometry;
            let cols = [
                g.h,
                g.delta_h,
                g.eps_h,
                g.zeta_h,
                r.phi_h,
                r.phi0,
                r.err_energy,
                r.err_metric,
                r.err_u3,
                r.err_theta,
                r.penalty_term,
            ];
            let line: Vec<String> = cols.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    /// Range `(min, max)` of `penalty_term / (zeta eps^-2 (eps/delta)^p)`
    /// over the rows; the maximum is the fitted envelope constant.
    pub fn penalty_fit(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), r| {
            let q = r.penalty_term / r.geometry.penalty_envelope();
            (lo.min(q), hi.max(q))
        })
    }
}

/// Interior coefficients of `state` scaled by `s`, traces kept.
pub fn scaled_companion(state: &BeamState, s: f64) -> Result<BeamState> {
    state.with_free(&(state.free_coords() * s))
}
