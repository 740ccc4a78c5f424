use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::deformation::ScaledDeformation;
use crate::beam1d::{BeamFields, ForceProfile};
use crate::error::{Error, Result};
use crate::linalg::{dist_so3, Matrix3};
use crate::material::MaterialModel;
use crate::quadrature::GaussRule;

/// The three parts of the scaled energy and their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhiParts {
    pub elastic: f64,
    pub penalty: f64,
    pub force: f64,
    pub total: f64,
}

/// `phi_h(y) = eps^-2 int W(grad_h y) + zeta eps^-2 int P(hess_h y) - eps^-2 int f3d y3`
/// with `f3d = eps delta f1d`.
pub fn phi_h(y: &ScaledDeformation, model: &MaterialModel, force: &ForceProfile) -> Result<PhiParts> {
    model.validate()?;
    let g = &y.geometry;
    let grid = &y.grid;
    let (mut elastic, mut penalty, mut work) = (0.0, 0.0, 0.0);
    for m in 0..grid.len() {
        let f = &y.grad_h[m];
        let dist = dist_so3(f).map_err(|e| at_node(e, grid.point(m)))?;
        if dist > model.trust_radius {
            return Err(at_node(
                Error::Domain(format!(
                    "dist(grad_h y, SO(3)) = {dist:.3e} exceeds trust radius {}",
                    model.trust_radius
                )),
                grid.point(m),
            ));
        }
        let w = grid.weight(m);
        elastic += w * model.w(f)?;
        penalty += w * model.eval_p(&y.hess_h[m], 0)?.value;
        if !force.is_zero() {
            // the delta x3 part of y3 integrates to zero
            work += w * force.eval(grid.point(m)[0]) * y.disp[m][2];
        }
    }
    let e2 = g.eps_h * g.eps_h;
    let parts = PhiParts {
        elastic: elastic / e2,
        penalty: g.zeta_h * penalty / e2,
        force: -g.delta_h / g.eps_h * work,
        total: 0.0,
    };
    let total = parts.elastic + parts.penalty + parts.force;
    if !total.is_finite() {
        return Err(Error::Domain("scaled energy is not finite".into()));
    }
    Ok(PhiParts { total, ..parts })
}

fn at_node(e: Error, x: [f64; 3]) -> Error {
    match e {
        Error::Domain(msg) => Error::Domain(format!("{msg} at x = ({:.6}, {:.6}, {:.6})", x[0], x[1], x[2])),
        other => other,
    }
}

/// `D_h(y0, y1) = (eps^-2 int D^2(grad_h y0, grad_h y1))^(1/2)`.
pub fn dist_h(y0: &ScaledDeformation, y1: &ScaledDeformation, model: &MaterialModel) -> Result<f64> {
    y0.same_grid(y1)?;
    let grid = &y0.grid;
    let mut sum = 0.0;
    for m in 0..grid.len() {
        sum += grid.weight(m) * model.eval_d2(&y0.grad_h[m], &y1.grad_h[m])?;
    }
    let e = y0.geometry.eps_h;
    Ok((sum / (e * e)).sqrt())
}

/// `phi_h(y1) + D_h(y0, y1)^2 / (2 tau)`.
pub fn incremental_functional(
    y0: &ScaledDeformation,
    y1: &ScaledDeformation,
    tau: f64,
    model: &MaterialModel,
    force: &ForceProfile,
) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {tau}")));
    }
    let d = dist_h(y0, y1, model)?;
    Ok(phi_h(y1, model, force)?.total + d * d / (2.0 * tau))
}

/// Rescaled displacements on the grid with their raw gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacements {
    pub u: Vec<Vector3<f64>>,
    /// `grad[m][(i, j)] = d_j u_i`.
    pub grad: Vec<Matrix3>,
}

/// `u1 = (y1 - x1)/eps`, `u2 = (y2 - h x2)/(eps/h)`, `u3 = (y3 - delta x3)/(eps/delta)`.
pub fn extract_displacements(y: &ScaledDeformation) -> Displacements {
    let g = &y.geometry;
    let scale = [1.0 / g.eps_h, g.h / g.eps_h, g.delta_h / g.eps_h];
    let s = [1.0, g.h, g.delta_h];
    let u = y
        .disp
        .iter()
        .map(|d| Vector3::new(d[0] * scale[0], d[1] * scale[1], d[2] * scale[2]))
        .collect();
    let grad = y
        .grad_h
        .iter()
        .map(|f| {
            let h = f - Matrix3::identity();
            Matrix3::from_fn(|i, j| scale[i] * h[(i, j)] * s[j])
        })
        .collect();
    Displacements { u, grad }
}

/// L2 and H1 errors of the components of `u` against the Bernoulli-Navier
/// field `(xi1 - x2 xi2' - x3 xi3', xi2, xi3)` of `fields`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DisplacementErrors {
    pub l2: [f64; 3],
    pub h1: [f64; 3],
    /// L2 norms of the reference components.
    pub norm: [f64; 3],
}

impl Displacements {
    pub fn errors(&self, y: &ScaledDeformation, fields: &dyn BeamFields) -> DisplacementErrors {
        let grid = &y.grid;
        let mut out = DisplacementErrors::default();
        for m in 0..grid.len() {
            let (i, _, _) = grid.unravel(m);
            let [x1, x2, x3] = grid.point(m);
            let j = fields.jet(grid.seg[i], x1);
            let u = Vector3::new(j.xi1[0] - x2 * j.xi2[1] - x3 * j.xi3[1], j.xi2[0], j.xi3[0]);
            let mut du = Matrix3::zeros();
            du[(0, 0)] = j.xi1[1] - x2 * j.xi2[2] - x3 * j.xi3[2];
            du[(0, 1)] = -j.xi2[1];
            du[(0, 2)] = -j.xi3[1];
            du[(1, 0)] = j.xi2[1];
            du[(2, 0)] = j.xi3[1];
            let w = grid.weight(m);
            for c in 0..3 {
                let e = self.u[m][c] - u[c];
                let de = self.grad[m].row(c) - du.row(c);
                out.l2[c] += w * e * e;
                out.h1[c] += w * (e * e + de.norm_squared());
                out.norm[c] += w * u[c] * u[c];
            }
        }
        for c in 0..3 {
            out.l2[c] = out.l2[c].sqrt();
            out.h1[c] = out.h1[c].sqrt();
            out.norm[c] = out.norm[c].sqrt();
        }
        out
    }
}

/// Twist `theta^h` at the `x1` nodes of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistProfile {
    pub x1: Vec<f64>,
    pub w1: Vec<f64>,
    pub seg: Vec<usize>,
    pub theta: Vec<f64>,
}

/// Polar moment of the unit section, `int (x2^2 + x3^2)`.
pub const POLAR_MOMENT: f64 = 1.0 / 6.0;

/// `theta^h = (1/I0)(1/eps) int_omega ((delta/h) x2 y3 - x3 y2)`.
pub fn extract_twist(y: &ScaledDeformation) -> TwistProfile {
    let grid = &y.grid;
    let g = &y.geometry;
    let theta = (0..grid.x1.len())
        .map(|i| {
            let mut s = 0.0;
            for j in 0..grid.x2.len() {
                for k in 0..grid.x3.len() {
                    let m = grid.idx(i, j, k);
                    // identity parts integrate to zero exactly
                    let d = &y.disp[m];
                    s += grid.w2[j] * grid.w3[k] * (g.delta_h / g.h * grid.x2[j] * d[2] - grid.x3[k] * d[1]);
                }
            }
            s / (POLAR_MOMENT * g.eps_h)
        })
        .collect();
    TwistProfile {
        x1: grid.x1.clone(),
        w1: grid.w1.clone(),
        seg: grid.seg.clone(),
        theta,
    }
}

/// Twist at an arbitrary `x1`, integrating the closed form over the section.
pub fn twist_at(y: &ScaledDeformation, x1: f64) -> f64 {
    let g = &y.geometry;
    let rule2 = GaussRule::legendre(y.grid.x2.len()).on_interval(-0.5, 0.5);
    let rule3 = GaussRule::legendre(y.grid.x3.len()).on_interval(-0.5, 0.5);
    let mut s = 0.0;
    for (x2, w2) in rule2.points.iter().zip(&rule2.weights) {
        for (x3, w3) in rule3.points.iter().zip(&rule3.weights) {
            let d = y.eval([x1, *x2, *x3]).disp;
            s += w2 * w3 * (g.delta_h / g.h * x2 * d[2] - x3 * d[1]);
        }
    }
    s / (POLAR_MOMENT * g.eps_h)
}

impl TwistProfile {
    /// `(||theta^h - theta||_{L2(I)}, ||theta||_{L2(I)})`.
    pub fn l2_error(&self, fields: &dyn BeamFields) -> (f64, f64) {
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..self.x1.len() {
            let t = fields.jet(self.seg[i], self.x1[i]).theta[0];
            err += self.w1[i] * (self.theta[i] - t).powi(2);
            norm += self.w1[i] * t * t;
        }
        (err.sqrt(), norm.sqrt())
    }
}
