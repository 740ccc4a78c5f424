//! Energy, squared distance and metric tensor of the beam model.
//!
//! ```text
//! phi0 = 1/2 int C0_W (xi1' + r/2 xi3'^2)^2
//!      + 1/24 int (C0_W xi2''^2 + Q1_W(xi3'', theta')) - int f xi3
//! D0^2 = int C0_R (dxi1' + r/2 (xi3'^2 - xi3~'^2))^2
//!      + 1/12 int (C0_R dxi2''^2 + Q1_R(dxi3'', dtheta'))
//! ```

use nalgebra::{DMatrix, DVector, Matrix2};

use super::mesh::{reference_element, DofMap, LocalVec, QpBasis, LOCAL_DOFS};
use super::state::{BeamState, ForceProfile};
use crate::error::{Error, Result};
use crate::quadforms::QuadFormReduced;

/// The part of a reduced form the beam model needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamForm {
    pub c0: f64,
    pub q1: Matrix2<f64>,
}

impl From<&QuadFormReduced> for BeamForm {
    fn from(q: &QuadFormReduced) -> Self {
        Self { c0: q.c0, q1: q.q1 }
    }
}

#[inline]
fn dot(a: &LocalVec, v: &LocalVec) -> f64 {
    a.iter().zip(v).map(|(x, y)| x * y).sum()
}

fn gather(full: &DVector<f64>, idx: &[usize; LOCAL_DOFS]) -> LocalVec {
    let mut v = [0.0; LOCAL_DOFS];
    for (k, &i) in idx.iter().enumerate() {
        v[k] = full[i];
    }
    v
}

/// Dense local accumulator.
struct Local {
    grad: [f64; LOCAL_DOFS],
    hess: [[f64; LOCAL_DOFS]; LOCAL_DOFS],
}

impl Local {
    fn new() -> Self {
        Self {
            grad: [0.0; LOCAL_DOFS],
            hess: [[0.0; LOCAL_DOFS]; LOCAL_DOFS],
        }
    }

    fn add_grad(&mut self, s: f64, a: &LocalVec) {
        for (g, x) in self.grad.iter_mut().zip(a) {
            *g += s * x;
        }
    }

    /// `hess += s (a b^T + b a^T) / 2`
    fn add_sym_outer(&mut self, s: f64, a: &LocalVec, b: &LocalVec) {
        for i in 0..LOCAL_DOFS {
            if a[i] == 0.0 && b[i] == 0.0 {
                continue;
            }
            for j in 0..LOCAL_DOFS {
                self.hess[i][j] += 0.5 * s * (a[i] * b[j] + b[i] * a[j]);
            }
        }
    }

    fn scatter(&self, idx: &[usize; LOCAL_DOFS], grad: Option<&mut DVector<f64>>, hess: Option<&mut DMatrix<f64>>) {
        if let Some(g) = grad {
            for (k, &i) in idx.iter().enumerate() {
                g[i] += self.grad[k];
            }
        }
        if let Some(h) = hess {
            for (k, &i) in idx.iter().enumerate() {
                for (l, &j) in idx.iter().enumerate() {
                    h[(i, j)] += self.hess[k][l];
                }
            }
        }
    }
}

/// Adds `scale * d/dv Q1(a, b)` with `a = xi3''`, `b = theta'`.
fn add_q1_grad(loc: &mut Local, scale: f64, q1: &Matrix2<f64>, qp: &QpBasis, a: f64, b: f64) {
    let ga = 2.0 * (q1[(0, 0)] * a + q1[(0, 1)] * b);
    let gb = 2.0 * (q1[(1, 0)] * a + q1[(1, 1)] * b);
    loc.add_grad(scale * ga, &qp.dd3);
    loc.add_grad(scale * gb, &qp.dt);
}

/// Adds `scale * d2/dv2 Q1`.
fn add_q1_hess(loc: &mut Local, scale: f64, q1: &Matrix2<f64>, qp: &QpBasis) {
    loc.add_sym_outer(2.0 * scale * q1[(0, 0)], &qp.dd3, &qp.dd3);
    loc.add_sym_outer(2.0 * scale * q1[(0, 1)], &qp.dd3, &qp.dt);
    loc.add_sym_outer(2.0 * scale * q1[(1, 0)], &qp.dt, &qp.dd3);
    loc.add_sym_outer(2.0 * scale * q1[(1, 1)], &qp.dt, &qp.dt);
}

fn q1_value(q1: &Matrix2<f64>, a: f64, b: f64) -> f64 {
    q1[(0, 0)] * a * a + (q1[(0, 1)] + q1[(1, 0)]) * a * b + q1[(1, 1)] * b * b
}

/// Energy and derivatives with respect to the full coefficient vector.
pub(crate) fn energy_full(
    state: &BeamState,
    full: &DVector<f64>,
    form: &BeamForm,
    force: &ForceProfile,
    order: u8,
) -> (f64, Option<DVector<f64>>, Option<DMatrix<f64>>) {
    let mesh = &state.mesh;
    let map = DofMap::new(mesh);
    let r = state.r;
    let refel = reference_element(mesh.h());
    let mut value = 0.0;
    let mut grad = (order >= 1).then(|| DVector::zeros(map.n_full));
    let mut hess = (order >= 2).then(|| DMatrix::zeros(map.n_full, map.n_full));
    for e in 0..mesh.n_elems {
        let idx = map.element(e);
        let v = gather(full, &idx);
        let x0 = mesh.node(e);
        let mut loc = Local::new();
        let mut ve = 0.0;
        for qp in &refel {
            let w = qp.weight;
            let s3 = dot(&qp.d3, &v);
            let m = dot(&qp.d1, &v) + 0.5 * r * s3 * s3;
            let k2 = dot(&qp.dd2, &v);
            let k3 = dot(&qp.dd3, &v);
            let tw = dot(&qp.dt, &v);
            let f = force.eval(x0 + qp.s * mesh.h());
            let u3 = dot(&qp.v3, &v);
            ve += w * (0.5 * form.c0 * m * m + (form.c0 * k2 * k2 + q1_value(&form.q1, k3, tw)) / 24.0 - f * u3);
            if order >= 1 {
                // dm/dv = d1 + r s3 d3
                let mut dm = qp.d1;
                for (a, b) in dm.iter_mut().zip(&qp.d3) {
                    *a += r * s3 * b;
                }
                loc.add_grad(w * form.c0 * m, &dm);
                loc.add_grad(w * form.c0 * k2 / 12.0, &qp.dd2);
                loc.add_grad(-w * f, &qp.v3);
                add_q1_grad(&mut loc, w / 24.0, &form.q1, qp, k3, tw);
                if order >= 2 {
                    loc.add_sym_outer(w * form.c0, &dm, &dm);
                    loc.add_sym_outer(w * form.c0 * m * r, &qp.d3, &qp.d3);
                    loc.add_sym_outer(w * form.c0 / 12.0, &qp.dd2, &qp.dd2);
                    add_q1_hess(&mut loc, w / 24.0, &form.q1, qp);
                }
            }
        }
        value += ve;
        loc.scatter(&idx, grad.as_mut(), hess.as_mut());
    }
    (value, grad, hess)
}

/// `D0^2(a, b)` and derivatives with respect to `b`.
pub(crate) fn metric_sq_full(
    state: &BeamState,
    a: &DVector<f64>,
    b: &DVector<f64>,
    form: &BeamForm,
    order: u8,
) -> (f64, Option<DVector<f64>>, Option<DMatrix<f64>>) {
    let mesh = &state.mesh;
    let map = DofMap::new(mesh);
    let r = state.r;
    let refel = reference_element(mesh.h());
    let mut value = 0.0;
    let mut grad = (order >= 1).then(|| DVector::zeros(map.n_full));
    let mut hess = (order >= 2).then(|| DMatrix::zeros(map.n_full, map.n_full));
    for e in 0..mesh.n_elems {
        let idx = map.element(e);
        let va = gather(a, &idx);
        let vb = gather(b, &idx);
        let mut dv = [0.0; LOCAL_DOFS];
        for k in 0..LOCAL_DOFS {
            dv[k] = vb[k] - va[k];
        }
        let mut loc = Local::new();
        let mut ve = 0.0;
        for qp in &refel {
            let w = qp.weight;
            let sa = dot(&qp.d3, &va);
            let sb = dot(&qp.d3, &vb);
            let m = dot(&qp.d1, &dv) + 0.5 * r * (sb * sb - sa * sa);
            let k2 = dot(&qp.dd2, &dv);
            let k3 = dot(&qp.dd3, &dv);
            let tw = dot(&qp.dt, &dv);
            ve += w * (form.c0 * m * m + (form.c0 * k2 * k2 + q1_value(&form.q1, k3, tw)) / 12.0);
            if order >= 1 {
                let mut dm = qp.d1;
                for (x, y) in dm.iter_mut().zip(&qp.d3) {
                    *x += r * sb * y;
                }
                loc.add_grad(2.0 * w * form.c0 * m, &dm);
                loc.add_grad(w * form.c0 * k2 / 6.0, &qp.dd2);
                add_q1_grad(&mut loc, w / 12.0, &form.q1, qp, k3, tw);
                if order >= 2 {
                    loc.add_sym_outer(2.0 * w * form.c0, &dm, &dm);
                    loc.add_sym_outer(2.0 * w * form.c0 * m * r, &qp.d3, &qp.d3);
                    loc.add_sym_outer(w * form.c0 / 6.0, &qp.dd2, &qp.dd2);
                    add_q1_hess(&mut loc, w / 12.0, &form.q1, qp);
                }
            }
        }
        value += ve;
        loc.scatter(&idx, grad.as_mut(), hess.as_mut());
    }
    (value.max(0.0), grad, hess)
}

/// `g(w, w) = lim D0^2(z, z + eps w) / eps^2` on full coefficients.
pub(crate) fn metric_tensor_full(state: &BeamState, z: &DVector<f64>, form: &BeamForm) -> DMatrix<f64> {
    let mesh = &state.mesh;
    let map = DofMap::new(mesh);
    let r = state.r;
    let refel = reference_element(mesh.h());
    let mut g = DMatrix::zeros(map.n_full, map.n_full);
    for e in 0..mesh.n_elems {
        let idx = map.element(e);
        let v = gather(z, &idx);
        let mut loc = Local::new();
        for qp in &refel {
            let w = qp.weight;
            let s3 = dot(&qp.d3, &v);
            let mut dm = qp.d1;
            for (x, y) in dm.iter_mut().zip(&qp.d3) {
                *x += r * s3 * y;
            }
            loc.add_sym_outer(w * form.c0, &dm, &dm);
            loc.add_sym_outer(w * form.c0 / 12.0, &qp.dd2, &qp.dd2);
            // 1/12 Q1 block; add_q1_hess doubles the coefficients
            add_q1_hess(&mut loc, w / 24.0, &form.q1, qp);
        }
        loc.scatter(&idx, None, Some(&mut g));
    }
    g
}

fn restrict_vec(map: &DofMap, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(map.n_free(), map.free.iter().map(|&i| v[i]))
}

fn restrict_mat(map: &DofMap, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = map.n_free();
    DMatrix::from_fn(n, n, |i, j| m[(map.free[i], map.free[j])])
}

/// `phi0(state)`.
pub fn assemble_energy(state: &BeamState, forms_w: &QuadFormReduced, force: &ForceProfile) -> Result<f64> {
    state.validate()?;
    Ok(energy_full(state, &state.to_full(), &forms_w.into(), force, 0).0)
}

/// Gradient and Hessian of `phi0` over the free coefficients.
pub fn energy_gradient_hessian(
    state: &BeamState,
    forms_w: &QuadFormReduced,
    force: &ForceProfile,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    state.validate()?;
    let map = state.dofs();
    let (_, g, h) = energy_full(state, &state.to_full(), &forms_w.into(), force, 2);
    Ok((restrict_vec(&map, &g.unwrap()), restrict_mat(&map, &h.unwrap())))
}

/// `D0^2(a, b)`.
pub fn assemble_metric_sq(a: &BeamState, b: &BeamState, forms_r: &QuadFormReduced) -> Result<f64> {
    a.compatible(b)?;
    Ok(metric_sq_full(a, &a.to_full(), &b.to_full(), &forms_r.into(), 0).0)
}

/// Gradient and Hessian of `b -> D0^2(a, b)` over the free coefficients.
pub fn metric_sq_gradient_hessian(
    a: &BeamState,
    b: &BeamState,
    forms_r: &QuadFormReduced,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    a.compatible(b)?;
    let map = a.dofs();
    let (_, g, h) = metric_sq_full(a, &a.to_full(), &b.to_full(), &forms_r.into(), 2);
    Ok((restrict_vec(&map, &g.unwrap()), restrict_mat(&map, &h.unwrap())))
}

/// Metric tensor on the free coefficients, checked for positive definiteness.
pub fn metric_tensor_at(state: &BeamState, forms_r: &QuadFormReduced) -> Result<DMatrix<f64>> {
    let g = restrict_mat(
        &state.dofs(),
        &metric_tensor_full(state, &state.to_full(), &forms_r.into()),
    );
    if g.clone().cholesky().is_none() {
        return Err(Error::MetricDegenerate(
            "metric tensor failed Cholesky factorization".into(),
        ));
    }
    Ok(g)
}

/// `sqrt(c^T G^{-1} c)` for a covector `c` and SPD `G`.
pub fn dual_norm(g: &DMatrix<f64>, c: &DVector<f64>) -> Result<f64> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MetricDegenerate("metric tensor failed Cholesky factorization".into()))?;
    let p = chol.solve(c);
    Ok(c.dot(&p).max(0.0).sqrt())
}

/// Dual norm of `v -> g(velocity, v) + Dphi0(state)[v]` over free test functions.
pub fn weak_residual(
    state: &BeamState,
    velocity: &DVector<f64>,
    forms_w: &QuadFormReduced,
    forms_r: &QuadFormReduced,
    force: &ForceProfile,
) -> Result<f64> {
    let g = metric_tensor_at(state, forms_r)?;
    if velocity.len() != g.nrows() {
        return Err(Error::Shape(format!(
            "velocity has length {}, expected {}",
            velocity.len(),
            g.nrows()
        )));
    }
    let (grad, _) = energy_gradient_hessian(state, forms_w, force)?;
    let res = &g * velocity + grad;
    dual_norm(&g, &res)
}

/// Outcome of the generalized convexity spot check.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexityReport {
    pub ok_metric: bool,
    pub ok_energy: bool,
    /// Largest `lhs - rhs` over the sampled `s`, per inequality.
    pub worst_metric: f64,
    pub worst_energy: f64,
}

/// Checks, for `s = 0.1, ..., 0.9` along `a_s = (1-s) a + s b`,
/// `D0(a, a_s) <= s Phi1(D0(a, b))` and
/// `phi0(a_s) <= (1-s) phi0(a) + s phi0(b) + s Phi2_M(D0(a, b))`
/// with `Phi1(t) = sqrt(t^2 + C t^3 + C t^4)` and
/// `Phi2_M(t) = C sqrt(M) t^2 + C t^3 + C t^4`.
#[allow(clippy::too_many_arguments)]
pub fn generalized_convexity_check(
    a: &BeamState,
    b: &BeamState,
    c: f64,
    m: f64,
    forms_w: &QuadFormReduced,
    forms_r: &QuadFormReduced,
    force: &ForceProfile,
) -> Result<ConvexityReport> {
    a.compatible(b)?;
    if !(c > 0.0) {
        return Err(Error::Config(format!("convexity constant must be positive, got {c}")));
    }
    let phi_a = assemble_energy(a, forms_w, force)?;
    let phi_b = assemble_energy(b, forms_w, force)?;
    if phi_a > m {
        return Err(Error::Precondition(format!(
            "energy bound violated: phi0(a) = {phi_a} > M = {m}"
        )));
    }
    let t = assemble_metric_sq(a, b, forms_r)?.sqrt();
    let phi1 = (t * t + c * t.powi(3) + c * t.powi(4)).sqrt();
    let phi2 = c * m.max(0.0).sqrt() * t * t + c * t.powi(3) + c * t.powi(4);
    let slack = 1e-12 * (1.0 + phi_a.abs() + phi_b.abs());
    let mut worst_metric = f64::NEG_INFINITY;
    let mut worst_energy = f64::NEG_INFINITY;
    for k in 1..=9 {
        let s = k as f64 / 10.0;
        let a_s = a.lerp(b, s)?;
        let d = assemble_metric_sq(a, &a_s, forms_r)?.sqrt();
        worst_metric = worst_metric.max(d - s * phi1);
        let phi_s = assemble_energy(&a_s, forms_w, force)?;
        worst_energy = worst_energy.max(phi_s - ((1.0 - s) * phi_a + s * phi_b + s * phi2));
    }
    Ok(ConvexityReport {
        ok_metric: worst_metric <= 1e-12 * (1.0 + t),
        ok_energy: worst_energy <= slack,
        worst_metric,
        worst_energy,
    })
}
