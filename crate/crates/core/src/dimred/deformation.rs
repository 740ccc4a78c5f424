use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use super::geometry::{QuadGrid, QuadSizes, ScaledGeometry};
use crate::beam1d::{BeamFields, BeamState, Jet};
use crate::error::{Error, Result};
use crate::linalg::{Matrix3, Tensor333};

/// `y`, its displacement from `(x1, h x2, delta x3)`, and the scaled first
/// and second gradients at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSample {
    pub y: Vector3<f64>,
    pub disp: Vector3<f64>,
    pub grad_h: Matrix3,
    pub hess_h: Tensor333,
}

/// Closed-form deformations that can be evaluated anywhere on the domain.
#[derive(Clone)]
pub enum FieldSource {
    /// The recovery ansatz built on piecewise smooth beam fields.
    Recovery(Arc<dyn BeamFields + Send + Sync>),
    /// `y = A (x1, h x2, delta x3) + b`, so `grad_h y = A`.
    Affine { a: Matrix3, b: Vector3<f64> },
    /// `s y_0 + t y_1`.
    Sum(Box<FieldSource>, f64, Box<FieldSource>, f64),
}

impl fmt::Debug for FieldSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSource::Recovery(_) => f.write_str("Recovery(..)"),
            FieldSource::Affine { a, b } => f.debug_struct("Affine").field("a", a).field("b", b).finish(),
            FieldSource::Sum(x, s, y, t) => f.debug_tuple("Sum").field(x).field(s).field(y).field(t).finish(),
        }
    }
}

impl FieldSource {
    /// Evaluate at `x`; `seg` selects the smooth piece of the beam fields.
    pub fn eval(&self, geom: &ScaledGeometry, seg: usize, x: [f64; 3]) -> PointSample {
        match self {
            FieldSource::Recovery(fields) => ansatz(geom, &fields.jet(seg, x[0]), x),
            FieldSource::Affine { a, b } => {
                let reference = Vector3::new(x[0], geom.h * x[1], geom.delta_h * x[2]);
                let y = a * reference + b;
                PointSample {
                    y,
                    disp: (a - Matrix3::identity()) * reference + b,
                    grad_h: *a,
                    hess_h: Tensor333::zeros(),
                }
            }
            FieldSource::Sum(p, s, q, t) => {
                let a = p.eval(geom, seg, x);
                let b = q.eval(geom, seg, x);
                let reference = Vector3::new(x[0], geom.h * x[1], geom.delta_h * x[2]);
                PointSample {
                    y: a.y * *s + b.y * *t,
                    disp: a.disp * *s + b.disp * *t + reference * (s + t - 1.0),
                    grad_h: a.grad_h * *s + b.grad_h * *t,
                    hess_h: a.hess_h.scale(*s).axpy(*t, &b.hess_h),
                }
            }
        }
    }
}

/// The recovery ansatz with derivatives in closed form. Raw derivatives
/// `d_j y_i` are divided by `s_j` with `s = (1, h, delta)`, second ones by
/// `s_j s_k`.
fn ansatz(g: &ScaledGeometry, jet: &Jet, x: [f64; 3]) -> PointSample {
    let (h, d, e, r) = (g.h, g.delta_h, g.eps_h, g.r);
    let [x1, x2, x3] = x;
    let a = &jet.xi1;
    let b = &jet.xi2;
    let c = &jet.xi3;
    let t = &jet.theta;

    let disp = Vector3::new(
        e * (a[0] - x2 * b[1] - x3 * c[1] - h * x2 * x3 * t[1] - h * x2 * r * c[1] * t[0]),
        e * (b[0] / h - x3 * t[0] - h * x2 * 0.5 * r * t[0] * t[0]),
        e * (c[0] / d + h / d * x2 * t[0] - d * x3 * 0.5 * r * (c[1] * c[1] + t[0] * t[0])),
    );
    let y = Vector3::new(x1, h * x2, d * x3) + disp;

    let mut raw = Matrix3::zeros();
    raw[(0, 0)] =
        1.0 + e * (a[1] - x2 * b[2] - x3 * c[2] - h * x2 * x3 * t[2] - h * x2 * r * (c[2] * t[0] + c[1] * t[1]));
    raw[(0, 1)] = e * (-b[1] - h * x3 * t[1] - h * r * c[1] * t[0]);
    raw[(0, 2)] = e * (-c[1] - h * x2 * t[1]);
    raw[(1, 0)] = e * (b[1] / h - x3 * t[1] - h * x2 * r * t[0] * t[1]);
    raw[(1, 1)] = h - e * h * 0.5 * r * t[0] * t[0];
    raw[(1, 2)] = -e * t[0];
    raw[(2, 0)] = e * (c[1] / d + h / d * x2 * t[1] - d * x3 * r * (c[1] * c[2] + t[0] * t[1]));
    raw[(2, 1)] = e * h / d * t[0];
    raw[(2, 2)] = d - e * d * 0.5 * r * (c[1] * c[1] + t[0] * t[0]);

    let s = [1.0, h, d];
    let grad_h = Matrix3::from_fn(|i, j| raw[(i, j)] / s[j]);

    let mut hr = Tensor333::zeros();
    let mut put = |i: usize, j: usize, k: usize, v: f64| {
        hr.set(i, j, k, v);
        hr.set(i, k, j, v);
    };
    put(
        0,
        0,
        0,
        e * (a[2]
            - x2 * b[3]
            - x3 * c[3]
            - h * x2 * x3 * t[3]
            - h * x2 * r * (c[3] * t[0] + 2.0 * c[2] * t[1] + c[1] * t[2])),
    );
    put(
        0,
        0,
        1,
        e * (-b[2] - h * x3 * t[2] - h * r * (c[2] * t[0] + c[1] * t[1])),
    );
    put(0, 0, 2, e * (-c[2] - h * x2 * t[2]));
    put(0, 1, 2, -e * h * t[1]);
    put(
        1,
        0,
        0,
        e * (b[2] / h - x3 * t[2] - h * x2 * r * (t[1] * t[1] + t[0] * t[2])),
    );
    put(1, 0, 1, -e * h * r * t[0] * t[1]);
    put(1, 0, 2, -e * t[1]);
    put(
        2,
        0,
        0,
        e * (c[2] / d + h / d * x2 * t[2] - d * x3 * r * (c[2] * c[2] + c[1] * c[3] + t[1] * t[1] + t[0] * t[2])),
    );
    put(2, 0, 1, e * h / d * t[1]);
    put(2, 0, 2, -e * d * r * (c[1] * c[2] + t[0] * t[1]));

    let mut hess_h = Tensor333::zeros();
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                hess_h.set(i, j, k, hr.get(i, j, k) / (s[j] * s[k]));
            }
        }
    }
    PointSample {
        y,
        disp,
        grad_h,
        hess_h,
    }
}

/// A deformation of the rescaled domain sampled on a tensor Gauss grid.
#[derive(Clone, Debug)]
pub struct ScaledDeformation {
    pub geometry: ScaledGeometry,
    pub grid: Arc<QuadGrid>,
    pub y: Vec<Vector3<f64>>,
    pub disp: Vec<Vector3<f64>>,
    pub grad_h: Vec<Matrix3>,
    pub hess_h: Vec<Tensor333>,
    pub source: FieldSource,
}

impl ScaledDeformation {
    pub fn from_source(source: FieldSource, geometry: ScaledGeometry, grid: Arc<QuadGrid>) -> Self {
        let n = grid.len();
        let mut out = Self {
            geometry,
            grid,
            y: Vec::with_capacity(n),
            disp: Vec::with_capacity(n),
            grad_h: Vec::with_capacity(n),
            hess_h: Vec::with_capacity(n),
            source,
        };
        for m in 0..n {
            let (i, _, _) = out.grid.unravel(m);
            let p = out.source.eval(&out.geometry, out.grid.seg[i], out.grid.point(m));
            out.y.push(p.y);
            out.disp.push(p.disp);
            out.grad_h.push(p.grad_h);
            out.hess_h.push(p.hess_h);
        }
        out
    }

    /// `y = A (x1, h x2, delta x3) + b` on the grid.
    pub fn affine(a: Matrix3, b: Vector3<f64>, geometry: ScaledGeometry, grid: Arc<QuadGrid>) -> Self {
        Self::from_source(FieldSource::Affine { a, b }, geometry, grid)
    }

    /// Evaluate the underlying closed form at an arbitrary point.
    pub fn eval(&self, x: [f64; 3]) -> PointSample {
        self.source.eval(&self.geometry, self.grid.locate(x[0]), x)
    }

    /// `s self + t other` on the shared grid.
    pub fn combine(&self, s: f64, other: &Self, t: f64) -> Result<Self> {
        self.same_grid(other)?;
        let source = FieldSource::Sum(Box::new(self.source.clone()), s, Box::new(other.source.clone()), t);
        Ok(Self::from_source(source, self.geometry, self.grid.clone()))
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::Shape("deformations use different scalings".into()));
        }
        if !Arc::ptr_eq(&self.grid, &other.grid) && *self.grid != *other.grid {
            return Err(Error::Shape("deformations live on different grids".into()));
        }
        Ok(())
    }
}

/// Recovery deformation of `u_theta` on the grid `sizes`. The twist must
/// vanish on the two end elements and the bending slope `xi3'` at both ends.
pub fn build_recovery(u_theta: &BeamState, geom: &ScaledGeometry, sizes: QuadSizes) -> Result<ScaledDeformation> {
    u_theta.validate()?;
    if u_theta.r != geom.r {
        return Err(Error::Config(format!(
            "state has r = {} but the scaling uses r = {}",
            u_theta.r, geom.r
        )));
    }
    let n = u_theta.mesh.n_nodes();
    let scale = 1.0 + u_theta.theta.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for node in [0, 1, n - 2, n - 1] {
        if u_theta.theta[node].abs() > 1e-12 * scale {
            return Err(Error::Precondition(format!(
                "twist must vanish on the end elements, theta at node {node} is {:e}",
                u_theta.theta[node]
            )));
        }
    }
    let scale = 1.0 + u_theta.xi3.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (side, slope) in u_theta.boundary.xi3_slope.iter().enumerate() {
        if slope.abs() > 1e-12 * scale {
            return Err(Error::Precondition(format!(
                "xi3' must vanish at the {} end, got {slope:e}",
                ["left", "right"][side]
            )));
        }
    }
    let grid = QuadGrid::new(&u_theta.mesh.nodes(), sizes)?;
    Ok(recovery_from_fields(Arc::new(u_theta.clone()), *geom, Arc::new(grid)))
}

/// The ansatz on arbitrary piecewise smooth fields, without precondition checks.
pub fn recovery_from_fields(
    fields: Arc<dyn BeamFields + Send + Sync>,
    geom: ScaledGeometry,
    grid: Arc<QuadGrid>,
) -> ScaledDeformation {
    ScaledDeformation::from_source(FieldSource::Recovery(fields), geom, grid)
}
