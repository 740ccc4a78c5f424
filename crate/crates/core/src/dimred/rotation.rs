use serde::{Deserialize, Serialize};

use super::deformation::ScaledDeformation;
use super::geometry::QuadGrid;
use crate::beam1d::BeamFields;
use crate::error::{Error, Result};
use crate::linalg::{dist_so3, polar_rotation, sym, Matrix3};
use crate::quadrature::legendre;

/// Largest distance to SO(3) of a mollified matrix that is still projected.
pub const PROJECTION_RADIUS: f64 = 0.5;

const SUBSAMPLES: usize = 4;

/// Rotations on the `(x1, x2)` nodes of a grid, constant in `x3`.
/// Sample `(i, j)` is stored at `i n2 + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationField {
    pub n1: usize,
    pub n2: usize,
    pub samples: Vec<Matrix3>,
    /// Number of cubes along `x1` and `x2`.
    pub cubes: (usize, usize),
}

impl RotationField {
    pub fn at(&self, i: usize, j: usize) -> &Matrix3 {
        &self.samples[i * self.n2 + j]
    }

    /// `max |R - Id|` over the samples.
    pub fn max_deviation(&self) -> f64 {
        self.samples
            .iter()
            .map(|r| (r - Matrix3::identity()).norm())
            .fold(0.0, f64::max)
    }

    fn check(&self, grid: &QuadGrid) -> Result<()> {
        if self.n1 != grid.x1.len() || self.n2 != grid.x2.len() {
            return Err(Error::Shape(format!(
                "rotation field is {}x{}, grid section is {}x{}",
                self.n1,
                self.n2,
                grid.x1.len(),
                grid.x2.len()
            )));
        }
        Ok(())
    }
}

fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -1 - i;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Nearest rotations of cube averages of `grad_h y` over cubes of physical
/// side `delta`, mollified at radius `2 delta` and projected back to SO(3).
pub fn build_rotation_field(y: &ScaledDeformation) -> Result<RotationField> {
    let g = &y.geometry;
    let grid = &y.grid;
    let (left, right) = (grid.left(), grid.right());
    let len = right - left;
    let c1 = ((len / g.delta_h).round() as usize).max(1);
    let c2 = ((g.h / g.delta_h).round() as usize).max(1);
    let d1 = len / c1 as f64;
    let d2 = 1.0 / c2 as f64;

    let gp = [-0.5 / 3f64.sqrt(), 0.5 / 3f64.sqrt()];
    let mut cube = Vec::with_capacity(c1 * c2);
    for i in 0..c1 {
        for j in 0..c2 {
            let mut avg = Matrix3::zeros();
            for a in gp {
                for b in gp {
                    for c in gp {
                        let x1 = left + (i as f64 + 0.5 + a) * d1;
                        let x2 = -0.5 + (j as f64 + 0.5 + b) * d2;
                        avg += y.eval([x1, x2, c]).grad_h;
                    }
                }
            }
            avg /= 8.0;
            let q = polar_rotation(&avg).map_err(|e| Error::Projection(format!("cube ({i}, {j}): {e}")))?;
            cube.push(q);
        }
    }

    // mollifier radius in physical units is 2 delta; x2 is stretched by h
    let rho = 2.0 * g.delta_h;
    let sub1 = d1 / SUBSAMPLES as f64;
    let sub2 = d2 / SUBSAMPLES as f64;
    let reach1 = (rho / sub1).ceil() as isize + 1;
    let reach2 = (rho / (g.h * sub2)).ceil() as isize + 1;
    let n1 = grid.x1.len();
    let n2 = grid.x2.len();
    let mut samples = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let (p1, p2) = (grid.x1[i], grid.x2[j]);
            let k1 = ((p1 - left) / sub1).floor() as isize;
            let k2 = ((p2 + 0.5) / sub2).floor() as isize;
            let mut acc = Matrix3::zeros();
            let mut total = 0.0;
            for s1 in k1 - reach1..=k1 + reach1 {
                let q1 = left + (s1 as f64 + 0.5) * sub1;
                let t1 = (q1 - p1) / rho;
                if t1.abs() >= 1.0 {
                    continue;
                }
                let ci = reflect(s1.div_euclid(SUBSAMPLES as isize), c1);
                for s2 in k2 - reach2..=k2 + reach2 {
                    let q2 = -0.5 + (s2 as f64 + 0.5) * sub2;
                    let t2 = g.h * (q2 - p2) / rho;
                    let w = bump((t1 * t1 + t2 * t2).sqrt());
                    if w == 0.0 {
                        continue;
                    }
                    let cj = reflect(s2.div_euclid(SUBSAMPLES as isize), c2);
                    acc += cube[ci * c2 + cj] * w;
                    total += w;
                }
            }
            let m = acc / total;
            let at = |msg: String| Error::Projection(format!("{msg} at (x1, x2) = ({p1:.6}, {p2:.6})"));
            if !(m.determinant() > 0.0) {
                return Err(at("mollified matrix has nonpositive determinant".into()));
            }
            let dist = dist_so3(&m).map_err(|e| at(e.to_string()))?;
            if dist > PROJECTION_RADIUS {
                return Err(at(format!("mollified matrix is {dist:.3e} away from SO(3)")));
            }
            samples.push(polar_rotation(&m).map_err(|e| at(e.to_string()))?);
        }
    }
    Ok(RotationField {
        n1,
        n2,
        samples,
        cubes: (c1, c2),
    })
}

/// `G^h = (R^T grad_h y - Id) / eps` on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainField {
    pub g: Vec<Matrix3>,
}

#[allow(non_snake_case)]
pub fn strain_G(y: &ScaledDeformation, rot: &RotationField) -> Result<StrainField> {
    let grid = &y.grid;
    rot.check(grid)?;
    let e = y.geometry.eps_h;
    let g = (0..grid.len())
        .map(|m| {
            let (i, j, _) = grid.unravel(m);
            (rot.at(i, j).transpose() * y.grad_h[m] - Matrix3::identity()) / e
        })
        .collect();
    Ok(StrainField { g })
}

/// Strain components tested against polynomial fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrainComponent {
    /// `G_11` against `P_a(x1) x2^b x3^c`, `a, b, c <= 3`.
    G11,
    /// `sym(G)_12` against `P_a(x1) x2^b x3^c`, `a, b <= 3`, `c` in `{1, 3}`.
    SymG12,
}

impl StrainComponent {
    fn exponents(self) -> Vec<(usize, usize, usize)> {
        let cs: &[usize] = match self {
            StrainComponent::G11 => &[0, 1, 2, 3],
            StrainComponent::SymG12 => &[1, 3],
        };
        let mut out = Vec::new();
        for a in 0..=3 {
            for b in 0..=3 {
                for &c in cs {
                    out.push((a, b, c));
                }
            }
        }
        out
    }

    fn pick(self, g: &Matrix3) -> f64 {
        match self {
            StrainComponent::G11 => g[(0, 0)],
            StrainComponent::SymG12 => 0.5 * (g[(0, 1)] + g[(1, 0)]),
        }
    }
}

fn moments_of(grid: &QuadGrid, comp: StrainComponent, value: impl Fn(usize) -> f64) -> Vec<f64> {
    let (left, right) = (grid.left(), grid.right());
    let exps = comp.exponents();
    let mut out = vec![0.0; exps.len()];
    for m in 0..grid.len() {
        let [x1, x2, x3] = grid.point(m);
        let s = (2.0 * x1 - left - right) / (right - left);
        let v = grid.weight(m) * value(m);
        for (o, &(a, b, c)) in out.iter_mut().zip(&exps) {
            *o += v * legendre(a, s) * x2.powi(b as i32) * x3.powi(c as i32);
        }
    }
    out
}

impl StrainField {
    pub fn moments(&self, grid: &QuadGrid, comp: StrainComponent) -> Vec<f64> {
        moments_of(grid, comp, |m| comp.pick(&self.g[m]))
    }
}

/// Moments of the limiting strain: `xi1' - x2 xi2'' - x3 xi3'' + (r/2) xi3'^2`
/// for `G11`, `-x3 theta'` for the odd-in-`x3` moments of `sym(G)_12`.
pub fn limit_strain_moments(grid: &QuadGrid, fields: &dyn BeamFields, comp: StrainComponent) -> Vec<f64> {
    let r = fields.r();
    moments_of(grid, comp, |m| {
        let (i, _, _) = grid.unravel(m);
        let [x1, x2, x3] = grid.point(m);
        let j = fields.jet(grid.seg[i], x1);
        match comp {
            StrainComponent::G11 => j.xi1[1] - x2 * j.xi2[2] - x3 * j.xi3[2] + 0.5 * r * j.xi3[1] * j.xi3[1],
            StrainComponent::SymG12 => -x3 * j.theta[1],
        }
    })
}

/// `(|| sym(R - Id)/eps - (r/2) A^2 ||_{L2(S)}, ||(r/2) A^2||_{L2(S)})` with
/// `A = e3 (x) p - p (x) e3`, `p = (xi3', theta, 0)`.
pub fn rotation_sym_error(y: &ScaledDeformation, rot: &RotationField, fields: &dyn BeamFields) -> Result<(f64, f64)> {
    let grid = &y.grid;
    rot.check(grid)?;
    let r = fields.r();
    let e = y.geometry.eps_h;
    let (mut err, mut norm) = (0.0, 0.0);
    for i in 0..grid.x1.len() {
        let j = fields.jet(grid.seg[i], grid.x1[i]);
        let (c, t) = (j.xi3[1], j.theta[0]);
        let a2 = -Matrix3::new(c * c, c * t, 0.0, c * t, t * t, 0.0, 0.0, 0.0, c * c + t * t);
        let target = a2 * (0.5 * r);
        for k in 0..grid.x2.len() {
            let w = grid.w1[i] * grid.w2[k];
            let s = sym(&(rot.at(i, k) - Matrix3::identity())) / e;
            err += w * (s - target).norm_squared();
            norm += w * target.norm_squared();
        }
    }
    Ok((err.sqrt(), norm.sqrt()))
}
