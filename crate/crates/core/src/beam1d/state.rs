use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::mesh::{shapes, BeamMesh, DofMap};
use crate::error::{Error, Result};

/// Clamped traces at `x1 = -l/2` (index 0) and `x1 = l/2` (index 1).
/// The twist always vanishes at both ends.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundaryData {
    pub xi1: [f64; 2],
    pub xi2: [f64; 2],
    pub xi2_slope: [f64; 2],
    pub xi3: [f64; 2],
    pub xi3_slope: [f64; 2],
}

impl BoundaryData {
    pub fn validate(&self) -> Result<()> {
        let all = [self.xi1, self.xi2, self.xi2_slope, self.xi3, self.xi3_slope];
        if all.iter().flatten().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("boundary data must be finite".into()))
        }
    }
}

/// Force per unit length as a polynomial `sum_k c_k x1^k`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceProfile {
    pub coefficients: Vec<f64>,
}

impl ForceProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("force coefficients must be finite".into()));
        }
        Ok(Self { coefficients })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0.0)
    }
}

/// Finite element coefficients of `(xi1, xi2, xi3, theta)`.
///
/// `xi1` and `theta` hold nodal values (P1); `xi2` and `xi3` hold
/// `(value, slope)` pairs per node (Hermite cubics).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamState {
    pub mesh: BeamMesh,
    pub r: f64,
    pub boundary: BoundaryData,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub xi3: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Values and derivatives of the four fields at one point. Index `k` holds
/// the `k`-th derivative; P1 fields have vanishing higher derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet {
    pub xi1: [f64; 4],
    pub xi2: [f64; 4],
    pub xi3: [f64; 4],
    pub theta: [f64; 4],
}

/// Piecewise smooth beam fields, evaluated segment by segment.
pub trait BeamFields {
    /// Breakpoints `x_0 < ... < x_m`; the fields are smooth on each segment.
    fn breakpoints(&self) -> Vec<f64>;
    /// Jet at `x` using the representation on `segment`.
    fn jet(&self, segment: usize, x: f64) -> Jet;
    fn r(&self) -> f64;
}

impl BeamState {
    /// The state with all interior coefficients zero and clamped traces set.
    pub fn zero(mesh: BeamMesh, r: f64, boundary: BoundaryData) -> Result<Self> {
        mesh.validate()?;
        boundary.validate()?;
        check_r(r)?;
        let n = mesh.n_nodes();
        let mut s = Self {
            mesh,
            r,
            boundary,
            xi1: vec![0.0; n],
            xi2: vec![0.0; 2 * n],
            xi3: vec![0.0; 2 * n],
            theta: vec![0.0; n],
        };
        s.apply_boundary();
        Ok(s)
    }

    /// Nodal interpolation of smooth fields. `xi2` and `xi3` return
    /// `(value, slope)`. Clamped traces are read off the interpolant.
    pub fn interpolate(
        mesh: BeamMesh,
        r: f64,
        xi1: impl Fn(f64) -> f64,
        xi2: impl Fn(f64) -> (f64, f64),
        xi3: impl Fn(f64) -> (f64, f64),
        theta: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        mesh.validate()?;
        check_r(r)?;
        let nodes = mesh.nodes();
        let n = nodes.len();
        let mut s = Self {
            mesh,
            r,
            boundary: BoundaryData::default(),
            xi1: nodes.iter().map(|&x| xi1(x)).collect(),
            xi2: nodes.iter().flat_map(|&x| <[f64; 2]>::from(xi2(x))).collect(),
            xi3: nodes.iter().flat_map(|&x| <[f64; 2]>::from(xi3(x))).collect(),
            theta: nodes.iter().map(|&x| theta(x)).collect(),
        };
        for end in [0, n - 1] {
            if s.theta[end].abs() > 1e-14 {
                return Err(Error::Precondition(format!(
                    "twist must vanish at the clamped ends, got {} at node {end}",
                    s.theta[end]
                )));
            }
            s.theta[end] = 0.0;
        }
        s.boundary = BoundaryData {
            xi1: [s.xi1[0], s.xi1[n - 1]],
            xi2: [s.xi2[0], s.xi2[2 * n - 2]],
            xi2_slope: [s.xi2[1], s.xi2[2 * n - 1]],
            xi3: [s.xi3[0], s.xi3[2 * n - 2]],
            xi3_slope: [s.xi3[1], s.xi3[2 * n - 1]],
        };
        s.boundary.validate()?;
        s.validate()?;
        Ok(s)
    }

    /// Smooth test datum with zero clamped traces: sine stretching, `cos^2`
    /// bending bumps and a `cos^2` twist supported away from the two end
    /// elements on each side.
    pub fn smooth_datum(mesh: BeamMesh, r: f64, amplitude: f64) -> Result<Self> {
        use std::f64::consts::PI;
        let l = mesh.length;
        let a = amplitude;
        let support = l - 4.0 * mesh.h();
        let k = PI / l;
        Self::interpolate(
            mesh,
            r,
            |x| a * (2.0 * k * x).sin(),
            |x| (0.5 * a * (k * x).cos().powi(2), -0.5 * a * k * (2.0 * k * x).sin()),
            |x| (a * (k * x).cos().powi(2), -a * k * (2.0 * k * x).sin()),
            |x| {
                if x.abs() < 0.5 * support {
                    a * (PI * x / support).cos().powi(2)
                } else {
                    0.0
                }
            },
        )
    }

    fn apply_boundary(&mut self) {
        let n = self.mesh.n_nodes();
        let b = &self.boundary;
        self.xi1[0] = b.xi1[0];
        self.xi1[n - 1] = b.xi1[1];
        self.xi2[0] = b.xi2[0];
        self.xi2[1] = b.xi2_slope[0];
        self.xi2[2 * n - 2] = b.xi2[1];
        self.xi2[2 * n - 1] = b.xi2_slope[1];
        self.xi3[0] = b.xi3[0];
        self.xi3[1] = b.xi3_slope[0];
        self.xi3[2 * n - 2] = b.xi3[1];
        self.xi3[2 * n - 1] = b.xi3_slope[1];
        self.theta[0] = 0.0;
        self.theta[n - 1] = 0.0;
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        check_r(self.r)?;
        let n = self.mesh.n_nodes();
        let lens = [
            ("xi1", self.xi1.len(), n),
            ("xi2", self.xi2.len(), 2 * n),
            ("xi3", self.xi3.len(), 2 * n),
            ("theta", self.theta.len(), n),
        ];
        for (name, got, want) in lens {
            if got != want {
                return Err(Error::Shape(format!("{name} has {got} coefficients, expected {want}")));
            }
        }
        if !self.to_full().iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("state has non-finite coefficients".into()));
        }
        let mut clamped = self.clone();
        clamped.apply_boundary();
        if clamped != *self {
            return Err(Error::Precondition(
                "state traces do not match its boundary data".into(),
            ));
        }
        Ok(())
    }

    pub fn dofs(&self) -> DofMap {
        DofMap::new(&self.mesh)
    }

    /// Global coefficient vector `[xi1 | xi2 | xi3 | theta]`.
    pub fn to_full(&self) -> DVector<f64> {
        DVector::from_iterator(
            6 * self.mesh.n_nodes(),
            self.xi1
                .iter()
                .chain(&self.xi2)
                .chain(&self.xi3)
                .chain(&self.theta)
                .copied(),
        )
    }

    /// Replace all coefficients from a global vector.
    pub fn with_full(&self, full: &DVector<f64>) -> Result<Self> {
        let n = self.mesh.n_nodes();
        if full.len() != 6 * n {
            return Err(Error::Shape(format!(
                "coefficient vector has length {}, expected {}",
                full.len(),
                6 * n
            )));
        }
        let v = full.as_slice();
        Ok(Self {
            mesh: self.mesh,
            r: self.r,
            boundary: self.boundary,
            xi1: v[..n].to_vec(),
            xi2: v[n..3 * n].to_vec(),
            xi3: v[3 * n..5 * n].to_vec(),
            theta: v[5 * n..].to_vec(),
        })
    }

    pub fn free_coords(&self) -> DVector<f64> {
        let full = self.to_full();
        let map = self.dofs();
        DVector::from_iterator(map.n_free(), map.free.iter().map(|&i| full[i]))
    }

    /// Same mesh and traces, interior coefficients from `x`.
    pub fn with_free(&self, x: &DVector<f64>) -> Result<Self> {
        let map = self.dofs();
        if x.len() != map.n_free() {
            return Err(Error::Shape(format!(
                "free vector has length {}, expected {}",
                x.len(),
                map.n_free()
            )));
        }
        let mut full = self.to_full();
        for (k, &i) in map.free.iter().enumerate() {
            full[i] = x[k];
        }
        self.with_full(&full)
    }

    pub fn compatible(&self, other: &Self) -> Result<()> {
        if !self.mesh.same_as(&other.mesh) {
            return Err(Error::Shape("states live on different meshes".into()));
        }
        if self.r != other.r || self.boundary != other.boundary {
            return Err(Error::Shape("states differ in r or boundary data".into()));
        }
        Ok(())
    }

    /// `(1 - s) a + s b` coefficientwise; stays admissible.
    pub fn lerp(&self, other: &Self, s: f64) -> Result<Self> {
        self.compatible(other)?;
        let full = self.to_full() * (1.0 - s) + other.to_full() * s;
        let mut out = self.with_full(&full)?;
        out.apply_boundary();
        Ok(out)
    }

    /// Jet at `x` evaluated on element `e`.
    pub fn jet_in_element(&self, e: usize, x: f64) -> Jet {
        let he = self.mesh.h();
        let s = (x - self.mesh.node(e)) / he;
        let sh = shapes(s, he);
        let mut j = Jet::default();
        for a in 0..2 {
            j.xi1[0] += sh.p1[a][0] * self.xi1[e + a];
            j.xi1[1] += sh.p1[a][1] * self.xi1[e + a];
            j.theta[0] += sh.p1[a][0] * self.theta[e + a];
            j.theta[1] += sh.p1[a][1] * self.theta[e + a];
        }
        for a in 0..4 {
            let c2 = self.xi2[2 * e + a];
            let c3 = self.xi3[2 * e + a];
            for d in 0..4 {
                j.xi2[d] += sh.hermite[a][d] * c2;
                j.xi3[d] += sh.hermite[a][d] * c3;
            }
        }
        j
    }

    pub fn jet_at(&self, x: f64) -> Jet {
        self.jet_in_element(self.mesh.locate(x), x)
    }

    /// CSV with columns `x1,xi1,xi2,xi3,theta` at `n_plot` uniform points.
    pub fn sample_csv(&self, n_plot: usize) -> String {
        let mut out = String::from("x1,xi1,xi2,xi3,theta\n");
        let n_plot = n_plot.max(2);
        for k in 0..n_plot {
            let x = self.mesh.left() + self.mesh.length * k as f64 / (n_plot - 1) as f64;
            let j = self.jet_at(x);
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?}\n",
                x, j.xi1[0], j.xi2[0], j.xi3[0], j.theta[0]
            ));
        }
        out
    }
}

impl BeamFields for BeamState {
    fn breakpoints(&self) -> Vec<f64> {
        self.mesh.nodes()
    }

    fn jet(&self, segment: usize, x: f64) -> Jet {
        self.jet_in_element(segment, x)
    }

    fn r(&self) -> f64 {
        self.r
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("r must be a finite nonnegative number, got {r}")))
    }
}
