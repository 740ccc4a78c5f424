use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// Uniform mesh of `I = (-l/2, l/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamMesh {
    pub length: f64,
    pub n_elems: usize,
}

pub const MIN_ELEMS: usize = 4;
pub const GAUSS_POINTS_PER_ELEMENT: usize = 5;

impl BeamMesh {
    pub fn new(length: f64, n_elems: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("beam length must be positive, got {length}")));
        }
        if n_elems < MIN_ELEMS {
            return Err(Error::Config(format!(
                "need at least {MIN_ELEMS} elements, got {n_elems}"
            )));
        }
        Ok(Self { length, n_elems })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.length, self.n_elems).map(|_| ())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_elems + 1
    }

    pub fn h(&self) -> f64 {
        self.length / self.n_elems as f64
    }

    pub fn left(&self) -> f64 {
        -0.5 * self.length
    }

    pub fn right(&self) -> f64 {
        0.5 * self.length
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_elems {
            self.right()
        } else {
            self.left() + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Element containing `x`; points on an interior node go to the right element.
    pub fn locate(&self, x: f64) -> usize {
        let k = ((x - self.left()) / self.h()).floor();
        (k.max(0.0) as usize).min(self.n_elems - 1)
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.n_elems == other.n_elems && self.length == other.length
    }
}

/// Shape function values and derivatives at one local coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shapes {
    /// P1: `[N_a, N_a']`.
    pub p1: [[f64; 2]; 2],
    /// Hermite cubic, order `(H1, H2, H3, H4)`, derivatives 0..=3.
    pub hermite: [[f64; 4]; 4],
}

/// Shapes at `s in [0, 1]` on an element of length `he`.
pub fn shapes(s: f64, he: f64) -> Shapes {
    let s2 = s * s;
    let s3 = s2 * s;
    let p1 = [[1.0 - s, -1.0 / he], [s, 1.0 / he]];
    let h2 = he * he;
    let h3 = h2 * he;
    let hermite = [
        [
            1.0 - 3.0 * s2 + 2.0 * s3,
            (-6.0 * s + 6.0 * s2) / he,
            (-6.0 + 12.0 * s) / h2,
            12.0 / h3,
        ],
        [
            he * (s - 2.0 * s2 + s3),
            1.0 - 4.0 * s + 3.0 * s2,
            (-4.0 + 6.0 * s) / he,
            6.0 / h2,
        ],
        [
            3.0 * s2 - 2.0 * s3,
            (6.0 * s - 6.0 * s2) / he,
            (6.0 - 12.0 * s) / h2,
            -12.0 / h3,
        ],
        [he * (-s2 + s3), -2.0 * s + 3.0 * s2, (-2.0 + 6.0 * s) / he, 6.0 / h2],
    ];
    Shapes { p1, hermite }
}

/// Local DOF count: `xi1 (2) | xi2 (4) | xi3 (4) | theta (2)`.
pub const LOCAL_DOFS: usize = 12;

pub type LocalVec = [f64; LOCAL_DOFS];

/// Linear functionals of the element coefficients at one Gauss point.
#[derive(Clone, Debug)]
pub(crate) struct QpBasis {
    pub s: f64,
    /// Gauss weight times element length.
    pub weight: f64,
    /// `xi1'`
    pub d1: LocalVec,
    /// `xi2''`
    pub dd2: LocalVec,
    /// `xi3`, `xi3'`, `xi3''`
    pub v3: LocalVec,
    pub d3: LocalVec,
    pub dd3: LocalVec,
    /// `theta'`
    pub dt: LocalVec,
}

pub(crate) fn reference_element(he: f64) -> Vec<QpBasis> {
    let rule = GaussRule::legendre(GAUSS_POINTS_PER_ELEMENT).on_interval(0.0, 1.0);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| {
            let sh = shapes(s, he);
            let mut q = QpBasis {
                s,
                weight: w * he,
                d1: [0.0; LOCAL_DOFS],
                dd2: [0.0; LOCAL_DOFS],
                v3: [0.0; LOCAL_DOFS],
                d3: [0.0; LOCAL_DOFS],
                dd3: [0.0; LOCAL_DOFS],
                dt: [0.0; LOCAL_DOFS],
            };
            for a in 0..2 {
                q.d1[a] = sh.p1[a][1];
                q.dt[10 + a] = sh.p1[a][1];
            }
            for a in 0..4 {
                q.dd2[2 + a] = sh.hermite[a][2];
                q.v3[6 + a] = sh.hermite[a][0];
                q.d3[6 + a] = sh.hermite[a][1];
                q.dd3[6 + a] = sh.hermite[a][2];
            }
            q
        })
        .collect()
}

/// Index bookkeeping for the global coefficient vector
/// `[xi1 (n+1) | xi2 (2(n+1)) | xi3 (2(n+1)) | theta (n+1)]`, with Hermite
/// coefficients interleaved as (value, slope) per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub n_nodes: usize,
    pub n_full: usize,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &BeamMesh) -> Self {
        let n = mesh.n_nodes();
        let n_full = 6 * n;
        let (o1, o2, o3, ot) = offsets(n);
        let last = n - 1;
        let mut constrained = vec![
            o1,
            o1 + last,
            o2,
            o2 + 1,
            o2 + 2 * last,
            o2 + 2 * last + 1,
            o3,
            o3 + 1,
            o3 + 2 * last,
            o3 + 2 * last + 1,
            ot,
            ot + last,
        ];
        constrained.sort_unstable();
        let free = (0..n_full).filter(|i| constrained.binary_search(i).is_err()).collect();
        Self {
            n_nodes: n,
            n_full,
            free,
            constrained,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn offsets(&self) -> (usize, usize, usize, usize) {
        offsets(self.n_nodes)
    }

    /// Global indices of the local DOFs of element `e`.
    pub fn element(&self, e: usize) -> [usize; LOCAL_DOFS] {
        let (o1, o2, o3, ot) = self.offsets();
        [
            o1 + e,
            o1 + e + 1,
            o2 + 2 * e,
            o2 + 2 * e + 1,
            o2 + 2 * e + 2,
            o2 + 2 * e + 3,
            o3 + 2 * e,
            o3 + 2 * e + 1,
            o3 + 2 * e + 2,
            o3 + 2 * e + 3,
            ot + e,
            ot + e + 1,
        ]
    }
}

fn offsets(n: usize) -> (usize, usize, usize, usize) {
    (0, n, 3 * n, 5 * n)
}
