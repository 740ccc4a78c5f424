//! Effective quadratic forms at the identity and their reduction to the
//! beam coefficients.
//!
//! A symmetric 3x3 matrix is represented by its orthonormal coordinates
//! `(a11, a22, a33, sqrt2 a12, sqrt2 a13, sqrt2 a23)`, so a quadratic form on
//! `sym(3)` is a 6x6 symmetric matrix and the reduction over the free entries
//! is a Schur complement.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{contract4, sym, Matrix3};
use crate::material::MaterialModel;

pub type Matrix6 = SMatrix<f64, 6, 6>;
pub type Vector6 = SVector<f64, 6>;

/// Tolerance on the (H) residual.
pub const H_TOLERANCE: f64 = 1e-10;

const FIXED: [usize; 2] = [0, 3];
const FREE: [usize; 4] = [1, 2, 4, 5];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Elastic energy.
    W,
    /// Viscous channel, built from the dissipation distance.
    R,
}

/// Orthonormal basis of `sym(3)`.
pub fn sym_basis(i: usize) -> Matrix3 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut b = Matrix3::zeros();
    match i {
        0 => b[(0, 0)] = 1.0,
        1 => b[(1, 1)] = 1.0,
        2 => b[(2, 2)] = 1.0,
        3 => {
            b[(0, 1)] = s;
            b[(1, 0)] = s;
        }
        4 => {
            b[(0, 2)] = s;
            b[(2, 0)] = s;
        }
        5 => {
            b[(1, 2)] = s;
            b[(2, 1)] = s;
        }
        _ => panic!("sym(3) basis index {i} out of range"),
    }
    b
}

/// Coordinates of `sym(A)` in [`sym_basis`].
pub fn sym_coords(a: &Matrix3) -> Vector6 {
    let s = sym(a);
    let r2 = std::f64::consts::SQRT_2;
    Vector6::new(
        s[(0, 0)],
        s[(1, 1)],
        s[(2, 2)],
        r2 * s[(0, 1)],
        r2 * s[(0, 2)],
        r2 * s[(1, 2)],
    )
}

pub fn from_sym_coords(c: &Vector6) -> Matrix3 {
    (0..6).fold(Matrix3::zeros(), |acc, i| acc + sym_basis(i) * c[i])
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadForm3 {
    pub matrix: Matrix6,
    pub channel: Channel,
}

impl QuadForm3 {
    /// `Q3(A)`, which only sees `sym A`.
    pub fn eval(&self, a: &Matrix3) -> f64 {
        let c = sym_coords(a);
        c.dot(&(self.matrix * c))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix * s,
            channel: self.channel,
        }
    }
}

#[allow(non_snake_case)]
pub fn extract_Q3(model: &MaterialModel, channel: Channel) -> Result<QuadForm3> {
    let id = Matrix3::identity();
    let t = match channel {
        Channel::W => model
            .eval_w(&id, 2)?
            .hess
            .expect("order-2 evaluation returns a Hessian"),
        Channel::R => model.hess_d2_f1f1(&id)? * 0.5,
    };
    let matrix = Matrix6::from_fn(|i, j| contract4(&t, &sym_basis(i), &sym_basis(j)));
    let matrix = (matrix + matrix.transpose()) * 0.5;
    if matrix.cholesky().is_none() {
        return Err(Error::DegenerateForm(format!(
            "{channel:?} form is not positive definite on sym(3)"
        )));
    }
    Ok(QuadForm3 { matrix, channel })
}

/// Reduced form on `(q11, q12)` together with the minimizing completion.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadFormReduced {
    pub channel: Channel,
    /// `Q1(q11, q12) = q^T Q1 q`.
    pub q1: Matrix2<f64>,
    pub c0: f64,
    pub cstar: f64,
    pub h_residual: f64,
    /// Free coordinates `(a22, a33, sqrt2 a13, sqrt2 a23)` of the minimizer
    /// as a linear map of the fixed coordinates `(a11, sqrt2 a12)`.
    completion: SMatrix<f64, 4, 2>,
}

impl QuadFormReduced {
    pub fn q1_value(&self, q11: f64, q12: f64) -> f64 {
        let q = Vector2::new(q11, q12);
        q.dot(&(self.q1 * q))
    }

    /// `Q0(q11) = C0 q11^2`.
    pub fn q0_value(&self, q11: f64) -> f64 {
        self.c0 * q11 * q11
    }

    /// The symmetric matrix attaining `Q1(q11, q12)`.
    pub fn minimizer(&self, q11: f64, q12: f64) -> Matrix3 {
        let fixed = Vector2::new(q11, std::f64::consts::SQRT_2 * q12);
        let free = self.completion * fixed;
        let mut c = Vector6::zeros();
        c[FIXED[0]] = fixed[0];
        c[FIXED[1]] = fixed[1];
        for (k, &i) in FREE.iter().enumerate() {
            c[i] = free[k];
        }
        from_sym_coords(&c)
    }

    /// Hypothesis (H) in the block form `Q1 = diag(C0, C*)`.
    pub fn holds_h(&self) -> bool {
        self.h_residual <= H_TOLERANCE
    }
}

fn blocks(q3: &QuadForm3) -> (Matrix2<f64>, SMatrix<f64, 2, 4>, SMatrix<f64, 4, 4>) {
    let m = &q3.matrix;
    let aa = Matrix2::from_fn(|i, j| m[(FIXED[i], FIXED[j])]);
    let af = SMatrix::<f64, 2, 4>::from_fn(|i, j| m[(FIXED[i], FREE[j])]);
    let ff = SMatrix::<f64, 4, 4>::from_fn(|i, j| m[(FREE[i], FREE[j])]);
    (aa, af, ff)
}

/// Minimize over the four entries not in the first row pair.
pub fn reduce(q3: &QuadForm3) -> Result<QuadFormReduced> {
    let (aa, af, ff) = blocks(q3);
    let chol = ff
        .cholesky()
        .ok_or_else(|| Error::DegenerateForm(format!("{:?}: free block is not positive definite", q3.channel)))?;
    let completion = -chol.solve(&af.transpose());
    let schur = aa + af * completion;
    // switch from (a11, sqrt2 a12) to (q11, q12)
    let t = Matrix2::new(1.0, 0.0, 0.0, std::f64::consts::SQRT_2);
    let q1 = t * schur * t;
    let q1 = (q1 + q1.transpose()) * 0.5;
    if q1[(1, 1)] <= 0.0 || q1.determinant() <= 0.0 {
        return Err(Error::DegenerateForm(format!(
            "{:?}: reduced form is not positive definite",
            q3.channel
        )));
    }
    let c0 = q1[(0, 0)] - q1[(0, 1)] * q1[(0, 1)] / q1[(1, 1)];
    let cstar = q1[(1, 1)];
    let h_residual = af.norm_op() + diagonal_deviation(&q1, c0, cstar);
    Ok(QuadFormReduced {
        channel: q3.channel,
        q1,
        c0,
        cstar,
        h_residual,
        completion,
    })
}

fn diagonal_deviation(q1: &Matrix2<f64>, c0: f64, cstar: f64) -> f64 {
    (q1 - Matrix2::new(c0, 0.0, 0.0, cstar)).norm()
}

trait OperatorNorm {
    fn norm_op(&self) -> f64;
}

impl OperatorNorm for SMatrix<f64, 2, 4> {
    fn norm_op(&self) -> f64 {
        let g = self * self.transpose();
        g.symmetric_eigenvalues().max().max(0.0).sqrt()
    }
}

/// Outcome of the block decoupling check.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisH {
    pub holds: bool,
    pub residual: f64,
    /// Form on the remaining coordinates `(a22, a33, sqrt2 a13, sqrt2 a23)`.
    pub qstar: SMatrix<f64, 4, 4>,
}

#[allow(non_snake_case)]
pub fn check_hypothesis_H(q3: &QuadForm3) -> HypothesisH {
    let (aa, af, ff) = blocks(q3);
    let t = Matrix2::new(1.0, 0.0, 0.0, std::f64::consts::SQRT_2);
    // without coupling Q1 is the fixed block itself
    let q1 = match reduce(q3) {
        Ok(r) => r.q1,
        Err(_) => t * aa * t,
    };
    let c0 = q1[(0, 0)] - q1[(0, 1)] * q1[(0, 1)] / q1[(1, 1)];
    let residual = af.norm_op() + diagonal_deviation(&q1, c0, q1[(1, 1)]);
    HypothesisH {
        holds: residual <= H_TOLERANCE,
        residual,
        qstar: ff,
    }
}

/// Both channels of a material, as used by the beam model.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadFormSet {
    pub q3_w: QuadForm3,
    pub q3_r: QuadForm3,
    pub w: QuadFormReduced,
    pub r: QuadFormReduced,
}

impl QuadFormSet {
    pub fn from_model(model: &MaterialModel) -> Result<Self> {
        let q3_w = extract_Q3(model, Channel::W)?;
        let q3_r = extract_Q3(model, Channel::R)?;
        let w = reduce(&q3_w)?;
        let r = reduce(&q3_r)?;
        Ok(Self { q3_w, q3_r, w, r })
    }

    pub fn summary(&self) -> QuadFormSummary {
        let arr = |m: &Matrix2<f64>| [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
        QuadFormSummary {
            c0_w: self.w.c0,
            cstar_w: self.w.cstar,
            q1_w: arr(&self.w.q1),
            h_w: self.w.holds_h(),
            h_residual_w: self.w.h_residual,
            c0_r: self.r.c0,
            cstar_r: self.r.cstar,
            q1_r: arr(&self.r.q1),
            h_r: self.r.holds_h(),
            h_residual_r: self.r.h_residual,
            q_r_convention: "reduction_of_q3_d".to_string(),
        }
    }
}

/// Manifest fragment with the reduced constants of both channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadFormSummary {
    pub c0_w: f64,
    pub cstar_w: f64,
    pub q1_w: [[f64; 2]; 2],
    pub h_w: bool,
    pub h_residual_w: f64,
    pub c0_r: f64,
    pub cstar_r: f64,
    pub q1_r: [[f64; 2]; 2],
    pub h_r: bool,
    pub h_residual_r: f64,
    /// The viscous forms are the reductions of `1/2 d2 D^2(Id, Id)`.
    pub q_r_convention: String,
}
