//! Small dense helpers for 3x3 kinematics: rotations, polar factors and
//! fourth-order tensors stored as 9x9 matrices over row-major `vec(F)`.

use nalgebra::{SMatrix, SVector, Vector3};
use rand::Rng;

use crate::error::{Error, Result};

pub type Matrix3 = nalgebra::Matrix3<f64>;

/// Fourth-order tensor acting on 3x3 matrices, `T[A, B] = vec(A)^T T vec(B)`.
pub type Tensor4 = SMatrix<f64, 9, 9>;

pub type Vec9 = SVector<f64, 9>;

/// Third-order tensor `Z_{ijk}` (second-gradient components).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Tensor333(pub [f64; 27]);

impl Tensor333 {
    pub fn zeros() -> Self {
        Self([0.0; 27])
    }

    #[inline]
    pub fn idx(i: usize, j: usize, k: usize) -> usize {
        9 * i + 3 * j + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.0[Self::idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.0[Self::idx(i, j, k)] = v;
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|z| z * z).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().for_each(|z| *z *= s);
        out
    }

    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        let mut out = *self;
        for (o, b) in out.0.iter_mut().zip(other.0.iter()) {
            *o += s * b;
        }
        out
    }

    /// Left action of a matrix on the first index: `(QZ)_{ijk} = Q_{il} Z_{ljk}`.
    pub fn left_mul(&self, q: &Matrix3) -> Self {
        let mut out = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v = (0..3).map(|l| q[(i, l)] * self.get(l, j, k)).sum();
                    out.set(i, j, k, v);
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }
}

#[inline]
pub fn vec9(a: &Matrix3) -> Vec9 {
    Vec9::from_fn(|n, _| a[(n / 3, n % 3)])
}

#[inline]
pub fn unvec9(v: &Vec9) -> Matrix3 {
    Matrix3::from_fn(|i, j| v[3 * i + j])
}

/// Bilinear evaluation `T[A, B]`.
pub fn contract4(t: &Tensor4, a: &Matrix3, b: &Matrix3) -> f64 {
    vec9(a).dot(&(t * vec9(b)))
}

#[inline]
pub fn sym(a: &Matrix3) -> Matrix3 {
    (a + a.transpose()) * 0.5
}

#[inline]
pub fn skew(a: &Matrix3) -> Matrix3 {
    (a - a.transpose()) * 0.5
}

/// Frobenius inner product.
#[inline]
pub fn ddot(a: &Matrix3, b: &Matrix3) -> f64 {
    a.component_mul(b).sum()
}

/// Skew matrix with `hat(w) v = w x v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3 {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues formula for `exp(hat(w))`.
pub fn exp_so3(w: &Vector3<f64>) -> Matrix3 {
    let theta = w.norm();
    let k = hat(w);
    if theta < 1e-12 {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + k * a + k * k * b
}

pub fn is_rotation(q: &Matrix3, tol: f64) -> bool {
    (q.transpose() * q - Matrix3::identity()).norm() <= tol && (q.determinant() - 1.0).abs() <= tol
}

/// Orthogonal polar factor of `f` (the nearest rotation in Frobenius norm),
/// computed by the scaled Newton iteration `X <- (g X + X^{-T}/g) / 2`.
pub fn polar_rotation(f: &Matrix3) -> Result<Matrix3> {
    let det = f.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Domain(format!(
            "polar factor requires det > 0 (det = {det:.3e})"
        )));
    }
    let mut x = *f;
    for iter in 0..100 {
        let inv_t = x
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular matrix in polar iteration".into()))?
            .transpose();
        // Byers-Xu style determinant scaling speeds up the first iterations.
        let g = if iter < 6 {
            x.determinant().abs().powf(-1.0 / 3.0)
        } else {
            1.0
        };
        let next = (x * g + inv_t / g) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta <= 4.0 * f64::EPSILON * x.norm() {
            break;
        }
    }
    // one symmetric re-orthonormalization step
    let xtx = x.transpose() * x;
    let x = x * (Matrix3::identity() * 1.5 - xtx * 0.5);
    Ok(x)
}

/// `dist(F, SO(3)) = |F - Pi(F)|` for `det F > 0`.
pub fn dist_so3(f: &Matrix3) -> Result<f64> {
    Ok((f - polar_rotation(f)?).norm())
}

/// Haar-distributed random rotation (via a random unit quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3 {
    let q = [
        standard_normal(rng),
        standard_normal(rng),
        standard_normal(rng),
        standard_normal(rng),
    ];
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Standard normal sample by Box-Muller.
fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random matrix with entries uniform in `[-scale, scale]`.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Matrix3 {
    Matrix3::from_fn(|_, _| rng.random_range(-scale..=scale))
}

pub fn random_skew<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Matrix3 {
    skew(&random_matrix(rng, scale))
}

/// Random `F = Q (Id + S)` with `S` symmetric, `|S| <= radius`, so that
/// `dist(F, SO(3)) <= radius`.
pub fn random_near_rotation<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Matrix3 {
    let q = random_rotation(rng);
    let s = sym(&random_matrix(rng, 1.0));
    let target = rng.random_range(0.0..radius);
    let s = if s.norm() > 0.0 { s * (target / s.norm()) } else { s };
    q * (Matrix3::identity() + s)
}
