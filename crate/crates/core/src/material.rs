//! 3D constitutive laws: elastic density `W`, dissipation distance `D`,
//! second-gradient penalty `P` and the viscous potential `R`.
//!
//! Every built-in elastic law is quadratic in the Green-Lagrange strain,
//! `W(F) = 1/2 E : L(E)` with `E = F^T F - Id`, so the derivatives share one
//! code path: `dW = 2 F S` and `d2W[K] = 2 K S + 2 F L(K^T F + F^T K)` where
//! `S = L(E)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist_so3, unvec9, vec9, Matrix3, Tensor333, Tensor4};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElasticLaw {
    /// `W = (mu/4) |F^T F - Id|^2`.
    SvkZeroPoisson { mu: f64 },
    /// `W = 1/8 (l2 E22 + l3 E33)^2 + (mu/8) |E|^2`.
    Orthotropic { lambda2: f64, lambda3: f64, mu: f64 },
    /// `W = (lambda/8) (tr E)^2 + (mu/4) |E|^2`. Violates the block
    /// decoupling hypothesis for `lambda > 0`; kept as a negative control.
    Isotropic { lambda: f64, mu: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DissipationLaw {
    /// `D(F1, F2) = |F1^T F1 - F2^T F2|`.
    #[default]
    CauchyGreenDifference,
}

/// `P(Z) = c1 |Z|^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPenalty {
    pub c1: f64,
    pub p: f64,
}

impl PowerPenalty {
    /// Upper growth constant: `P(Z) <= c2 |Z|^p` and `|dP(Z)| <= c2 |Z|^(p-1)`.
    pub fn c2(&self) -> f64 {
        self.c1 * self.p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub elastic: ElasticLaw,
    pub dissipation: DissipationLaw,
    pub penalty: PowerPenalty,
    /// Largest `dist(F, SO(3))` at which `R` and the Hessian of `D^2` are evaluated.
    pub trust_radius: f64,
}

pub const DEFAULT_TRUST_RADIUS: f64 = 0.2;

/// Value and optional derivatives of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct WEval {
    pub value: f64,
    pub grad: Option<Matrix3>,
    pub hess: Option<Tensor4>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PEval {
    pub value: f64,
    pub grad: Option<Tensor333>,
}

impl MaterialModel {
    pub fn new(elastic: ElasticLaw, penalty: PowerPenalty) -> Result<Self> {
        let model = Self {
            elastic,
            dissipation: DissipationLaw::CauchyGreenDifference,
            penalty,
            trust_radius: DEFAULT_TRUST_RADIUS,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn svk(mu: f64) -> Self {
        Self::new(ElasticLaw::SvkZeroPoisson { mu }, PowerPenalty { c1: 1.0, p: 4.0 }).expect("valid svk parameters")
    }

    pub fn with_trust_radius(mut self, radius: f64) -> Result<Self> {
        self.trust_radius = radius;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be nonnegative, got {v}")))
            }
        };
        match self.elastic {
            ElasticLaw::SvkZeroPoisson { mu } => positive("mu", mu)?,
            ElasticLaw::Orthotropic { lambda2, lambda3, mu } => {
                nonneg("lambda2", lambda2)?;
                nonneg("lambda3", lambda3)?;
                positive("mu", mu)?;
            }
            ElasticLaw::Isotropic { lambda, mu } => {
                nonneg("lambda", lambda)?;
                positive("mu", mu)?;
            }
        }
        positive("c1", self.penalty.c1)?;
        if !(self.penalty.p > 3.0) || !self.penalty.p.is_finite() {
            return Err(Error::Config(format!(
                "penalty exponent p must exceed 3, got {}",
                self.penalty.p
            )));
        }
        if !(self.trust_radius > 0.0 && self.trust_radius < 1.0) {
            return Err(Error::Config(format!(
                "trust radius must lie in (0, 1), got {}",
                self.trust_radius
            )));
        }
        Ok(())
    }

    /// `S = L(E)` for the elastic law.
    fn stress(&self, e: &Matrix3) -> Matrix3 {
        match self.elastic {
            ElasticLaw::SvkZeroPoisson { mu } => e * (0.5 * mu),
            ElasticLaw::Orthotropic { lambda2, lambda3, mu } => {
                let s = 0.25 * (lambda2 * e[(1, 1)] + lambda3 * e[(2, 2)]);
                let mut out = e * (0.25 * mu);
                out[(1, 1)] += s * lambda2;
                out[(2, 2)] += s * lambda3;
                out
            }
            ElasticLaw::Isotropic { lambda, mu } => Matrix3::identity() * (0.25 * lambda * e.trace()) + e * (0.5 * mu),
        }
    }

    pub fn eval_w(&self, f: &Matrix3, order: u8) -> Result<WEval> {
        if order > 2 {
            return Err(Error::Config(format!("unsupported derivative order {order}")));
        }
        check_finite(f)?;
        let e = f.transpose() * f - Matrix3::identity();
        let s = self.stress(&e);
        let value = 0.5 * e.component_mul(&s).sum();
        let grad = (order >= 1).then(|| f * s * 2.0);
        let hess = (order >= 2).then(|| {
            let mut t = Tensor4::zeros();
            for n in 0..9 {
                let mut k = Matrix3::zeros();
                k[(n / 3, n % 3)] = 1.0;
                let de = k.transpose() * f + f.transpose() * k;
                let col = k * s * 2.0 + f * self.stress(&de) * 2.0;
                t.set_column(n, &vec9(&col));
            }
            // symmetric in exact arithmetic; remove roundoff asymmetry
            (t + t.transpose()) * 0.5
        });
        Ok(WEval {
            value: value.max(0.0),
            grad,
            hess,
        })
    }

    /// Energy value only.
    pub fn w(&self, f: &Matrix3) -> Result<f64> {
        Ok(self.eval_w(f, 0)?.value)
    }

    pub fn eval_d(&self, f1: &Matrix3, f2: &Matrix3) -> Result<f64> {
        Ok(self.eval_d2(f1, f2)?.sqrt())
    }

    /// `D^2(F1, F2)`, the quantity that is actually integrated.
    pub fn eval_d2(&self, f1: &Matrix3, f2: &Matrix3) -> Result<f64> {
        check_det(f1)?;
        check_det(f2)?;
        match self.dissipation {
            DissipationLaw::CauchyGreenDifference => {
                let diff = f1.transpose() * f1 - f2.transpose() * f2;
                Ok(diff.norm_squared())
            }
        }
    }

    /// `R(F, Fdot) = 1/4 d2_{F1} D^2(F, F)[Fdot, Fdot]`.
    pub fn eval_r(&self, f: &Matrix3, fdot: &Matrix3) -> Result<f64> {
        self.check_trust(f)?;
        check_finite(fdot)?;
        match self.dissipation {
            DissipationLaw::CauchyGreenDifference => {
                let cdot = fdot.transpose() * f + f.transpose() * fdot;
                Ok(0.5 * cdot.norm_squared())
            }
        }
    }

    pub fn hess_d2_f1f1(&self, f: &Matrix3) -> Result<Tensor4> {
        self.check_trust(f)?;
        match self.dissipation {
            DissipationLaw::CauchyGreenDifference => {
                // d2 D^2(F, F)[G, K] = 2 (G^T F + F^T G) : (K^T F + F^T K)
                let mut lin = Tensor4::zeros();
                for n in 0..9 {
                    let mut g = Matrix3::zeros();
                    g[(n / 3, n % 3)] = 1.0;
                    let cdot = g.transpose() * f + f.transpose() * g;
                    lin.set_column(n, &vec9(&cdot));
                }
                Ok(lin.transpose() * lin * 2.0)
            }
        }
    }

    pub fn eval_p(&self, z: &Tensor333, order: u8) -> Result<PEval> {
        if order > 1 {
            return Err(Error::Config(format!(
                "penalty supports derivative order 0 or 1, got {order}"
            )));
        }
        let PowerPenalty { c1, p } = self.penalty;
        let n = z.norm();
        let value = c1 * n.powf(p);
        let grad = (order == 1).then(|| {
            if n == 0.0 {
                Tensor333::zeros()
            } else {
                z.scale(c1 * p * n.powf(p - 2.0))
            }
        });
        Ok(PEval { value, grad })
    }

    fn check_trust(&self, f: &Matrix3) -> Result<()> {
        check_finite(f)?;
        let dist = dist_so3(f)?;
        if dist > self.trust_radius {
            return Err(Error::Domain(format!(
                "dist(F, SO(3)) = {dist:.3e} exceeds trust radius {}",
                self.trust_radius
            )));
        }
        Ok(())
    }
}

/// Apply a fourth-order tensor to a matrix: `(T K)` with `T[G, K] = G : (T K)`.
pub fn apply4(t: &Tensor4, k: &Matrix3) -> Matrix3 {
    unvec9(&(t * vec9(k)))
}

fn check_finite(f: &Matrix3) -> Result<()> {
    if f.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("non-finite matrix entry".into()))
    }
}

fn check_det(f: &Matrix3) -> Result<()> {
    check_finite(f)?;
    let det = f.determinant();
    if det > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "dissipation requires det F > 0 (det = {det:.3e})"
        )))
    }
}
