use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussRule;

/// Thickness, energy and penalty scales attached to one width `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledGeometry {
    pub h: f64,
    pub delta_h: f64,
    pub eps_h: f64,
    pub zeta_h: f64,
    pub r: f64,
    pub alpha: f64,
    pub p: f64,
}

impl ScaledGeometry {
    /// `delta = h^2`, `eps = r delta^2` (or `h^5` when `r = 0`) and
    /// `zeta = eps^2 (eps/delta)^(-beta p)` with `beta = (1 + alpha)/2`.
    pub fn new(h: f64, r: f64, alpha: f64, p: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0 && h < 1.0) {
            return Err(Error::Config(format!("h must lie in (0, 1), got {h}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Config(format!("r must be finite and nonnegative, got {r}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(p.is_finite() && p > 3.0) {
            return Err(Error::Config(format!("penalty exponent must exceed 3, got {p}")));
        }
        let delta_h = h * h;
        let eps_h = if r > 0.0 { r * delta_h * delta_h } else { h.powi(5) };
        let beta = 0.5 * (1.0 + alpha);
        let zeta_h = eps_h * eps_h * (eps_h / delta_h).powf(-beta * p);
        let geom = Self {
            h,
            delta_h,
            eps_h,
            zeta_h,
            r,
            alpha,
            p,
        };
        if !(geom.ratio() < 1.0) {
            return Err(Error::Config(format!(
                "eps/delta = {:.3e} must stay below 1 (decrease h or r)",
                geom.ratio()
            )));
        }
        let (lower, upper) = geom.penalty_bounds();
        if !(lower >= 1.0 && upper <= 1.0) {
            return Err(Error::Config(format!(
                "penalty scale out of range at h = {h}: {lower:.3e} < 1 or {upper:.3e} > 1"
            )));
        }
        Ok(geom)
    }

    /// `eps/delta`, the size of the rotational part of the scaled gradient.
    pub fn ratio(&self) -> f64 {
        self.eps_h / self.delta_h
    }

    /// `(zeta eps^-2 (eps/delta)^(alpha p), zeta eps^-2 (eps/delta)^p)`; the
    /// first must be at least 1 and the second at most 1.
    pub fn penalty_bounds(&self) -> (f64, f64) {
        let s = self.zeta_h / (self.eps_h * self.eps_h);
        (
            s * self.ratio().powf(self.alpha * self.p),
            s * self.ratio().powf(self.p),
        )
    }

    /// `zeta eps^-2 (eps/delta)^p`, the bound on the penalty contribution of
    /// the recovery sequence up to a constant.
    pub fn penalty_envelope(&self) -> f64 {
        self.penalty_bounds().1
    }
}

/// Geometries for a strictly decreasing list of widths.
pub fn schedule(h_list: &[f64], r: f64, alpha: f64, p: f64) -> Result<Vec<ScaledGeometry>> {
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(format!(
            "h_list must be strictly decreasing, got {h_list:?}"
        )));
    }
    h_list.iter().map(|&h| ScaledGeometry::new(h, r, alpha, p)).collect()
}

/// Number of Gauss points: `n1` per segment of the beam fields along `x1`,
/// `n2` and `n3` across the section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadSizes {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Default for QuadSizes {
    fn default() -> Self {
        Self { n1: 24, n2: 6, n3: 6 }
    }
}

impl QuadSizes {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::Config(format!(
                "quadrature sizes must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Tensor Gauss grid on `I x (-1/2, 1/2)^2`. Node `(i, j, k)` is stored at
/// `(i n2 + j) n3 + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadGrid {
    pub breakpoints: Vec<f64>,
    pub x1: Vec<f64>,
    pub w1: Vec<f64>,
    /// Segment of `breakpoints` holding each `x1` node.
    pub seg: Vec<usize>,
    pub x2: Vec<f64>,
    pub w2: Vec<f64>,
    pub x3: Vec<f64>,
    pub w3: Vec<f64>,
}

impl QuadGrid {
    pub fn new(breakpoints: &[f64], sizes: QuadSizes) -> Result<Self> {
        sizes.validate()?;
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("breakpoints must be increasing".into()));
        }
        let r1 = GaussRule::legendre(sizes.n1);
        let (mut x1, mut w1, mut seg) = (Vec::new(), Vec::new(), Vec::new());
        for (e, w) in breakpoints.windows(2).enumerate() {
            let rule = r1.on_interval(w[0], w[1]);
            x1.extend(&rule.points);
            w1.extend(&rule.weights);
            seg.extend(std::iter::repeat_n(e, rule.len()));
        }
        let r2 = GaussRule::legendre(sizes.n2).on_interval(-0.5, 0.5);
        let r3 = GaussRule::legendre(sizes.n3).on_interval(-0.5, 0.5);
        Ok(Self {
            breakpoints: breakpoints.to_vec(),
            x1,
            w1,
            seg,
            x2: r2.points,
            w2: r2.weights,
            x3: r3.points,
            w3: r3.weights,
        })
    }

    pub fn len(&self) -> usize {
        self.x1.len() * self.x2.len() * self.x3.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.x2.len() + j) * self.x3.len() + k
    }

    pub fn point(&self, n: usize) -> [f64; 3] {
        let (i, j, k) = self.unravel(n);
        [self.x1[i], self.x2[j], self.x3[k]]
    }

    pub fn weight(&self, n: usize) -> f64 {
        let (i, j, k) = self.unravel(n);
        self.w1[i] * self.w2[j] * self.w3[k]
    }

    pub fn unravel(&self, n: usize) -> (usize, usize, usize) {
        let n3 = self.x3.len();
        let n2 = self.x2.len();
        (n / (n2 * n3), (n / n3) % n2, n % n3)
    }

    pub fn left(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn right(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Segment containing `x`, clamped to the ends.
    pub fn locate(&self, x: f64) -> usize {
        let m = self.breakpoints.len() - 1;
        let k = self.breakpoints.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(m - 1)
    }
}
