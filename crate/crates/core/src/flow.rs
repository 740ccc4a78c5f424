//! Minimizing movements for a metric gradient flow.
//!
//! Each step minimizes `Phi(z) = phi(z) + D^2(z_prev, z) / (2 tau)` by a
//! damped Newton method. The spaces work in free coordinates; the beam
//! instance lifts them to full coefficient vectors with the clamped traces.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::beam1d::{dual_norm, energy_full, metric_sq_full, metric_tensor_full, BeamForm, BeamState, ForceProfile};
use crate::error::{Error, Result};
use crate::quadforms::QuadFormSet;

/// Energy and squared distance on a coordinate space.
pub trait FlowSpace {
    fn dim(&self) -> usize;

    fn energy(&self, x: &DVector<f64>) -> Result<f64>;

    /// Value, gradient and Hessian of the energy.
    fn energy_derivatives(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)>;

    fn metric_sq(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64>;

    /// Value, gradient and Hessian of `b -> D^2(a, b)`.
    fn metric_sq_derivatives(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)>;

    /// `g(w, w) = lim D^2(x, x + eps w) / eps^2`.
    fn metric_tensor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Inner solver settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Relative tolerance on the dual norm of the gradient of `Phi`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!(
                "newton tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("newton max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub z: DVector<f64>,
    pub phi: f64,
    pub metric_sq: f64,
    pub iterations: usize,
    pub residual: f64,
}

struct Incremental<'a, S: FlowSpace + ?Sized> {
    space: &'a S,
    prev: &'a DVector<f64>,
    tau: f64,
}

/// `(Phi, phi, D^2, grad Phi, hess Phi)`.
type Derivatives = (f64, f64, f64, DVector<f64>, DMatrix<f64>);

impl<S: FlowSpace + ?Sized> Incremental<'_, S> {
    fn value(&self, x: &DVector<f64>) -> Result<(f64, f64, f64)> {
        let phi = self.space.energy(x)?;
        let d2 = self.space.metric_sq(self.prev, x)?;
        Ok((phi + d2 / (2.0 * self.tau), phi, d2))
    }

    fn derivatives(&self, x: &DVector<f64>) -> Result<Derivatives> {
        let (phi, gp, hp) = self.space.energy_derivatives(x)?;
        let (d2, gd, hd) = self.space.metric_sq_derivatives(self.prev, x)?;
        let s = 0.5 / self.tau;
        Ok((phi + s * d2, phi, d2, gp + gd * s, hp + hd * s))
    }
}

/// Newton direction for `H p = -g`, shifting `H` towards the metric when
/// it is not positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>, metric: &DMatrix<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = h.clone().cholesky() {
        let p = -chol.solve(g);
        if p.dot(g) < 0.0 {
            return Ok(p);
        }
    }
    let scale = h.diagonal().amax().max(1.0);
    let mut shift = 1e-8 * scale;
    for _ in 0..60 {
        let shifted = h + metric * shift;
        if let Some(chol) = shifted.cholesky() {
            let p = -chol.solve(g);
            if p.dot(g) < 0.0 {
                return Ok(p);
            }
        }
        shift *= 4.0;
    }
    // steepest descent in the metric
    let chol = metric
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MetricDegenerate("metric tensor failed Cholesky factorization".into()))?;
    Ok(-chol.solve(g))
}

/// One minimizing-movement step from `z_prev`, warm-started at `init`
/// (default `z_prev`).
pub fn incremental_step<S: FlowSpace + ?Sized>(
    space: &S,
    z_prev: &DVector<f64>,
    tau: f64,
    settings: &NewtonSettings,
    init: Option<&DVector<f64>>,
) -> Result<StepResult> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {tau}")));
    }
    settings.validate()?;
    if z_prev.len() != space.dim() {
        return Err(Error::Shape(format!(
            "state has {} coordinates, space has {}",
            z_prev.len(),
            space.dim()
        )));
    }
    let problem = Incremental {
        space,
        prev: z_prev,
        tau,
    };
    // dual norm measured in the metric at the anchor, shared by all iterates
    let metric = space.metric_tensor(z_prev)?;
    let tol = settings.tol * (1.0 + space.energy(z_prev)?.abs());

    let mut x = init.cloned().unwrap_or_else(|| z_prev.clone());
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut residual = f64::INFINITY;
    for iter in 0..=settings.max_iter {
        let (total, phi, d2, g, h) = problem.derivatives(&x)?;
        residual = dual_norm(&metric, &g)?;
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, x.clone()));
        }
        if residual <= tol {
            return Ok(StepResult {
                z: x,
                phi,
                metric_sq: d2,
                iterations: iter,
                residual,
            });
        }
        if iter == settings.max_iter {
            break;
        }
        let p = newton_direction(&h, &g, &metric)?;
        let slope = g.dot(&p);
        let floor = 16.0 * f64::EPSILON * (1.0 + total.abs());
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let trial = &x + &p * alpha;
            if let Ok((t, _, _)) = problem.value(&trial) {
                if t <= total + 1e-4 * alpha * slope + floor {
                    x = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (residual, best) = best.unwrap_or((residual, x));
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        residual,
        best: best.iter().copied().collect(),
    })
}

/// One row of the energy-dissipation ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub phi: f64,
    /// `D(Z^{n-1}, Z^n)`.
    pub d_increment: f64,
    /// `D(Z^{n-1}, Z^n) / tau`.
    pub metric_derivative: f64,
    /// Riesz slope at `Z^n`.
    pub slope: f64,
    /// Running deficit `1/2 sum tau |z'|^2 + 1/2 sum tau slope^2 + phi(Z^n) - phi(Z^0)`.
    pub edb_partial: f64,
    /// `phi(Z^n) + D^2/(2 tau) - phi(Z^{n-1})`, nonpositive up to roundoff.
    pub step_decrease: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
}

/// Time-discrete solution, piecewise constant and right-continuous.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub ledger: Vec<StepRecord>,
}

impl FlowTrajectory {
    /// State of the piecewise constant interpolant at time `t`.
    pub fn state_at(&self, t: f64) -> &DVector<f64> {
        let k = (t / self.tau).ceil().max(0.0) as usize;
        &self.states[k.min(self.states.len() - 1)]
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial datum")
    }
}

/// Number of steps covering `[0, T]`.
pub fn step_count(tau: f64, t_final: f64) -> usize {
    ((t_final / tau) * (1.0 - 1e-12)).ceil() as usize
}

pub fn run_flow<S: FlowSpace + ?Sized>(
    space: &S,
    z0: &DVector<f64>,
    tau: f64,
    t_final: f64,
    settings: &NewtonSettings,
) -> Result<FlowTrajectory> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("time step must be positive, got {tau}")));
    }
    if !(t_final > 0.0 && t_final.is_finite()) || tau > t_final {
        return Err(Error::Config(format!(
            "final time must be positive and at least tau, got T = {t_final}, tau = {tau}"
        )));
    }
    let steps = step_count(tau, t_final);
    let phi0 = space.energy(z0)?;
    let slope0 = local_slope(space, z0)?;
    let mut traj = FlowTrajectory {
        tau,
        times: vec![0.0],
        states: vec![z0.clone()],
        ledger: vec![StepRecord {
            n: 0,
            t: 0.0,
            phi: phi0,
            d_increment: 0.0,
            metric_derivative: 0.0,
            slope: slope0,
            edb_partial: 0.0,
            step_decrease: 0.0,
            newton_iters: 0,
            newton_residual: 0.0,
        }],
    };
    let mut dissipated = 0.0;
    let mut phi_prev = phi0;
    for n in 1..=steps {
        let prev = traj.states.last().unwrap();
        let step = incremental_step(space, prev, tau, settings, None).map_err(|e| Error::Step {
            step: n,
            source: Box::new(e),
        })?;
        let slope = local_slope(space, &step.z).map_err(|e| Error::Step {
            step: n,
            source: Box::new(e),
        })?;
        let d = step.metric_sq.max(0.0).sqrt();
        let md = d / tau;
        dissipated += 0.5 * tau * md * md + 0.5 * tau * slope * slope;
        let t = n as f64 * tau;
        traj.ledger.push(StepRecord {
            n,
            t,
            phi: step.phi,
            d_increment: d,
            metric_derivative: md,
            slope,
            edb_partial: dissipated + step.phi - phi0,
            step_decrease: step.phi + step.metric_sq / (2.0 * tau) - phi_prev,
            newton_iters: step.iterations,
            newton_residual: step.residual,
        });
        phi_prev = step.phi;
        traj.times.push(t);
        traj.states.push(step.z);
    }
    Ok(traj)
}

/// Riesz slope `sqrt(grad^T G^{-1} grad)`.
pub fn local_slope<S: FlowSpace + ?Sized>(space: &S, z: &DVector<f64>) -> Result<f64> {
    let (_, g, _) = space.energy_derivatives(z)?;
    let metric = space.metric_tensor(z)?;
    dual_norm(&metric, &g)
}

/// Lower estimate of the slope from its supremum representation,
/// `sup (phi(z) - phi(w) - Phi2_M(D))^+ / Phi1(D)`, over random competitors
/// `w = z + rho v` with `v` unit in the metric at `z`.
pub fn sampled_slope<S: FlowSpace + ?Sized>(
    space: &S,
    z: &DVector<f64>,
    c: f64,
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = space.energy(z)?;
    let metric = space.metric_tensor(z)?;
    let (_, grad, _) = space.energy_derivatives(z)?;
    let chol = metric
        .clone()
        .cholesky()
        .ok_or_else(|| Error::MetricDegenerate("metric tensor failed Cholesky factorization".into()))?;
    let descent = -chol.solve(&grad);
    let mut best: f64 = 0.0;
    for k in 0..samples {
        let mut v = DVector::from_fn(z.len(), |_, _| rng.random_range(-1.0..1.0));
        let norm_g = |u: &DVector<f64>| u.dot(&(&metric * u)).sqrt();
        // bias half of the samples towards the descent direction
        if k % 2 == 0 && norm_g(&descent) > 0.0 {
            let spread = rng.random_range(0.0..0.2) * norm_g(&descent) / norm_g(&v).max(1e-300);
            v = &descent + v * spread;
        }
        let nv = norm_g(&v);
        if nv == 0.0 {
            continue;
        }
        let rho = 10f64.powf(rng.random_range(-6.0..-2.0));
        let w = z + v * (rho / nv);
        let d = space.metric_sq(z, &w)?.sqrt();
        if d == 0.0 {
            continue;
        }
        let phi1 = (d * d + c * d.powi(3) + c * d.powi(4)).sqrt();
        let phi2 = c * m.max(0.0).sqrt() * d * d + c * d.powi(3) + c * d.powi(4);
        let q = (phi - space.energy(&w)? - phi2).max(0.0) / phi1;
        best = best.max(q);
    }
    Ok(best)
}

/// `D(Z^{n-1}, Z^n) / tau` per step.
pub fn metric_derivative(traj: &FlowTrajectory) -> Vec<f64> {
    traj.ledger.iter().skip(1).map(|r| r.metric_derivative).collect()
}

/// Energy-dissipation deficit at the final time.
pub fn edb_deficit(traj: &FlowTrajectory) -> f64 {
    traj.ledger.last().map_or(0.0, |r| r.edb_partial)
}

/// The beam model as a flow space over its free coefficients.
#[derive(Clone, Debug)]
pub struct BeamFlowSpace {
    template: BeamState,
    form_w: BeamForm,
    form_r: BeamForm,
    force: ForceProfile,
}

impl BeamFlowSpace {
    pub fn new(template: &BeamState, forms: &QuadFormSet, force: ForceProfile) -> Result<Self> {
        template.validate()?;
        Ok(Self {
            template: template.clone(),
            form_w: (&forms.w).into(),
            form_r: (&forms.r).into(),
            force,
        })
    }

    pub fn coords(&self, state: &BeamState) -> Result<DVector<f64>> {
        self.template.compatible(state)?;
        Ok(state.free_coords())
    }

    pub fn state(&self, x: &DVector<f64>) -> Result<BeamState> {
        self.template.with_free(x)
    }

    pub fn states(&self, traj: &FlowTrajectory) -> Result<Vec<BeamState>> {
        traj.states.iter().map(|x| self.state(x)).collect()
    }

    fn full(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "coordinate vector has length {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.template.with_free(x)?.to_full())
    }

    fn restrict(&self, g: DVector<f64>, h: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let map = self.template.dofs();
        let n = map.n_free();
        (
            DVector::from_fn(n, |i, _| g[map.free[i]]),
            DMatrix::from_fn(n, n, |i, j| h[(map.free[i], map.free[j])]),
        )
    }
}

impl FlowSpace for BeamFlowSpace {
    fn dim(&self) -> usize {
        self.template.dofs().n_free()
    }

    fn energy(&self, x: &DVector<f64>) -> Result<f64> {
        let full = self.full(x)?;
        Ok(energy_full(&self.template, &full, &self.form_w, &self.force, 0).0)
    }

    fn energy_derivatives(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let full = self.full(x)?;
        let (v, g, h) = energy_full(&self.template, &full, &self.form_w, &self.force, 2);
        let (g, h) = self.restrict(g.unwrap(), h.unwrap());
        Ok((v, g, h))
    }

    fn metric_sq(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
        let (fa, fb) = (self.full(a)?, self.full(b)?);
        Ok(metric_sq_full(&self.template, &fa, &fb, &self.form_r, 0).0)
    }

    fn metric_sq_derivatives(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let (fa, fb) = (self.full(a)?, self.full(b)?);
        let (v, g, h) = metric_sq_full(&self.template, &fa, &fb, &self.form_r, 2);
        let (g, h) = self.restrict(g.unwrap(), h.unwrap());
        Ok((v, g, h))
    }

    fn metric_tensor(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let full = self.full(x)?;
        let g = metric_tensor_full(&self.template, &full, &self.form_r);
        let map = self.template.dofs();
        let n = map.n_free();
        Ok(DMatrix::from_fn(n, n, |i, j| g[(map.free[i], map.free[j])]))
    }
}
