//! Self-checks run by `viscobeam verify`. The quadratic-form oracles here
//! are written against the material laws only and do not call into the
//! reduction code they check.

use nalgebra::DVector;
use viscobeam::Matrix3;

type Matrix6 = nalgebra::Matrix6<f64>;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscobeam::beam1d::{assemble_energy, generalized_convexity_check};
use viscobeam::dimred::scaled_companion;
use viscobeam::flow::{edb_deficit, incremental_step, run_flow, BeamFlowSpace, FlowSpace};
use viscobeam::linalg::{random_matrix, random_near_rotation, random_rotation, random_skew};
use viscobeam::material::apply4;
use viscobeam::{Channel, MaterialModel, QuadFormSet};

use crate::config::RunConfig;
use crate::error::CliError;

pub const ORACLE_TOL: f64 = 1e-10;
pub const KERNEL_TOL: f64 = 1e-8;
pub const STEP_SLACK: f64 = 1e-12;
pub const RATIO_BAND: (f64, f64) = (0.4, 0.6);

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn push(&mut self, suite: &'static str, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            suite,
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("{tag} [{}] {}: {}\n", c.suite, c.name, c.detail));
        }
        s.push_str(&format!("{} checks, {} failed\n", self.checks.len(), self.failures()));
        s
    }
}

/// Sym basis in the order `11, 22, 33, 12, 13, 23`, off-diagonal entries
/// normalized to unit Frobenius norm.
pub fn oracle_basis(i: usize) -> Matrix3 {
    let mut a = Matrix3::zeros();
    match i {
        0..=2 => a[(i, i)] = 1.0,
        _ => {
            let (p, q) = [(0, 1), (0, 2), (1, 2)][i - 3];
            a[(p, q)] = std::f64::consts::FRAC_1_SQRT_2;
            a[(q, p)] = std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    a
}

/// Five-point second difference, exact for polynomials of degree 5.
pub fn second_derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
}

/// Matrix of `A -> d2/dt2 W(Id + tA)` (elastic channel) or
/// `A -> 1/2 d2/dt2 D^2(Id + tA, Id)` (viscous channel) in [`oracle_basis`],
/// by polarization. The laws are quartic in `F`, so the stencil is exact.
pub fn q3_oracle(model: &MaterialModel, channel: Channel) -> Result<Matrix6, CliError> {
    let id = Matrix3::identity();
    let h = 1e-2;
    let q = |a: Matrix3| -> Result<f64, CliError> {
        let vals: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&k| match channel {
                Channel::W => model.w(&(id + a * (k * h))),
                Channel::R => model.eval_d2(&(id + a * (k * h)), &id).map(|v| 0.5 * v),
            })
            .collect::<Result<_, _>>()?;
        Ok(second_derivative(|t| vals[((t / h).round() as i64 + 2) as usize], h))
    };
    let mut m = Matrix6::zeros();
    for i in 0..6 {
        m[(i, i)] = q(oracle_basis(i))?;
    }
    for i in 0..6 {
        for j in i + 1..6 {
            let v = 0.5 * (q(oracle_basis(i) + oracle_basis(j))? - m[(i, i)] - m[(j, j)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// `min c^T M c` over the coordinates not in `fixed`, by Gauss-Seidel
/// sweeps (exact coordinate minimization of a convex quadratic).
pub fn gauss_seidel_min(m: &Matrix6, fixed: &[(usize, f64)]) -> f64 {
    let mut c = [0.0; 6];
    for &(i, v) in fixed {
        c[i] = v;
    }
    let free: Vec<usize> = (0..6).filter(|i| fixed.iter().all(|f| f.0 != *i)).collect();
    let value = |c: &[f64; 6]| {
        let mut s = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                s += c[i] * m[(i, j)] * c[j];
            }
        }
        s
    };
    for _ in 0..100_000 {
        let mut change = 0.0_f64;
        for &i in &free {
            let off: f64 = (0..6).filter(|&j| j != i).map(|j| m[(i, j)] * c[j]).sum();
            let new = -off / m[(i, i)];
            change = change.max((new - c[i]).abs());
            c[i] = new;
        }
        if change < 1e-16 {
            break;
        }
    }
    value(&c)
}

/// Oracle values `(C0, C*)`: `C0 = min Q3` with `a11 = 1`, `C* = min Q3`
/// with `a11 = 0`, `a12 = 1`.
pub fn reduced_constants_oracle(m: &Matrix6) -> (f64, f64) {
    (
        gauss_seidel_min(m, &[(0, 1.0)]),
        gauss_seidel_min(m, &[(0, 0.0), (3, std::f64::consts::SQRT_2)]),
    )
}

/// Largest `|d2 D^2(F, F)[F^-T A, .]|` and smallest
/// `d2 D^2(F, F)[G, G] / |sym(F^T G)|^2` over random samples.
pub fn kernel_study(model: &MaterialModel, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64), CliError> {
    let (mut kernel, mut c) = (0.0_f64, f64::INFINITY);
    for _ in 0..samples {
        let f = random_near_rotation(rng, 0.1);
        let t = model.hess_d2_f1f1(&f)?;
        let a = random_skew(rng, 1.0);
        let g = f.try_inverse().expect("near-rotation is invertible").transpose() * a;
        kernel = kernel.max(apply4(&t, &g).norm());
        let gg = random_matrix(rng, 1.0);
        let s = f.transpose() * gg;
        let sym = (s + s.transpose()) * 0.5;
        let val = apply4(&t, &gg).component_mul(&gg).sum();
        c = c.min(val / sym.norm_squared());
    }
    Ok((kernel, c))
}

pub fn verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut rep = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = cfg.model_3d()?;
    material_suite(&model, &mut rng, &mut rep)?;
    let forms = QuadFormSet::from_model(&model)?;
    quadform_suite(&model, &forms, &mut rng, &mut rep)?;
    h_suite(&forms, &mut rep);
    beam_suites(cfg, &forms, &mut rng, &mut rep)?;
    edb_suite(cfg, &forms, &mut rep)?;
    Ok(rep)
}

fn material_suite(model: &MaterialModel, rng: &mut ChaCha8Rng, rep: &mut Report) -> Result<(), CliError> {
    const S: &str = "material";
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        worst = worst.max(model.w(&random_rotation(rng))?.abs());
    }
    rep.push(
        S,
        "W vanishes on rotations",
        worst <= 1e-13,
        format!("max |W(Q)| = {worst:.3e}"),
    );

    let (mut frame, mut grad) = (0.0_f64, 0.0_f64);
    let h = 1e-6;
    for _ in 0..50 {
        let f = random_near_rotation(rng, 0.1);
        let q = random_rotation(rng);
        let w = model.w(&f)?;
        frame = frame.max((model.w(&(q * f))? - w).abs() / w.max(1e-12));
        let dir = random_matrix(rng, 1.0);
        let an = model
            .eval_w(&f, 1)?
            .grad
            .expect("gradient requested")
            .component_mul(&dir)
            .sum();
        let fd = (model.w(&(f + dir * h))? - model.w(&(f - dir * h))?) / (2.0 * h);
        grad = grad.max((fd - an).abs() / an.abs().max(1e-3));
    }
    rep.push(
        S,
        "W is frame indifferent",
        frame <= 1e-10,
        format!("max rel. defect {frame:.3e}"),
    );
    rep.push(
        S,
        "W gradient matches finite differences",
        grad <= 1e-6,
        format!("max rel. error {grad:.3e}"),
    );

    let (mut symm, mut indiff) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let f1 = random_near_rotation(rng, 0.2);
        let f2 = random_near_rotation(rng, 0.2);
        let d = model.eval_d(&f1, &f2)?;
        symm = symm.max((d - model.eval_d(&f2, &f1)?).abs());
        let (q1, q2) = (random_rotation(rng), random_rotation(rng));
        indiff = indiff.max((d - model.eval_d(&(q1 * f1), &(q2 * f2))?).abs());
    }
    rep.push(S, "D is symmetric", symm <= 1e-13, format!("max defect {symm:.3e}"));
    rep.push(
        S,
        "D is frame indifferent in each slot",
        indiff <= 1e-12,
        format!("max defect {indiff:.3e}"),
    );

    let mut limit = 0.0_f64;
    let id = Matrix3::identity();
    for _ in 0..20 {
        let g = random_matrix(rng, 1.0);
        let g = (g + g.transpose()) * 0.5;
        let r = model.eval_r(&id, &g)?;
        let n = g.norm();
        for eps in [1e-3, 1e-4] {
            let lim = model.eval_d2(&(id + g * eps), &id)? / (2.0 * eps * eps);
            // quotient differs from R by eps G:G^2 terms
            let bound = 2.0 * eps * n.powi(3) + eps * eps * n.powi(4);
            limit = limit.max((lim - r).abs() / bound);
        }
    }
    rep.push(
        S,
        "R is the small-strain limit of D^2/2",
        limit <= 1.0,
        format!("max defect / bound = {limit:.3e}"),
    );

    let (kernel, c) = kernel_study(model, 100, rng)?;
    rep.push(
        S,
        "D^2 Hessian annihilates F^-T skew",
        kernel <= KERNEL_TOL,
        format!("max {kernel:.3e}"),
    );
    rep.push(
        S,
        "D^2 Hessian controls |sym(F^T G)|^2",
        c > 0.0,
        format!("fitted c = {c:.6}"),
    );
    Ok(())
}

fn quadform_suite(
    model: &MaterialModel,
    forms: &QuadFormSet,
    rng: &mut ChaCha8Rng,
    rep: &mut Report,
) -> Result<(), CliError> {
    const S: &str = "quadforms";
    for (channel, q3, red) in [(Channel::W, &forms.q3_w, &forms.w), (Channel::R, &forms.q3_r, &forms.r)] {
        let oracle = q3_oracle(model, channel)?;
        let scale = oracle.amax().max(1.0);
        let diff = (q3.matrix - oracle).amax() / scale;
        rep.push(
            S,
            format!("{channel:?}: Q3 matches the 5-point oracle"),
            diff <= ORACLE_TOL,
            format!("max rel. error {diff:.3e}"),
        );

        let (c0, cs) = reduced_constants_oracle(&oracle);
        let e0 = (red.c0 - c0).abs() / c0.abs().max(1.0);
        let es = (red.cstar - cs).abs() / cs.abs().max(1.0);
        rep.push(
            S,
            format!("{channel:?}: C0 and C* match the Gauss-Seidel oracle"),
            e0.max(es) <= ORACLE_TOL,
            format!(
                "C0 = {:.12} (oracle {c0:.12}), C* = {:.12} (oracle {cs:.12})",
                red.c0, red.cstar
            ),
        );

        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let (q11, q12): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let o = gauss_seidel_min(&oracle, &[(0, q11), (3, std::f64::consts::SQRT_2 * q12)]);
            worst = worst.max((red.q1_value(q11, q12) - o).abs() / scale);
        }
        rep.push(
            S,
            format!("{channel:?}: Q1 matches the oracle"),
            worst <= ORACLE_TOL,
            format!("max rel. error {worst:.3e}"),
        );
    }
    Ok(())
}

fn h_suite(forms: &QuadFormSet, rep: &mut Report) {
    for (label, red) in [("elastic", &forms.w), ("viscous", &forms.r)] {
        let detail = if red.holds_h() {
            format!("residual {:.3e}", red.h_residual)
        } else {
            format!(
                "hypothesis (H) fails for the {label} form: residual {:.3e} exceeds {:.0e}; \
                 the fixed entries couple to the free ones, so the beam model does not apply",
                red.h_residual,
                viscobeam::quadforms::H_TOLERANCE
            )
        };
        rep.push("hypothesis_h", format!("{label} form decouples"), red.holds_h(), detail);
    }
}

fn beam_suites(cfg: &RunConfig, forms: &QuadFormSet, rng: &mut ChaCha8Rng, rep: &mut Report) -> Result<(), CliError> {
    let z0 = cfg.initial_state()?;
    let force = cfg.force();
    let space = BeamFlowSpace::new(&z0, forms, force.clone())?;
    let x = space.coords(&z0)?;
    let h = 1e-6;
    let (mut ge, mut gm) = (0.0_f64, 0.0_f64);
    let anchor = &x * 0.5;
    for _ in 0..10 {
        let d = DVector::from_fn(x.len(), |_, _| rng.random_range(-1.0..1.0));
        let (_, g, _) = space.energy_derivatives(&x)?;
        let fd = (space.energy(&(&x + &d * h))? - space.energy(&(&x - &d * h))?) / (2.0 * h);
        ge = ge.max((fd - g.dot(&d)).abs() / g.dot(&d).abs().max(1e-3));
        let (_, g, _) = space.metric_sq_derivatives(&anchor, &x)?;
        let fd = (space.metric_sq(&anchor, &(&x + &d * h))? - space.metric_sq(&anchor, &(&x - &d * h))?) / (2.0 * h);
        gm = gm.max((fd - g.dot(&d)).abs() / g.dot(&d).abs().max(1e-3));
    }
    rep.push(
        "gradients",
        "energy gradient matches finite differences",
        ge <= 1e-6,
        format!("max rel. error {ge:.3e}"),
    );
    rep.push(
        "gradients",
        "metric gradient matches finite differences",
        gm <= 1e-6,
        format!("max rel. error {gm:.3e}"),
    );

    let b = scaled_companion(&z0, -0.5)?;
    let m = assemble_energy(&z0, &forms.w, &force)? + 1.0;
    let c = if z0.r == 0.0 { 1e-12 } else { 1e3 };
    let conv = generalized_convexity_check(&z0, &b, c, m, &forms.w, &forms.r, &force)?;
    rep.push(
        "convexity",
        format!("metric inequality, C = {c:.0e}"),
        conv.ok_metric,
        format!("worst lhs - rhs = {:.3e}", conv.worst_metric),
    );
    rep.push(
        "convexity",
        format!("energy inequality, C = {c:.0e}"),
        conv.ok_energy,
        format!("worst lhs - rhs = {:.3e}", conv.worst_energy),
    );
    Ok(())
}

fn edb_suite(cfg: &RunConfig, forms: &QuadFormSet, rep: &mut Report) -> Result<(), CliError> {
    const S: &str = "edb";
    let z0 = cfg.initial_state()?;
    let space = BeamFlowSpace::new(&z0, forms, cfg.force())?;
    let x0 = space.coords(&z0)?;
    let settings = cfg.newton();
    let taus = [cfg.flow.tau, cfg.flow.tau / 2.0, cfg.flow.tau / 4.0];
    let mut deficits = Vec::new();
    let mut slack = f64::NEG_INFINITY;
    for &tau in &taus {
        let traj = run_flow(&space, &x0, tau, cfg.flow.t_final, &settings)?;
        slack = traj.ledger.iter().map(|r| r.step_decrease).fold(slack, f64::max);
        deficits.push(edb_deficit(&traj).abs());
    }
    rep.push(
        S,
        "one-step decrease",
        slack <= STEP_SLACK,
        format!("max phi(Z^n) + D^2/(2 tau) - phi(Z^n-1) = {slack:.3e}"),
    );
    let listed = deficits
        .iter()
        .map(|d| format!("{d:.3e}"))
        .collect::<Vec<_>>()
        .join(", ");
    let decreasing = deficits.windows(2).all(|w| w[1] < w[0]);
    rep.push(
        S,
        "deficit decreases under tau-halving",
        decreasing,
        format!("|deficit| = [{listed}]"),
    );

    let linear = z0.r == 0.0;
    if linear {
        let ratios: Vec<f64> = deficits.windows(2).map(|w| w[1] / w[0]).collect();
        let ok = ratios.iter().all(|q| (RATIO_BAND.0..=RATIO_BAND.1).contains(q));
        rep.push(S, "deficit is first order in tau", ok, format!("ratios {ratios:.3?}"));
    }
    let homogeneous = cfg.force().is_zero() && cfg.boundary == Default::default();
    if linear && homogeneous {
        let tau = cfg.flow.tau;
        let step = incremental_step(&space, &x0, tau, &settings, None)?;
        let expected = &x0 / (1.0 + tau * forms.w.c0 / forms.r.c0);
        let err = (&step.z - expected).amax();
        rep.push(
            S,
            "linear step is the implicit Euler contraction",
            err <= ORACLE_TOL,
            format!("max error {err:.3e}"),
        );
    }
    Ok(())
}
