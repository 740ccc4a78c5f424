use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscobeam::beam1d::*;
use viscobeam::flow::*;
use viscobeam::{MaterialModel, QuadFormSet};

fn forms() -> QuadFormSet {
    QuadFormSet::from_model(&MaterialModel::svk(1.0)).unwrap()
}

fn space(mesh: BeamMesh, r: f64) -> (BeamFlowSpace, BeamState) {
    let z0 = BeamState::smooth_datum(mesh, r, 0.1).unwrap();
    (BeamFlowSpace::new(&z0, &forms(), ForceProfile::zero()).unwrap(), z0)
}

#[test]
fn linear_step_contracts_every_mode_by_the_same_factor() {
    let f = forms();
    let ratio = f.w.c0 / f.r.c0;
    let mesh = BeamMesh::new(1.0, 16).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x0 = sp.coords(&z0).unwrap();
    let tau = 0.05;
    let step = incremental_step(&sp, &x0, tau, &NewtonSettings::default(), None).unwrap();
    let expected = &x0 / (1.0 + tau * ratio);
    assert!((&step.z - expected).amax() < 1e-10);
}

#[test]
fn linear_step_is_unique_from_any_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x0 = sp.coords(&z0).unwrap();
    let a = incremental_step(&sp, &x0, 0.1, &NewtonSettings::default(), None).unwrap();
    let init = DVector::from_fn(x0.len(), |_, _| rng.random_range(-1.0..1.0));
    let b = incremental_step(&sp, &x0, 0.1, &NewtonSettings::default(), Some(&init)).unwrap();
    let d = sp.metric_sq(&a.z, &b.z).unwrap().sqrt();
    assert!(d < 1e-10, "{d}");
}

#[test]
fn minimizer_is_a_fixed_point() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let z = BeamState::zero(mesh, 1.0, BoundaryData::default()).unwrap();
    let sp = BeamFlowSpace::new(&z, &forms(), ForceProfile::zero()).unwrap();
    let x = sp.coords(&z).unwrap();
    let traj = run_flow(&sp, &x, 0.1, 0.5, &NewtonSettings::default()).unwrap();
    assert!(traj.states.iter().all(|s| s == &x));
    assert_eq!(edb_deficit(&traj), 0.0);
    assert_eq!(local_slope(&sp, &x).unwrap(), 0.0);
}

#[test]
fn nonlinear_steps_decrease_energy_from_random_starts() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let z = BeamState::zero(mesh, 1.0, BoundaryData::default()).unwrap();
    let sp = BeamFlowSpace::new(&z, &forms(), ForceProfile::zero()).unwrap();
    for _ in 0..100 {
        let x = DVector::from_fn(sp.dim(), |_, _| rng.random_range(-0.3..0.3));
        let phi = sp.energy(&x).unwrap();
        let step = incremental_step(&sp, &x, 0.05, &NewtonSettings::default(), None).unwrap();
        assert!(step.phi + step.metric_sq / 0.1 <= phi + 1e-12 * (1.0 + phi));
    }
}

#[test]
fn terminal_error_is_first_order_in_tau() {
    let f = forms();
    let ratio = f.w.c0 / f.r.c0;
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x0 = sp.coords(&z0).unwrap();
    let exact = &x0 * (-ratio).exp();
    let err = |tau: f64| {
        let traj = run_flow(&sp, &x0, tau, 1.0, &NewtonSettings::default()).unwrap();
        sp.metric_sq(traj.final_state(), &exact).unwrap().sqrt()
    };
    let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&t| err(t)).collect();
    for w in e.windows(2) {
        let q = w[1] / w[0];
        assert!((0.4..=0.6).contains(&q), "{e:?}");
    }
}

#[test]
fn metric_derivative_matches_exponential_speed() {
    let f = forms();
    let ratio = f.w.c0 / f.r.c0;
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x0 = sp.coords(&z0).unwrap();
    let g = sp.metric_tensor(&x0).unwrap();
    let norm0 = x0.dot(&(&g * &x0)).sqrt();
    let tau = 1e-3;
    let traj = run_flow(&sp, &x0, tau, 0.1, &NewtonSettings::default()).unwrap();
    for (n, md) in metric_derivative(&traj).iter().enumerate() {
        let t = (n as f64 + 0.5) * tau;
        let speed = ratio * norm0 * (-ratio * t).exp();
        assert!((md - speed).abs() <= 2.0 * tau * speed);
    }
}

#[test]
fn linear_slope_matches_proportional_operators() {
    let f = forms();
    let ratio = f.w.c0 / f.r.c0;
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x = sp.coords(&z0).unwrap();
    // A = ratio G, so slope^2 = ratio^2 x^T G x = 2 ratio phi
    let slope = local_slope(&sp, &x).unwrap();
    let phi = sp.energy(&x).unwrap();
    assert!((slope * slope - 2.0 * ratio * phi).abs() <= 1e-12 * phi);
}

#[test]
fn sampled_slope_is_a_lower_bound() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    for r in [0.0, 1.0] {
        let (sp, z0) = space(mesh, r);
        let x = sp.coords(&z0).unwrap();
        let riesz = local_slope(&sp, &x).unwrap();
        let phi = sp.energy(&x).unwrap();
        let sampled = sampled_slope(&sp, &x, 10.0, phi + 1.0, 200, 7).unwrap();
        assert!(sampled <= riesz + 1e-3, "{sampled} vs {riesz}");
        assert!(sampled > 0.5 * riesz, "{sampled} vs {riesz}");
    }
}

#[test]
fn edb_deficit_shrinks_under_refinement() {
    let mesh = BeamMesh::new(1.0, 16).unwrap();
    for r in [0.0, 1.0] {
        let (sp, z0) = space(mesh, r);
        let x0 = sp.coords(&z0).unwrap();
        let deficits: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&tau| {
                let traj = run_flow(&sp, &x0, tau, 0.5, &NewtonSettings::default()).unwrap();
                for rec in &traj.ledger {
                    assert!(rec.step_decrease <= 1e-12, "{rec:?}");
                }
                edb_deficit(&traj).abs()
            })
            .collect();
        assert!(deficits.windows(2).all(|w| w[1] < w[0]), "r = {r}: {deficits:?}");
        if r == 0.0 {
            for w in deficits.windows(2) {
                assert!((0.4..=0.6).contains(&(w[1] / w[0])), "{deficits:?}");
            }
        }
    }
}

#[test]
fn weak_residual_of_discrete_velocity_is_small() {
    let f = forms();
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 1.0);
    let x0 = sp.coords(&z0).unwrap();
    let mut worst = Vec::new();
    for tau in [1e-2, 5e-3] {
        let traj = run_flow(&sp, &x0, tau, 0.1, &NewtonSettings::default()).unwrap();
        let mut w: f64 = 0.0;
        for k in 1..traj.states.len() {
            let vel = (&traj.states[k] - &traj.states[k - 1]) / tau;
            let s = sp.state(&traj.states[k]).unwrap();
            let res = weak_residual(&s, &vel, &f.w, &f.r, &ForceProfile::zero()).unwrap();
            w = w.max(res);
        }
        worst.push(w);
    }
    // the metric is evaluated at Z^{n-1} in the step and at Z^n here
    assert!(worst[1] < worst[0], "{worst:?}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 0.0);
    let x0 = sp.coords(&z0).unwrap();
    let s = NewtonSettings::default();
    assert!(incremental_step(&sp, &x0, -1.0, &s, None).unwrap_err().is_config());
    assert!(run_flow(&sp, &x0, 0.5, 0.1, &s).unwrap_err().is_config());
}

#[test]
fn nonconvergence_reports_best_iterate() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let (sp, z0) = space(mesh, 1.0);
    let x0 = sp.coords(&z0).unwrap();
    let s = NewtonSettings {
        tol: 1e-30,
        max_iter: 2,
    };
    match incremental_step(&sp, &x0, 0.1, &s, None) {
        Err(viscobeam::Error::NonConvergence { best, residual, .. }) => {
            assert_eq!(best.len(), x0.len());
            assert!(residual.is_finite());
        }
        other => panic!("expected nonconvergence, got {other:?}"),
    }
}
