use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viscobeam::beam1d::*;
use viscobeam::quadrature::GaussRule;
use viscobeam::{MaterialModel, QuadFormSet};

fn forms() -> QuadFormSet {
    QuadFormSet::from_model(&MaterialModel::svk(1.0)).unwrap()
}

fn random_state(mesh: BeamMesh, r: f64, rng: &mut ChaCha8Rng, scale: f64) -> BeamState {
    let z = BeamState::zero(mesh, r, BoundaryData::default()).unwrap();
    let x = DVector::from_fn(z.dofs().n_free(), |_, _| rng.random_range(-scale..scale));
    z.with_free(&x).unwrap()
}

/// Reference integrals evaluated through state jets on an 8-point rule per
/// element, independent of the assembly kernels.
struct JetOracle<'a> {
    forms: &'a QuadFormSet,
    rule: GaussRule,
}

impl<'a> JetOracle<'a> {
    fn new(forms: &'a QuadFormSet) -> Self {
        Self {
            forms,
            rule: GaussRule::legendre(8),
        }
    }

    fn integrate(&self, mesh: &BeamMesh, f: impl Fn(usize, f64) -> f64) -> f64 {
        (0..mesh.n_elems)
            .map(|e| {
                self.rule
                    .on_interval(mesh.node(e), mesh.node(e + 1))
                    .integrate(|x| f(e, x))
            })
            .sum()
    }

    fn energy(&self, s: &BeamState, f: &ForceProfile) -> f64 {
        let (c0, q) = (self.forms.w.c0, self.forms.w.q1);
        self.integrate(&s.mesh, |e, x| {
            let j = s.jet_in_element(e, x);
            let m = j.xi1[1] + 0.5 * s.r * j.xi3[1] * j.xi3[1];
            let (a, b) = (j.xi3[2], j.theta[1]);
            0.5 * c0 * m * m
                + (c0 * j.xi2[2] * j.xi2[2] + q[(0, 0)] * a * a + 2.0 * q[(0, 1)] * a * b + q[(1, 1)] * b * b) / 24.0
                - f.eval(x) * j.xi3[0]
        })
    }

    /// `Dphi0(s)[v]` for a direction given as a state with zero traces.
    fn energy_derivative(&self, s: &BeamState, v: &BeamState, f: &ForceProfile) -> f64 {
        let (c0, q) = (self.forms.w.c0, self.forms.w.q1);
        self.integrate(&s.mesh, |e, x| {
            let j = s.jet_in_element(e, x);
            let w = v.jet_in_element(e, x);
            let m = j.xi1[1] + 0.5 * s.r * j.xi3[1] * j.xi3[1];
            let dm = w.xi1[1] + s.r * j.xi3[1] * w.xi3[1];
            c0 * m * dm
                + (c0 * j.xi2[2] * w.xi2[2]
                    + q[(0, 0)] * j.xi3[2] * w.xi3[2]
                    + q[(0, 1)] * (j.xi3[2] * w.theta[1] + j.theta[1] * w.xi3[2])
                    + q[(1, 1)] * j.theta[1] * w.theta[1])
                    / 12.0
                - f.eval(x) * w.xi3[0]
        })
    }

    fn metric(&self, s: &BeamState, v: &BeamState, w: &BeamState) -> f64 {
        let (c0, q) = (self.forms.r.c0, self.forms.r.q1);
        self.integrate(&s.mesh, |e, x| {
            let j = s.jet_in_element(e, x);
            let a = v.jet_in_element(e, x);
            let b = w.jet_in_element(e, x);
            let ma = a.xi1[1] + s.r * j.xi3[1] * a.xi3[1];
            let mb = b.xi1[1] + s.r * j.xi3[1] * b.xi3[1];
            c0 * ma * mb
                + (c0 * a.xi2[2] * b.xi2[2]
                    + q[(0, 0)] * a.xi3[2] * b.xi3[2]
                    + q[(0, 1)] * (a.xi3[2] * b.theta[1] + a.theta[1] * b.xi3[2])
                    + q[(1, 1)] * a.theta[1] * b.theta[1])
                    / 12.0
        })
    }
}

fn unit_direction(template: &BeamState, i: usize) -> BeamState {
    let zero = BeamState::zero(template.mesh, template.r, BoundaryData::default()).unwrap();
    let mut x = DVector::zeros(zero.dofs().n_free());
    x[i] = 1.0;
    zero.with_free(&x).unwrap()
}

#[test]
fn zero_state_has_zero_energy() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let s = BeamState::zero(mesh, 1.0, BoundaryData::default()).unwrap();
    assert_eq!(assemble_energy(&s, &forms().w, &ForceProfile::zero()).unwrap(), 0.0);
}

#[test]
fn pure_membrane_energy() {
    // xi1 affine with slope 0.1 on (-1/2, 1/2): 1/2 * l * C0_W * s^2 = 0.01
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let s = BeamState::interpolate(mesh, 0.0, |x| 0.1 * x, |_| (0.0, 0.0), |_| (0.0, 0.0), |_| 0.0).unwrap();
    let phi = assemble_energy(&s, &forms().w, &ForceProfile::zero()).unwrap();
    assert!((phi - 0.01).abs() < 1e-15);
}

#[test]
fn pure_twist_energy() {
    // hat twist with |theta'| = 1, so int theta'^2 = l = 1 and phi0 = Cstar_W / 24
    let l = 1.0;
    let mesh = BeamMesh::new(l, 8).unwrap();
    let slope = 1.0; // |theta'| = 1 on all of I
    let s = BeamState::interpolate(
        mesh,
        1.0,
        |_| 0.0,
        |_| (0.0, 0.0),
        |_| (0.0, 0.0),
        |x| slope * (0.5 * l - x.abs()),
    )
    .unwrap();
    let phi = assemble_energy(&s, &forms().w, &ForceProfile::zero()).unwrap();
    assert!((phi - 4.0 / 24.0).abs() < 1e-14, "{phi}");
}

#[test]
fn quadrature_is_exact_for_cubic_states() {
    // xi1' = 0.3, xi2 = x^3, xi3 = x^3 / 3 so xi3' = x^2, xi3'' = 2x, r = 1
    let mesh = BeamMesh::new(1.0, 5).unwrap();
    let s = BeamState::interpolate(
        mesh,
        1.0,
        |x| 0.3 * x,
        |x| (x * x * x, 3.0 * x * x),
        |x| (x * x * x / 3.0, x * x),
        |_| 0.0,
    )
    .unwrap();
    let phi = assemble_energy(&s, &forms().w, &ForceProfile::polynomial(vec![1.0, 2.0]).unwrap()).unwrap();
    // 1/2 int 2 (0.3 + x^4/2)^2 + 1/24 int (2 (6x)^2 + 2 (2x)^2) - int (1 + 2x) x^3/3
    // over (-1/2, 1/2): int x^2 = 1/12, int x^4 = 1/80, int x^8 = 1/2304
    let membrane = 0.09 + 0.3 / 80.0 + 0.25 / 2304.0;
    let bending = (72.0 + 8.0) / 12.0 / 24.0;
    let force = 2.0 / 3.0 / 80.0;
    let exact = membrane + bending - force;
    assert!((phi - exact).abs() < 1e-12 * exact.abs(), "{phi} vs {exact}");
}

#[test]
fn metric_of_bending_bump() {
    // r = 0, dxi2 Hermite bump with int (dxi2'')^2 = 1: D0^2 = C0_R / 12
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let a = BeamState::zero(mesh, 0.0, BoundaryData::default()).unwrap();
    let mut b = a.clone();
    b.xi2[2 * 4] = 1.0;
    let f = forms();
    let oracle = JetOracle::new(&f);
    let norm = oracle.integrate(&mesh, |e, x| b.jet_in_element(e, x).xi2[2].powi(2));
    for v in b.xi2.iter_mut() {
        *v /= norm.sqrt();
    }
    let d2 = assemble_metric_sq(&a, &b, &forms().r).unwrap();
    assert!((d2 - 1.0 / 3.0).abs() < 1e-13, "{d2}");
    assert_eq!(assemble_metric_sq(&a, &a, &forms().r).unwrap(), 0.0);
}

#[test]
fn metric_is_symmetric_and_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let f = forms();
    for &r in &[0.0, 0.5, 1.0] {
        for _ in 0..50 {
            let a = random_state(mesh, r, &mut rng, 0.3);
            let b = random_state(mesh, r, &mut rng, 0.3);
            let ab = assemble_metric_sq(&a, &b, &f.r).unwrap();
            let ba = assemble_metric_sq(&b, &a, &f.r).unwrap();
            assert!(ab > 0.0);
            assert!((ab - ba).abs() <= 1e-14 * ab);
        }
    }
}

#[test]
fn metric_triangle_inequality_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    for _ in 0..100 {
        let a = random_state(mesh, 1.0, &mut rng, 0.5);
        let b = random_state(mesh, 1.0, &mut rng, 0.5);
        let c = random_state(mesh, 1.0, &mut rng, 0.5);
        let d = |x: &BeamState, y: &BeamState| assemble_metric_sq(x, y, &f.r).unwrap().sqrt();
        assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }
}

#[test]
fn energy_gradient_matches_finite_differences_and_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    let force = ForceProfile::polynomial(vec![0.5, -1.0, 0.25]).unwrap();
    let oracle = JetOracle::new(&f);
    let s = random_state(mesh, 1.0, &mut rng, 0.3);
    let (g, h) = energy_gradient_hessian(&s, &f.w, &force).unwrap();
    assert!((&h - h.transpose()).amax() < 1e-10 * h.amax());
    let x = s.free_coords();
    for _ in 0..10 {
        let dir = DVector::from_fn(x.len(), |_, _| rng.random_range(-1.0..1.0));
        let eps = 1e-6;
        let plus = assemble_energy(&s.with_free(&(&x + &dir * eps)).unwrap(), &f.w, &force).unwrap();
        let minus = assemble_energy(&s.with_free(&(&x - &dir * eps)).unwrap(), &f.w, &force).unwrap();
        let fd = (plus - minus) / (2.0 * eps);
        let an = g.dot(&dir);
        assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "{fd} vs {an}");
    }
    for i in 0..x.len() {
        let v = unit_direction(&s, i);
        let exact = oracle.energy_derivative(&s, &v, &force);
        assert!((g[i] - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
    }
    let e = oracle.energy(&s, &force);
    let phi = assemble_energy(&s, &f.w, &force).unwrap();
    assert!((phi - e).abs() <= 1e-13 * (1.0 + e.abs()));
}

#[test]
fn gradient_vanishes_at_the_unforced_minimizer() {
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let s = BeamState::zero(mesh, 1.0, BoundaryData::default()).unwrap();
    let (g, _) = energy_gradient_hessian(&s, &forms().w, &ForceProfile::zero()).unwrap();
    assert_eq!(g.amax(), 0.0);
}

#[test]
fn linear_regime_hessian_is_state_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    let a = random_state(mesh, 0.0, &mut rng, 1.0);
    let b = random_state(mesh, 0.0, &mut rng, 1.0);
    let (_, ha) = energy_gradient_hessian(&a, &f.w, &ForceProfile::zero()).unwrap();
    let (_, hb) = energy_gradient_hessian(&b, &f.w, &ForceProfile::zero()).unwrap();
    assert!((ha - hb).amax() < 1e-12);
    let ga = metric_tensor_at(&a, &f.r).unwrap();
    let gb = metric_tensor_at(&b, &f.r).unwrap();
    assert!((ga - gb).amax() < 1e-12);
}

#[test]
fn metric_tensor_matches_second_order_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    let oracle = JetOracle::new(&f);
    // r = 1 at a state with constant xi3' = gamma: slope data at both ends
    let gamma = 0.4;
    let s = BeamState::interpolate(mesh, 1.0, |_| 0.0, |_| (0.0, 0.0), |x| (gamma * x, gamma), |_| 0.0).unwrap();
    let g = metric_tensor_at(&s, &f.r).unwrap();
    let x = s.free_coords();
    for _ in 0..20 {
        let w = DVector::from_fn(x.len(), |_, _| rng.random_range(-1.0..1.0));
        let gw = w.dot(&(&g * &w));
        assert!(gw > 0.0);
        // finite-eps limit of D0^2(s, s + eps w) / eps^2
        let eps = 1e-4;
        let d2 = assemble_metric_sq(&s, &s.with_free(&(&x + &w * eps)).unwrap(), &f.r).unwrap();
        assert!(
            (d2 / (eps * eps) - gw).abs() <= 1e-5 * gw,
            "{} vs {gw}",
            d2 / (eps * eps)
        );
    }
    // dense oracle entry by entry
    let n = x.len();
    let dirs: Vec<BeamState> = (0..n).map(|i| unit_direction(&s, i)).collect();
    let dense = DMatrix::from_fn(n, n, |i, j| oracle.metric(&s, &dirs[i], &dirs[j]));
    assert!((&g - dense).amax() <= 1e-12 * g.amax());
}

#[test]
fn weak_residual_matches_dense_reassembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    let oracle = JetOracle::new(&f);
    let force = ForceProfile::polynomial(vec![0.3]).unwrap();
    for _ in 0..5 {
        let s = random_state(mesh, 1.0, &mut rng, 0.2);
        let n = s.dofs().n_free();
        let vel = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let got = weak_residual(&s, &vel, &f.w, &f.r, &force).unwrap();
        let dirs: Vec<BeamState> = (0..n).map(|i| unit_direction(&s, i)).collect();
        let g = DMatrix::from_fn(n, n, |i, j| oracle.metric(&s, &dirs[i], &dirs[j]));
        let grad = DVector::from_fn(n, |i, _| oracle.energy_derivative(&s, &dirs[i], &force));
        let res = &g * &vel + grad;
        let p = g.clone().lu().solve(&res).unwrap();
        let want = res.dot(&p).sqrt();
        assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
    }
    let zero = BeamState::zero(mesh, 1.0, BoundaryData::default()).unwrap();
    let n = zero.dofs().n_free();
    let r0 = weak_residual(&zero, &DVector::zeros(n), &f.w, &f.r, &ForceProfile::zero()).unwrap();
    assert_eq!(r0, 0.0);
}

#[test]
fn energy_converges_at_fourth_order_under_refinement() {
    let f = forms();
    let bend = |x: f64| ((PI * x).cos().powi(2) * 0.1, -0.1 * PI * (2.0 * PI * x).sin());
    let phi = |n: usize| {
        let mesh = BeamMesh::new(1.0, n).unwrap();
        let s = BeamState::interpolate(mesh, 0.0, |_| 0.0, bend, |_| (0.0, 0.0), |_| 0.0).unwrap();
        assemble_energy(&s, &f.w, &ForceProfile::zero()).unwrap()
    };
    // xi2'' = -0.2 pi^2 cos(2 pi x): 1/24 * 2 * 0.02 pi^4 = pi^4 / 600
    let exact = PI.powi(4) / 600.0;
    let errs: Vec<f64> = [8, 16, 32].iter().map(|&n| (phi(n) - exact).abs()).collect();
    // interpolation error in xi2'' is O(h^2); energy error O(h^4) for the Hermite interpolant
    let rate1 = (errs[0] / errs[1]).log2();
    let rate2 = (errs[1] / errs[2]).log2();
    assert!(rate1 > 3.5 && rate2 > 3.5, "rates {rate1} {rate2}");
}

#[test]
fn convexity_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mesh = BeamMesh::new(1.0, 6).unwrap();
    let f = forms();
    let force = ForceProfile::zero();
    let a = random_state(mesh, 0.0, &mut rng, 0.3);
    let b = random_state(mesh, 0.0, &mut rng, 0.3);
    let m = assemble_energy(&a, &f.w, &force).unwrap() + 1.0;
    let rep = generalized_convexity_check(&a, &b, 1e-12, m, &f.w, &f.r, &force).unwrap();
    assert!(rep.ok_metric && rep.ok_energy);
    let rep = generalized_convexity_check(&a, &a, 1.0, m, &f.w, &f.r, &force).unwrap();
    assert!(rep.ok_metric && rep.ok_energy);
    for _ in 0..10 {
        let a = random_state(mesh, 1.0, &mut rng, 0.3);
        let b = random_state(mesh, 1.0, &mut rng, 0.3);
        let m = assemble_energy(&a, &f.w, &force).unwrap() + 1.0;
        let rep = generalized_convexity_check(&a, &b, 1e3, m, &f.w, &f.r, &force).unwrap();
        assert!(rep.ok_metric && rep.ok_energy, "{rep:?}");
    }
}

#[test]
fn csv_export_has_requested_rows() {
    let mesh = BeamMesh::new(1.0, 8).unwrap();
    let s = BeamState::smooth_datum(mesh, 1.0, 0.1).unwrap();
    let csv = s.sample_csv(11);
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.starts_with("x1,xi1,xi2,xi3,theta\n"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn operations_leave_traces_untouched(seed in any::<u64>(), r in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = BeamMesh::new(1.0, 5).unwrap();
        let b = BoundaryData {
            xi1: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            xi2: [rng.random_range(-1.0..1.0), 0.0],
            xi2_slope: [0.0, rng.random_range(-1.0..1.0)],
            xi3: [0.1, -0.1],
            xi3_slope: [rng.random_range(-1.0..1.0), 0.2],
        };
        let z = BeamState::zero(mesh, r, b).unwrap();
        let x = DVector::from_fn(z.dofs().n_free(), |_, _| rng.random_range(-1.0..1.0));
        let s = z.with_free(&x).unwrap();
        let t = s.lerp(&z, 0.3).unwrap();
        prop_assert!(t.validate().is_ok());
        prop_assert_eq!(t.boundary, b);
        prop_assert_eq!(t.xi1[0].to_bits(), b.xi1[0].to_bits());
        prop_assert_eq!(t.xi3[1].to_bits(), b.xi3_slope[0].to_bits());
        prop_assert_eq!(t.theta[mesh.n_elems], 0.0);
    }

    #[test]
    fn metric_positivity(seed in any::<u64>(), r in prop::sample::select(vec![0.0, 0.5, 1.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mesh = BeamMesh::new(1.0, 5).unwrap();
        let f = forms();
        let a = random_state(mesh, r, &mut rng, 0.5);
        let b = random_state(mesh, r, &mut rng, 0.5);
        prop_assert!(assemble_metric_sq(&a, &b, &f.r).unwrap() > 0.0);
        prop_assert_eq!(assemble_metric_sq(&a, &a, &f.r).unwrap(), 0.0);
    }
}
