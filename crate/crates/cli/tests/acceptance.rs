//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viscobeam::beam1d::{BeamMesh, BeamState, ForceProfile};
use viscobeam::dimred::{gamma_table, scaled_companion, GammaOptions, GammaTable};
use viscobeam::flow::{edb_deficit, incremental_step, run_flow, BeamFlowSpace, FlowSpace, NewtonSettings};
use viscobeam::{Channel, ElasticLaw, MaterialModel, PowerPenalty, QuadFormSet};
use viscobeam_cli::verify::{kernel_study, q3_oracle, reduced_constants_oracle};

// tolerances
const ORACLE: f64 = 1e-10;
const H_RESIDUAL: f64 = 1e-10;
const KERNEL: f64 = 1e-8;
const CONTRACTION: f64 = 1e-10;
const HALVING: (f64, f64) = (0.4, 0.6);
const STEP_SLACK: f64 = 1e-12;
/// Largest allowed max/min of `penalty_term / envelope` over the h-list.
const ENVELOPE_SPREAD: f64 = 2.0;
/// Extraction errors below this multiple of the field norm count as zero.
const ROUNDOFF_FLOOR: f64 = 1e-12;
const FINAL_FRACTION: f64 = 0.1;

// runtime budgets in seconds
const BUDGET_QUADFORMS: f64 = 1.0;
const BUDGET_KERNEL: f64 = 5.0;
const BUDGET_LINEAR: f64 = 10.0;
const BUDGET_EDB: f64 = 60.0;
const BUDGET_GAMMA: f64 = 120.0;

const H_LIST: [f64; 3] = [0.2, 0.1, 0.05];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed(budget: f64, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let secs = start.elapsed().as_secs_f64();
    o.detail.push_str(&format!("; {secs:.2} s (budget {budget} s)"));
    o.passed &= secs < budget;
    o
}

fn nonincreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", s.join(", "))
}

fn svk() -> MaterialModel {
    MaterialModel::svk(1.0)
}

fn criterion_quadforms() -> Outcome {
    let pen = PowerPenalty { c1: 1.0, p: 4.0 };
    let model = svk();
    let forms = QuadFormSet::from_model(&model).expect("svk forms");
    let mut ok = true;
    let mut worst = 0.0_f64;
    for (channel, red, expected) in [(Channel::W, &forms.w, (2.0, 4.0)), (Channel::R, &forms.r, (4.0, 8.0))] {
        let (c0, cs) = reduced_constants_oracle(&q3_oracle(&model, channel).expect("oracle"));
        for (got, oracle, exact) in [(red.c0, c0, expected.0), (red.cstar, cs, expected.1)] {
            let e = (got - oracle).abs().max((got - exact).abs());
            worst = worst.max(e);
            ok &= e <= ORACLE;
        }
    }
    let ortho = MaterialModel::new(
        ElasticLaw::Orthotropic {
            lambda2: 1.0,
            lambda3: 1.0,
            mu: 1.0,
        },
        pen,
    )
    .expect("orthotropic model");
    let fo = QuadFormSet::from_model(&ortho).expect("orthotropic forms");
    let ortho_res = fo.w.h_residual.max(fo.r.h_residual);
    ok &= ortho_res <= H_RESIDUAL;
    let iso = MaterialModel::new(ElasticLaw::Isotropic { lambda: 1.0, mu: 1.0 }, pen).expect("isotropic model");
    let fi = QuadFormSet::from_model(&iso).expect("isotropic forms");
    ok &= !fi.w.holds_h();
    outcome(
        ok,
        format!(
            "svk (C0_W, C*_W, C0_R, C*_R) = ({:.12}, {:.12}, {:.12}, {:.12}), max error {worst:.2e}; \
             orthotropic H residual {ortho_res:.2e}; isotropic H holds = {} (residual {:.3e})",
            forms.w.c0,
            forms.w.cstar,
            forms.r.c0,
            forms.r.cstar,
            fi.w.holds_h(),
            fi.w.h_residual
        ),
    )
}

fn criterion_kernel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (kernel, c) = kernel_study(&svk(), 100, &mut rng).expect("kernel study");
    outcome(
        kernel <= KERNEL && c > 0.0,
        format!("max |d2 D^2[F^-T A, .]| = {kernel:.2e}, fitted c = {c:.6}"),
    )
}

fn datum_space(n_elems: usize, r: f64, amplitude: f64) -> (BeamFlowSpace, BeamState) {
    let mesh = BeamMesh::new(1.0, n_elems).expect("mesh");
    let z0 = BeamState::smooth_datum(mesh, r, amplitude).expect("datum");
    let forms = QuadFormSet::from_model(&svk()).expect("forms");
    (
        BeamFlowSpace::new(&z0, &forms, ForceProfile::zero()).expect("space"),
        z0,
    )
}

fn criterion_linear() -> Outcome {
    let forms = QuadFormSet::from_model(&svk()).expect("forms");
    let rate = forms.w.c0 / forms.r.c0;
    let (sp, z0) = datum_space(32, 0.0, 0.1);
    let x0 = sp.coords(&z0).expect("coords");
    let settings = NewtonSettings::default();
    let mut contraction = 0.0_f64;
    for tau in [1e-2, 5e-3, 2.5e-3] {
        let step = incremental_step(&sp, &x0, tau, &settings, None).expect("step");
        let expected = &x0 / (1.0 + tau * rate);
        contraction = contraction.max((&step.z - expected).amax() / x0.amax());
    }
    let exact = &x0 * (-rate).exp();
    let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&tau| {
            let traj = run_flow(&sp, &x0, tau, 1.0, &settings).expect("flow");
            sp.metric_sq(traj.final_state(), &exact).expect("metric").sqrt()
        })
        .collect();
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = contraction <= CONTRACTION && ratios.iter().all(|q| (HALVING.0..=HALVING.1).contains(q));
    outcome(
        ok,
        format!(
            "contraction error {contraction:.2e}; terminal errors {} ratios {}",
            fmt(&errs),
            fmt(&ratios)
        ),
    )
}

fn criterion_edb() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [0.0, 1.0] {
        let (sp, z0) = datum_space(16, r, 0.1);
        let x0 = sp.coords(&z0).expect("coords");
        let mut deficits = Vec::new();
        let mut slack = f64::NEG_INFINITY;
        for tau in [1e-2, 5e-3, 2.5e-3] {
            let traj = run_flow(&sp, &x0, tau, 0.5, &NewtonSettings::default()).expect("flow");
            slack = traj.ledger.iter().map(|s| s.step_decrease).fold(slack, f64::max);
            deficits.push(edb_deficit(&traj).abs());
        }
        let decreasing = deficits.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing && slack <= STEP_SLACK;
        parts.push(format!(
            "r = {r}: |deficit| {} max step excess {slack:.2e}",
            fmt(&deficits)
        ));
    }
    outcome(ok, parts.join("; "))
}

fn gamma_run() -> GammaTable {
    let (_, u) = datum_space(16, 1.0, 0.5);
    let companion = scaled_companion(&u, 0.5).expect("companion");
    gamma_table(
        &u,
        &companion,
        &svk(),
        &ForceProfile::zero(),
        &H_LIST,
        &GammaOptions::default(),
    )
    .expect("gamma table")
}

fn criterion_energy(t: &GammaTable) -> Outcome {
    let e: Vec<f64> = t.rows.iter().map(|r| r.err_energy).collect();
    let (lo, hi) = t.penalty_fit();
    let ok = nonincreasing(&e) && e[2] < 0.5 * e[0] && hi / lo <= ENVELOPE_SPREAD;
    outcome(
        ok,
        format!(
            "|phi_h - phi0| = {}; penalty / envelope in [{lo:.4e}, {hi:.4e}], fitted C = {hi:.4e}",
            fmt(&e)
        ),
    )
}

fn criterion_metric(t: &GammaTable) -> Outcome {
    let e: Vec<f64> = t.rows.iter().map(|r| r.err_metric).collect();
    outcome(nonincreasing(&e), format!("|D_h - D0| = {}", fmt(&e)))
}

fn criterion_strain(t: &GammaTable) -> Outcome {
    let g11: Vec<f64> = t.rows.iter().map(|r| r.err_moments_g11).collect();
    let g12: Vec<f64> = t.rows.iter().map(|r| r.err_moments_g12).collect();
    let ok = g11[2] < 0.5 * g11[0] && g12[2] < 0.5 * g12[0];
    outcome(
        ok,
        format!("G11 moment errors {}; sym G12 moment errors {}", fmt(&g11), fmt(&g12)),
    )
}

fn criterion_extraction(t: &GammaTable) -> Outcome {
    let floor_u = ROUNDOFF_FLOOR * t.norm_u3;
    let floor_t = ROUNDOFF_FLOOR * t.norm_theta;
    let u: Vec<f64> = t.rows.iter().map(|r| r.err_u3.max(floor_u)).collect();
    let th: Vec<f64> = t.rows.iter().map(|r| r.err_theta.max(floor_t)).collect();
    let ok = nonincreasing(&u)
        && nonincreasing(&th)
        && u[2] < FINAL_FRACTION * t.norm_u3
        && th[2] < FINAL_FRACTION * t.norm_theta;
    let raw: Vec<f64> = t.rows.iter().map(|r| r.err_theta).collect();
    outcome(
        ok,
        format!(
            "u3 errors {} (norm {:.3e}); theta errors {} (raw {}, norm {:.3e})",
            fmt(&u),
            t.norm_u3,
            fmt(&th),
            fmt(&raw),
            t.norm_theta
        ),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .expect("output directory")
        .map(|e| {
            let e = e.expect("entry");
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).expect("artifact"),
            )
        })
        .collect()
}

fn criterion_determinism() -> Outcome {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/gamma_sweep.toml");
    let mut trees = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().expect("tempdir");
        let status = Command::new(env!("CARGO_BIN_EXE_viscobeam"))
            .arg("run")
            .arg(&config)
            .env("VISCOBEAM_OUT", dir.path())
            .output()
            .expect("spawn viscobeam");
        if !status.status.success() {
            return outcome(
                false,
                format!("run failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        trees.push(read_tree(dir.path()));
    }
    let same = trees[0] == trees[1];
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    outcome(
        same && !trees[0].is_empty(),
        format!("{} files, {bytes} bytes, identical = {same}", trees[0].len()),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (
            1,
            "quadratic-form pipeline",
            timed(BUDGET_QUADFORMS, criterion_quadforms),
        ),
        (2, "dissipation Hessian kernel", timed(BUDGET_KERNEL, criterion_kernel)),
        (3, "linear regime exactness", timed(BUDGET_LINEAR, criterion_linear)),
        (4, "energy-dissipation balance", timed(BUDGET_EDB, criterion_edb)),
    ];
    let start = Instant::now();
    let table = gamma_run();
    let secs = start.elapsed().as_secs_f64();
    let mut energy = criterion_energy(&table);
    energy
        .detail
        .push_str(&format!("; {secs:.2} s (budget {BUDGET_GAMMA} s)"));
    energy.passed &= secs < BUDGET_GAMMA;
    results.push((5, "gamma-limit of energies", energy));
    results.push((6, "metric consistency", criterion_metric(&table)));
    results.push((7, "strain identification", criterion_strain(&table)));
    results.push((8, "extraction operators", criterion_extraction(&table)));
    results.push((9, "determinism", criterion_determinism()));

    let mut failed = 0;
    for (k, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {k} {name}: {}", o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} criteria, {failed} failed", results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
