use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use viscobeam::beam1d::assemble_energy;
use viscobeam::dimred::{gamma_table, scaled_companion, schedule, GammaOptions, GammaTable};
use viscobeam::flow::{run_flow, BeamFlowSpace, FlowTrajectory};
use viscobeam::QuadFormSet;

use crate::config::RunConfig;
use crate::error::{io_err, CliError};
use crate::manifest::{hash_line, to_canonical, FlowSummary, HFlags, Manifest, ARTIFACT_VERSION};
use crate::verify::verify;

/// Environment variable naming the output directory.
pub const OUT_ENV: &str = "VISCOBEAM_OUT";

pub fn out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

struct Writer {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Writer {
    fn new(dir: &Path, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash,
            written: Vec::new(),
        })
    }

    fn raw(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Text artifact whose first line is the config hash.
    fn csv(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.raw(name, &(hash_line(&self.hash) + body))
    }

    fn manifest(&mut self, mut m: Manifest) -> Result<(), CliError> {
        let mut names = self.written.clone();
        names.sort();
        m.outputs = names;
        let body = m.to_json();
        self.raw("manifest.json", &body)
    }
}

fn base_manifest<'a>(cfg: &'a RunConfig, command: &'a str, forms: &QuadFormSet) -> Result<Manifest<'a>, CliError> {
    let sched = match &cfg.dimred {
        Some(d) => Some(schedule(&d.h_list, cfg.model.r, cfg.model.alpha, cfg.material.p)?),
        None => None,
    };
    Ok(Manifest {
        artifact_version: ARTIFACT_VERSION,
        command,
        config: cfg,
        config_hash: cfg.hash(),
        quadforms: forms.summary(),
        hypothesis_h: HFlags {
            w: forms.w.holds_h(),
            r: forms.r.holds_h(),
        },
        schedule: sched,
        flow: None,
        gamma: None,
        outputs: Vec::new(),
    })
}

fn ledger_csv(traj: &FlowTrajectory) -> String {
    let mut s = String::from("n,t,phi,D_increment,metric_derivative,slope,edb_partial,newton_iters,newton_residual\n");
    for r in &traj.ledger {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{},{:?}\n",
            r.n,
            r.t,
            r.phi,
            r.d_increment,
            r.metric_derivative,
            r.slope,
            r.edb_partial,
            r.newton_iters,
            r.newton_residual
        ));
    }
    s
}

#[derive(Serialize)]
struct Snapshot<'a> {
    config_hash: &'a str,
    n: usize,
    t: f64,
    state: &'a viscobeam::beam1d::BeamState,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaSummary {
    pub norm_u3: f64,
    pub norm_theta: f64,
    /// Range of `penalty_term / (zeta eps^-2 (eps/delta)^p)` over the rows.
    pub penalty_ratio: (f64, f64),
}

fn strain_csv(table: &GammaTable) -> String {
    let mut s = String::from("h,err_moments_g11,err_moments_g12,rotation_deviation\n");
    for r in &table.rows {
        s.push_str(&format!(
            "{:?},{:?},{:?},{:?}\n",
            r.geometry.h, r.err_moments_g11, r.err_moments_g12, r.rotation_deviation
        ));
    }
    s
}

fn run_gamma(cfg: &RunConfig, w: &mut Writer) -> Result<Option<GammaSummary>, CliError> {
    let Some(d) = &cfg.dimred else {
        return Ok(None);
    };
    let model = cfg.model_3d()?;
    let u = cfg.initial_state()?;
    let companion = scaled_companion(&u, d.companion_scale)?;
    let options = GammaOptions {
        alpha: cfg.model.alpha,
        sizes: cfg.quad_sizes().expect("dimred section present"),
        skip_strain: false,
    };
    let table = gamma_table(&u, &companion, &model, &cfg.force(), &d.h_list, &options)?;
    w.csv("gamma.csv", &table.to_csv())?;
    w.csv("gamma_strain.csv", &strain_csv(&table))?;
    Ok(Some(GammaSummary {
        norm_u3: table.norm_u3,
        norm_theta: table.norm_theta,
        penalty_ratio: table.penalty_fit(),
    }))
}

/// Flow run: ledger, snapshots, final profile, and the gamma table when a
/// `[dimred]` section is present.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let hash = cfg.hash();
    let mut w = Writer::new(dir, hash.clone())?;
    let model = cfg.model_3d()?;
    let forms = QuadFormSet::from_model(&model)?;
    let z0 = cfg.initial_state()?;
    let force = cfg.force();
    let space = BeamFlowSpace::new(&z0, &forms, force.clone())?;
    let x0 = space.coords(&z0)?;
    let traj = run_flow(&space, &x0, cfg.flow.tau, cfg.flow.t_final, &cfg.newton())?;
    let states = space.states(&traj)?;

    w.csv("ledger.csv", &ledger_csv(&traj))?;
    let last = states.len() - 1;
    let mut snaps = Vec::new();
    for (n, s) in states.iter().enumerate() {
        if n % cfg.flow.snapshot_stride != 0 && n != last {
            continue;
        }
        let name = format!("snapshot_{n:04}.json");
        let body = to_canonical(&Snapshot {
            config_hash: &hash,
            n,
            t: traj.times[n],
            state: s,
        }) + "\n";
        w.raw(&name, &body)?;
        snaps.push(name);
    }
    w.csv("profile_final.csv", &states[last].sample_csv(cfg.mesh.n_plot))?;
    let gamma = run_gamma(cfg, &mut w)?;

    let phi0 = assemble_energy(&z0, &forms.w, &force)?;
    let mut m = base_manifest(cfg, "run", &forms)?;
    let summary = FlowSummary::new(&traj, phi0, snaps);
    println!(
        "run: {} steps, phi {:.6e} -> {:.6e}, EDB deficit {:.3e}",
        summary.steps, summary.phi_initial, summary.phi_final, summary.edb_deficit
    );
    m.flow = Some(summary);
    m.gamma = gamma;
    w.manifest(m)?;
    println!(
        "wrote {} files to {} in {:.3} s",
        w.written.len(),
        dir.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn gamma(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    if cfg.dimred.is_none() {
        return Err(CliError::Config {
            field: Some("dimred".into()),
            message: "the gamma command needs a [dimred] section".into(),
        });
    }
    let start = Instant::now();
    let mut w = Writer::new(dir, cfg.hash())?;
    let forms = QuadFormSet::from_model(&cfg.model_3d()?)?;
    let gamma = run_gamma(cfg, &mut w)?;
    if let Some(g) = &gamma {
        println!(
            "gamma: penalty / envelope in [{:.4e}, {:.4e}]",
            g.penalty_ratio.0, g.penalty_ratio.1
        );
    }
    let mut m = base_manifest(cfg, "gamma", &forms)?;
    m.gamma = gamma;
    w.manifest(m)?;
    println!(
        "wrote {} files to {} in {:.3} s",
        w.written.len(),
        dir.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn quadforms(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let mut w = Writer::new(dir, cfg.hash())?;
    let forms = QuadFormSet::from_model(&cfg.model_3d()?)?;
    let m = base_manifest(cfg, "quadforms", &forms)?;
    println!("{}", to_canonical(&m.quadforms));
    w.manifest(m)?;
    Ok(())
}

pub fn verify_cmd(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let mut w = Writer::new(dir, cfg.hash())?;
    let report = verify(cfg)?;
    let text = report.to_text();
    print!("{text}");
    w.csv("verify_report.txt", &text)?;
    let forms = QuadFormSet::from_model(&cfg.model_3d()?)?;
    w.manifest(base_manifest(cfg, "verify", &forms)?)?;
    println!("verify finished in {:.3} s", start.elapsed().as_secs_f64());
    match report.failures() {
        0 => Ok(()),
        n => Err(CliError::VerifyFailed(n)),
    }
}
