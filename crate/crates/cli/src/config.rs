use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use viscobeam::beam1d::{BeamMesh, BeamState, BoundaryData, ForceProfile};
use viscobeam::dimred::{schedule, QuadSizes};
use viscobeam::flow::NewtonSettings;
use viscobeam::{ElasticLaw, MaterialModel, PowerPenalty};

use crate::error::CliError;
use crate::manifest::canonical_json;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialSection,
    pub model: ModelSection,
    pub mesh: MeshSection,
    pub flow: FlowSection,
    #[serde(default)]
    pub dimred: Option<DimredSection>,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub force: ForceSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    SvkZeroPoisson,
    Orthotropic,
    Isotropic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub kind: MaterialKind,
    pub mu: f64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub lambda3: Option<f64>,
    pub c1: f64,
    pub p: f64,
    #[serde(default)]
    pub trust_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub r: f64,
    pub l: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n_elems: usize,
    pub n_plot: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub tau: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimredSection {
    pub h_list: Vec<f64>,
    #[serde(default = "default_n1")]
    pub n1: usize,
    #[serde(default = "default_n23")]
    pub n2: usize,
    #[serde(default = "default_n23")]
    pub n3: usize,
    /// The companion state for the metric column scales the interior
    /// coefficients of the initial datum by this factor.
    #[serde(default = "default_companion")]
    pub companion_scale: f64,
}

fn default_n1() -> usize {
    24
}

fn default_n23() -> usize {
    6
}

fn default_companion() -> f64 {
    0.5
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default)]
    pub xi1: [f64; 2],
    #[serde(default)]
    pub xi2: [f64; 2],
    #[serde(default)]
    pub xi2_slope: [f64; 2],
    #[serde(default)]
    pub xi3: [f64; 2],
    #[serde(default)]
    pub xi3_slope: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    #[serde(default)]
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            amplitude: default_amplitude(),
        }
    }
}

fn default_amplitude() -> f64 {
    0.1
}

fn bad(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: Some(field.to_string()),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be a positive finite number, got {v}")))
    }
}

fn finite(field: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(bad(field, "must be finite"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            field: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config {
            field: None,
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.material;
        positive("material.mu", m.mu)?;
        positive("material.c1", m.c1)?;
        if !(m.p.is_finite() && m.p > 3.0) {
            return Err(bad("material.p", format!("must exceed 3, got {}", m.p)));
        }
        match m.kind {
            MaterialKind::SvkZeroPoisson => {}
            MaterialKind::Orthotropic => {
                for (name, v) in [("material.lambda2", m.lambda2), ("material.lambda3", m.lambda3)] {
                    let v = v.ok_or_else(|| bad(name, "required for the orthotropic law"))?;
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(bad(name, format!("must be nonnegative, got {v}")));
                    }
                }
            }
            MaterialKind::Isotropic => {
                let v = m
                    .lambda
                    .ok_or_else(|| bad("material.lambda", "required for the isotropic law"))?;
                if !(v.is_finite() && v >= 0.0) {
                    return Err(bad("material.lambda", format!("must be nonnegative, got {v}")));
                }
            }
        }
        if let Some(t) = m.trust_radius {
            positive("material.trust_radius", t)?;
        }

        let md = &self.model;
        if !(md.r.is_finite() && md.r >= 0.0) {
            return Err(bad("model.r", format!("must be nonnegative, got {}", md.r)));
        }
        positive("model.l", md.l)?;
        if !(md.alpha > 0.0 && md.alpha < 1.0) {
            return Err(bad("model.alpha", format!("must lie in (0, 1), got {}", md.alpha)));
        }

        if self.mesh.n_elems < viscobeam::beam1d::MIN_ELEMS {
            return Err(bad(
                "mesh.n_elems",
                format!(
                    "must be at least {}, got {}",
                    viscobeam::beam1d::MIN_ELEMS,
                    self.mesh.n_elems
                ),
            ));
        }
        if self.mesh.n_plot < 2 {
            return Err(bad("mesh.n_plot", "must be at least 2"));
        }

        let f = &self.flow;
        positive("flow.tau", f.tau)?;
        positive("flow.T", f.t_final)?;
        if f.tau > f.t_final {
            return Err(bad("flow.tau", format!("must not exceed T = {}", f.t_final)));
        }
        positive("flow.newton_tol", f.newton_tol)?;
        if f.max_iter == 0 {
            return Err(bad("flow.max_iter", "must be at least 1"));
        }
        if f.snapshot_stride == 0 {
            return Err(bad("flow.snapshot_stride", "must be at least 1"));
        }

        if let Some(d) = &self.dimred {
            if d.h_list.len() < 3 {
                return Err(bad("dimred.h_list", "needs at least 3 entries"));
            }
            schedule(&d.h_list, md.r, md.alpha, m.p).map_err(|e| bad("dimred.h_list", e.to_string()))?;
            for (name, n) in [("dimred.n1", d.n1), ("dimred.n2", d.n2), ("dimred.n3", d.n3)] {
                if n == 0 {
                    return Err(bad(name, "must be at least 1"));
                }
            }
            finite("dimred.companion_scale", &[d.companion_scale])?;
        }

        let b = &self.boundary;
        finite("boundary", &[b.xi1, b.xi2, b.xi2_slope, b.xi3, b.xi3_slope].concat())?;
        finite("force.coefficients", &self.force.coefficients)?;
        finite("initial.amplitude", &[self.initial.amplitude])?;
        self.model_3d()?;
        Ok(())
    }

    pub fn model_3d(&self) -> Result<MaterialModel, CliError> {
        let m = &self.material;
        let elastic = match m.kind {
            MaterialKind::SvkZeroPoisson => ElasticLaw::SvkZeroPoisson { mu: m.mu },
            MaterialKind::Orthotropic => ElasticLaw::Orthotropic {
                lambda2: m.lambda2.unwrap_or(0.0),
                lambda3: m.lambda3.unwrap_or(0.0),
                mu: m.mu,
            },
            MaterialKind::Isotropic => ElasticLaw::Isotropic {
                lambda: m.lambda.unwrap_or(0.0),
                mu: m.mu,
            },
        };
        let model = MaterialModel::new(elastic, PowerPenalty { c1: m.c1, p: m.p })
            .map_err(|e| bad("material", e.to_string()))?;
        match m.trust_radius {
            Some(t) => model
                .with_trust_radius(t)
                .map_err(|e| bad("material.trust_radius", e.to_string())),
            None => Ok(model),
        }
    }

    pub fn mesh(&self) -> Result<BeamMesh, CliError> {
        BeamMesh::new(self.model.l, self.mesh.n_elems).map_err(|e| bad("mesh", e.to_string()))
    }

    pub fn force(&self) -> ForceProfile {
        ForceProfile {
            coefficients: self.force.coefficients.clone(),
        }
    }

    pub fn newton(&self) -> NewtonSettings {
        NewtonSettings {
            tol: self.flow.newton_tol,
            max_iter: self.flow.max_iter,
        }
    }

    pub fn quad_sizes(&self) -> Option<QuadSizes> {
        self.dimred.as_ref().map(|d| QuadSizes {
            n1: d.n1,
            n2: d.n2,
            n3: d.n3,
        })
    }

    /// The smooth datum of the configured amplitude, shifted by a lift of
    /// the boundary data (linear for `xi1`, a cubic Hermite for `xi2`, `xi3`).
    pub fn initial_state(&self) -> Result<BeamState, CliError> {
        let mesh = self.mesh()?;
        let datum = BeamState::smooth_datum(mesh, self.model.r, self.initial.amplitude)?;
        let b = &self.boundary;
        let (a, l) = (mesh.left(), mesh.length);
        let hermite = |v: [f64; 2], d: [f64; 2]| {
            move |x: f64| {
                let s = (x - a) / l;
                let (h00, h10, h01, h11) = (
                    2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                    s.powi(3) - 2.0 * s * s + s,
                    -2.0 * s.powi(3) + 3.0 * s * s,
                    s.powi(3) - s * s,
                );
                let (g00, g10, g01, g11) = (
                    6.0 * s * s - 6.0 * s,
                    3.0 * s * s - 4.0 * s + 1.0,
                    -6.0 * s * s + 6.0 * s,
                    3.0 * s * s - 2.0 * s,
                );
                (
                    h00 * v[0] + h10 * l * d[0] + h01 * v[1] + h11 * l * d[1],
                    (g00 * v[0] + g01 * v[1]) / l + g10 * d[0] + g11 * d[1],
                )
            }
        };
        let lift = BeamState::interpolate(
            mesh,
            self.model.r,
            |x| b.xi1[0] + (b.xi1[1] - b.xi1[0]) * (x - a) / l,
            hermite(b.xi2, b.xi2_slope),
            hermite(b.xi3, b.xi3_slope),
            |_| 0.0,
        )?;
        let mut s = lift.with_full(&(lift.to_full() + datum.to_full()))?;
        // the datum's end slopes are zero only up to roundoff
        let n = mesh.n_nodes();
        s.boundary = BoundaryData {
            xi1: [s.xi1[0], s.xi1[n - 1]],
            xi2: [s.xi2[0], s.xi2[2 * n - 2]],
            xi2_slope: [s.xi2[1], s.xi2[2 * n - 1]],
            xi3: [s.xi3[0], s.xi3[2 * n - 2]],
            xi3_slope: [s.xi3[1], s.xi3[2 * n - 1]],
        };
        s.validate()?;
        Ok(s)
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }
}
