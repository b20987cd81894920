use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::expr::Formula;
use crate::flux::{build_flux, build_vector_field, Entropy, FluxField, VectorField};
use crate::fvm::SchemeOptions;
use crate::geometry::Point;
use crate::mesh::SphereMesh;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub n_phi: usize,
    pub n_theta: usize,
    pub theta_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub name: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// Initial data: a named profile or a formula in `phi, theta, n1, n2, n3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialConfig {
    Expr {
        expr: String,
    },
    Named {
        name: String,
        #[serde(default)]
        params: Map<String, Value>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Vector fields `X` for `TV_X`, by registry name.
    #[serde(default = "default_fields")]
    pub fields: Vec<String>,
    #[serde(default = "default_entropies")]
    pub entropies: Vec<String>,
    /// Tolerance of the bracket-compatibility check.
    #[serde(default = "default_tvd_tolerance")]
    pub tvd_tolerance: f64,
}

fn default_fields() -> Vec<String> {
    vec!["d_phi".into()]
}

fn default_entropies() -> Vec<String> {
    vec!["quadratic".into()]
}

fn default_tvd_tolerance() -> f64 {
    crate::flux::DEFAULT_TVD_TOLERANCE
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            fields: default_fields(),
            entropies: default_entropies(),
            tvd_tolerance: default_tvd_tolerance(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_csv")]
    pub csv: String,
    /// Prefix of `<prefix>_<step>.vtk` snapshots.
    #[serde(default = "default_vtk")]
    pub vtk: String,
    /// Write a CSV row every `csv_cadence` steps; the last step is always written.
    #[serde(default = "one")]
    pub csv_cadence: usize,
    /// Snapshot every `vtk_cadence` steps; `0` keeps only the first and last.
    #[serde(default)]
    pub vtk_cadence: usize,
}

fn default_csv() -> String {
    "diag.csv".into()
}

fn default_vtk() -> String {
    "state".into()
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: default_csv(),
            vtk: default_vtk(),
            csv_cadence: 1,
            vtk_cadence: 0,
        }
    }
}

/// What the L¹ error column compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// `u₀` itself, for any `t`.
    Initial,
    /// `u₀(φ − ωt, θ)`; solid rotation only.
    Rotation,
    /// The same scenario one refinement above the finest level (convergence only).
    FineGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mesh: MeshConfig,
    pub flux: FluxConfig,
    pub numerical_flux: SchemeOptions,
    pub initial: InitialConfig,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub reference: Option<ReferenceKind>,
}

pub type InitialFn = Arc<dyn Fn(&Point<2>) -> f64 + Send + Sync>;

/// Everything a scenario needs, built and validated.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub mesh: Arc<SphereMesh>,
    pub flux: Arc<dyn FluxField>,
    pub initial: InitialFn,
    pub fields: Vec<(String, Arc<dyn VectorField>)>,
    pub entropies: Vec<Entropy>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn with_mesh(&self, n_phi: usize, n_theta: usize) -> Self {
        let mut c = self.clone();
        c.mesh.n_phi = n_phi;
        c.mesh.n_theta = n_theta;
        c
    }

    pub fn build(&self) -> Result<Scenario, CliError> {
        let cfg = |m: String| CliError::Config(m);
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(cfg(format!("T: must be finite and non-negative, got {}", self.t_end)));
        }
        let o = &self.numerical_flux;
        if !(o.safety > 0.0 && o.safety < 1.0) {
            return Err(cfg(format!("numerical_flux.safety: {} not in (0, 1)", o.safety)));
        }
        if self.outputs.csv_cadence == 0 {
            return Err(cfg("outputs.csv_cadence: must be at least 1".into()));
        }
        let mesh = SphereMesh::build_latlon(self.mesh.n_phi, self.mesh.n_theta, self.mesh.theta_min)
            .map_err(|e| cfg(format!("mesh: {e}")))?;
        let flux = build_flux(&self.flux.name, &self.flux.params).map_err(|e| cfg(format!("flux: {e}")))?;
        let initial = build_initial(&self.initial)?;
        let fields = self
            .diagnostics
            .fields
            .iter()
            .map(|s| {
                build_vector_field(s)
                    .map(|f| (s.clone(), f))
                    .map_err(|e| cfg(format!("diagnostics.fields: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let entropies = self
            .diagnostics
            .entropies
            .iter()
            .map(|s| Entropy::parse(s).map_err(|e| cfg(format!("diagnostics.entropies: {e}"))))
            .collect::<Result<_, _>>()?;
        if self.reference == Some(ReferenceKind::Rotation) && self.flux.name != "solid_rotation" {
            return Err(cfg("reference: rotation needs the solid_rotation flux".into()));
        }
        Ok(Scenario {
            config: self.clone(),
            mesh: Arc::new(mesh),
            flux,
            initial,
            fields,
            entropies,
        })
    }
}

fn param(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, CliError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| CliError::Config(format!("initial.params.{key}: expected a number"))),
    }
}

fn build_initial(init: &InitialConfig) -> Result<InitialFn, CliError> {
    match init {
        InitialConfig::Expr { expr } => {
            let f = Formula::parse(expr, &["phi", "theta", "n1", "n2", "n3"])
                .map_err(|e| CliError::Config(format!("initial.expr: {e}")))?;
            Ok(Arc::new(move |x: &Point<2>| {
                let (sp, cp) = x[0].sin_cos();
                let (st, ct) = x[1].sin_cos();
                f.eval(&[x[0], x[1], st * cp, st * sp, ct])
            }))
        }
        InitialConfig::Named { name, params } => {
            let check = |allowed: &[&str]| match params.keys().find(|k| !allowed.contains(&k.as_str())) {
                Some(k) => Err(CliError::Config(format!("initial.params: unknown key {k}"))),
                None => Ok(()),
            };
            match name.as_str() {
                "constant" => {
                    check(&["value"])?;
                    let v = param(params, "value", 1.0)?;
                    Ok(Arc::new(move |_: &Point<2>| v))
                }
                "cosine_bell" => {
                    check(&["phi", "theta", "radius", "height", "base"])?;
                    let c_phi = param(params, "phi", PI)?;
                    let c_theta = param(params, "theta", PI / 2.0)?;
                    let r = param(params, "radius", 2.0)?;
                    let h = param(params, "height", 1.0)?;
                    let base = param(params, "base", 0.0)?;
                    if !(r > 0.0) {
                        return Err(CliError::Config("initial.params.radius: must be positive".into()));
                    }
                    Ok(Arc::new(move |x: &Point<2>| {
                        let d = great_circle(x, c_phi, c_theta);
                        if d < r {
                            base + 0.5 * h * (1.0 + (PI * d / r).cos())
                        } else {
                            base
                        }
                    }))
                }
                "band_step" => {
                    // 1 on φ ∈ [phi0, phi1], `low` elsewhere: a shock and a rarefaction per band
                    check(&["phi0", "phi1", "low", "high"])?;
                    let p0 = param(params, "phi0", 0.5 * PI)?;
                    let p1 = param(params, "phi1", 1.5 * PI)?;
                    let low = param(params, "low", 0.0)?;
                    let high = param(params, "high", 1.0)?;
                    Ok(Arc::new(move |x: &Point<2>| {
                        if x[0] >= p0 && x[0] <= p1 {
                            high
                        } else {
                            low
                        }
                    }))
                }
                other => Err(CliError::Config(format!(
                    "initial.name: unknown profile '{other}' (known: constant, cosine_bell, band_step, or {{\"expr\": ...}})"
                ))),
            }
        }
    }
}

fn great_circle(x: &Point<2>, phi: f64, theta: f64) -> f64 {
    let c = x[1].cos() * theta.cos() + x[1].sin() * theta.sin() * (x[0] - phi).cos();
    c.clamp(-1.0, 1.0).acos()
}
