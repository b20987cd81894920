//! Scenario files, the row-by-row 1D oracle, the convergence harness and
//! file output. The `sphere-fv` binary is a thin wrapper over this module.

mod config;
mod converge;
mod oracle;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use config::{
    DiagnosticsConfig, FluxConfig, InitialConfig, InitialFn, MeshConfig, OutputConfig, ReferenceKind, Scenario,
    ScenarioConfig,
};
pub use converge::{convergence_study, ConvergenceRow, ConvergenceTable};
pub use oracle::{oracle_compare, Oracle1D, OracleReport};

use crate::diagnostics::{l2_norm_sq, Diagnostics, Reference, Summary, TvField, TvTracker, TV_TOLERANCE};
use crate::flux::{divfree_residual, tvd_compatibility, FluxError, TVDReport, VectorField};
use crate::fvm::{init_state, FvmError, GrowthBound, Scheme, SolverState};
use crate::geometry::Point;
use crate::mesh::{self as export, MeshInfo};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Fvm(#[from] FvmError),
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// `2` for configuration errors, `3` for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fvm(FvmError::Config(_)) => 2,
            _ => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// `(φ, θ)` on an `8 × 7` grid away from the poles.
pub fn sample_grid() -> Vec<Point<2>> {
    (0..8)
        .flat_map(|i| {
            (0..7).map(move |j| {
                Point::<2>::new(
                    std::f64::consts::TAU * (i as f64 + 0.25) / 8.0,
                    0.2 + (std::f64::consts::PI - 0.4) * j as f64 / 6.0,
                )
            })
        })
        .collect()
}

/// `n` points uniform in `φ` and in `θ ∈ [0.1, π − 0.1]`.
pub fn sample_points(seed: u64, n: usize) -> Vec<Point<2>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point::<2>::new(
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.1..std::f64::consts::PI - 0.1),
            )
        })
        .collect()
}

fn state_samples(lo: f64, hi: f64) -> Vec<f64> {
    (0..5).map(|k| lo + (hi - lo) * k as f64 / 4.0).collect()
}

/// The exact or frozen reference selected by the scenario, if any.
pub fn reference_for(scenario: &Scenario) -> Option<Reference> {
    let u0 = scenario.initial.clone();
    match scenario.config.reference? {
        ReferenceKind::Initial => Some(Box::new(move |_, x| u0(x))),
        ReferenceKind::Rotation => {
            let omega = scenario
                .config
                .flux
                .params
                .get("omega")
                .and_then(|v| v.as_f64())
                .unwrap_or(1.0);
            Some(Box::new(move |t, x| u0(&Point::<2>::new(x[0] - omega * t, x[1]))))
        }
        ReferenceKind::FineGrid => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeInfo {
    pub kind: &'static str,
    pub tau: f64,
    pub lipschitz: f64,
    pub bounds: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub mesh: MeshInfo,
    pub scheme: SchemeInfo,
    pub compatibility: Vec<(String, TVDReport)>,
    pub summary: Summary,
    pub passed: bool,
}

impl RunReport {
    /// `0` when every monitored invariant held, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

/// Set up the scheme and diagnostics of a scenario.
pub fn prepare(scenario: &Scenario) -> Result<(SolverState, Scheme, Diagnostics), CliError> {
    let s0 = init_state(scenario.mesh.clone(), scenario.initial.as_ref())?;
    let scheme = Scheme::for_run(
        scenario.flux.clone(),
        scenario.config.numerical_flux.clone(),
        &s0,
        scenario.config.t_end,
    )?;
    let (lo, hi) = scheme.bounds();
    let points = sample_grid();
    let mut trackers = Vec::new();
    for (label, field) in &scenario.fields {
        let rep = tvd_compatibility(
            scenario.flux.as_ref(),
            field.as_ref(),
            &state_samples(lo, hi),
            &points,
            scenario.config.diagnostics.tvd_tolerance,
        )?;
        trackers.push(TvTracker::new(
            TvField::new(label.clone(), field.clone(), &scenario.mesh),
            rep,
            TV_TOLERANCE,
        ));
    }
    let entropies = scenario
        .entropies
        .iter()
        .map(|e| {
            e.check_convex(lo, hi)?;
            Ok((e.clone(), e.modulus(lo, hi).max(0.0)))
        })
        .collect::<Result<Vec<_>, FluxError>>()?;
    let diag = Diagnostics::new(
        trackers,
        entropies,
        GrowthBound::estimate(scenario.flux.as_ref(), s0.max_abs()),
        reference_for(scenario),
        l2_norm_sq(&scenario.mesh, scenario.initial.as_ref()),
    );
    Ok((s0, scheme, diag))
}

/// Run a scenario, writing the CSV time series, VTK snapshots and
/// `report.json` into `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let (s0, mut scheme, mut diag) = prepare(scenario)?;
    let outputs = &scenario.config.outputs;
    let t_end = scenario.config.t_end;
    let csv_path = out_dir.join(&outputs.csv);
    let mut csv = create(&csv_path)?;
    writeln!(csv, "{}", diag.csv_header()).map_err(io_err(&csv_path))?;
    diag.initial(&scheme, &s0).write_csv(&mut csv).map_err(io_err(&csv_path))?;
    let vtk = |state: &SolverState| -> Result<(), CliError> {
        let path = out_dir.join(format!("{}_{}.vtk", outputs.vtk, state.n));
        let mut w = create(&path)?;
        export::write_vtk(&state.mesh, &state.u, &format!("u at t = {}", state.t), &mut w)
            .and_then(|_| w.flush())
            .map_err(io_err(&path))
    };
    vtk(&s0)?;
    let final_state = scheme.run(s0, t_end, |sc, state, dec| {
        let rec = diag.record(sc, state, dec);
        let last = state.t >= t_end;
        if last || state.n % outputs.csv_cadence == 0 {
            rec.write_csv(&mut csv).map_err(|e| format!("{}: {e}", csv_path.display()))?;
        }
        if last || (outputs.vtk_cadence > 0 && state.n % outputs.vtk_cadence == 0) {
            vtk(state).map_err(|e| e.to_string())?;
        }
        Ok(())
    })?;
    csv.flush().map_err(io_err(&csv_path))?;
    log::info!("finished {} steps at t = {}", final_state.n, final_state.t);
    let summary = diag.summary();
    let report = RunReport {
        config: scenario.config.clone(),
        mesh: scenario.mesh.info(),
        scheme: SchemeInfo {
            kind: scheme.options().kind.as_str(),
            tau: scheme.tau(),
            lipschitz: scheme.lipschitz(),
            bounds: scheme.bounds(),
        },
        compatibility: diag
            .tv
            .iter()
            .map(|t| (t.field.label.clone(), t.compatibility().clone()))
            .collect(),
        passed: summary.passed(),
        summary,
    };
    let path = out_dir.join("report.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(io_err(&path))?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckFluxReport {
    pub flux: String,
    pub seed: u64,
    pub points: usize,
    pub u_samples: Vec<f64>,
    pub tvd: Vec<(String, TVDReport)>,
    /// `sup |∇·f(u, x)|` over the samples.
    pub divfree_residual: f64,
}

/// Bracket compatibility with every configured `X` and the divergence
/// residual, at `points` random samples drawn from `seed`.
pub fn check_flux(scenario: &Scenario, seed: u64, points: usize) -> Result<CheckFluxReport, CliError> {
    let pts = sample_points(seed, points);
    let s0 = init_state(scenario.mesh.clone(), scenario.initial.as_ref())?;
    let (lo, hi) = if s0.max() > s0.min() { (s0.min(), s0.max()) } else { (s0.min() - 1.0, s0.max() + 1.0) };
    let us = state_samples(lo, hi);
    let f = scenario.flux.as_ref();
    let mut tvd = Vec::new();
    for (label, field) in &scenario.fields {
        let field: &dyn VectorField = field.as_ref();
        tvd.push((
            label.clone(),
            tvd_compatibility(f, field, &us, &pts, scenario.config.diagnostics.tvd_tolerance)?,
        ));
    }
    let mut div: f64 = 0.0;
    for x in &pts {
        for &u in &us {
            div = div.max(divfree_residual(f, u, x)?);
        }
    }
    Ok(CheckFluxReport {
        flux: f.describe(),
        seed,
        points,
        u_samples: us,
        tvd,
        divfree_residual: div,
    })
}

/// Mesh summary; with `out_dir`, also writes `cells.csv` and `faces.csv`.
pub fn mesh_info(scenario: &Scenario, out_dir: Option<&Path>) -> Result<MeshInfo, CliError> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, cells) in [("cells.csv", true), ("faces.csv", false)] {
            let path = dir.join(name);
            let mut w = create(&path)?;
            let r = if cells {
                export::write_cells_csv(&scenario.mesh, &mut w)
            } else {
                export::write_faces_csv(&scenario.mesh, &mut w)
            };
            r.and_then(|_| w.flush()).map_err(io_err(&path))?;
        }
    }
    Ok(scenario.mesh.info())
}
