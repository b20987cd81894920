use serde::Serialize;

use super::{CliError, Scenario};
use crate::flux::{tvd_compatibility, velocity, Psi};
use crate::fvm::{init_state, FluxKind, Scheme};
use crate::mesh::{FaceKind, SphereMesh};

/// Colinearity residual above which a flux is not treated as `f^θ = 0`.
const DECOUPLED_TOLERANCE: f64 = 1e-10;

/// Independent periodic 1D schemes, one per latitude band, for
/// `∂_t u + ∂_φ (ĉ_j ψ(u)) = 0`.
#[derive(Debug, Clone)]
pub struct Oracle1D {
    pub n: usize,
    /// `ĉ_j = s_e |e| / |K|` from the meridian faces of band `j`.
    pub speeds: Vec<f64>,
    pub kind: FluxKind,
    pub psi: Psi,
    pub lf_factor: f64,
    pub bounds: (f64, f64),
}

impl Oracle1D {
    pub fn from_mesh(
        mesh: &SphereMesh,
        v: impl Fn(&crate::geometry::Point<2>) -> crate::geometry::Point<2>,
        psi: Psi,
        kind: FluxKind,
        lf_factor: f64,
        bounds: (f64, f64),
    ) -> Self {
        let speeds = (0..mesh.n_theta)
            .map(|j| {
                let k = mesh.band_cell(0, j);
                let east = mesh.band_cell(1 % mesh.n_phi, j);
                let c = &mesh.cells[k];
                let e = c
                    .faces
                    .iter()
                    .copied()
                    .find(|&e| {
                        let f = &mesh.faces[e];
                        f.kind == FaceKind::Meridian && f.neighbour_of(k) == east && (f.fixed - c.centroid[0]).rem_euclid(std::f64::consts::TAU) < std::f64::consts::PI
                    })
                    .expect("band cell has an eastern meridian face");
                let f = &mesh.faces[e];
                f.sign_for(k) * mesh.face_normal_average(e, &v) * f.measure / c.area
            })
            .collect();
        Self {
            n: mesh.n_phi,
            speeds,
            kind,
            psi,
            lf_factor,
            bounds,
        }
    }

    fn g(&self, c: f64, u: f64) -> f64 {
        match self.psi {
            Psi::Linear => c * u,
            Psi::HalfSquare => 0.5 * c * u * u,
        }
    }

    /// Numerical flux at the interface between `a` (west) and `b` (east).
    pub fn flux(&self, c: f64, a: f64, b: f64) -> f64 {
        let g = |u| self.g(c, u);
        match (self.kind, self.psi) {
            (FluxKind::LaxFriedrichs, _) => {
                let (lo, hi) = self.bounds;
                let dpsi = match self.psi {
                    Psi::Linear => 1.0,
                    Psi::HalfSquare => lo.abs().max(hi.abs()),
                };
                let lambda = self.lf_factor * c.abs() * dpsi;
                0.5 * (g(a) + g(b)) - 0.5 * lambda * (b - a)
            }
            (_, Psi::Linear) => {
                if c >= 0.0 {
                    c * a
                } else {
                    c * b
                }
            }
            (FluxKind::Godunov, Psi::HalfSquare) => {
                if a <= b {
                    // min of g over [a, b]
                    if c >= 0.0 {
                        g(0f64.clamp(a, b))
                    } else {
                        g(a).min(g(b))
                    }
                } else if c >= 0.0 {
                    g(a).max(g(b))
                } else {
                    g(0f64.clamp(b, a))
                }
            }
            (FluxKind::EngquistOsher, Psi::HalfSquare) => {
                if c >= 0.0 {
                    0.5 * c * (a.max(0.0).powi(2) + b.min(0.0).powi(2))
                } else {
                    0.5 * c * (a.min(0.0).powi(2) + b.max(0.0).powi(2))
                }
            }
        }
    }

    /// One step of every band. `rows[j][i]` is cell `i` of band `j`.
    pub fn step(&self, rows: &mut [Vec<f64>], tau: f64) {
        for (row, &c) in rows.iter_mut().zip(&self.speeds) {
            let n = row.len();
            let h: Vec<f64> = (0..n).map(|i| self.flux(c, row[i], row[(i + 1) % n])).collect();
            let next: Vec<f64> = (0..n).map(|i| row[i] - tau * (h[i] - h[(i + n - 1) % n])).collect();
            *row = next;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub steps: usize,
    pub bands: usize,
    pub tau: f64,
    /// `max |u²ᴰ − u¹ᴰ|` over bands, cells and steps.
    pub max_discrepancy: f64,
    /// Worst step (1-based) and band.
    pub worst: (usize, usize),
    /// Largest change of either pole cap, which must stay frozen.
    pub cap_drift: f64,
}

/// Run the 2D scheme and the per-band 1D oracle with the same `τ` and
/// compare them after every step until `T`.
pub fn oracle_compare(scenario: &Scenario) -> Result<OracleReport, CliError> {
    let f = scenario.flux.as_ref();
    let psi = f.separable().ok_or_else(|| {
        CliError::Config(format!("oracle: {} is not of the form c(θ)ψ(u)∂φ", f.describe()))
    })?;
    let mesh = &scenario.mesh;
    let dphi = crate::flux::build_vector_field("d_phi")?;
    let pts = super::sample_grid();
    let rep = tvd_compatibility(f, dphi.as_ref(), &[-1.0, 0.5, 1.0], &pts, DECOUPLED_TOLERANCE)?;
    if rep.colinearity_residual > DECOUPLED_TOLERANCE {
        return Err(CliError::Config(format!(
            "oracle: f_u is not along ∂φ (colinearity residual {:.3e})",
            rep.colinearity_residual
        )));
    }
    let mut state = init_state(mesh.clone(), scenario.initial.as_ref())?;
    let opts = scenario.config.numerical_flux.clone();
    let mut scheme = Scheme::for_run(scenario.flux.clone(), opts.clone(), &state, scenario.config.t_end)?;
    let oracle = Oracle1D::from_mesh(mesh, |x| velocity(f, psi, x), psi, opts.kind, opts.lf_factor, scheme.bounds());
    let mut rows: Vec<Vec<f64>> = (0..mesh.n_theta)
        .map(|j| (0..mesh.n_phi).map(|i| state.u[mesh.band_cell(i, j)]).collect())
        .collect();
    let caps = [mesh.north_cap(), mesh.south_cap()].map(|k| state.u[k]);
    let mut report = OracleReport {
        steps: 0,
        bands: mesh.n_theta,
        tau: scheme.tau(),
        max_discrepancy: 0.0,
        worst: (0, 0),
        cap_drift: 0.0,
    };
    let t_end = scenario.config.t_end;
    while state.t < t_end {
        if scheme.ensure_bounds(&state.u)? {
            return Err(CliError::Config("oracle: the state left its a-priori box".into()));
        }
        let remaining = t_end - state.t;
        let last = remaining <= scheme.tau() * (1.0 + 1e-12);
        let tau = if last { remaining } else { scheme.tau() };
        let (next, _) = scheme.step(&state, tau)?;
        oracle.step(&mut rows, tau);
        report.steps += 1;
        for (j, row) in rows.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let d = (next.u[mesh.band_cell(i, j)] - v).abs();
                if d > report.max_discrepancy {
                    report.max_discrepancy = d;
                    report.worst = (report.steps, j);
                }
            }
        }
        for (k, c0) in [mesh.north_cap(), mesh.south_cap()].into_iter().zip(caps) {
            report.cap_drift = report.cap_drift.max((next.u[k] - c0).abs());
        }
        state = next;
        if last {
            state.t = t_end;
        }
    }
    Ok(report)
}
