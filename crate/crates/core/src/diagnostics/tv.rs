use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::flux::{FluxField, TVDReport, VectorField, Verdict};
use crate::geometry::Point;
use crate::mesh::SphereMesh;
use crate::quadrature::pairwise_sum;

/// A vector field `X` with its face integrals `∫_e |g(X, n_e)| dv_e`.
#[derive(Clone)]
pub struct TvField {
    pub label: String,
    pub field: Arc<dyn VectorField>,
    weights: Vec<f64>,
}

impl TvField {
    pub fn new(label: impl Into<String>, field: Arc<dyn VectorField>, mesh: &SphereMesh) -> Self {
        let weights = (0..mesh.faces.len())
            .into_par_iter()
            .map(|e| mesh.face_abs_normal_integral(e, field.as_ref()))
            .collect();
        Self {
            label: label.into(),
            field,
            weights,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `TV_X` of a piecewise constant state: `Σ_e |u_K − u_{K_e}| ∫_e |g(X, n_e)| dv_e`.
pub fn discrete_tv_x(mesh: &SphereMesh, u: &[f64], x: &TvField) -> f64 {
    let terms: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| (u[f.cell_a] - u[f.cell_b]).abs() * x.weights[f.id])
        .collect();
    pairwise_sum(&terms)
}

/// Isotropic discrete total variation `Σ_e |u_K − u_{K_e}| |e|`.
pub fn discrete_tv(mesh: &SphereMesh, u: &[f64]) -> f64 {
    let terms: Vec<f64> = mesh
        .faces
        .iter()
        .map(|f| (u[f.cell_a] - u[f.cell_b]).abs() * f.measure)
        .collect();
    pairwise_sum(&terms)
}

/// Steps (1-based) at which `TV_X` grows by more than `rel_tol · (1 + TV_X)`.
pub fn tv_increases(history: &[f64], rel_tol: f64) -> Vec<usize> {
    history
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] > rel_tol * (1.0 + w[0].abs()))
        .map(|(n, _)| n + 1)
        .collect()
}

/// Growth of `TV_X` against the terms that may drive it when `[f_u, X] ≠ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct TvBudget {
    /// `TV_X(t) − TV_X(0)`.
    pub growth: f64,
    /// `sup |[X, f_u]|_g · ∫_0^t TV(u) ds`.
    pub bracket_term: f64,
    /// `∫_0^t ‖X(∇·f(u, ·))‖_{L¹} ds` sampled at band-cell centroids.
    pub divergence_term: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TvReport {
    pub field: String,
    pub verdict: Verdict,
    pub initial: f64,
    pub last: f64,
    pub max_increase: f64,
    /// Steps where a compatible pair increased `TV_X` past the tolerance.
    pub violations: Vec<usize>,
    pub budget: Option<TvBudget>,
}

impl TvReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Incompatible || self.violations.is_empty()
    }
}

/// Tracks `TV_X` along a trajectory.
pub struct TvTracker {
    pub field: TvField,
    compatibility: TVDReport,
    pub history: Vec<f64>,
    tv_integral: f64,
    divergence_integral: f64,
    rel_tol: f64,
}

impl TvTracker {
    pub fn new(field: TvField, compatibility: TVDReport, rel_tol: f64) -> Self {
        Self {
            field,
            compatibility,
            history: Vec::new(),
            tv_integral: 0.0,
            divergence_integral: 0.0,
            rel_tol,
        }
    }

    pub fn compatibility(&self) -> &TVDReport {
        &self.compatibility
    }

    /// Record `u` reached from `u_prev` after a step `tau`; pass `u_prev = None`
    /// for the initial state.
    pub fn push(
        &mut self,
        mesh: &SphereMesh,
        flux: &dyn FluxField,
        u_prev: Option<&[f64]>,
        tau: f64,
        u: &[f64],
    ) -> f64 {
        let tv = discrete_tv_x(mesh, u, &self.field);
        if let (Some(prev), Verdict::Incompatible) = (u_prev, self.compatibility.verdict) {
            self.tv_integral += tau * discrete_tv(mesh, prev);
            self.divergence_integral += tau * divergence_along(mesh, flux, self.field.field.as_ref(), prev);
        }
        self.history.push(tv);
        tv
    }

    pub fn report(&self) -> TvReport {
        let initial = self.history.first().copied().unwrap_or(0.0);
        let last = self.history.last().copied().unwrap_or(0.0);
        let max_increase = self
            .history
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        let verdict = self.compatibility.verdict;
        let (violations, budget) = match verdict {
            Verdict::Compatible => (tv_increases(&self.history, self.rel_tol), None),
            Verdict::Incompatible => (
                Vec::new(),
                Some(TvBudget {
                    growth: last - initial,
                    bracket_term: self.compatibility.bracket_residual * self.tv_integral,
                    divergence_term: self.divergence_integral,
                }),
            ),
        };
        TvReport {
            field: self.field.label.clone(),
            verdict,
            initial,
            last,
            max_increase,
            violations,
            budget,
        }
    }
}

/// `Σ_K |K| |X(∇·f(u_K, ·))|` at band-cell centroids, by central differences
/// along the flow of `X`.
fn divergence_along(mesh: &SphereMesh, flux: &dyn FluxField, x: &dyn VectorField, u: &[f64]) -> f64 {
    let eps = 1e-4;
    let terms: Vec<f64> = mesh
        .cells
        .par_iter()
        .filter(|c| !c.is_pole_cap)
        .map(|c| {
            let p = c.centroid;
            let v = x.at(&p);
            let at = |s: f64| -> f64 {
                let q = Point::<2>::new(p[0] + s * v[0], p[1] + s * v[1]);
                flux.divergence(u[c.id], &q).unwrap_or(0.0)
            };
            c.area * ((at(eps) - at(-eps)) / (2.0 * eps)).abs()
        })
        .collect();
    pairwise_sum(&terms)
}
