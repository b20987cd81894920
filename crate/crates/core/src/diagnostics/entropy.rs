use rayon::prelude::*;
use serde::Serialize;

use crate::flux::Entropy;
use crate::fvm::{ConvexDecomposition, NumericalFlux, SolverState};
use crate::mesh::SphereMesh;
use crate::quadrature::pairwise_sum;

/// Per-step entropy balance of one `U`.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyStep {
    pub label: String,
    /// `Σ_K U(u^{n+1}_K)|K|`.
    pub entropy_mass: f64,
    /// Largest `U(ũ) − U(u_K) + (τp_K/|K|)(F(u_K, u_{K_e}) − F(u_K, u_K))`.
    pub cell_entropy_worst: f64,
    /// Largest `|R^{n+1}_{K,e}| = |U(u^{n+1}_{K,e}) − U(ũ^{n+1}_{K,e})|`.
    pub r_max: f64,
    /// `(α/2) Σ (|e||K|/p_K) |u^{n+1}_{K,e} − u^{n+1}_K|²`.
    pub dissipation: f64,
    /// `Σ (|e||K|/p_K) |u^{n+1}_{K,e} − u^{n+1}_K|²`.
    pub spread: f64,
    /// `τ Σ_{K,e} |e| F_{e,K}(u_K, u_K) + Σ (|e||K|/p_K) R`.
    pub source: f64,
    /// Left side minus right side of the discrete entropy balance; `≤ 0` holds.
    pub balance_residual: f64,
}

struct CellTerms {
    cell_entropy: f64,
    r_max: f64,
    spread: f64,
    flux_term: f64,
    r_term: f64,
    mass_new: f64,
    mass_old: f64,
}

/// Evaluate every cell and face inequality of one step for `U`. `alpha` is
/// the modulus of convexity of `U` on the state box.
pub fn entropy_report(
    nf: &NumericalFlux,
    state: &SolverState,
    dec: &ConvexDecomposition,
    entropy: &Entropy,
    alpha: f64,
) -> EntropyStep {
    let mesh: &SphereMesh = &state.mesh;
    let tau = dec.tau;
    let terms: Vec<CellTerms> = mesh
        .cells
        .par_iter()
        .map(|c| {
            let uk = dec.u_old[c.id];
            let lam = tau * c.perimeter / c.area;
            let unew = state.u[c.id];
            let mut t = CellTerms {
                cell_entropy: f64::NEG_INFINITY,
                r_max: 0.0,
                spread: 0.0,
                flux_term: 0.0,
                r_term: 0.0,
                mass_new: entropy.value(unew) * c.area,
                mass_old: entropy.value(uk) * c.area,
            };
            for (slot, &e) in dec.range(c.id).zip(&c.faces) {
                let face = &mesh.faces[e];
                let v = dec.u_old[face.neighbour_of(c.id)];
                let g_uv = nf.entropy_from_side(e, c.id, entropy, uk, v);
                let g_uu = nf.entropy_from_side(e, c.id, entropy, uk, uk);
                let tilde = dec.tilde[slot];
                let split = dec.split[slot];
                t.cell_entropy = t.cell_entropy.max(entropy.value(tilde) - entropy.value(uk) + lam * (g_uv - g_uu));
                let r = entropy.value(split) - entropy.value(tilde);
                t.r_max = t.r_max.max(r.abs());
                let w = face.measure * c.area / c.perimeter;
                t.spread += w * (split - unew).powi(2);
                t.flux_term += tau * face.measure * g_uu;
                t.r_term += w * r;
            }
            t
        })
        .collect();
    let sum = |f: fn(&CellTerms) -> f64| pairwise_sum(&terms.iter().map(f).collect::<Vec<_>>());
    let mass_new = sum(|t| t.mass_new);
    let mass_old = sum(|t| t.mass_old);
    let spread = sum(|t| t.spread);
    let source = sum(|t| t.flux_term) + sum(|t| t.r_term);
    let dissipation = 0.5 * alpha * spread;
    EntropyStep {
        label: entropy.label(),
        entropy_mass: mass_new,
        cell_entropy_worst: terms.iter().map(|t| t.cell_entropy).fold(f64::NEG_INFINITY, f64::max),
        r_max: terms.iter().map(|t| t.r_max).fold(0.0, f64::max),
        dissipation,
        spread,
        source,
        balance_residual: (mass_new + dissipation) - (mass_old + source),
    }
}

/// Running form of the dissipation bound for `U = u²/2`:
/// `Σ_n Σ (|e||K|/p_K)|u^n_{K,e} − u^n_K|² ≤ ‖u₀‖²_{L²} + C(T)` where
/// `C(T) = 2 Σ_n max(0, source_n)`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DissipationBound {
    pub sum: f64,
    pub l2_initial_sq: f64,
    pub c_t: f64,
}

impl DissipationBound {
    pub fn new(l2_initial_sq: f64) -> Self {
        Self {
            sum: 0.0,
            l2_initial_sq,
            c_t: 0.0,
        }
    }

    pub fn push(&mut self, step: &EntropyStep) {
        self.sum += step.spread;
        self.c_t += 2.0 * step.source.max(0.0);
    }

    pub fn bound(&self) -> f64 {
        self.l2_initial_sq + self.c_t
    }

    pub fn holds(&self) -> bool {
        self.sum.is_finite() && self.sum <= self.bound()
    }
}
