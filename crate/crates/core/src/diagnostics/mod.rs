//! Per-step monitors: mass, extrema, `TV_X`, entropy balances and errors.

mod entropy;
mod tv;

use std::io::{self, Write};

use serde::Serialize;

pub use entropy::{entropy_report, DissipationBound, EntropyStep};
pub use tv::{discrete_tv, discrete_tv_x, tv_increases, TvBudget, TvField, TvReport, TvTracker};

use crate::flux::Entropy;
use crate::fvm::{ConvexDecomposition, GrowthBound, Scheme, SolverState};
use crate::geometry::Point;
use crate::mesh::SphereMesh;
use crate::quadrature::pairwise_sum;

/// Relative per-step tolerance for `TV_X` increases of compatible pairs.
pub const TV_TOLERANCE: f64 = 1e-10;
pub const MASS_TOLERANCE: f64 = 1e-12;
pub const MAX_PRINCIPLE_TOLERANCE: f64 = 1e-12;
pub const ENTROPY_TOLERANCE: f64 = 1e-10;
/// Growth constants below this are treated as a divergence-free flux.
pub const DIVERGENCE_FREE: f64 = 1e-8;

pub fn mass(mesh: &SphereMesh, u: &[f64]) -> f64 {
    let terms: Vec<f64> = u.iter().zip(&mesh.cells).map(|(v, c)| v * c.area).collect();
    pairwise_sum(&terms)
}

/// `Σ_K |u_K − avg_K(reference)| |K|`.
pub fn l1_error(mesh: &SphereMesh, u: &[f64], reference: impl Fn(&Point<2>) -> f64) -> f64 {
    let terms: Vec<f64> = mesh
        .cells
        .iter()
        .map(|c| (u[c.id] - mesh.cell_average(c.id, &reference)).abs() * c.area)
        .collect();
    pairwise_sum(&terms)
}

/// `Σ_K |u_K − v_K| |K|`.
pub fn l1_distance(mesh: &SphereMesh, u: &[f64], v: &[f64]) -> f64 {
    let terms: Vec<f64> = mesh
        .cells
        .iter()
        .map(|c| (u[c.id] - v[c.id]).abs() * c.area)
        .collect();
    pairwise_sum(&terms)
}

/// `‖u₀‖²_{L²}` by the cell quadrature.
pub fn l2_norm_sq(mesh: &SphereMesh, u0: impl Fn(&Point<2>) -> f64) -> f64 {
    let terms: Vec<f64> = mesh
        .cells
        .iter()
        .map(|c| c.nodes.iter().map(|(x, w)| w * u0(x).powi(2)).sum())
        .collect();
    pairwise_sum(&terms)
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub mass: f64,
    pub linf: f64,
    pub min: f64,
    pub max: f64,
    /// One `TV_X` per registered field.
    pub tv: Vec<f64>,
    /// One `Σ U(u_K)|K|` per registered entropy.
    pub entropy_mass: Vec<f64>,
    /// Dissipation increment of the first entropy with positive modulus.
    pub dissipation: f64,
    /// Running dissipation sum for `U = u²/2`, when registered.
    pub dissipation_sum: f64,
    pub cell_entropy_worst: f64,
    pub balance_worst: f64,
    pub l1_error: Option<f64>,
}

/// Column order of the time-series CSV:
/// `step,t,tau,mass,linf,min,max,tv_<X>…,entropy_<U>…,dissipation,dissipation_sum,cell_entropy_worst,balance_worst,l1_error`.
pub fn csv_header(tv_labels: &[String], entropy_labels: &[String]) -> String {
    let mut cols: Vec<String> = ["step", "t", "tau", "mass", "linf", "min", "max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(tv_labels.iter().map(|l| format!("tv_{l}")));
    cols.extend(entropy_labels.iter().map(|l| format!("entropy_{l}")));
    cols.extend(
        ["dissipation", "dissipation_sum", "cell_entropy_worst", "balance_worst", "l1_error"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

impl DiagnosticsRecord {
    /// One CSV row; reals in `{:.17e}`, an absent `l1_error` as an empty field.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut fields = vec![self.step.to_string()];
        let mut push = |v: f64| fields.push(format!("{v:.17e}"));
        for v in [self.t, self.tau, self.mass, self.linf, self.min, self.max] {
            push(v);
        }
        for &v in self.tv.iter().chain(&self.entropy_mass) {
            push(v);
        }
        for v in [self.dissipation, self.dissipation_sum, self.cell_entropy_worst, self.balance_worst] {
            push(v);
        }
        fields.push(self.l1_error.map(|v| format!("{v:.17e}")).unwrap_or_default());
        writeln!(w, "{}", fields.join(","))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(value: f64, limit: f64) -> Self {
        Self {
            value,
            limit,
            passed: value <= limit,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub steps: usize,
    pub t_final: f64,
    pub growth: GrowthBound,
    pub divergence_free: bool,
    /// Largest `|mass(t_n) − mass(0)| / (1 + |mass(0)|)`.
    pub mass_drift: Check,
    /// Divergence-free: worst per-step increase of `max|u|`. Otherwise the
    /// worst excess of `max|u^n|` over `(max|u⁰| + C₁t)e^{C₂t}`.
    pub max_principle: Check,
    pub cell_entropy_worst: Check,
    pub balance_worst: Check,
    /// Divergence-free only: worst per-step increase of an entropy mass.
    pub entropy_mass_increase: Option<Check>,
    pub dissipation_bound: Option<DissipationBound>,
    pub dissipation_bound_passed: Option<bool>,
    pub tv: Vec<TvReport>,
    pub l1_error: Option<f64>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.mass_drift.passed
            && self.max_principle.passed
            && self.cell_entropy_worst.passed
            && self.balance_worst.passed
            && self.entropy_mass_increase.as_ref().is_none_or(|c| c.passed)
            && self.dissipation_bound_passed.unwrap_or(true)
            && self.tv.iter().all(TvReport::passed)
    }
}

pub type Reference = Box<dyn Fn(f64, &Point<2>) -> f64 + Send + Sync>;

/// Collects one [`DiagnosticsRecord`] per step of a run.
pub struct Diagnostics {
    pub tv: Vec<TvTracker>,
    /// Registered entropies with their modulus of convexity.
    pub entropies: Vec<(Entropy, f64)>,
    pub dissipation_bound: Option<DissipationBound>,
    pub growth: GrowthBound,
    reference: Option<Reference>,
    pub records: Vec<DiagnosticsRecord>,
    max_abs0: f64,
    mass0: f64,
    cell_entropy_worst: f64,
    balance_worst: f64,
    max_principle_worst: f64,
    entropy_increase_worst: f64,
    mass_drift_worst: f64,
}

impl Diagnostics {
    /// `l2_initial_sq` is `‖u₀‖²_{L²}`, used by the dissipation bound when
    /// `U = u²/2` is among `entropies`.
    pub fn new(
        tv: Vec<TvTracker>,
        entropies: Vec<(Entropy, f64)>,
        growth: GrowthBound,
        reference: Option<Reference>,
        l2_initial_sq: f64,
    ) -> Self {
        let dissipation_bound = entropies
            .iter()
            .any(|(e, _)| matches!(e, Entropy::Quadratic))
            .then(|| DissipationBound::new(l2_initial_sq));
        Self {
            tv,
            entropies,
            dissipation_bound,
            growth,
            reference,
            records: Vec::new(),
            max_abs0: 0.0,
            mass0: 0.0,
            cell_entropy_worst: f64::NEG_INFINITY,
            balance_worst: f64::NEG_INFINITY,
            max_principle_worst: f64::NEG_INFINITY,
            entropy_increase_worst: f64::NEG_INFINITY,
            mass_drift_worst: 0.0,
        }
    }

    pub fn tv_labels(&self) -> Vec<String> {
        self.tv.iter().map(|t| t.field.label.clone()).collect()
    }

    pub fn entropy_labels(&self) -> Vec<String> {
        self.entropies.iter().map(|(e, _)| e.label()).collect()
    }

    pub fn csv_header(&self) -> String {
        csv_header(&self.tv_labels(), &self.entropy_labels())
    }

    pub fn divergence_free(&self) -> bool {
        self.growth.c1 <= DIVERGENCE_FREE && self.growth.c2 <= DIVERGENCE_FREE
    }

    fn base(&self, state: &SolverState) -> DiagnosticsRecord {
        let mesh = &state.mesh;
        DiagnosticsRecord {
            step: state.n,
            t: state.t,
            tau: state.tau,
            mass: mass(mesh, &state.u),
            linf: state.max_abs(),
            min: state.min(),
            max: state.max(),
            tv: Vec::new(),
            entropy_mass: self
                .entropies
                .iter()
                .map(|(e, _)| {
                    let terms: Vec<f64> =
                        state.u.iter().zip(&mesh.cells).map(|(v, c)| e.value(*v) * c.area).collect();
                    pairwise_sum(&terms)
                })
                .collect(),
            dissipation: 0.0,
            dissipation_sum: self.dissipation_bound.as_ref().map_or(0.0, |b| b.sum),
            cell_entropy_worst: 0.0,
            balance_worst: 0.0,
            l1_error: self
                .reference
                .as_ref()
                .map(|r| l1_error(mesh, &state.u, |x| r(state.t, x))),
        }
    }

    pub fn initial(&mut self, scheme: &Scheme, state: &SolverState) -> &DiagnosticsRecord {
        let mut rec = self.base(state);
        self.max_abs0 = rec.linf;
        self.mass0 = rec.mass;
        for t in &mut self.tv {
            rec.tv.push(t.push(&state.mesh, scheme.flux().as_ref(), None, 0.0, &state.u));
        }
        self.records.push(rec);
        self.records.last().unwrap()
    }

    pub fn record(
        &mut self,
        scheme: &Scheme,
        state: &SolverState,
        dec: &ConvexDecomposition,
    ) -> &DiagnosticsRecord {
        let mut rec = self.base(state);
        for t in &mut self.tv {
            rec.tv.push(t.push(&state.mesh, scheme.flux().as_ref(), Some(&dec.u_old), dec.tau, &state.u));
        }
        let mut dissipation = None;
        let (mut cell_entropy, mut balance) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (entropy, alpha) in &self.entropies {
            let step = entropy_report(scheme.numerical_flux(), state, dec, entropy, *alpha);
            cell_entropy = cell_entropy.max(step.cell_entropy_worst);
            balance = balance.max(step.balance_residual);
            if dissipation.is_none() && *alpha > 0.0 {
                dissipation = Some(step.dissipation);
            }
            if let (Entropy::Quadratic, Some(b)) = (entropy, self.dissipation_bound.as_mut()) {
                b.push(&step);
            }
        }
        if !self.entropies.is_empty() {
            rec.cell_entropy_worst = cell_entropy;
            rec.balance_worst = balance;
            self.cell_entropy_worst = self.cell_entropy_worst.max(cell_entropy);
            self.balance_worst = self.balance_worst.max(balance);
        }
        rec.dissipation = dissipation.unwrap_or(0.0);
        rec.dissipation_sum = self.dissipation_bound.as_ref().map_or(0.0, |b| b.sum);

        let prev = self.records.last().expect("initial record first");
        self.mass_drift_worst = self
            .mass_drift_worst
            .max((rec.mass - self.mass0).abs() / (1.0 + self.mass0.abs()));
        let excess = if self.divergence_free() {
            rec.linf - prev.linf
        } else {
            rec.linf - self.growth.bound(self.max_abs0, rec.t)
        };
        self.max_principle_worst = self.max_principle_worst.max(excess);
        if self.divergence_free() {
            for (a, b) in rec.entropy_mass.iter().zip(&prev.entropy_mass) {
                self.entropy_increase_worst = self.entropy_increase_worst.max(a - b);
            }
        }
        self.records.push(rec);
        self.records.last().unwrap()
    }

    pub fn summary(&self) -> Summary {
        let last = self.records.last();
        let clamp = |v: f64| if v == f64::NEG_INFINITY { 0.0 } else { v };
        let dissipation_bound_passed = self.dissipation_bound.as_ref().map(DissipationBound::holds);
        Summary {
            steps: last.map_or(0, |r| r.step),
            t_final: last.map_or(0.0, |r| r.t),
            growth: self.growth,
            divergence_free: self.divergence_free(),
            mass_drift: Check::at_most(self.mass_drift_worst, MASS_TOLERANCE),
            max_principle: Check::at_most(clamp(self.max_principle_worst), MAX_PRINCIPLE_TOLERANCE),
            cell_entropy_worst: Check::at_most(clamp(self.cell_entropy_worst), ENTROPY_TOLERANCE),
            balance_worst: Check::at_most(clamp(self.balance_worst), ENTROPY_TOLERANCE),
            entropy_mass_increase: (self.divergence_free() && !self.entropies.is_empty())
                .then(|| Check::at_most(clamp(self.entropy_increase_worst), ENTROPY_TOLERANCE)),
            dissipation_bound: self.dissipation_bound.clone(),
            dissipation_bound_passed,
            tv: self.tv.iter().map(TvTracker::report).collect(),
            l1_error: last.and_then(|r| r.l1_error),
        }
    }
}
