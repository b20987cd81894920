//! Explicit first-order finite volume scheme on a [`SphereMesh`].

mod numerical;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use numerical::{FluxKind, NumericalFlux};

use crate::flux::FluxField;
use crate::geometry::Point;
use crate::mesh::SphereMesh;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FvmError {
    #[error("invalid scheme option: {0}")]
    Config(String),
    #[error("initial data is not finite in cell {cell}")]
    Input { cell: usize },
    #[error("non-finite update in cell {cell} at step {step}")]
    NonFinite { cell: usize, step: usize },
    #[error("flux does not depend on u and no tau_floor was given")]
    DegenerateCfl,
    #[error("final time must be finite and non-negative, got {0}")]
    BadTime(f64),
    #[error("step hook failed: {0}")]
    Hook(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeOptions {
    pub kind: FluxKind,
    #[serde(default = "default_safety")]
    pub safety: f64,
    #[serde(default = "default_lf_factor")]
    pub lf_factor: f64,
    /// Time step used when neither `f` nor the numerical flux depends on `u`.
    #[serde(default)]
    pub tau_floor: Option<f64>,
    /// Also evaluate the divergence correction with the cell quadrature.
    #[serde(default)]
    pub quadrature_correction: bool,
}

fn default_safety() -> f64 {
    0.5
}

fn default_lf_factor() -> f64 {
    1.01
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            kind: FluxKind::LaxFriedrichs,
            safety: default_safety(),
            lf_factor: default_lf_factor(),
            tau_floor: None,
            quadrature_correction: false,
        }
    }
}

impl SchemeOptions {
    pub fn with_kind(kind: FluxKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), FvmError> {
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(FvmError::Config(format!("safety {} not in (0, 1)", self.safety)));
        }
        if !(self.lf_factor >= 1.0 && self.lf_factor.is_finite()) {
            return Err(FvmError::Config(format!("lf_factor {} below 1", self.lf_factor)));
        }
        if let Some(t) = self.tau_floor {
            if !(t > 0.0 && t.is_finite()) {
                return Err(FvmError::Config(format!("tau_floor {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub mesh: Arc<SphereMesh>,
    /// Cell averages `u^n_K`.
    pub u: Vec<f64>,
    pub t: f64,
    pub n: usize,
    /// Step that produced this state; zero for the initial state.
    pub tau: f64,
}

impl SolverState {
    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cell averages of `u0`.
pub fn init_state(
    mesh: Arc<SphereMesh>,
    u0: impl Fn(&Point<2>) -> f64 + Sync,
) -> Result<SolverState, FvmError> {
    let u: Vec<f64> = (0..mesh.cells.len())
        .into_par_iter()
        .map(|k| mesh.cell_average(k, &u0))
        .collect();
    if let Some(cell) = u.iter().position(|v| !v.is_finite()) {
        return Err(FvmError::Input { cell });
    }
    Ok(SolverState {
        mesh,
        u,
        t: 0.0,
        n: 0,
        tau: 0.0,
    })
}

/// Constants of `|∇·f(u, x)| ≤ C₁ + C₂|u|`, sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthBound {
    pub c1: f64,
    pub c2: f64,
}

impl GrowthBound {
    /// Samples `∇·f` on a `16 × 15` grid and 9 states in `[−umax, umax]`.
    pub fn estimate(flux: &dyn FluxField, umax: f64) -> Self {
        let umax = umax.max(1.0);
        let pts: Vec<Point<2>> = (0..16)
            .flat_map(|i| {
                (0..15).map(move |j| {
                    Point::<2>::new(
                        std::f64::consts::TAU * i as f64 / 16.0,
                        std::f64::consts::PI * (j as f64 + 0.5) / 15.0,
                    )
                })
            })
            .collect();
        let div = |u: f64, x: &Point<2>| flux.divergence(u, x).map(f64::abs).unwrap_or(0.0);
        let c1 = pts.iter().map(|x| div(0.0, x)).fold(0.0, f64::max);
        let mut c2: f64 = 0.0;
        for a in 0..9 {
            let u = -umax + 2.0 * umax * a as f64 / 8.0;
            if u == 0.0 {
                continue;
            }
            for x in &pts {
                c2 = c2.max((div(u, x) - c1) / u.abs());
            }
        }
        Self { c1, c2 }
    }

    /// `(m₀ + C₁ t) e^{C₂ t}`.
    pub fn bound(&self, max_abs0: f64, t: f64) -> f64 {
        (max_abs0 + self.c1 * t) * (self.c2 * t).exp()
    }
}

/// `τ = safety · min_K |K| / (p_K · max(Lip, D))` with `D` the largest
/// incremental ratio of the numerical flux on its state box.
pub fn cfl_timestep(
    mesh: &SphereMesh,
    lipschitz: f64,
    nf: &NumericalFlux,
    options: &SchemeOptions,
) -> Result<f64, FvmError> {
    let d = (0..mesh.faces.len())
        .map(|e| nf.incremental_bound(e))
        .fold(0.0, f64::max);
    let speed = lipschitz.max(d);
    if !(speed > 0.0) {
        return options.tau_floor.ok_or(FvmError::DegenerateCfl);
    }
    let ratio = mesh
        .cells
        .iter()
        .map(|c| c.area / c.perimeter)
        .fold(f64::INFINITY, f64::min);
    Ok(options.safety * ratio / speed)
}

/// Per `(K, e)` data of one step, laid out cell by cell in the order of
/// `Cell::faces`; `offsets[K]..offsets[K + 1]` indexes cell `K`.
#[derive(Debug, Clone)]
pub struct ConvexDecomposition {
    pub tau: f64,
    pub u_old: Vec<f64>,
    pub offsets: Arc<[usize]>,
    /// `f_{e,K}(u_K, u_{K_e})`.
    pub flux: Vec<f64>,
    /// `f_{e,K}(u_K, u_K)`.
    pub flux_self: Vec<f64>,
    /// `ũ^{n+1}_{K,e}`.
    pub tilde: Vec<f64>,
    /// `u^{n+1}_{K,e}`.
    pub split: Vec<f64>,
    /// `(τ/|K|) Σ_e |e| f_{e,K}(u_K, u_K)`, the divergence correction subtracted
    /// from every `ũ^{n+1}_{K,e}`.
    pub div_correction: Vec<f64>,
    /// `(τ/|K|) ∫_K ∇·f(u_K, x) dv` by cell quadrature, when requested.
    pub div_correction_quadrature: Option<Vec<f64>>,
}

impl ConvexDecomposition {
    pub fn range(&self, cell: usize) -> std::ops::Range<usize> {
        self.offsets[cell]..self.offsets[cell + 1]
    }

    /// `(1/p_K) Σ_e |e| u^{n+1}_{K,e}`.
    pub fn reconstruct(&self, mesh: &SphereMesh, cell: usize) -> f64 {
        let c = &mesh.cells[cell];
        let s: f64 = c
            .faces
            .iter()
            .zip(&self.split[self.range(cell)])
            .map(|(&e, v)| mesh.faces[e].measure * v)
            .sum();
        s / c.perimeter
    }
}

struct CellUpdate {
    u: f64,
    flux: Vec<f64>,
    flux_self: Vec<f64>,
    tilde: Vec<f64>,
    split: Vec<f64>,
    correction: f64,
}

pub struct Scheme {
    mesh: Arc<SphereMesh>,
    flux: Arc<dyn FluxField>,
    nf: NumericalFlux,
    options: SchemeOptions,
    offsets: Arc<[usize]>,
    lipschitz: f64,
    tau: f64,
}

impl Scheme {
    /// A scheme whose monotonicity and CFL data hold on the state box `bounds`.
    pub fn new(
        mesh: Arc<SphereMesh>,
        flux: Arc<dyn FluxField>,
        options: SchemeOptions,
        bounds: (f64, f64),
    ) -> Result<Self, FvmError> {
        options.validate()?;
        if !(bounds.0 <= bounds.1 && bounds.0.is_finite() && bounds.1.is_finite()) {
            return Err(FvmError::Config(format!("state box {bounds:?}")));
        }
        let nf = NumericalFlux::new(options.kind, options.lf_factor, flux.clone(), mesh.clone(), bounds);
        let mut offsets = Vec::with_capacity(mesh.cells.len() + 1);
        offsets.push(0);
        for c in &mesh.cells {
            offsets.push(offsets.last().unwrap() + c.faces.len());
        }
        let lipschitz = flux.lipschitz(bounds.0, bounds.1);
        let tau = cfl_timestep(&mesh, lipschitz, &nf, &options)?;
        Ok(Self {
            mesh,
            flux,
            nf,
            options,
            offsets: offsets.into(),
            lipschitz,
            tau,
        })
    }

    /// Box `[−B, B]` from the a priori bound `B = (max|u⁰| + C₁T)e^{C₂T}`,
    /// widened to hold `state` itself.
    pub fn for_run(
        flux: Arc<dyn FluxField>,
        options: SchemeOptions,
        state: &SolverState,
        t_end: f64,
    ) -> Result<Self, FvmError> {
        let m0 = state.max_abs();
        let growth = GrowthBound::estimate(flux.as_ref(), m0);
        let b = growth.bound(m0, t_end.max(0.0));
        Self::new(state.mesh.clone(), flux, options, (-b, b))
    }

    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn flux(&self) -> &Arc<dyn FluxField> {
        &self.flux
    }

    pub fn numerical_flux(&self) -> &NumericalFlux {
        &self.nf
    }

    pub fn options(&self) -> &SchemeOptions {
        &self.options
    }

    pub fn offsets(&self) -> &Arc<[usize]> {
        &self.offsets
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.nf.bounds()
    }

    /// `sup |f_u|_g` on the state box.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// The CFL step for the current box.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Grow the state box to cover `u`; returns whether it changed.
    pub fn ensure_bounds(&mut self, u: &[f64]) -> Result<bool, FvmError> {
        let (lo, hi) = self.nf.bounds();
        let umin = u.iter().copied().fold(lo, f64::min);
        let umax = u.iter().copied().fold(hi, f64::max);
        if umin >= lo && umax <= hi {
            return Ok(false);
        }
        let pad = 0.05 * (umax - umin).max(f64::EPSILON);
        let new = (
            if umin < lo { umin - pad } else { lo },
            if umax > hi { umax + pad } else { hi },
        );
        log::warn!("state left the box [{lo}, {hi}]; expanding to [{}, {}]", new.0, new.1);
        self.nf.set_bounds(new);
        self.lipschitz = self.flux.lipschitz(new.0, new.1);
        self.tau = cfl_timestep(&self.mesh, self.lipschitz, &self.nf, &self.options)?;
        Ok(true)
    }

    /// One explicit step of size `tau`.
    pub fn step(
        &self,
        state: &SolverState,
        tau: f64,
    ) -> Result<(SolverState, ConvexDecomposition), FvmError> {
        let mesh = &self.mesh;
        let u = &state.u;
        let nf = &self.nf;
        let faces: Vec<(f64, f64, f64)> = mesh
            .faces
            .par_iter()
            .map(|f| {
                let (ua, ub) = (u[f.cell_a], u[f.cell_b]);
                (nf.eval(f.id, ua, ub), nf.face_flux(f.id, ua), nf.face_flux(f.id, ub))
            })
            .collect();
        let cells: Vec<CellUpdate> = mesh
            .cells
            .par_iter()
            .map(|c| {
                let uk = u[c.id];
                let n = c.faces.len();
                let mut flux = Vec::with_capacity(n);
                let mut flux_self = Vec::with_capacity(n);
                let (mut sum, mut self_sum) = (0.0, 0.0);
                for &e in &c.faces {
                    let (h, fa, fb) = faces[e];
                    let (fk, fs) = if mesh.faces[e].cell_a == c.id {
                        (h, fa)
                    } else {
                        (-h, -fb)
                    };
                    let m = mesh.faces[e].measure;
                    sum += m * fk;
                    self_sum += m * fs;
                    flux.push(fk);
                    flux_self.push(fs);
                }
                let ratio = tau / c.area;
                let correction = ratio * self_sum;
                let lam = tau * c.perimeter / c.area;
                let tilde: Vec<f64> = flux
                    .iter()
                    .zip(&flux_self)
                    .map(|(fk, fs)| uk - lam * (fk - fs))
                    .collect();
                let split = tilde.iter().map(|t| t - correction).collect();
                CellUpdate {
                    u: uk - ratio * sum,
                    flux,
                    flux_self,
                    tilde,
                    split,
                    correction,
                }
            })
            .collect();
        if let Some(cell) = cells.iter().position(|c| !c.u.is_finite()) {
            return Err(FvmError::NonFinite {
                cell,
                step: state.n + 1,
            });
        }
        let total = *self.offsets.last().unwrap();
        let mut dec = ConvexDecomposition {
            tau,
            u_old: u.clone(),
            offsets: self.offsets.clone(),
            flux: Vec::with_capacity(total),
            flux_self: Vec::with_capacity(total),
            tilde: Vec::with_capacity(total),
            split: Vec::with_capacity(total),
            div_correction: Vec::with_capacity(cells.len()),
            div_correction_quadrature: None,
        };
        let mut new_u = Vec::with_capacity(cells.len());
        for c in cells {
            new_u.push(c.u);
            dec.flux.extend(c.flux);
            dec.flux_self.extend(c.flux_self);
            dec.tilde.extend(c.tilde);
            dec.split.extend(c.split);
            dec.div_correction.push(c.correction);
        }
        if self.options.quadrature_correction {
            dec.div_correction_quadrature = Some(self.quadrature_correction(u, tau));
        }
        let next = SolverState {
            mesh: mesh.clone(),
            u: new_u,
            t: state.t + tau,
            n: state.n + 1,
            tau,
        };
        Ok((next, dec))
    }

    fn quadrature_correction(&self, u: &[f64], tau: f64) -> Vec<f64> {
        self.mesh
            .cells
            .par_iter()
            .map(|c| {
                let s: f64 = c
                    .nodes
                    .iter()
                    .map(|(x, w)| w * self.flux.divergence(u[c.id], x).unwrap_or(f64::NAN))
                    .sum();
                tau * s / c.area
            })
            .collect()
    }

    /// Step from `state0` to `t_end`, shortening the last step to land on it.
    /// `hook` sees the scheme and every new state with the decomposition that
    /// produced it.
    pub fn run<H>(
        &mut self,
        state0: SolverState,
        t_end: f64,
        mut hook: H,
    ) -> Result<SolverState, FvmError>
    where
        H: FnMut(&Scheme, &SolverState, &ConvexDecomposition) -> Result<(), String>,
    {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(FvmError::BadTime(t_end));
        }
        let mut state = state0;
        while state.t < t_end {
            self.ensure_bounds(&state.u)?;
            let remaining = t_end - state.t;
            let last = remaining <= self.tau * (1.0 + 1e-12);
            let tau = if last { remaining } else { self.tau };
            let (mut next, dec) = self.step(&state, tau)?;
            if last {
                next.t = t_end;
            }
            hook(self, &next, &dec).map_err(FvmError::Hook)?;
            state = next;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{PI, TAU};

    use proptest::prelude::*;

    use super::*;
    use crate::expr::Formula;
    use crate::flux::{from_potential, LatitudeBurgers, SolidRotation};

    fn mesh(np: usize, nt: usize, tmin: f64) -> Arc<SphereMesh> {
        Arc::new(SphereMesh::build_latlon(np, nt, tmin).unwrap())
    }

    fn fluxes() -> Vec<Arc<dyn FluxField>> {
        vec![
            Arc::new(SolidRotation { omega: 1.0 }),
            Arc::new(LatitudeBurgers { c0: 1.0, c1: 0.5 }),
            Arc::new(
                from_potential(&Formula::parse("u^2*n3/2 + u*n1", &["u", "n1", "n2", "n3"]).unwrap())
                    .unwrap(),
            ),
        ]
    }

    /// Cosine bell of great-circle radius 2 centred on `(π, π/2)`.
    fn bump(x: &Point<2>) -> f64 {
        let d = (x[1].sin() * (x[0] - PI).cos()).clamp(-1.0, 1.0).acos();
        if d < 2.0 {
            0.5 + 0.5 * (0.5 * PI * d).cos()
        } else {
            0.0
        }
    }

    fn wavy(x: &Point<2>) -> f64 {
        (2.0 * x[0]).sin() * x[1].sin() + 0.3 * x[1].cos()
    }

    #[test]
    fn init_examples() {
        let m = mesh(8, 5, 0.2);
        let s = init_state(m.clone(), |_| 2.5).unwrap();
        assert!(s.u.iter().all(|&v| (v - 2.5).abs() < 1e-14));
        let s = init_state(m.clone(), |x| x[1].cos()).unwrap();
        for j in 0..m.n_theta {
            let k = m.band_cell(3, j);
            let (t0, t1) = (m.theta_line(j), m.theta_line(j + 1));
            let expect = 0.5 * (t0.cos().powi(2) - t1.cos().powi(2)) * m.dphi / m.cells[k].area;
            assert!((s.u[k] - expect).abs() < 1e-13, "{} {}", s.u[k], expect);
        }
        let s = init_state(m.clone(), |x| x[0].sin()).unwrap();
        let mass: f64 = s.u.iter().zip(&m.cells).map(|(u, c)| u * c.area).sum();
        assert!(mass.abs() < 1e-13);
        assert_eq!(
            init_state(m, |x| if x[1] > 3.0 { f64::NAN } else { 0.0 }).unwrap_err(),
            FvmError::Input { cell: 41 }
        );
    }

    #[test]
    fn cfl_examples() {
        let rot: Arc<dyn FluxField> = Arc::new(SolidRotation { omega: 1.0 });
        let m = mesh(16, 8, 0.2);
        let opts = SchemeOptions {
            kind: FluxKind::Godunov,
            ..SchemeOptions::default()
        };
        let s = Scheme::new(m.clone(), rot.clone(), opts.clone(), (-1.0, 1.0)).unwrap();
        let ratio = m.cells.iter().map(|c| c.area / c.perimeter).fold(f64::INFINITY, f64::min);
        assert!((s.tau() - 0.5 * ratio).abs() < 1e-15);

        let fine = Scheme::new(mesh(32, 16, 0.2), rot.clone(), opts.clone(), (-1.0, 1.0)).unwrap();
        let q = s.tau() / fine.tau();
        // the polar rows keep this above 2 on coarse meshes
        assert!((2.0..2.8).contains(&q), "{q}");

        let zero: Arc<dyn FluxField> = Arc::new(SolidRotation { omega: 0.0 });
        assert_eq!(
            Scheme::new(m.clone(), zero.clone(), opts.clone(), (-1.0, 1.0)).err(),
            Some(FvmError::DegenerateCfl)
        );
        let floored = SchemeOptions {
            tau_floor: Some(0.01),
            ..opts.clone()
        };
        assert_eq!(Scheme::new(m.clone(), zero, floored, (-1.0, 1.0)).unwrap().tau(), 0.01);
        for bad in [0.0, 1.0, -0.2] {
            let o = SchemeOptions {
                safety: bad,
                ..opts.clone()
            };
            assert!(matches!(
                Scheme::new(m.clone(), rot.clone(), o, (-1.0, 1.0)),
                Err(FvmError::Config(_))
            ));
        }
    }

    #[test]
    fn constant_state_is_steady_and_mass_is_conserved() {
        let m = mesh(12, 6, 0.15);
        for f in fluxes() {
            for kind in FluxKind::ALL {
                let scheme = Scheme::new(m.clone(), f.clone(), SchemeOptions::with_kind(kind), (-1.0, 1.0))
                    .unwrap();
                let c = init_state(m.clone(), |_| 0.7).unwrap();
                let (next, _) = scheme.step(&c, scheme.tau()).unwrap();
                // the 3-point face rule integrates the separable fields' normal
                // components exactly; the potential flux only to quadrature accuracy
                let tol = if f.separable().is_some() { 1e-14 } else { 1e-6 };
                let drift = next.u.iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);
                assert!(drift < tol, "{kind:?} {} {drift}", f.describe());

                let s = init_state(m.clone(), wavy).unwrap();
                let (next, dec) = scheme.step(&s, scheme.tau()).unwrap();
                let mass = |u: &[f64]| -> f64 { u.iter().zip(&m.cells).map(|(u, c)| u * c.area).sum() };
                let (m0, m1) = (mass(&s.u), mass(&next.u));
                assert!((m1 - m0).abs() <= 1e-12 * (1.0 + m0.abs()), "{m0} {m1}");
                for k in 0..m.cells.len() {
                    assert!((dec.reconstruct(&m, k) - next.u[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn update_is_a_convex_combination() {
        let m = mesh(10, 6, 0.2);
        for f in fluxes() {
            for kind in FluxKind::ALL {
                let s0 = init_state(m.clone(), wavy).unwrap();
                let scheme = Scheme::for_run(f.clone(), SchemeOptions::with_kind(kind), &s0, 1.0).unwrap();
                let (next, dec) = scheme.step(&s0, scheme.tau()).unwrap();
                for c in &m.cells {
                    let uk = s0.u[c.id];
                    let mut own = 1.0;
                    let mut combo = 0.0;
                    for (slot, &e) in dec.range(c.id).zip(&c.faces) {
                        let v = s0.u[m.faces[e].neighbour_of(c.id)];
                        let a = if v == uk {
                            0.0
                        } else {
                            -dec.tau * m.faces[e].measure / c.area * (dec.flux[slot] - dec.flux_self[slot])
                                / (v - uk)
                        };
                        assert!((-1e-12..=1.0 + 1e-12).contains(&a), "{a}");
                        own -= a;
                        combo += a * v;
                    }
                    assert!((-1e-12..=1.0).contains(&own), "{own}");
                    let rebuilt = own * uk + combo - dec.div_correction[c.id];
                    assert!((rebuilt - next.u[c.id]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn divergence_correction_matches_quadrature() {
        let m = mesh(12, 6, 0.2);
        for f in fluxes() {
            let s0 = init_state(m.clone(), wavy).unwrap();
            let opts = SchemeOptions {
                quadrature_correction: true,
                ..SchemeOptions::with_kind(FluxKind::Godunov)
            };
            let scheme = Scheme::for_run(f.clone(), opts, &s0, 1.0).unwrap();
            let (_, dec) = scheme.step(&s0, scheme.tau()).unwrap();
            let q = dec.div_correction_quadrature.as_ref().unwrap();
            for (a, b) in dec.div_correction.iter().zip(q) {
                assert!((a - b).abs() < 1e-6, "{a} {b}");
                if f.separable().is_some() {
                    assert!(a.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn run_lands_on_final_time() {
        let m = mesh(8, 4, 0.3);
        let f: Arc<dyn FluxField> = Arc::new(SolidRotation { omega: 1.0 });
        let s0 = init_state(m, bump).unwrap();
        let mut scheme = Scheme::for_run(f, SchemeOptions::with_kind(FluxKind::Godunov), &s0, 1.0).unwrap();
        let same = scheme.run(s0.clone(), 0.0, |_, _, _| Err("never".into())).unwrap();
        assert_eq!(same.u, s0.u);
        assert_eq!(same.n, 0);
        let tau = scheme.tau();
        let t_end = 7.5 * tau;
        let mut calls = 0;
        let done = scheme
            .run(s0, t_end, |_, s, d| {
                calls += 1;
                assert_eq!(s.tau, d.tau);
                Ok(())
            })
            .unwrap();
        assert_eq!(calls, 8);
        assert_eq!(done.n, 8);
        assert_eq!(done.t, t_end);
        assert!((done.tau - 0.5 * tau).abs() < 1e-12 * tau);
        assert!(matches!(scheme.run(done, -1.0, |_, _, _| Ok(())), Err(FvmError::BadTime(_))));
    }

    #[test]
    fn box_expands_when_state_leaves_it() {
        let m = mesh(8, 4, 0.3);
        let f: Arc<dyn FluxField> = Arc::new(LatitudeBurgers { c0: 1.0, c1: 0.0 });
        let mut scheme = Scheme::new(m.clone(), f, SchemeOptions::default(), (-0.1, 0.1)).unwrap();
        let tau0 = scheme.tau();
        let s0 = init_state(m, wavy).unwrap();
        assert!(scheme.ensure_bounds(&s0.u).unwrap());
        assert!(scheme.bounds().0 < s0.min() && scheme.bounds().1 > s0.max());
        assert!(scheme.tau() < tau0);
        assert!(!scheme.ensure_bounds(&s0.u).unwrap());
    }

    #[test]
    fn rotation_of_a_full_period_returns_near_the_start() {
        let f: Arc<dyn FluxField> = Arc::new(SolidRotation { omega: 1.0 });
        let mut errs = Vec::new();
        for (np, nt) in [(32, 16), (64, 32)] {
            let m = mesh(np, nt, 0.1);
            let s0 = init_state(m.clone(), bump).unwrap();
            let opts = SchemeOptions {
                safety: 0.9,
                ..SchemeOptions::with_kind(FluxKind::Godunov)
            };
            let mut scheme = Scheme::for_run(f.clone(), opts, &s0, TAU).unwrap();
            let done = scheme.run(s0.clone(), TAU, |_, _, _| Ok(())).unwrap();
            let err: f64 = done
                .u
                .iter()
                .zip(&s0.u)
                .zip(&m.cells)
                .map(|((a, b), c)| (a - b).abs() * c.area)
                .sum();
            errs.push(err);
        }
        assert!(errs[1] < errs[0], "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 0.5, "{errs:?}");
    }

    fn l1(a: &[f64], b: &[f64], m: &SphereMesh) -> f64 {
        a.iter().zip(b).zip(&m.cells).map(|((x, y), c)| (x - y).abs() * c.area).sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn maximum_principle_and_l1_contraction(
            a in -1.0f64..1.0, b in -1.0f64..1.0, k in 1usize..4,
            which in 0usize..2, kind in 0usize..3, safety in 0.5f64..0.99,
        ) {
            let m = mesh(10, 5, 0.2);
            let f = fluxes()[which].clone();
            let opts = SchemeOptions { safety, ..SchemeOptions::with_kind(FluxKind::ALL[kind]) };
            let u0 = move |x: &Point<2>| a * (k as f64 * x[0]).sin() * x[1].sin() + b * x[1].cos();
            let v0 = move |x: &Point<2>| b * (x[0] + a).cos() * x[1].sin().powi(k as i32);
            let s = init_state(m.clone(), u0).unwrap();
            let t = init_state(m.clone(), v0).unwrap();
            let lo = s.min().min(t.min());
            let hi = s.max().max(t.max());
            let scheme = Scheme::new(m.clone(), f, opts, (lo - 0.01, hi + 0.01)).unwrap();
            let (mut s, mut t) = (s, t);
            for _ in 0..5 {
                let (s1, _) = scheme.step(&s, scheme.tau()).unwrap();
                let (t1, _) = scheme.step(&t, scheme.tau()).unwrap();
                prop_assert!(s1.max_abs() <= s.max_abs() + 1e-12);
                prop_assert!(s1.max() <= s.max() + 1e-12 && s1.min() >= s.min() - 1e-12);
                prop_assert!(l1(&s1.u, &t1.u, &m) <= l1(&s.u, &t.u, &m) + 1e-12);
                s = s1;
                t = t1;
            }
        }
    }
}
