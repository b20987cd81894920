use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::flux::{velocity, Entropy, FluxField, Psi};
use crate::mesh::SphereMesh;
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxKind {
    LaxFriedrichs,
    EngquistOsher,
    Godunov,
}

impl FluxKind {
    pub const ALL: [FluxKind; 3] = [
        FluxKind::LaxFriedrichs,
        FluxKind::EngquistOsher,
        FluxKind::Godunov,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FluxKind::LaxFriedrichs => "lax_friedrichs",
            FluxKind::EngquistOsher => "engquist_osher",
            FluxKind::Godunov => "godunov",
        }
    }
}

const BRACKETS: usize = 64;
const SLOPE_SAMPLES: usize = 65;

/// Monotone two-point fluxes `f_{e,K}` built on the face averages
/// `F̄_e(u) = f_{e,a}(u, u)`, where `a = cell_a` of the face.
///
/// Every flux is stored in the orientation of `cell_a`; the value seen from
/// `cell_b` is `f_{e,b}(u, v) = −f_{e,a}(v, u)`.
#[derive(Clone)]
pub struct NumericalFlux {
    pub kind: FluxKind,
    pub lf_factor: f64,
    flux: Arc<dyn FluxField>,
    mesh: Arc<SphereMesh>,
    speeds: Option<(Psi, Vec<f64>)>,
    bounds: (f64, f64),
    slope: Vec<f64>,
    lambda: Vec<f64>,
    critical: Vec<Vec<f64>>,
}

impl NumericalFlux {
    pub fn new(
        kind: FluxKind,
        lf_factor: f64,
        flux: Arc<dyn FluxField>,
        mesh: Arc<SphereMesh>,
        bounds: (f64, f64),
    ) -> Self {
        let speeds = flux.separable().map(|psi| {
            let s = (0..mesh.faces.len())
                .map(|e| mesh.face_normal_average(e, |x| velocity(flux.as_ref(), psi, x)))
                .collect();
            (psi, s)
        });
        let mut nf = Self {
            kind,
            lf_factor,
            flux,
            mesh,
            speeds,
            bounds,
            slope: Vec::new(),
            lambda: Vec::new(),
            critical: Vec::new(),
        };
        nf.set_bounds(bounds);
        nf
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn flux(&self) -> &Arc<dyn FluxField> {
        &self.flux
    }

    /// Separable face speeds `s_e` with `F̄_e(u) = s_e ψ(u)`.
    pub fn separable_speeds(&self) -> Option<(Psi, &[f64])> {
        self.speeds.as_ref().map(|(p, s)| (*p, s.as_slice()))
    }

    /// Re-derive the per-face slope bounds and LF dissipation on `[lo, hi]`.
    pub fn set_bounds(&mut self, bounds: (f64, f64)) {
        self.bounds = bounds;
        let (lo, hi) = bounds;
        self.slope = (0..self.mesh.faces.len())
            .map(|e| match &self.speeds {
                Some((psi, s)) => s[e].abs() * psi.deriv(lo).abs().max(psi.deriv(hi).abs()),
                None => (0..SLOPE_SAMPLES)
                    .map(|k| {
                        let u = lo + (hi - lo) * k as f64 / (SLOPE_SAMPLES - 1) as f64;
                        self.face_slope(e, u).abs()
                    })
                    .fold(0.0, f64::max),
            })
            .collect();
        self.lambda = self.slope.iter().map(|s| self.lf_factor * s).collect();
        self.critical = Vec::new();
        if self.speeds.is_none() {
            self.critical = (0..self.mesh.faces.len())
                .map(|e| self.scan_critical(e, lo, hi))
                .collect();
        }
    }

    /// `F̄_e(u)`, oriented from `cell_a`.
    pub fn face_flux(&self, e: usize, u: f64) -> f64 {
        match &self.speeds {
            Some((psi, s)) => s[e] * psi.value(u),
            None => self.mesh.face_normal_average(e, |x| self.flux.eval(u, x)),
        }
    }

    /// `F̄_e'(u)`.
    pub fn face_slope(&self, e: usize, u: f64) -> f64 {
        match &self.speeds {
            Some((psi, s)) => s[e] * psi.deriv(u),
            None => self.mesh.face_normal_average(e, |x| self.flux.du(u, x)),
        }
    }

    /// `sup |F̄_e'|` over the state box.
    pub fn slope_bound(&self, e: usize) -> f64 {
        self.slope[e]
    }

    /// LF dissipation coefficient `λ_e`.
    pub fn lambda(&self, e: usize) -> f64 {
        self.lambda[e]
    }

    /// Upper bound of `|f_{e,K}(u, v) − f_{e,K}(v, v)| / |u − v|` on the box.
    pub fn incremental_bound(&self, e: usize) -> f64 {
        match self.kind {
            FluxKind::LaxFriedrichs => 0.5 * (self.slope[e] + self.lambda[e]),
            _ => self.slope[e],
        }
    }

    /// `f_{e,a}(u, v)` with `u` the state in `cell_a`.
    pub fn eval(&self, e: usize, u: f64, v: f64) -> f64 {
        if u == v {
            return self.face_flux(e, u);
        }
        match self.kind {
            FluxKind::LaxFriedrichs => {
                0.5 * (self.face_flux(e, u) + self.face_flux(e, v)) - 0.5 * self.lambda[e] * (v - u)
            }
            FluxKind::Godunov => {
                if u <= v {
                    self.extremum(e, u, v, true)
                } else {
                    self.extremum(e, v, u, false)
                }
            }
            FluxKind::EngquistOsher => match &self.speeds {
                // split forms F⁺(u) + F⁻(v), monotone even after rounding
                Some((Psi::Linear, s)) => s[e].max(0.0) * u + s[e].min(0.0) * v,
                Some((Psi::HalfSquare, s)) => {
                    let s = s[e];
                    let (up, down) = if s >= 0.0 { (u.max(0.0), v.min(0.0)) } else { (u.min(0.0), v.max(0.0)) };
                    s * (0.5 * (up * up + down * down))
                }
                None => self.face_flux(e, u) + self.eo_integral(e, u, v),
            },
        }
    }

    /// `f_{e,K}(u, v)` for the cell `cell` adjacent to face `e`.
    pub fn from_side(&self, e: usize, cell: usize, u: f64, v: f64) -> f64 {
        if cell == self.mesh.faces[e].cell_a {
            self.eval(e, u, v)
        } else {
            -self.eval(e, v, u)
        }
    }

    fn extremum(&self, e: usize, lo: f64, hi: f64, min: bool) -> f64 {
        let pick = |a: f64, b: f64| if min { a.min(b) } else { a.max(b) };
        let mut best = pick(self.face_flux(e, lo), self.face_flux(e, hi));
        match &self.speeds {
            Some((Psi::Linear, _)) => {}
            Some((Psi::HalfSquare, _)) => {
                if lo < 0.0 && 0.0 < hi {
                    best = pick(best, self.face_flux(e, 0.0));
                }
            }
            None => {
                for c in self.critical_points(e, lo, hi) {
                    best = pick(best, self.face_flux(e, c));
                }
            }
        }
        best
    }

    /// Sign changes of `F̄_e'` strictly inside `(lo, hi)`, from the cache when
    /// the interval lies in the state box.
    fn critical_points(&self, e: usize, lo: f64, hi: f64) -> Vec<f64> {
        if lo >= self.bounds.0 && hi <= self.bounds.1 {
            if let Some(c) = self.critical.get(e) {
                return c.iter().copied().filter(|&x| lo < x && x < hi).collect();
            }
        }
        self.scan_critical(e, lo, hi)
    }

    fn scan_critical(&self, e: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if !(hi > lo) {
            return out;
        }
        let step = (hi - lo) / BRACKETS as f64;
        let mut a = lo;
        let mut da = self.face_slope(e, a);
        for k in 1..=BRACKETS {
            let b = if k == BRACKETS { hi } else { lo + step * k as f64 };
            let db = self.face_slope(e, b);
            if da * db < 0.0 {
                out.push(self.bisect(e, a, b, da));
            } else if db == 0.0 && da != 0.0 && k < BRACKETS {
                out.push(b);
            }
            a = b;
            da = db;
        }
        out
    }

    fn bisect(&self, e: usize, mut a: f64, mut b: f64, da: f64) -> f64 {
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let dm = self.face_slope(e, m);
            if (dm < 0.0) == (da < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// `∫_u^v min(F̄_e', 0)` for a general flux. F̄ is monotone between
    /// critical points: decreasing pieces contribute their increment,
    /// increasing ones nothing.
    fn eo_integral(&self, e: usize, u: f64, v: f64) -> f64 {
        let (lo, hi, sign) = if u <= v { (u, v, 1.0) } else { (v, u, -1.0) };
        let mut knots = vec![lo];
        knots.extend(self.critical_points(e, lo, hi));
        knots.push(hi);
        let mut sum = 0.0;
        for w in knots.windows(2) {
            if self.face_slope(e, 0.5 * (w[0] + w[1])) < 0.0 {
                sum += self.face_flux(e, w[1]) - self.face_flux(e, w[0]);
            }
        }
        sign * sum
    }

    /// `F̄_{U,e}(u) = ∫_0^u U'(w) F̄_e'(w) dw` (closed forms for Kruzkov and linear `U`).
    pub fn entropy_face_flux(&self, e: usize, entropy: &Entropy, u: f64) -> f64 {
        match entropy {
            Entropy::Kruzkov(k) => {
                let d = self.face_flux(e, u) - self.face_flux(e, *k);
                if u > *k {
                    d
                } else if u < *k {
                    -d
                } else {
                    0.0
                }
            }
            Entropy::Linear => self.face_flux(e, u),
            Entropy::Quadratic if self.speeds.is_some() => {
                let (psi, s) = self.speeds.as_ref().unwrap();
                match psi {
                    Psi::Linear => s[e] * 0.5 * u * u,
                    Psi::HalfSquare => s[e] * u * u * u / 3.0,
                }
            }
            _ => integrate(
                |w| entropy.deriv(w) * self.face_slope(e, w),
                0.0,
                u,
                1e-14,
            ),
        }
    }

    /// Entropy companion `F_{e,a}(a, b)` of `f_{e,a}`.
    ///
    /// Kruzkov: `f(a∨k, b∨k) − f(a∧k, b∧k)`. A smooth `U` is the
    /// superposition `½∫ U''(k) |u − k| dk` plus an affine part, which gives
    /// `F̄_U(a) + ½(U'(a) + U'(b)) Δ + ½ ∫_b^a U''(k) [f(a,k) − f(k,b) − F̄(a) + F̄(k)] dk`
    /// with `Δ = f(a, b) − F̄(a)`.
    pub fn entropy_eval(&self, e: usize, entropy: &Entropy, a: f64, b: f64) -> f64 {
        match entropy {
            Entropy::Kruzkov(k) => self.eval(e, a.max(*k), b.max(*k)) - self.eval(e, a.min(*k), b.min(*k)),
            Entropy::Linear => self.eval(e, a, b),
            _ => {
                let base = self.entropy_face_flux(e, entropy, a);
                if a == b {
                    return base;
                }
                let fa = self.face_flux(e, a);
                let delta = self.eval(e, a, b) - fa;
                let scale = 1e-15 * (1.0 + self.slope[e] * (a - b).abs() * (a.abs() + b.abs() + 1.0));
                let tail = integrate(
                    |k| {
                        entropy.second(k)
                            * (self.eval(e, a, k) - self.eval(e, k, b) - fa + self.face_flux(e, k))
                    },
                    b,
                    a,
                    scale,
                );
                base + 0.5 * (entropy.deriv(a) + entropy.deriv(b)) * delta + 0.5 * tail
            }
        }
    }

    /// `F_{e,K}(u, v)` for the cell `cell` adjacent to `e`.
    pub fn entropy_from_side(&self, e: usize, cell: usize, entropy: &Entropy, u: f64, v: f64) -> f64 {
        if cell == self.mesh.faces[e].cell_a {
            self.entropy_eval(e, entropy, u, v)
        } else {
            -self.entropy_eval(e, entropy, v, u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{from_potential, LatitudeBurgers, SolidRotation};
    use crate::expr::Formula;
    use crate::mesh::face_average_normal_flux;

    fn setups() -> Vec<(Arc<dyn FluxField>, (f64, f64))> {
        vec![
            (Arc::new(SolidRotation { omega: 1.0 }), (-1.0, 1.0)),
            (Arc::new(LatitudeBurgers { c0: 1.0, c1: 0.5 }), (-1.0, 1.5)),
            (
                Arc::new(
                    from_potential(
                        &Formula::parse("u^2*n3/2 + u*n1", &["u", "n1", "n2", "n3"]).unwrap(),
                    )
                    .unwrap(),
                ),
                (-1.0, 1.0),
            ),
        ]
    }

    #[test]
    fn consistency_conservation_monotonicity() {
        let mesh = Arc::new(SphereMesh::build_latlon(8, 4, 0.2).unwrap());
        for (f, bounds) in setups() {
            for kind in FluxKind::ALL {
                let nf = NumericalFlux::new(kind, 1.01, f.clone(), mesh.clone(), bounds);
                let grid: Vec<f64> = (0..11)
                    .map(|k| bounds.0 + (bounds.1 - bounds.0) * k as f64 / 10.0)
                    .collect();
                for face in mesh.faces.iter().step_by(3) {
                    let (a, b) = (face.cell_a, face.cell_b);
                    for &u in &grid {
                        let c = nf.from_side(face.id, b, u, u);
                        assert_eq!(c, face_average_normal_flux(&mesh, face.id, b, f.as_ref(), u));
                        for &v in &grid {
                            assert_eq!(nf.from_side(face.id, a, u, v), -nf.from_side(face.id, b, v, u));
                            let h = 1e-3;
                            let d1 = nf.eval(face.id, (u + h).min(bounds.1), v)
                                - nf.eval(face.id, (u + h).min(bounds.1) - h, v);
                            let d2 = nf.eval(face.id, u, (v + h).min(bounds.1))
                                - nf.eval(face.id, u, (v + h).min(bounds.1) - h);
                            assert!(d1 >= -1e-12, "{kind:?} {} {u} {v} d1 {d1}", f.describe());
                            assert!(d2 <= 1e-12, "{kind:?} d2 {d2}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn lf_with_exact_speed_is_upwind_for_linear_flux() {
        let mesh = Arc::new(SphereMesh::build_latlon(8, 4, 0.2).unwrap());
        let f: Arc<dyn FluxField> = Arc::new(SolidRotation { omega: 1.0 });
        let nf = NumericalFlux::new(FluxKind::LaxFriedrichs, 1.0, f, mesh.clone(), (-1.0, 1.0));
        let (_, s) = nf.separable_speeds().unwrap();
        for face in &mesh.faces {
            let (u, v) = (0.3, -0.8);
            let upwind = if s[face.id] >= 0.0 { s[face.id] * u } else { s[face.id] * v };
            assert!((nf.eval(face.id, u, v) - upwind).abs() < 1e-15);
        }
    }

    #[test]
    fn general_godunov_and_eo_match_separable_closed_forms() {
        // the same Burgers flux, once with the separable shortcut and once without
        struct Opaque(LatitudeBurgers);
        impl FluxField for Opaque {
            fn eval(&self, u: f64, x: &crate::geometry::Point<2>) -> crate::geometry::Point<2> {
                self.0.eval(u, x)
            }
            fn du(&self, u: f64, x: &crate::geometry::Point<2>) -> crate::geometry::Point<2> {
                self.0.du(u, x)
            }
            fn describe(&self) -> String {
                "opaque".into()
            }
        }
        let mesh = Arc::new(SphereMesh::build_latlon(6, 3, 0.3).unwrap());
        let b = LatitudeBurgers { c0: 1.0, c1: 0.7 };
        for kind in [FluxKind::Godunov, FluxKind::EngquistOsher] {
            let fast = NumericalFlux::new(kind, 1.01, Arc::new(b), mesh.clone(), (-1.0, 1.0));
            let slow = NumericalFlux::new(kind, 1.01, Arc::new(Opaque(b)), mesh.clone(), (-1.0, 1.0));
            for e in 0..mesh.faces.len() {
                for (u, v) in [(-0.7, 0.9), (0.9, -0.7), (0.2, 0.5), (-0.4, -0.1), (0.6, -0.2)] {
                    let d = (fast.eval(e, u, v) - slow.eval(e, u, v)).abs();
                    assert!(d < 1e-12, "{kind:?} {e} {u} {v} {d}");
                }
            }
        }
    }

    #[test]
    fn entropy_flux_is_consistent_and_conservative() {
        let mesh = Arc::new(SphereMesh::build_latlon(8, 4, 0.2).unwrap());
        let entropies = [Entropy::Quadratic, Entropy::Kruzkov(0.25), Entropy::Linear];
        for (f, bounds) in setups() {
            for kind in FluxKind::ALL {
                let nf = NumericalFlux::new(kind, 1.01, f.clone(), mesh.clone(), bounds);
                for face in mesh.faces.iter().step_by(5) {
                    for ent in &entropies {
                        for (u, v) in [(-0.5, 0.75), (0.9, 0.1)] {
                            let g_uv = nf.entropy_from_side(face.id, face.cell_a, ent, u, v);
                            let g_vu = nf.entropy_from_side(face.id, face.cell_b, ent, v, u);
                            assert_eq!(g_uv, -g_vu);
                            let g_uu = nf.entropy_eval(face.id, ent, u, u);
                            let direct = nf.entropy_face_flux(face.id, ent, u)
                                - nf.entropy_face_flux(face.id, ent, ent.is_kruzkov().unwrap_or(0.0));
                            let shift = nf.entropy_face_flux(face.id, ent, ent.is_kruzkov().unwrap_or(0.0));
                            assert!((g_uu - direct - shift).abs() < 1e-14);
                        }
                    }
                }
            }
        }
    }
}
