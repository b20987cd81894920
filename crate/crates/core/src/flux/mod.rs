//! Flux fields `f(u, φ, θ)` on the sphere in intrinsic components
//! `(f^φ, f^θ)`, with entropy pairs and the compatibility checks against a
//! vector field `X`.

mod entropy;
mod registry;
mod tvd;

use std::fmt;
use std::sync::Arc;

use crate::expr::{ExprError, Formula};
use crate::geometry::{self, frame, Chart, GeometryError, Point, SphereChart, Vec3};

pub use entropy::{entropy_flux, Entropy, EntropyPair};
pub use registry::{build_flux, build_vector_field, FLUX_REGISTRY, FIELD_REGISTRY};
pub use tvd::{tvd_compatibility, TVDReport, Verdict, DEFAULT_TVD_TOLERANCE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FluxError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("entropy is not convex: U''({u}) = {second}")]
    NonConvex { u: f64, second: f64 },
    #[error("vector field vanishes at (phi, theta) = ({phi}, {theta})")]
    DegenerateSample { phi: f64, theta: f64 },
    #[error("unknown {kind} '{name}'; registry: {registry}")]
    Unknown {
        kind: &'static str,
        name: String,
        registry: String,
    },
    #[error("parameter '{0}' is missing or has the wrong type")]
    BadParam(String),
}

/// `ψ` in a separable flux `f(u, x) = ψ(u) V(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    Linear,
    HalfSquare,
}

impl Psi {
    pub fn value(self, u: f64) -> f64 {
        match self {
            Psi::Linear => u,
            Psi::HalfSquare => 0.5 * u * u,
        }
    }

    pub fn deriv(self, u: f64) -> f64 {
        match self {
            Psi::Linear => 1.0,
            Psi::HalfSquare => u,
        }
    }
}

pub trait FluxField: Send + Sync {
    /// Intrinsic components `(f^φ, f^θ)` at `x = (φ, θ)`; NaN at the poles.
    fn eval(&self, u: f64, x: &Point<2>) -> Point<2>;

    fn du(&self, u: f64, x: &Point<2>) -> Point<2> {
        let h = 1e-4 * u.abs().max(1.0);
        let d1 = self.eval(u + h, x) - self.eval(u - h, x);
        let d2 = self.eval(u + 2.0 * h, x) - self.eval(u - 2.0 * h, x);
        (d1 * 8.0 - d2) / (12.0 * h)
    }

    /// `(∇·f)(u, x)` at frozen `u`.
    fn divergence(&self, u: f64, x: &Point<2>) -> Result<f64, GeometryError> {
        geometry::divergence(&SphereChart::default(), |y| self.eval(u, y), x)
    }

    /// `sup |f_u|_g` over states in `[lo, hi]` and the whole sphere.
    fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        sampled_lipschitz(self, lo, hi)
    }

    /// `Some(ψ)` when `f(u, x) = ψ(u) V(x)`.
    fn separable(&self) -> Option<Psi> {
        None
    }

    fn describe(&self) -> String;
}

impl fmt::Debug for dyn FluxField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// `V(x)` of a separable flux.
pub fn velocity(f: &dyn FluxField, psi: Psi, x: &Point<2>) -> Point<2> {
    f.eval(1.0, x) / psi.value(1.0)
}

/// Pole-checked evaluation.
pub fn evaluate(f: &dyn FluxField, u: f64, x: &Point<2>) -> Result<Point<2>, FluxError> {
    frame(x[0], x[1])?;
    Ok(f.eval(u, x))
}

fn sampled_lipschitz<F: FluxField + ?Sized>(f: &F, lo: f64, hi: f64) -> f64 {
    let chart = SphereChart::default();
    let mut best: f64 = 0.0;
    let nu = if hi > lo { 33 } else { 1 };
    for a in 0..nu {
        let u = if nu == 1 { lo } else { lo + (hi - lo) * a as f64 / (nu - 1) as f64 };
        for i in 0..64 {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            for j in 0..=64 {
                let theta = 1e-3 + (std::f64::consts::PI - 2e-3) * j as f64 / 64.0;
                let x = Point::<2>::new(phi, theta);
                best = best.max(geometry::norm(&chart, &x, &f.du(u, &x)));
            }
        }
    }
    best
}

fn sup_abs_over(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    (0..=4096)
        .map(|j| g(lo + (hi - lo) * j as f64 / 4096.0).abs())
        .fold(0.0, f64::max)
}

/// `f = (ω u, 0)`: rigid rotation about the polar axis.
#[derive(Debug, Clone, Copy)]
pub struct SolidRotation {
    pub omega: f64,
}

impl FluxField for SolidRotation {
    fn eval(&self, u: f64, _x: &Point<2>) -> Point<2> {
        Point::<2>::new(self.omega * u, 0.0)
    }

    fn du(&self, _u: f64, _x: &Point<2>) -> Point<2> {
        Point::<2>::new(self.omega, 0.0)
    }

    fn divergence(&self, _u: f64, x: &Point<2>) -> Result<f64, GeometryError> {
        SphereChart::default().validate(x)?;
        Ok(0.0)
    }

    fn lipschitz(&self, _lo: f64, _hi: f64) -> f64 {
        // |f_u|_g = |ω| sinθ, maximal on the equator
        self.omega.abs()
    }

    fn separable(&self) -> Option<Psi> {
        Some(Psi::Linear)
    }

    fn describe(&self) -> String {
        format!("solid_rotation(omega={})", self.omega)
    }
}

/// `f = (c(θ) u²/2, 0)` with `c(θ) = c0 + c1 cosθ`.
#[derive(Debug, Clone, Copy)]
pub struct LatitudeBurgers {
    pub c0: f64,
    pub c1: f64,
}

impl LatitudeBurgers {
    pub fn speed(&self, theta: f64) -> f64 {
        self.c0 + self.c1 * theta.cos()
    }
}

impl FluxField for LatitudeBurgers {
    fn eval(&self, u: f64, x: &Point<2>) -> Point<2> {
        Point::<2>::new(self.speed(x[1]) * 0.5 * u * u, 0.0)
    }

    fn du(&self, u: f64, x: &Point<2>) -> Point<2> {
        Point::<2>::new(self.speed(x[1]) * u, 0.0)
    }

    fn divergence(&self, _u: f64, x: &Point<2>) -> Result<f64, GeometryError> {
        SphereChart::default().validate(x)?;
        Ok(0.0)
    }

    fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        let umax = lo.abs().max(hi.abs());
        umax * sup_abs_over(0.0, std::f64::consts::PI, |t| self.speed(t) * t.sin())
    }

    fn separable(&self) -> Option<Psi> {
        Some(Psi::HalfSquare)
    }

    fn describe(&self) -> String {
        format!("latitude_burgers(c0={}, c1={})", self.c0, self.c1)
    }
}

type EmbeddedFn = Arc<dyn Fn(f64, &Vec3) -> Vec3 + Send + Sync>;

/// `f = n × Φ(u, n)`, with `Φ` given in Cartesian components at the point `n`.
#[derive(Clone)]
pub struct CrossFlux {
    phi: EmbeddedFn,
    phi_u: Option<EmbeddedFn>,
    label: String,
}

/// Build `f = n × Φ` from a vector function `Φ(u, n)`. Without `phi_u` the
/// `u`-derivative is taken by finite differences.
pub fn cross_flux(phi: EmbeddedFn, phi_u: Option<EmbeddedFn>) -> CrossFlux {
    CrossFlux {
        phi,
        phi_u,
        label: "cross_flux".into(),
    }
}

/// `f = n × Φ` with `Φ` the tangential gradient of `a(u, n)`. `a` is a
/// formula in the symbols `u, n1, n2, n3`.
pub fn from_potential(a: &Formula) -> Result<CrossFlux, FluxError> {
    for s in ["u", "n1", "n2", "n3"] {
        if !a.symbols().iter().any(|t| t == s) {
            return Err(FluxError::BadParam(format!("potential symbol {s}")));
        }
    }
    let grad: [Formula; 3] = [a.diff("n1"), a.diff("n2"), a.diff("n3")];
    let grad_u: [Formula; 3] = std::array::from_fn(|i| grad[i].diff("u"));
    let order = slots(a);
    let nsym = a.symbols().len();
    let make = |g: [Formula; 3]| -> EmbeddedFn {
        Arc::new(move |u: f64, n: &Vec3| {
            let mut vars = vec![0.0; nsym];
            vars[order[0]] = u;
            vars[order[1]] = n[0];
            vars[order[2]] = n[1];
            vars[order[3]] = n[2];
            let d = Vec3::new(g[0].eval(&vars), g[1].eval(&vars), g[2].eval(&vars));
            d - n * n.dot(&d)
        })
    };
    Ok(CrossFlux {
        phi: make(grad),
        phi_u: Some(make(grad_u)),
        label: format!("potential(a={a})"),
    })
}

fn slots(a: &Formula) -> [usize; 4] {
    let pos = |s: &str| a.symbols().iter().position(|t| t == s).unwrap();
    [pos("u"), pos("n1"), pos("n2"), pos("n3")]
}

impl CrossFlux {
    /// `Φ(u, n(x))`.
    pub fn phi(&self, u: f64, x: &Point<2>) -> Result<Vec3, GeometryError> {
        let fr = frame(x[0], x[1])?;
        Ok((self.phi)(u, &fr.n))
    }

    /// `n × Φ` in Cartesian components.
    pub fn embedded(&self, u: f64, x: &Point<2>) -> Result<Vec3, GeometryError> {
        let fr = frame(x[0], x[1])?;
        Ok(fr.n.cross(&(self.phi)(u, &fr.n)))
    }

    fn components(phi: &Vec3, x: &Point<2>) -> Point<2> {
        match frame(x[0], x[1]) {
            Ok(fr) => {
                let s = x[1].sin();
                Point::<2>::new(phi.dot(&fr.n_theta) / s, -phi.dot(&fr.n_phi) / s)
            }
            Err(_) => Point::<2>::repeat(f64::NAN),
        }
    }

    fn normal(x: &Point<2>) -> Vec3 {
        let (sp, cp) = x[0].sin_cos();
        let (st, ct) = x[1].sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

impl FluxField for CrossFlux {
    fn eval(&self, u: f64, x: &Point<2>) -> Point<2> {
        Self::components(&(self.phi)(u, &Self::normal(x)), x)
    }

    fn du(&self, u: f64, x: &Point<2>) -> Point<2> {
        let n = Self::normal(x);
        match &self.phi_u {
            Some(pu) => Self::components(&pu(u, &n), x),
            None => {
                let h = 1e-4 * u.abs().max(1.0);
                let d1 = (self.phi)(u + h, &n) - (self.phi)(u - h, &n);
                let d2 = (self.phi)(u + 2.0 * h, &n) - (self.phi)(u - 2.0 * h, &n);
                Self::components(&((d1 * 8.0 - d2) / (12.0 * h)), x)
            }
        }
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// `f = (f^φ, f^θ)` given as formulas in `u, phi, theta`.
#[derive(Debug, Clone)]
pub struct IntrinsicFlux {
    f: [Formula; 2],
    f_u: [Formula; 2],
}

impl IntrinsicFlux {
    pub fn parse(fphi: &str, ftheta: &str) -> Result<Self, FluxError> {
        let syms = ["u", "phi", "theta"];
        let f = [Formula::parse(fphi, &syms)?, Formula::parse(ftheta, &syms)?];
        let f_u = [f[0].diff("u"), f[1].diff("u")];
        Ok(Self { f, f_u })
    }

    /// True when neither component depends on `u`.
    pub fn is_u_independent(&self) -> bool {
        self.f.iter().all(|c| c.is_free_of("u"))
    }
}

impl FluxField for IntrinsicFlux {
    fn eval(&self, u: f64, x: &Point<2>) -> Point<2> {
        let v = [u, x[0], x[1]];
        Point::<2>::new(self.f[0].eval(&v), self.f[1].eval(&v))
    }

    fn du(&self, u: f64, x: &Point<2>) -> Point<2> {
        let v = [u, x[0], x[1]];
        Point::<2>::new(self.f_u[0].eval(&v), self.f_u[1].eval(&v))
    }

    fn describe(&self) -> String {
        format!("intrinsic(fphi={}, ftheta={})", self.f[0], self.f[1])
    }
}

/// `|∂_φ(f^φ sinθ) + ∂_θ(f^θ sinθ)|` at frozen `u`.
pub fn divfree_residual(f: &dyn FluxField, u: f64, x: &Point<2>) -> Result<f64, FluxError> {
    let chart = SphereChart::default();
    chart.validate(x)?;
    let a = geometry::partial(&chart, |y| f.eval(u, y)[0] * y[1].sin(), x, 0);
    let b = geometry::partial(&chart, |y| f.eval(u, y)[1] * y[1].sin(), x, 1);
    Ok((a + b).abs())
}

/// A `u`-independent tangent field `X` on the sphere.
pub trait VectorField: Send + Sync {
    fn at(&self, x: &Point<2>) -> Point<2>;
}

impl<F: Fn(&Point<2>) -> Point<2> + Send + Sync> VectorField for F {
    fn at(&self, x: &Point<2>) -> Point<2> {
        self(x)
    }
}

/// A vector field read off a flux at a frozen state.
pub struct FrozenFlux {
    pub flux: Arc<dyn FluxField>,
    pub u: f64,
}

impl VectorField for FrozenFlux {
    fn at(&self, x: &Point<2>) -> Point<2> {
        self.flux.eval(self.u, x)
    }
}
