use std::sync::Arc;

use super::{FluxError, FluxField};
use crate::expr::Formula;
use crate::geometry::Point;
use crate::quadrature::integrate;

const U_QUAD_TOL: f64 = 1e-12;

/// A convex entropy `U(u)`.
#[derive(Debug, Clone)]
pub enum Entropy {
    /// `u²/2`
    Quadratic,
    /// `|u − k|`
    Kruzkov(f64),
    /// `u`, convex in the weak sense; useful as a consistency check.
    Linear,
    /// A formula in `u` with its symbolic derivatives.
    Expr {
        u: Formula,
        d1: Formula,
        d2: Formula,
    },
}

impl Entropy {
    /// `quadratic`, `linear`, `kruzkov:<k>` or `expr:<formula in u>`.
    pub fn parse(spec: &str) -> Result<Self, FluxError> {
        let spec = spec.trim();
        if spec == "quadratic" {
            return Ok(Entropy::Quadratic);
        }
        if spec == "linear" {
            return Ok(Entropy::Linear);
        }
        if let Some(k) = spec.strip_prefix("kruzkov:") {
            return k
                .trim()
                .parse()
                .map(Entropy::Kruzkov)
                .map_err(|_| FluxError::BadParam(format!("kruzkov level '{k}'")));
        }
        if let Some(src) = spec.strip_prefix("expr:") {
            let u = Formula::parse(src, &["u"])?;
            let d1 = u.diff("u");
            let d2 = d1.diff("u");
            return Ok(Entropy::Expr { u, d1, d2 });
        }
        Err(FluxError::Unknown {
            kind: "entropy",
            name: spec.to_string(),
            registry: "quadratic, linear, kruzkov:<k>, expr:<U>".into(),
        })
    }

    pub fn label(&self) -> String {
        match self {
            Entropy::Quadratic => "quadratic".into(),
            Entropy::Kruzkov(k) => format!("kruzkov:{k}"),
            Entropy::Linear => "linear".into(),
            Entropy::Expr { u, .. } => format!("expr:{u}"),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match self {
            Entropy::Quadratic => 0.5 * u * u,
            Entropy::Kruzkov(k) => (u - k).abs(),
            Entropy::Linear => u,
            Entropy::Expr { u: f, .. } => f.eval(&[u]),
        }
    }

    /// `U'`; for Kruzkov the sign function with `sgn(0) = 0`.
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Entropy::Quadratic => u,
            Entropy::Kruzkov(k) => sgn(u - k),
            Entropy::Linear => 1.0,
            Entropy::Expr { d1, .. } => d1.eval(&[u]),
        }
    }

    /// `U''` away from any kink.
    pub fn second(&self, u: f64) -> f64 {
        match self {
            Entropy::Quadratic => 1.0,
            Entropy::Kruzkov(_) | Entropy::Linear => 0.0,
            Entropy::Expr { d2, .. } => d2.eval(&[u]),
        }
    }

    pub fn is_kruzkov(&self) -> Option<f64> {
        match self {
            Entropy::Kruzkov(k) => Some(*k),
            _ => None,
        }
    }

    fn samples(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
        let n = 1000;
        (0..n).map(move |i| {
            if hi > lo {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            } else {
                lo
            }
        })
    }

    /// Rejects `U` when a sampled `U''` on `[lo, hi]` is below `−1e-12`.
    pub fn check_convex(&self, lo: f64, hi: f64) -> Result<(), FluxError> {
        for u in Self::samples(lo, hi) {
            let second = self.second(u);
            if !(second >= -1e-12) {
                return Err(FluxError::NonConvex { u, second });
            }
        }
        Ok(())
    }

    /// Modulus of convexity `α = min U''` over 1000 samples of `[lo, hi]`.
    pub fn modulus(&self, lo: f64, hi: f64) -> f64 {
        Self::samples(lo, hi)
            .map(|u| self.second(u))
            .fold(f64::INFINITY, f64::min)
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `(U, F)` with `∂_u F = U'(u) f_u(u, ·)`.
#[derive(Clone)]
pub struct EntropyPair {
    pub entropy: Entropy,
    pub flux: Arc<dyn FluxField>,
    pub u_ref: f64,
}

impl EntropyPair {
    pub fn value(&self, u: f64) -> f64 {
        self.entropy.value(u)
    }

    /// `F(u, x) = ∫_{u_ref}^u U'(v) f_u(v, x) dv`; Kruzkov uses
    /// `sgn(u − k)(f(u, x) − f(k, x))` and `U = u` gives `f` itself.
    pub fn flux_at(&self, u: f64, x: &Point<2>) -> Point<2> {
        match &self.entropy {
            Entropy::Kruzkov(k) => (self.flux.eval(u, x) - self.flux.eval(*k, x)) * sgn(u - k),
            Entropy::Linear => self.flux.eval(u, x),
            e => Point::<2>::from_fn(|i, _| {
                integrate(
                    |v| e.deriv(v) * self.flux.du(v, x)[i],
                    self.u_ref,
                    u,
                    U_QUAD_TOL,
                )
            }),
        }
    }
}

/// Entropy flux companion of `entropy` for `flux`, with convexity checked on
/// the state interval `[lo, hi]`.
pub fn entropy_flux(
    entropy: Entropy,
    flux: Arc<dyn FluxField>,
    u_ref: f64,
    (lo, hi): (f64, f64),
) -> Result<EntropyPair, FluxError> {
    entropy.check_convex(lo, hi)?;
    Ok(EntropyPair {
        entropy,
        flux,
        u_ref,
    })
}
