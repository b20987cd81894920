//! Shared pieces of the integration tests.
#![allow(dead_code)]

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_fv::geometry::{
    differential, directional, divergence, frame, gradient, inner, lie_bracket, lie_derivative_metric,
    pullback_metric, Chart, Point, SphereChart,
};

pub fn p(a: f64, b: f64) -> Point<2> {
    Vector2::new(a, b)
}

/// Random smooth data on the sphere: a state `u(x)`, a flux `f(ū, x)` with
/// its hand-written `f_u`, fields `X`, `Z`, and a scalar `h(ū, x)`.
#[derive(Debug, Clone)]
pub struct Config {
    pub x: Point<2>,
    a: [f64; 4],
    b: [f64; 4],
    c: [f64; 3],
    d: [f64; 3],
    e: [f64; 2],
    /// Added to both components of `f_u`; nonzero only to check that the
    /// identities detect a wrong derivative.
    pub fu_error: f64,
}

impl Config {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut r = || rng.gen_range(-1.0..1.0);
        let a = [r(), r(), r(), r()];
        let b = [r(), r(), r(), r()];
        let c = [r(), r(), r()];
        let d = [r(), r(), r()];
        let e = [r(), r()];
        let x = p(
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.3..std::f64::consts::PI - 0.3),
        );
        Self { x, a, b, c, d, e, fu_error: 0.0 }
    }

    pub fn u(&self, y: &Point<2>) -> f64 {
        let a = &self.a;
        a[0] + a[1] * y[1].sin() * (y[0] - a[2]).cos() + a[3] * y[1].cos()
    }

    pub fn f(&self, u: f64, y: &Point<2>) -> Point<2> {
        let b = &self.b;
        p(
            b[0] * u + b[1] * u * u * y[0].sin() * y[1].cos(),
            b[2] * u.sin() * y[1].sin() + b[3] * u * y[0].cos(),
        )
    }

    pub fn f_u(&self, u: f64, y: &Point<2>) -> Point<2> {
        let b = &self.b;
        p(
            b[0] + 2.0 * b[1] * u * y[0].sin() * y[1].cos(),
            b[2] * u.cos() * y[1].sin() + b[3] * y[0].cos(),
        ) + p(self.fu_error, self.fu_error)
    }

    pub fn xf(&self, y: &Point<2>) -> Point<2> {
        let c = &self.c;
        p(c[0] + c[1] * y[1].cos(), c[2] * y[0].sin() * y[1].sin())
    }

    pub fn zf(&self, y: &Point<2>) -> Point<2> {
        let d = &self.d;
        p(d[0] * y[0].cos(), d[1] + d[2] * y[1])
    }

    pub fn h(&self, u: f64, y: &Point<2>) -> f64 {
        self.e[0] * u.sin() * y[1].cos() + self.e[1] * u * u * y[0].sin()
    }

    pub fn h_u(&self, u: f64, y: &Point<2>) -> f64 {
        self.e[0] * u.cos() * y[1].cos() + 2.0 * self.e[1] * u * y[0].sin()
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Residuals {
    pub chain_divergence: f64,
    pub chain_lie: f64,
    pub chain_scalar: f64,
    pub commutator: f64,
    pub gradient_lie: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        [self.chain_divergence, self.chain_lie, self.chain_scalar, self.commutator, self.gradient_lie]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn merge(&mut self, o: Residuals) {
        self.chain_divergence = self.chain_divergence.max(o.chain_divergence);
        self.chain_lie = self.chain_lie.max(o.chain_lie);
        self.chain_scalar = self.chain_scalar.max(o.chain_scalar);
        self.commutator = self.commutator.max(o.commutator);
        self.gradient_lie = self.gradient_lie.max(o.gradient_lie);
    }
}

/// Residuals of the chain-rule identities and the commutator identity for
/// `X(∇·f(u, x))` at one configuration.
pub fn residuals(cfg: &Config) -> Residuals {
    let g = SphereChart::default();
    let x = &cfg.x;
    let u = |y: &Point<2>| cfg.u(y);
    let ub = cfg.u(x);
    let du = differential(&g, u, x);
    let xv = cfg.xf(x);
    let xu = directional(&g, &xv, u, x);

    // ∇·(f(u(x), x)) = du(f_u) + (∇·f)(u, x)
    let lhs = divergence(&g, |y| cfg.f(cfg.u(y), y), x).unwrap();
    let rhs = du.dot(&cfg.f_u(ub, x)) + divergence(&g, |y| cfg.f(ub, y), x).unwrap();
    let chain_divergence = (lhs - rhs).abs();

    // [X, Y(u(x), x)] = X(u) Y_u + [X, Y](u, x), with Y = f
    let lhs = lie_bracket(&g, |y| cfg.xf(y), |y| cfg.f(cfg.u(y), y), x).unwrap();
    let rhs = cfg.f_u(ub, x) * xu + lie_bracket(&g, |y| cfg.xf(y), |y| cfg.f(ub, y), x).unwrap();
    let chain_lie = (lhs - rhs).amax();

    let lhs = directional(&g, &xv, |y| cfg.h(cfg.u(y), y), x);
    let rhs = xu * cfg.h_u(ub, x) + directional(&g, &xv, |y| cfg.h(ub, y), x);
    let chain_scalar = (lhs - rhs).abs();

    // X(∇·f(u)) = ∇·(X(u) f_u(u)) + g(∇u, (L_X f_u)(u)) + X(∇·f)(u)
    let div_fu = |y: &Point<2>| divergence(&g, |z| cfg.f(cfg.u(z), z), y).unwrap();
    let lhs = directional(&g, &xv, div_fu, x);
    let xu_at = |y: &Point<2>| directional(&g, &cfg.xf(y), u, y);
    let t1 = divergence(&g, |y| cfg.f_u(cfg.u(y), y) * xu_at(y), x).unwrap();
    let grad_u = gradient(&g, u, x).unwrap();
    let lie_fu = lie_bracket(&g, |y| cfg.xf(y), |y| cfg.f_u(ub, y), x).unwrap();
    let t2 = inner(&g, x, &grad_u, &lie_fu);
    let t3 = directional(&g, &xv, |y| divergence(&g, |z| cfg.f(ub, z), y).unwrap(), x);
    let commutator = (lhs - (t1 + t2 + t3)).abs();

    // g(L_X ∇u − ∇(X(u)), Z) = −(L_X g)(∇u, Z)
    let lie_grad = lie_bracket(&g, |y| cfg.xf(y), |y| gradient(&g, u, y).unwrap(), x).unwrap();
    let grad_xu = gradient(&g, xu_at, x).unwrap();
    let zv = cfg.zf(x);
    let lg = lie_derivative_metric(&g, |y| cfg.xf(y), x).unwrap();
    let lhs = inner(&g, x, &(lie_grad - grad_xu), &zv);
    let rhs = -(grad_u.transpose() * lg * zv)[(0, 0)];
    let gradient_lie = (lhs - rhs).abs();

    Residuals {
        chain_divergence,
        chain_lie,
        chain_scalar,
        commutator,
        gradient_lie,
    }
}

/// Worst residuals over `n` configurations drawn from `seed`.
pub fn identity_residuals(seed: u64, n: usize) -> Residuals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = Residuals::default();
    for _ in 0..n {
        worst.merge(residuals(&Config::random(&mut rng)));
    }
    worst
}

/// Worst violation of the second-derivative identities of the embedding
/// and of `JᵀJ = diag(sin²θ, 1)` over `n` random points.
pub fn frame_residuals(seed: u64, n: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = SphereChart::default();
    let (mut fr, mut pb) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let theta = rng.gen_range(0.1..std::f64::consts::PI - 0.1);
        let f = frame(phi, theta).unwrap();
        let (s, c) = theta.sin_cos();
        fr = fr
            .max((f.n_thetatheta + f.n).amax())
            .max((f.n_phitheta - f.n_phi * (c / s)).amax())
            .max((f.n_phiphi + f.n * (s * s) + f.n_theta * (s * c)).amax());
        let m = pullback_metric(phi, theta).unwrap();
        pb = pb.max((m - g.metric(&p(phi, theta))).amax());
    }
    (fr, pb)
}
