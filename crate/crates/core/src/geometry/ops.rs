//! Pointwise differential operators on a chart, by fourth-order central
//! differences unless the chart supplies closed-form metric derivatives.

use std::ops::{Add, Mul, Sub};

use super::chart::{Chart, Point, Tensor2};
use super::GeometryError;

/// `Γ[j][k][l] = Γ^j_{kl}`.
pub type Christoffel<const D: usize> = [[[f64; D]; D]; D];

fn step_at<const D: usize, C: Chart<D> + ?Sized>(chart: &C, x: &Point<D>, k: usize) -> f64 {
    let h = chart.fd_step(k);
    match chart.boundary_distance(x, k) {
        Some(d) if 2.0 * h >= d => d / 3.0,
        _ => h,
    }
}

/// Fourth-order central difference of `f` along axis `k`.
pub fn partial<const D: usize, C, T, F>(chart: &C, f: F, x: &Point<D>, k: usize) -> T
where
    C: Chart<D> + ?Sized,
    F: Fn(&Point<D>) -> T,
    T: Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
{
    let h = step_at(chart, x, k);
    let shifted = |s: f64| {
        let mut y = *x;
        y[k] += s;
        f(&y)
    };
    let p1 = shifted(h);
    let m1 = shifted(-h);
    let p2 = shifted(2.0 * h);
    let m2 = shifted(-2.0 * h);
    ((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * h))
}

/// `∂_k g` for every axis `k`.
pub fn metric_partials<const D: usize, C: Chart<D> + ?Sized>(
    chart: &C,
    x: &Point<D>,
) -> [Tensor2<D>; D] {
    std::array::from_fn(|k| {
        chart
            .metric_derivative(x, k)
            .unwrap_or_else(|| partial(chart, |y| chart.metric(y), x, k))
    })
}

pub fn christoffel<const D: usize, C: Chart<D> + ?Sized>(
    chart: &C,
    x: &Point<D>,
) -> Result<Christoffel<D>, GeometryError> {
    chart.validate(x)?;
    let dg = metric_partials(chart, x);
    let ginv = chart.metric_inverse(x);
    let mut gamma = [[[0.0; D]; D]; D];
    for j in 0..D {
        for k in 0..D {
            for l in k..D {
                let mut s = 0.0;
                for i in 0..D {
                    s += 0.5 * (dg[k][(l, i)] + dg[l][(k, i)] - dg[i][(k, l)]) * ginv[(i, j)];
                }
                gamma[j][k][l] = s;
                gamma[j][l][k] = s;
            }
        }
    }
    Ok(gamma)
}

pub fn inner<const D: usize, C: Chart<D> + ?Sized>(
    chart: &C,
    x: &Point<D>,
    a: &Point<D>,
    b: &Point<D>,
) -> f64 {
    (a.transpose() * chart.metric(x) * b)[(0, 0)]
}

pub fn norm<const D: usize, C: Chart<D> + ?Sized>(chart: &C, x: &Point<D>, a: &Point<D>) -> f64 {
    inner(chart, x, a, a).max(0.0).sqrt()
}

/// `∇·f = |g|^{-1/2} ∂_i(|g|^{1/2} f^i)`.
pub fn divergence<const D: usize, C, F>(
    chart: &C,
    field: F,
    x: &Point<D>,
) -> Result<f64, GeometryError>
where
    C: Chart<D> + ?Sized,
    F: Fn(&Point<D>) -> Point<D>,
{
    chart.validate(x)?;
    let mut s = 0.0;
    for i in 0..D {
        s += partial(chart, |y| chart.sqrt_det(y) * field(y)[i], x, i);
    }
    Ok(s / chart.sqrt_det(x))
}

/// `∇·f = ∂_k f^k + Γ^k_{ik} f^i`, the trace of the covariant derivative.
pub fn divergence_trace<const D: usize, C, F>(
    chart: &C,
    field: F,
    x: &Point<D>,
) -> Result<f64, GeometryError>
where
    C: Chart<D> + ?Sized,
    F: Fn(&Point<D>) -> Point<D>,
{
    let gamma = christoffel(chart, x)?;
    let fx = field(x);
    let mut s = 0.0;
    for k in 0..D {
        s += partial(chart, |y| field(y)[k], x, k);
        for i in 0..D {
            s += gamma[k][i][k] * fx[i];
        }
    }
    Ok(s)
}

/// Coordinate differential `(∂_1 u, …, ∂_D u)`.
pub fn differential<const D: usize, C, U>(chart: &C, u: U, x: &Point<D>) -> Point<D>
where
    C: Chart<D> + ?Sized,
    U: Fn(&Point<D>) -> f64,
{
    Point::<D>::from_fn(|k, _| partial(chart, &u, x, k))
}

/// `(∇_g u)^i = g^{ij} ∂_j u`.
pub fn gradient<const D: usize, C, U>(
    chart: &C,
    u: U,
    x: &Point<D>,
) -> Result<Point<D>, GeometryError>
where
    C: Chart<D> + ?Sized,
    U: Fn(&Point<D>) -> f64,
{
    chart.validate(x)?;
    Ok(chart.metric_inverse(x) * differential(chart, u, x))
}

pub fn laplace_beltrami<const D: usize, C, U>(
    chart: &C,
    u: U,
    x: &Point<D>,
) -> Result<f64, GeometryError>
where
    C: Chart<D> + ?Sized,
    U: Fn(&Point<D>) -> f64,
{
    chart.validate(x)?;
    divergence(
        chart,
        |y| chart.metric_inverse(y) * differential(chart, &u, y),
        x,
    )
}

/// Directional derivative `X(h) = X^j ∂_j h`.
pub fn directional<const D: usize, C, H>(chart: &C, field: &Point<D>, h: H, x: &Point<D>) -> f64
where
    C: Chart<D> + ?Sized,
    H: Fn(&Point<D>) -> f64,
{
    field.dot(&differential(chart, h, x))
}

/// Jacobian `J[(i, j)] = ∂_j V^i`.
pub fn jacobian<const D: usize, C, F>(chart: &C, field: F, x: &Point<D>) -> Tensor2<D>
where
    C: Chart<D> + ?Sized,
    F: Fn(&Point<D>) -> Point<D>,
{
    let mut jac = Tensor2::<D>::zeros();
    for j in 0..D {
        let col = partial(chart, &field, x, j);
        jac.set_column(j, &col);
    }
    jac
}

/// `[X, Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket<const D: usize, C, FX, FY>(
    chart: &C,
    x_field: FX,
    y_field: FY,
    x: &Point<D>,
) -> Result<Point<D>, GeometryError>
where
    C: Chart<D> + ?Sized,
    FX: Fn(&Point<D>) -> Point<D>,
    FY: Fn(&Point<D>) -> Point<D>,
{
    chart.validate(x)?;
    let xv = x_field(x);
    let yv = y_field(x);
    let jx = jacobian(chart, &x_field, x);
    let jy = jacobian(chart, &y_field, x);
    Ok(jy * xv - jx * yv)
}

/// Components `(L_X g)_{jk} = X^l ∂_l g_{jk} + g_{lk} ∂_j X^l + g_{jl} ∂_k X^l`,
/// i.e. the Leibniz rule `X(g(Y,Z)) = (L_X g)(Y,Z) + g([X,Y],Z) + g(Y,[X,Z])`
/// applied to coordinate fields.
pub fn lie_derivative_metric<const D: usize, C, FX>(
    chart: &C,
    x_field: FX,
    x: &Point<D>,
) -> Result<Tensor2<D>, GeometryError>
where
    C: Chart<D> + ?Sized,
    FX: Fn(&Point<D>) -> Point<D>,
{
    chart.validate(x)?;
    let xv = x_field(x);
    let dg = metric_partials(chart, x);
    let g = chart.metric(x);
    let jx = jacobian(chart, &x_field, x);
    let mut out = Tensor2::<D>::zeros();
    for l in 0..D {
        out += dg[l] * xv[l];
    }
    // g_{lk} ∂_j X^l = (Jᵀ g)_{jk}
    out += jx.transpose() * g + g * jx;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    use super::super::chart::{EuclideanChart, SphereChart};
    use super::*;
    use nalgebra::Vector2;

    fn p(a: f64, b: f64) -> Point<2> {
        Vector2::new(a, b)
    }

    #[test]
    fn sphere_christoffel_closed_form() {
        let chart = SphereChart::default();
        let t = FRAC_PI_3;
        let g = christoffel(&chart, &p(0.4, t)).unwrap();
        // Γ^θ_{φφ} = −sinθ cosθ, Γ^φ_{φθ} = cotθ
        assert!((g[1][0][0] + t.sin() * t.cos()).abs() < 1e-14);
        assert!((g[0][0][1] - t.cos() / t.sin()).abs() < 1e-14);
        assert_eq!(g[0][1][0], g[0][0][1]);
        assert!(g[1][1][1].abs() < 1e-15 && g[0][1][1].abs() < 1e-15);
        let eq = christoffel(&chart, &p(0.4, FRAC_PI_2)).unwrap();
        assert!(eq[1][0][0].abs() < 1e-15);
    }

    #[test]
    fn christoffel_by_finite_differences_matches_analytic() {
        // same metric, but without closed-form derivatives
        struct FdSphere;
        impl Chart<2> for FdSphere {
            fn metric(&self, x: &Point<2>) -> Tensor2<2> {
                SphereChart::default().metric(x)
            }
            fn validate(&self, x: &Point<2>) -> Result<(), GeometryError> {
                SphereChart::default().validate(x)
            }
            fn fd_step(&self, k: usize) -> f64 {
                SphereChart::default().fd_step(k)
            }
        }
        let a = christoffel(&SphereChart::default(), &p(1.0, 0.9)).unwrap();
        let b = christoffel(&FdSphere, &p(1.0, 0.9)).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    assert!((a[j][k][l] - b[j][k][l]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn euclidean_christoffel_vanishes() {
        let chart = EuclideanChart::<2>::default();
        let g = christoffel(&chart, &p(0.2, -0.3)).unwrap();
        assert!(g.iter().flatten().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn singular_point_is_an_error() {
        let chart = SphereChart::default();
        assert!(christoffel(&chart, &p(0.0, 0.0)).is_err());
        assert!(divergence(&chart, |_| p(1.0, 0.0), &p(0.0, std::f64::consts::PI)).is_err());
        assert!(gradient(&chart, |y| y[0], &p(0.0, 0.0)).is_err());
        assert!(lie_bracket(&chart, |_| p(1.0, 0.0), |_| p(0.0, 1.0), &p(0.0, 0.0)).is_err());
    }

    #[test]
    fn sphere_divergence_examples() {
        let chart = SphereChart::default();
        for i in 1..20 {
            let x = p(0.3 * i as f64, 0.15 * i as f64);
            let d0 = divergence(&chart, |_| p(1.0, 0.0), &x).unwrap();
            assert!(d0.abs() < 1e-12);
            let d1 = divergence(&chart, |_| p(0.0, 1.0), &x).unwrap();
            assert!((d1 - x[1].cos() / x[1].sin()).abs() < 1e-9);
            let tr = divergence_trace(&chart, |_| p(0.0, 1.0), &x).unwrap();
            assert!((tr - d1).abs() < 1e-8);
        }
    }

    #[test]
    fn euclidean_identity_field_divergence() {
        let chart = EuclideanChart::<2>::default();
        let d = divergence(&chart, |y| *y, &p(0.3, 0.7)).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_formulas_agree_on_generic_field() {
        let chart = SphereChart::default();
        let field = |y: &Point<2>| p(y[0].sin() * y[1].cos(), (y[0] + 2.0 * y[1]).cos());
        for i in 1..15 {
            let x = p(0.41 * i as f64, 0.2 * i as f64);
            let a = divergence(&chart, field, &x).unwrap();
            let b = divergence_trace(&chart, field, &x).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn gradient_examples() {
        let chart = SphereChart::default();
        let x = p(0.7, 1.1);
        let g = gradient(&chart, |y| y[1].cos(), &x).unwrap();
        assert!(g[0].abs() < 1e-14);
        assert!((g[1] + x[1].sin()).abs() < 1e-10);
        let g2 = gradient(&chart, |y| y[0], &p(0.3, FRAC_PI_4)).unwrap();
        assert!((g2[0] - 2.0).abs() < 1e-12 && g2[1].abs() < 1e-15);
        let e = gradient(&EuclideanChart::<2>::default(), |y| y[0], &p(0.1, 0.2)).unwrap();
        assert!((e - p(1.0, 0.0)).amax() < 1e-13);
    }

    #[test]
    fn lowering_gradient_recovers_differential() {
        let chart = SphereChart::default();
        let u = |y: &Point<2>| (2.0 * y[0]).sin() * y[1].sin().powi(2);
        let x = p(0.9, 0.8);
        let grad = gradient(&chart, u, &x).unwrap();
        let lowered = chart.metric(&x) * grad;
        let du = differential(&chart, u, &x);
        assert!((lowered - du).amax() < 1e-10);
    }

    #[test]
    fn laplace_beltrami_examples() {
        let chart = SphereChart::default();
        for i in 1..10 {
            let x = p(0.5 * i as f64, 0.3 * i as f64);
            let l = laplace_beltrami(&chart, |y| y[1].cos(), &x).unwrap();
            assert!((l + 2.0 * x[1].cos()).abs() < 1e-7, "{l}");
            let c = laplace_beltrami(&chart, |_| 3.0, &x).unwrap();
            assert!(c.abs() < 1e-12);
        }
        let e = laplace_beltrami(&EuclideanChart::<2>::default(), |y| y[0], &p(0.2, 0.1)).unwrap();
        assert!(e.abs() < 1e-9);
    }

    #[test]
    fn laplace_beltrami_equals_divergence_of_gradient() {
        let chart = SphereChart::default();
        let u = |y: &Point<2>| y[0].cos() * y[1].sin() + y[1].powi(2);
        let x = p(1.3, 1.2);
        let l = laplace_beltrami(&chart, u, &x).unwrap();
        let d = divergence(&chart, |y| gradient(&chart, u, y).unwrap(), &x).unwrap();
        assert!((l - d).abs() < 1e-8);
    }

    #[test]
    fn lie_bracket_examples() {
        let chart = SphereChart::default();
        let x = p(1.0, 0.7);
        let f = |y: &Point<2>| p(y[0].sin() + y[1], y[1].cos());
        let zero = lie_bracket(&chart, f, f, &x).unwrap();
        assert_eq!(zero, p(0.0, 0.0));
        let b = lie_bracket(&chart, |_| p(1.0, 0.0), |y: &Point<2>| p(y[1].sin(), 0.0), &x).unwrap();
        assert!(b.amax() < 1e-14);
        let e = lie_bracket(
            &EuclideanChart::<2>::default(),
            |y: &Point<2>| p(y[1], 0.0),
            |_| p(0.0, 1.0),
            &p(0.3, 0.4),
        )
        .unwrap();
        assert!((e - p(-1.0, 0.0)).amax() < 1e-12);
    }

    #[test]
    fn lie_bracket_is_exactly_antisymmetric() {
        let chart = SphereChart::default();
        let xf = |y: &Point<2>| p(y[1].sin() * y[0].cos(), y[0].sin());
        let yf = |y: &Point<2>| p((y[0] * y[1]).cos(), y[1].powi(2));
        for i in 1..10 {
            let x = p(0.6 * i as f64, 0.3 * i as f64);
            let a = lie_bracket(&chart, xf, yf, &x).unwrap();
            let b = lie_bracket(&chart, yf, xf, &x).unwrap();
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn lie_derivative_metric_matches_leibniz_rule() {
        let chart = SphereChart::default();
        let xf = |y: &Point<2>| p(y[1].cos() + 0.3 * y[0].sin(), y[0].cos() * y[1].sin());
        let yf = |y: &Point<2>| p(y[0].sin(), 1.0 + 0.2 * y[1]);
        let zf = |y: &Point<2>| p(y[1], y[0].cos());
        let x = p(0.8, 1.0);
        let lg = lie_derivative_metric(&chart, xf, &x).unwrap();
        let lhs = (yf(&x).transpose() * lg * zf(&x))[(0, 0)];
        let xg = directional(&chart, &xf(&x), |y| inner(&chart, y, &yf(y), &zf(y)), &x);
        let bxy = lie_bracket(&chart, xf, yf, &x).unwrap();
        let bxz = lie_bracket(&chart, xf, zf, &x).unwrap();
        let rhs = xg - inner(&chart, &x, &bxy, &zf(&x)) - inner(&chart, &x, &yf(&x), &bxz);
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} {rhs}");
    }

    #[test]
    fn step_shrinks_near_pole() {
        let chart = SphereChart::default();
        // stencil must stay inside (0, π)
        let d = divergence(&chart, |_| p(0.0, 1.0), &p(0.0, 1e-3)).unwrap();
        assert!((d - (1e-3f64).cos() / (1e-3f64).sin()).abs() < 1e-3);
    }
}
