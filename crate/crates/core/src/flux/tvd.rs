use serde::Serialize;

use super::{FluxError, FluxField, VectorField};
use crate::geometry::{
    directional, frame, inner, intrinsic_to_cartesian, lie_bracket, norm, Point, SphereChart,
};

pub const DEFAULT_TVD_TOLERANCE: f64 = 1e-6;

/// Fields smaller than this in `|·|_g` cannot fix a direction.
const DEGENERATE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Compatible,
    Incompatible,
}

#[derive(Debug, Clone, Serialize)]
pub struct TVDReport {
    /// `sup |[X, f_u]|_g`.
    pub bracket_residual: f64,
    /// `sup |X × f_u| / |X|` in the embedding.
    pub colinearity_residual: f64,
    /// `sup |X(C)|` with `C = g(f_u, X) / g(X, X)`.
    pub c_along_x_residual: f64,
    /// `sup |X|_g`, the scale the bracket residual is judged against.
    pub x_scale: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Samples the bracket condition `[X, f_u] = 0` and its colinear
/// characterisation `f_u = C X, X(C) = 0`.
pub fn tvd_compatibility(
    f: &dyn FluxField,
    x_field: &dyn VectorField,
    u_samples: &[f64],
    points: &[Point<2>],
    tolerance: f64,
) -> Result<TVDReport, FluxError> {
    let chart = SphereChart::default();
    let mut bracket: f64 = 0.0;
    let mut colinear: f64 = 0.0;
    let mut along: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for x in points {
        frame(x[0], x[1])?;
        let xv = x_field.at(x);
        let xn = norm(&chart, x, &xv);
        if !(xn >= DEGENERATE) {
            return Err(FluxError::DegenerateSample {
                phi: x[0],
                theta: x[1],
            });
        }
        scale = scale.max(xn);
        let xc = intrinsic_to_cartesian(&xv, x[0], x[1])?;
        for &u in u_samples {
            let fu = f.du(u, x);
            let b = lie_bracket(&chart, |y| x_field.at(y), |y| f.du(u, y), x)?;
            bracket = bracket.max(norm(&chart, x, &b));
            let fc = intrinsic_to_cartesian(&fu, x[0], x[1])?;
            colinear = colinear.max(xc.cross(&fc).norm() / xc.norm());
            let c = |y: &Point<2>| {
                let xy = x_field.at(y);
                inner(&chart, y, &f.du(u, y), &xy) / inner(&chart, y, &xy, &xy)
            };
            along = along.max(directional(&chart, &xv, c, x).abs());
        }
    }
    let ok = bracket <= tolerance * scale.max(f64::MIN_POSITIVE)
        && colinear <= tolerance
        && along <= tolerance;
    Ok(TVDReport {
        bracket_residual: bracket,
        colinearity_residual: colinear,
        c_along_x_residual: along,
        x_scale: scale,
        tolerance,
        verdict: if ok {
            Verdict::Compatible
        } else {
            Verdict::Incompatible
        },
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::super::{IntrinsicFlux, LatitudeBurgers};
    use super::*;

    fn grid() -> Vec<Point<2>> {
        let mut v = Vec::new();
        for i in 0..8 {
            for j in 1..8 {
                v.push(Point::<2>::new(2.0 * PI * i as f64 / 8.0, PI * j as f64 / 8.0));
            }
        }
        v
    }

    fn d_phi(_x: &Point<2>) -> Point<2> {
        Point::<2>::new(1.0, 0.0)
    }

    #[test]
    fn field_against_itself() {
        let f = IntrinsicFlux::parse("u*(1 + 0.3*cos(theta))", "0").unwrap();
        let x = |y: &Point<2>| Point::<2>::new(1.0 + 0.3 * y[1].cos(), 0.0);
        let r = tvd_compatibility(&f, &x, &[0.3], &grid(), 1e-6).unwrap();
        assert!(r.bracket_residual < 1e-12 && r.colinearity_residual < 1e-12);
        assert!(r.c_along_x_residual < 1e-12);
        assert_eq!(r.verdict, Verdict::Compatible);
    }

    #[test]
    fn latitude_speed_is_compatible_with_rotation() {
        let f = LatitudeBurgers { c0: 0.5, c1: 1.0 };
        let r = tvd_compatibility(&f, &d_phi, &[-1.0, 0.2, 0.9], &grid(), 1e-6).unwrap();
        assert!(r.bracket_residual <= 1e-8);
        assert!(r.colinearity_residual <= 1e-8);
        assert!(r.c_along_x_residual <= 1e-8);
        assert_eq!(r.verdict, Verdict::Compatible);
    }

    #[test]
    fn cos_phi_field_is_incompatible() {
        let f = IntrinsicFlux::parse("u*cos(phi)", "0").unwrap();
        let pts = [Point::<2>::new(FRAC_PI_2, FRAC_PI_2)];
        let r = tvd_compatibility(&f, &d_phi, &[0.5], &pts, 1e-6).unwrap();
        assert!(r.bracket_residual >= 0.5, "{}", r.bracket_residual);
        assert_eq!(r.verdict, Verdict::Incompatible);
    }

    #[test]
    fn sideways_field_is_not_colinear() {
        let f = IntrinsicFlux::parse("0", "u").unwrap();
        let r = tvd_compatibility(&f, &d_phi, &[1.0], &grid(), 1e-6).unwrap();
        assert!(r.colinearity_residual > 0.5);
        assert_eq!(r.verdict, Verdict::Incompatible);
    }

    #[test]
    fn vanishing_field_is_degenerate() {
        let f = LatitudeBurgers { c0: 1.0, c1: 0.0 };
        let zero = |_y: &Point<2>| Point::<2>::zeros();
        assert!(matches!(
            tvd_compatibility(&f, &zero, &[1.0], &grid(), 1e-6),
            Err(FluxError::DegenerateSample { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn verdict_is_invariant_under_rescaling(c in 1e-3f64..1e3, which in 0usize..3) {
            let fluxes: [Arc<dyn FluxField>; 3] = [
                Arc::new(LatitudeBurgers { c0: 1.0, c1: 0.5 }),
                Arc::new(IntrinsicFlux::parse("u*cos(phi)", "0").unwrap()),
                Arc::new(IntrinsicFlux::parse("u*sin(theta)", "0.01*u").unwrap()),
            ];
            let f = &fluxes[which];
            let scaled = move |_y: &Point<2>| Point::<2>::new(c, 0.0);
            let pts = grid();
            let a = tvd_compatibility(f.as_ref(), &d_phi, &[0.7], &pts, 1e-6).unwrap();
            let b = tvd_compatibility(f.as_ref(), &scaled, &[0.7], &pts, 1e-6).unwrap();
            prop_assert_eq!(a.verdict, b.verdict);
        }
    }
}
