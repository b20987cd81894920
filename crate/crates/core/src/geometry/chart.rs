use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};

use super::GeometryError;

pub type Point<const D: usize> = SVector<f64, D>;
pub type Tensor2<const D: usize> = SMatrix<f64, D, D>;

/// Default half-width of the excluded band around the sphere's poles.
pub const DEFAULT_POLE_BAND: f64 = 1e-6;

/// A coordinate patch carrying a Riemannian metric.
pub trait Chart<const D: usize>: Sync {
    fn metric(&self, x: &Point<D>) -> Tensor2<D>;

    fn metric_inverse(&self, x: &Point<D>) -> Tensor2<D> {
        self.metric(x)
            .try_inverse()
            .expect("metric must be positive definite")
    }

    fn sqrt_det(&self, x: &Point<D>) -> f64 {
        determinant(self.metric(x)).sqrt()
    }

    /// Closed-form `∂_k g` at `x`, when the chart knows it.
    fn metric_derivative(&self, _x: &Point<D>, _k: usize) -> Option<Tensor2<D>> {
        None
    }

    /// Fails when `x` is a chart singularity or outside the admissible domain.
    fn validate(&self, x: &Point<D>) -> Result<(), GeometryError>;

    /// Nominal finite-difference step along axis `k`.
    fn fd_step(&self, k: usize) -> f64;

    /// Distance from `x` to the nearest non-periodic boundary along axis `k`.
    fn boundary_distance(&self, _x: &Point<D>, _k: usize) -> Option<f64> {
        None
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant<const D: usize>(mut a: Tensor2<D>) -> f64 {
    let mut det = 1.0;
    for c in 0..D {
        let p = (c..D)
            .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
            .unwrap();
        if a[(p, c)] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap_rows(p, c);
            det = -det;
        }
        det *= a[(c, c)];
        for r in c + 1..D {
            let m = a[(r, c)] / a[(c, c)];
            for k in c..D {
                a[(r, k)] -= m * a[(c, k)];
            }
        }
    }
    det
}

/// Flat `ℝ^D` with Cartesian coordinates.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanChart<const D: usize> {
    pub step: f64,
}

impl<const D: usize> Default for EuclideanChart<D> {
    fn default() -> Self {
        // the regression domain is taken as [-1, 1]^D
        Self { step: 2e-3 }
    }
}

impl<const D: usize> Chart<D> for EuclideanChart<D> {
    fn metric(&self, _x: &Point<D>) -> Tensor2<D> {
        Tensor2::<D>::identity()
    }

    fn metric_inverse(&self, _x: &Point<D>) -> Tensor2<D> {
        Tensor2::<D>::identity()
    }

    fn sqrt_det(&self, _x: &Point<D>) -> f64 {
        1.0
    }

    fn metric_derivative(&self, _x: &Point<D>, _k: usize) -> Option<Tensor2<D>> {
        Some(Tensor2::<D>::zeros())
    }

    fn validate(&self, x: &Point<D>) -> Result<(), GeometryError> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    fn fd_step(&self, _k: usize) -> f64 {
        self.step
    }
}

/// Longitude–colatitude chart `(φ, θ)` on the punctured unit sphere,
/// metric `diag(sin²θ, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct SphereChart {
    pub pole_band: f64,
}

impl Default for SphereChart {
    fn default() -> Self {
        Self {
            pole_band: DEFAULT_POLE_BAND,
        }
    }
}

impl SphereChart {
    pub fn with_pole_band(pole_band: f64) -> Self {
        Self { pole_band }
    }
}

impl Chart<2> for SphereChart {
    fn metric(&self, x: &Point<2>) -> Tensor2<2> {
        let s = x[1].sin();
        Tensor2::<2>::new(s * s, 0.0, 0.0, 1.0)
    }

    fn metric_inverse(&self, x: &Point<2>) -> Tensor2<2> {
        let s = x[1].sin();
        Tensor2::<2>::new(1.0 / (s * s), 0.0, 0.0, 1.0)
    }

    fn sqrt_det(&self, x: &Point<2>) -> f64 {
        x[1].sin()
    }

    fn metric_derivative(&self, x: &Point<2>, k: usize) -> Option<Tensor2<2>> {
        Some(if k == 1 {
            let (s, c) = x[1].sin_cos();
            Tensor2::<2>::new(2.0 * s * c, 0.0, 0.0, 0.0)
        } else {
            Tensor2::<2>::zeros()
        })
    }

    fn validate(&self, x: &Point<2>) -> Result<(), GeometryError> {
        check_colatitude(x[1], self.pole_band)?;
        if x[0].is_finite() {
            Ok(())
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    fn fd_step(&self, k: usize) -> f64 {
        // 1e-3 of the axis extent: 2π for φ, π for θ
        if k == 0 {
            2e-3 * PI
        } else {
            1e-3 * PI
        }
    }

    fn boundary_distance(&self, x: &Point<2>, k: usize) -> Option<f64> {
        (k == 1).then(|| x[1].min(PI - x[1]))
    }
}

pub(crate) fn check_colatitude(theta: f64, band: f64) -> Result<(), GeometryError> {
    if !theta.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if theta < band || theta > PI - band {
        return Err(GeometryError::Pole { theta, band });
    }
    Ok(())
}
