use nalgebra::{Matrix3x2, Vector3};

use super::chart::{check_colatitude, Point, Tensor2, DEFAULT_POLE_BAND};
use super::GeometryError;

pub type Vec3 = Vector3<f64>;

/// The outward normal `n(φ, θ)` and the orthonormal tangent pair
/// `t1 = n_φ / sinθ`, `t2 = −n_θ`, with derivatives of `n` up to order two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFrame {
    pub n: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub n_phi: Vec3,
    pub n_theta: Vec3,
    pub n_phiphi: Vec3,
    pub n_phitheta: Vec3,
    pub n_thetatheta: Vec3,
}

pub fn frame(phi: f64, theta: f64) -> Result<SphereFrame, GeometryError> {
    check_colatitude(theta, DEFAULT_POLE_BAND)?;
    if !phi.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let n = Vec3::new(st * cp, st * sp, ct);
    let n_phi = Vec3::new(-st * sp, st * cp, 0.0);
    let n_theta = Vec3::new(ct * cp, ct * sp, -st);
    Ok(SphereFrame {
        n,
        t1: Vec3::new(-sp, cp, 0.0),
        t2: -n_theta,
        n_phi,
        n_theta,
        n_phiphi: Vec3::new(-st * cp, -st * sp, 0.0),
        n_phitheta: Vec3::new(-ct * sp, ct * cp, 0.0),
        n_thetatheta: -n,
    })
}

impl SphereFrame {
    /// Jacobian of the embedding, columns `n_φ`, `n_θ`.
    pub fn jacobian(&self) -> Matrix3x2<f64> {
        Matrix3x2::from_columns(&[self.n_phi, self.n_theta])
    }
}

/// `JᵀJ` for the embedding `(φ, θ) ↦ n`.
pub fn pullback_metric(phi: f64, theta: f64) -> Result<Tensor2<2>, GeometryError> {
    let j = frame(phi, theta)?.jacobian();
    Ok(j.transpose() * j)
}

/// Components of an intrinsic tangent vector `(ξ^φ, ξ^θ)` in the
/// orthonormal basis `(t1, t2, n)`.
pub fn intrinsic_to_embedded(xi: &Point<2>, phi: f64, theta: f64) -> Result<Vec3, GeometryError> {
    frame(phi, theta)?;
    Ok(Vec3::new(theta.sin() * xi[0], -xi[1], 0.0))
}

/// Inverse of [`intrinsic_to_embedded`]; the `n` component is discarded.
pub fn embedded_to_intrinsic(
    v: &Vec3,
    phi: f64,
    theta: f64,
) -> Result<Point<2>, GeometryError> {
    frame(phi, theta)?;
    Ok(Point::<2>::new(v[0] / theta.sin(), -v[1]))
}

/// The same vector in Cartesian `ℝ³` components, `ξ^φ n_φ + ξ^θ n_θ`.
pub fn intrinsic_to_cartesian(xi: &Point<2>, phi: f64, theta: f64) -> Result<Vec3, GeometryError> {
    let fr = frame(phi, theta)?;
    Ok(fr.n_phi * xi[0] + fr.n_theta * xi[1])
}
