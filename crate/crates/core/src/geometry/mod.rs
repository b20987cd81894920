//! Riemannian primitives on coordinate charts, and the longitude–colatitude
//! chart of the unit sphere with its embedded frame.

mod chart;
mod frame;
mod ops;

pub use chart::{determinant, Chart, EuclideanChart, Point, SphereChart, Tensor2, DEFAULT_POLE_BAND};
pub use frame::{
    embedded_to_intrinsic, frame, intrinsic_to_cartesian, intrinsic_to_embedded, pullback_metric,
    SphereFrame, Vec3,
};
pub use ops::{
    christoffel, differential, directional, divergence, divergence_trace, gradient, inner,
    jacobian, laplace_beltrami, lie_bracket, lie_derivative_metric, metric_partials, norm,
    partial, Christoffel,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("colatitude {theta} lies within {band} of a pole")]
    Pole { theta: f64, band: f64 },
    #[error("non-finite coordinate")]
    NonFinite,
}
