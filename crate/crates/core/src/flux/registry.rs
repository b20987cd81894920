use std::sync::Arc;

use serde_json::{Map, Value};

use super::{
    from_potential, FluxError, FluxField, FrozenFlux, IntrinsicFlux, LatitudeBurgers,
    SolidRotation, VectorField,
};
use crate::expr::Formula;
use crate::geometry::Point;

pub const FLUX_REGISTRY: [&str; 4] = ["solid_rotation", "latitude_burgers", "potential", "intrinsic"];
pub const FIELD_REGISTRY: [&str; 2] = ["d_phi", "potential:<b>"];

fn number(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64, FluxError> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| FluxError::BadParam(key.into())),
    }
}

fn text<'a>(params: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>, FluxError> {
    match params.get(key) {
        None => Ok(None),
        Some(v) => v.as_str().map(Some).ok_or_else(|| FluxError::BadParam(key.into())),
    }
}

fn check_keys(params: &Map<String, Value>, allowed: &[&str]) -> Result<(), FluxError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(FluxError::BadParam(k.clone())),
        None => Ok(()),
    }
}

/// Look up a flux by registry name.
pub fn build_flux(name: &str, params: &Map<String, Value>) -> Result<Arc<dyn FluxField>, FluxError> {
    match name {
        "solid_rotation" => {
            check_keys(params, &["omega"])?;
            Ok(Arc::new(SolidRotation {
                omega: number(params, "omega", 1.0)?,
            }))
        }
        "latitude_burgers" => {
            check_keys(params, &["c0", "c1"])?;
            Ok(Arc::new(LatitudeBurgers {
                c0: number(params, "c0", 1.0)?,
                c1: number(params, "c1", 0.0)?,
            }))
        }
        "potential" => {
            check_keys(params, &["a"])?;
            let src = text(params, "a")?.ok_or_else(|| FluxError::BadParam("a".into()))?;
            let a = Formula::parse(src, &["u", "n1", "n2", "n3"])?;
            Ok(Arc::new(from_potential(&a)?))
        }
        "intrinsic" => {
            check_keys(params, &["fphi", "ftheta"])?;
            let fphi = text(params, "fphi")?.unwrap_or("0");
            let ftheta = text(params, "ftheta")?.unwrap_or("0");
            Ok(Arc::new(IntrinsicFlux::parse(fphi, ftheta)?))
        }
        other => Err(FluxError::Unknown {
            kind: "flux",
            name: other.to_string(),
            registry: FLUX_REGISTRY.join(", "),
        }),
    }
}

fn d_phi(_x: &Point<2>) -> Point<2> {
    Point::<2>::new(1.0, 0.0)
}

/// `d_phi` (rotation about the polar axis) or `potential:<b>`, the field
/// `n × ∇b` for a formula `b` in `n1, n2, n3`.
pub fn build_vector_field(spec: &str) -> Result<Arc<dyn VectorField>, FluxError> {
    let spec = spec.trim();
    if spec == "d_phi" {
        return Ok(Arc::new(d_phi));
    }
    if let Some(src) = spec.strip_prefix("potential:") {
        let b = Formula::parse(src, &["u", "n1", "n2", "n3"])?;
        if !b.is_free_of("u") {
            return Err(FluxError::BadParam("vector field potential depends on u".into()));
        }
        return Ok(Arc::new(FrozenFlux {
            flux: Arc::new(from_potential(&b)?),
            u: 0.0,
        }));
    }
    Err(FluxError::Unknown {
        kind: "vector field",
        name: spec.to_string(),
        registry: FIELD_REGISTRY.join(", "),
    })
}
