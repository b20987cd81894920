//! Latitude–longitude cells on the unit sphere with one cap cell per pole.
//!
//! Band cell `(i, j)` spans `[φ_i, φ_{i+1}] × [θ_j, θ_{j+1}]` with
//! `θ_j = θ_min + j Δθ`; its id is `j * n_phi + i`. The north cap
//! (`θ < θ_min`) and the south cap follow the band cells.

mod export;

use std::f64::consts::PI;

use serde::Serialize;

use crate::flux::{FluxField, VectorField};
use crate::geometry::{inner, Point, SphereChart, Vec3};
use crate::quadrature::{integrate, pairwise_sum, GL3, GL4};

pub use export::{write_cells_csv, write_faces_csv, write_vtk};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("invalid mesh parameters: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceKind {
    Meridian,
    Latitude,
    CapRim,
}

impl FaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceKind::Meridian => "meridian",
            FaceKind::Latitude => "latitude",
            FaceKind::CapRim => "cap-rim",
        }
    }
}

/// A face quadrature node; `normal` points from `cell_a` into `cell_b`.
#[derive(Debug, Clone, Copy)]
pub struct FaceNode {
    pub x: Point<2>,
    pub weight: f64,
    pub normal: Point<2>,
}

#[derive(Debug, Clone)]
pub struct Face {
    pub id: usize,
    pub kind: FaceKind,
    pub measure: f64,
    pub cell_a: usize,
    pub cell_b: usize,
    /// φ of a meridian face or θ of a latitude / rim face.
    pub fixed: f64,
    /// Parameter range along the face: θ for meridians, φ otherwise.
    pub span: (f64, f64),
    pub nodes: Vec<FaceNode>,
}

impl Face {
    pub fn point(&self, t: f64) -> Point<2> {
        match self.kind {
            FaceKind::Meridian => Point::<2>::new(self.fixed, t),
            _ => Point::<2>::new(t, self.fixed),
        }
    }

    /// Unit normal (in `g`) from `cell_a` to `cell_b` at a point of the face.
    pub fn normal_at(&self, x: &Point<2>) -> Point<2> {
        match self.kind {
            FaceKind::Meridian => Point::<2>::new(1.0 / x[1].sin(), 0.0),
            _ => Point::<2>::new(0.0, 1.0),
        }
    }

    /// `dv_e / dt` in the face parameter.
    pub fn line_element(&self, x: &Point<2>) -> f64 {
        match self.kind {
            FaceKind::Meridian => 1.0,
            _ => x[1].sin(),
        }
    }

    /// Orientation of the face seen from `cell`: `+1` for `cell_a`.
    pub fn sign_for(&self, cell: usize) -> f64 {
        if cell == self.cell_a {
            1.0
        } else {
            debug_assert_eq!(cell, self.cell_b);
            -1.0
        }
    }

    pub fn neighbour_of(&self, cell: usize) -> usize {
        if cell == self.cell_a {
            self.cell_b
        } else {
            self.cell_a
        }
    }

    /// `8` equally spaced boundary samples including both endpoints.
    pub fn samples(&self) -> impl Iterator<Item = Point<2>> + '_ {
        (0..8).map(move |k| {
            let t = self.span.0 + (self.span.1 - self.span.0) * k as f64 / 7.0;
            self.point(t)
        })
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub id: usize,
    pub area: f64,
    /// Boundary faces in a fixed order.
    pub faces: Vec<usize>,
    pub perimeter: f64,
    pub centroid: Point<2>,
    pub is_pole_cap: bool,
    /// Tensor quadrature `(x, w)` with `Σ w = |K|` up to rounding.
    pub nodes: Vec<(Point<2>, f64)>,
}

#[derive(Debug, Clone)]
pub struct SphereMesh {
    pub n_phi: usize,
    pub n_theta: usize,
    pub theta_min: f64,
    pub dphi: f64,
    pub dtheta: f64,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeshInfo {
    pub n_phi: usize,
    pub n_theta: usize,
    pub theta_min: f64,
    pub cells: usize,
    pub faces: usize,
    pub h: f64,
    pub min_area: f64,
    pub max_area: f64,
    pub total_area: f64,
    pub max_perimeter_ratio: f64,
}

fn band_area(dphi: f64, t0: f64, t1: f64) -> f64 {
    // cos t0 − cos t1 without cancellation
    dphi * 2.0 * (0.5 * (t0 + t1)).sin() * (0.5 * (t1 - t0)).sin()
}

fn embed(x: &Point<2>) -> Vec3 {
    let (sp, cp) = x[0].sin_cos();
    let (st, ct) = x[1].sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

fn great_circle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

impl SphereMesh {
    pub fn build_latlon(n_phi: usize, n_theta: usize, theta_min: f64) -> Result<Self, MeshError> {
        if n_phi < 3 {
            return Err(MeshError::Config(format!("n_phi = {n_phi} must be at least 3")));
        }
        if n_theta < 1 {
            return Err(MeshError::Config("n_theta must be at least 1".into()));
        }
        if !(theta_min > 0.0 && theta_min <= PI / 4.0) {
            return Err(MeshError::Config(format!(
                "theta_min = {theta_min} must lie in (0, pi/4]"
            )));
        }
        let dphi = 2.0 * PI / n_phi as f64;
        let dtheta = (PI - 2.0 * theta_min) / n_theta as f64;
        let theta = |j: usize| {
            if j == n_theta {
                PI - theta_min
            } else {
                theta_min + j as f64 * dtheta
            }
        };
        let phi = |i: usize| i as f64 * dphi;
        let band = |i: usize, j: usize| j * n_phi + (i % n_phi);
        let north = n_phi * n_theta;
        let south = north + 1;

        let mut faces = Vec::new();
        let mut push = |kind, cell_a, cell_b, fixed: f64, span: (f64, f64)| {
            let id = faces.len();
            let mut face = Face {
                id,
                kind,
                measure: 0.0,
                cell_a,
                cell_b,
                fixed,
                span,
                nodes: Vec::new(),
            };
            face.nodes = GL3
                .mapped(span.0, span.1)
                .map(|(t, w)| {
                    let x = face.point(t);
                    FaceNode {
                        x,
                        weight: w * face.line_element(&x),
                        normal: face.normal_at(&x),
                    }
                })
                .collect();
            face.measure = match kind {
                FaceKind::Meridian => span.1 - span.0,
                _ => (span.1 - span.0) * fixed.sin(),
            };
            faces.push(face);
        };
        for j in 0..n_theta {
            for i in 0..n_phi {
                // west neighbour to east neighbour across φ_i
                push(
                    FaceKind::Meridian,
                    band(i + n_phi - 1, j),
                    band(i, j),
                    phi(i),
                    (theta(j), theta(j + 1)),
                );
            }
        }
        for j in 1..n_theta {
            for i in 0..n_phi {
                push(
                    FaceKind::Latitude,
                    band(i, j - 1),
                    band(i, j),
                    theta(j),
                    (phi(i), phi(i + 1)),
                );
            }
        }
        for i in 0..n_phi {
            push(FaceKind::CapRim, north, band(i, 0), theta(0), (phi(i), phi(i + 1)));
        }
        for i in 0..n_phi {
            push(
                FaceKind::CapRim,
                band(i, n_theta - 1),
                south,
                theta(n_theta),
                (phi(i), phi(i + 1)),
            );
        }

        let mut cell_faces: Vec<Vec<usize>> = vec![Vec::new(); n_phi * n_theta + 2];
        for f in &faces {
            cell_faces[f.cell_a].push(f.id);
            cell_faces[f.cell_b].push(f.id);
        }

        let mut cells = Vec::with_capacity(cell_faces.len());
        for (id, fs) in cell_faces.into_iter().enumerate() {
            let (area, centroid, is_cap, nodes) = if id < north {
                let (i, j) = (id % n_phi, id / n_phi);
                let (t0, t1) = (theta(j), theta(j + 1));
                let nodes = tensor_nodes(phi(i), phi(i + 1), t1.cos(), t0.cos());
                (
                    band_area(dphi, t0, t1),
                    Point::<2>::new(phi(i) + 0.5 * dphi, 0.5 * (t0 + t1)),
                    false,
                    nodes,
                )
            } else {
                let area = 2.0 * PI * 2.0 * (0.5 * theta_min).sin().powi(2);
                let (mu0, mu1, pole) = if id == north {
                    (theta_min.cos(), 1.0, 0.0)
                } else {
                    (-1.0, -theta_min.cos(), PI)
                };
                let nodes = (0..n_phi)
                    .flat_map(|i| tensor_nodes(phi(i), phi(i + 1), mu0, mu1))
                    .collect();
                (area, Point::<2>::new(0.0, pole), true, nodes)
            };
            let perimeter = fs.iter().map(|&f| faces[f].measure).sum();
            cells.push(Cell {
                id,
                area,
                faces: fs,
                perimeter,
                centroid,
                is_pole_cap: is_cap,
                nodes,
            });
        }

        let h = cells
            .iter()
            .map(|c| {
                let pts: Vec<Vec3> = c
                    .faces
                    .iter()
                    .flat_map(|&f| faces[f].samples())
                    .map(|x| embed(&x))
                    .collect();
                let mut d: f64 = 0.0;
                for a in 0..pts.len() {
                    for b in a + 1..pts.len() {
                        d = d.max(great_circle(&pts[a], &pts[b]));
                    }
                }
                d
            })
            .fold(0.0, f64::max);

        Ok(Self {
            n_phi,
            n_theta,
            theta_min,
            dphi,
            dtheta,
            cells,
            faces,
            h,
        })
    }

    /// Colatitude of latitude line `j`, `0 ≤ j ≤ n_theta`.
    pub fn theta_line(&self, j: usize) -> f64 {
        if j == self.n_theta {
            PI - self.theta_min
        } else {
            self.theta_min + j as f64 * self.dtheta
        }
    }

    pub fn band_cell(&self, i: usize, j: usize) -> usize {
        j * self.n_phi + (i % self.n_phi)
    }

    pub fn north_cap(&self) -> usize {
        self.n_phi * self.n_theta
    }

    pub fn south_cap(&self) -> usize {
        self.north_cap() + 1
    }

    /// Cell containing `x`.
    pub fn locate(&self, x: &Point<2>) -> usize {
        if x[1] < self.theta_min {
            return self.north_cap();
        }
        if x[1] > PI - self.theta_min {
            return self.south_cap();
        }
        let j = (((x[1] - self.theta_min) / self.dtheta) as usize).min(self.n_theta - 1);
        let i = ((x[0].rem_euclid(2.0 * PI) / self.dphi) as usize).min(self.n_phi - 1);
        self.band_cell(i, j)
    }

    pub fn total_area(&self) -> f64 {
        let a: Vec<f64> = self.cells.iter().map(|c| c.area).collect();
        pairwise_sum(&a)
    }

    pub fn info(&self) -> MeshInfo {
        let areas = self.cells.iter().map(|c| c.area);
        MeshInfo {
            n_phi: self.n_phi,
            n_theta: self.n_theta,
            theta_min: self.theta_min,
            cells: self.cells.len(),
            faces: self.faces.len(),
            h: self.h,
            min_area: areas.clone().fold(f64::INFINITY, f64::min),
            max_area: areas.fold(0.0, f64::max),
            total_area: self.total_area(),
            max_perimeter_ratio: self
                .cells
                .iter()
                .map(|c| c.perimeter / c.area)
                .fold(0.0, f64::max),
        }
    }

    /// `(1/|e|) Σ_q w_q g(V(x_q), n(x_q))` from the side of `cell_a`.
    pub fn face_normal_average(&self, face: usize, v: impl Fn(&Point<2>) -> Point<2>) -> f64 {
        let chart = SphereChart::default();
        let f = &self.faces[face];
        let terms: Vec<f64> = f
            .nodes
            .iter()
            .map(|q| q.weight * inner(&chart, &q.x, &v(&q.x), &q.normal))
            .collect();
        terms.iter().sum::<f64>() / f.measure
    }

    /// `∫_e |g(X, n)| dv_e` by adaptive quadrature along the face.
    pub fn face_abs_normal_integral(&self, face: usize, x_field: &dyn VectorField) -> f64 {
        let chart = SphereChart::default();
        let f = &self.faces[face];
        integrate(
            |t| {
                let x = f.point(t);
                inner(&chart, &x, &x_field.at(&x), &f.normal_at(&x)).abs() * f.line_element(&x)
            },
            f.span.0,
            f.span.1,
            1e-13 * f.measure.max(1e-3),
        )
    }

    /// Average of `u0` over a cell by its tensor quadrature.
    pub fn cell_average(&self, cell: usize, u0: impl Fn(&Point<2>) -> f64) -> f64 {
        let c = &self.cells[cell];
        let (mut num, mut den) = (0.0, 0.0);
        for (x, w) in &c.nodes {
            num += w * u0(x);
            den += w;
        }
        num / den
    }
}

/// `4 × 4` Gauss–Legendre nodes in `(φ, μ = cosθ)`, where `dv = dφ dμ`.
fn tensor_nodes(phi0: f64, phi1: f64, mu0: f64, mu1: f64) -> Vec<(Point<2>, f64)> {
    let mut out = Vec::with_capacity(16);
    for (mu, wm) in GL4.mapped(mu0, mu1) {
        for (phi, wp) in GL4.mapped(phi0, phi1) {
            out.push((Point::<2>::new(phi, mu.acos()), wm * wp));
        }
    }
    out
}

/// `f_{e,K}(u, u)`: the face average of `g(f(u, ·), n_{e,K})` from `side`.
/// Separable fluxes `ψ(u) V` are evaluated as `ψ(u)` times the face average
/// of `g(V, n)`.
pub fn face_average_normal_flux(
    mesh: &SphereMesh,
    face: usize,
    side: usize,
    f: &dyn FluxField,
    u: f64,
) -> f64 {
    let sign = mesh.faces[face].sign_for(side);
    let value = match f.separable() {
        Some(psi) => {
            psi.value(u) * mesh.face_normal_average(face, |x| crate::flux::velocity(f, psi, x))
        }
        None => mesh.face_normal_average(face, |x| f.eval(u, x)),
    };
    sign * value
}
