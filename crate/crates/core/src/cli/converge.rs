use std::fmt;

use serde::Serialize;

use super::{reference_for, CliError, ReferenceKind, ScenarioConfig};
use crate::diagnostics::l1_error;
use crate::fvm::{init_state, Scheme, SolverState};
use crate::mesh::SphereMesh;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n_phi: usize,
    pub n_theta: usize,
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    pub l1_error: f64,
    /// `log₂(e_l / e_{l+1})`, absent on the finest level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln e` against `ln h`.
    pub fitted_order: f64,
}

impl ConvergenceTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l1_error < w[0].l1_error)
    }

    pub fn min_order(&self) -> f64 {
        self.rows.iter().filter_map(|r| r.order).fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for ConvergenceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>6} {:>12} {:>12} {:>6} {:>14} {:>8}", "n_phi", "n_theta", "h", "tau", "steps", "L1 error", "order")?;
        for r in &self.rows {
            let order = r.order.map_or_else(|| "-".to_string(), |o| format!("{o:.3}"));
            writeln!(
                f,
                "{:>6} {:>6} {:>12.5e} {:>12.5e} {:>6} {:>14.6e} {:>8}",
                r.n_phi, r.n_theta, r.h, r.tau, r.steps, r.l1_error, order
            )?;
        }
        write!(f, "fitted order {:.3}", self.fitted_order)
    }
}

fn solve(config: &ScenarioConfig) -> Result<(SolverState, Scheme), CliError> {
    let s = config.build()?;
    let s0 = init_state(s.mesh.clone(), s.initial.as_ref())?;
    let mut scheme = Scheme::for_run(s.flux.clone(), config.numerical_flux.clone(), &s0, config.t_end)?;
    let end = scheme.run(s0, config.t_end, |_, _, _| Ok(()))?;
    Ok((end, scheme))
}

/// Average a solution on the mesh refined once in each direction down onto
/// `coarse`; band cells nest four to one and the caps coincide.
pub fn restrict(coarse: &SphereMesh, fine: &SphereMesh, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; coarse.cells.len()];
    for j in 0..coarse.n_theta {
        for i in 0..coarse.n_phi {
            let k = coarse.band_cell(i, j);
            let mut s = 0.0;
            for (di, dj) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let q = fine.band_cell(2 * i + di, 2 * j + dj);
                s += u[q] * fine.cells[q].area;
            }
            out[k] = s / coarse.cells[k].area;
        }
    }
    out[coarse.north_cap()] = u[fine.north_cap()];
    out[coarse.south_cap()] = u[fine.south_cap()];
    out
}

/// Run `base` on `levels` meshes, doubling `n_phi` and `n_theta` each time,
/// and measure the L¹ error against the scenario reference at `T`.
pub fn convergence_study(base: &ScenarioConfig, levels: usize) -> Result<ConvergenceTable, CliError> {
    if levels < 2 {
        return Err(CliError::Config(format!("converge: --levels must be at least 2, got {levels}")));
    }
    let kind = base
        .reference
        .ok_or_else(|| CliError::Config("converge: the scenario needs a reference".into()))?;
    let (n_phi, n_theta) = (base.mesh.n_phi, base.mesh.n_theta);
    let level = |l: usize| base.with_mesh(n_phi << l, n_theta << l);
    let fine = if kind == ReferenceKind::FineGrid {
        let cfg = level(levels);
        let (end, _) = solve(&cfg)?;
        Some(end)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(levels);
    for l in 0..levels {
        let cfg = level(l);
        let scenario = cfg.build()?;
        let (end, scheme) = solve(&cfg)?;
        let mesh = &end.mesh;
        let err = match &fine {
            Some(f) => {
                // restrict the finest solution down level by level
                let mut u = f.u.clone();
                let mut m = f.mesh.clone();
                for ll in (l..levels).rev() {
                    let coarse = std::sync::Arc::new(
                        SphereMesh::build_latlon(n_phi << ll, n_theta << ll, base.mesh.theta_min)
                            .map_err(|e| CliError::Config(format!("mesh: {e}")))?,
                    );
                    u = restrict(&coarse, &m, &u);
                    m = coarse;
                }
                mesh.cells.iter().map(|c| (end.u[c.id] - u[c.id]).abs() * c.area).sum()
            }
            None => {
                let r = reference_for(&scenario).expect("exact reference");
                let t = end.t;
                l1_error(mesh, &end.u, |x| r(t, x))
            }
        };
        rows.push(ConvergenceRow {
            n_phi: mesh.n_phi,
            n_theta: mesh.n_theta,
            h: band_spacing(mesh),
            tau: scheme.tau(),
            steps: end.n,
            l1_error: err,
            order: None,
        });
    }
    for l in 0..levels - 1 {
        rows[l].order = Some((rows[l].l1_error / rows[l + 1].l1_error).log2());
    }
    let fitted_order = fit(&rows);
    Ok(ConvergenceTable { rows, fitted_order })
}

/// Largest corner-to-corner great-circle distance of a band cell. The caps
/// keep their size under refinement, so the mesh-wide diameter would not
/// shrink.
pub fn band_spacing(mesh: &SphereMesh) -> f64 {
    let dphi = std::f64::consts::TAU / mesh.n_phi as f64;
    let arc = |p0: f64, t0: f64, p1: f64, t1: f64| {
        (t0.cos() * t1.cos() + t0.sin() * t1.sin() * (p1 - p0).cos()).clamp(-1.0, 1.0).acos()
    };
    (0..mesh.n_theta)
        .map(|j| {
            let (t0, t1) = (mesh.theta_line(j), mesh.theta_line(j + 1));
            arc(0.0, t0, dphi, t1).max(arc(dphi, t0, 0.0, t1))
        })
        .fold(0.0, f64::max)
}

fn fit(rows: &[ConvergenceRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.l1_error.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
