use std::io::{self, Write};

use super::SphereMesh;
use crate::geometry::Point;

pub fn write_cells_csv<W: Write>(mesh: &SphereMesh, mut w: W) -> io::Result<()> {
    writeln!(w, "id,phi,theta,area,is_cap")?;
    for c in &mesh.cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.id, c.centroid[0], c.centroid[1], c.area, c.is_pole_cap as u8
        )?;
    }
    Ok(())
}

pub fn write_faces_csv<W: Write>(mesh: &SphereMesh, mut w: W) -> io::Result<()> {
    writeln!(w, "id,kind,measure,cell_a,cell_b")?;
    for f in &mesh.faces {
        writeln!(
            w,
            "{},{},{},{},{}",
            f.id,
            f.kind.as_str(),
            f.measure,
            f.cell_a,
            f.cell_b
        )?;
    }
    Ok(())
}

/// Legacy ASCII `UNSTRUCTURED_GRID` on the unit sphere: band cells as quads,
/// the caps as polygons, with `u` and the cell area as cell data.
pub fn write_vtk<W: Write>(mesh: &SphereMesh, u: &[f64], title: &str, mut w: W) -> io::Result<()> {
    let (np, nt) = (mesh.n_phi, mesh.n_theta);
    let node = |i: usize, j: usize| j * np + (i % np);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", np * (nt + 1))?;
    for j in 0..=nt {
        let theta = mesh.theta_line(j);
        for i in 0..np {
            let x = Point::<2>::new(i as f64 * mesh.dphi, theta);
            let (sp, cp) = x[0].sin_cos();
            let (st, ct) = x[1].sin_cos();
            writeln!(w, "{} {} {}", st * cp, st * sp, ct)?;
        }
    }
    let ncells = mesh.cells.len();
    let size = np * nt * 5 + 2 * (np + 1);
    writeln!(w, "CELLS {ncells} {size}")?;
    for j in 0..nt {
        for i in 0..np {
            writeln!(
                w,
                "4 {} {} {} {}",
                node(i, j),
                node(i + 1, j),
                node(i + 1, j + 1),
                node(i, j + 1)
            )?;
        }
    }
    let north: Vec<String> = (0..np).rev().map(|i| node(i, 0).to_string()).collect();
    writeln!(w, "{np} {}", north.join(" "))?;
    let south: Vec<String> = (0..np).map(|i| node(i, nt).to_string()).collect();
    writeln!(w, "{np} {}", south.join(" "))?;
    writeln!(w, "CELL_TYPES {ncells}")?;
    for _ in 0..np * nt {
        writeln!(w, "9")?;
    }
    writeln!(w, "7")?;
    writeln!(w, "7")?;
    writeln!(w, "CELL_DATA {ncells}")?;
    writeln!(w, "SCALARS u double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in u {
        writeln!(w, "{v}")?;
    }
    writeln!(w, "SCALARS area double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for c in &mesh.cells {
        writeln!(w, "{}", c.area)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vtk_layout() {
        let m = SphereMesh::build_latlon(4, 2, 0.3).unwrap();
        let u: Vec<f64> = (0..m.cells.len()).map(|i| i as f64 * 0.5).collect();
        let mut buf = Vec::new();
        write_vtk(&m, &u, "test", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "POINTS 12 double");
        assert!(text.contains("CELLS 10 50\n"));
        assert!(text.contains("CELL_TYPES 10\n"));
        assert!(text.contains("CELL_DATA 10\nSCALARS u double 1\nLOOKUP_TABLE default\n0\n0.5\n"));
        let cell_lines = text.split("CELLS 10 50\n").nth(1).unwrap().lines();
        let total: usize = cell_lines
            .take(10)
            .map(|l| l.split(' ').count())
            .sum();
        assert_eq!(total, 50);
    }

    #[test]
    fn csv_headers_and_rows() {
        let m = SphereMesh::build_latlon(3, 1, 0.5).unwrap();
        let mut cells = Vec::new();
        write_cells_csv(&m, &mut cells).unwrap();
        let cells = String::from_utf8(cells).unwrap();
        assert_eq!(cells.lines().count(), 1 + 5);
        assert!(cells.starts_with("id,phi,theta,area,is_cap\n"));
        let mut faces = Vec::new();
        write_faces_csv(&m, &mut faces).unwrap();
        let faces = String::from_utf8(faces).unwrap();
        assert_eq!(faces.lines().count(), 1 + m.faces.len());
        assert!(faces.contains(",cap-rim,"));
    }
}
