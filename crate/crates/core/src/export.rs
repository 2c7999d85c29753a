//! Legacy ASCII VTK output: polyhedral cells with per-element vector fields.

use std::fmt::Write;

use nalgebra::DMatrix;

use crate::ddr::Ddr;
use crate::error::{Error, Result};
use crate::lift::LiftedGenerators;
use crate::mesh::{Mesh, OrientationTable, Point};
use crate::poly::tabulate_coeffs;

/// VTK cell type of general polyhedra.
const VTK_POLYHEDRON: usize = 42;

/// Values at the element centers of the element potential of a lifted
/// generator: `P_curl` for `H^1`, `P_div` for `H^2`.
pub fn element_center_values(ddr: &Ddr, generator: &LiftedGenerators) -> Result<Vec<Point>> {
    let x = nalgebra::DVector::from_column_slice(&generator.single_vector(ddr)?);
    let k = ddr.k as i32;
    (0..ddr.mesh.num_elements())
        .map(|t| {
            let ops = &ddr.elements[t];
            let op = if generator.index == 1 { &ops.curl_potential } else { &ops.div_potential };
            let coeffs = op.apply(&x);
            let frame = ddr.element_frame(t);
            let coeffs = DMatrix::from_column_slice(coeffs.len(), 1, coeffs.as_slice());
            let tab = tabulate_coeffs(frame, true, k, &coeffs, &[frame.center]);
            Ok(Point::new(tab.components[0][(0, 0)], tab.components[1][(0, 0)], tab.components[2][(0, 0)]))
        })
        .collect()
}

impl LiftedGenerators {
    /// The first lifted vector, checked against the dimension of the
    /// target space.
    fn single_vector(&self, ddr: &Ddr) -> Result<Vec<f64>> {
        let expected = if self.index == 1 { ddr.curl.total } else { ddr.div.total };
        match self.vectors.first() {
            Some(v) if v.len() == expected => Ok(v.clone()),
            Some(v) => Err(Error::Domain(format!("generator has {} entries, space has {expected}", v.len()))),
            None => Err(Error::Domain("no generator to export".into())),
        }
    }

    /// Splits a multi-generator set into one set per generator.
    pub fn split(&self) -> Vec<LiftedGenerators> {
        self.vectors
            .iter()
            .map(|v| LiftedGenerators {
                vectors: vec![v.clone()],
                ..self.clone()
            })
            .collect()
    }
}

/// Vertex loops of the faces of element `t`, reversed where the face
/// normal points into the element.
fn outward_loops(mesh: &Mesh, orientation: &OrientationTable, t: usize) -> Vec<Vec<usize>> {
    let el = &mesh.elements[t];
    el.faces
        .iter()
        .zip(&orientation.elements[t].face_signs)
        .map(|(&f, &sign)| {
            let mut l = mesh.faces[f].vertices.clone();
            if sign < 0.0 {
                l.reverse();
            }
            l
        })
        .collect()
}

/// Writes the mesh as polyhedral cells (faces oriented outward) with one
/// vector per element for every named field.
pub fn write_vtk(mesh: &Mesh, orientation: &OrientationTable, fields: &[(String, Vec<Point>)]) -> String {
    let mut s = String::new();
    let nt = mesh.num_elements();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "discrete de Rham generators").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.num_vertices()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    let cells: Vec<Vec<usize>> = mesh
        .elements
        .iter()
        .enumerate()
        .map(|(t, el)| {
            let mut stream = vec![el.faces.len()];
            for loop_ in outward_loops(mesh, orientation, t) {
                stream.push(loop_.len());
                stream.extend(loop_);
            }
            stream.insert(0, stream.len());
            stream
        })
        .collect();
    let size: usize = cells.iter().map(Vec::len).sum();
    writeln!(s, "CELLS {nt} {size}").unwrap();
    for c in &cells {
        let line: Vec<String> = c.iter().map(ToString::to_string).collect();
        writeln!(s, "{}", line.join(" ")).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "{VTK_POLYHEDRON}").unwrap();
    }
    if !fields.is_empty() {
        writeln!(s, "CELL_DATA {nt}").unwrap();
        for (name, values) in fields {
            writeln!(s, "VECTORS {name} double").unwrap();
            for v in values {
                writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
            }
        }
    }
    s
}
