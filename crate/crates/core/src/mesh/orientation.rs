//! Orientation and measure data of mesh entities: tangents, normals, the
//! relative orientations `omega_FE` and `omega_TF`, measures and centers.

use serde::{Deserialize, Serialize};

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Relative planarity tolerance: largest vertex deviation from the face
/// plane, divided by the face diameter.
pub const PLANARITY_TOL: f64 = 1e-9;
/// Relative tolerance below which an orientation sign is considered ambiguous.
const SIGN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGeometry {
    /// Unit tangent from the lower to the higher vertex index.
    pub tangent: Point,
    pub length: f64,
    pub midpoint: Point,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceGeometry {
    pub normal: Point,
    /// Orthonormal tangent frame with `tau[0] x tau[1] = normal`.
    pub tau: [Point; 2],
    pub area: f64,
    pub center: Point,
    pub diameter: f64,
    /// In-plane edge normals `n_FE = n_F x t_E`, in face edge-loop order.
    pub edge_normals: Vec<Point>,
    /// `omega_FE`, in face edge-loop order: `omega_FE * n_FE` points out of F.
    pub edge_signs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementGeometry {
    pub volume: f64,
    pub center: Point,
    pub diameter: f64,
    /// `omega_TF`, in element face order: `omega_TF * n_F` points out of T.
    pub face_signs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrientationTable {
    pub edges: Vec<EdgeGeometry>,
    pub faces: Vec<FaceGeometry>,
    pub elements: Vec<ElementGeometry>,
}

/// A deliberate corruption of the orientation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fault {
    /// Flip `omega_TF` for the given element and global face index.
    FlipElementFace { element: usize, face: usize },
    /// Flip `omega_FE` for the given face and global edge index.
    FlipFaceEdge { face: usize, edge: usize },
    /// Multiply the stored length of an edge by `factor`.
    ScaleEdgeLength { edge: usize, factor: f64 },
}

fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

fn sign(value: f64, scale: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if value.abs() <= SIGN_TOL * scale {
        return Err(Error::Geometry(format!("ambiguous orientation sign for {}", what())));
    }
    Ok(value.signum())
}

/// Newell normal (not normalized) of a closed polygon; its norm is twice the area.
pub(crate) fn newell(points: &[Point]) -> Point {
    let n = points.len();
    let mut acc = Point::zeros();
    for i in 0..n {
        let (p, q) = (points[i], points[(i + 1) % n]);
        acc.x += (p.y - q.y) * (p.z + q.z);
        acc.y += (p.z - q.z) * (p.x + q.x);
        acc.z += (p.x - q.x) * (p.y + q.y);
    }
    acc
}

impl OrientationTable {
    pub fn compute(mesh: &Mesh) -> Result<OrientationTable> {
        let edges = mesh
            .edges
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                let d = mesh.vertices[b] - mesh.vertices[a];
                let length = d.norm();
                if length <= 0.0 {
                    return Err(Error::Geometry(format!("edge {e} has zero length")));
                }
                Ok(EdgeGeometry {
                    tangent: d / length,
                    length,
                    midpoint: (mesh.vertices[a] + mesh.vertices[b]) * 0.5,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut faces = Vec::with_capacity(mesh.num_faces());
        for (f, face) in mesh.faces.iter().enumerate() {
            let pts: Vec<Point> = face.vertices.iter().map(|&v| mesh.vertices[v]).collect();
            let diam = diameter(&pts);
            let nw = newell(&pts);
            let area = 0.5 * nw.norm();
            if area <= 1e-14 * diam * diam {
                return Err(Error::Geometry(format!("face {f} has zero area")));
            }
            let normal = nw.normalize();
            let avg = pts.iter().sum::<Point>() / pts.len() as f64;
            let deviation = pts
                .iter()
                .map(|p| (p - avg).dot(&normal).abs())
                .fold(0.0, f64::max);
            if deviation > PLANARITY_TOL * diam {
                return Err(Error::Geometry(format!(
                    "face {f} is not planar (deviation {deviation:.3e})"
                )));
            }
            // Area centroid from the fan around the vertex average.
            let mut centroid = Point::zeros();
            let mut total = 0.0;
            for i in 0..pts.len() {
                let (p, q) = (pts[i], pts[(i + 1) % pts.len()]);
                let a = 0.5 * (p - avg).cross(&(q - avg)).dot(&normal);
                centroid += a * (avg + p + q) / 3.0;
                total += a;
            }
            let center = centroid / total;
            let tau0 = (pts[1] - pts[0]).normalize();
            let tau1 = normal.cross(&tau0);
            let mut edge_normals = Vec::with_capacity(face.edges.len());
            let mut edge_signs = Vec::with_capacity(face.edges.len());
            for &e in &face.edges {
                let n_fe = normal.cross(&edges[e].tangent);
                let s = sign(n_fe.dot(&(edges[e].midpoint - center)), diam, || {
                    format!("face {f}, edge {e}")
                })?;
                edge_normals.push(n_fe);
                edge_signs.push(s);
            }
            faces.push(FaceGeometry {
                normal,
                tau: [tau0, tau1],
                area,
                center,
                diameter: diam,
                edge_normals,
                edge_signs,
            });
        }

        let mut elements = Vec::with_capacity(mesh.num_elements());
        for (t, el) in mesh.elements.iter().enumerate() {
            let pts: Vec<Point> = el.vertices.iter().map(|&v| mesh.vertices[v]).collect();
            let diam = diameter(&pts);
            let avg = pts.iter().sum::<Point>() / pts.len() as f64;
            let mut volume = 0.0;
            let mut moment = Point::zeros();
            for &f in &el.faces {
                let fg = &faces[f];
                let s = fg.normal.dot(&(fg.center - avg)).signum();
                let loop_pts: Vec<Point> =
                    mesh.faces[f].vertices.iter().map(|&v| mesh.vertices[v]).collect();
                for i in 0..loop_pts.len() {
                    let (p, q) = (loop_pts[i], loop_pts[(i + 1) % loop_pts.len()]);
                    // Tetrahedron (avg, face center, p, q), made positive by the outward sign.
                    let v = s * (p - avg).cross(&(q - avg)).dot(&(fg.center - avg)) / 6.0;
                    volume += v;
                    moment += v * (avg + fg.center + p + q) / 4.0;
                }
            }
            if volume <= 1e-14 * diam.powi(3) {
                return Err(Error::Geometry(format!("element {t} has zero volume")));
            }
            let center = moment / volume;
            let face_signs = el
                .faces
                .iter()
                .map(|&f| {
                    let fg = &faces[f];
                    sign(fg.normal.dot(&(fg.center - center)), diam, || {
                        format!("element {t}, face {f}")
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            elements.push(ElementGeometry {
                volume,
                center,
                diameter: diam,
                face_signs,
            });
        }

        Ok(OrientationTable {
            edges,
            faces,
            elements,
        })
    }

    /// Position of a global edge in the edge loop of a face.
    pub fn local_edge(mesh: &Mesh, face: usize, edge: usize) -> Option<usize> {
        mesh.faces[face].edges.iter().position(|&e| e == edge)
    }

    pub fn apply_fault(&mut self, mesh: &Mesh, fault: &Fault) -> Result<()> {
        match *fault {
            Fault::FlipElementFace { element, face } => {
                let local = mesh
                    .elements
                    .get(element)
                    .and_then(|el| el.faces.iter().position(|&f| f == face))
                    .ok_or_else(|| {
                        Error::Reference(format!("fault: face {face} not in element {element}"))
                    })?;
                self.elements[element].face_signs[local] *= -1.0;
            }
            Fault::FlipFaceEdge { face, edge } => {
                let local = (face < mesh.num_faces())
                    .then(|| Self::local_edge(mesh, face, edge))
                    .flatten()
                    .ok_or_else(|| {
                        Error::Reference(format!("fault: edge {edge} not in face {face}"))
                    })?;
                self.faces[face].edge_signs[local] *= -1.0;
            }
            Fault::ScaleEdgeLength { edge, factor } => {
                let e = self
                    .edges
                    .get_mut(edge)
                    .ok_or_else(|| Error::Reference(format!("fault: no edge {edge}")))?;
                e.length *= factor;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin_pattern;

    fn table(name: &str, h: f64) -> (Mesh, OrientationTable) {
        let mesh = builtin_pattern(name).unwrap().build_mesh(h).unwrap();
        let table = OrientationTable::compute(&mesh).unwrap();
        (mesh, table)
    }

    #[test]
    fn unit_cube_geometry() {
        let (_, t) = table("cube", 1.0);
        assert!(t.edges.iter().all(|e| (e.length - 1.0).abs() < 1e-15));
        assert!(t.faces.iter().all(|f| (f.area - 1.0).abs() < 1e-15));
        let el = &t.elements[0];
        assert!((el.volume - 1.0).abs() < 1e-14);
        assert!((el.center - Point::new(0.5, 0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn closed_boundary_identities() {
        for name in ["cube", "ring", "cavity"] {
            let (mesh, t) = table(name, 0.5);
            for (f, fg) in t.faces.iter().enumerate() {
                let s: Point = mesh.faces[f]
                    .edges
                    .iter()
                    .zip(&fg.edge_signs)
                    .map(|(&e, &w)| w * t.edges[e].length * t.edges[e].tangent)
                    .sum();
                assert!(s.norm() < 1e-14, "{name} face {f}: {s:?}");
            }
            for (k, el) in mesh.elements.iter().enumerate() {
                let s: Point = el
                    .faces
                    .iter()
                    .zip(&t.elements[k].face_signs)
                    .map(|(&f, &w)| w * t.faces[f].area * t.faces[f].normal)
                    .sum();
                assert!(s.norm() < 1e-14, "{name} element {k}: {s:?}");
            }
        }
    }

    #[test]
    fn right_handed_edge_frames() {
        let (mesh, t) = table("cavity", 1.0);
        for (f, fg) in t.faces.iter().enumerate() {
            assert!((fg.tau[0].cross(&fg.tau[1]) - fg.normal).norm() < 1e-14);
            for (i, &e) in mesh.faces[f].edges.iter().enumerate() {
                let (te, nfe, nf) = (t.edges[e].tangent, fg.edge_normals[i], fg.normal);
                assert!((nfe.norm() - 1.0).abs() < 1e-12);
                assert!(nfe.dot(&te).abs() < 1e-12 && nfe.dot(&nf).abs() < 1e-12);
                let det = nalgebra::Matrix3::from_columns(&[te, nfe, nf]).determinant();
                assert!((det - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn induced_orientations_cancel_on_element_edges() {
        let (mesh, t) = table("ring", 1.0);
        for (k, el) in mesh.elements.iter().enumerate() {
            for &e in &el.edges {
                let mut sum = 0.0;
                for (lf, &f) in el.faces.iter().enumerate() {
                    if let Some(le) = OrientationTable::local_edge(&mesh, f, e) {
                        sum += t.elements[k].face_signs[lf] * t.faces[f].edge_signs[le];
                    }
                }
                assert_eq!(sum, 0.0, "element {k} edge {e}");
            }
        }
    }

    #[test]
    fn non_planar_face_is_rejected() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let mut doc = crate::mesh::MeshDocument::from_mesh(&mesh);
        let v = doc.faces[0][0];
        doc.vertices[v][0] += 0.1;
        doc.vertices[v][1] += 0.07;
        doc.vertices[v][2] += 0.05;
        let mesh = doc.to_mesh().unwrap();
        assert!(matches!(OrientationTable::compute(&mesh), Err(Error::Geometry(_))));
    }

    #[test]
    fn faults_flip_and_scale() {
        let (mesh, mut t) = table("cube", 1.0);
        let before = t.clone();
        t.apply_fault(&mesh, &Fault::FlipElementFace { element: 0, face: 2 }).unwrap();
        assert_eq!(t.elements[0].face_signs[2], -before.elements[0].face_signs[2]);
        let e = mesh.faces[1].edges[0];
        t.apply_fault(&mesh, &Fault::FlipFaceEdge { face: 1, edge: e }).unwrap();
        assert_eq!(t.faces[1].edge_signs[0], -before.faces[1].edge_signs[0]);
        t.apply_fault(&mesh, &Fault::ScaleEdgeLength { edge: 3, factor: 1.5 }).unwrap();
        assert_eq!(t.edges[3].length, 1.5);
        assert!(t
            .apply_fault(&mesh, &Fault::FlipElementFace { element: 0, face: 42 })
            .is_err());
    }
}
