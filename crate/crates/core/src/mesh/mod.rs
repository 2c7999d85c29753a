//! Oriented polyhedral meshes.
//!
//! A [`Mesh`] stores vertex coordinates, face loops and element face lists.
//! Edges are derived from the face loops and sorted lexicographically by
//! `(min, max)` vertex index, so the canonical tangent of every edge points
//! from its lower to its higher vertex index.

mod io;
mod orientation;
mod voxel;

pub use io::MeshDocument;
pub(crate) use orientation::newell;
pub use orientation::{EdgeGeometry, ElementGeometry, FaceGeometry, Fault, OrientationTable};
pub use voxel::{builtin_pattern, Occupancy};

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// A polygonal face given by its vertex loop.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Vertex loop; the orientation of the loop fixes the face normal.
    pub vertices: Vec<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[(i + 1) % n]`.
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub faces: Vec<usize>,
    /// Sorted edge indices of the element boundary.
    pub edges: Vec<usize>,
    /// Sorted vertex indices of the element boundary.
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// `(V1, V2)` with `V1 < V2`.
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<Face>,
    pub elements: Vec<Element>,
    pub vertex_edges: Vec<Vec<usize>>,
    pub edge_faces: Vec<Vec<usize>>,
    pub face_elements: Vec<Vec<usize>>,
}

/// Entity counts `(V, E, F, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Counts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub elements: usize,
}

impl Counts {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64 - self.elements as i64
    }

    pub fn as_tuple(&self) -> (usize, usize, usize, usize) {
        (self.vertices, self.edges, self.faces, self.elements)
    }
}

impl Mesh {
    /// Builds and validates a mesh from raw vertex coordinates, face loops and
    /// element face lists.
    pub fn from_parts(
        vertices: Vec<Point>,
        face_loops: Vec<Vec<usize>>,
        element_faces: Vec<Vec<usize>>,
    ) -> Result<Mesh> {
        let nv = vertices.len();
        if nv == 0 {
            return Err(Error::Input("mesh has no vertices".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::Parse(format!("vertex {i}: non-finite coordinate")));
            }
        }
        for (f, face) in face_loops.iter().enumerate() {
            if let Some(&bad) = face.iter().find(|&&v| v >= nv) {
                return Err(Error::Reference(format!(
                    "face {f} references vertex {bad} of {nv}"
                )));
            }
            if face.len() < 3 {
                return Err(Error::Parse(format!(
                    "face {f}: unclosed loop with {} vertices",
                    face.len()
                )));
            }
            let n = face.len();
            if (0..n).any(|i| face[i] == face[(i + 1) % n]) {
                return Err(Error::Parse(format!("face {f}: degenerate loop {face:?}")));
            }
            let mut sorted = face.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != n {
                return Err(Error::Parse(format!(
                    "face {f}: degenerate loop {face:?} (repeated vertex)"
                )));
            }
        }
        let nf = face_loops.len();
        for (t, el) in element_faces.iter().enumerate() {
            if let Some(&bad) = el.iter().find(|&&f| f >= nf) {
                return Err(Error::Reference(format!(
                    "element {t} references face {bad} of {nf}"
                )));
            }
            if el.len() < 4 {
                return Err(Error::Topology(format!(
                    "element {t} has only {} faces",
                    el.len()
                )));
            }
        }
        if element_faces.is_empty() {
            return Err(Error::Input("mesh has no elements".into()));
        }

        // Edges, sorted lexicographically by (min, max).
        let mut edge_keys: Vec<[usize; 2]> = face_loops
            .iter()
            .flat_map(|l| {
                (0..l.len()).map(move |i| {
                    let (a, b) = (l[i], l[(i + 1) % l.len()]);
                    [a.min(b), a.max(b)]
                })
            })
            .collect();
        edge_keys.sort_unstable();
        edge_keys.dedup();
        let edge_index: HashMap<[usize; 2], usize> =
            edge_keys.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        let faces: Vec<Face> = face_loops
            .into_iter()
            .map(|l| {
                let n = l.len();
                let edges = (0..n)
                    .map(|i| {
                        let (a, b) = (l[i], l[(i + 1) % n]);
                        edge_index[&[a.min(b), a.max(b)]]
                    })
                    .collect();
                Face { vertices: l, edges }
            })
            .collect();

        let mut face_elements = vec![Vec::new(); faces.len()];
        for (t, el) in element_faces.iter().enumerate() {
            for &f in el {
                face_elements[f].push(t);
            }
        }
        for (f, els) in face_elements.iter().enumerate() {
            match els.len() {
                1 | 2 => {}
                0 => return Err(Error::Topology(format!("face {f} belongs to no element"))),
                n => {
                    return Err(Error::Topology(format!(
                        "face {f} is referenced by {n} elements"
                    )))
                }
            }
            if els.len() == 2 && els[0] == els[1] {
                return Err(Error::Topology(format!("face {f} listed twice in element {}", els[0])));
            }
        }

        let mut elements = Vec::with_capacity(element_faces.len());
        for (t, el) in element_faces.into_iter().enumerate() {
            // Closed boundary: every edge of the element lies on exactly two of its faces.
            let mut edge_count: BTreeMap<usize, usize> = BTreeMap::new();
            for &f in &el {
                for &e in &faces[f].edges {
                    *edge_count.entry(e).or_default() += 1;
                }
            }
            if let Some((e, c)) = edge_count.iter().find(|(_, &c)| c != 2) {
                return Err(Error::Topology(format!(
                    "element {t}: edge {e} shared by {c} of its faces, boundary not closed"
                )));
            }
            let edges: Vec<usize> = edge_count.keys().copied().collect();
            let mut verts: Vec<usize> = edges.iter().flat_map(|&e| edge_keys[e]).collect();
            verts.sort_unstable();
            verts.dedup();
            elements.push(Element {
                faces: el,
                edges,
                vertices: verts,
            });
        }

        let mut vertex_edges = vec![Vec::new(); nv];
        for (e, &[a, b]) in edge_keys.iter().enumerate() {
            vertex_edges[a].push(e);
            vertex_edges[b].push(e);
        }
        let mut edge_faces = vec![Vec::new(); edge_keys.len()];
        for (f, face) in faces.iter().enumerate() {
            for &e in &face.edges {
                edge_faces[e].push(f);
            }
        }

        let mesh = Mesh {
            vertices,
            edges: edge_keys,
            faces,
            elements,
            vertex_edges,
            edge_faces,
            face_elements,
        };
        mesh.check_connected()?;
        Ok(mesh)
    }

    fn check_connected(&self) -> Result<()> {
        let nv = self.vertices.len();
        let mut seen = vec![false; nv];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &e in &self.vertex_edges[v] {
                let [a, b] = self.edges[e];
                let w = if a == v { b } else { a };
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            None => Ok(()),
            Some(v) => Err(Error::Topology(format!(
                "vertex-edge graph is disconnected (vertex {v} unreachable from vertex 0)"
            ))),
        }
    }

    pub fn counts(&self) -> Counts {
        Counts {
            vertices: self.vertices.len(),
            edges: self.edges.len(),
            faces: self.faces.len(),
            elements: self.elements.len(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Sorted vertex indices of a face.
    pub fn face_vertices_sorted(&self, f: usize) -> Vec<usize> {
        let mut v = self.faces[f].vertices.clone();
        v.sort_unstable();
        v
    }

    /// Whether a face lies on the domain boundary.
    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_elements[f].len() == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_cube_parts() -> (Vec<Point>, Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let v = |x: f64, y: f64, z: f64| Point::new(x, y, z);
        let vertices = vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(0., 1., 0.),
            v(1., 1., 0.),
            v(0., 0., 1.),
            v(1., 0., 1.),
            v(0., 1., 1.),
            v(1., 1., 1.),
        ];
        let faces = vec![
            vec![0, 2, 3, 1],
            vec![4, 5, 7, 6],
            vec![0, 1, 5, 4],
            vec![2, 6, 7, 3],
            vec![0, 4, 6, 2],
            vec![1, 3, 7, 5],
        ];
        (vertices, faces, vec![vec![0, 1, 2, 3, 4, 5]])
    }

    #[test]
    fn cube_counts_and_edges_sorted() {
        let (v, f, t) = unit_cube_parts();
        let mesh = Mesh::from_parts(v, f, t).unwrap();
        assert_eq!(mesh.counts().as_tuple(), (8, 12, 6, 1));
        assert!(mesh.edges.windows(2).all(|w| w[0] < w[1]));
        assert!(mesh.edges.iter().all(|e| e[0] < e[1]));
        assert_eq!(mesh.elements[0].vertices, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_loop_is_parse_error() {
        let (v, mut f, t) = unit_cube_parts();
        f[0] = vec![0, 1, 1, 2];
        let err = Mesh::from_parts(v, f, t).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
        assert!(err.to_string().contains("degenerate loop"));
    }

    #[test]
    fn dangling_face_index_is_reference_error() {
        let (v, f, _) = unit_cube_parts();
        let err = Mesh::from_parts(v, f, vec![vec![0, 1, 2, 3, 4, 99]]).unwrap_err();
        assert!(matches!(err, Error::Reference(_)), "{err}");
    }

    #[test]
    fn face_in_three_elements_is_topology_error() {
        let (v, f, _) = unit_cube_parts();
        let t = vec![vec![0, 1, 2, 3, 4, 5]; 3];
        let err = Mesh::from_parts(v, f, t).unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }

    #[test]
    fn open_element_is_topology_error() {
        let (v, f, _) = unit_cube_parts();
        let err = Mesh::from_parts(v, f, vec![vec![0, 1, 2, 3, 4]]).unwrap_err();
        assert!(matches!(err, Error::Topology(_)), "{err}");
    }
}
