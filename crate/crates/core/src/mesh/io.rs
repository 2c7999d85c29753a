//! JSON mesh documents.
//!
//! ```json
//! {"vertices": [[x, y, z], ...], "faces": [[v0, v1, v2, ...], ...], "elements": [[f0, f1, ...], ...]}
//! ```
//!
//! An optional `"faults"` array lists deliberate orientation corruptions
//! applied after the orientation table is computed (used to exercise the
//! verification battery).

use serde::{Deserialize, Serialize};

use super::{Fault, Mesh, OrientationTable, Point};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
    pub elements: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
}

impl MeshDocument {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        MeshDocument {
            vertices: mesh.vertices.iter().map(|p| [p.x, p.y, p.z]).collect(),
            faces: mesh.faces.iter().map(|f| f.vertices.clone()).collect(),
            elements: mesh.elements.iter().map(|e| e.faces.clone()).collect(),
            faults: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mesh document serializes")
    }

    pub fn to_mesh(&self) -> Result<Mesh> {
        Mesh::from_parts(
            self.vertices.iter().map(|&[x, y, z]| Point::new(x, y, z)).collect(),
            self.faces.clone(),
            self.elements.clone(),
        )
    }

    /// Builds the mesh and its orientation table with the listed faults applied.
    pub fn to_mesh_and_orientation(&self) -> Result<(Mesh, OrientationTable)> {
        let mesh = self.to_mesh()?;
        let mut orientation = OrientationTable::compute(&mesh)?;
        for fault in &self.faults {
            orientation.apply_fault(&mesh, fault)?;
        }
        Ok((mesh, orientation))
    }
}

impl Mesh {
    /// Parses a JSON mesh document.
    pub fn load(text: &str) -> Result<Mesh> {
        MeshDocument::parse(text)?.to_mesh()
    }

    pub fn to_json(&self) -> String {
        MeshDocument::from_mesh(self).to_json()
    }
}
