//! Global numbering of the unknowns of the discrete spaces.

use std::ops::Range;

use serde::Serialize;

use crate::error::Result;
use crate::mesh::Mesh;
use crate::poly::{space_dim, SubspaceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Grad,
    Curl,
    Div,
    Pk,
}

impl Space {
    pub const ALL: [Space; 4] = [Space::Grad, Space::Curl, Space::Div, Space::Pk];

    pub fn name(self) -> &'static str {
        match self {
            Space::Grad => "grad",
            Space::Curl => "curl",
            Space::Div => "div",
            Space::Pk => "pk",
        }
    }
}

/// One polynomial component attached to a mesh entity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// Entity dimension: 0 vertex, 1 edge, 2 face, 3 element.
    pub entity_dim: usize,
    pub entity: usize,
    pub kind: SubspaceKind,
    pub degree: i32,
    pub offset: usize,
    pub len: usize,
}

impl Component {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Clone, Debug)]
pub struct DofLayout {
    pub space: Space,
    pub degree: usize,
    pub components: Vec<Component>,
    pub total: usize,
    /// `slots[d][i]`: indices into `components` for entity `i` of dimension `d`.
    slots: [Vec<Vec<usize>>; 4],
}

/// Component kinds and degrees carried by each entity dimension.
fn pattern(space: Space, k: i32) -> [Vec<(SubspaceKind, i32)>; 4] {
    use SubspaceKind::*;
    match space {
        Space::Grad => [vec![(P, 0)], vec![(P, k - 1)], vec![(P, k - 1)], vec![(P, k - 1)]],
        Space::Curl => [vec![], vec![(P, k)], vec![(R, k - 1), (Rc, k)], vec![(R, k - 1), (Rc, k)]],
        Space::Div => [vec![], vec![], vec![(P, k)], vec![(G, k - 1), (Gc, k)]],
        Space::Pk => [vec![], vec![], vec![], vec![(P, k)]],
    }
}

impl DofLayout {
    pub fn new(space: Space, degree: usize, mesh: &Mesh) -> Result<DofLayout> {
        let counts = [mesh.num_vertices(), mesh.num_edges(), mesh.num_faces(), mesh.num_elements()];
        let pattern = pattern(space, degree as i32);
        let mut components = Vec::new();
        let mut slots: [Vec<Vec<usize>>; 4] = Default::default();
        let mut offset = 0;
        for d in 0..4 {
            slots[d] = vec![Vec::new(); counts[d]];
            for (entity, slot) in slots[d].iter_mut().enumerate() {
                for &(kind, deg) in &pattern[d] {
                    // Vertex values are single scalars.
                    let len = if d == 0 { 1 } else { space_dim(kind, deg, d)? };
                    slot.push(components.len());
                    components.push(Component {
                        entity_dim: d,
                        entity,
                        kind,
                        degree: deg,
                        offset,
                        len,
                    });
                    offset += len;
                }
            }
        }
        Ok(DofLayout {
            space,
            degree,
            components,
            total: offset,
            slots,
        })
    }

    /// Components of one entity, in storage order.
    pub fn entity(&self, entity_dim: usize, entity: usize) -> impl Iterator<Item = &Component> {
        self.slots[entity_dim][entity].iter().map(|&c| &self.components[c])
    }

    /// The `slot`-th component of an entity.
    pub fn component(&self, entity_dim: usize, entity: usize, slot: usize) -> &Component {
        &self.components[self.slots[entity_dim][entity][slot]]
    }

    pub fn range(&self, entity_dim: usize, entity: usize, slot: usize) -> Range<usize> {
        self.component(entity_dim, entity, slot).range()
    }

    /// All unknowns attached to an entity.
    pub fn entity_range(&self, entity_dim: usize, entity: usize) -> Range<usize> {
        let slots = &self.slots[entity_dim][entity];
        match (slots.first(), slots.last()) {
            (Some(&a), Some(&b)) => self.components[a].offset..self.components[b].range().end,
            _ => 0..0,
        }
    }

    /// Unknowns of the restriction of the space to the closure of an
    /// entity, in increasing global order.
    pub fn closure(&self, mesh: &Mesh, entity_dim: usize, entity: usize) -> Vec<usize> {
        let mut entities: [Vec<usize>; 4] = Default::default();
        match entity_dim {
            0 => entities[0] = vec![entity],
            1 => {
                entities[0] = mesh.edges[entity].to_vec();
                entities[1] = vec![entity];
            }
            2 => {
                entities[0] = mesh.face_vertices_sorted(entity);
                entities[1] = mesh.faces[entity].edges.clone();
                entities[2] = vec![entity];
            }
            _ => {
                let el = &mesh.elements[entity];
                entities[0] = el.vertices.clone();
                entities[1] = el.edges.clone();
                entities[2] = el.faces.clone();
                entities[3] = vec![entity];
            }
        }
        let mut out: Vec<usize> = (0..4)
            .flat_map(|d| entities[d].iter().flat_map(move |&e| self.entity_range(d, e)))
            .collect();
        out.sort_unstable();
        out
    }
}
