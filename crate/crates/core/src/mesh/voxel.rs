//! Axis-aligned voxel meshes built from boolean occupancy grids.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// A 3D boolean occupancy grid, `x` index varying fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    pub dims: [usize; 3],
    cells: Vec<bool>,
}

impl Occupancy {
    pub fn new(dims: [usize; 3], cells: Vec<bool>) -> Result<Self> {
        if cells.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Input(format!(
                "occupancy grid {dims:?} needs {} cells, got {}",
                dims[0] * dims[1] * dims[2],
                cells.len()
            )));
        }
        Ok(Occupancy { dims, cells })
    }

    pub fn full(dims: [usize; 3]) -> Self {
        Occupancy {
            dims,
            cells: vec![true; dims[0] * dims[1] * dims[2]],
        }
    }

    fn index(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, c: [usize; 3]) -> bool {
        c.iter().zip(self.dims).all(|(&x, n)| x < n) && self.cells[self.index(c)]
    }

    pub fn set(&mut self, c: [usize; 3], value: bool) {
        let idx = self.index(c);
        self.cells[idx] = value;
    }

    /// Occupied cells in `(k, j, i)` lexicographic order.
    pub fn occupied(&self) -> Vec<[usize; 3]> {
        let [nx, ny, nz] = self.dims;
        let mut out = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.cells[self.index([i, j, k])] {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    /// Parses a text pattern: the first non-comment line holds `nx ny nz`,
    /// followed by `nz` blocks of `ny` rows of `nx` characters, where `#`,
    /// `x`, `X` or `1` mark occupied cells. Blank lines and `//` comments are
    /// ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with("//"));
        let header = lines
            .next()
            .ok_or_else(|| Error::Input("empty occupancy pattern".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Input(format!("bad pattern header {header:?}: {e}")))?;
        let [nx, ny, nz] = <[usize; 3]>::try_from(dims)
            .map_err(|_| Error::Input(format!("pattern header needs 3 sizes: {header:?}")))?;
        let mut cells = vec![false; nx * ny * nz];
        for k in 0..nz {
            for j in 0..ny {
                let row = lines.next().ok_or_else(|| {
                    Error::Input(format!("pattern truncated at layer {k}, row {j}"))
                })?;
                let chars: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
                if chars.len() != nx {
                    return Err(Error::Input(format!(
                        "pattern row {j} of layer {k} has {} cells, expected {nx}",
                        chars.len()
                    )));
                }
                for (i, c) in chars.into_iter().enumerate() {
                    cells[i + nx * (j + ny * k)] = matches!(c, '#' | 'x' | 'X' | '1');
                }
            }
        }
        Occupancy::new([nx, ny, nz], cells)
    }

    fn is_face_connected(&self, occupied: &[[usize; 3]]) -> bool {
        let Some(&start) = occupied.first() else {
            return false;
        };
        let mut seen = vec![false; self.cells.len()];
        seen[self.index(start)] = true;
        let mut count = 1;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            for axis in 0..3 {
                for delta in [-1i64, 1] {
                    let n = c[axis] as i64 + delta;
                    if n < 0 || n as usize >= self.dims[axis] {
                        continue;
                    }
                    let mut nb = c;
                    nb[axis] = n as usize;
                    let idx = self.index(nb);
                    if self.cells[idx] && !seen[idx] {
                        seen[idx] = true;
                        count += 1;
                        queue.push_back(nb);
                    }
                }
            }
        }
        count == occupied.len()
    }

    /// Builds the voxel mesh with cubes of side `h`.
    ///
    /// Vertices are numbered in `(z, y, x)` lexicographic order of their grid
    /// coordinates; face loops are oriented so that their normal points along
    /// the positive coordinate axis.
    pub fn build_mesh(&self, h: f64) -> Result<Mesh> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Input(format!("cell size must be positive, got {h}")));
        }
        let occupied = self.occupied();
        if occupied.is_empty() {
            return Err(Error::Input("empty occupancy pattern".into()));
        }
        if !self.is_face_connected(&occupied) {
            return Err(Error::Input(
                "disconnected occupancy: occupied cells are not face-connected".into(),
            ));
        }

        let corners: BTreeSet<[usize; 3]> = occupied
            .iter()
            .flat_map(|&[i, j, k]| {
                (0..8).map(move |c| [i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)])
            })
            .map(|[i, j, k]| [k, j, i])
            .collect();
        let vertex_index: HashMap<[usize; 3], usize> = corners
            .iter()
            .enumerate()
            .map(|(n, &[k, j, i])| ([i, j, k], n))
            .collect();
        let vertices: Vec<Point> = corners
            .iter()
            .map(|&[k, j, i]| Point::new(i as f64 * h, j as f64 * h, k as f64 * h))
            .collect();

        // A face is keyed by its normal axis and its lower corner.
        let mut face_index: HashMap<(usize, [usize; 3]), usize> = HashMap::new();
        let mut face_loops: Vec<Vec<usize>> = Vec::new();
        let mut elements = Vec::with_capacity(occupied.len());
        for &cell in &occupied {
            let mut el = Vec::with_capacity(6);
            for axis in 0..3 {
                for side in 0..2 {
                    let mut lower = cell;
                    lower[axis] += side;
                    let key = (axis, lower);
                    let f = *face_index.entry(key).or_insert_with(|| {
                        // (u, w) span the face with u x w = +e_axis.
                        let u = (axis + 1) % 3;
                        let w = (axis + 2) % 3;
                        let corner = |du: usize, dw: usize| {
                            let mut c = lower;
                            c[u] += du;
                            c[w] += dw;
                            vertex_index[&c]
                        };
                        face_loops.push(vec![corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]);
                        face_loops.len() - 1
                    });
                    el.push(f);
                }
            }
            elements.push(el);
        }
        Mesh::from_parts(vertices, face_loops, elements)
    }
}

/// The builtin test topologies: `cube` (one cell), `ring` (3x3x1 slab
/// without its center cell) and `cavity` (3x3x3 block without its center).
pub fn builtin_pattern(name: &str) -> Result<Occupancy> {
    match name {
        "cube" => Ok(Occupancy::full([1, 1, 1])),
        "ring" => {
            let mut o = Occupancy::full([3, 3, 1]);
            o.set([1, 1, 0], false);
            Ok(o)
        }
        "cavity" => {
            let mut o = Occupancy::full([3, 3, 3]);
            o.set([1, 1, 1], false);
            Ok(o)
        }
        other => Err(Error::Input(format!(
            "unknown builtin mesh {other:?} (expected cube, ring or cavity)"
        ))),
    }
}
