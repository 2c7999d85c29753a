//! The cellular cochain complex of a mesh: integer coboundaries, exact
//! Betti numbers, cohomology generators and the measure scalings that
//! identify it with the lowest-order discrete complex.
//!
//! Incidence signs are recomputed here from the face loops and element
//! surfaces instead of being read from the orientation table, so that the
//! two constructions check each other.

use std::collections::{HashMap, VecDeque};

use nalgebra::DVector;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, OrientationTable};
use crate::poly::rational::QMatrix;

/// Dense integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let i = r * other.cols + c;
                    out.data[i] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn to_rational(&self) -> QMatrix {
        QMatrix::from_i64(self.rows, self.cols, &self.data)
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |r, c| self.get(r, c) as f64)
    }
}

/// Fraction-free (Bareiss) elimination in `i64` with overflow detection.
fn bareiss_i64(m: &IntMatrix) -> Option<usize> {
    let mut a = m.data.clone();
    let (rows, cols) = (m.rows, m.cols);
    let mut prev: i64 = 1;
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| a[r * cols + c] != 0) else {
            continue;
        };
        if p != rank {
            for j in 0..cols {
                a.swap(p * cols + j, rank * cols + j);
            }
        }
        let pivot = a[rank * cols + c];
        for r in rank + 1..rows {
            let f = a[r * cols + c];
            for j in c..cols {
                let v = pivot
                    .checked_mul(a[r * cols + j])?
                    .checked_sub(f.checked_mul(a[rank * cols + j])?)?;
                a[r * cols + j] = v / prev;
            }
        }
        prev = pivot;
        rank += 1;
    }
    Some(rank)
}

fn bareiss_big(m: &IntMatrix) -> usize {
    let (rows, cols) = (m.rows, m.cols);
    let mut a: Vec<BigInt> = m.data.iter().map(|&v| BigInt::from(v)).collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r * cols + c].is_zero()) else {
            continue;
        };
        if p != rank {
            for j in 0..cols {
                a.swap(p * cols + j, rank * cols + j);
            }
        }
        let pivot = a[rank * cols + c].clone();
        for r in rank + 1..rows {
            let f = a[r * cols + c].clone();
            for j in c..cols {
                let v = &pivot * &a[r * cols + j] - &f * &a[rank * cols + j];
                a[r * cols + j] = v / &prev;
            }
        }
        prev = pivot;
        rank += 1;
    }
    rank
}

/// Exact rank over the rationals. Runs in `i64` and repeats the
/// elimination with big integers if an intermediate value overflows.
pub fn integer_rank(m: &IntMatrix) -> usize {
    bareiss_i64(m).unwrap_or_else(|| bareiss_big(m))
}

/// Betti numbers `(b0, b1, b2, b3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct BettiVector(pub [usize; 4]);

impl BettiVector {
    pub fn euler_characteristic(&self) -> i64 {
        let [a, b, c, d] = self.0.map(|x| x as i64);
        a - b + c - d
    }
}

/// Integer coboundary matrices `d0: V* -> E*`, `d1: E* -> F*`, `d2: F* -> T*`.
#[derive(Clone, Debug)]
pub struct CochainComplexInt {
    pub d: [IntMatrix; 3],
}

/// Outward orientation of each face of each element, from the face loops
/// alone: neighbouring faces must traverse their shared edge in opposite
/// directions, and the global sign makes the enclosed signed volume positive.
fn element_face_signs(mesh: &Mesh, t: usize) -> Result<Vec<i64>> {
    let faces = &mesh.elements[t].faces;
    // Direction in which each face loop traverses each of its edges.
    let traversal = |f: usize| -> HashMap<usize, i64> {
        let vs = &mesh.faces[f].vertices;
        mesh.faces[f]
            .edges
            .iter()
            .enumerate()
            .map(|(i, &e)| (e, if vs[i] < vs[(i + 1) % vs.len()] { 1 } else { -1 }))
            .collect()
    };
    let dirs: Vec<HashMap<usize, i64>> = faces.iter().map(|&f| traversal(f)).collect();
    let mut sign = vec![0i64; faces.len()];
    sign[0] = 1;
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        for j in 0..faces.len() {
            for (e, di) in &dirs[i] {
                if let Some(dj) = dirs[j].get(e) {
                    if i == j {
                        continue;
                    }
                    let want = -sign[i] * di * dj;
                    if sign[j] == 0 {
                        sign[j] = want;
                        queue.push_back(j);
                    } else if sign[j] != want {
                        return Err(Error::Topology(format!(
                            "element {t}: boundary surface is not orientable"
                        )));
                    }
                }
            }
        }
    }
    // Signed volume through the divergence theorem: sum_F s_F x_F . N_F / 3.
    let mut volume = 0.0;
    for (i, &f) in faces.iter().enumerate() {
        let pts: Vec<_> = mesh.faces[f].vertices.iter().map(|&v| mesh.vertices[v]).collect();
        let n = crate::mesh::newell(&pts) * 0.5;
        volume += sign[i] as f64 * pts[0].dot(&n) / 3.0;
    }
    if volume < 0.0 {
        sign.iter_mut().for_each(|s| *s = -*s);
    }
    Ok(sign)
}

impl CochainComplexInt {
    pub fn build(mesh: &Mesh) -> Result<CochainComplexInt> {
        let (nv, ne, nf, nt) = mesh.counts().as_tuple();
        let mut d0 = IntMatrix::zeros(ne, nv);
        for (e, &[v1, v2]) in mesh.edges.iter().enumerate() {
            d0.set(e, v1, -1);
            d0.set(e, v2, 1);
        }
        // Boundary incidence: +1 when the face loop runs along the edge
        // direction (lower to higher vertex index).
        let mut d1 = IntMatrix::zeros(nf, ne);
        for (f, face) in mesh.faces.iter().enumerate() {
            let vs = &face.vertices;
            for (i, &e) in face.edges.iter().enumerate() {
                let s = if vs[i] < vs[(i + 1) % vs.len()] { 1 } else { -1 };
                d1.set(f, e, s);
            }
        }
        let mut d2 = IntMatrix::zeros(nt, nf);
        for (t, el) in mesh.elements.iter().enumerate() {
            for (s, &f) in element_face_signs(mesh, t)?.into_iter().zip(&el.faces) {
                d2.set(t, f, s);
            }
        }
        let complex = CochainComplexInt { d: [d0, d1, d2] };
        for i in 0..2 {
            if !complex.d[i + 1].mul(&complex.d[i]).is_zero() {
                return Err(Error::Internal(format!(
                    "coboundaries d{} d{} do not compose to zero",
                    i + 1,
                    i
                )));
            }
        }
        Ok(complex)
    }

    pub fn ranks(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| integer_rank(&self.d[i]))
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.d[0].cols, self.d[0].rows, self.d[1].rows, self.d[2].rows]
    }

    pub fn betti_numbers(&self) -> BettiVector {
        let [r0, r1, r2] = self.ranks();
        let [v, e, f, t] = self.dims();
        BettiVector([v - r0, e - r1 - r0, f - r2 - r1, t - r2])
    }

    /// Cochains representing a basis of `H^i`, `i in {1, 2}`: cocycles of
    /// `d_i` independent modulo the image of `d_{i-1}`, as primitive
    /// integer vectors. Fails if the rank certificate does not hold.
    pub fn cohomology_generators(&self, i: usize) -> Result<Vec<Vec<i64>>> {
        if !(1..=2).contains(&i) {
            return Err(Error::Domain(format!("generators are computed for i = 1, 2, not {i}")));
        }
        let outgoing = self.d[i].to_rational();
        let incoming = self.d[i - 1].to_rational();
        let kernel = outgoing.nullspace();
        let image = incoming.select_columns(&incoming.independent_columns());
        let stacked = image.hstack(&kernel);
        let picked: Vec<usize> = stacked
            .independent_columns()
            .into_iter()
            .filter(|&c| c >= image.ncols())
            .collect();
        let gens = stacked.select_columns(&picked).primitive_integer_columns();

        // Certificate: cocycles, and independent modulo the image.
        let residual = outgoing.mul(&gens);
        let rank = image.hstack(&gens).rank();
        if !residual.is_zero() || rank != image.ncols() + gens.ncols() {
            return Err(Error::Certification(format!(
                "H^{i} generators failed certification (rank {rank}, expected {})",
                image.ncols() + gens.ncols()
            )));
        }
        (0..gens.ncols())
            .map(|c| {
                gens.column(c)
                    .into_iter()
                    .map(|v| {
                        let n = v.to_integer();
                        i64::try_from(&n).map_err(|_| {
                            Error::Internal(format!("generator entry {n} exceeds 64 bits"))
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Which lowest-order space a de Rham map acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeRhamSpace {
    Grad,
    Curl,
    Div,
    Pk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Diagonal scalings `kappa` between lowest-order unknowns and cochains:
/// identity on vertex values, `|E|`, `|F|` and `|T|` on edges, faces and
/// elements.
#[derive(Clone, Debug)]
pub struct DeRhamScaling {
    pub diagonals: [DVector<f64>; 4],
}

impl DeRhamScaling {
    pub fn new(mesh: &Mesh, orientation: &OrientationTable) -> Result<DeRhamScaling> {
        let d = DeRhamScaling {
            diagonals: [
                DVector::from_element(mesh.num_vertices(), 1.0),
                DVector::from_iterator(mesh.num_edges(), orientation.edges.iter().map(|e| e.length)),
                DVector::from_iterator(mesh.num_faces(), orientation.faces.iter().map(|f| f.area)),
                DVector::from_iterator(mesh.num_elements(), orientation.elements.iter().map(|t| t.volume)),
            ],
        };
        if d.diagonals.iter().any(|v| v.iter().any(|&x| !(x > 0.0 && x.is_finite()))) {
            return Err(Error::Internal("de Rham scaling with non-positive measure".into()));
        }
        Ok(d)
    }

    fn index(space: DeRhamSpace) -> usize {
        match space {
            DeRhamSpace::Grad => 0,
            DeRhamSpace::Curl => 1,
            DeRhamSpace::Div => 2,
            DeRhamSpace::Pk => 3,
        }
    }

    pub fn diagonal(&self, space: DeRhamSpace) -> &DVector<f64> {
        &self.diagonals[Self::index(space)]
    }

    /// `kappa x` (forward) or `kappa^{-1} x` (inverse).
    pub fn de_rham_map(&self, direction: Direction, space: DeRhamSpace, x: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.diagonal(space);
        if d.len() != x.len() {
            return Err(Error::Domain(format!(
                "de Rham map on {space:?} expects {} entries, got {}",
                d.len(),
                x.len()
            )));
        }
        Ok(match direction {
            Direction::Forward => x.component_mul(d),
            Direction::Inverse => x.component_div(d),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin_pattern;
    use proptest::prelude::*;

    fn complex(name: &str) -> CochainComplexInt {
        CochainComplexInt::build(&builtin_pattern(name).unwrap().build_mesh(1.0).unwrap()).unwrap()
    }

    #[test]
    fn cube_coboundaries() {
        let c = complex("cube");
        assert_eq!((c.d[0].rows, c.d[0].cols), (12, 8));
        for r in 0..12 {
            let row: Vec<i64> = (0..8).map(|v| c.d[0].get(r, v)).collect();
            assert_eq!(row.iter().filter(|&&x| x == 1).count(), 1);
            assert_eq!(row.iter().filter(|&&x| x == -1).count(), 1);
        }
        assert!(c.d[1].mul(&c.d[0]).is_zero());
        assert_eq!(c.ranks(), [7, 5, 1]);
    }

    #[test]
    fn betti_numbers_of_test_topologies() {
        for (name, b) in [("cube", [1, 0, 0, 0]), ("ring", [1, 1, 0, 0]), ("cavity", [1, 0, 1, 0])] {
            let betti = complex(name).betti_numbers();
            assert_eq!(betti.0, b, "{name}");
            let mesh = builtin_pattern(name).unwrap().build_mesh(1.0).unwrap();
            assert_eq!(betti.euler_characteristic(), mesh.counts().euler_characteristic());
        }
    }

    #[test]
    fn integer_rank_small_cases() {
        assert_eq!(integer_rank(&IntMatrix::identity(3)), 3);
        assert_eq!(integer_rank(&IntMatrix::zeros(4, 2)), 0);
    }

    #[test]
    fn big_integer_fallback() {
        // Entries near 2^62 overflow i64 products in the first elimination step.
        let big = 1i64 << 62;
        let m = IntMatrix {
            rows: 2,
            cols: 2,
            data: vec![big, big - 1, big - 1, big - 2],
        };
        assert!(bareiss_i64(&m).is_none());
        assert_eq!(integer_rank(&m), 2);
        let singular = IntMatrix {
            rows: 2,
            cols: 2,
            data: vec![big, big / 2, 2, 1],
        };
        assert_eq!(integer_rank(&singular), 1);
    }

    #[test]
    fn generator_counts() {
        assert!(complex("cube").cohomology_generators(1).unwrap().is_empty());
        let ring = complex("ring");
        let g = ring.cohomology_generators(1).unwrap();
        assert_eq!(g.len(), 1);
        let q = IntMatrix {
            rows: g[0].len(),
            cols: 1,
            data: g[0].clone(),
        };
        assert!(ring.d[1].mul(&q).is_zero());
        assert_eq!(complex("cavity").cohomology_generators(2).unwrap().len(), 1);
        assert!(ring.cohomology_generators(3).is_err());
    }

    #[test]
    fn de_rham_scaling_of_edges() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(0.25).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        let k = DeRhamScaling::new(&mesh, &o).unwrap();
        let v = DVector::from_element(12, 1.0);
        let c = k.de_rham_map(Direction::Forward, DeRhamSpace::Curl, &v).unwrap();
        assert!(c.iter().all(|&x| x == 0.25));
    }

    proptest! {
        #[test]
        fn de_rham_round_trip(values in proptest::collection::vec(-10.0f64..10.0, 108)) {
            let mesh = builtin_pattern("cavity").unwrap().build_mesh(0.5).unwrap();
            let o = OrientationTable::compute(&mesh).unwrap();
            let k = DeRhamScaling::new(&mesh, &o).unwrap();
            let x = DVector::from_vec(values);
            let y = k.de_rham_map(Direction::Forward, DeRhamSpace::Div, &x).unwrap();
            let z = k.de_rham_map(Direction::Inverse, DeRhamSpace::Div, &y).unwrap();
            prop_assert!((z - x).amax() <= 1e-15 * 10.0);
        }

        #[test]
        fn integer_rank_matches_rational_rank(
            entries in proptest::collection::vec(-3i64..=3, 20),
        ) {
            let m = IntMatrix { rows: 4, cols: 5, data: entries };
            prop_assert_eq!(integer_rank(&m), m.to_rational().rank());
        }
    }
}
