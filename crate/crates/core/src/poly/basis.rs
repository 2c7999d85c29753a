//! Local frames, the polynomial subspace decompositions on faces and
//! elements, and their tabulation at physical points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::monomial::{differential_matrix, poly_dim, Differential, MonomialSet};
use super::rational::QMatrix;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, OrientationTable, Point};

/// Scaling data of an entity: `xi = ((x - center) . axes[i]) / h`.
#[derive(Clone, Debug)]
pub struct Frame {
    pub center: Point,
    pub h: f64,
    pub axes: Vec<Point>,
}

impl Frame {
    pub fn edge(mesh: &Mesh, orientation: &OrientationTable, e: usize) -> Frame {
        let [a, b] = mesh.edges[e];
        let g = &orientation.edges[e];
        Frame {
            center: (mesh.vertices[a] + mesh.vertices[b]) * 0.5,
            h: (mesh.vertices[b] - mesh.vertices[a]).norm(),
            axes: vec![g.tangent],
        }
    }

    pub fn face(orientation: &OrientationTable, f: usize) -> Frame {
        let g = &orientation.faces[f];
        Frame {
            center: g.center,
            h: g.diameter,
            axes: g.tau.to_vec(),
        }
    }

    pub fn element(orientation: &OrientationTable, t: usize) -> Frame {
        let g = &orientation.elements[t];
        Frame {
            center: g.center,
            h: g.diameter,
            axes: vec![Point::x(), Point::y(), Point::z()],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn coords(&self, x: &Point) -> [f64; 3] {
        let d = x - self.center;
        let mut out = [0.0; 3];
        for (o, a) in out.iter_mut().zip(&self.axes) {
            *o = d.dot(a) / self.h;
        }
        out
    }

    /// Values of all monomials of degree `<= degree` at `points`
    /// (rows: points, columns: monomials).
    pub fn tabulate(&self, degree: i32, points: &[Point]) -> DMatrix<f64> {
        let set = MonomialSet::new(self.dim(), degree);
        let mut m = DMatrix::zeros(points.len(), set.len());
        for (i, p) in points.iter().enumerate() {
            let xi = self.coords(p);
            for (j, v) in set.evaluate(&xi[..self.dim()]).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Kinds of polynomial spaces carried by DDR components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubspaceKind {
    /// Scalar `P^l`.
    P,
    /// Scalar `P^l` modulo constants, represented by the nonconstant monomials.
    P0,
    /// Vector `P^l` with one component per intrinsic direction.
    VP,
    /// `grad P^{l+1}`.
    G,
    /// Koszul complement of `G`: `xi^perp P^{l-1}` (faces), `xi x vP^{l-1}` (elements).
    Gc,
    /// `vrot P^{l+1}` (faces), `curl vP^{l+1}` (elements).
    R,
    /// Koszul complement of `R`: `xi P^{l-1}`.
    Rc,
}

impl SubspaceKind {
    pub fn is_vector(self) -> bool {
        !matches!(self, SubspaceKind::P | SubspaceKind::P0)
    }
}

/// Closed-form dimension of a subspace.
pub fn space_dim(kind: SubspaceKind, degree: i32, dim: usize) -> Result<usize> {
    use SubspaceKind::*;
    if !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("invalid intrinsic dimension {dim}")));
    }
    if matches!(kind, G | Gc | R | Rc) && dim == 1 {
        return Err(Error::Domain(format!("{kind:?} is not defined on edges")));
    }
    if degree < 0 {
        return Ok(0);
    }
    let p = |l: i32| poly_dim(l, dim);
    Ok(match kind {
        P => p(degree),
        P0 => p(degree) - 1,
        VP => dim * p(degree),
        G => p(degree + 1) - 1,
        Gc => dim * p(degree) - (p(degree + 1) - 1),
        R if dim == 2 => p(degree + 1) - 1,
        R => dim * p(degree) - p(degree - 1),
        Rc => p(degree - 1),
    })
}

/// A polynomial subspace: exact coefficients over the scaled monomial
/// ambient space of degree `degree` (component-major for vector kinds).
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub kind: SubspaceKind,
    pub degree: i32,
    pub dim: usize,
    pub exact: QMatrix,
    pub coeffs: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn len(&self) -> usize {
        self.exact.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn components(&self) -> usize {
        if self.kind.is_vector() {
            self.dim
        } else {
            1
        }
    }

    /// Number of ambient monomials per component.
    pub fn monomials(&self) -> usize {
        poly_dim(self.degree, self.dim)
    }
}

fn independent(m: &QMatrix) -> QMatrix {
    m.select_columns(&m.independent_columns())
}

fn construct(kind: SubspaceKind, degree: i32, dim: usize) -> Result<SubspaceBasis> {
    use SubspaceKind::*;
    let expected = space_dim(kind, degree, dim)?;
    let n = poly_dim(degree, dim);
    let ncomp = if kind.is_vector() { dim } else { 1 };
    let exact = if expected == 0 {
        QMatrix::zeros(ncomp * n, 0)
    } else {
        match kind {
            P | VP => QMatrix::identity(ncomp * n),
            P0 => QMatrix::identity(n).select_columns(&(1..n).collect::<Vec<_>>()),
            G => {
                let op = if dim == 2 { Differential::GradF } else { Differential::Grad };
                independent(&differential_matrix(op, dim, degree + 1)?)
            }
            R if dim == 2 => independent(&differential_matrix(Differential::VrotF, 2, degree + 1)?),
            R => independent(&differential_matrix(Differential::Curl, 3, degree + 1)?),
            Rc => differential_matrix(Differential::KoszulScalar, dim, degree - 1)?,
            Gc if dim == 2 => differential_matrix(Differential::KoszulPerp, 2, degree - 1)?,
            Gc => independent(&differential_matrix(Differential::KoszulCross, 3, degree - 1)?),
        }
    };
    if exact.ncols() != expected || exact.rank() != expected {
        return Err(Error::Internal(format!(
            "{kind:?}^{degree} in dimension {dim}: built {} columns, expected {expected}",
            exact.ncols()
        )));
    }
    let coeffs = exact.to_f64();
    Ok(SubspaceBasis {
        kind,
        degree,
        dim,
        exact,
        coeffs,
    })
}

type Cache = Mutex<HashMap<(SubspaceKind, i32, usize), Arc<SubspaceBasis>>>;

/// Basis of a subspace in reference coordinates. Bases only depend on
/// `(kind, degree, dim)`, so they are built once and shared.
pub fn build_subspace_basis(kind: SubspaceKind, degree: i32, dim: usize) -> Result<Arc<SubspaceBasis>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (kind, degree.max(-1), dim);
    if let Some(b) = cache.lock().unwrap().get(&key) {
        return Ok(b.clone());
    }
    let b = Arc::new(construct(kind, key.1, dim)?);
    cache.lock().unwrap().insert(key, b.clone());
    Ok(b)
}

/// Physical values of a basis at a set of points.
///
/// Scalar bases have a single component; vector bases are returned with
/// three physical (Cartesian) components.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub components: Vec<DMatrix<f64>>,
}

impl Tabulation {
    pub fn npoints(&self) -> usize {
        self.components[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.components[0].ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_vector(&self) -> bool {
        self.components.len() == 3
    }

    /// Weighted Gram-type matrix `sum_q w_q a_i(x_q) . b_j(x_q)`.
    pub fn pair(&self, other: &Tabulation, weights: &[f64]) -> DMatrix<f64> {
        assert_eq!(self.components.len(), other.components.len());
        let mut out = DMatrix::zeros(self.len(), other.len());
        for (a, b) in self.components.iter().zip(&other.components) {
            let mut wb = b.clone();
            for (mut row, &w) in wb.row_iter_mut().zip(weights) {
                row *= w;
            }
            out += a.transpose() * wb;
        }
        out
    }

    /// Normal component `v . n`, as a scalar tabulation.
    pub fn dot(&self, n: &Point) -> Tabulation {
        assert!(self.is_vector());
        let m = &self.components[0] * n.x + &self.components[1] * n.y + &self.components[2] * n.z;
        Tabulation { components: vec![m] }
    }

    /// Tangential part `v x n`.
    pub fn cross(&self, n: &Point) -> Tabulation {
        assert!(self.is_vector());
        let [x, y, z] = [&self.components[0], &self.components[1], &self.components[2]];
        Tabulation {
            components: vec![y * n.z - z * n.y, z * n.x - x * n.z, x * n.y - y * n.x],
        }
    }

    pub fn scaled(mut self, s: f64) -> Tabulation {
        for c in &mut self.components {
            *c *= s;
        }
        self
    }

    pub fn select(&self, cols: std::ops::Range<usize>) -> Tabulation {
        Tabulation {
            components: self
                .components
                .iter()
                .map(|c| c.columns(cols.start, cols.len()).into_owned())
                .collect(),
        }
    }

    /// Concatenates the basis functions of two tabulations.
    pub fn hstack(&self, other: &Tabulation) -> Tabulation {
        assert_eq!(self.components.len(), other.components.len());
        Tabulation {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| {
                    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
                    m.columns_mut(0, a.ncols()).copy_from(a);
                    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
                    m
                })
                .collect(),
        }
    }

    /// Values of the functions `sum_j coeffs[j, i] b_j`.
    pub fn combine(&self, coeffs: &DMatrix<f64>) -> Tabulation {
        Tabulation {
            components: self.components.iter().map(|c| c * coeffs).collect(),
        }
    }
}

/// Tabulates a subspace basis of the frame's entity at physical points.
pub fn tabulate(frame: &Frame, basis: &SubspaceBasis, points: &[Point]) -> Tabulation {
    tabulate_coeffs(frame, basis.kind.is_vector(), basis.degree, &basis.coeffs, points)
}

/// Tabulates polynomials given by ambient coefficients (one column per
/// function). Vector coefficients are component-major in the frame axes.
pub fn tabulate_coeffs(
    frame: &Frame,
    vector: bool,
    degree: i32,
    coeffs: &DMatrix<f64>,
    points: &[Point],
) -> Tabulation {
    let mono = frame.tabulate(degree, points);
    if !vector {
        return Tabulation {
            components: vec![&mono * coeffs],
        };
    }
    let n = mono.ncols();
    let mut comps = vec![DMatrix::zeros(points.len(), coeffs.ncols()); 3];
    for (c, axis) in frame.axes.iter().enumerate() {
        let block = &mono * coeffs.rows(c * n, n);
        for (j, comp) in comps.iter_mut().enumerate() {
            if axis[j] != 0.0 {
                *comp += &block * axis[j];
            }
        }
    }
    Tabulation { components: comps }
}

/// Floating-point differential matrix scaled to physical units (`1/h` per
/// derivative, `h` per Koszul multiplication), cached per operator.
pub fn physical_differential(op: Differential, frame: &Frame, degree: i32) -> Result<DMatrix<f64>> {
    type DiffCache = Mutex<HashMap<(Differential, usize, i32), Arc<DMatrix<f64>>>>;
    static CACHE: OnceLock<DiffCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (op, frame.dim(), degree);
    let cached = cache.lock().unwrap().get(&key).cloned();
    let m = match cached {
        Some(m) => m,
        None => {
            let m = Arc::new(differential_matrix(op, frame.dim(), degree)?.to_f64());
            cache.lock().unwrap().insert(key, m.clone());
            m
        }
    };
    let scale = match op {
        Differential::KoszulScalar | Differential::KoszulCross | Differential::KoszulPerp => frame.h,
        Differential::Perp => 1.0,
        _ => 1.0 / frame.h,
    };
    Ok(m.as_ref() * scale)
}

/// Tabulates scalar monomials of degree `<= degree` on a frame.
pub fn tabulate_scalar(frame: &Frame, degree: i32, points: &[Point]) -> Tabulation {
    Tabulation {
        components: vec![frame.tabulate(degree, points)],
    }
}
