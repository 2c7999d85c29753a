//! Local reconstructions on edges, faces and elements.
//!
//! Every operator is a dense matrix mapping the unknowns of the space
//! restricted to the closure of an entity (listed by global index in
//! [`LocalOp::cols`]) to the coefficients of a polynomial on that entity.
//! Each is obtained by solving the Gram or pairing system of its defining
//! integration-by-parts relation.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::layout::DofLayout;
use crate::error::Result;
use crate::mesh::{Mesh, OrientationTable, Point};
use crate::poly::basis::{physical_differential, tabulate, tabulate_coeffs, tabulate_scalar};
use crate::poly::project::{gram, solve_checked};
use crate::poly::quadrature::{edge_rule, element_rule, face_rule};
use crate::poly::{build_subspace_basis, Differential, Frame, QuadratureRule, SubspaceKind, Tabulation};

/// Frames and quadrature rules of every mesh entity.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub degree: usize,
    pub edge_frames: Vec<Frame>,
    pub face_frames: Vec<Frame>,
    pub element_frames: Vec<Frame>,
    pub edge_rules: Vec<QuadratureRule>,
    pub face_rules: Vec<QuadratureRule>,
    pub element_rules: Vec<QuadratureRule>,
}

impl Geometry {
    pub fn new(mesh: &Mesh, orientation: &OrientationTable, degree: usize) -> Result<Geometry> {
        Ok(Geometry {
            degree,
            edge_frames: (0..mesh.num_edges()).map(|e| Frame::edge(mesh, orientation, e)).collect(),
            face_frames: (0..mesh.num_faces()).map(|f| Frame::face(orientation, f)).collect(),
            element_frames: (0..mesh.num_elements()).map(|t| Frame::element(orientation, t)).collect(),
            edge_rules: (0..mesh.num_edges())
                .into_par_iter()
                .map(|e| edge_rule(mesh, e, degree))
                .collect::<Result<_>>()?,
            face_rules: (0..mesh.num_faces())
                .into_par_iter()
                .map(|f| face_rule(mesh, orientation, f, degree))
                .collect::<Result<_>>()?,
            element_rules: (0..mesh.num_elements())
                .into_par_iter()
                .map(|t| element_rule(mesh, orientation, t, degree))
                .collect::<Result<_>>()?,
        })
    }
}

/// A linear map from the unknowns `cols` (global indices) to polynomial
/// coefficients.
#[derive(Clone, Debug)]
pub struct LocalOp {
    pub cols: Vec<usize>,
    pub mat: DMatrix<f64>,
}

impl LocalOp {
    /// Applies the operator to a global vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let local = DVector::from_iterator(self.cols.len(), self.cols.iter().map(|&c| x[c]));
        &self.mat * local
    }

    /// The operator densified against a different (larger) column set.
    pub fn expand(&self, cols: &[usize]) -> DMatrix<f64> {
        let mut b = Builder::new(cols.to_vec(), self.mat.nrows());
        b.add_op(&DMatrix::identity(self.mat.nrows(), self.mat.nrows()), self);
        b.mat
    }
}

/// Accumulates a right-hand side over a fixed set of global columns.
pub(crate) struct Builder {
    cols: Vec<usize>,
    pos: HashMap<usize, usize>,
    pub(crate) mat: DMatrix<f64>,
}

impl Builder {
    pub(crate) fn new(cols: Vec<usize>, rows: usize) -> Builder {
        let pos = cols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mat = DMatrix::zeros(rows, cols.len());
        Builder { cols, pos, mat }
    }

    /// Adds `block` into the columns holding the global unknowns `global`.
    pub(crate) fn add_block(&mut self, rows: Range<usize>, block: &DMatrix<f64>, global: Range<usize>) {
        assert_eq!(block.ncols(), global.len());
        for (j, g) in global.enumerate() {
            let c = self.pos[&g];
            let mut dst = self.mat.view_mut((rows.start, c), (rows.len(), 1));
            dst += block.column(j);
        }
    }

    /// Adds `left * op` into the columns of `op`.
    pub(crate) fn add_op(&mut self, left: &DMatrix<f64>, op: &LocalOp) {
        self.add_op_rows(0..self.mat.nrows(), left, op);
    }

    pub(crate) fn add_op_rows(&mut self, rows: Range<usize>, left: &DMatrix<f64>, op: &LocalOp) {
        let prod = left * &op.mat;
        for (j, g) in op.cols.iter().enumerate() {
            let c = self.pos[g];
            let mut dst = self.mat.view_mut((rows.start, c), (rows.len(), 1));
            dst += prod.column(j);
        }
    }

    /// Solves `lhs * X = rhs` for the accumulated right-hand side.
    pub(crate) fn solve(self, lhs: &DMatrix<f64>, what: &str) -> Result<LocalOp> {
        let mat = solve_checked(lhs, &self.mat, what)?;
        Ok(LocalOp { cols: self.cols, mat })
    }
}

fn basis_tab(frame: &Frame, kind: SubspaceKind, degree: i32, points: &[Point]) -> Result<Tabulation> {
    Ok(tabulate(frame, &*build_subspace_basis(kind, degree, frame.dim())?, points))
}

/// Tabulates `op` applied to the members of a subspace basis.
fn derived_tab(
    frame: &Frame,
    kind: SubspaceKind,
    degree: i32,
    op: Differential,
    points: &[Point],
) -> Result<Tabulation> {
    let basis = build_subspace_basis(kind, degree, frame.dim())?;
    let coeffs = physical_differential(op, frame, degree)? * &basis.coeffs;
    let (_, out) = op.shapes(frame.dim(), degree);
    Ok(tabulate_coeffs(frame, out.components > 1, out.degree, &coeffs, points))
}

fn scalar(frame: &Frame, degree: i32, points: &[Point]) -> Tabulation {
    tabulate_scalar(frame, degree, points)
}

#[derive(Clone, Debug)]
pub struct EdgeOps {
    /// `gamma_E^{k+1}`: Xgrad(E) -> P^{k+1}(E).
    pub trace: LocalOp,
    /// `G_E^k`: Xgrad(E) -> P^k(E).
    pub gradient: LocalOp,
}

#[derive(Clone, Debug)]
pub struct FaceOps {
    /// `cG_F^k`: Xgrad(F) -> vP^k(F).
    pub gradient: LocalOp,
    /// `gamma_F^{k+1}`: Xgrad(F) -> P^{k+1}(F).
    pub trace: LocalOp,
    /// `C_F^k`: Xcurl(F) -> P^k(F).
    pub curl: LocalOp,
    /// `gamma_{t,F}^k`: Xcurl(F) -> vP^k(F).
    pub tangential_trace: LocalOp,
}

#[derive(Clone, Debug)]
pub struct ElementOps {
    /// `cG_T^k`: Xgrad(T) -> vP^k(T).
    pub gradient: LocalOp,
    /// `cC_T^k`: Xcurl(T) -> vP^k(T).
    pub curl: LocalOp,
    /// `P_curl^k`: Xcurl(T) -> vP^k(T).
    pub curl_potential: LocalOp,
    /// `D_T^k`: Xdiv(T) -> P^k(T).
    pub divergence: LocalOp,
    /// `P_div^k`: Xdiv(T) -> vP^k(T).
    pub div_potential: LocalOp,
}

/// Layouts and geometry shared by the local constructions.
pub struct Context<'a> {
    pub mesh: &'a Mesh,
    pub orientation: &'a OrientationTable,
    pub geometry: &'a Geometry,
    pub k: i32,
    pub grad: &'a DofLayout,
    pub curl: &'a DofLayout,
    pub div: &'a DofLayout,
}

impl Context<'_> {
    pub fn edge(&self, e: usize) -> Result<EdgeOps> {
        let k = self.k;
        let frame = &self.geometry.edge_frames[e];
        let rule = &self.geometry.edge_rules[e];
        let [v1, v2] = self.mesh.edges[e];
        let ends = [self.mesh.vertices[v1], self.mesh.vertices[v2]];
        let cols = self.grad.closure(self.mesh, 1, e);
        let qe = self.grad.range(1, e, 0);
        let (r1, r2) = (self.grad.range(0, v1, 0), self.grad.range(0, v2, 0));

        // Trace: vertex values plus moments against P^{k-1}(E).
        let high = scalar(frame, k + 1, &rule.points);
        let low = scalar(frame, k - 1, &rule.points);
        let nk = low.len();
        let at_ends = frame.tabulate(k + 1, &ends);
        let mut lhs = DMatrix::zeros(nk + 2, high.len());
        lhs.rows_mut(0, 2).copy_from(&at_ends);
        lhs.rows_mut(2, nk).copy_from(&gram(&low, &high, rule));
        let mut b = Builder::new(cols.clone(), nk + 2);
        b.add_block(0..1, &DMatrix::from_element(1, 1, 1.0), r1.clone());
        b.add_block(1..2, &DMatrix::from_element(1, 1, 1.0), r2.clone());
        b.add_block(2..nk + 2, &gram(&low, &low, rule), qe.clone());
        let trace = b.solve(&lhs, &format!("edge {e} trace"))?;

        // Gradient: int G r = -int q_E r' + q_V2 r(V2) - q_V1 r(V1).
        let test = scalar(frame, k, &rule.points);
        let dtest = derived_tab(frame, SubspaceKind::P, k, Differential::EdgeDerivative, &rule.points)?;
        let values = frame.tabulate(k, &ends);
        let mut b = Builder::new(cols, test.len());
        let rows = 0..test.len();
        b.add_block(rows.clone(), &-gram(&dtest, &low, rule), qe);
        b.add_block(rows.clone(), &DMatrix::from_iterator(values.ncols(), 1, values.row(1).iter().copied()), r2);
        b.add_block(rows, &DMatrix::from_iterator(values.ncols(), 1, values.row(0).iter().map(|v| -v)), r1);
        let gradient = b.solve(&gram(&test, &test, rule), &format!("edge {e} gradient"))?;
        Ok(EdgeOps { trace, gradient })
    }

    pub fn face(&self, f: usize, edges: &[EdgeOps]) -> Result<FaceOps> {
        use SubspaceKind::*;
        let k = self.k;
        let frame = &self.geometry.face_frames[f];
        let rule = &self.geometry.face_rules[f];
        let geo = &self.orientation.faces[f];
        let face = &self.mesh.faces[f];
        let edge_data = |i: usize| {
            let e = face.edges[i];
            (e, geo.edge_signs[i], geo.edge_normals[i], &self.geometry.edge_rules[e], &self.geometry.edge_frames[e])
        };

        // Face gradient against vP^k(F).
        let vk = basis_tab(frame, VP, k, &rule.points)?;
        let div_vk = derived_tab(frame, VP, k, Differential::DivF, &rule.points)?;
        let low = scalar(frame, k - 1, &rule.points);
        let gcols = self.grad.closure(self.mesh, 2, f);
        let qf = self.grad.range(2, f, 0);
        let mut b = Builder::new(gcols.clone(), vk.len());
        b.add_block(0..vk.len(), &-gram(&div_vk, &low, rule), qf.clone());
        for i in 0..face.edges.len() {
            let (e, w, n, er, ef) = edge_data(i);
            let vn = basis_tab(frame, VP, k, &er.points)?.dot(&n);
            let trace = scalar(ef, k + 1, &er.points);
            b.add_op(&(gram(&vn, &trace, er) * w), &edges[e].trace);
        }
        let gradient = b.solve(&gram(&vk, &vk, rule), &format!("face {f} gradient"))?;

        // Face trace against div_F Rc^{k+2}(F).
        let rc = basis_tab(frame, Rc, k + 2, &rule.points)?;
        let div_rc = derived_tab(frame, Rc, k + 2, Differential::DivF, &rule.points)?;
        let high = scalar(frame, k + 1, &rule.points);
        let mut b = Builder::new(gcols, rc.len());
        b.add_op(&-gram(&rc, &vk, rule), &gradient);
        for i in 0..face.edges.len() {
            let (e, w, n, er, ef) = edge_data(i);
            let vn = basis_tab(frame, Rc, k + 2, &er.points)?.dot(&n);
            let trace = scalar(ef, k + 1, &er.points);
            b.add_op(&(gram(&vn, &trace, er) * w), &edges[e].trace);
        }
        let trace = b.solve(&gram(&div_rc, &high, rule), &format!("face {f} trace"))?;

        // Face curl against P^k(F).
        let ccols = self.curl.closure(self.mesh, 2, f);
        let pk = scalar(frame, k, &rule.points);
        let vrot_pk = derived_tab(frame, P, k, Differential::VrotF, &rule.points)?;
        let r_face = basis_tab(frame, R, k - 1, &rule.points)?;
        let mut b = Builder::new(ccols.clone(), pk.len());
        b.add_block(0..pk.len(), &gram(&vrot_pk, &r_face, rule), self.curl.range(2, f, 0));
        for i in 0..face.edges.len() {
            let (e, w, _, er, ef) = edge_data(i);
            let r = scalar(frame, k, &er.points);
            let ve = scalar(ef, k, &er.points);
            b.add_block(0..pk.len(), &(gram(&r, &ve, er) * -w), self.curl.range(1, e, 0));
        }
        let curl = b.solve(&gram(&pk, &pk, rule), &format!("face {f} curl"))?;

        // Tangential trace against vrot P^{0,k+1}(F) and Rc^k(F).
        let vrot_p0 = derived_tab(frame, P0, k + 1, Differential::VrotF, &rule.points)?;
        let p0 = basis_tab(frame, P0, k + 1, &rule.points)?;
        let rck = basis_tab(frame, Rc, k, &rule.points)?;
        let (n1, n2) = (vrot_p0.len(), rck.len());
        let mut lhs = DMatrix::zeros(n1 + n2, vk.len());
        lhs.rows_mut(0, n1).copy_from(&gram(&vrot_p0, &vk, rule));
        lhs.rows_mut(n1, n2).copy_from(&gram(&rck, &vk, rule));
        let mut b = Builder::new(ccols, n1 + n2);
        b.add_op_rows(0..n1, &gram(&p0, &pk, rule), &curl);
        for i in 0..face.edges.len() {
            let (e, w, _, er, ef) = edge_data(i);
            let r = basis_tab(frame, P0, k + 1, &er.points)?;
            let ve = scalar(ef, k, &er.points);
            b.add_block(0..n1, &(gram(&r, &ve, er) * w), self.curl.range(1, e, 0));
        }
        b.add_block(n1..n1 + n2, &gram(&rck, &rck, rule), self.curl.range(2, f, 1));
        let tangential_trace = b.solve(&lhs, &format!("face {f} tangential trace"))?;

        Ok(FaceOps {
            gradient,
            trace,
            curl,
            tangential_trace,
        })
    }

    pub fn element(&self, t: usize, faces: &[FaceOps]) -> Result<ElementOps> {
        use SubspaceKind::*;
        let k = self.k;
        let frame = &self.geometry.element_frames[t];
        let rule = &self.geometry.element_rules[t];
        let el = &self.mesh.elements[t];
        let signs = &self.orientation.elements[t].face_signs;
        let face_data = |i: usize| {
            let f = el.faces[i];
            (
                f,
                signs[i],
                self.orientation.faces[f].normal,
                &self.geometry.face_rules[f],
                &self.geometry.face_frames[f],
            )
        };
        let vk = basis_tab(frame, VP, k, &rule.points)?;
        let gram_vk = gram(&vk, &vk, rule);

        // Element gradient.
        let div_vk = derived_tab(frame, VP, k, Differential::Div, &rule.points)?;
        let low = scalar(frame, k - 1, &rule.points);
        let gcols = self.grad.closure(self.mesh, 3, t);
        let mut b = Builder::new(gcols, vk.len());
        b.add_block(0..vk.len(), &-gram(&div_vk, &low, rule), self.grad.range(3, t, 0));
        for i in 0..el.faces.len() {
            let (f, w, n, fr, ff) = face_data(i);
            let vn = basis_tab(frame, VP, k, &fr.points)?.dot(&n);
            let trace = scalar(ff, k + 1, &fr.points);
            b.add_op(&(gram(&vn, &trace, fr) * w), &faces[f].trace);
        }
        let gradient = b.solve(&gram_vk, &format!("element {t} gradient"))?;

        // Element curl.
        let ccols = self.curl.closure(self.mesh, 3, t);
        let curl_vk = derived_tab(frame, VP, k, Differential::Curl, &rule.points)?;
        let r_el = basis_tab(frame, R, k - 1, &rule.points)?;
        let mut b = Builder::new(ccols.clone(), vk.len());
        b.add_block(0..vk.len(), &gram(&curl_vk, &r_el, rule), self.curl.range(3, t, 0));
        for i in 0..el.faces.len() {
            let (f, w, n, fr, ff) = face_data(i);
            let wxn = basis_tab(frame, VP, k, &fr.points)?.cross(&n);
            let gt = basis_tab(ff, VP, k, &fr.points)?;
            b.add_op(&(gram(&wxn, &gt, fr) * w), &faces[f].tangential_trace);
        }
        let curl = b.solve(&gram_vk, &format!("element {t} curl"))?;

        // Vector potential against curl Gc^{k+1}(T) and Rc^k(T).
        let gc = basis_tab(frame, Gc, k + 1, &rule.points)?;
        let curl_gc = derived_tab(frame, Gc, k + 1, Differential::Curl, &rule.points)?;
        let rck = basis_tab(frame, Rc, k, &rule.points)?;
        let (n1, n2) = (gc.len(), rck.len());
        let mut lhs = DMatrix::zeros(n1 + n2, vk.len());
        lhs.rows_mut(0, n1).copy_from(&gram(&curl_gc, &vk, rule));
        lhs.rows_mut(n1, n2).copy_from(&gram(&rck, &vk, rule));
        let mut b = Builder::new(ccols, n1 + n2);
        b.add_op_rows(0..n1, &gram(&gc, &vk, rule), &curl);
        for i in 0..el.faces.len() {
            let (f, w, n, fr, ff) = face_data(i);
            let wxn = basis_tab(frame, Gc, k + 1, &fr.points)?.cross(&n);
            let gt = basis_tab(ff, VP, k, &fr.points)?;
            b.add_op_rows(0..n1, &(gram(&wxn, &gt, fr) * -w), &faces[f].tangential_trace);
        }
        b.add_block(n1..n1 + n2, &gram(&rck, &rck, rule), self.curl.range(3, t, 1));
        let curl_potential = b.solve(&lhs, &format!("element {t} curl potential"))?;

        // Element divergence against P^k(T).
        let dcols = self.div.closure(self.mesh, 3, t);
        let pk = scalar(frame, k, &rule.points);
        let grad_pk = derived_tab(frame, P, k, Differential::Grad, &rule.points)?;
        let g_el = basis_tab(frame, G, k - 1, &rule.points)?;
        let mut b = Builder::new(dcols.clone(), pk.len());
        b.add_block(0..pk.len(), &-gram(&grad_pk, &g_el, rule), self.div.range(3, t, 0));
        for i in 0..el.faces.len() {
            let (f, w, _, fr, ff) = face_data(i);
            let r = scalar(frame, k, &fr.points);
            let wf = scalar(ff, k, &fr.points);
            b.add_block(0..pk.len(), &(gram(&r, &wf, fr) * w), self.div.range(2, f, 0));
        }
        let divergence = b.solve(&gram(&pk, &pk, rule), &format!("element {t} divergence"))?;

        // Vector potential against grad P^{0,k+1}(T) and Gc^k(T).
        let p0 = basis_tab(frame, P0, k + 1, &rule.points)?;
        let grad_p0 = derived_tab(frame, P0, k + 1, Differential::Grad, &rule.points)?;
        let gck = basis_tab(frame, Gc, k, &rule.points)?;
        let (n1, n2) = (p0.len(), gck.len());
        let mut lhs = DMatrix::zeros(n1 + n2, vk.len());
        lhs.rows_mut(0, n1).copy_from(&gram(&grad_p0, &vk, rule));
        lhs.rows_mut(n1, n2).copy_from(&gram(&gck, &vk, rule));
        let mut b = Builder::new(dcols, n1 + n2);
        b.add_op_rows(0..n1, &-gram(&p0, &pk, rule), &divergence);
        for i in 0..el.faces.len() {
            let (f, w, _, fr, ff) = face_data(i);
            let r = basis_tab(frame, P0, k + 1, &fr.points)?;
            let wf = scalar(ff, k, &fr.points);
            b.add_block(0..n1, &(gram(&r, &wf, fr) * w), self.div.range(2, f, 0));
        }
        b.add_block(n1..n1 + n2, &gram(&gck, &gck, rule), self.div.range(3, t, 1));
        let div_potential = b.solve(&lhs, &format!("element {t} div potential"))?;

        Ok(ElementOps {
            gradient,
            curl,
            curl_potential,
            divergence,
            div_potential,
        })
    }
}
