//! The discrete complex on a whole mesh: local operators, global sparse
//! differentials and the scalar interpolator.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use super::layout::{DofLayout, Space};
use super::local::{Context, EdgeOps, ElementOps, FaceOps, Geometry, LocalOp};
use crate::error::Result;
use crate::mesh::{Mesh, OrientationTable, Point};
use crate::poly::basis::{tabulate, tabulate_scalar};
use crate::poly::project::project;
use crate::poly::{build_subspace_basis, Frame, QuadratureRule, SubspaceKind};

/// Quadrature exactness used for degree-`k` constructions.
pub fn quadrature_degree(k: usize) -> usize {
    2 * k + 4
}

/// A global operator between two layouts.
#[derive(Clone, Debug)]
pub struct GlobalOperator {
    pub source: Space,
    pub target: Space,
    pub matrix: CsrMatrix<f64>,
}

impl GlobalOperator {
    pub fn to_dense(&self) -> DMatrix<f64> {
        csr_to_dense(&self.matrix)
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
}

pub fn csr_to_dense(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplet_iter() {
        d[(r, c)] += *v;
    }
    d
}

pub fn dense_to_csr(m: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if m[(r, c)] != 0.0 {
                coo.push(r, c, m[(r, c)]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// Row blocks `(global rows, local matrix)` collected into a sparse matrix.
fn assemble(rows: usize, cols: usize, blocks: &[(std::ops::Range<usize>, LocalOp)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(rows, cols);
    for (range, op) in blocks {
        for (i, r) in range.clone().enumerate() {
            for (j, &c) in op.cols.iter().enumerate() {
                let v = op.mat[(i, j)];
                if v != 0.0 {
                    coo.push(r, c, v);
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// The discrete de Rham complex of degree `k` on a mesh.
pub struct Ddr<'a> {
    pub mesh: &'a Mesh,
    pub orientation: &'a OrientationTable,
    pub k: usize,
    pub geometry: Geometry,
    pub grad: DofLayout,
    pub curl: DofLayout,
    pub div: DofLayout,
    pub pk: DofLayout,
    pub edges: Vec<EdgeOps>,
    pub faces: Vec<FaceOps>,
    pub elements: Vec<ElementOps>,
}

impl<'a> Ddr<'a> {
    pub fn new(mesh: &'a Mesh, orientation: &'a OrientationTable, k: usize) -> Result<Ddr<'a>> {
        Self::with_quadrature(mesh, orientation, k, quadrature_degree(k))
    }

    pub fn with_quadrature(
        mesh: &'a Mesh,
        orientation: &'a OrientationTable,
        k: usize,
        qdeg: usize,
    ) -> Result<Ddr<'a>> {
        let geometry = Geometry::new(mesh, orientation, qdeg)?;
        let grad = DofLayout::new(Space::Grad, k, mesh)?;
        let curl = DofLayout::new(Space::Curl, k, mesh)?;
        let div = DofLayout::new(Space::Div, k, mesh)?;
        let pk = DofLayout::new(Space::Pk, k, mesh)?;
        let ctx = Context {
            mesh,
            orientation,
            geometry: &geometry,
            k: k as i32,
            grad: &grad,
            curl: &curl,
            div: &div,
        };
        // Stages are barriers: faces need edge traces, elements face traces.
        let edges: Vec<EdgeOps> = (0..mesh.num_edges())
            .into_par_iter()
            .map(|e| ctx.edge(e))
            .collect::<Result<_>>()?;
        let faces: Vec<FaceOps> = (0..mesh.num_faces())
            .into_par_iter()
            .map(|f| ctx.face(f, &edges))
            .collect::<Result<_>>()?;
        let elements: Vec<ElementOps> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|t| ctx.element(t, &faces))
            .collect::<Result<_>>()?;
        Ok(Ddr {
            mesh,
            orientation,
            k,
            geometry,
            grad,
            curl,
            div,
            pk,
            edges,
            faces,
            elements,
        })
    }

    pub fn layout(&self, space: Space) -> &DofLayout {
        match space {
            Space::Grad => &self.grad,
            Space::Curl => &self.curl,
            Space::Div => &self.div,
            Space::Pk => &self.pk,
        }
    }

    pub fn dims(&self) -> [usize; 4] {
        Space::ALL.map(|s| self.layout(s).total)
    }

    pub fn face_frame(&self, f: usize) -> &Frame {
        &self.geometry.face_frames[f]
    }

    pub fn element_frame(&self, t: usize) -> &Frame {
        &self.geometry.element_frames[t]
    }

    /// L2 projection of vector polynomials in `vP^k` onto a subspace, as a
    /// matrix acting on `vP^k` coefficients.
    fn projector(frame: &Frame, rule: &QuadratureRule, kind: SubspaceKind, degree: i32, k: i32, what: &str) -> Result<DMatrix<f64>> {
        let target = tabulate(frame, &*build_subspace_basis(kind, degree, frame.dim())?, &rule.points);
        let source = tabulate(frame, &*build_subspace_basis(SubspaceKind::VP, k, frame.dim())?, &rule.points);
        project(&target, &source, rule, what)
    }

    /// `uG_h^k`: Xgrad -> Xcurl.
    pub fn gradient(&self) -> Result<GlobalOperator> {
        let k = self.k as i32;
        let mut blocks = Vec::new();
        for (e, ops) in self.edges.iter().enumerate() {
            blocks.push((self.curl.range(1, e, 0), ops.gradient.clone()));
        }
        let face_blocks: Vec<_> = (0..self.mesh.num_faces())
            .into_par_iter()
            .map(|f| {
                let (frame, rule) = (self.face_frame(f), &self.geometry.face_rules[f]);
                let op = &self.faces[f].gradient;
                let pr = Self::projector(frame, rule, SubspaceKind::R, k - 1, k, "face R projection")?;
                let prc = Self::projector(frame, rule, SubspaceKind::Rc, k, k, "face Rc projection")?;
                Ok([
                    (self.curl.range(2, f, 0), LocalOp { cols: op.cols.clone(), mat: pr * &op.mat }),
                    (self.curl.range(2, f, 1), LocalOp { cols: op.cols.clone(), mat: prc * &op.mat }),
                ])
            })
            .collect::<Result<_>>()?;
        let element_blocks: Vec<_> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|t| {
                let (frame, rule) = (self.element_frame(t), &self.geometry.element_rules[t]);
                let op = &self.elements[t].gradient;
                let pr = Self::projector(frame, rule, SubspaceKind::R, k - 1, k, "element R projection")?;
                let prc = Self::projector(frame, rule, SubspaceKind::Rc, k, k, "element Rc projection")?;
                Ok([
                    (self.curl.range(3, t, 0), LocalOp { cols: op.cols.clone(), mat: pr * &op.mat }),
                    (self.curl.range(3, t, 1), LocalOp { cols: op.cols.clone(), mat: prc * &op.mat }),
                ])
            })
            .collect::<Result<_>>()?;
        blocks.extend(face_blocks.into_iter().flatten());
        blocks.extend(element_blocks.into_iter().flatten());
        Ok(GlobalOperator {
            source: Space::Grad,
            target: Space::Curl,
            matrix: assemble(self.curl.total, self.grad.total, &blocks),
        })
    }

    /// `uC_h^k`: Xcurl -> Xdiv.
    pub fn curl_operator(&self) -> Result<GlobalOperator> {
        let k = self.k as i32;
        let mut blocks = Vec::new();
        for (f, ops) in self.faces.iter().enumerate() {
            blocks.push((self.div.range(2, f, 0), ops.curl.clone()));
        }
        let element_blocks: Vec<_> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|t| {
                let (frame, rule) = (self.element_frame(t), &self.geometry.element_rules[t]);
                let op = &self.elements[t].curl;
                let pg = Self::projector(frame, rule, SubspaceKind::G, k - 1, k, "element G projection")?;
                let pgc = Self::projector(frame, rule, SubspaceKind::Gc, k, k, "element Gc projection")?;
                Ok([
                    (self.div.range(3, t, 0), LocalOp { cols: op.cols.clone(), mat: pg * &op.mat }),
                    (self.div.range(3, t, 1), LocalOp { cols: op.cols.clone(), mat: pgc * &op.mat }),
                ])
            })
            .collect::<Result<_>>()?;
        blocks.extend(element_blocks.into_iter().flatten());
        Ok(GlobalOperator {
            source: Space::Curl,
            target: Space::Div,
            matrix: assemble(self.div.total, self.curl.total, &blocks),
        })
    }

    /// `D_h^k`: Xdiv -> P^k(T_h).
    pub fn divergence(&self) -> Result<GlobalOperator> {
        let blocks: Vec<_> = self
            .elements
            .iter()
            .enumerate()
            .map(|(t, ops)| (self.pk.range(3, t, 0), ops.divergence.clone()))
            .collect();
        Ok(GlobalOperator {
            source: Space::Div,
            target: Space::Pk,
            matrix: assemble(self.pk.total, self.div.total, &blocks),
        })
    }

    /// The three global differentials.
    pub fn differentials(&self) -> Result<[GlobalOperator; 3]> {
        Ok([self.gradient()?, self.curl_operator()?, self.divergence()?])
    }

    /// `I_grad^k q`: vertex values and `L2` projections on `P^{k-1}` of
    /// edges, faces and elements.
    pub fn interpolate_grad(&self, q: impl Fn(&Point) -> f64 + Sync) -> Result<DVector<f64>> {
        let k = self.k as i32;
        let mut x = DVector::zeros(self.grad.total);
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            x[self.grad.range(0, v, 0).start] = q(p);
        }
        let project_on = |frame: &Frame, rule: &QuadratureRule| -> Result<DMatrix<f64>> {
            let basis = tabulate_scalar(frame, k - 1, &rule.points);
            let values = crate::poly::Tabulation {
                components: vec![DMatrix::from_iterator(rule.len(), 1, rule.points.iter().map(&q))],
            };
            project(&basis, &values, rule, "interpolation")
        };
        let g = &self.geometry;
        for e in 0..self.mesh.num_edges() {
            let c = project_on(&g.edge_frames[e], &g.edge_rules[e])?;
            x.rows_mut(self.grad.range(1, e, 0).start, c.nrows()).copy_from(&c.column(0));
        }
        for f in 0..self.mesh.num_faces() {
            let c = project_on(&g.face_frames[f], &g.face_rules[f])?;
            x.rows_mut(self.grad.range(2, f, 0).start, c.nrows()).copy_from(&c.column(0));
        }
        for t in 0..self.mesh.num_elements() {
            let c = project_on(&g.element_frames[t], &g.element_rules[t])?;
            x.rows_mut(self.grad.range(3, t, 0).start, c.nrows()).copy_from(&c.column(0));
        }
        Ok(x)
    }
}

/// Lowest-order differentials from their explicit formulas, using the
/// measures stored in the orientation table.
pub fn ddr0_closed_forms(mesh: &Mesh, orientation: &OrientationTable) -> [CsrMatrix<f64>; 3] {
    let (nv, ne, nf, nt) = mesh.counts().as_tuple();
    let mut g = CooMatrix::new(ne, nv);
    for (e, &[v1, v2]) in mesh.edges.iter().enumerate() {
        let len = orientation.edges[e].length;
        g.push(e, v1, -1.0 / len);
        g.push(e, v2, 1.0 / len);
    }
    let mut c = CooMatrix::new(nf, ne);
    for (f, face) in mesh.faces.iter().enumerate() {
        let geo = &orientation.faces[f];
        for (i, &e) in face.edges.iter().enumerate() {
            c.push(f, e, -geo.edge_signs[i] * orientation.edges[e].length / geo.area);
        }
    }
    let mut d = CooMatrix::new(nt, nf);
    for (t, el) in mesh.elements.iter().enumerate() {
        let geo = &orientation.elements[t];
        for (i, &f) in el.faces.iter().enumerate() {
            d.push(t, f, geo.face_signs[i] * orientation.faces[f].area / geo.volume);
        }
    }
    [CsrMatrix::from(&g), CsrMatrix::from(&c), CsrMatrix::from(&d)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::builtin_pattern;
    use crate::poly::tabulate_coeffs;

    fn cube() -> (Mesh, OrientationTable) {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        (mesh, o)
    }

    fn column(v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v.as_slice())
    }

    /// Value at the element center of a vector polynomial of the element.
    fn at_center(ddr: &Ddr, t: usize, coeffs: &DVector<f64>) -> Point {
        let frame = ddr.element_frame(t);
        let tab = tabulate_coeffs(frame, true, ddr.k as i32, &column(coeffs), &[frame.center]);
        Point::new(tab.components[0][(0, 0)], tab.components[1][(0, 0)], tab.components[2][(0, 0)])
    }

    #[test]
    fn unit_edge_gradient() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 0).unwrap();
        let [v1, v2] = mesh.edges[0];
        let mut x = DVector::zeros(ddr.grad.total);
        x[v2] = 1.0;
        assert!((ddr.edges[0].gradient.apply(&x)[0] - 1.0).abs() < 1e-14);
        x[v1] = 1.0;
        assert!(ddr.edges[0].gradient.apply(&x)[0].abs() < 1e-14);
    }

    #[test]
    fn constants_have_constant_traces_and_zero_gradients() {
        let (mesh, o) = cube();
        let c = 2.5;
        for k in 0..=2 {
            let ddr = Ddr::new(&mesh, &o, k).unwrap();
            let x = ddr.interpolate_grad(|_| c).unwrap();
            for e in &ddr.edges {
                let t = e.trace.apply(&x);
                assert!((t[0] - c).abs() < 1e-12 && t.rows(1, t.len() - 1).amax() < 1e-12);
                assert!(e.gradient.apply(&x).amax() < 1e-12);
            }
            for f in &ddr.faces {
                let t = f.trace.apply(&x);
                assert!((t[0] - c).abs() < 1e-12 && t.rows(1, t.len() - 1).amax() < 1e-12);
                assert!(f.gradient.apply(&x).amax() < 1e-12);
            }
            assert!(ddr.elements[0].gradient.apply(&x).amax() < 1e-12);
            let g = ddr.gradient().unwrap();
            assert!(g.apply(&x).amax() < 1e-12);
        }
    }

    #[test]
    fn element_gradient_of_linear_and_quadratic() {
        let (mesh, o) = cube();
        for k in 0..=2 {
            let ddr = Ddr::new(&mesh, &o, k).unwrap();
            let x = ddr.interpolate_grad(|p| p.x).unwrap();
            let g = at_center(&ddr, 0, &ddr.elements[0].gradient.apply(&x));
            assert!((g - Point::new(1.0, 0.0, 0.0)).amax() < 1e-11, "k={k}: {g:?}");
        }
        // x y z - y^2 has gradient (yz, xz - 2y, xy); at the center (1/4, -3/4, 1/4).
        let ddr = Ddr::new(&mesh, &o, 2).unwrap();
        let x = ddr.interpolate_grad(|p| p.x * p.y * p.z - p.y * p.y).unwrap();
        let g = at_center(&ddr, 0, &ddr.elements[0].gradient.apply(&x));
        assert!((g - Point::new(0.25, -0.75, 0.25)).amax() < 1e-10, "{g:?}");
    }

    #[test]
    fn face_gradient_of_affine_function() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 0).unwrap();
        let grad = Point::new(1.0, -2.0, 0.5);
        let x = ddr.interpolate_grad(|p| grad.dot(p) + 3.0).unwrap();
        for f in 0..mesh.num_faces() {
            let n = o.faces[f].normal;
            let frame = ddr.face_frame(f);
            let coeffs = column(&ddr.faces[f].gradient.apply(&x));
            let tab = tabulate_coeffs(frame, true, 0, &coeffs, &[frame.center]);
            let got = Point::new(tab.components[0][(0, 0)], tab.components[1][(0, 0)], tab.components[2][(0, 0)]);
            assert!((got - (grad - n * grad.dot(&n))).amax() < 1e-11);
        }
    }

    #[test]
    fn face_curl_sign_oracle() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 0).unwrap();
        // Constant field: edge values c . t_E; closed loop gives zero curl.
        let c = Point::new(0.3, -1.0, 2.0);
        let x = DVector::from_iterator(mesh.num_edges(), o.edges.iter().map(|e| c.dot(&e.tangent)));
        for f in &ddr.faces {
            assert!(f.curl.apply(&x).amax() < 1e-13);
        }
        for f in 0..mesh.num_faces() {
            let geo = &o.faces[f];
            let mut ones = DVector::zeros(mesh.num_edges());
            let mut circulation = DVector::zeros(mesh.num_edges());
            let mut oracle = 0.0;
            for (i, &e) in mesh.faces[f].edges.iter().enumerate() {
                ones[e] = 1.0;
                circulation[e] = geo.edge_signs[i];
                oracle -= geo.edge_signs[i] * o.edges[e].length / geo.area;
            }
            assert!((ddr.faces[f].curl.apply(&ones)[0] - oracle).abs() < 1e-13);
            assert!((ddr.faces[f].curl.apply(&circulation)[0].abs() - 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn curl_potential_of_constant_field() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 0).unwrap();
        let c = Point::new(0.3, -1.0, 2.0);
        let x = DVector::from_iterator(mesh.num_edges(), o.edges.iter().map(|e| c.dot(&e.tangent)));
        let p = at_center(&ddr, 0, &ddr.elements[0].curl_potential.apply(&x));
        assert!((p - c).amax() < 1e-11);
        assert!(ddr.elements[0].curl.apply(&x).amax() < 1e-12);
        assert!(ddr.elements[0].curl.apply(&DVector::zeros(mesh.num_edges())).amax() == 0.0);
    }

    #[test]
    fn divergence_theorem() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 0).unwrap();
        let c = Point::new(0.3, -1.0, 2.0);
        let constant = DVector::from_iterator(mesh.num_faces(), o.faces.iter().map(|f| c.dot(&f.normal)));
        assert!(ddr.elements[0].divergence.apply(&constant).amax() < 1e-13);
        // x / 3 has unit divergence; on each face its normal component is constant.
        let w = DVector::from_iterator(mesh.num_faces(), o.faces.iter().map(|f| f.center.dot(&f.normal) / 3.0));
        assert!((ddr.elements[0].divergence.apply(&w)[0] - 1.0).abs() < 1e-13);
        let p = at_center(&ddr, 0, &ddr.elements[0].div_potential.apply(&constant));
        assert!((p - c).amax() < 1e-11);
    }

    #[test]
    fn lowest_order_gradient_is_scaled_incidence() {
        let (mesh, o) = cube();
        let g = Ddr::new(&mesh, &o, 0).unwrap().gradient().unwrap().to_dense();
        assert_eq!(g.shape(), (12, 8));
        for (e, &[v1, v2]) in mesh.edges.iter().enumerate() {
            let len = o.edges[e].length;
            assert!((g[(e, v1)] + 1.0 / len).abs() < 1e-14 && (g[(e, v2)] - 1.0 / len).abs() < 1e-14);
            assert_eq!(g.row(e).iter().filter(|x| **x != 0.0).count(), 2);
        }
    }

    #[test]
    fn interpolate_linear_on_cube() {
        let (mesh, o) = cube();
        let ddr = Ddr::new(&mesh, &o, 1).unwrap();
        let x = ddr.interpolate_grad(|p| p.x).unwrap();
        for v in 0..8 {
            let value = x[ddr.grad.range(0, v, 0).start];
            assert!(value == 0.0 || value == 1.0);
        }
        for (e, geo) in o.edges.iter().enumerate() {
            if geo.tangent.x.abs() == 1.0 {
                assert!((x[ddr.grad.range(1, e, 0).start] - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_forms_match_assembly() {
        for name in ["cube", "ring"] {
            let mesh = builtin_pattern(name).unwrap().build_mesh(0.5).unwrap();
            let o = OrientationTable::compute(&mesh).unwrap();
            let assembled = Ddr::new(&mesh, &o, 0).unwrap().differentials().unwrap();
            let closed = ddr0_closed_forms(&mesh, &o);
            for (a, c) in assembled.iter().zip(&closed) {
                assert!((a.to_dense() - csr_to_dense(c)).amax() < 1e-12);
            }
            // Rows of D^0 scaled by |T| / |F| are +-1 patterns.
            let d = csr_to_dense(&closed[2]);
            for (t, el) in mesh.elements.iter().enumerate() {
                for &f in &el.faces {
                    let s = d[(t, f)] * o.elements[t].volume / o.faces[f].area;
                    assert!((s.abs() - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cube_complex_up_to_degree_three() {
        let (mesh, o) = cube();
        for k in 0..=3 {
            let [g, c, d] = Ddr::new(&mesh, &o, k).unwrap().differentials().unwrap().map(|x| x.to_dense());
            let cg = (&c * &g).amax() / (c.amax() * g.amax());
            let dc = (&d * &c).amax() / (d.amax() * c.amax());
            assert!(cg < 1e-10 && dc < 1e-10, "k={k}: {cg:e} {dc:e}");
        }
    }
}
