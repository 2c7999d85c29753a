//! Reductions from degree `k` to the lowest-order complex, extensions back,
//! and lifting of cellular cohomology generators to degree `k`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use serde::Serialize;

use crate::cw::{CochainComplexInt, DeRhamScaling, DeRhamSpace, Direction};
use crate::ddr::{csr_to_dense, dense_to_csr, Ddr, LocalOp, Space};
use crate::error::{Error, Result};
use crate::poly::basis::{tabulate, tabulate_scalar};
use crate::poly::project::{gram, project, solve_checked};
use crate::poly::{build_subspace_basis, physical_differential, tabulate_coeffs, Differential, Frame, SubspaceKind, Tabulation};
use crate::verify::rank::{numeric_rank, RankOptions};

fn index(space: Space) -> usize {
    match space {
        Space::Grad => 0,
        Space::Curl => 1,
        Space::Div => 2,
        Space::Pk => 3,
    }
}

/// Reduction and extension matrices for the four spaces.
#[derive(Clone, Debug)]
pub struct LiftMaps {
    pub reductions: [CsrMatrix<f64>; 4],
    pub extensions: [CsrMatrix<f64>; 4],
}

impl LiftMaps {
    pub fn reduction(&self, space: Space) -> &CsrMatrix<f64> {
        &self.reductions[index(space)]
    }

    pub fn extension(&self, space: Space) -> &CsrMatrix<f64> {
        &self.extensions[index(space)]
    }

    pub fn build(low: &Ddr, high: &Ddr) -> Result<LiftMaps> {
        if low.k != 0 {
            return Err(Error::Domain("extensions start from the lowest-order complex".into()));
        }
        Ok(LiftMaps {
            reductions: Space::ALL.map(|s| reduce_matrix(high, s)),
            extensions: [
                dense_to_csr(&extend_grad(low, high)?),
                dense_to_csr(&extend_curl(low, high)?),
                dense_to_csr(&extend_div(low, high)?),
                dense_to_csr(&embed_constants(high, Space::Pk, 3)),
            ],
        })
    }

    /// Applies the reduction of `space` to a degree-`k` vector.
    pub fn reduce(&self, space: Space, x: &DVector<f64>) -> DVector<f64> {
        self.reduction(space) * x
    }

    pub fn extend(&self, space: Space, x: &DVector<f64>) -> DVector<f64> {
        self.extension(space) * x
    }
}

/// Mean-value weights of the monomials of `frame` on a rule.
fn means(frame: &Frame, degree: i32, rule: &crate::poly::QuadratureRule) -> DVector<f64> {
    let t = frame.tabulate(degree, &rule.points);
    let w = DVector::from_column_slice(&rule.weights);
    t.transpose() * &w / rule.measure()
}

/// Reduction matrix: vertex values, and the averages of edge, face or
/// element polynomials.
fn reduce_matrix(ddr: &Ddr, space: Space) -> CsrMatrix<f64> {
    let layout = ddr.layout(space);
    let mesh = ddr.mesh;
    let g = &ddr.geometry;
    let k = ddr.k as i32;
    let (rows, entity_dim) = match space {
        Space::Grad => (mesh.num_vertices(), 0),
        Space::Curl => (mesh.num_edges(), 1),
        Space::Div => (mesh.num_faces(), 2),
        Space::Pk => (mesh.num_elements(), 3),
    };
    let mut m = DMatrix::zeros(rows, layout.total);
    for i in 0..rows {
        let range = layout.range(entity_dim, i, 0);
        let w = match entity_dim {
            0 => DVector::from_element(1, 1.0),
            1 => means(&g.edge_frames[i], k, &g.edge_rules[i]),
            2 => means(&g.face_frames[i], k, &g.face_rules[i]),
            _ => means(&g.element_frames[i], k, &g.element_rules[i]),
        };
        for (j, c) in range.enumerate() {
            m[(i, c)] = w[j];
        }
    }
    dense_to_csr(&m)
}

/// Embeds lowest-order scalars as constant polynomials on entities of
/// dimension `entity_dim` (the constant monomial comes first).
fn embed_constants(high: &Ddr, space: Space, entity_dim: usize) -> DMatrix<f64> {
    let layout = high.layout(space);
    let n = [high.mesh.num_vertices(), high.mesh.num_edges(), high.mesh.num_faces(), high.mesh.num_elements()][entity_dim];
    let mut m = DMatrix::zeros(layout.total, n);
    for i in 0..n {
        m[(layout.range(entity_dim, i, 0).start, i)] = 1.0;
    }
    m
}

/// `op` as a matrix acting on full vectors with `n` entries.
fn widen(op: &LocalOp, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(op.mat.nrows(), n);
    for (j, &c) in op.cols.iter().enumerate() {
        m.column_mut(c).copy_from(&op.mat.column(j));
    }
    m
}

/// `op` composed with already computed rows of an extension matrix.
fn through(op: &LocalOp, ext: &DMatrix<f64>) -> DMatrix<f64> {
    &op.mat * ext.select_rows(op.cols.iter())
}

fn basis_tab(frame: &Frame, kind: SubspaceKind, degree: i32, points: &[crate::mesh::Point]) -> Result<Tabulation> {
    Ok(tabulate(frame, &*build_subspace_basis(kind, degree, frame.dim())?, points))
}

fn derived_tab(
    frame: &Frame,
    kind: SubspaceKind,
    degree: i32,
    op: Differential,
    points: &[crate::mesh::Point],
) -> Result<Tabulation> {
    let basis = build_subspace_basis(kind, degree, frame.dim())?;
    let coeffs = physical_differential(op, frame, degree)? * &basis.coeffs;
    let (_, out) = op.shapes(frame.dim(), degree);
    Ok(tabulate_coeffs(frame, out.components > 1, out.degree, &coeffs, points))
}

fn set_rows(ext: &mut DMatrix<f64>, range: std::ops::Range<usize>, rows: &DMatrix<f64>) {
    assert_eq!(range.len(), rows.nrows());
    ext.rows_mut(range.start, range.len()).copy_from(rows);
}

fn extend_grad(low: &Ddr, high: &Ddr) -> Result<DMatrix<f64>> {
    use SubspaceKind::*;
    let (mesh, k) = (high.mesh, high.k as i32);
    let g = &high.geometry;
    let n0 = low.grad.total;
    let mut ext = DMatrix::zeros(high.grad.total, n0);
    for v in 0..mesh.num_vertices() {
        ext[(high.grad.range(0, v, 0).start, low.grad.range(0, v, 0).start)] = 1.0;
    }
    if k == 0 {
        return Ok(ext);
    }
    // Edges: int E r' = -int G_E^0 r + q_V2 r(V2) - q_V1 r(V1), r in P^{0,k}(E).
    for e in 0..mesh.num_edges() {
        let (frame, rule) = (&g.edge_frames[e], &g.edge_rules[e]);
        let [v1, v2] = mesh.edges[e];
        let r = basis_tab(frame, P0, k, &rule.points)?;
        let dr = derived_tab(frame, P0, k, Differential::EdgeDerivative, &rule.points)?;
        let lhs = gram(&dr, &tabulate_scalar(frame, k - 1, &rule.points), rule);
        let ends = [mesh.vertices[v1], mesh.vertices[v2]];
        let at_ends = basis_tab(frame, P0, k, &ends)?.components.remove(0);
        let mut rhs = -gram(&r, &tabulate_scalar(frame, 0, &rule.points), rule) * widen(&low.edges[e].gradient, n0);
        for j in 0..r.len() {
            rhs[(j, low.grad.range(0, v2, 0).start)] += at_ends[(1, j)];
            rhs[(j, low.grad.range(0, v1, 0).start)] -= at_ends[(0, j)];
        }
        let rows = solve_checked(&lhs, &rhs, &format!("edge {e} gradient extension"))?;
        set_rows(&mut ext, high.grad.range(1, e, 0), &rows);
    }
    // Faces: int E div_F v = -int cG_F^0 . v + sum w_FE int gamma_E (v . n_FE), v in Rc^k(F).
    for f in 0..mesh.num_faces() {
        let (frame, rule) = (&g.face_frames[f], &g.face_rules[f]);
        let geo = &high.orientation.faces[f];
        let v = basis_tab(frame, Rc, k, &rule.points)?;
        let div_v = derived_tab(frame, Rc, k, Differential::DivF, &rule.points)?;
        let lhs = gram(&div_v, &tabulate_scalar(frame, k - 1, &rule.points), rule);
        let mut rhs = -gram(&v, &basis_tab(frame, VP, 0, &rule.points)?, rule) * widen(&low.faces[f].gradient, n0);
        for (i, &e) in mesh.faces[f].edges.iter().enumerate() {
            let (er, ef) = (&g.edge_rules[e], &g.edge_frames[e]);
            let vn = basis_tab(frame, Rc, k, &er.points)?.dot(&geo.edge_normals[i]);
            let trace = tabulate_scalar(ef, k + 1, &er.points);
            rhs += gram(&vn, &trace, er) * geo.edge_signs[i] * through(&high.edges[e].trace, &ext);
        }
        let rows = solve_checked(&lhs, &rhs, &format!("face {f} gradient extension"))?;
        set_rows(&mut ext, high.grad.range(2, f, 0), &rows);
    }
    // Elements: int E div v = -int cG_T^0 . v + sum w_TF int gamma_F (v . n_F), v in Rc^k(T).
    for t in 0..mesh.num_elements() {
        let (frame, rule) = (&g.element_frames[t], &g.element_rules[t]);
        let signs = &high.orientation.elements[t].face_signs;
        let v = basis_tab(frame, Rc, k, &rule.points)?;
        let div_v = derived_tab(frame, Rc, k, Differential::Div, &rule.points)?;
        let lhs = gram(&div_v, &tabulate_scalar(frame, k - 1, &rule.points), rule);
        let mut rhs = -gram(&v, &basis_tab(frame, VP, 0, &rule.points)?, rule) * widen(&low.elements[t].gradient, n0);
        for (i, &f) in mesh.elements[t].faces.iter().enumerate() {
            let (fr, ff) = (&g.face_rules[f], &g.face_frames[f]);
            let vn = basis_tab(frame, Rc, k, &fr.points)?.dot(&high.orientation.faces[f].normal);
            let trace = tabulate_scalar(ff, k + 1, &fr.points);
            rhs += gram(&vn, &trace, fr) * signs[i] * through(&high.faces[f].trace, &ext);
        }
        let rows = solve_checked(&lhs, &rhs, &format!("element {t} gradient extension"))?;
        set_rows(&mut ext, high.grad.range(3, t, 0), &rows);
    }
    Ok(ext)
}

/// Projection of lowest-order vector polynomials onto a subspace.
fn project_from_vp0(frame: &Frame, rule: &crate::poly::QuadratureRule, kind: SubspaceKind, degree: i32) -> Result<DMatrix<f64>> {
    let target = basis_tab(frame, kind, degree, &rule.points)?;
    let source = basis_tab(frame, SubspaceKind::VP, 0, &rule.points)?;
    project(&target, &source, rule, "lowest-order projection")
}

fn extend_curl(low: &Ddr, high: &Ddr) -> Result<DMatrix<f64>> {
    use SubspaceKind::*;
    let (mesh, k) = (high.mesh, high.k as i32);
    let g = &high.geometry;
    let n0 = low.curl.total;
    let mut ext = embed_constants(high, Space::Curl, 1);
    if k == 0 {
        return Ok(ext);
    }
    for f in 0..mesh.num_faces() {
        let (frame, rule) = (&g.face_frames[f], &g.face_rules[f]);
        let geo = &high.orientation.faces[f];
        // R component: int E . vrot r = int C_F^0 r + sum w_FE int v_E r, r in P^{0,k}(F).
        let r = basis_tab(frame, P0, k, &rule.points)?;
        let vrot_r = derived_tab(frame, P0, k, Differential::VrotF, &rule.points)?;
        let lhs = gram(&vrot_r, &basis_tab(frame, R, k - 1, &rule.points)?, rule);
        let mut rhs = gram(&r, &tabulate_scalar(frame, 0, &rule.points), rule) * widen(&low.faces[f].curl, n0);
        for (i, &e) in mesh.faces[f].edges.iter().enumerate() {
            let er = &g.edge_rules[e];
            let re = basis_tab(frame, P0, k, &er.points)?;
            let ones = Tabulation {
                components: vec![DMatrix::from_element(er.len(), 1, 1.0)],
            };
            let col = gram(&re, &ones, er) * geo.edge_signs[i];
            let mut c = rhs.column_mut(low.curl.range(1, e, 0).start);
            c += col.column(0);
        }
        let rows = solve_checked(&lhs, &rhs, &format!("face {f} curl extension"))?;
        set_rows(&mut ext, high.curl.range(2, f, 0), &rows);
        // Rc component: projection of the lowest-order tangential trace.
        let p = project_from_vp0(frame, rule, Rc, k)?;
        set_rows(&mut ext, high.curl.range(2, f, 1), &(p * widen(&low.faces[f].tangential_trace, n0)));
    }
    for t in 0..mesh.num_elements() {
        let (frame, rule) = (&g.element_frames[t], &g.element_rules[t]);
        let signs = &high.orientation.elements[t].face_signs;
        // R component: int E . curl w = int cC_T^0 . w - sum w_TF int gamma_t,F . (w x n_F), w in Gc^k(T).
        let w = basis_tab(frame, Gc, k, &rule.points)?;
        let curl_w = derived_tab(frame, Gc, k, Differential::Curl, &rule.points)?;
        let lhs = gram(&curl_w, &basis_tab(frame, R, k - 1, &rule.points)?, rule);
        let mut rhs = gram(&w, &basis_tab(frame, VP, 0, &rule.points)?, rule) * widen(&low.elements[t].curl, n0);
        for (i, &f) in mesh.elements[t].faces.iter().enumerate() {
            let (fr, ff) = (&g.face_rules[f], &g.face_frames[f]);
            let wxn = basis_tab(frame, Gc, k, &fr.points)?.cross(&high.orientation.faces[f].normal);
            let gt = basis_tab(ff, VP, k, &fr.points)?;
            rhs -= gram(&wxn, &gt, fr) * signs[i] * through(&high.faces[f].tangential_trace, &ext);
        }
        let rows = solve_checked(&lhs, &rhs, &format!("element {t} curl extension"))?;
        set_rows(&mut ext, high.curl.range(3, t, 0), &rows);
        let p = project_from_vp0(frame, rule, Rc, k)?;
        set_rows(&mut ext, high.curl.range(3, t, 1), &(p * widen(&low.elements[t].curl_potential, n0)));
    }
    Ok(ext)
}

fn extend_div(low: &Ddr, high: &Ddr) -> Result<DMatrix<f64>> {
    use SubspaceKind::*;
    let (mesh, k) = (high.mesh, high.k as i32);
    let g = &high.geometry;
    let n0 = low.div.total;
    let mut ext = embed_constants(high, Space::Div, 2);
    if k == 0 {
        return Ok(ext);
    }
    for t in 0..mesh.num_elements() {
        let (frame, rule) = (&g.element_frames[t], &g.element_rules[t]);
        let signs = &high.orientation.elements[t].face_signs;
        // G component: int E . grad r = -int D_T^0 r + sum w_TF int w_F r, r in P^{0,k}(T).
        let r = basis_tab(frame, P0, k, &rule.points)?;
        let grad_r = derived_tab(frame, P0, k, Differential::Grad, &rule.points)?;
        let lhs = gram(&grad_r, &basis_tab(frame, G, k - 1, &rule.points)?, rule);
        let mut rhs = -gram(&r, &tabulate_scalar(frame, 0, &rule.points), rule) * widen(&low.elements[t].divergence, n0);
        for (i, &f) in mesh.elements[t].faces.iter().enumerate() {
            let fr = &g.face_rules[f];
            let rf = basis_tab(frame, P0, k, &fr.points)?;
            let ones = Tabulation {
                components: vec![DMatrix::from_element(fr.len(), 1, 1.0)],
            };
            let col = gram(&rf, &ones, fr) * signs[i];
            let mut c = rhs.column_mut(low.div.range(2, f, 0).start);
            c += col.column(0);
        }
        let rows = solve_checked(&lhs, &rhs, &format!("element {t} divergence extension"))?;
        set_rows(&mut ext, high.div.range(3, t, 0), &rows);
        let p = project_from_vp0(frame, rule, Gc, k)?;
        set_rows(&mut ext, high.div.range(3, t, 1), &(p * widen(&low.elements[t].div_potential, n0)));
    }
    Ok(ext)
}

/// Certification data of lifted generators.
#[derive(Clone, Debug, Serialize)]
pub struct LiftCertificate {
    /// `max_j |d g_j| / (|d| |g_j|)` for the outgoing differential `d`.
    pub kernel_residual: f64,
    pub image_rank: usize,
    /// Numeric rank of `[image | generators]`.
    pub stacked_rank: usize,
    pub min_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftedGenerators {
    pub degree: usize,
    pub index: usize,
    pub vectors: Vec<Vec<f64>>,
    pub certificate: LiftCertificate,
}

/// Kernel residual tolerance of lifted generators.
pub const LIFT_TOL: f64 = 1e-9;

/// Lifts cellular generators of `H^i` (`i = 1, 2`) to the degree-`k`
/// complex: `g -> E (kappa^{-1} g)`, with a kernel and independence check.
pub fn lift_generators(
    cw: &CochainComplexInt,
    scaling: &DeRhamScaling,
    maps: &LiftMaps,
    differentials: &[CsrMatrix<f64>; 3],
    k: usize,
    i: usize,
    opts: &RankOptions,
) -> Result<LiftedGenerators> {
    let (space, de_rham) = match i {
        1 => (Space::Curl, DeRhamSpace::Curl),
        2 => (Space::Div, DeRhamSpace::Div),
        _ => return Err(Error::Domain(format!("generators are lifted for i = 1, 2, not {i}"))),
    };
    let gens = cw.cohomology_generators(i)?;
    let outgoing = &differentials[i];
    let incoming = csr_to_dense(&differentials[i - 1]);
    let scale = csr_to_dense(outgoing).amax();
    let mut vectors = Vec::new();
    let mut residual: f64 = 0.0;
    for g in &gens {
        let g = DVector::from_iterator(g.len(), g.iter().map(|&x| x as f64));
        let low = scaling.de_rham_map(Direction::Inverse, de_rham, &g)?;
        let x = maps.extend(space, &low);
        let r = (outgoing * &x).amax() / (scale * x.amax()).max(f64::MIN_POSITIVE);
        residual = residual.max(r);
        vectors.push(x);
    }
    let image = numeric_rank(&incoming, opts);
    let mut stacked = DMatrix::zeros(incoming.nrows(), incoming.ncols() + vectors.len());
    stacked.columns_mut(0, incoming.ncols()).copy_from(&incoming);
    for (j, v) in vectors.iter().enumerate() {
        stacked.column_mut(incoming.ncols() + j).copy_from(v);
    }
    let full = numeric_rank(&stacked, opts);
    let certificate = LiftCertificate {
        kernel_residual: residual,
        image_rank: image.rank,
        stacked_rank: full.rank,
        min_gap: image.gap.min(full.gap),
    };
    if residual > LIFT_TOL || full.rank != image.rank + vectors.len() {
        return Err(Error::Certification(format!(
            "lifted H^{i} generators at degree {k}: kernel residual {residual:.3e} (tolerance {LIFT_TOL:e}), rank {} vs {} + {}",
            full.rank,
            image.rank,
            vectors.len()
        )));
    }
    Ok(LiftedGenerators {
        degree: k,
        index: i,
        vectors: vectors.into_iter().map(|v| v.iter().copied().collect()).collect(),
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{builtin_pattern, Mesh, OrientationTable};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    struct Fixture {
        maps: LiftMaps,
        high: [DMatrix<f64>; 3],
        low: [DMatrix<f64>; 3],
    }

    /// Ring mesh at degree 1, assembled once for all property tests.
    fn ring() -> &'static Fixture {
        static FIXTURE: OnceLock<Fixture> = OnceLock::new();
        FIXTURE.get_or_init(|| {
            let mesh: Mesh = builtin_pattern("ring").unwrap().build_mesh(1.0).unwrap();
            let o = OrientationTable::compute(&mesh).unwrap();
            let low = Ddr::new(&mesh, &o, 0).unwrap();
            let high = Ddr::new(&mesh, &o, 1).unwrap();
            Fixture {
                maps: LiftMaps::build(&low, &high).unwrap(),
                high: high.differentials().unwrap().map(|d| d.to_dense()),
                low: low.differentials().unwrap().map(|d| d.to_dense()),
            }
        })
    }

    #[test]
    fn reductions_read_means() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        let high = Ddr::new(&mesh, &o, 2).unwrap();
        let r = csr_to_dense(&reduce_matrix(&high, Space::Curl));
        // Monomials 1, s, s^2 of an edge with s in [-1/2, 1/2]: means 1, 0, 1/12.
        let row: Vec<f64> = high.curl.range(1, 0, 0).map(|c| r[(0, c)]).collect();
        assert!((row[0] - 1.0).abs() < 1e-14 && row[1].abs() < 1e-14 && (row[2] - 1.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn degree_zero_maps_are_identities() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        let low = Ddr::new(&mesh, &o, 0).unwrap();
        let maps = LiftMaps::build(&low, &low).unwrap();
        for s in 0..4 {
            let e = csr_to_dense(&maps.extensions[s]);
            let r = csr_to_dense(&maps.reductions[s]);
            assert_eq!(e, DMatrix::identity(e.nrows(), e.ncols()));
            assert_eq!(r, DMatrix::identity(r.nrows(), r.ncols()));
        }
        let high = Ddr::new(&mesh, &o, 1).unwrap();
        assert!(matches!(LiftMaps::build(&high, &high), Err(Error::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reduction_inverts_extension(seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let f = ring();
            for s in 0..4 {
                let n = f.maps.extensions[s].ncols();
                let x = DVector::from_iterator(n, (0..n).map(|i| seed[i % seed.len()] + i as f64 * 1e-3));
                let back = &f.maps.reductions[s] * (&f.maps.extensions[s] * &x);
                prop_assert!((back - &x).amax() <= 1e-12 * x.amax().max(1.0));
            }
        }

        #[test]
        fn extensions_commute_with_differentials(seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let f = ring();
            for i in 0..3 {
                let n = f.low[i].ncols();
                let x = DVector::from_iterator(n, (0..n).map(|j| seed[(7 * j) % seed.len()]));
                let lhs = &f.high[i] * (csr_to_dense(&f.maps.extensions[i]) * &x);
                let rhs = csr_to_dense(&f.maps.extensions[i + 1]) * (&f.low[i] * &x);
                prop_assert!((&lhs - &rhs).amax() <= 1e-10 * lhs.amax().max(rhs.amax()).max(1.0));
            }
        }

        #[test]
        fn reductions_commute_with_differentials(seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let f = ring();
            for i in 0..3 {
                let n = f.high[i].ncols();
                let x = DVector::from_iterator(n, (0..n).map(|j| seed[(5 * j + 3) % seed.len()]));
                let lhs = csr_to_dense(&f.maps.reductions[i + 1]) * (&f.high[i] * &x);
                let rhs = &f.low[i] * (csr_to_dense(&f.maps.reductions[i]) * &x);
                prop_assert!((&lhs - &rhs).amax() <= 1e-10 * lhs.amax().max(rhs.amax()).max(1.0));
            }
        }
    }
}
