//! The individual check families, evaluated on one assembled pair of
//! complexes (degree `k` and lowest order).

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::rank::{numeric_rank, RankInfo, RankOptions, AMBIGUOUS_GAP};
use super::CheckResult;
use crate::cw::{CochainComplexInt, DeRhamScaling, DeRhamSpace};
use crate::ddr::{csr_to_dense, ddr0_closed_forms, Ddr, Space};
use crate::error::{Error, Result};
use crate::lift::{lift_generators, LiftMaps, LiftedGenerators, LIFT_TOL};
use crate::mesh::{Mesh, OrientationTable, Point};
use crate::poly::basis::tabulate_scalar;
use crate::poly::tabulate_coeffs;

/// Pure bookkeeping identities.
pub const TOL_EXACT: f64 = 1e-12;
/// Identities between assembled operators.
pub const TOL_ASSEMBLED: f64 = 1e-10;
/// Identities involving solved local systems.
pub const TOL_SOLVED: f64 = 1e-9;
/// Lowest-order versus cellular cochains.
pub const TOL_DE_RHAM: f64 = 1e-13;

/// Everything the checks need, assembled once.
pub struct Assembly<'a> {
    pub mesh: &'a Mesh,
    pub orientation: &'a OrientationTable,
    pub k: usize,
    pub high: Ddr<'a>,
    low: Option<Ddr<'a>>,
    pub d_high: [CsrMatrix<f64>; 3],
    pub d_low: [CsrMatrix<f64>; 3],
    pub lift: LiftMaps,
    pub cw: CochainComplexInt,
    pub scaling: DeRhamScaling,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

/// `max |a - b| / max(max |a|, max |b|)`, zero when both vanish.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let scale = max_abs(a).max(max_abs(b));
    if scale == 0.0 {
        0.0
    } else {
        max_abs(&(a - b)) / scale
    }
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn gap_warning(infos: &[&RankInfo]) -> Option<String> {
    let worst = infos.iter().map(|i| i.gap).fold(f64::INFINITY, f64::min);
    (worst < AMBIGUOUS_GAP).then(|| format!("ambiguous rank decision: spectral gap {worst:.3e}"))
}

/// Basis of the kernel of a reduction matrix whose rows have disjoint
/// supports: each row is eliminated against its first nonzero column.
fn reduction_kernel(r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = r.ncols();
    let mut pivot_of_col = vec![None; n];
    for i in 0..r.nrows() {
        if let Some(p) = (0..n).find(|&j| r[(i, j)] != 0.0) {
            pivot_of_col[p] = Some(i);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&j| pivot_of_col[j].is_none()).collect();
    let pivots: Vec<(usize, usize)> = (0..n).filter_map(|j| pivot_of_col[j].map(|i| (i, j))).collect();
    let mut z = DMatrix::zeros(n, free.len());
    for (c, &j) in free.iter().enumerate() {
        z[(j, c)] = 1.0;
        for &(i, p) in &pivots {
            if r[(i, j)] != 0.0 {
                z[(p, c)] = -r[(i, j)] / r[(i, p)];
            }
        }
    }
    z
}

/// Polynomial in global coordinates, as `(coefficient, exponents)` terms.
struct Poly {
    name: String,
    terms: Vec<(f64, [i32; 3])>,
}

impl Poly {
    fn value(&self, p: &Point) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * p.x.powi(e[0]) * p.y.powi(e[1]) * p.z.powi(e[2]))
            .sum()
    }

    fn gradient(&self, p: &Point) -> Point {
        let mut g = Point::zeros();
        for (c, e) in &self.terms {
            for d in 0..3 {
                if e[d] == 0 {
                    continue;
                }
                let mut f = *e;
                f[d] -= 1;
                g[d] += c * e[d] as f64 * p.x.powi(f[0]) * p.y.powi(f[1]) * p.z.powi(f[2]);
            }
        }
        g
    }
}

fn monomials(degree: i32) -> Vec<[i32; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for a in (0..=total).rev() {
            for b in (0..=total - a).rev() {
                out.push([a, b, total - a - b]);
            }
        }
    }
    out
}

/// Largest pointwise mismatch and scale of a comparison.
#[derive(Default)]
struct Mismatch {
    error: f64,
    scale: f64,
    worst: Option<String>,
}

impl Mismatch {
    fn record(&mut self, computed: &[f64], exact: &[f64], label: impl FnOnce() -> String) {
        let mut err: f64 = 0.0;
        for (a, b) in computed.iter().zip(exact) {
            err = err.max((a - b).abs());
            self.scale = self.scale.max(b.abs());
        }
        if err > self.error {
            self.error = err;
            self.worst = Some(label());
        }
    }

    fn result(&self, name: &str, tol: f64) -> CheckResult {
        let residual = if self.scale == 0.0 { self.error } else { self.error / self.scale.max(1.0) };
        let r = CheckResult::new(name, residual, tol);
        match &self.worst {
            Some(w) => r.with_detail(format!("largest mismatch at {w}")),
            None => r,
        }
    }
}

impl<'a> Assembly<'a> {
    pub fn new(mesh: &'a Mesh, orientation: &'a OrientationTable, k: usize, cw: CochainComplexInt) -> Result<Assembly<'a>> {
        let high = Ddr::new(mesh, orientation, k)?;
        let low = if k > 0 { Some(Ddr::new(mesh, orientation, 0)?) } else { None };
        let d_high = high.differentials()?.map(|g| g.matrix);
        let d_low = match &low {
            Some(l) => l.differentials()?.map(|g| g.matrix),
            None => d_high.clone(),
        };
        let lift = LiftMaps::build(low.as_ref().unwrap_or(&high), &high)?;
        let scaling = DeRhamScaling::new(mesh, orientation)?;
        Ok(Assembly {
            mesh,
            orientation,
            k,
            high,
            low,
            d_high,
            d_low,
            lift,
            cw,
            scaling,
        })
    }

    /// The lowest-order complex.
    pub fn low(&self) -> &Ddr<'a> {
        self.low.as_ref().unwrap_or(&self.high)
    }

    /// Explicit lowest-order formulas against the generic assembly.
    pub fn check_closed_forms(&self) -> Vec<CheckResult> {
        let closed = ddr0_closed_forms(self.mesh, self.orientation);
        ["grad", "curl", "div"]
            .iter()
            .zip(closed.iter().zip(&self.d_low))
            .map(|(name, (c, d))| {
                let residual = max_abs(&(csr_to_dense(c) - csr_to_dense(d)));
                CheckResult::new(format!("closed_forms/{name}"), residual, TOL_EXACT)
            })
            .collect()
    }

    /// `uC uG = 0` and `D uC = 0` at degree `k`.
    pub fn check_complex(&self) -> Vec<CheckResult> {
        let [g, c, d] = &self.d_high;
        [("complex/curl_grad", c, g), ("complex/div_curl", d, c)]
            .into_iter()
            .map(|(name, a, b)| {
                let prod = csr_to_dense(&(a * b));
                let scale = max_abs(&csr_to_dense(a)) * max_abs(&csr_to_dense(b));
                let residual = if scale == 0.0 { 0.0 } else { max_abs(&prod) / scale };
                CheckResult::new(name, residual, TOL_ASSEMBLED)
            })
            .collect()
    }

    /// Left inverses, cochain properties of reductions and extensions, and
    /// the lowest-order complex against the cellular cochains.
    pub fn check_cochain_diagram(&self) -> Result<Vec<CheckResult>> {
        let mut out = Vec::new();
        let red = self.lift.reductions.each_ref().map(csr_to_dense);
        let ext = self.lift.extensions.each_ref().map(csr_to_dense);
        let hi = self.d_high.each_ref().map(csr_to_dense);
        let lo = self.d_low.each_ref().map(csr_to_dense);
        let names = Space::ALL.map(|s| s.name());

        for s in 0..4 {
            let re = &red[s] * &ext[s];
            let id = DMatrix::identity(re.nrows(), re.ncols());
            out.push(CheckResult::new(format!("cochain/left_inverse/{}", names[s]), max_abs(&(re - id)), TOL_EXACT));
        }

        let tests: Vec<Poly> = vec![
            Poly { name: "1".into(), terms: vec![(1.0, [0, 0, 0])] },
            Poly { name: "x".into(), terms: vec![(1.0, [1, 0, 0])] },
            Poly { name: "y".into(), terms: vec![(1.0, [0, 1, 0])] },
            Poly { name: "z".into(), terms: vec![(1.0, [0, 0, 1])] },
            Poly {
                name: "xy - z^2 + 1/2".into(),
                terms: vec![(1.0, [1, 1, 0]), (-1.0, [0, 0, 2]), (0.5, [0, 0, 0])],
            },
        ];
        let mut worst: f64 = 0.0;
        for q in &tests {
            let ik = self.high.interpolate_grad(|p| q.value(p))?;
            let i0 = self.low().interpolate_grad(|p| q.value(p))?;
            worst = worst.max(rel_diff(&column(&(&red[0] * ik)), &column(&i0)));
        }
        out.push(CheckResult::new("cochain/reduction/interpolation", worst, TOL_ASSEMBLED));
        for i in 0..3 {
            let residual = rel_diff(&(&red[i + 1] * &hi[i]), &(&lo[i] * &red[i]));
            out.push(CheckResult::new(format!("cochain/reduction/{}", names[i]), residual, TOL_ASSEMBLED));
        }

        let one_k = self.high.interpolate_grad(|_| 1.0)?;
        let one_0 = self.low().interpolate_grad(|_| 1.0)?;
        let residual = rel_diff(&column(&(&ext[0] * &one_0)), &column(&one_k));
        out.push(CheckResult::new("cochain/extension/interpolation", residual, TOL_ASSEMBLED));
        for i in 0..3 {
            let residual = rel_diff(&(&hi[i] * &ext[i]), &(&ext[i + 1] * &lo[i]));
            out.push(CheckResult::new(format!("cochain/extension/{}", names[i]), residual, TOL_ASSEMBLED));
        }

        let kappa = [DeRhamSpace::Grad, DeRhamSpace::Curl, DeRhamSpace::Div, DeRhamSpace::Pk]
            .map(|s| DMatrix::from_diagonal(self.scaling.diagonal(s)));
        let ones = DMatrix::from_element(one_0.len(), 1, 1.0);
        let residual = rel_diff(&(&kappa[0] * column(&one_0)), &ones);
        out.push(CheckResult::new("cochain/de_rham/constants", residual, TOL_DE_RHAM));
        for i in 0..3 {
            let cw = self.cw.d[i].to_f64();
            let residual = rel_diff(&(&kappa[i + 1] * &lo[i]), &(cw * &kappa[i]));
            out.push(CheckResult::new(format!("cochain/de_rham/{}", names[i]), residual, TOL_DE_RHAM));
        }
        Ok(out)
    }

    /// Numerical ranks of the degree-`k` differentials, the cohomology
    /// dimensions they imply, and the Euler identities.
    pub fn check_cohomology(&self, opts: &RankOptions) -> (Vec<CheckResult>, [usize; 3], [i64; 4]) {
        let infos = self.d_high.each_ref().map(|d| numeric_rank(&csr_to_dense(d), opts));
        let r = infos.each_ref().map(|i| i.rank as i64);
        let n = self.high.dims().map(|x| x as i64);
        let h = [n[0] - r[0] - 1, n[1] - r[1] - r[0], n[2] - r[2] - r[1], n[3] - r[2]];
        let b = self.cw.betti_numbers().0.map(|x| x as i64);
        let expected = [b[0] - 1, b[1], b[2], b[3]];
        let warning = gap_warning(&infos.each_ref());
        let mut out = Vec::new();
        for i in 0..4 {
            out.push(
                CheckResult::new(format!("cohomology/H{i}"), (h[i] - expected[i]).abs() as f64, 0.0)
                    .with_detail(format!("dimension {} (expected {})", h[i], expected[i]))
                    .with_warning(warning.clone()),
            );
        }
        let chi = self.mesh.counts().euler_characteristic();
        let alt = n[0] - n[1] + n[2] - n[3];
        out.push(
            CheckResult::new("cohomology/dims_euler", (alt - chi).abs() as f64, 0.0)
                .with_detail(format!("alternating sum {alt}, Euler characteristic {chi}")),
        );
        let betti_chi = b[0] - b[1] + b[2] - b[3];
        out.push(
            CheckResult::new("cohomology/betti_euler", (betti_chi - chi).abs() as f64, 0.0)
                .with_detail(format!("b0 - b1 + b2 - b3 = {betti_chi}, V - E + F - T = {chi}")),
        );
        let gap = infos.iter().map(|i| i.gap).fold(f64::INFINITY, f64::min);
        out.push(
            CheckResult::new("cohomology/rank_gap", 1.0 / gap, 1.0 / AMBIGUOUS_GAP)
                .with_detail(format!("smallest spectral gap {gap:.3e}")),
        );
        let ranks = infos.each_ref().map(|i| i.rank);
        (out, ranks, h)
    }

    /// Rank chain of the differentials restricted to vectors with vanishing
    /// reduction; the restricted complex must be exact at every stage.
    pub fn check_zero_reduction_exactness(&self, opts: &RankOptions) -> Vec<CheckResult> {
        let z = self.lift.reductions.each_ref().map(|r| reduction_kernel(&csr_to_dense(r)));
        let infos: Vec<RankInfo> = (0..3)
            .map(|i| numeric_rank(&(csr_to_dense(&self.d_high[i]) * &z[i]), opts))
            .collect();
        let r: Vec<i64> = infos.iter().map(|i| i.rank as i64).collect();
        let m = z.each_ref().map(|z| z.ncols() as i64);
        let incoming = [0, r[0], r[1], r[2]];
        let outgoing = [r[0], r[1], r[2], 0];
        let warning = gap_warning(&infos.iter().collect::<Vec<_>>());
        (0..4)
            .map(|i| {
                let kernel = m[i] - outgoing[i];
                CheckResult::new(format!("exactness/stage{i}"), (kernel - incoming[i]).abs() as f64, 0.0)
                    .with_detail(format!("kernel {kernel}, image {} in a subspace of dimension {}", incoming[i], m[i]))
                    .with_warning(warning.clone())
            })
            .collect()
    }

    /// Traces and gradients of interpolated polynomials of degree `k + 1`
    /// reproduce the exact traces and gradients.
    pub fn check_consistency(&self, opts: &RankOptions) -> Result<Vec<CheckResult>> {
        let k = self.k as i32;
        let mut polys: Vec<Poly> = monomials(k + 1)
            .into_iter()
            .map(|e| Poly {
                name: format!("x^{} y^{} z^{}", e[0], e[1], e[2]),
                terms: vec![(1.0, e)],
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        polys.push(Poly {
            name: format!("random combination (seed {})", opts.seed),
            terms: monomials(k + 1).into_iter().map(|e| (rng.random_range(-1.0..1.0), e)).collect(),
        });

        let ddr = &self.high;
        let g = &ddr.geometry;
        let mut trace = Mismatch::default();
        let mut gradient = Mismatch::default();
        for q in &polys {
            let x = ddr.interpolate_grad(|p| q.value(p))?;
            let exact = |pts: &[Point]| pts.iter().map(|p| q.value(p)).collect::<Vec<_>>();
            for e in 0..self.mesh.num_edges() {
                let (frame, pts) = (&g.edge_frames[e], &g.edge_rules[e].points);
                let t = tabulate_scalar(frame, k + 1, pts).components[0].clone() * ddr.edges[e].trace.apply(&x);
                trace.record(t.as_slice(), &exact(pts), || format!("edge {e}, {}", q.name));
                let d = tabulate_scalar(frame, k, pts).components[0].clone() * ddr.edges[e].gradient.apply(&x);
                let dq: Vec<f64> = pts.iter().map(|p| q.gradient(p).dot(&frame.axes[0])).collect();
                gradient.record(d.as_slice(), &dq, || format!("edge {e}, {}", q.name));
            }
            for f in 0..self.mesh.num_faces() {
                let (frame, pts) = (&g.face_frames[f], &g.face_rules[f].points);
                let t = tabulate_scalar(frame, k + 1, pts).components[0].clone() * ddr.faces[f].trace.apply(&x);
                trace.record(t.as_slice(), &exact(pts), || format!("face {f}, {}", q.name));
                let n = self.orientation.faces[f].normal;
                let coeffs = column(&ddr.faces[f].gradient.apply(&x));
                let tab = tabulate_coeffs(frame, true, k, &coeffs, pts);
                for c in 0..3 {
                    let dq: Vec<f64> = pts
                        .iter()
                        .map(|p| {
                            let g = q.gradient(p);
                            (g - n * g.dot(&n))[c]
                        })
                        .collect();
                    gradient.record(tab.components[c].as_slice(), &dq, || format!("face {f}, {}", q.name));
                }
            }
            for t in 0..self.mesh.num_elements() {
                let (frame, pts) = (&g.element_frames[t], &g.element_rules[t].points);
                let coeffs = column(&ddr.elements[t].gradient.apply(&x));
                let tab = tabulate_coeffs(frame, true, k, &coeffs, pts);
                for c in 0..3 {
                    let dq: Vec<f64> = pts.iter().map(|p| q.gradient(p)[c]).collect();
                    gradient.record(tab.components[c].as_slice(), &dq, || format!("element {t}, {}", q.name));
                }
            }
        }
        Ok(vec![
            trace.result("consistency/trace", TOL_SOLVED),
            gradient.result("consistency/gradient", TOL_SOLVED),
        ])
    }

    /// Lifts the cellular generators of `H^1` and `H^2` and certifies them.
    pub fn check_generators(&self, opts: &RankOptions) -> (Vec<CheckResult>, Vec<LiftedGenerators>) {
        let betti = self.cw.betti_numbers().0;
        let mut out = Vec::new();
        let mut lifted = Vec::new();
        for i in [1, 2] {
            let name = format!("generators/H{i}");
            match lift_generators(&self.cw, &self.scaling, &self.lift, &self.d_high, self.k, i, opts) {
                Ok(l) => {
                    let count = l.vectors.len();
                    out.push(
                        CheckResult::new(format!("{name}/count"), count.abs_diff(betti[i]) as f64, 0.0)
                            .with_detail(format!("{count} generators (expected {})", betti[i])),
                    );
                    let c = &l.certificate;
                    let warning = (c.min_gap < AMBIGUOUS_GAP).then(|| format!("ambiguous rank decision: spectral gap {:.3e}", c.min_gap));
                    out.push(
                        CheckResult::new(format!("{name}/certificate"), c.kernel_residual, LIFT_TOL)
                            .with_detail(format!("rank [image | generators] = {} = {} + {count}", c.stacked_rank, c.image_rank))
                            .with_warning(warning),
                    );
                    lifted.push(l);
                }
                Err(Error::Certification(msg)) => {
                    out.push(CheckResult::new(format!("{name}/certificate"), f64::INFINITY, LIFT_TOL).with_detail(msg));
                }
                Err(e) => out.push(CheckResult::errored(name, &e)),
            }
        }
        (out, lifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_kernel_annihilates() {
        let r = DMatrix::from_row_slice(2, 5, &[1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, -1.0, 3.0]);
        let z = reduction_kernel(&r);
        assert_eq!(z.ncols(), 3);
        assert!(max_abs(&(&r * &z)) < 1e-15);
        assert_eq!(numeric_rank(&z, &RankOptions::default()).rank, 3);
    }

    #[test]
    fn polynomial_gradient_oracle() {
        let q = Poly {
            name: "x^2 y".into(),
            terms: vec![(1.0, [2, 1, 0])],
        };
        let p = Point::new(2.0, 3.0, 5.0);
        assert_eq!(q.value(&p), 12.0);
        assert_eq!(q.gradient(&p), Point::new(12.0, 4.0, 0.0));
        assert_eq!(monomials(2).len(), 10);
    }

    #[test]
    fn relative_difference() {
        let a = DMatrix::from_element(2, 2, 2.0);
        let b = DMatrix::from_element(2, 2, 1.0);
        assert_eq!(rel_diff(&a, &b), 0.5);
        assert_eq!(rel_diff(&DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1)), 0.0);
    }
}
