//! Gram matrices, checked local solves and L2-orthogonal projections.

use nalgebra::DMatrix;

use super::basis::Tabulation;
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};

/// Local systems whose 2-norm condition number exceeds this are rejected.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Condition number from singular values (`inf` when singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let s = a.singular_values();
    let max = s.max();
    let min = s.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the square system `a x = b`, rejecting ill-conditioned matrices.
pub fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    assert_eq!(a.nrows(), b.nrows(), "{what}: right-hand side has wrong height");
    if a.nrows() != a.ncols() {
        return Err(Error::Internal(format!(
            "{what}: pairing matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.is_empty() {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let cond = condition_number(a);
    if cond.is_nan() || cond > CONDITION_LIMIT {
        return Err(Error::Conditioning(format!(
            "{what}: condition number {cond:.3e} exceeds {CONDITION_LIMIT:e}"
        )));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Conditioning(format!("{what}: singular pairing matrix")))
}

pub fn gram(a: &Tabulation, b: &Tabulation, rule: &QuadratureRule) -> DMatrix<f64> {
    a.pair(b, &rule.weights)
}

/// Projection coefficients of the functions tabulated in `f` onto the span
/// of `basis` (one output column per function).
pub fn project(basis: &Tabulation, f: &Tabulation, rule: &QuadratureRule, what: &str) -> Result<DMatrix<f64>> {
    solve_checked(&gram(basis, basis, rule), &gram(basis, f, rule), what)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{builtin_pattern, OrientationTable};
    use crate::poly::basis::{build_subspace_basis, tabulate, tabulate_scalar, Frame, SubspaceKind};
    use crate::poly::quadrature::{edge_rule, element_rule};

    #[test]
    fn edge_mean_of_coordinate() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        // Edge 0 joins vertices 0 = (0,0,0) and 1 = (1,0,0).
        let rule = edge_rule(&mesh, 0, 4).unwrap();
        let frame = Frame::edge(&mesh, &o, 0);
        let p0 = tabulate_scalar(&frame, 0, &rule.points);
        let s = Tabulation {
            components: vec![DMatrix::from_iterator(
                rule.len(),
                1,
                rule.points.iter().map(|p| p.x),
            )],
        };
        let c = project(&p0, &s, &rule, "test").unwrap();
        assert!((c[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent_and_gram_is_spd() {
        let mesh = builtin_pattern("cube").unwrap().build_mesh(1.0).unwrap();
        let o = OrientationTable::compute(&mesh).unwrap();
        let frame = Frame::element(&o, 0);
        let rule = element_rule(&mesh, &o, 0, 6).unwrap();
        for kind in [SubspaceKind::P, SubspaceKind::R, SubspaceKind::Gc] {
            let b = build_subspace_basis(kind, 2, 3).unwrap();
            let t = tabulate(&frame, &b, &rule.points);
            let g = gram(&t, &t, &rule);
            assert!((&g - g.transpose()).amax() < 1e-15);
            let eig = g.clone().symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
            let c = project(&t, &t, &rule, "test").unwrap();
            let id = DMatrix::<f64>::identity(b.len(), b.len());
            assert!((c - id).amax() < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn singular_system_is_conditioning_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::zeros(2, 1);
        assert!(matches!(solve_checked(&a, &b, "x"), Err(Error::Conditioning(_))));
    }
}
