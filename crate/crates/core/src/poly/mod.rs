//! Polynomial spaces on mesh entities: scaled monomials, exact differential
//! operators, subspace decompositions, quadrature and projections.

pub mod basis;
pub mod monomial;
pub mod project;
pub mod quadrature;
pub mod rational;

pub use basis::{build_subspace_basis, physical_differential, space_dim, tabulate, tabulate_coeffs, Frame, SubspaceBasis, SubspaceKind, Tabulation};
pub use monomial::{apply_differential, differential_matrix, Differential, MonomialSet};
pub use quadrature::QuadratureRule;
