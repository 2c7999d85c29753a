//! Discrete de Rham spaces and operators of arbitrary degree.

pub mod global;
pub mod layout;
pub mod local;

pub use global::{csr_to_dense, ddr0_closed_forms, dense_to_csr, quadrature_degree, Ddr, GlobalOperator};
pub use layout::{Component, DofLayout, Space};
pub use local::{EdgeOps, ElementOps, FaceOps, Geometry, LocalOp};
