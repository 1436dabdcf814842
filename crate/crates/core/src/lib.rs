// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blr;
pub mod deep;
pub mod error;
pub mod expfam;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod natgrad;
pub mod quadrature;
