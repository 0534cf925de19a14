//! Exact word metric toolkit for the Diestel-Leader groups `Gamma_d(q)`.
//!
//! Group elements are affine matrices `(prod (t+l_i)^{k_i}, P)` with `P` in
//! `(Z/qZ)[t, (t+l_i)^-1]`. Each element is a vertex of the Diestel-Leader
//! graph `DL_d(q)`; its word length with respect to the standard generating
//! set depends only on its projection to the `d` trees, and is computed by a
//! min-max formula over permutations of the trees. A brute force BFS oracle
//! cross-checks the formula.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod group;
pub mod metric;
pub mod oracle;
pub mod ring;
pub mod witness;

pub use error::{DlError, Result};
pub use geometry::{EdgeType, Heights, Projection};
pub use group::{Generator, Group, GroupElem, Word};
pub use metric::{wordlength, FormulaBreakdown, Permutation};
pub use ring::{Poly, RationalForm, Residue, RingParams, Valuation};
