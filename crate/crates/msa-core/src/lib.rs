//! Finite-instance engine for many-sorted universal algebra.
//!
//! The crate works with explicitly tabulated finite structures: sorted sets
//! and sorted mappings, signatures and algebras with extensional operation
//! tables, directed preorders, filters and ultrafilters on finite index
//! sets, projective and inductive systems with their limits, reduced
//! products and ultraproducts, and the retraction of a limit algebra onto
//! itself through an ultraproduct, together with the naturality apparatus
//! that relates those constructions across a change of index.
//!
//! Everything is deterministic: carriers are kept in a canonical order,
//! computed structures derive their element names from their construction,
//! and searches break ties canonically.

// positional table code iterates raw indices throughout
#![allow(clippy::needless_range_loop)]

pub mod algebra;
pub mod dsl;
pub mod error;
pub mod filters;
pub mod generate;
pub mod naturality;
pub mod preorder;
pub mod report;
pub mod retraction;
pub mod search;
pub mod sorted;
pub mod systems;

pub use error::{Error, Result};
