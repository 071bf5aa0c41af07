//! Deformation theory of representations of finite groups over finite local
//! coefficient rings, at fully enumerable scale.
//!
//! The crate works with finite commutative local ℤ/pᴺ-algebras given by
//! structure constants, Cayley-table groups, and matrix representations
//! stored as full image tables. On top of that it computes lift sets and
//! their orbit spaces under the congruence subgroup 1 + m·Mₙ(A), tangent and
//! obstruction spaces via inhomogeneous group cohomology, fiber-product
//! gluing, inverse-limit compatibility, and universal character deformation
//! data. Everything is exact; size caps turn infeasible requests into hard
//! errors instead of silent truncation.

pub mod error;
pub mod zmod;

pub use error::{Error, Result};

/// Global size caps. One configuration value per resource; exceeding a cap
/// is always a hard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// max ring cardinality (default 5⁶)
    pub ring_elems: u128,
    /// max group order
    pub group_order: usize,
    /// max matrix dimension n
    pub dim: usize,
    /// max |1 + m·Mₙ(A)| for orbit computations
    pub congruence_group: u128,
    /// max candidate tuples in one exhaustive lift enumeration
    pub lift_candidates: u128,
    /// max coordinates |G|²·n² for 2-cochain spaces
    pub cochain_coords: u128,
    /// worker threads for parallel enumeration
    pub workers: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            ring_elems: 15_625, // 5^6
            group_order: 200,
            dim: 4,
            congruence_group: 1_000_000,
            lift_candidates: 20_000_000,
            cochain_coords: 4_000_000,
            workers: 1,
        }
    }
}

impl Caps {
    pub fn with_ring_cap(mut self, cap: u128) -> Self {
        self.ring_elems = cap;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub(crate) fn check(&self, what: &'static str, needed: u128, cap: u128) -> Result<()> {
        if needed > cap {
            Err(Error::CapExceeded { what, needed, cap })
        } else {
            Ok(())
        }
    }
}

pub mod ring;
pub mod group;
pub mod matrix;
pub mod rep;
pub mod cohomology;
pub mod fp;
pub mod deform;
pub mod fixtures;
