//! Mekler groups over graphs: normal-form arithmetic, element
//! classification, transversals, interpretation back into graphs, encoding
//! of relational structures, and shattering searches.

pub mod error;
pub mod fp_linalg;
pub mod graph;
pub mod group;
pub mod classify;
pub mod transversal;
pub mod interpret;
pub mod encode;
pub mod shatter;

pub use error::{Error, Result};
pub use fp_linalg::{FpSubspace, FpVector};
pub use graph::Graph;
pub use group::{GroupElement, MeklerGroup, SubgroupDescription};
