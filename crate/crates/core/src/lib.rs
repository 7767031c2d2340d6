//! Finite ultrametric spaces, ball algebra, order-theoretic maximal
//! elements and fixed points with checkable certificates.

#![allow(clippy::result_large_err)]

pub mod dist;
pub mod cli;
pub mod fixpoint;
pub mod io;
pub mod order;
pub mod spaces;
pub mod ultra;
pub mod variational;

pub use dist::Dist;
pub use ultra::{ClosedBall, DistMatrix, FiniteUltraSpace};
