//! Tight cycle packings in dense uniform hypergraphs.
pub mod absorb;
pub mod assemble;
pub mod cover;
pub mod error;
pub mod fracmatch;
pub mod hgraph;
pub mod oracles;
pub mod profile;
pub mod scalar;
pub mod tight;
pub mod walker;

pub use error::{Error, Result};
pub use fracmatch::EdgeWeighting;
pub use hgraph::{regularity_report, Hypergraph, RegularityReport};
pub use scalar::{Scalar, Q};
pub use tight::{CycleFactor, FactorShape, KType, PathCollection, TightCycle, TightPath};
