//! Evolutionary induction of axis-parallel decision trees and tree ensembles.
//!
//! A decision tree of fixed depth is encoded as a flat real vector
//! ([`tree::decode`]), which lets generic real-valued optimizers
//! ([`evolution`]) search over whole trees. On top of that sit bagged,
//! boosted and jointly-evolved ensembles ([`ensemble`]), greedy Gini
//! baselines ([`baseline`]) and a cross-validation harness ([`bench`]).

pub mod baseline;
pub mod bench;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evolution;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
