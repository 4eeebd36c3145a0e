//! Fast-slow and slow bisimilarity for Bio-PEPA models with levels.
//!
//! The crate parses models, generates their capability transition systems,
//! decides fast-slow and slow bisimilarity, and classifies stoichiometric
//! variables into conserved, slow and fast ones.

pub mod catalog;
pub mod classification;
pub mod equivalence;
pub mod export;
pub mod linalg;
pub mod model;
pub mod parser;
pub mod scalar;
pub mod semantics;

pub use model::{
    ActionPartition, CompositionTree, Cooperation, EquivConfig, Level, Prefix, Role, SpeciesDef,
    SystemDef,
};
pub use semantics::{build_lts, CapabilityLabel, LabelEntry, Lts, State};

/// Exact scalar used by variable classification.
pub type Rational = num_rational::BigRational;
/// Matrix over exact rationals.
pub type RationalMatrix = linalg::Matrix<Rational>;
/// Matrix over `f64`, for exploratory use only.
pub type FloatMatrix = linalg::Matrix<f64>;
