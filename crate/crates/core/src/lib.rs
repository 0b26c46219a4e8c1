//! Combinatorial loop-energy model for RNA secondary structures.
//!
//! The crate counts structures weighted by `p^{arcs} * v^{G}`, locates the
//! singularities of the resulting generating functions, classifies parameter
//! sets into the subcritical / critical / supercritical regimes of the
//! irreducible-block count, samples structures exactly, and folds sequences
//! with and without candidate-list sparsification.

pub mod energy;
pub mod error;
pub mod exec;
pub mod folding;
pub mod sampler;
pub mod scaled;
pub mod series;
pub mod singularity;
pub mod stats;
pub mod structures;

pub use energy::{EnergyParams, Loop, ParamName};
pub use error::{AnalysisError, ModelError, SingularityError, StructureError};
pub use exec::Execution;
pub use scaled::{ScaledDouble, ScaledReal, Weight};
pub use structures::{Arc, SecondaryStructure};
