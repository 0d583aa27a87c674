//! Monte Carlo and quadrature verification of Mecke–Palm type identities for
//! Poisson point processes, their moment formulas, and Lévy-system identities
//! for compound Poisson paths.

pub mod configurations;
pub mod error;
pub mod levy_systems;
pub mod mc_stats;
pub mod moment_engine;
pub mod palm_engine;
pub mod partitions;
pub mod report;
pub mod series_oracle;
pub mod settings;
pub mod space_measure;

pub use error::{Error, Result};
pub use mc_stats::{Estimate, Gate, GateOutcome, StreamFamily, StreamKey};
pub use space_measure::{DensityCatalog, IntensitySpec, Point, QuadratureScheme, QuadratureSpec, Window};
pub use configurations::{Configuration, EpsilonVector, ProcessCatalog, ProcessSpec};
pub use partitions::{LabeledIndex, Partition};
pub use report::{Comparison, NamedEstimate, TermEstimate, VerificationReport};
pub use settings::{Budgets, LevyRules, RhsMode, StreamPolicy};
pub use levy_systems::{ExitLawSpec, JumpCatalog, JumpForm, JumpFunctional, LevyMeasureSpec, PathRecord, TimeFactor};
