//! Supernumbers, supermatrices, Lie superalgebras over a Grassmann algebra,
//! the flow form of the Baker-Campbell-Hausdorff series, superdifferentiability
//! checks, and charts on super Lie groups.

pub mod error;
pub mod expbch;
pub mod fixtures;
pub mod grassmann;
pub mod linear;
pub mod presets;
pub mod random;
pub mod superdiff;
pub mod supergroup;
pub mod superlie;
pub mod sweeps;
pub mod text;

pub use error::{AlgebraError, Result};
pub use expbch::{bch_flow, bch_rhs, bch_series_oracle, exp_matrix, log_matrix, FlowConfig, MatrixAlgebra};
pub use grassmann::{Field, GrassmannAlgebra, MultiIndex, Parity, Supernumber, Tolerance};
pub use linear::{right_action, GradedModule, SuperMatrix, SuperVector};
pub use presets::Preset;
pub use superlie::{super_bracket, AlgebraElement, StructureConstants, SuperLieAlgebra};
