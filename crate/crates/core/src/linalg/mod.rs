//! Internal numerical kernels: double-double scalars and dense solves.

pub mod dd;
pub mod lu;

pub use dd::Dd;
pub use lu::{kernel_basis, DdMatrix, FactorError, LuFactors};
