//! Admissibility analysis and numerical solution of stationary dispersive
//! equations of order 2l+1 on a bounded interval,
//!
//! `lambda u + sum_{j=1}^{l} (-1)^{j+1} D^{2j+1} u = f(x),  x in (0, L)`,
//!
//! under general linear boundary conditions (l conditions at x = 0, l+1 at
//! x = L). The crate provides:
//!
//! - [`model`]: problem specs, the three boundary-coefficient
//!   representations, validation, and reduction of raw linear forms;
//! - [`admissibility`]: the sufficient-condition margins A_i, B_i, the
//!   boundary quadratic form, and the cross-term inequality;
//! - [`polycalc`]: exact polynomial calculus and the integration-by-parts
//!   identity checks;
//! - [`discretize`]: uniform-grid finite-difference collocation with
//!   Fornberg stencils and a compensated dense LU solve;
//! - [`verify`]: manufactured solutions, convergence studies, and the
//!   empirical a priori estimate checks.

pub mod admissibility;
pub mod discretize;
pub mod linalg;
pub mod model;
pub mod polycalc;
pub mod verify;

pub use admissibility::{AdmissibilityReport, BoundaryJet, FormulaFamily};
pub use discretize::{Grid, GridSolution, LinearSystem};
pub use model::{BoundaryCoefficients, ForcingSpec, ProblemSpec, Violation};
pub use polycalc::Polynomial;
