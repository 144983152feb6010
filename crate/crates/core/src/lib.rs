//! Numerical laboratory for Bergman-space operator theory on the unit disk
//! and the unit ball of `C^n`: Bergman kernels and their weighted norms,
//! Kobayashi-ball geometry, r-lattices, theta-Carleson measures, Berezin
//! transforms and Toeplitz operators.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod lattice;
pub mod measures;
pub mod plot;
pub mod quadrature;
pub mod toeplitz;

pub use error::{LabError, Result};
pub use geometry::{DomainKind, KobayashiBall, ModelDomain, Point};
pub use quadrature::{integrate, IntegrationResult, NodeRef, QuadratureRule, RuleKind};
