//! Symbolic/numeric engine for the geometry of higher-order tangent bundles
//! in local coordinates: semisprays derived from order-k Lagrangians, the
//! Miron, Bucataru, and Cartan nonlinear connections, the semispray
//! iteration, k-path and autoparallel integration, and numeric verification
//! of the transformation laws.

pub mod calculus;
pub mod connections;
pub mod context;
pub mod error;
pub mod expr;
pub mod integrate;
pub mod lagrange;
pub mod parse;
pub mod phase;
pub mod problem;
pub mod report;
pub mod sample;
pub mod semispray;
pub mod verify;

pub use context::{Context, CoordId};
pub use error::{Error, Result};
pub use expr::{Expr, UnaryFn};
pub use parse::parse_expr;
pub use phase::{PhasePoint, VectorField};
pub use report::{CheckReport, CheckStatus};
pub use semispray::KSemispray;
