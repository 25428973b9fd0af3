//! Exact convex duality for integral functionals of paths of bounded
//! variation, deterministic and on finite scenario trees.
//!
//! The crate is organised bottom-up:
//!
//! - [`convex`]: one-dimensional piecewise linear-quadratic convex functions
//!   with exact conjugates, recession functions and subdifferentials.
//! - [`time_grid`]: deterministic paths on a time grid, reference measures,
//!   measures with singular atoms and the deterministic conjugate formula.
//! - [`tree`]: finite filtered probability spaces, adapted and raw processes,
//!   stopping times, projections and the R¹ / M^∞ pairing.
//! - [`quasimartingale`]: mean variation, the martingale plus predictable
//!   decomposition and integration by parts.
//! - [`duality`]: Bolza-type functionals on scenario trees, their conjugates,
//!   subdifferentials, recession functions and special cases.
//! - [`oracle`] and [`interchange`]: independent numerical solvers used to
//!   certify the closed-form results.
//! - [`gen`]: seeded random generators for property suites.

pub mod convex;
pub mod duality;
pub mod error;
pub mod gen;
pub mod interchange;
pub mod oracle;
pub mod quasimartingale;
pub mod time_grid;
pub mod tree;

pub use convex::{Interval, Plq, Quad, SeparableFn, SubdiffSet};
pub use duality::{BolzaInstance, DualCandidate};

pub use error::{Error, Result};
pub use time_grid::{BVPath, CellWeight, DualFunction, GridMeasure, RefMeasure, TimeGrid};
pub use tree::{AdaptedPath, AdaptedProcess, RawProcess, ScenarioTree};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/convex.md")]
    mod convex {}
    #[doc = include_str!("../../../book/src/paths.md")]
    mod paths {}
    #[doc = include_str!("../../../book/src/trees.md")]
    mod trees {}
    #[doc = include_str!("../../../book/src/quasimartingales.md")]
    mod quasimartingales {}
    #[doc = include_str!("../../../book/src/duality.md")]
    mod duality {}
    #[doc = include_str!("../../../book/src/certification.md")]
    mod certification {}
    #[doc = include_str!("../../../book/src/schema.md")]
    mod schema {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
