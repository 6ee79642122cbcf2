//! Consecutive collision orbits of the planar circular restricted three-body
//! problem.
//!
//! The Moser-regularized flow is integrated through collisions with the
//! primary `O`. Chords from collision to collision are then found by symmetric
//! shooting from the axis of the primaries. Each chord comes with its Reeb
//! period and Liouville action, and the level set can be checked for fiberwise
//! star-shapedness.
//!
//! ```
//! use reebchord::dynamics::{lagrange_points, SystemParams};
//!
//! let config = lagrange_points(&SystemParams::new(0.5)?)?;
//! assert!((config.first_critical_value + 2.0).abs() < 1e-12);
//! # Ok::<(), reebchord::Error>(())
//! ```
//!
//! Module map:
//!
//! * [`dynamics`]: Hamiltonian, effective potential, Lagrange points;
//! * [`regularization`]: charts, `Kc` and its vector field;
//! * [`integrator`]: adaptive Dormand–Prince with dense output and events;
//! * [`shooting`]: axis shots, miss functions, chord refinement;
//! * [`search`]: the full scan over branches and sides;
//! * [`diagnostics`]: action, star-shapedness, the catalog.

// `!(x < tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod regularization;
pub mod roots;
pub mod search;
pub mod shooting;

pub use error::{Error, Result};

/// The book's chapters, compiled as doc-tests so its snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rotating-frame.md")]
    mod rotating_frame {}
    #[doc = include_str!("../../../book/src/regularization.md")]
    mod regularization {}
    #[doc = include_str!("../../../book/src/integration.md")]
    mod integration {}
    #[doc = include_str!("../../../book/src/shooting.md")]
    mod shooting {}
    #[doc = include_str!("../../../book/src/action.md")]
    mod action {}
    #[doc = include_str!("../../../book/src/starshape.md")]
    mod starshape {}
    #[doc = include_str!("../../../book/src/catalog.md")]
    mod catalog {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
