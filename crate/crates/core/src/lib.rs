//! Special Lagrangian submanifolds of C^m built by evolving quadrics
//! under a first-order flow of linear or affine maps.
//!
//! The crate is organised by topic:
//!
//! - [`multilinear`]: dense multivectors, wedge products and contractions
//! - [`evodata`]: evolution data `(P, chi)`, classification and symmetries
//! - [`evolver`]: the general flow of linear/affine maps
//! - [`centred`]: evolving centred quadrics, phase advances, periodic orbits
//! - [`elliptic`]: Jacobi elliptic functions
//! - [`threefold`]: the three-dimensional case and conformal cone links
//! - [`affine`]: evolving non-centred quadrics (paraboloids)
//! - [`meshverify`]: meshes, exports and special Lagrangian residuals

pub mod affine;
pub mod centred;
pub mod elliptic;
pub mod error;
pub mod evodata;
pub mod evolver;
pub mod linalg;
pub mod meshverify;
pub mod multilinear;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod threefold;

pub use error::{Result, SlError};
pub use num_complex::Complex64;

/// Library version embedded in exported documents.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
