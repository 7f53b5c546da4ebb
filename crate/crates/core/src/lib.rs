//! Variational solver for multi-periodic solutions of the Poisson-gradient
//! system `Δu = ∇F(t, u)` on the period box `[0,T¹] × … × [0,Tᵖ]`.
//!
//! Solutions are found by minimizing the action
//! `φ(u) = ∫ ½|∂u/∂t|² + F(t, u) dt` over discrete multi-periodic fields,
//! and solvability is decided up front by checking whether the mean
//! potential `G(x) = ∫ F(t, x) dt` has a stationary point and grows without
//! bound along every ray.
//!
//! The modules map onto the pipeline:
//!
//! - [`grid`]: the periodic grid, fields and quadrature.
//! - [`potential`]: the potential trait and the built-in catalog.
//! - [`operators`]: Laplacian, partials, action, residuals.
//! - [`minimizer`]: descent methods and Newton polishing.
//! - [`certificate`]: the stationary-mean / coercivity verdict.
//! - [`oracle`]: dense reference solves and finite-difference gradients.
//! - [`runner`]: JSON-configured batch runs, reports and field dumps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod error;
mod fourier;
pub mod grid;
mod linesearch;
pub mod minimizer;
pub mod operators;
pub mod oracle;
pub mod potential;
pub mod runner;

pub use error::{Error, Result};
pub use grid::{Field, MultiIndex, TorusGrid};
pub use operators::{ActionReport, DiffOperator, GradientField, Scheme};
pub use potential::{
    CatalogPotential, Convexity, FnPotential, Potential, PotentialSpec, TrigSeries,
};
