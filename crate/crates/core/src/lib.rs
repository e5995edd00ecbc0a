//! Second-order dynamics on the tangent bundle of a pseudo-Riemannian chart.
//!
//! A mechanical system is a chart with a metric and a work form. The
//! crate resolves the system's equation of motion into an explicit
//! acceleration, integrates it, classifies the system, and checks
//! field-level identities (intermediate integrals, Hamilton–Jacobi,
//! Schrödinger and Klein–Gordon residuals) at sample points.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod exprlang;
pub mod geometry;
pub mod mechanics;
pub mod sampling;

pub use exprlang::{Expr, Jet2};
