//! Forecasting pipeline for sparse event-count panels.
//!
//! A panel holds one monthly count series per district plus any number of
//! exogenous investment series. The pipeline:
//!
//! 1. [`grouping`] splits districts by their all-time average count into a
//!    silent group (A), a sparse group (B) and an active group (C).
//! 2. [`decomposition`] builds the month-by-month group mean (MMANE) and
//!    decomposes it with classical additive/multiplicative methods or STL.
//! 3. [`screening`] ranks single lagged investment variables by how well they
//!    explain the additive residual.
//! 4. [`features`] assembles leakage-free feature matrices (variants V1..V5).
//! 5. [`models`] fits linear regression, random forest and gradient boosting,
//!    plus the always-zero baseline.
//! 6. [`evaluation`] runs the expanding-window task grid and [`report`] writes
//!    the result tables and plot data.
//!
//! Data-parallel loops (grid cells, forest trees, lag fits) go through
//! [`Execution`]; building without the `parallel` feature makes every
//! execution sequential.

pub mod decomposition;
pub mod error;
pub mod evaluation;
mod exec;
pub mod features;
pub mod grouping;
pub mod linalg;
pub mod loess;
pub mod models;
pub mod panel;
pub mod report;
pub mod screening;
pub mod seed;

pub use error::{Error, Result};
pub use exec::Execution;
