//! PCA-based PDE pricing of European and Bermudan basket put options under a
//! multivariate Black–Scholes model.
//!
//! The `d`-dimensional pricing PDE is never solved directly. After rotating
//! log-prices onto the eigenbasis of the covariance matrix and compressing
//! each axis onto `(0, 1)`, the option value is approximated by one
//! one-dimensional PDE (all eigenvalues except the largest set to zero) plus
//! `d - 1` two-dimensional PDEs, one per remaining principal direction:
//!
//! ```text
//! w~ = w1 + sum_{l=2..d} (w1l - w1)
//! ```
//!
//! Each low-dimensional problem is discretised with second-order finite
//! differences on a sinh-stretched mesh and advanced with Crank–Nicolson
//! (1D) or the Douglas ADI scheme (2D), with backward-Euler damping after
//! every nonsmooth event.
//!
//! The crate is `no_std` and needs only `alloc`. Timing, parallel execution,
//! file formats and the command line live in the `basket-pca-cli` crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod grid;
pub mod model;
pub mod pricer;
pub mod quadrature;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{build_mesh, fd_weights, pq_coefficients, FdWeights, Mesh1D, DEFAULT_KAPPA1};
pub use model::{
    build_covariance, classify_columns, reversed_schedule, spectral_decompose, BasketContract,
    ColumnClass, DenseMatrix, ExerciseSchedule, ExerciseStyle, MarketModel, SpectralModel,
};
pub use pricer::{PcaPricer, PricerConfig, PricingReport, Term};
pub use solver::{GridFunction, TridiagonalOperator};
pub use transform::{EvaluationPoint, PayoffField, Segment, Side};
