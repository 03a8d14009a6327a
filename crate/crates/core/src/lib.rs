//! Classification of the stock price in correlated one-factor stochastic
//! volatility models.
//!
//! The variance process `dY = μ(Y)dt + σ(Y)dW` lives on an open interval
//! `(ℓ, r)` and the price is the stochastic exponential
//! `Z = exp(∫b(Y)dW¹ − ½∫b²(Y)du)` with `W¹ = ρW + √(1−ρ²)W²`.
//! Whether `Z` is a true martingale, a uniformly integrable one, and whether it
//! stays positive is read off from the finiteness of the scale function and two
//! test functions at the boundaries of `(ℓ, r)`, under the original measure and
//! under the auxiliary measure that adds `ρbσ` to the drift.
//!
//! [`scale`] computes those boundary quantities numerically, [`classify`] turns
//! them into verdicts, [`analytic`] holds closed-form rules for the four
//! canonical models and [`mc`] checks the answers by simulation.

pub mod analytic;
pub mod classify;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod mc;
pub mod model;
pub mod quad;
pub mod report;
pub mod scale;
pub mod tables;

pub use analytic::{analytic_profile, analytic_verdicts, CanonicalParams, SzSupport};
pub use classify::{
    absorbed_zero, feller_exit, full_report, martingale, phi_capped, phi_perpetual,
    positivity_finite, positivity_infinite, ui_martingale, ExitBehavior, ExitCase,
    MartingaleReport, PhiVerdict, Tri,
};
pub use error::{Error, Result};
pub use mc::{estimate_exit, estimate_ez, estimate_phi, simulate_paths, McConfig, McEstimate, Scheme};
pub use model::{builtin, check_conditions, tilde, ConditionReport, DiffusionSpec, Measure};
pub use quad::{classify_improper, integrate, Boundary, Finiteness, ProbePolicy};
pub use scale::{
    boundary_profile, scale_density, scale_function, test_functions, BoundaryProfile,
    ProfilePolicy,
};
