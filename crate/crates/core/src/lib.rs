//! Stochastic control of Hermitian multimatrix systems.
//!
//! This crate simulates controlled diffusions of `d`-tuples of `n x n`
//! Hermitian matrices driven by a shared scalar ("common") Brownian motion
//! and independent GUE matrix Brownian motions, and provides the calculus
//! needed to verify the Hamilton-Jacobi-Bellman structure of the associated
//! value functions at finite matrix size:
//!
//! * [`ncpoly`] — non-commutative polynomial algebra, free difference
//!   quotient, cyclic derivative, and a semicircular moment oracle;
//! * [`randmat`] — Hermitian matrix tuples, GUE sampling, spectral
//!   measures, and the one-dimensional quantile Wasserstein distance;
//! * [`freecalc`] — cylindrical test functions and their gradient, Hessian,
//!   common-noise Laplacian and free-noise Laplacian;
//! * [`sde`] — Euler-Maruyama simulation of the controlled dynamics with
//!   seeded, reproducible noise streams, plus the `d = 1` Dyson eigenvalue
//!   particle system;
//! * [`control`] — the linear-quadratic Riccati solution, the Eikonal value
//!   formula, and the Hopf-Lax minimization over conjugation flows;
//! * [`hjb`] — HJB residual evaluation, the Monte Carlo Ito-formula
//!   identity check, and dynamic-programming inequality checks;
//! * [`verify`] — the acceptance battery wired into both `cargo test` and
//!   the CLI `check` subcommand.

// Force linkage of the system BLAS used by ndarray's matrix products.
use blas_src as _;

pub mod control;
pub mod error;
pub mod freecalc;
pub mod hjb;
pub mod linalg;
pub mod ncpoly;
pub mod randmat;
pub mod sde;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::CMat;
