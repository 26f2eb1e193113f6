//! Multirate exponential Runge-Kutta (MERK) time integrators.
//!
//! This crate integrates split initial value problems
//!
//! ```text
//! u'(t) = L u(t) + N(t, u(t)),      u(t0) = u0,
//! ```
//!
//! where the linear operator `L` carries the fast time scale and the
//! nonlinear term `N` carries the slow one. A MERK method advances the
//! solution with a macro step `H` by evaluating `N` at a handful of stage
//! states and, between stages, integrating *modified fast problems*
//!
//! ```text
//! y'(tau) = L y(tau) + p(tau),      y(0) = u_n,
//! ```
//!
//! whose forcing polynomials `p` are built from differences of slow
//! tendencies. The fast problems are solved by any explicit Runge-Kutta
//! method with a micro step `h = H/m`, so no matrix functions are needed in
//! the production path.
//!
//! Module map:
//!
//! - [`problem`]: the split ODE abstraction, state vectors, call counters.
//! - [`phi`]: dense matrix exponential / phi-functions and exponential
//!   Runge-Kutta reference steppers, used as ground-truth oracles on small
//!   problems.
//! - [`tableau`] and [`erk`]: explicit Runge-Kutta tableaus and the
//!   fixed-step fast-IVP engine with exact landing on sample points.
//! - [`scheme`] and [`step`]: the MERK2/3/4/5 scheme tables and the
//!   multirate stepper itself.
//! - [`mis`]: the third-order multirate infinitesimal step baseline
//!   (MIS-KW3).
//! - [`problems`]: the four benchmark problems with reference solutions.
//! - [`study`]: convergence / efficiency / m-sweep studies and rate fitting.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature for embedded use. File output and the CLI live in the
//! companion `merk-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod erk;
pub mod error;
pub mod exprk;
pub(crate) mod fmath;
pub mod forcing;
pub mod mis;
pub mod phi;
pub mod problem;
pub mod problems;
pub mod rational;
pub mod scheme;
pub mod step;
pub mod study;
pub mod tableau;

pub use error::MerkError;
pub use problem::{CounterSnapshot, SplitOdeProblem, StateVector};
pub use rational::Frac;
