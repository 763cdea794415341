//! Entropic matrix-scaling optimal-transport solvers for pseudo-label
//! generation, built around a progressive partial formulation (P2OT).
//!
//! The crate is organised as a small numerical substrate plus the concrete
//! formulations on top of it:
//!
//! - [`transport`] — problem representation (cost matrices, marginals,
//!   transport plans), the Gibbs kernel, and the generic proximal-scaling
//!   loop shared by every solver.
//! - [`solvers`] — the six formulations: balanced OT, unbalanced OT (KL
//!   column penalty), partial OT, SLA (upper-bounded columns), P2OT via a
//!   virtual-cluster reformulation, and the generalized scaling baseline.
//! - [`schedule`] — the ramp policies driving the selected-mass fraction
//!   `rho` over training.
//! - [`oracle`] — independent brute-force reference solvers for desk-scale
//!   instances; used to validate the fast paths.
//! - [`metrics`] — Hungarian-matched clustering accuracy, NMI, macro F1,
//!   and head/medium/tail breakdowns.
//! - [`sim`] — a synthetic imbalanced-clustering harness: Gaussian blobs
//!   with a geometric size profile, a linear softmax probe trained on
//!   solver pseudo-labels, and a prediction memory buffer.
//!
//! Everything here is pure computation over `f64` buffers: no IO, no
//! global state, and deterministic given identical inputs. The crate is
//! `no_std`-compatible (`alloc` required); disable default features and
//! enable `libm` for builds without `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("p2ot-core needs either the `std` or the `libm` feature for float math");

pub mod error;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod schedule;
pub mod sim;
pub mod solvers;
pub mod transport;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use schedule::{RampKind, RampSchedule};
pub use solvers::{Formulation, SolverConfig};
pub use transport::{
    ConvergenceReport, CostMatrix, Kernel, MarginalSpec, PredictionMatrix, TransportPlan,
};
