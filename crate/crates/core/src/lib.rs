//! Distributed global optimization of a sum of smooth, possibly nonconvex,
//! local objectives by consensus + annealing dynamics.
//!
//! Each agent `n` holds a private objective `U_n` and runs
//!
//! ```text
//! x_n(t+1) = x_n(t) - beta_t * sum_{l in nbrs(n)} (x_n(t) - x_l(t))
//!                   - alpha_t * (grad U_n(x_n(t)) + xi_n(t))
//!                   + gamma_t * w_n(t)
//! ```
//!
//! over a fixed undirected connected graph, with `alpha_t = c_alpha / t`,
//! `beta_t = c_beta / t^tau_beta` and `gamma_t = c_gamma / (sqrt(t) sqrt(log log t))`.
//!
//! Modules:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | communication graphs, Laplacian, spectrum, consensus term |
//! | [`problem`] | local objectives, the sum objective, assumption validators |
//! | [`schedule`] | the decaying weight sequences and their parameter gates |
//! | [`engine`] | synchronous driver and message-passing agent runtime |
//! | [`analysis`] | consensus/growth diagnostics, Gibbs reference, estimators |
//! | [`config`] | run configuration files |
//! | [`cli`] | experiment orchestration behind the `dgopt` binary |

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod problem;
pub mod schedule;

pub use error::{Error, Result};

/// Version tag written into every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;
