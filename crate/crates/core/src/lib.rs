//! Phase retrieval with swept approximate message passing (prSAMP).
//!
//! Recovers a complex signal `x` from magnitudes `y = |Hx + w|` of its noisy
//! linear projections. The solver is an AMP loop whose input coordinates are
//! updated sequentially in random order, which keeps the iteration stable on
//! ill-conditioned projection matrices such as binary 0/1 DMD patterns. Two
//! problem families are covered out of the box:
//!
//! * calibration: dense complex `x`, binary 0/1 matrix;
//! * recovery: binary 0/1 `x`, complex Gaussian matrix.
//!
//! Modules:
//! * [`model`] — signals, matrices, problem instances, solver configuration;
//! * [`channels`] — input priors (denoisers) and output channels (g, dg);
//! * [`solver`] — the swept AMP engine with damping and restarts;
//! * [`synth`] — synthetic-problem generators and recovery metrics;
//! * [`bench`] — phase-transition grids, noise sweeps, CSV emission;
//! * [`oracles`] — brute-force posteriors used to validate closed forms;
//! * [`io`] — portable text formats for signals, matrices and configs;
//! * [`selftest`] — installation self-check wired to the `prsamp` CLI.

pub mod bench;
pub mod channels;
mod error;
pub mod io;
pub mod model;
pub mod oracles;
pub mod selftest;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use num_complex::Complex64;
