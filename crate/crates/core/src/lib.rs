//! Numerical laboratory for Markovian stochastic quantum state evolution.
//!
//! The crate is organized around a dense complex linear-algebra substrate
//! ([`linops`]), Kraus families as completely positive trace-preserving maps
//! ([`semigroup`]), stochastic trajectory unraveling with Monte Carlo
//! ensemble estimation ([`unravel`]), a discrete 1+1D lattice spacetime with
//! causality checks ([`relnet`]), the Lorentz-invariant mass-shell measure
//! ([`massshell`]), and a finite-dimensional certification suite for the
//! purity-forces-determinism argument ([`nogo`]).
//!
//! All state is immutable after construction and all randomness flows from
//! explicit 64-bit seeds, so every computation in the crate is reproducible
//! bit for bit.

pub mod error;
pub mod linops;
pub mod massshell;
pub mod nogo;
pub mod relnet;
pub mod semigroup;
pub mod unravel;

pub use error::{Error, Result};
pub use linops::{ComplexMatrix, DensityOperator, StateVector, Tolerances, C64};
pub use semigroup::{ChannelReport, KrausBranch, KrausFamily};
pub use unravel::{SamplerConfig, TrajectoryRecord, TrajectoryStep};
