//! Simulation and verification toolkit for Glauber dynamics on the
//! random-field Ising model over finite subdomains of `Z^d`.
//!
//! The crate is organized around a brute-force oracle for small systems
//! ([`exact`]) against which every stochastic component is validated:
//! continuous-time Glauber dynamics and monotone couplings ([`glauber`]),
//! boundary-influence decay estimators ([`mixing`]), the stochastic
//! localization tilt process ([`sloc`]), field-dependent coarse-graining
//! and block dynamics ([`blocks`]), and an incremental-domain sampler
//! with warm starts ([`sampler`]).

pub mod blocks;
pub mod error;
pub mod exact;
pub mod glauber;
pub mod lattice;
pub mod mixing;
pub mod rfim;
pub mod rng;
pub mod sampler;
pub mod sloc;
pub mod stats;

pub use error::{Error, Result};
