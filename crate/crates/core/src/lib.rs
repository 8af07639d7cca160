//! Finite-blocklength bounds for identification over discrete memoryless
//! channels: exact hypothesis testing, partial resolvability, minimax
//! converses and second-order analysis.
//!
//! All logarithms are natural; every quantity is in nats.

pub mod channel;
pub mod checks;
pub mod error;
pub mod extreal;
pub mod idcode;
pub mod io;
pub mod minimax;
pub mod oracles;
pub mod resolvability;
pub mod rng;
pub mod second_order;
pub mod selftest;
pub mod testing;

pub use channel::{Channel, Distribution, JointDistribution, MType, Masses, SubDistribution};
pub use error::{Error, Result};
