//! Allocation-only core of a DABNet inference engine.
//!
//! Everything here is pure computation over [`Tensor`] values: the
//! convolution/normalization kernels in [`ops`], the slow reference
//! implementations in [`oracle`], the network graph in [`net`], static cost
//! analysis in [`analysis`], and segmentation metrics in [`metrics`].
//! File formats, timing and the command line live in the `dabnet` crate.
//!
//! The crate is `no_std` unless the `std` feature is enabled. The `parallel`
//! feature partitions kernel work across a rayon thread pool; results are
//! identical with and without it.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
mod error;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod oracle;
mod par;
mod rng;
pub mod selfcheck;
mod tensor;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Shape, Tensor};
