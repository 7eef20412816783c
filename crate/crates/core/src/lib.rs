//! Spectral operator kit.
//!
//! Core Fourier/spectral numerics, periodic-extension methods, a
//! trainable Fourier Neural Operator with Tucker-factorized spectral
//! weights, and the benchmark data machinery behind the `sok` CLI.

pub mod data;
pub mod error;
pub mod extension;
pub mod fno;
pub mod grid;
pub mod math;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use tensor::{ComplexTensor, RealTensor};
