//! Survey-response sentiment pipeline.
//!
//! Records flow through [`corpus`] (ingest, clean, split), [`translate`],
//! [`annotate`] (committee labels), and into a small attention [`encoder`]
//! trained by [`train`] and scored by [`eval`].
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which training and gradient checks use.

pub mod annotate;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod published;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod translate;

pub use scalar::Scalar;
pub use tensor::Matrix;

pub type Matrix64 = tensor::Matrix<f64>;
pub type Matrix32 = tensor::Matrix<f32>;
pub type Params = encoder::EncoderParams<f64>;
pub type Params32 = encoder::EncoderParams<f32>;
pub type Model = encoder::Checkpoint<f64>;
pub type Metrics = eval::ClassMetrics<f64>;
