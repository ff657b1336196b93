//! Data engineering and evaluation toolkit for piano hand-motion
//! benchmarks.
//!
//! The crate covers the full desk-scale pipeline around a piano-motion
//! dataset: Standard MIDI File parsing and validation, cleaning of raw
//! per-frame hand-pose annotations, a parametric hand skeleton with
//! forward kinematics, the five benchmark metrics (FID, per-hand FGD,
//! WGD, PD, and smoothness), the denoising-diffusion mathematics of the
//! position-guided gesture generator, and the on-disk dataset layout.
//!
//! All numeric code is generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the concrete aliases below pin the double-precision
//! instantiations used by the CLI and the file formats.

pub mod dataset;
pub mod diffusion;
pub mod eval;
pub mod hand;
pub mod linalg;
pub mod metrics;
pub mod midi;
pub mod motion;
pub mod pipeline;
pub mod real;

pub use real::Real;

/// Double-precision aliases for the flagship types.
pub type NoteEvent64 = midi::NoteEvent<f64>;
pub type HandPose64 = hand::HandPose<f64>;
pub type HandTemplate64 = hand::HandTemplate<f64>;
pub type MotionSequence64 = motion::MotionSequence<f64>;
pub type GaussianStats64 = metrics::GaussianStats<f64>;
pub type GmmModel64 = metrics::GmmModel<f64>;
pub type Embedder64 = metrics::Embedder<f64>;
pub type MetricReport64 = metrics::MetricReport<f64>;
pub type NoiseSchedule64 = diffusion::NoiseSchedule<f64>;
pub type ClipAnnotation64 = dataset::ClipAnnotation<f64>;

/// Single-precision aliases for memory-bound batch work.
pub type MotionSequence32 = motion::MotionSequence<f32>;
pub type NoiseSchedule32 = diffusion::NoiseSchedule<f32>;
