//! Transferability estimation: feature-based scores, the label-free
//! weight-drift score, and a harness that measures how well any score ranks
//! a model hub against fine-tuned ground truth.

pub mod drift;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod tensor_io;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
