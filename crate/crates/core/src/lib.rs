//! Counterfactual explanations for process outcome predictions.
//!
//! The crate is organised around the pipeline it supports:
//!
//! * [`event_log`] parses, preprocesses and one-hot encodes labelled event logs.
//! * [`declare`] evaluates, mines and softly relaxes Declare constraints.
//! * [`neural`] is a small reverse-mode autodiff substrate with the recurrent
//!   VAE and the recurrent outcome classifier built on top of it.
//! * [`counterfactual`] runs the latent-space gradient search (REVISED⁺ and
//!   its REVISE⁺ ablation).
//! * [`metrics`] scores the generated counterfactuals and renders reports.
//! * [`synth`] produces the small synthetic log used by tests and demos.

pub mod counterfactual;
pub mod declare;
pub mod error;
pub mod event_log;
pub mod metrics;
pub mod neural;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Matrix;
