//! Benchmark toolkit for constrained discrete generative modeling.
//!
//! Builds validity-constrained bitstring tasks, trains two reference models
//! (an MPS Born machine and a small feed-forward GAN), and evaluates any
//! sample-producing model with pre-generalization, validity-based, and
//! quality-based generalization metrics, including reference baselines,
//! trend sweeps, and training-pitfall diagnosis.

pub mod bitcore;
pub mod error;
pub mod gan;
pub mod harness;
pub mod metrics;
pub mod tasks;
pub mod tnbm;
pub mod util;

pub use bitcore::{Bitstring, SampleMultiset};
pub use error::{Error, Result};
pub use tasks::{SolutionSpace, SpaceKind, TrainingSet};
