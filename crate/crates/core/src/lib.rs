//! Probabilities of sequences of measurement outcomes on finite-dimensional
//! quantum systems, from virtual-path amplitudes.

pub mod builtins;
pub mod engine;
pub mod error;
pub mod format;
pub mod linalg;
pub mod sampler;
pub mod scenario;
pub mod weak;

pub use engine::{EngineConfig, HistoryDistribution, HistoryEngine, OutcomeString, Strategy};
pub use error::{Diagnostic, Diagnostics, Error, Result};
pub use scenario::{Preparation, Scenario};
