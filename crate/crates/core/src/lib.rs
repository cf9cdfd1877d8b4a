//! Relevance estimation for examples with noisy labels.
//!
//! A class's clean examples and its noisy candidates form a graph of
//! reciprocal nearest neighbors. A two-layer graph convolutional network is
//! trained on that graph to tell clean from noisy, and its output on each noisy
//! example becomes a relevance weight in `[0, 1]`. Relevance-weighted class
//! prototypes then initialize (or fix) a cosine classifier.
//!
//! Start with [`pipeline::clean_dataset`] and [`classifier::compute_prototypes`];
//! the `examples/` directory walks through each stage.

pub mod classifier;
pub mod cleaners;
pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod numerics;
pub mod pipeline;
pub mod synth;

pub use error::{Error, FormatError, Result};
