//! Graph-to-graph translation with adversarial training.
//!
//! This crate implements a conditional GAN over directed weighted graphs:
//! a translator network maps an input graph (plus noise) to a target graph
//! on the same node set, and a conditional discriminator judges
//! (target, input) pairs. The building blocks are directed edge-to-edge /
//! edge-to-node convolutions and their transposed (deconvolution)
//! counterparts, with hand-derived backpropagation throughout.
//!
//! Modules:
//! - [`graph`]: dense directed weighted graphs and scalar graph statistics
//! - [`synth`]: seeded synthetic input/target pair generators and datasets
//! - [`auth`]: authentication-log ingestion into per-user window graphs
//! - [`layers`]: the graph convolution/deconvolution layers with exact
//!   gradients and a finite-difference checker
//! - [`model`]: translator and conditional discriminator assembly,
//!   initialization, parameter flattening, and checkpoints
//! - [`train`]: adversarial training loop with ADAM
//! - [`metrics`]: distribution distances and graph-property MSE reports
//! - [`eval`]: direct and indirect (classifier-transfer) evaluation

pub mod auth;
pub mod error;
pub mod eval;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod train;

pub use error::{AuthError, EvalError, GraphError, MetricsError, ModelError, SynthError, TrainError};
pub use graph::{DegreeDistribution, DirectedGraph};
pub use synth::{Dataset, DatasetKind, GraphPair, Split};
