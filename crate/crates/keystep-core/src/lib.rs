//! Graph-based keystep recognition over segment-annotated long videos.
//!
//! The pipeline: a [`dataset::Manifest`] indexes takes, views, segments and
//! feature files; [`graph`] turns pooled segment features into sparse typed
//! graphs (one node per keystep segment per view, plus optional text nodes);
//! [`model`] is a relational message-passing node classifier running on the
//! [`autodiff`] tape engine; [`train`] runs five-fold cross-validation with
//! a seeded Adam optimizer; [`metrics`] scores top-1 accuracy and F1@0.1;
//! [`synth`] generates controllable synthetic datasets so the context,
//! multi-view and multimodal effects can be measured at desk scale.
//!
//! Training observes the asymmetric protocol: every vision node of every
//! view contributes to the loss, but evaluation is always over egocentric
//! nodes only, on graphs rebuilt without exocentric views.
//!
//! Compiled with the `parallel` feature (default), take-level work and
//! cross-validation folds run on rayon worker threads; results are
//! identical to the sequential build because every unit of work owns a
//! seed-derived RNG stream and outputs are aggregated in input order.

pub mod autodiff;
pub mod dataset;
pub mod exec;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synth;
pub mod train;

pub use dataset::{load_features, load_manifest, write_features, FeatureTable, Manifest};
pub use graph::{ContextMode, Graph, Variant};
pub use metrics::MetricsReport;
pub use model::{ModelConfig, ModelParams};
pub use train::TrainConfig;
