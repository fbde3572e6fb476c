//! Weather-station forecasting toolkit: raw-file ETL, preprocessing and
//! stationarity checks, a from-scratch stacked bidirectional-LSTM engine
//! with exact reverse-mode gradients, Adam training with early stopping,
//! great-circle station lookup, and rule-based agricultural advisories.
//!
//! The crate is organized as one module per pipeline stage; the commonly
//! used types are re-exported at the root.

pub mod advisor;
pub mod config;
pub mod geo;
pub mod ingest;
pub mod linalg;
pub mod nn;
pub mod preprocess;
pub mod stats;
pub mod store;
pub mod synth;
pub mod training;
pub mod windowing;

pub use advisor::{Advisory, ClimateThresholds, CropTable, HazardRegistry, HazardZone, Season};
pub use geo::{GeoPoint, StationRegistry};
pub use ingest::{DailyRecord, DailySeries, Feature, RawMonthRow};
pub use nn::{BiLstmModel, Loss, Regularization, Topology};
pub use preprocess::{ImputationMethod, NormalizationStats, SplitSpec};
pub use stats::{AdfResult, StationarityDecision};
pub use store::ModelBundle;
pub use training::{MetricsReport, TrainConfig, TrainHistory};
pub use windowing::{SampleWindow, WindowSpec};
