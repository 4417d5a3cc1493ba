//! Union-over-Intersections detection post-processing.
//!
//! Box algebra, intersection regression targets and losses, seed grouping
//! with union merging (plus NMS, Soft-NMS, Cluster-NMS and box-voting
//! baselines), COCO-style AP and LRP metrics, and a seeded Monte-Carlo
//! simulator that runs ablations with oracle regressors.

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod grouping;
pub mod io;
pub mod records;
pub mod sim;
pub mod targets;

pub use error::{ConfigError, GeometryError, IoError, LossError, SimError};
pub use evaluation::{evaluate, MetricReport};
pub use geometry::BBox;
pub use grouping::{Method, PostprocessConfig};
pub use records::{BoxKey, Detection, GroundTruth, ProposalRecord};
pub use sim::{Pipeline, SimConfig, SweepAxis};
