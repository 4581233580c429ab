//! Scene-scale LiDAR augmentation and evaluation.
//!
//! * [`lasermix`] mixes two scans along inclination bins.
//! * [`polarmix`] swaps an azimuth sector and pastes rotated instances.
//! * [`tta`] aggregates predictions over transformed copies of a scan.
//! * [`metrics`] accumulates confusion matrices and class-wise IoU / mIoU.
//! * [`pipeline`] and [`commands`] tie these into seeded, replayable runs
//!   around a voxel-majority stand-in predictor ([`model`]).

pub mod classes;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod lasermix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod polarmix;
pub mod scene;
pub mod tta;

pub use classes::{ClassId, NUM_CLASSES};
pub use error::{Error, Result};
pub use geometry::{PointCloud, RigidAugmentation};
pub use lasermix::{LaserMixConfig, LaserMixPlan};
pub use metrics::{mean_iou, ConfusionMatrix};
pub use polarmix::{PolarMixConfig, PolarMixPlan};
pub use tta::{Predictor, ScoreMap};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
