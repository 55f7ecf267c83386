//! 2D indoor visual-search simulation and planning library.
//!
//! The pipeline: a LiDAR scan is segmented per beam into map / non-map
//! points (either against the known line map or by a learned
//! temporal-convolutional classifier), two occupancy search maps are
//! maintained for the LiDAR and the cone-FoV visual sensor, frontier
//! centroids from both maps seed candidate viewpoints, and a four-term
//! utility informed by accumulated non-map points selects the next best
//! view. A harness generates indoor worlds, datasets, and benchmark sweeps.

pub mod classify_gt;
pub mod config;
pub mod error;
pub mod geom;
pub mod harness;
pub mod mapping;
pub mod par;
pub mod path;
pub mod planner;
pub mod tcn;
pub mod world;
pub mod seeding;
pub mod worldgen;

pub use error::{Error, Result};
