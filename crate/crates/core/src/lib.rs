//! Mapper graphs and how much they move when the data is resampled.
//!
//! The crate builds Mapper functions over interval and grid covers, measures
//! the distance between two of them, and estimates the instability of a
//! parameter choice by resampling. A small set of synthetic generators and a
//! raster toolkit for checking the sampling bounds on planar examples are
//! included.

pub mod bounds;
pub mod cli;
pub mod clustering;
pub mod config;
pub mod cover;
pub mod datagen;
pub mod dataset;
pub mod distance;
pub mod error;
pub mod instability;
pub mod mapper;
pub mod rng;
pub mod sweep;

pub use clustering::{ClusterMethod, ClustererConfig, Label, UNASSIGNED};
pub use cover::{assign_bins, grid_cover, interval_cover, Cover, CoverSpec, Filter, FilterValues};
pub use dataset::{load_point_cloud, Format, IndexSubset, PointCloud};
pub use distance::{brute_force_mapper_distance, mapper_distance, mapper_mismatch, seeded_upper_bound, Distance};
pub use error::{Error, Result};
pub use mapper::{build_mapper, build_mapper_on, extend_voronoi, nerve, restrict, MapperFunction, MapperGraph};
