//! Interactive, template-driven radial graph-cut segmentation of longitudinal
//! structures in 3D grey-value volumes.
//!
//! A user outlines the structure on one slice. Rays cast from a seed point to
//! that outline carry equally spaced nodes; a minimum s-t cut over those
//! nodes picks one boundary node per ray. The accepted cut, scaled about its
//! centroid, becomes the template for the next slice. Skipped slices are
//! interpolated and the contour stack is voxelized into a mask.

pub mod contour_set;
pub mod error;
pub mod graph_cut;
pub mod interpolate;
pub mod metrics;
pub mod nrrd;
pub mod phantom;
pub mod point;
pub mod raster;
pub mod session;
pub mod template;
pub mod volume;

pub use error::{Error, GeometryError, Result};
pub use point::Point2;
