//! Organelle structure enhancement, hierarchical segmentation, marker
//! tracking and hierarchical feature extraction for 2D/3D time-lapse volumes.

pub mod eigen;
pub mod enhance;
pub mod error;
pub mod features;
pub mod filters;
pub mod flow;
pub mod grid;
pub mod linking;
pub mod mocap;
pub mod morphology;
pub mod multimesh;
pub mod segment;
pub mod spatial;
pub mod threshold;
pub mod volume;

pub use error::{Error, Result};
pub use grid::{Coord, Grid, Mask, Shape};
pub use volume::{Frame, ScaleSpace, VolumeMeta};
