//! Spatial point-pattern toolkit.
//!
//! * [`geometry`]: points, windows, boxes, exact nearest-neighbour queries.
//! * [`ripley`]: empirical G, F and J functions and neighbour summaries.
//! * [`envelope`]: Monte Carlo tests against complete spatial randomness.
//! * [`reproduction`]: the bimodal reproduction simulator and its
//!   grid-search parameter fit.
//! * [`detections`]: tile merging, NMS and counting accuracy for detector
//!   output.
//!
//! Every stochastic routine is driven by an explicit `u64` seed and gives
//! identical results regardless of the rayon thread count.

pub mod detections;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod reproduction;
pub mod ripley;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{
    euclidean_distance, iou, nearest_neighbor_distances, BBox, Point, PointPattern, Window,
};
