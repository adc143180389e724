//! Lesion mapping and tracking on textured body scans.
//!
//! The crate takes 2D lesion bounding boxes detected on the texture image of
//! a 3D body scan, maps them to mesh vertices through the UV coordinates,
//! and tracks lesions across two scans of the same subject by solving a
//! graph-matching problem over anatomical and geodesic distances. A full
//! detection/tracking evaluation harness and a synthetic scan-pair generator
//! round out the pipeline.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`mesh`]: textured triangle meshes (OBJ-style I/O, validation).
//! - [`spatial`]: exact nearest-neighbour queries (kd-tree).
//! - [`bbox`]: bounding boxes, annotation I/O, NMS, tiling, top-k filtering.
//! - [`blob`]: a classical multi-scale blob detector as a detector stand-in.
//! - [`uvmap`]: 2D box centers to 3D mesh vertices and box embedding.
//! - [`geodesic`]: geodesic distance fields (Dijkstra / fast marching).
//! - [`correspondence`]: anatomical vertex maps between scans.
//! - [`tracking`]: the lesion matching optimization with dummy nodes.
//! - [`metrics`]: detection and tracking evaluation.
//! - [`partition`]: stratified subject partitioning.
//! - [`synth`]: synthetic textured scan pairs with planted lesions.

pub mod bbox;
pub mod error;
pub mod mesh;
pub mod spatial;

pub use error::{Error, Result};

// Re-export the image crate: callers handle the same pixel buffers the
// texture helpers produce.
pub use image;
