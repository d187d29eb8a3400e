//! Detection-box toolkit: 3D box lifting geometry, detection losses with
//! group disentanglement, exact forward-mode gradients, a single-box SGD
//! optimization harness, and KITTI / nuScenes style evaluation metrics.

pub mod evalmetrics;
pub mod formats;
pub mod geometry;
pub mod grad;
pub mod losses;
pub mod sample;
pub mod scalar;
pub mod toyopt;
