//! Box representations, quaternion algebra, the image-to-camera lifting
//! transformation and its inverse, and the IoU family (axis-aligned, signed,
//! BEV rotated, full 3D).
//!
//! Camera coordinates follow the KITTI convention: x right, y down (gravity
//! axis), z forward. Image coordinates are pixels with u right, v down.

mod box2d;
mod box3d;
mod polygon;
mod quaternion;
mod theta;

pub use box2d::{iou_2d, siou, Box2D, BoxParams2D};
pub use box3d::{bev_iou, iou_3d, Box3D, CORNER_SIGNS};
pub use polygon::{clip_convex, intersection_area, shoelace_area};
pub use quaternion::Quaternion;
pub use theta::{
    decode_params, inverse_lift, lift_params, BoxContext, DecodedBox, DecodedParams, DepthStats,
    Intrinsics, RefSize, Theta10, MIN_QUATERNION_NORM,
};

/// Errors produced by geometric constructions and IoU computations.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// A 2D box with zero (or negative) area where a valid box is required,
    /// or a vanishing sIoU denominator.
    #[error("box has zero area")]
    ZeroArea,
    /// Decoded center depth is not strictly positive; the box cannot be
    /// lifted in front of the camera.
    #[error("decoded depth {z} m is not positive")]
    NonPositiveDepth { z: f64 },
    /// Quaternion norm below the minimum; no rotation can be constructed.
    #[error("quaternion norm {norm:e} is below the 1e-9 minimum")]
    ZeroNormQuaternion { norm: f64 },
    /// A 3D box edge shorter than 1e-9 m.
    #[error("box edge length {length:e} m is degenerate")]
    DegenerateBox { length: f64 },
    /// Box center is at or behind the camera plane.
    #[error("box center depth {cz} m is behind the camera")]
    BehindCamera { cz: f64 },
    /// Vertical edges deviate from the camera y-axis beyond tolerance; the
    /// box is not a pure yaw box and has no well-defined BEV footprint.
    #[error("vertical edges deviate {angle:e} rad from the camera y-axis")]
    NonYawBox { angle: f64 },
}
