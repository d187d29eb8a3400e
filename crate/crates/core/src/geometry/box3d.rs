//! Camera-space cuboids as 3x8 corner matrices, with BEV and full-3D IoU for
//! yaw-only boxes.

use super::polygon;
use super::GeometryError;

/// Canonical corner order of the unit cube `[-1, 1]^3`: columns enumerate
/// the sign patterns (x, y, z) =
/// (---), (+--), (++-), (-+-), (--+), (+-+), (+++), (-++).
/// Columns 0->1, 0->3 and 0->4 span the box x, y and z axes.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Maximum angle (radians) between a box's vertical edges and the camera
/// y-axis for the box to qualify as a yaw box.
const YAW_TOLERANCE: f64 = 1e-6;

/// A rectangular cuboid in camera coordinates, stored as a 3x8 matrix of
/// corner positions (meters) in canonical corner order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    corners: [[f64; 8]; 3],
}

impl Box3D {
    pub fn from_corners(corners: [[f64; 8]; 3]) -> Self {
        Self { corners }
    }

    /// Build from center, full size `(w, h, d)` and yaw about the camera
    /// y-axis. Yaw zero aligns the box axes with the camera axes.
    pub fn from_center_size_yaw(center: [f64; 3], size: [f64; 3], yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        let rot = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
        let mut corners = [[0.0; 8]; 3];
        for (col, signs) in CORNER_SIGNS.iter().enumerate() {
            for row in 0..3 {
                let mut value = center[row];
                for axis in 0..3 {
                    value += rot[row][axis] * size[axis] / 2.0 * signs[axis];
                }
                corners[row][col] = value;
            }
        }
        Self { corners }
    }

    pub fn corners(&self) -> &[[f64; 8]; 3] {
        &self.corners
    }

    pub fn corner(&self, col: usize) -> [f64; 3] {
        [
            self.corners[0][col],
            self.corners[1][col],
            self.corners[2][col],
        ]
    }

    /// Geometric center (mean of the eight corners).
    pub fn center(&self) -> [f64; 3] {
        self.corners.map(|row| row.iter().sum::<f64>() / 8.0)
    }

    /// Edge lengths along the box x, y, z axes.
    pub fn size(&self) -> [f64; 3] {
        let edge = |a: usize, b: usize| -> f64 {
            let mut sq = 0.0;
            for row in 0..3 {
                let d = self.corners[row][b] - self.corners[row][a];
                sq += d * d;
            }
            sq.sqrt()
        };
        [edge(0, 1), edge(0, 3), edge(0, 4)]
    }

    /// Yaw of the box x-axis in the ground plane, in `(-pi, pi]`.
    pub fn yaw(&self) -> f64 {
        let x_axis = [
            self.corners[0][1] - self.corners[0][0],
            self.corners[2][1] - self.corners[2][0],
        ];
        // atan2(z-component wants the about-y convention used by
        // from_center_size_yaw: x-axis = (cos yaw, 0, -sin yaw).
        (-x_axis[1]).atan2(x_axis[0])
    }

    pub fn translated(&self, offset: [f64; 3]) -> Self {
        let mut corners = self.corners;
        for (row, d) in corners.iter_mut().zip(offset) {
            for value in row.iter_mut() {
                *value += d;
            }
        }
        Self { corners }
    }

    pub fn volume(&self) -> f64 {
        let s = self.size();
        s[0] * s[1] * s[2]
    }

    fn vertical_deviation(&self) -> f64 {
        let v = [
            self.corners[0][3] - self.corners[0][0],
            self.corners[1][3] - self.corners[1][0],
            self.corners[2][3] - self.corners[2][0],
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 {
            return std::f64::consts::FRAC_PI_2;
        }
        // Angle to the y-axis line (sign-insensitive).
        let cos = (v[1] / norm).abs().min(1.0);
        cos.acos()
    }

    /// Ground-plane (xz) footprint of the bottom face, counter-clockwise.
    /// Errors when the box is not a pure yaw box.
    pub fn footprint(&self) -> Result<[[f64; 2]; 4], GeometryError> {
        let deviation = self.vertical_deviation();
        if deviation > YAW_TOLERANCE {
            return Err(GeometryError::NonYawBox { angle: deviation });
        }
        // Bottom face (+y in camera coordinates, y points down): columns
        // 2, 3, 7, 6 are cyclically adjacent.
        let quad = [2, 3, 7, 6].map(|col| [self.corners[0][col], self.corners[2][col]]);
        if polygon::shoelace_area(&quad) < 0.0 {
            Ok([quad[3], quad[2], quad[1], quad[0]])
        } else {
            Ok(quad)
        }
    }

    /// Extent of the box along the camera y-axis as `(min, max)`.
    pub fn y_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &y in &self.corners[1] {
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (lo, hi)
    }
}

/// Bird's-eye-view IoU: rotated-rectangle IoU of the ground-plane
/// footprints, via convex clipping and shoelace areas.
pub fn bev_iou(a: &Box3D, b: &Box3D) -> Result<f64, GeometryError> {
    let fa = a.footprint()?;
    let fb = b.footprint()?;
    let area_a = polygon::shoelace_area(&fa).abs();
    let area_b = polygon::shoelace_area(&fb).abs();
    if area_a <= 0.0 || area_b <= 0.0 {
        return Err(GeometryError::ZeroArea);
    }
    let inter = polygon::intersection_area(&fa, &fb);
    Ok(inter / (area_a + area_b - inter))
}

/// Full 3D IoU of two yaw boxes: BEV intersection area times vertical
/// overlap, over the union volume.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> Result<f64, GeometryError> {
    let fa = a.footprint()?;
    let fb = b.footprint()?;
    let area_a = polygon::shoelace_area(&fa).abs();
    let area_b = polygon::shoelace_area(&fb).abs();
    if area_a <= 0.0 || area_b <= 0.0 {
        return Err(GeometryError::ZeroArea);
    }
    let (a_lo, a_hi) = a.y_range();
    let (b_lo, b_hi) = b.y_range();
    let y_overlap = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
    let inter = polygon::intersection_area(&fa, &fb) * y_overlap;
    let vol_a = area_a * (a_hi - a_lo);
    let vol_b = area_b * (b_hi - b_lo);
    Ok(inter / (vol_a + vol_b - inter))
}
