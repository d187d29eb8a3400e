//! Axis-aligned image-plane rectangles, plain and signed IoU, and the
//! anchor-relative 4-parameter box encoding.

use serde::Serialize;

use super::GeometryError;

/// Axis-aligned rectangle in image coordinates (pixels).
///
/// A valid box has `u2 > u1` and `v2 > v1` (first corner top-left, second
/// bottom-right). Inverted corners are permitted as intermediates of the
/// signed-IoU extended intersection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Box2D {
    pub u1: f64,
    pub v1: f64,
    pub u2: f64,
    pub v2: f64,
}

impl Box2D {
    pub fn new(u1: f64, v1: f64, u2: f64, v2: f64) -> Self {
        Self { u1, v1, u2, v2 }
    }

    pub fn from_center_size(uc: f64, vc: f64, width: f64, height: f64) -> Self {
        Self {
            u1: uc - width / 2.0,
            v1: vc - height / 2.0,
            u2: uc + width / 2.0,
            v2: vc + height / 2.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.u2 > self.u1 && self.v2 > self.v1
    }

    pub fn width(&self) -> f64 {
        self.u2 - self.u1
    }

    pub fn height(&self) -> f64 {
        self.v2 - self.v1
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.u1 + self.u2) / 2.0, (self.v1 + self.v2) / 2.0)
    }

    /// Unsigned area; zero for inverted boxes is not implied, callers that
    /// need the signed convention use [`signed_area`].
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Magnitude `|(u2-u1)(v2-v1)|` carrying a positive sign only when the
    /// corners are properly ordered.
    pub fn signed_area(&self) -> f64 {
        let magnitude = self.area().abs();
        if self.is_valid() {
            magnitude
        } else {
            -magnitude
        }
    }

    /// Plain intersection area, zero when disjoint.
    pub fn intersection_area(&self, other: &Box2D) -> f64 {
        let w = self.u2.min(other.u2) - self.u1.max(other.u1);
        let h = self.v2.min(other.v2) - self.v1.max(other.v1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Extended intersection: per-coordinate max of the first corners and
    /// min of the second. May be inverted when the boxes are disjoint.
    pub fn extended_intersection(&self, other: &Box2D) -> Box2D {
        Box2D {
            u1: self.u1.max(other.u1),
            v1: self.v1.max(other.v1),
            u2: self.u2.min(other.u2),
            v2: self.v2.min(other.v2),
        }
    }
}

/// Intersection over union of two valid boxes; 0 when disjoint.
pub fn iou_2d(a: &Box2D, b: &Box2D) -> Result<f64, GeometryError> {
    if a.area() <= 0.0 || b.area() <= 0.0 || !a.is_valid() || !b.is_valid() {
        return Err(GeometryError::ZeroArea);
    }
    let inter = a.intersection_area(b);
    Ok(inter / (a.area() + b.area() - inter))
}

/// Signed IoU: coincides with [`iou_2d`] for overlapping boxes and assigns a
/// negative intersection to disjoint pairs, so `1 - siou` keeps a usable
/// gradient everywhere. The result is bounded in `[-1, 1]`.
pub fn siou(a: &Box2D, b: &Box2D) -> Result<f64, GeometryError> {
    if a.area() <= 0.0 || b.area() <= 0.0 || !a.is_valid() || !b.is_valid() {
        return Err(GeometryError::ZeroArea);
    }
    let cap = a.extended_intersection(b).signed_area();
    let denom = a.area() + b.area() - cap;
    if denom == 0.0 {
        return Err(GeometryError::ZeroArea);
    }
    Ok(cap / denom)
}

/// Anchor-relative 4-parameter box encoding: the regression target of a 2D
/// detection head. Center offsets are in anchor-size units, sizes are
/// log-ratios against the anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams2D {
    pub delta_u: f64,
    pub delta_v: f64,
    pub delta_w: f64,
    pub delta_h: f64,
    pub anchor: Box2D,
}

impl BoxParams2D {
    pub fn new(delta_u: f64, delta_v: f64, delta_w: f64, delta_h: f64, anchor: Box2D) -> Self {
        Self {
            delta_u,
            delta_v,
            delta_w,
            delta_h,
            anchor,
        }
    }

    pub fn params(&self) -> [f64; 4] {
        [self.delta_u, self.delta_v, self.delta_w, self.delta_h]
    }

    pub fn from_params(p: [f64; 4], anchor: Box2D) -> Self {
        Self::new(p[0], p[1], p[2], p[3], anchor)
    }

    /// Decode to an image-plane box:
    /// center `(ub + du*wa, vb + dv*ha)`, size `(wa*e^dw, ha*e^dh)`.
    pub fn decode(&self) -> Box2D {
        let (ub, vb) = self.anchor.center();
        let (wa, ha) = (self.anchor.width(), self.anchor.height());
        Box2D::from_center_size(
            ub + self.delta_u * wa,
            vb + self.delta_v * ha,
            wa * self.delta_w.exp(),
            ha * self.delta_h.exp(),
        )
    }

    /// Recover the parameters that decode to `target` under `anchor`.
    pub fn encode(target: &Box2D, anchor: Box2D) -> Result<Self, GeometryError> {
        if !target.is_valid() || !anchor.is_valid() {
            return Err(GeometryError::ZeroArea);
        }
        let (ub, vb) = anchor.center();
        let (uc, vc) = target.center();
        Ok(Self {
            delta_u: (uc - ub) / anchor.width(),
            delta_v: (vc - vb) / anchor.height(),
            delta_w: (target.width() / anchor.width()).ln(),
            delta_h: (target.height() / anchor.height()).ln(),
            anchor,
        })
    }
}
