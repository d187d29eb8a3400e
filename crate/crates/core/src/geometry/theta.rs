//! The 10-parameter 3D box encoding and the lifting transformation between
//! parameter space and camera-space corner matrices.
//!
//! A regressed box is a 10-tuple
//! `(dz, du, dv, dw, dh, dd, qr, qi, qj, qk)` interpreted against a context
//! of anchor box, dataset depth statistics, reference size and camera
//! intrinsics:
//!
//! * depth `z = mu_z + sigma_z * dz`,
//! * projected center `c = anchor_center + (du, dv)` in pixels,
//! * size `s = (W0*e^dw, H0*e^dh, D0*e^dd)` in meters,
//! * `q` the allocentric pose quaternion.
//!
//! Lifting produces the corner matrix `0.5 * R * S * B0 + C`, where the
//! rotation composes `q` with a yaw by the viewing angle
//! `beta = atan2(Cx, Cz)` about the camera y-axis, `S = diag(s)` and `B0`
//! holds the corners of `[-1, 1]^3` in canonical order.

use crate::scalar::Real;

use super::{Box2D, Box3D, GeometryError, Quaternion, CORNER_SIGNS};

/// Minimum quaternion norm accepted by the lifting transformation.
pub const MIN_QUATERNION_NORM: f64 = 1e-9;

/// Pinhole camera intrinsics (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0 && self.fy > 0.0
    }

    /// Back-project an image point at depth `z` to camera coordinates.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z]
    }

    /// Project a camera-space point to image coordinates.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (
            p[0] / p[2] * self.fx + self.cx,
            p[1] / p[2] * self.fy + self.cy,
        )
    }
}

/// Dataset-wide depth statistics (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthStats {
    pub mu_z: f64,
    pub sigma_z: f64,
}

/// Dataset-wide reference box size (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefSize {
    pub w: f64,
    pub h: f64,
    pub d: f64,
}

/// Decoding context: everything the 10-tuple is relative to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxContext {
    pub anchor: Box2D,
    pub depth: DepthStats,
    pub ref_size: RefSize,
    pub intrinsics: Intrinsics,
}

/// The 10-parameter 3D box regression output plus its decoding context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta10 {
    pub delta_z: f64,
    pub delta_u: f64,
    pub delta_v: f64,
    pub delta_w: f64,
    pub delta_h: f64,
    pub delta_d: f64,
    pub q: Quaternion,
    pub context: BoxContext,
}

impl Theta10 {
    /// The regressed parameters as a flat vector in canonical order
    /// `(dz, du, dv, dw, dh, dd, qr, qi, qj, qk)`.
    pub fn params(&self) -> [f64; 10] {
        [
            self.delta_z,
            self.delta_u,
            self.delta_v,
            self.delta_w,
            self.delta_h,
            self.delta_d,
            self.q.r,
            self.q.i,
            self.q.j,
            self.q.k,
        ]
    }

    pub fn from_params(p: [f64; 10], context: BoxContext) -> Self {
        Self {
            delta_z: p[0],
            delta_u: p[1],
            delta_v: p[2],
            delta_w: p[3],
            delta_h: p[4],
            delta_d: p[5],
            q: Quaternion::new(p[6], p[7], p[8], p[9]),
            context,
        }
    }

    /// Decode to metric quantities. Total: a non-positive depth is reported
    /// only when lifting.
    pub fn decode(&self) -> DecodedBox {
        let d = decode_params(&self.params(), &self.context);
        let q_unit = self.q.normalized().unwrap_or(self.q);
        let q_egocentric = q_unit.multiply(&Quaternion::about_y(d.beta));
        DecodedBox {
            z: d.z,
            c: [d.uc, d.vc],
            size: d.size,
            q_allocentric: self.q,
            center: d.center,
            beta: d.beta,
            q_egocentric,
        }
    }

    /// Lift to the 3x8 camera-space corner matrix.
    pub fn lift(&self) -> Result<Box3D, GeometryError> {
        let corners = lift_params(&self.params(), &self.context)?;
        Ok(Box3D::from_corners(corners))
    }
}

/// Decoded box quantities: depth, projected center, metric size, pose and
/// derived camera-space center and viewing angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedBox {
    pub z: f64,
    pub c: [f64; 2],
    pub size: [f64; 3],
    pub q_allocentric: Quaternion,
    pub center: [f64; 3],
    pub beta: f64,
    pub q_egocentric: Quaternion,
}

/// Intermediate decode result, generic over the scalar type so the same
/// kernel drives both evaluation and differentiation.
#[derive(Debug, Clone, Copy)]
pub struct DecodedParams<T> {
    pub z: T,
    pub uc: T,
    pub vc: T,
    pub size: [T; 3],
    pub center: [T; 3],
    pub beta: T,
    pub q: Quaternion<T>,
}

/// Decode the raw parameter vector against `ctx`.
pub fn decode_params<T: Real>(p: &[T; 10], ctx: &BoxContext) -> DecodedParams<T> {
    let (ub, vb) = ctx.anchor.center();
    let z = T::from_f64(ctx.depth.mu_z) + T::from_f64(ctx.depth.sigma_z) * p[0];
    let uc = T::from_f64(ub) + p[1];
    let vc = T::from_f64(vb) + p[2];
    let size = [
        T::from_f64(ctx.ref_size.w) * p[3].exp(),
        T::from_f64(ctx.ref_size.h) * p[4].exp(),
        T::from_f64(ctx.ref_size.d) * p[5].exp(),
    ];
    let center = [
        (uc - T::from_f64(ctx.intrinsics.cx)) / T::from_f64(ctx.intrinsics.fx) * z,
        (vc - T::from_f64(ctx.intrinsics.cy)) / T::from_f64(ctx.intrinsics.fy) * z,
        z,
    ];
    let beta = center[0].atan2(center[2]);
    DecodedParams {
        z,
        uc,
        vc,
        size,
        center,
        beta,
        q: Quaternion::new(p[6], p[7], p[8], p[9]),
    }
}

/// Lift the raw parameter vector to a 3x8 corner matrix.
pub fn lift_params<T: Real>(p: &[T; 10], ctx: &BoxContext) -> Result<[[T; 8]; 3], GeometryError> {
    let d = decode_params(p, ctx);
    if d.z.value() <= 0.0 {
        return Err(GeometryError::NonPositiveDepth { z: d.z.value() });
    }
    let q = d.q.normalized()?;
    let q_c = q.multiply(&Quaternion::about_y(d.beta));
    let rot = q_c.rotation_matrix();
    let half = T::from_f64(0.5);
    let half_size = [d.size[0] * half, d.size[1] * half, d.size[2] * half];
    let mut corners = [[T::from_f64(0.0); 8]; 3];
    for (col, signs) in CORNER_SIGNS.iter().enumerate() {
        for row in 0..3 {
            let mut value = d.center[row];
            for axis in 0..3 {
                value = value + rot[row][axis] * half_size[axis] * T::from_f64(signs[axis]);
            }
            corners[row][col] = value;
        }
    }
    Ok(corners)
}

/// Recover the 10-parameter encoding of a camera-space cuboid under the
/// given context. The returned quaternion is allocentric (egocentric
/// rotation with the viewing yaw removed), sign-canonicalized.
pub fn inverse_lift(
    boxed: &Box3D,
    anchor: Box2D,
    depth: DepthStats,
    ref_size: RefSize,
    intrinsics: Intrinsics,
) -> Result<Theta10, GeometryError> {
    let c = boxed.corners();
    let edge = |a: usize, b: usize| -> [f64; 3] {
        [c[0][b] - c[0][a], c[1][b] - c[1][a], c[2][b] - c[2][a]]
    };
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();

    // Canonical order: columns 0->1, 0->3, 0->4 span the x, y, z box axes.
    let axes = [edge(0, 1), edge(0, 3), edge(0, 4)];
    let size = [norm(axes[0]), norm(axes[1]), norm(axes[2])];
    for len in size {
        if len < 1e-9 {
            return Err(GeometryError::DegenerateBox { length: len });
        }
    }

    let center = boxed.center();
    if center[2] <= 0.0 {
        return Err(GeometryError::BehindCamera { cz: center[2] });
    }

    let mut rot = [[0.0; 3]; 3];
    for (axis, vector) in axes.iter().enumerate() {
        for row in 0..3 {
            rot[row][axis] = vector[row] / size[axis];
        }
    }
    let q_egocentric = Quaternion::from_rotation_matrix(&rot);
    let beta = center[0].atan2(center[2]);
    let q_allocentric = q_egocentric
        .multiply(&Quaternion::about_y(-beta))
        .canonicalized();

    let (uc, vc) = intrinsics.project(center);
    let (ub, vb) = anchor.center();
    Ok(Theta10 {
        delta_z: (center[2] - depth.mu_z) / depth.sigma_z,
        delta_u: uc - ub,
        delta_v: vc - vb,
        delta_w: (size[0] / ref_size.w).ln(),
        delta_h: (size[1] / ref_size.h).ln(),
        delta_d: (size[2] / ref_size.d).ln(),
        q: q_allocentric,
        context: BoxContext {
            anchor,
            depth,
            ref_size,
            intrinsics,
        },
    })
}
