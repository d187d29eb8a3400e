//! Seeded random inputs for gradient checking and oracle comparisons.

use rand::Rng;

use crate::geometry::{
    Box2D, Box3D, BoxContext, DepthStats, Intrinsics, Quaternion, RefSize, Theta10,
};

/// KITTI-like decoding context: left color camera intrinsics, car reference
/// size and the dataset depth statistics.
pub fn kitti_context() -> BoxContext {
    BoxContext {
        anchor: Box2D::from_center_size(609.5593, 172.854, 120.0, 80.0),
        depth: DepthStats {
            mu_z: 28.01,
            sigma_z: 16.32,
        },
        ref_size: RefSize {
            w: 1.53,
            h: 1.63,
            d: 3.88,
        },
        intrinsics: Intrinsics::new(721.5377, 721.5377, 609.5593, 172.854),
    }
}

/// A random valid parametrization: depth in front of the camera, bounded
/// pixel offsets, bounded log-size offsets and a well-conditioned (but not
/// normalized) quaternion.
pub fn random_theta<R: Rng>(rng: &mut R, ctx: BoxContext) -> Theta10 {
    let z = rng.random_range(5.0..55.0);
    let q = loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if q.norm() > 0.2 {
            break q;
        }
    };
    Theta10::from_params(
        [
            (z - ctx.depth.mu_z) / ctx.depth.sigma_z,
            rng.random_range(-60.0..60.0),
            rng.random_range(-40.0..40.0),
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
            q.r,
            q.i,
            q.j,
            q.k,
        ],
        ctx,
    )
}

/// A random yaw box in a compact region in front of the camera.
pub fn random_yaw_box<R: Rng>(rng: &mut R) -> Box3D {
    Box3D::from_center_size_yaw(
        [
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(8.0..20.0),
        ],
        [
            rng.random_range(0.8..2.5),
            rng.random_range(0.8..2.2),
            rng.random_range(1.5..5.0),
        ],
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

/// A random valid 2D box inside a nominal image plane.
pub fn random_box2d<R: Rng>(rng: &mut R) -> Box2D {
    let u1 = rng.random_range(0.0..1100.0);
    let v1 = rng.random_range(0.0..300.0);
    Box2D::new(
        u1,
        v1,
        u1 + rng.random_range(5.0..180.0),
        v1 + rng.random_range(5.0..120.0),
    )
}
