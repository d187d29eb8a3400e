//! Detection evaluation: KITTI-style interpolated AP on 2D / BEV / 3D
//! criteria with both the 11-point and 40-point recall grids, and
//! nuScenes-style center-distance AP with true-positive error metrics.

mod ap;
mod kitti;
mod matching;
mod nuscenes;

pub use ap::{ap_interpolated, PRCurve, RecallGrid};
pub use kitti::{evaluate_kitti, ApEntry, KittiReport, Task};
pub use matching::{match_detections, DetFlag, MatchCriterion, MatchResult};
pub use nuscenes::{evaluate_nuscenes_car, NuScenesConfig, NuScenesReport, TpErrorSummary};

use serde::Serialize;

use crate::geometry::{Box2D, Box3D};

/// KITTI difficulty strata. `Ignored` marks ground truth that qualifies for
/// no stratum (too small, too occluded or too truncated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
    Ignored,
}

impl Difficulty {
    pub const EVALUATED: [Difficulty; 3] =
        [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn name(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
            Difficulty::Ignored => "ignored",
        }
    }
}

/// Minimum 2D box height (pixels) per difficulty, from the official devkit.
pub const MIN_HEIGHT: [f64; 3] = [40.0, 25.0, 25.0];
/// Maximum occlusion level per difficulty, from the official devkit.
pub const MAX_OCCLUSION: [i32; 3] = [0, 1, 2];
/// Maximum truncation per difficulty, from the official devkit.
pub const MAX_TRUNCATION: [f64; 3] = [0.15, 0.30, 0.50];

/// A labeled object. DontCare regions carry only the 2D box.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub label: String,
    pub box2d: Box2D,
    pub box3d: Option<Box3D>,
    pub truncation: f64,
    pub occlusion: i32,
    pub dontcare: bool,
}

/// A scored detection.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub label: String,
    pub box2d: Box2D,
    pub box3d: Option<Box3D>,
    pub score: f64,
}

/// Detections and ground truth of one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub detections: Vec<DetectionRecord>,
    pub ground_truths: Vec<GroundTruthRecord>,
}

/// Evaluation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("detections and ground truth mix class labels ({0} vs {1})")]
    MixedClasses(String, String),
    #[error("no ground truth objects to evaluate against")]
    NoGroundTruth,
}

/// Assign the easiest difficulty stratum a ground-truth object qualifies
/// for. Thresholds follow the official devkit: the strata are nested, so an
/// object qualifying for `easy` also counts in `moderate` and `hard` pools.
pub fn assign_difficulty(gt: &GroundTruthRecord) -> Difficulty {
    if gt.dontcare {
        return Difficulty::Ignored;
    }
    let height = gt.box2d.height();
    for (idx, difficulty) in Difficulty::EVALUATED.into_iter().enumerate() {
        if height >= MIN_HEIGHT[idx]
            && gt.occlusion <= MAX_OCCLUSION[idx]
            && gt.truncation <= MAX_TRUNCATION[idx]
        {
            return difficulty;
        }
    }
    Difficulty::Ignored
}

/// Whether a ground truth participates in the pool of `difficulty`
/// (the strata are nested: easy objects count at every level).
pub fn qualifies_at(gt: &GroundTruthRecord, difficulty: Difficulty) -> bool {
    assign_difficulty(gt) <= difficulty
}
