//! Greedy detection-to-ground-truth matching in descending score order.

use crate::geometry::{bev_iou, iou_2d, iou_3d, Box2D};

use super::{DetectionRecord, EvalError, GroundTruthRecord};

/// Matching criterion and its threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchCriterion {
    /// Image-plane IoU at least the threshold.
    Iou2D(f64),
    /// Ground-plane rotated IoU at least the threshold.
    Bev(f64),
    /// Full 3D IoU at least the threshold.
    Iou3D(f64),
    /// Ground-plane center distance strictly below the threshold (meters).
    CenterDistance(f64),
}

impl MatchCriterion {
    pub fn threshold(&self) -> f64 {
        match self {
            MatchCriterion::Iou2D(t)
            | MatchCriterion::Bev(t)
            | MatchCriterion::Iou3D(t)
            | MatchCriterion::CenterDistance(t) => *t,
        }
    }

    /// Match quality between a detection and a ground truth: higher is
    /// better, `None` when the pair cannot match under this criterion.
    fn quality(&self, det: &DetectionRecord, gt: &GroundTruthRecord) -> Option<f64> {
        match self {
            MatchCriterion::Iou2D(tau) => {
                let value = iou_2d(&det.box2d, &gt.box2d).ok()?;
                (value >= *tau).then_some(value)
            }
            MatchCriterion::Bev(tau) => {
                let (d3, g3) = (det.box3d.as_ref()?, gt.box3d.as_ref()?);
                let value = bev_iou(d3, g3).ok()?;
                (value >= *tau).then_some(value)
            }
            MatchCriterion::Iou3D(tau) => {
                let (d3, g3) = (det.box3d.as_ref()?, gt.box3d.as_ref()?);
                let value = iou_3d(d3, g3).ok()?;
                (value >= *tau).then_some(value)
            }
            MatchCriterion::CenterDistance(limit) => {
                let (d3, g3) = (det.box3d.as_ref()?, gt.box3d.as_ref()?);
                let (a, b) = (d3.center(), g3.center());
                let dist = ((a[0] - b[0]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
                (dist < *limit).then_some(-dist)
            }
        }
    }
}

/// Outcome per detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetFlag {
    TruePositive {
        gt_index: usize,
    },
    FalsePositive,
    /// Matched an ignored ground truth or a dontcare region: counted
    /// neither as TP nor as FP.
    Ignored,
}

/// Matching outcome: one flag per detection (input order) and one matched
/// marker per ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub flags: Vec<DetFlag>,
    pub gt_matched: Vec<bool>,
}

/// Greedily match detections to ground truth of a single class.
///
/// Detections are processed in descending score order (stable for ties).
/// Each detection first tries the best-quality unmatched active ground
/// truth; failing that it is ignored if it matches any ignored ground truth
/// (which may absorb any number of detections) or covers a dontcare region
/// with intersection-over-detection-area above the threshold; otherwise it
/// is a false positive.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    gt_ignored: &[bool],
    dontcare: &[Box2D],
    criterion: MatchCriterion,
) -> Result<MatchResult, EvalError> {
    debug_assert_eq!(gts.len(), gt_ignored.len());
    for det in dets {
        for gt in gts {
            if !det.label.eq_ignore_ascii_case(&gt.label) {
                return Err(EvalError::MixedClasses(det.label.clone(), gt.label.clone()));
            }
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut flags = vec![DetFlag::FalsePositive; dets.len()];
    let mut gt_matched = vec![false; gts.len()];
    for det_idx in order {
        let det = &dets[det_idx];
        let mut best: Option<(f64, usize)> = None;
        for (gt_idx, gt) in gts.iter().enumerate() {
            if gt_ignored[gt_idx] || gt_matched[gt_idx] {
                continue;
            }
            if let Some(quality) = criterion.quality(det, gt) {
                if best.is_none_or(|(q, _)| quality > q) {
                    best = Some((quality, gt_idx));
                }
            }
        }
        if let Some((_, gt_idx)) = best {
            gt_matched[gt_idx] = true;
            flags[det_idx] = DetFlag::TruePositive { gt_index: gt_idx };
            continue;
        }
        let hits_ignored_gt = gts
            .iter()
            .enumerate()
            .any(|(gt_idx, gt)| gt_ignored[gt_idx] && criterion.quality(det, gt).is_some());
        let covers_dontcare = dontcare.iter().any(|region| {
            let det_area = det.box2d.area();
            det_area > 0.0 && det.box2d.intersection_area(region) / det_area > criterion.threshold()
        });
        if hits_ignored_gt || covers_dontcare {
            flags[det_idx] = DetFlag::Ignored;
        }
    }
    Ok(MatchResult { flags, gt_matched })
}
