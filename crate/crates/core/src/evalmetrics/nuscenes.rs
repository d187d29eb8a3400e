//! nuScenes-style single-class evaluation: center-distance matching on the
//! ground plane, AP as normalized area under the precision/recall curve
//! excluding the low-recall range, and true-positive error metrics.

use serde::Serialize;

use super::{match_detections, DetFlag, EvalError, MatchCriterion, Scene};
use crate::geometry::Box3D;

/// Number of recall samples of the precision/recall curve (0.00 to 1.00).
const RECALL_SAMPLES: usize = 101;

/// Evaluation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NuScenesConfig {
    /// Ground-plane matching thresholds (meters).
    pub distance_thresholds: Vec<f64>,
    /// Threshold at which true-positive errors are accumulated (meters).
    pub tp_error_threshold: f64,
    /// Recall range `[0, min_recall]` is excluded from the AP integral.
    pub min_recall: f64,
    /// Precision floor subtracted before normalization (the official
    /// evaluator clips precision below 10%).
    pub min_precision: f64,
    /// Disable to skip the precision clipping and keep only the low-recall
    /// exclusion.
    pub clip_precision: bool,
}

impl Default for NuScenesConfig {
    fn default() -> Self {
        Self {
            distance_thresholds: vec![0.5, 1.0, 2.0, 4.0],
            tp_error_threshold: 2.0,
            min_recall: 0.1,
            min_precision: 0.1,
            clip_precision: true,
        }
    }
}

/// Mean true-positive errors at the TP error threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TpErrorSummary {
    /// Average translation error: ground-plane center distance (meters).
    pub ate: f64,
    /// Average scale error: `1 - IoU` of the size-aligned boxes.
    pub ase: f64,
    /// Average orientation error: absolute yaw difference in `[0, pi]`.
    pub aoe: f64,
}

/// Evaluation report for the car class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuScenesReport {
    /// `(distance threshold, AP)` pairs.
    pub ap: Vec<(f64, f64)>,
    pub mean_ap: f64,
    /// `None` when there are no true positives at the error threshold.
    pub tp_errors: Option<TpErrorSummary>,
    pub tp_count: usize,
}

fn ground_plane_distance(a: &Box3D, b: &Box3D) -> f64 {
    let (ca, cb) = (a.center(), b.center());
    ((ca[0] - cb[0]).powi(2) + (ca[2] - cb[2]).powi(2)).sqrt()
}

/// IoU of the two boxes after aligning centers and orientations: the
/// intersection is the product of per-axis size minima.
fn aligned_size_iou(a: &Box3D, b: &Box3D) -> f64 {
    let (sa, sb) = (a.size(), b.size());
    let inter: f64 = (0..3).map(|i| sa[i].min(sb[i])).product();
    let (va, vb): (f64, f64) = (sa.iter().product(), sb.iter().product());
    inter / (va + vb - inter)
}

fn yaw_difference(a: &Box3D, b: &Box3D) -> f64 {
    let raw = a.yaw() - b.yaw();
    let wrapped =
        (raw + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
    wrapped.abs()
}

/// Sample the raw cumulative curve on the fixed recall grid by linear
/// interpolation; precision is zero beyond the attained recall, and at
/// duplicated recall values the latest (lowest-precision) point wins.
fn sample_precision(raw: &[(f64, f64)]) -> Vec<f64> {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for &(recall, precision) in raw {
        if xs.last() == Some(&recall) {
            *ys.last_mut().unwrap() = precision;
        } else {
            xs.push(recall);
            ys.push(precision);
        }
    }
    (0..RECALL_SAMPLES)
        .map(|i| {
            let r = i as f64 / (RECALL_SAMPLES - 1) as f64;
            if xs.is_empty() {
                return 0.0;
            }
            if r <= xs[0] {
                return ys[0];
            }
            if r > *xs.last().unwrap() {
                return 0.0;
            }
            let hi = xs.partition_point(|&x| x < r);
            let (x0, x1) = (xs[hi - 1], xs[hi]);
            let (y0, y1) = (ys[hi - 1], ys[hi]);
            y0 + (y1 - y0) * (r - x0) / (x1 - x0)
        })
        .collect()
}

/// Evaluate single-class (car) detections over a set of samples.
pub fn evaluate_nuscenes_car(
    scenes: &[Scene],
    config: &NuScenesConfig,
) -> Result<NuScenesReport, EvalError> {
    let gt_count: usize = scenes
        .iter()
        .map(|s| s.ground_truths.iter().filter(|g| !g.dontcare).count())
        .sum();
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth);
    }

    let mut ap = Vec::with_capacity(config.distance_thresholds.len());
    let mut tp_errors = None;
    let mut tp_count = 0;
    for &threshold in &config.distance_thresholds {
        let mut scored_flags: Vec<(f64, bool)> = Vec::new();
        let mut ate_acc = Vec::new();
        let mut ase_acc = Vec::new();
        let mut aoe_acc = Vec::new();
        for scene in scenes {
            let gts: Vec<_> = scene
                .ground_truths
                .iter()
                .filter(|g| !g.dontcare)
                .cloned()
                .collect();
            let ignored = vec![false; gts.len()];
            let result = match_detections(
                &scene.detections,
                &gts,
                &ignored,
                &[],
                MatchCriterion::CenterDistance(threshold),
            )?;
            for (det, flag) in scene.detections.iter().zip(&result.flags) {
                match flag {
                    DetFlag::TruePositive { gt_index } => {
                        scored_flags.push((det.score, true));
                        if threshold == config.tp_error_threshold {
                            let (db, gb) = (
                                det.box3d.as_ref().expect("matched detection has a box"),
                                gts[*gt_index].box3d.as_ref().expect("matched gt has a box"),
                            );
                            ate_acc.push(ground_plane_distance(db, gb));
                            ase_acc.push(1.0 - aligned_size_iou(db, gb));
                            aoe_acc.push(yaw_difference(db, gb));
                        }
                    }
                    DetFlag::FalsePositive => scored_flags.push((det.score, false)),
                    DetFlag::Ignored => {}
                }
            }
        }

        let mut order: Vec<usize> = (0..scored_flags.len()).collect();
        order.sort_by(|&a, &b| {
            scored_flags[b]
                .0
                .partial_cmp(&scored_flags[a].0)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut raw = Vec::with_capacity(scored_flags.len());
        let (mut tp, mut fp) = (0usize, 0usize);
        for idx in order {
            if scored_flags[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            raw.push((tp as f64 / gt_count as f64, tp as f64 / (tp + fp) as f64));
        }

        let sampled = sample_precision(&raw);
        let min_precision = if config.clip_precision {
            config.min_precision
        } else {
            0.0
        };
        let start = (config.min_recall * (RECALL_SAMPLES - 1) as f64).round() as usize + 1;
        let clipped: f64 = sampled[start..]
            .iter()
            .map(|&p| (p - min_precision).max(0.0))
            .sum();
        let n_points = (RECALL_SAMPLES - start) as f64;
        ap.push((threshold, clipped / n_points / (1.0 - min_precision)));

        if threshold == config.tp_error_threshold && !ate_acc.is_empty() {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            tp_count = ate_acc.len();
            tp_errors = Some(TpErrorSummary {
                ate: mean(&ate_acc),
                ase: mean(&ase_acc),
                aoe: mean(&aoe_acc),
            });
        }
    }

    let mean_ap = ap.iter().map(|(_, v)| v).sum::<f64>() / ap.len() as f64;
    Ok(NuScenesReport {
        ap,
        mean_ap,
        tp_errors,
        tp_count,
    })
}
