//! KITTI-style evaluation: per-difficulty pools with ignored ground truth,
//! greedy matching per image, and interpolated AP on both recall grids for
//! the 2D, BEV and 3D criteria.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{
    ap_interpolated, match_detections, qualifies_at, DetFlag, Difficulty, EvalError,
    MatchCriterion, PRCurve, RecallGrid, Scene,
};

/// Evaluation criterion family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Task {
    TwoD,
    Bev,
    ThreeD,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::TwoD, Task::Bev, Task::ThreeD];

    pub fn name(&self) -> &'static str {
        match self {
            Task::TwoD => "2d",
            Task::Bev => "bev",
            Task::ThreeD => "3d",
        }
    }

    fn criterion(&self, tau: f64) -> MatchCriterion {
        match self {
            Task::TwoD => MatchCriterion::Iou2D(tau),
            Task::Bev => MatchCriterion::Bev(tau),
            Task::ThreeD => MatchCriterion::Iou3D(tau),
        }
    }
}

/// AP numbers and retained curves for one (task, difficulty) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApEntry {
    pub ap_r11: f64,
    pub ap_r40: f64,
    pub gt_count: usize,
    pub curve_r11: PRCurve,
    pub curve_r40: PRCurve,
}

/// Full evaluation report: task -> difficulty -> AP entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KittiReport {
    pub class: String,
    /// IoU thresholds per difficulty (easy, moderate, hard).
    pub iou_thresholds: [f64; 3],
    pub tasks: BTreeMap<String, BTreeMap<String, ApEntry>>,
}

impl KittiReport {
    pub fn entry(&self, task: Task, difficulty: Difficulty) -> Option<&ApEntry> {
        self.tasks.get(task.name())?.get(difficulty.name())
    }

    pub fn ap(&self, task: Task, difficulty: Difficulty, grid: RecallGrid) -> Option<f64> {
        self.entry(task, difficulty).map(|e| match grid {
            RecallGrid::R11 => e.ap_r11,
            RecallGrid::R40 => e.ap_r40,
        })
    }
}

/// Evaluate detections against ground truth over a set of images.
///
/// For each difficulty, same-class ground truth failing the difficulty
/// thresholds is kept as "ignored": it cannot contribute recall but absorbs
/// detections that match it, which then count neither as TP nor FP
/// (leaderboard convention). DontCare regions likewise absorb detections
/// covering them.
pub fn evaluate_kitti(
    scenes: &[Scene],
    class: &str,
    iou_thresholds: [f64; 3],
) -> Result<KittiReport, EvalError> {
    let mut tasks = BTreeMap::new();
    for task in Task::ALL {
        let mut per_difficulty = BTreeMap::new();
        for (d_idx, difficulty) in Difficulty::EVALUATED.into_iter().enumerate() {
            let tau = iou_thresholds[d_idx];
            let mut scored_flags: Vec<(f64, bool)> = Vec::new();
            let mut gt_count = 0usize;
            for scene in scenes {
                let dets: Vec<_> = scene
                    .detections
                    .iter()
                    .filter(|d| d.label.eq_ignore_ascii_case(class))
                    .cloned()
                    .collect();
                let gts: Vec<_> = scene
                    .ground_truths
                    .iter()
                    .filter(|g| !g.dontcare && g.label.eq_ignore_ascii_case(class))
                    .cloned()
                    .collect();
                let dontcare: Vec<_> = scene
                    .ground_truths
                    .iter()
                    .filter(|g| g.dontcare)
                    .map(|g| g.box2d)
                    .collect();
                let ignored: Vec<bool> = gts.iter().map(|g| !qualifies_at(g, difficulty)).collect();
                gt_count += ignored.iter().filter(|&&ig| !ig).count();

                let result =
                    match_detections(&dets, &gts, &ignored, &dontcare, task.criterion(tau))?;
                for (det, flag) in dets.iter().zip(&result.flags) {
                    match flag {
                        DetFlag::TruePositive { .. } => scored_flags.push((det.score, true)),
                        DetFlag::FalsePositive => scored_flags.push((det.score, false)),
                        DetFlag::Ignored => {}
                    }
                }
            }
            if gt_count == 0 {
                return Err(EvalError::NoGroundTruth);
            }
            let (ap_r11, curve_r11) = ap_interpolated(&scored_flags, gt_count, RecallGrid::R11)?;
            let (ap_r40, curve_r40) = ap_interpolated(&scored_flags, gt_count, RecallGrid::R40)?;
            per_difficulty.insert(
                difficulty.name().to_string(),
                ApEntry {
                    ap_r11,
                    ap_r40,
                    gt_count,
                    curve_r11,
                    curve_r40,
                },
            );
        }
        tasks.insert(task.name().to_string(), per_difficulty);
    }
    Ok(KittiReport {
        class: class.to_string(),
        iou_thresholds,
        tasks,
    })
}
