//! Interpolated average precision on fixed recall grids.
//!
//! `AP|R = (1/|R|) * sum_{r in R} rho_interp(r)` with
//! `rho_interp(r) = max{ rho(r') : r' >= r }` over the observed raw curve,
//! and zero at recalls never attained. The 11-point grid includes recall 0,
//! which is what lets a single confident true positive score 1/11; the
//! 40-point grid starts at 1/40 and removes that artifact.

use serde::Serialize;

use super::EvalError;

/// Recall grid variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecallGrid {
    /// `{0, 0.1, ..., 1.0}` (11 points, includes recall 0).
    R11,
    /// `{1/40, 2/40, ..., 1.0}` (40 points, excludes recall 0).
    R40,
}

impl RecallGrid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            RecallGrid::R11 => (0..=10).map(|i| i as f64 / 10.0).collect(),
            RecallGrid::R40 => (1..=40).map(|i| i as f64 / 40.0).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RecallGrid::R11 => "r11",
            RecallGrid::R40 => "r40",
        }
    }
}

/// A sampled precision/recall curve: the recall grid, the interpolated
/// precision per grid point, and the raw cumulative (recall, precision)
/// pairs it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PRCurve {
    pub grid: Vec<f64>,
    pub interpolated: Vec<f64>,
    pub raw: Vec<(f64, f64)>,
}

impl PRCurve {
    /// Mean interpolated precision over the grid.
    pub fn average_precision(&self) -> f64 {
        if self.grid.is_empty() {
            return 0.0;
        }
        self.interpolated.iter().sum::<f64>() / self.grid.len() as f64
    }
}

/// Compute interpolated AP from scored TP/FP flags.
///
/// `scored_flags` holds `(score, is_true_positive)` for every counted
/// detection (ignored detections excluded); sorting by descending score is
/// performed internally and is stable for ties.
pub fn ap_interpolated(
    scored_flags: &[(f64, bool)],
    gt_count: usize,
    grid: RecallGrid,
) -> Result<(f64, PRCurve), EvalError> {
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth);
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

    // Suffix maximum of precision; raw recall is non-decreasing, so
    // rho_interp(r) is the suffix max at the first index with recall >= r.
    let mut suffix_max = vec![0.0; raw.len()];
    let mut running = 0.0_f64;
    for idx in (0..raw.len()).rev() {
        running = running.max(raw[idx].1);
        suffix_max[idx] = running;
    }

    let points = grid.points();
    let interpolated: Vec<f64> = points
        .iter()
        .map(|&r| {
            let first = raw.partition_point(|&(recall, _)| recall < r);
            if first < raw.len() {
                suffix_max[first]
            } else {
                0.0
            }
        })
        .collect();

    let curve = PRCurve {
        grid: points,
        interpolated,
        raw,
    };
    Ok((curve.average_precision(), curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_detector_scores_one_on_both_grids() {
        let flags: Vec<(f64, bool)> = (0..25).map(|i| (1.0 - i as f64 * 0.01, true)).collect();
        for grid in [RecallGrid::R11, RecallGrid::R40] {
            let (ap, _) = ap_interpolated(&flags, 25, grid).unwrap();
            assert!((ap - 1.0).abs() < 1e-15, "{grid:?}");
        }
    }

    #[test]
    fn single_tp_on_large_dataset_exposes_the_r11_glitch() {
        // One correct, top-scored detection against 100 ground truths:
        // recall stays at 0.01 yet the recall-0 grid point earns full
        // precision, so AP|R11 = 1/11 while AP|R40 = 0.
        let flags = [(1.0, true)];
        let (ap11, _) = ap_interpolated(&flags, 100, RecallGrid::R11).unwrap();
        let (ap40, _) = ap_interpolated(&flags, 100, RecallGrid::R40).unwrap();
        assert!((ap11 - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(ap40, 0.0);
    }

    #[test]
    fn interpolated_precision_is_monotone_non_increasing() {
        let flags = [
            (0.95, true),
            (0.9, false),
            (0.85, true),
            (0.8, true),
            (0.7, false),
            (0.6, true),
            (0.5, false),
        ];
        for grid in [RecallGrid::R11, RecallGrid::R40] {
            let (_, curve) = ap_interpolated(&flags, 6, grid).unwrap();
            for pair in curve.interpolated.windows(2) {
                assert!(pair[0] >= pair[1]);
            }
            for value in &curve.interpolated {
                assert!((0.0..=1.0).contains(value));
            }
        }
    }

    #[test]
    fn score_rescaling_leaves_ap_unchanged() {
        let flags = [
            (0.9, true),
            (0.8, false),
            (0.7, true),
            (0.6, true),
            (0.5, false),
        ];
        let rescaled: Vec<(f64, bool)> = flags
            .iter()
            .map(|&(s, t)| (s * s * 10.0, t)) // strictly monotone on (0, 1)
            .collect();
        for grid in [RecallGrid::R11, RecallGrid::R40] {
            let (a, _) = ap_interpolated(&flags, 5, grid).unwrap();
            let (b, _) = ap_interpolated(&rescaled, 5, grid).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trailing_fp_never_raises_ap() {
        let flags = [(0.9, true), (0.8, true), (0.7, false)];
        let mut extended = flags.to_vec();
        extended.push((0.1, false));
        for grid in [RecallGrid::R11, RecallGrid::R40] {
            let (base, _) = ap_interpolated(&flags, 4, grid).unwrap();
            let (more, _) = ap_interpolated(&extended, 4, grid).unwrap();
            assert!(more <= base);
        }
    }

    #[test]
    fn no_ground_truth_is_an_error() {
        assert_eq!(
            ap_interpolated(&[(0.9, false)], 0, RecallGrid::R11),
            Err(EvalError::NoGroundTruth)
        );
    }

    #[test]
    fn empty_detections_score_zero() {
        let (ap, curve) = ap_interpolated(&[], 5, RecallGrid::R11).unwrap();
        assert_eq!(ap, 0.0);
        assert!(curve.raw.is_empty());
    }
}
