//! Single-box optimization harness: drive a 10-parameter box toward a
//! ground-truth cuboid with SGD + momentum under either the entangled
//! corner loss or its disentangled counterpart, logging the full
//! trajectory. The entangled loss is recorded at every iterate for both
//! modes so the two runs are directly comparable.

use std::io::Write;

use crate::geometry::{inverse_lift, Box3D, GeometryError, Theta10};
use crate::grad::{grad_loss, GradError, LossKind};
use crate::losses::{disentangled_loss_3d, entangled_loss_3d, HuberParams, LossError};

/// Loss thresholds reported by [`compare_runs`]: the iteration at which the
/// entangled loss first drops below each value.
pub const LOSS_THRESHOLDS: [f64; 4] = [1.0, 0.1, 0.01, 0.001];

/// Classical (heavy-ball) SGD configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub iterations: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.9,
            weight_decay: 0.0,
            iterations: 3000,
        }
    }
}

/// One logged iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub iteration: usize,
    pub params: [f64; 10],
    pub z: f64,
    pub center_2d: [f64; 2],
    pub size: [f64; 3],
    pub q_egocentric: [f64; 4],
    pub loss_entangled: f64,
    /// Per-group terms (depth, proj_center, rotation, dims); present only
    /// for disentangled runs.
    pub group_terms: Option<[f64; 4]>,
}

/// Complete optimization trace: `iterations + 1` rows including the
/// initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub mode: LossKind,
    pub config: SgdConfig,
    pub gt_size: [f64; 3],
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn final_entangled_loss(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.loss_entangled)
    }

    /// Largest per-axis size deviation from the ground truth over the run,
    /// with the iteration where it is attained.
    pub fn max_dimension_deviation(&self) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for row in &self.rows {
            let dev = (0..3)
                .map(|a| (row.size[a] - self.gt_size[a]).abs())
                .fold(0.0, f64::max);
            if dev > worst.0 {
                worst = (dev, row.iteration);
            }
        }
        worst
    }

    /// First iteration at which the entangled loss drops below `threshold`.
    pub fn first_iteration_below(&self, threshold: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.loss_entangled < threshold)
            .map(|r| r.iteration)
    }
}

/// Toy-optimization failures.
#[derive(Debug, thiserror::Error)]
pub enum ToyOptError {
    /// An iterate left the valid parameter region (non-positive depth or
    /// vanishing quaternion); the partial trajectory is preserved.
    #[error(
        "optimization diverged to an invalid parametrization at iteration {iteration}: {source}"
    )]
    DivergedToInvalid {
        iteration: usize,
        source: GradError,
        partial: Box<TrajectoryLog>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

fn log_row(
    iteration: usize,
    theta: &Theta10,
    gt: &Box3D,
    huber: &HuberParams,
    mode: LossKind,
) -> Result<TrajectoryRow, ToyOptError> {
    let loss_entangled = entangled_loss_3d(theta, gt, huber)?;
    let group_terms = match mode {
        LossKind::Entangled => None,
        LossKind::Disentangled => {
            let dis = disentangled_loss_3d(theta, gt, huber)?;
            let values = dis.term_values();
            Some([values[0], values[1], values[2], values[3]])
        }
    };
    let decoded = theta.decode();
    Ok(TrajectoryRow {
        iteration,
        params: theta.params(),
        z: decoded.z,
        center_2d: decoded.c,
        size: decoded.size,
        q_egocentric: decoded.q_egocentric.components(),
        loss_entangled,
        group_terms,
    })
}

/// Optimize `init` toward `gt` and log every iterate.
///
/// Update rule: `v <- momentum*v - lr*(grad + wd*theta)`,
/// `theta <- theta + v`, with `v0 = 0`. Deterministic for fixed inputs.
pub fn run_toy(
    init: &Theta10,
    gt: &Box3D,
    cfg: &SgdConfig,
    mode: LossKind,
    huber: &HuberParams,
) -> Result<TrajectoryLog, ToyOptError> {
    let ctx = init.context;
    let gt_theta = inverse_lift(gt, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics)?;
    let gt_size = gt_theta.decode().size;

    let mut params = init.params();
    let mut velocity = [0.0; 10];
    let mut log = TrajectoryLog {
        mode,
        config: *cfg,
        gt_size,
        rows: Vec::with_capacity(cfg.iterations + 1),
    };

    for iteration in 0..=cfg.iterations {
        let theta = Theta10::from_params(params, ctx);
        match log_row(iteration, &theta, gt, huber, mode) {
            Ok(row) => log.rows.push(row),
            Err(ToyOptError::Loss(LossError::Geometry(e))) | Err(ToyOptError::Geometry(e)) => {
                return Err(ToyOptError::DivergedToInvalid {
                    iteration,
                    source: GradError::UndefinedAtPoint(e),
                    partial: Box::new(log),
                });
            }
            Err(other) => return Err(other),
        }
        if iteration == cfg.iterations {
            break;
        }
        let gradient = match grad_loss(mode, &theta, gt, huber) {
            Ok(g) => g,
            Err(e) => {
                return Err(ToyOptError::DivergedToInvalid {
                    iteration,
                    source: e,
                    partial: Box::new(log),
                });
            }
        };
        for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(gradient) {
            *v = cfg.momentum * *v - cfg.learning_rate * (g + cfg.weight_decay * *p);
            *p += *v;
        }
    }
    Ok(log)
}

/// Per-run summary statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub final_entangled_loss: f64,
    pub max_dim_deviation: f64,
    pub max_dim_deviation_iteration: usize,
    /// `(threshold, first iteration below it)` for each entry of
    /// [`LOSS_THRESHOLDS`].
    pub loss_threshold_crossings: Vec<(f64, Option<usize>)>,
}

fn summarize(log: &TrajectoryLog) -> RunSummary {
    let (max_dim_deviation, max_dim_deviation_iteration) = log.max_dimension_deviation();
    RunSummary {
        mode: match log.mode {
            LossKind::Entangled => "entangled".to_string(),
            LossKind::Disentangled => "disentangled".to_string(),
        },
        final_entangled_loss: log.final_entangled_loss(),
        max_dim_deviation,
        max_dim_deviation_iteration,
        loss_threshold_crossings: LOSS_THRESHOLDS
            .iter()
            .map(|&t| (t, log.first_iteration_below(t)))
            .collect(),
    }
}

/// Side-by-side comparison of two runs (deltas are `first - second`).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunComparison {
    pub first: RunSummary,
    pub second: RunSummary,
    pub final_loss_delta: f64,
    pub max_dim_deviation_delta: f64,
}

/// Compare two trajectory logs (typically entangled vs disentangled on the
/// same fixture).
pub fn compare_runs(a: &TrajectoryLog, b: &TrajectoryLog) -> RunComparison {
    let first = summarize(a);
    let second = summarize(b);
    RunComparison {
        final_loss_delta: first.final_entangled_loss - second.final_entangled_loss,
        max_dim_deviation_delta: first.max_dim_deviation - second.max_dim_deviation,
        first,
        second,
    }
}

/// CSV header of the trajectory schema.
pub const CSV_HEADER: &str = "iter,delta_z,delta_u,delta_v,delta_w,delta_h,delta_d,q_r,q_i,q_j,q_k,z,u_c,v_c,width,height,depth,ego_q_r,ego_q_i,ego_q_j,ego_q_k,loss_3d_entangled,term_depth,term_proj_center,term_rotation,term_dims";

/// Write the trajectory as CSV, one row per iterate (thinned to every
/// `stride`-th row when `stride > 1`; the first and last rows are always
/// written). Floats use 6 decimal places.
pub fn write_csv<W: Write>(log: &TrajectoryLog, out: &mut W, stride: usize) -> std::io::Result<()> {
    let stride = stride.max(1);
    writeln!(out, "{CSV_HEADER}")?;
    let last = log.rows.len().saturating_sub(1);
    for (idx, row) in log.rows.iter().enumerate() {
        if idx % stride != 0 && idx != last {
            continue;
        }
        let mut fields = vec![row.iteration.to_string()];
        fields.extend(row.params.iter().map(|v| format!("{v:.6}")));
        fields.push(format!("{:.6}", row.z));
        fields.push(format!("{:.6}", row.center_2d[0]));
        fields.push(format!("{:.6}", row.center_2d[1]));
        fields.extend(row.size.iter().map(|v| format!("{v:.6}")));
        fields.extend(row.q_egocentric.iter().map(|v| format!("{v:.6}")));
        fields.push(format!("{:.6}", row.loss_entangled));
        match row.group_terms {
            Some(terms) => fields.extend(terms.iter().map(|v| format!("{v:.6}"))),
            None => fields.extend(std::iter::repeat_n(String::new(), 4)),
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

mod fixture;
pub use fixture::{FixtureError, ToyFixture};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::kitti_context;

    fn small_case() -> (Theta10, Box3D) {
        let ctx = kitti_context();
        let gt = Box3D::from_center_size_yaw([1.0, 0.5, 14.0], [1.53, 1.63, 3.88], 0.5);
        let gt_theta =
            inverse_lift(&gt, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics).unwrap();
        let mut params = gt_theta.params();
        params[0] += 0.15;
        params[3] += 0.25;
        params[8] += 0.2;
        (Theta10::from_params(params, ctx), gt)
    }

    #[test]
    fn initialization_at_ground_truth_stays_put() {
        let ctx = kitti_context();
        let gt = Box3D::from_center_size_yaw([1.0, 0.5, 14.0], [1.53, 1.63, 3.88], 0.5);
        let gt_theta =
            inverse_lift(&gt, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics).unwrap();
        let cfg = SgdConfig {
            iterations: 20,
            ..SgdConfig::default()
        };
        let log = run_toy(
            &gt_theta,
            &gt,
            &cfg,
            LossKind::Entangled,
            &HuberParams::default(),
        )
        .unwrap();
        assert_eq!(log.rows.len(), 21);
        for row in &log.rows {
            assert!(row.loss_entangled < 1e-12);
            for (p, q) in row.params.iter().zip(gt_theta.params()) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_step_matches_hand_stepped_gradient() {
        let (init, gt) = small_case();
        let huber = HuberParams::default();
        let cfg = SgdConfig {
            learning_rate: 0.001,
            momentum: 0.0,
            weight_decay: 0.0,
            iterations: 1,
        };
        let log = run_toy(&init, &gt, &cfg, LossKind::Entangled, &huber).unwrap();
        let grad = grad_loss(LossKind::Entangled, &init, &gt, &huber).unwrap();
        for i in 0..10 {
            let expected = init.params()[i] - cfg.learning_rate * grad[i];
            assert!((log.rows[1].params[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_at_iteration_zero_matches_standalone_evaluation() {
        let (init, gt) = small_case();
        let huber = HuberParams::default();
        let cfg = SgdConfig {
            iterations: 3,
            ..SgdConfig::default()
        };
        for mode in [LossKind::Entangled, LossKind::Disentangled] {
            let log = run_toy(&init, &gt, &cfg, mode, &huber).unwrap();
            let standalone = entangled_loss_3d(&init, &gt, &huber).unwrap();
            assert_eq!(log.rows[0].loss_entangled, standalone);
        }
    }

    #[test]
    fn runs_are_bit_deterministic() {
        let (init, gt) = small_case();
        let cfg = SgdConfig {
            iterations: 50,
            ..SgdConfig::default()
        };
        let huber = HuberParams::default();
        for mode in [LossKind::Entangled, LossKind::Disentangled] {
            let a = run_toy(&init, &gt, &cfg, mode, &huber).unwrap();
            let b = run_toy(&init, &gt, &cfg, mode, &huber).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn disentangled_terms_shrink_under_small_steps() {
        let (init, gt) = small_case();
        let cfg = SgdConfig {
            learning_rate: 1e-4,
            momentum: 0.0,
            weight_decay: 0.0,
            iterations: 10,
        };
        let log = run_toy(
            &init,
            &gt,
            &cfg,
            LossKind::Disentangled,
            &HuberParams::default(),
        )
        .unwrap();
        for pair in log.rows.windows(2) {
            let before = pair[0].group_terms.unwrap();
            let after = pair[1].group_terms.unwrap();
            for g in 0..4 {
                assert!(after[g] <= before[g] + 1e-12);
            }
        }
    }

    #[test]
    fn divergence_to_invalid_depth_preserves_partial_log() {
        let (init, gt) = small_case();
        // An absurd learning rate overshoots the depth into z <= 0.
        let cfg = SgdConfig {
            learning_rate: 10.0,
            momentum: 0.0,
            weight_decay: 0.0,
            iterations: 200,
        };
        match run_toy(
            &init,
            &gt,
            &cfg,
            LossKind::Entangled,
            &HuberParams::default(),
        ) {
            Err(ToyOptError::DivergedToInvalid {
                iteration, partial, ..
            }) => {
                assert!(iteration > 0);
                assert_eq!(partial.rows.len(), iteration);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn comparison_of_identical_runs_has_zero_deltas() {
        let (init, gt) = small_case();
        let cfg = SgdConfig {
            iterations: 30,
            ..SgdConfig::default()
        };
        let log = run_toy(
            &init,
            &gt,
            &cfg,
            LossKind::Disentangled,
            &HuberParams::default(),
        )
        .unwrap();
        let cmp = compare_runs(&log, &log);
        assert_eq!(cmp.final_loss_delta, 0.0);
        assert_eq!(cmp.max_dim_deviation_delta, 0.0);
    }

    #[test]
    fn csv_has_header_and_full_rows() {
        let (init, gt) = small_case();
        let cfg = SgdConfig {
            iterations: 5,
            ..SgdConfig::default()
        };
        let log = run_toy(
            &init,
            &gt,
            &cfg,
            LossKind::Disentangled,
            &HuberParams::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf, 1).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 26);

        let mut thin = Vec::new();
        write_csv(&log, &mut thin, 2).unwrap();
        let thinned = String::from_utf8(thin).unwrap();
        // header + iterations 0, 2, 4, 5 (last row always written)
        assert_eq!(thinned.lines().count(), 5);
    }
}
