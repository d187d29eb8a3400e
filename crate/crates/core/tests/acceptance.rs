//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with its runtime and enforcing its runtime budget.

use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use detbox::evalmetrics::{
    assign_difficulty, evaluate_kitti, evaluate_nuscenes_car, DetectionRecord, Difficulty,
    GroundTruthRecord, NuScenesConfig, RecallGrid, Scene, Task,
};
use detbox::formats::{parse_labels, serialize_labels};
use detbox::geometry::{bev_iou, inverse_lift, iou_2d, iou_3d, siou, Box2D, Box3D, Theta10};
use detbox::grad::{check_gradient, LossKind};
use detbox::losses::{disentangled_loss_3d, entangled_loss_3d, GroupDecomposition, HuberParams};
use detbox::sample::{kitti_context, random_theta, random_yaw_box};
use detbox::toyopt::{run_toy, SgdConfig, ToyFixture};

fn criterion(name: &str, budget_secs: f64, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_secs_f64();
    let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
    println!("criterion {name}: {status} ({elapsed:.2} s, budget {budget_secs} s)");
    if let Err(panic) = outcome {
        resume_unwind(panic);
    }
    assert!(
        elapsed < budget_secs,
        "criterion {name} exceeded its {budget_secs} s budget ({elapsed:.2} s)"
    );
}

// ---------------------------------------------------------------------
// 1. AP-flaw reproduction: a single correct, top-scored detection against
//    100 ground truths per difficulty scores 1/11 on the 11-point grid and
//    exactly zero on the 40-point grid.
// ---------------------------------------------------------------------
#[test]
fn criterion_1_ap_flaw_reproduction() {
    criterion("1 (AP-flaw reproduction)", 1.0, || {
        let mut scene = Scene::default();
        for i in 0..100 {
            let col = (i % 10) as f64;
            let row = (i / 10) as f64;
            let gt3d = Box3D::from_center_size_yaw(
                [col * 10.0 - 45.0, 1.0, 10.0 + row * 6.0],
                [1.6, 1.5, 3.9],
                0.3,
            );
            scene.ground_truths.push(GroundTruthRecord {
                label: "Car".into(),
                box2d: Box2D::new(
                    col * 120.0,
                    row * 40.0,
                    col * 120.0 + 100.0,
                    row * 40.0 + 42.0,
                ),
                box3d: Some(gt3d),
                truncation: 0.0,
                occlusion: 0,
                dontcare: false,
            });
        }
        // All 100 ground truths qualify as easy, hence also at moderate and
        // hard: 100 per difficulty pool.
        for gt in &scene.ground_truths {
            assert_eq!(assign_difficulty(gt), Difficulty::Easy);
        }
        scene.detections.push(DetectionRecord {
            label: "Car".into(),
            box2d: scene.ground_truths[0].box2d,
            box3d: scene.ground_truths[0].box3d,
            score: 1.0,
        });

        let report = evaluate_kitti(&[scene], "car", [0.7; 3]).unwrap();
        for task in Task::ALL {
            for difficulty in Difficulty::EVALUATED {
                let entry = report.entry(task, difficulty).unwrap();
                assert_eq!(entry.gt_count, 100);
                assert!(
                    (entry.ap_r11 - 1.0 / 11.0).abs() < 1e-9,
                    "{} {}: AP|R11 = {}",
                    task.name(),
                    difficulty.name(),
                    entry.ap_r11
                );
                assert!(
                    entry.ap_r40.abs() < 1e-9,
                    "{} {}: AP|R40 = {}",
                    task.name(),
                    difficulty.name(),
                    entry.ap_r40
                );
            }
        }
    });
}

// ---------------------------------------------------------------------
// 2. Signed IoU properties over 10,000 random box pairs, plus the
//    hand-derived values.
// ---------------------------------------------------------------------
#[test]
fn criterion_2_siou_properties() {
    criterion("2 (signed IoU properties)", 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let random_box = |rng: &mut ChaCha8Rng| {
            let u1 = rng.random_range(0.0..200.0);
            let v1 = rng.random_range(0.0..200.0);
            Box2D::new(
                u1,
                v1,
                u1 + rng.random_range(1.0..120.0),
                v1 + rng.random_range(1.0..120.0),
            )
        };
        for _ in 0..10_000 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let s_ab = siou(&a, &b).unwrap();
            let s_ba = siou(&b, &a).unwrap();
            assert!((-1.0..=1.0).contains(&s_ab), "sIoU out of range: {s_ab}");
            assert_eq!(s_ab, s_ba, "sIoU asymmetric");
            let plain = iou_2d(&a, &b).unwrap();
            if plain > 0.0 {
                assert!(
                    (s_ab - plain).abs() <= 1e-12,
                    "sIoU {s_ab} != IoU {plain} on overlap"
                );
            }
        }
        // Hand-derived values.
        let a = Box2D::new(0.0, 0.0, 1.0, 1.0);
        let b = Box2D::new(2.0, 2.0, 3.0, 3.0);
        assert_eq!(siou(&a, &b).unwrap(), -1.0 / 3.0);
        let c = Box2D::new(0.0, 0.0, 2.0, 2.0);
        let d = Box2D::new(1.0, 0.0, 3.0, 2.0);
        assert_eq!(siou(&c, &d).unwrap(), 1.0 / 3.0);
    });
}

// ---------------------------------------------------------------------
// 3. Lifting round trip over 1,000 random parametrizations.
// ---------------------------------------------------------------------
#[test]
fn criterion_3_lifting_round_trip() {
    criterion("3 (lifting round trip)", 1.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ctx = kitti_context();
        for _ in 0..1_000 {
            let theta = random_theta(&mut rng, ctx);
            let lifted = theta.lift().unwrap();
            let recovered =
                inverse_lift(&lifted, ctx.anchor, ctx.depth, ctx.ref_size, ctx.intrinsics).unwrap();
            let relifted = recovered.lift().unwrap();
            for row in 0..3 {
                for col in 0..8 {
                    let diff = (relifted.corners()[row][col] - lifted.corners()[row][col]).abs();
                    assert!(diff < 1e-9, "corner deviation {diff:e}");
                }
            }
            // Scalar round trip: non-quaternion coordinates recover within
            // 1e-7 and the quaternion up to sign after normalization.
            let (p, q) = (theta.params(), recovered.params());
            for i in 0..6 {
                assert!((p[i] - q[i]).abs() < 1e-7, "scalar {i} deviates");
            }
            let unit = theta.q.normalized().unwrap().canonicalized();
            let rec_q = recovered.q.canonicalized();
            for (a, b) in unit.components().iter().zip(rec_q.components()) {
                assert!((a - b).abs() < 1e-7, "quaternion deviates");
            }
        }
    });
}

// ---------------------------------------------------------------------
// 4. Gradient correctness: analytic vs central finite differences for both
//    losses at 100 random parametrizations.
// ---------------------------------------------------------------------
#[test]
fn criterion_4_gradient_correctness() {
    criterion("4 (gradient correctness)", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ctx = kitti_context();
        let huber = HuberParams::default();
        for trial in 0..100 {
            let gt = random_theta(&mut rng, ctx).lift().unwrap();
            let theta = random_theta(&mut rng, ctx);
            for kind in [LossKind::Entangled, LossKind::Disentangled] {
                let report = check_gradient(kind, &theta, &gt, &huber, 1e-5).unwrap();
                assert!(
                    report.max_rel_err < 1e-4,
                    "trial {trial} {kind:?}: rel err {}",
                    report.max_rel_err
                );
            }
        }
    });
}

// ---------------------------------------------------------------------
// 5. Disentanglement identities: zero at the ground truth and the
//    single-group perturbation identity for all four groups.
// ---------------------------------------------------------------------
#[test]
fn criterion_5_disentanglement_identities() {
    criterion("5 (disentanglement identities)", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ctx = kitti_context();
        let huber = HuberParams::default();
        let groups = GroupDecomposition::for_3d();

        for trial in 0..100 {
            let gt_theta = random_theta(&mut rng, ctx);
            let gt = gt_theta.lift().unwrap();

            // L_dis(theta_hat, theta_hat) = 0.
            let at_gt = disentangled_loss_3d(&gt_theta, &gt, &huber).unwrap();
            assert!(at_gt.total.abs() <= 1e-10, "nonzero at ground truth");

            // Perturb exactly one group: the disentangled total equals the
            // entangled loss and lives entirely in that group's term.
            let group_idx = trial % 4;
            let mut params = gt_theta.params();
            for &idx in &groups.groups()[group_idx].indices {
                params[idx] += match idx {
                    0 => rng.random_range(-0.2..0.2),       // depth
                    1 | 2 => rng.random_range(-25.0..25.0), // projected center
                    3..=5 => rng.random_range(-0.3..0.3),   // dims
                    _ => rng.random_range(-0.3..0.3),       // rotation
                };
            }
            let theta = Theta10::from_params(params, ctx);
            let dis = disentangled_loss_3d(&theta, &gt, &huber).unwrap();
            let entangled = entangled_loss_3d(&theta, &gt, &huber).unwrap();
            assert!(
                (dis.total - entangled).abs() <= 1e-10,
                "trial {trial}: total {} vs entangled {entangled}",
                dis.total
            );
            for (idx, (name, term)) in dis.terms.iter().enumerate() {
                if idx == group_idx {
                    assert!((term - entangled).abs() <= 1e-10, "{name} term mismatch");
                } else {
                    assert!(term.abs() <= 1e-10, "{name} term should vanish");
                }
            }
        }
    });
}

// ---------------------------------------------------------------------
// 6. Toy experiment on the shipped fixture: deterministic completion, and
//    the disentangled run dominates at the final iterate while the
//    entangled run overshoots the dimensions harder.
// ---------------------------------------------------------------------
#[test]
fn criterion_6_toy_experiment() {
    criterion("6 (toy experiment)", 30.0, || {
        let fixture = ToyFixture::builtin();
        let gt = fixture.gt_box();
        let init = fixture.init_theta().unwrap();
        let cfg = SgdConfig {
            learning_rate: 0.001,
            momentum: 0.9,
            weight_decay: 0.0,
            iterations: 3000,
        };
        let huber = HuberParams::default();

        let entangled = run_toy(&init, &gt, &cfg, LossKind::Entangled, &huber).unwrap();
        let disentangled = run_toy(&init, &gt, &cfg, LossKind::Disentangled, &huber).unwrap();

        // (a) deterministic and complete.
        assert_eq!(entangled.rows.len(), 3001);
        assert_eq!(disentangled.rows.len(), 3001);
        let entangled_again = run_toy(&init, &gt, &cfg, LossKind::Entangled, &huber).unwrap();
        let disentangled_again = run_toy(&init, &gt, &cfg, LossKind::Disentangled, &huber).unwrap();
        assert_eq!(
            entangled, entangled_again,
            "entangled run not deterministic"
        );
        assert_eq!(
            disentangled, disentangled_again,
            "disentangled run not deterministic"
        );

        // (b) the disentangled run minimizes the entangled loss at least as
        // well by the final iterate.
        assert!(
            disentangled.final_entangled_loss() <= entangled.final_entangled_loss(),
            "disentangled {} > entangled {}",
            disentangled.final_entangled_loss(),
            entangled.final_entangled_loss()
        );

        // (c) the entangled run deviates harder in the dimensions.
        let (ent_dev, _) = entangled.max_dimension_deviation();
        let (dis_dev, _) = disentangled.max_dimension_deviation();
        assert!(
            ent_dev > dis_dev,
            "dimension deviation: entangled {ent_dev} vs disentangled {dis_dev}"
        );
    });
}

// ---------------------------------------------------------------------
// 7. Rotated IoU against a stratified Monte-Carlo sampling oracle.
// ---------------------------------------------------------------------

/// Point-in-convex-quad test by consistent edge sides (oracle-local).
fn point_in_quad(quad: &[[f64; 2]; 4], p: [f64; 2]) -> bool {
    let mut positive = false;
    let mut negative = false;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        if cross > 0.0 {
            positive = true;
        }
        if cross < 0.0 {
            negative = true;
        }
    }
    !(positive && negative)
}

fn footprint_quad(b: &Box3D) -> [[f64; 2]; 4] {
    // Bottom face in canonical corner order, straight from the corner
    // matrix (independent of the clipping-based production path).
    [2usize, 3, 7, 6].map(|col| {
        let c = b.corner(col);
        [c[0], c[2]]
    })
}

fn quad_aabb(q: &[[f64; 2]; 4]) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in q {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Stratified (jittered-grid) Monte-Carlo estimate of the BEV IoU.
fn mc_bev_iou(a: &Box3D, b: &Box3D, rng: &mut ChaCha8Rng) -> f64 {
    let (qa, qb) = (footprint_quad(a), footprint_quad(b));
    let (sa, sb) = (a.size(), b.size());
    let (area_a, area_b) = (sa[0] * sa[2], sb[0] * sb[2]);
    let (lo_a, hi_a) = quad_aabb(&qa);
    let (lo_b, hi_b) = quad_aabb(&qb);
    let lo = [lo_a[0].max(lo_b[0]), lo_a[1].max(lo_b[1])];
    let hi = [hi_a[0].min(hi_b[0]), hi_a[1].min(hi_b[1])];
    let inter = if lo[0] >= hi[0] || lo[1] >= hi[1] {
        0.0
    } else {
        const CELLS: usize = 1000; // 1e6 samples
        let dx = (hi[0] - lo[0]) / CELLS as f64;
        let dz = (hi[1] - lo[1]) / CELLS as f64;
        let mut hits = 0usize;
        for i in 0..CELLS {
            for j in 0..CELLS {
                let p = [
                    lo[0] + (i as f64 + rng.random_range(0.0..1.0)) * dx,
                    lo[1] + (j as f64 + rng.random_range(0.0..1.0)) * dz,
                ];
                if point_in_quad(&qa, p) && point_in_quad(&qb, p) {
                    hits += 1;
                }
            }
        }
        hits as f64 / (CELLS * CELLS) as f64 * (hi[0] - lo[0]) * (hi[1] - lo[1])
    };
    inter / (area_a + area_b - inter)
}

struct BoxFrame {
    center: [f64; 3],
    axes: [[f64; 3]; 3],
    half_sq: [f64; 3],
}

impl BoxFrame {
    fn of(b: &Box3D) -> Self {
        let c0 = b.corner(0);
        let axes = [1usize, 3, 4].map(|col| {
            let c = b.corner(col);
            [c[0] - c0[0], c[1] - c0[1], c[2] - c0[2]]
        });
        let half_sq = axes.map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 2.0);
        Self {
            center: b.center(),
            axes,
            half_sq,
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        let d = [
            p[0] - self.center[0],
            p[1] - self.center[1],
            p[2] - self.center[2],
        ];
        (0..3).all(|i| {
            let dot = d[0] * self.axes[i][0] + d[1] * self.axes[i][1] + d[2] * self.axes[i][2];
            dot.abs() <= self.half_sq[i]
        })
    }
}

fn box_aabb(b: &Box3D) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for col in 0..8 {
        let c = b.corner(col);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    (lo, hi)
}

/// Stratified Monte-Carlo estimate of the full 3D IoU.
fn mc_iou_3d(a: &Box3D, b: &Box3D, rng: &mut ChaCha8Rng) -> f64 {
    let (fa, fb) = (BoxFrame::of(a), BoxFrame::of(b));
    let (va, vb) = (a.volume(), b.volume());
    let (lo_a, hi_a) = box_aabb(a);
    let (lo_b, hi_b) = box_aabb(b);
    let lo = [
        lo_a[0].max(lo_b[0]),
        lo_a[1].max(lo_b[1]),
        lo_a[2].max(lo_b[2]),
    ];
    let hi = [
        hi_a[0].min(hi_b[0]),
        hi_a[1].min(hi_b[1]),
        hi_a[2].min(hi_b[2]),
    ];
    let inter = if (0..3).any(|i| lo[i] >= hi[i]) {
        0.0
    } else {
        const CELLS: usize = 102; // 102^3 > 1e6 samples
        let d = [
            (hi[0] - lo[0]) / CELLS as f64,
            (hi[1] - lo[1]) / CELLS as f64,
            (hi[2] - lo[2]) / CELLS as f64,
        ];
        let mut hits = 0usize;
        for i in 0..CELLS {
            for j in 0..CELLS {
                for k in 0..CELLS {
                    let p = [
                        lo[0] + (i as f64 + rng.random_range(0.0..1.0)) * d[0],
                        lo[1] + (j as f64 + rng.random_range(0.0..1.0)) * d[1],
                        lo[2] + (k as f64 + rng.random_range(0.0..1.0)) * d[2],
                    ];
                    if fa.contains(p) && fb.contains(p) {
                        hits += 1;
                    }
                }
            }
        }
        let region: f64 = (0..3).map(|i| hi[i] - lo[i]).product();
        hits as f64 / (CELLS * CELLS * CELLS) as f64 * region
    };
    inter / (va + vb - inter)
}

#[test]
fn criterion_7_rotated_iou_oracle() {
    criterion("7 (rotated IoU oracle)", 60.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for pair in 0..100 {
            let a = random_yaw_box(&mut rng);
            // Keep the second box in the neighborhood so overlap cases
            // dominate over trivially disjoint ones.
            let ca = a.center();
            let b = Box3D::from_center_size_yaw(
                [
                    ca[0] + rng.random_range(-2.0..2.0),
                    ca[1] + rng.random_range(-0.8..0.8),
                    ca[2] + rng.random_range(-2.5..2.5),
                ],
                [
                    rng.random_range(0.8..2.5),
                    rng.random_range(0.8..2.2),
                    rng.random_range(1.5..5.0),
                ],
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );

            let fast_bev = bev_iou(&a, &b).unwrap();
            let oracle_bev = mc_bev_iou(&a, &b, &mut rng);
            assert!(
                (fast_bev - oracle_bev).abs() < 2e-3,
                "pair {pair}: bev {fast_bev} vs oracle {oracle_bev}"
            );

            let fast_3d = iou_3d(&a, &b).unwrap();
            let oracle_3d = mc_iou_3d(&a, &b, &mut rng);
            assert!(
                (fast_3d - oracle_3d).abs() < 2e-3,
                "pair {pair}: 3d {fast_3d} vs oracle {oracle_3d}"
            );
        }
    });
}

// ---------------------------------------------------------------------
// 8. Evaluator equivalence against an independent brute-force matcher.
// ---------------------------------------------------------------------

/// Reference evaluator: naive O(n^2) loops implementing the documented
/// matching semantics, difficulty thresholds written out literally, and a
/// literal max-scan interpolation. Overlaps use the same geometric
/// primitives (their accuracy is covered by criterion 7).
mod reference {
    use super::*;

    fn difficulty_rank(gt: &GroundTruthRecord) -> usize {
        // 0 = easy, 1 = moderate, 2 = hard, 3 = ignored
        let h = gt.box2d.v2 - gt.box2d.v1;
        if h >= 40.0 && gt.occlusion <= 0 && gt.truncation <= 0.15 {
            0
        } else if h >= 25.0 && gt.occlusion <= 1 && gt.truncation <= 0.30 {
            1
        } else if h >= 25.0 && gt.occlusion <= 2 && gt.truncation <= 0.50 {
            2
        } else {
            3
        }
    }

    fn overlap(task: Task, det: &DetectionRecord, gt: &GroundTruthRecord) -> Option<f64> {
        match task {
            Task::TwoD => iou_2d(&det.box2d, &gt.box2d).ok(),
            Task::Bev => bev_iou(det.box3d.as_ref()?, gt.box3d.as_ref()?).ok(),
            Task::ThreeD => iou_3d(det.box3d.as_ref()?, gt.box3d.as_ref()?).ok(),
        }
    }

    /// AP on one (task, difficulty, grid) cell.
    pub fn ap(
        scenes: &[Scene],
        class: &str,
        task: Task,
        difficulty_idx: usize,
        tau: f64,
        grid_points: &[f64],
    ) -> f64 {
        let mut flagged: Vec<(f64, bool)> = Vec::new();
        let mut total_gt = 0usize;
        for scene in scenes {
            let dets: Vec<&DetectionRecord> = scene
                .detections
                .iter()
                .filter(|d| d.label.eq_ignore_ascii_case(class))
                .collect();
            let gts: Vec<&GroundTruthRecord> = scene
                .ground_truths
                .iter()
                .filter(|g| !g.dontcare && g.label.eq_ignore_ascii_case(class))
                .collect();
            let dontcare: Vec<&GroundTruthRecord> =
                scene.ground_truths.iter().filter(|g| g.dontcare).collect();
            let ignored: Vec<bool> = gts
                .iter()
                .map(|g| difficulty_rank(g) > difficulty_idx)
                .collect();
            total_gt += ignored.iter().filter(|&&ig| !ig).count();

            // Score order, ties by input order.
            let mut order: Vec<usize> = (0..dets.len()).collect();
            order.sort_by(|&x, &y| {
                dets[y]
                    .score
                    .partial_cmp(&dets[x].score)
                    .unwrap_or(std::cmp::Ordering::Equal)
            });

            let mut matched = vec![false; gts.len()];
            // (score, is_tp) in original det order, ignored dets skipped.
            let mut scene_flags: Vec<Option<(f64, bool)>> = vec![None; dets.len()];
            for &di in &order {
                let det = dets[di];
                let mut best_gt: Option<usize> = None;
                let mut best_quality = f64::NEG_INFINITY;
                for (gi, gt) in gts.iter().enumerate() {
                    if ignored[gi] || matched[gi] {
                        continue;
                    }
                    if let Some(value) = overlap(task, det, gt) {
                        if value >= tau && value > best_quality {
                            best_quality = value;
                            best_gt = Some(gi);
                        }
                    }
                }
                if let Some(gi) = best_gt {
                    matched[gi] = true;
                    scene_flags[di] = Some((det.score, true));
                    continue;
                }
                let mut is_ignored = false;
                for (gi, gt) in gts.iter().enumerate() {
                    if ignored[gi] {
                        if let Some(value) = overlap(task, det, gt) {
                            if value >= tau {
                                is_ignored = true;
                            }
                        }
                    }
                }
                for dc in &dontcare {
                    let det_area = det.box2d.area();
                    if det_area > 0.0 && det.box2d.intersection_area(&dc.box2d) / det_area > tau {
                        is_ignored = true;
                    }
                }
                if !is_ignored {
                    scene_flags[di] = Some((det.score, false));
                }
            }
            flagged.extend(scene_flags.into_iter().flatten());
        }

        // Raw curve in global score order (stable).
        let mut order: Vec<usize> = (0..flagged.len()).collect();
        order.sort_by(|&x, &y| {
            flagged[y]
                .0
                .partial_cmp(&flagged[x].0)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut raw: Vec<(f64, f64)> = Vec::new();
        let (mut tp, mut fp) = (0usize, 0usize);
        for idx in order {
            if flagged[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            raw.push((tp as f64 / total_gt as f64, tp as f64 / (tp + fp) as f64));
        }

        // Literal interpolation: max precision at recall >= r.
        let mut sum = 0.0;
        for &r in grid_points {
            let mut best = 0.0_f64;
            for &(recall, precision) in &raw {
                if recall >= r {
                    best = best.max(precision);
                }
            }
            sum += best;
        }
        sum / grid_points.len() as f64
    }
}

#[test]
fn criterion_8_evaluator_oracle_equivalence() {
    criterion("8 (evaluator oracle equivalence)", 10.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut scenes = Vec::new();
        for _ in 0..100 {
            let mut scene = Scene::default();
            let n_gt = rng.random_range(1..=6);
            for g in 0..n_gt {
                let z = rng.random_range(6.0..45.0);
                let height = rng.random_range(18.0..90.0);
                let u1 = rng.random_range(0.0..1000.0);
                let v1 = rng.random_range(100.0..250.0);
                let gt3d = Box3D::from_center_size_yaw(
                    [
                        rng.random_range(-20.0..20.0) + g as f64 * 15.0,
                        rng.random_range(0.8..2.0),
                        z + g as f64 * 10.0,
                    ],
                    [
                        rng.random_range(1.4..1.8),
                        rng.random_range(1.3..1.7),
                        rng.random_range(3.4..4.4),
                    ],
                    rng.random_range(-3.1..3.1),
                );
                scene.ground_truths.push(GroundTruthRecord {
                    label: "Car".into(),
                    box2d: Box2D::new(u1, v1, u1 + height * 2.2, v1 + height),
                    box3d: Some(gt3d),
                    truncation: rng.random_range(0.0..0.6),
                    occlusion: rng.random_range(0..4),
                    dontcare: false,
                });
            }
            if rng.random_range(0.0..1.0) < 0.4 {
                let u1 = rng.random_range(0.0..1100.0);
                let v1 = rng.random_range(100.0..250.0);
                scene.ground_truths.push(GroundTruthRecord {
                    label: "DontCare".into(),
                    box2d: Box2D::new(u1, v1, u1 + 90.0, v1 + 45.0),
                    box3d: None,
                    truncation: -1.0,
                    occlusion: -1,
                    dontcare: true,
                });
            }
            // Detections: jittered copies of ground truth plus spurious ones.
            let gt_snapshot: Vec<GroundTruthRecord> = scene.ground_truths.clone();
            for gt in gt_snapshot.iter().filter(|g| !g.dontcare) {
                if rng.random_range(0.0..1.0) < 0.85 {
                    let jitter_u = rng.random_range(-6.0..6.0);
                    let jitter_v = rng.random_range(-4.0..4.0);
                    let offset = [
                        rng.random_range(-0.4..0.4),
                        rng.random_range(-0.2..0.2),
                        rng.random_range(-0.5..0.5),
                    ];
                    scene.detections.push(DetectionRecord {
                        label: "Car".into(),
                        box2d: Box2D::new(
                            gt.box2d.u1 + jitter_u,
                            gt.box2d.v1 + jitter_v,
                            gt.box2d.u2 + jitter_u,
                            gt.box2d.v2 + jitter_v,
                        ),
                        box3d: gt.box3d.map(|b| b.translated(offset)),
                        score: rng.random_range(0.05..1.0),
                    });
                }
            }
            for _ in 0..rng.random_range(0..3) {
                let u1 = rng.random_range(0.0..1100.0);
                let v1 = rng.random_range(100.0..250.0);
                let h = rng.random_range(20.0..70.0);
                scene.detections.push(DetectionRecord {
                    label: "Car".into(),
                    box2d: Box2D::new(u1, v1, u1 + h * 2.0, v1 + h),
                    box3d: Some(Box3D::from_center_size_yaw(
                        [
                            rng.random_range(-30.0..30.0),
                            1.2,
                            rng.random_range(50.0..90.0),
                        ],
                        [1.6, 1.5, 3.9],
                        rng.random_range(-3.1..3.1),
                    )),
                    score: rng.random_range(0.05..1.0),
                });
            }
            scenes.push(scene);
        }

        let report = evaluate_kitti(&scenes, "car", [0.7; 3]).unwrap();
        for task in Task::ALL {
            for (d_idx, difficulty) in Difficulty::EVALUATED.into_iter().enumerate() {
                for grid in [RecallGrid::R11, RecallGrid::R40] {
                    let fast = report.ap(task, difficulty, grid).unwrap();
                    let slow = reference::ap(&scenes, "car", task, d_idx, 0.7, &grid.points());
                    assert_eq!(
                        fast,
                        slow,
                        "task {} difficulty {} grid {:?}",
                        task.name(),
                        difficulty.name(),
                        grid
                    );
                }
            }
        }
    });
}

// ---------------------------------------------------------------------
// 9. nuScenes-mode sanity: perfect detections and a uniform 1.5 m offset.
// ---------------------------------------------------------------------
#[test]
fn criterion_9_nuscenes_sanity() {
    criterion("9 (nuScenes-mode sanity)", 5.0, || {
        let build_scenes = |offset: [f64; 3]| -> Vec<Scene> {
            let mut scene = Scene::default();
            for i in 0..8 {
                let center = [i as f64 * 7.0 - 24.0, 1.2, 12.0 + 3.0 * i as f64];
                let gt_box = Box3D::from_center_size_yaw(center, [1.6, 1.5, 4.0], 0.5);
                scene.ground_truths.push(GroundTruthRecord {
                    label: "car".into(),
                    box2d: Box2D::new(0.0, 0.0, 10.0, 10.0),
                    box3d: Some(gt_box),
                    truncation: 0.0,
                    occlusion: 0,
                    dontcare: false,
                });
                scene.detections.push(DetectionRecord {
                    label: "car".into(),
                    box2d: Box2D::new(0.0, 0.0, 10.0, 10.0),
                    box3d: Some(Box3D::from_center_size_yaw(
                        [
                            center[0] + offset[0],
                            center[1] + offset[1],
                            center[2] + offset[2],
                        ],
                        [1.6, 1.5, 4.0],
                        0.5,
                    )),
                    score: 1.0 - 0.02 * i as f64,
                });
            }
            vec![scene]
        };

        let config = NuScenesConfig::default();

        let perfect = evaluate_nuscenes_car(&build_scenes([0.0; 3]), &config).unwrap();
        for &(d, ap) in &perfect.ap {
            assert!((ap - 1.0).abs() < 1e-9, "perfect AP at {d}: {ap}");
        }
        let errors = perfect.tp_errors.unwrap();
        assert!(errors.ate.abs() < 1e-9);
        assert!(errors.ase.abs() < 1e-9);
        assert!(errors.aoe.abs() < 1e-9);

        // 1.5 m ground-plane offset (x direction).
        let offset = evaluate_nuscenes_car(&build_scenes([1.5, 0.0, 0.0]), &config).unwrap();
        for &(d, ap) in &offset.ap {
            if d < 1.5 {
                assert!(ap.abs() < 1e-9, "AP at {d}: {ap}");
            } else {
                assert!((ap - 1.0).abs() < 1e-9, "AP at {d}: {ap}");
            }
        }
        let errors = offset.tp_errors.unwrap();
        assert!((errors.ate - 1.5).abs() < 1e-9, "ATE {}", errors.ate);
    });
}

// ---------------------------------------------------------------------
// 10. KITTI label format round trip on the 50-row fixture.
// ---------------------------------------------------------------------
#[test]
fn criterion_10_format_round_trip() {
    criterion("10 (format round trip)", 1.0, || {
        let text = include_str!("../fixtures/kitti_labels_50.txt");
        let rows = parse_labels(text).unwrap();
        assert_eq!(rows.len(), 50);
        let first = serialize_labels(&rows);
        assert_eq!(first, text, "first serialization must be byte-identical");
        let reparsed = parse_labels(&first).unwrap();
        let second = serialize_labels(&reparsed);
        assert_eq!(first, second, "second serialization must be byte-identical");
    });
}
