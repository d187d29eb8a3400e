//! Command-line surface: KITTI and nuScenes-style evaluation, annotation
//! preprocessing, the single-box optimization comparison, gradient
//! checking, and the AP-metric demonstration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use detbox::evalmetrics::{
    ap_interpolated, evaluate_kitti, evaluate_nuscenes_car, NuScenesConfig, RecallGrid, Scene,
};
use detbox::formats::{
    merge_flat_scenes, parse_flat_boxes, parse_labels, preprocess_labels, serialize_labels,
    PreprocessReport,
};
use detbox::grad::{check_gradient, LossKind};
use detbox::losses::HuberParams;
use detbox::sample::{kitti_context, random_theta};
use detbox::toyopt::{compare_runs, run_toy, write_csv, SgdConfig, ToyFixture};

#[derive(Parser)]
#[command(
    name = "detbox",
    about = "3D detection-box geometry, losses and evaluation metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate KITTI-format detections: interpolated AP on 2D/BEV/3D.
    Eval(EvalArgs),
    /// Evaluate flat-format car detections with center-distance matching.
    EvalNusc(EvalNuscArgs),
    /// Optimize a single box against the fixture target and log trajectories.
    Toy(ToyArgs),
    /// Apply the annotation filters (dontcare overlap, full occlusion).
    Preprocess(PreprocessArgs),
    /// Verify analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Demonstrate the 11-point AP glitch against the 40-point fix.
    ApFlawDemo(ApFlawDemoArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GridArg {
    R11,
    R40,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    #[value(name = "2d")]
    TwoD,
    Bev,
    #[value(name = "3d")]
    ThreeD,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Entangled,
    Disentangled,
    Both,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of ground-truth label files (KITTI format).
    #[arg(long)]
    gt: PathBuf,
    /// Directory of detection files (KITTI format + score field).
    #[arg(long)]
    det: PathBuf,
    /// Class to evaluate.
    #[arg(long, default_value = "car")]
    class: String,
    #[arg(long, value_enum, default_value_t = GridArg::Both)]
    grid: GridArg,
    #[arg(long, value_enum, default_value_t = CriterionArg::All)]
    criterion: CriterionArg,
    /// IoU threshold applied at every difficulty.
    #[arg(long, default_value_t = 0.7)]
    iou: f64,
    /// Optional minimum score: detections below are dropped before
    /// evaluation (off by default; evaluation normally sees everything).
    #[arg(long)]
    min_score: Option<f64>,
    /// Output JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Optional directory for per-curve CSV exports (one file per task and
    /// difficulty).
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct EvalNuscArgs {
    /// Ground-truth file in the flat box format.
    #[arg(long)]
    gt: PathBuf,
    /// Detection file in the flat box format (with scores).
    #[arg(long)]
    det: PathBuf,
    /// Skip the precision clipping of the official AP normalization and
    /// keep only the low-recall exclusion.
    #[arg(long)]
    no_precision_clip: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ToyArgs {
    /// Fixture file (key = value); the built-in car fixture when omitted.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long, default_value_t = 3000)]
    iters: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 0.0)]
    weight_decay: f64,
    /// Write every n-th trajectory row (the first and last always).
    #[arg(long, default_value_t = 1)]
    log_every: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Directory of label files to filter.
    #[arg(long)]
    labels: PathBuf,
    /// Output directory for the filtered label files.
    #[arg(long)]
    out: PathBuf,
    /// Union-coverage threshold of the full-occlusion rule.
    #[arg(long, default_value_t = 0.95)]
    coverage: f64,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ApFlawDemoArgs {
    /// Ground-truth objects in the synthetic scene.
    #[arg(long, default_value_t = 100)]
    gt_count: usize,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Eval(args) => run_eval(args),
        Command::EvalNusc(args) => run_eval_nusc(args),
        Command::Toy(args) => run_toy_command(args),
        Command::Preprocess(args) => run_preprocess(args),
        Command::Gradcheck(args) => run_gradcheck(args),
        Command::ApFlawDemo(args) => run_ap_flaw_demo(args),
    }
}

fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let gt_files = label_files(&args.gt)?;
    if gt_files.is_empty() {
        bail!("no label files in {}", args.gt.display());
    }
    let mut scenes = Vec::new();
    for gt_path in &gt_files {
        let stem = gt_path.file_name().expect("listed file has a name");
        let gt_rows = parse_labels(&fs::read_to_string(gt_path)?)
            .with_context(|| format!("parsing {}", gt_path.display()))?;
        let det_path = args.det.join(stem);
        let det_rows = if det_path.exists() {
            parse_labels(&fs::read_to_string(&det_path)?)
                .with_context(|| format!("parsing {}", det_path.display()))?
        } else {
            Vec::new()
        };
        let mut scene = Scene {
            ground_truths: gt_rows.iter().map(|r| r.to_ground_truth()).collect(),
            ..Scene::default()
        };
        for row in &det_rows {
            let det = row
                .to_detection()
                .with_context(|| format!("detection row in {}", det_path.display()))?;
            if args.min_score.is_none_or(|min| det.score >= min) {
                scene.detections.push(det);
            }
        }
        scenes.push(scene);
    }

    let report = evaluate_kitti(&scenes, &args.class, [args.iou; 3])?;

    let wanted_tasks: &[&str] = match args.criterion {
        CriterionArg::TwoD => &["2d"],
        CriterionArg::Bev => &["bev"],
        CriterionArg::ThreeD => &["3d"],
        CriterionArg::All => &["2d", "bev", "3d"],
    };
    let mut json = serde_json::to_value(&report)?;
    let tasks = json["tasks"].as_object_mut().expect("tasks object");
    tasks.retain(|task, _| wanted_tasks.contains(&task.as_str()));
    for (_, difficulties) in tasks.iter_mut() {
        for (_, entry) in difficulties.as_object_mut().expect("difficulty map") {
            let entry = entry.as_object_mut().expect("entry object");
            if args.grid == GridArg::R11 {
                entry.remove("ap_r40");
                entry.remove("curve_r40");
            }
            if args.grid == GridArg::R40 {
                entry.remove("ap_r11");
                entry.remove("curve_r11");
            }
        }
    }
    write_json(&args.out, &json)?;

    if let Some(curve_dir) = &args.curves {
        fs::create_dir_all(curve_dir)?;
        for &task in wanted_tasks {
            for difficulty in ["easy", "moderate", "hard"] {
                let entry = &json["tasks"][task][difficulty];
                let mut csv = String::from("grid,recall,precision\n");
                for grid in ["r11", "r40"] {
                    let Some(curve) = entry.get(format!("curve_{grid}")) else {
                        continue;
                    };
                    let points = curve["grid"].as_array().expect("grid array");
                    let interp = curve["interpolated"].as_array().expect("precision array");
                    for (r, p) in points.iter().zip(interp) {
                        csv.push_str(&format!(
                            "{grid},{:.6},{:.6}\n",
                            r.as_f64().unwrap_or(0.0),
                            p.as_f64().unwrap_or(0.0)
                        ));
                    }
                }
                // The raw cumulative curve is grid-independent; take it
                // from whichever grid survived the filter.
                if let Some(curve) = entry.get("curve_r11").or_else(|| entry.get("curve_r40")) {
                    for pair in curve["raw"].as_array().expect("raw array") {
                        csv.push_str(&format!(
                            "raw,{:.6},{:.6}\n",
                            pair[0].as_f64().unwrap_or(0.0),
                            pair[1].as_f64().unwrap_or(0.0)
                        ));
                    }
                }
                let path = curve_dir.join(format!("{task}_{difficulty}.csv"));
                fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }

    for &task in wanted_tasks {
        for difficulty in ["easy", "moderate", "hard"] {
            let entry = &json["tasks"][task][difficulty];
            let mut line = format!("{task:4} {difficulty:9}");
            if args.grid != GridArg::R40 {
                line.push_str(&format!(
                    " AP|R11 {:.6}",
                    entry["ap_r11"].as_f64().unwrap_or(0.0)
                ));
            }
            if args.grid != GridArg::R11 {
                line.push_str(&format!(
                    " AP|R40 {:.6}",
                    entry["ap_r40"].as_f64().unwrap_or(0.0)
                ));
            }
            println!("{line}");
        }
    }
    Ok(())
}

fn run_eval_nusc(args: EvalNuscArgs) -> Result<()> {
    let gts = parse_flat_boxes(&fs::read_to_string(&args.gt)?, false)
        .with_context(|| format!("parsing {}", args.gt.display()))?;
    let dets = parse_flat_boxes(&fs::read_to_string(&args.det)?, true)
        .with_context(|| format!("parsing {}", args.det.display()))?;
    let scenes = merge_flat_scenes(gts, dets);
    let config = NuScenesConfig {
        clip_precision: !args.no_precision_clip,
        ..NuScenesConfig::default()
    };
    let report = evaluate_nuscenes_car(&scenes, &config)?;
    write_json(&args.out, &serde_json::to_value(&report)?)?;

    for &(threshold, ap) in &report.ap {
        println!("AP @ {threshold:.6} m: {ap:.6}");
    }
    println!("mAP: {:.6}", report.mean_ap);
    match report.tp_errors {
        Some(errors) => println!(
            "ATE {:.6} m  ASE {:.6}  AOE {:.6} rad  ({} TP)",
            errors.ate, errors.ase, errors.aoe, report.tp_count
        ),
        None => println!("no true positives at the TP error threshold"),
    }
    Ok(())
}

fn run_toy_command(args: ToyArgs) -> Result<()> {
    let fixture = match &args.fixture {
        Some(path) => {
            ToyFixture::from_file(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ToyFixture::builtin(),
    };
    let gt = fixture.gt_box();
    let init = fixture.init_theta()?;
    let cfg = SgdConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        weight_decay: args.weight_decay,
        iterations: args.iters,
    };
    let huber = HuberParams::default();
    fs::create_dir_all(&args.out_dir)?;

    let modes: Vec<LossKind> = match args.mode {
        ModeArg::Entangled => vec![LossKind::Entangled],
        ModeArg::Disentangled => vec![LossKind::Disentangled],
        ModeArg::Both => vec![LossKind::Entangled, LossKind::Disentangled],
    };
    let mut logs = Vec::new();
    for mode in modes {
        let name = match mode {
            LossKind::Entangled => "entangled",
            LossKind::Disentangled => "disentangled",
        };
        let log = run_toy(&init, &gt, &cfg, mode, &huber)
            .with_context(|| format!("{name} optimization"))?;
        let path = args.out_dir.join(format!("{name}.csv"));
        let mut buf = Vec::new();
        write_csv(&log, &mut buf, args.log_every)?;
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{name}: final entangled loss {:.6} ({} rows) -> {}",
            log.final_entangled_loss(),
            log.rows.len(),
            path.display()
        );
        logs.push(log);
    }

    if logs.len() == 2 {
        let comparison = compare_runs(&logs[0], &logs[1]);
        write_json(
            &args.out_dir.join("summary.json"),
            &serde_json::to_value(&comparison)?,
        )?;
        println!(
            "max dimension deviation: entangled {:.6} @ iter {} vs disentangled {:.6} @ iter {}",
            comparison.first.max_dim_deviation,
            comparison.first.max_dim_deviation_iteration,
            comparison.second.max_dim_deviation,
            comparison.second.max_dim_deviation_iteration
        );
        println!(
            "final entangled-loss delta (entangled - disentangled): {:.6}",
            comparison.final_loss_delta
        );
    }
    Ok(())
}

fn run_preprocess(args: PreprocessArgs) -> Result<()> {
    let files = label_files(&args.labels)?;
    if files.is_empty() {
        bail!("no label files in {}", args.labels.display());
    }
    fs::create_dir_all(&args.out)?;
    let mut total = PreprocessReport::default();
    for path in &files {
        let rows = parse_labels(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let (filtered, report) = preprocess_labels(&rows, args.coverage);
        total = total.merged(report);
        let out_path = args
            .out
            .join(path.file_name().expect("listed file has a name"));
        fs::write(&out_path, serialize_labels(&filtered))
            .with_context(|| format!("writing {}", out_path.display()))?;
    }
    println!(
        "positives {}: converted to dontcare {} ({:.6}%), deleted {} ({:.6}%)",
        total.positives,
        total.converted,
        total.converted_percent(),
        total.deleted,
        total.deleted_percent()
    );
    Ok(())
}

fn run_gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ctx = kitti_context();
    let huber = HuberParams::default();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    for _ in 0..args.trials {
        let gt = random_theta(&mut rng, ctx)
            .lift()
            .context("sampling ground truth")?;
        let theta = random_theta(&mut rng, ctx);
        for (name, kind) in [
            ("entangled", LossKind::Entangled),
            ("disentangled", LossKind::Disentangled),
        ] {
            let report = check_gradient(kind, &theta, &gt, &huber, args.step)?;
            let entry = worst.entry(name).or_insert(0.0);
            *entry = entry.max(report.max_rel_err);
        }
    }
    let mut failed = false;
    for (name, err) in &worst {
        println!(
            "{name}: worst max_rel_err {err:.6e} over {} trials",
            args.trials
        );
        if *err >= 1e-4 {
            failed = true;
        }
    }
    if failed {
        bail!("gradient check exceeded the 1e-4 relative error bound");
    }
    Ok(())
}

fn run_ap_flaw_demo(args: ApFlawDemoArgs) -> Result<()> {
    if args.gt_count == 0 {
        bail!("--gt-count must be positive");
    }
    // One correct detection with the top score against gt_count objects.
    let flags = [(1.0, true)];
    let (ap11, _) = ap_interpolated(&flags, args.gt_count, RecallGrid::R11)?;
    let (ap40, _) = ap_interpolated(&flags, args.gt_count, RecallGrid::R40)?;
    println!("single correct detection, {} ground truths:", args.gt_count);
    println!("AP|R11 = {ap11:.6}");
    println!("AP|R40 = {ap40:.6}");
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, format!("{}\n", serde_json::to_string_pretty(value)?))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
