//! KITTI text formats (labels, detections, calibration), a flat
//! single-class format for nuScenes-style evaluation, and the annotation
//! preprocessing filters (dontcare-overlap conversion, full-occlusion
//! deletion).

use std::collections::BTreeMap;

use crate::evalmetrics::{DetectionRecord, GroundTruthRecord, Scene};
use crate::geometry::{Box2D, Box3D, Intrinsics};

/// Format-level failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("detection row has no score field")]
    MissingScore,
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

/// One row of a KITTI label or detection file: 15 whitespace-separated
/// fields, detections append a 16th score field.
///
/// Dimensions are stored in file order (height, width, length); the
/// location is the bottom-face center in camera coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabelRow {
    pub object_type: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// left, top, right, bottom (pixels).
    pub bbox: [f64; 4],
    /// height, width, length (meters).
    pub dimensions: [f64; 3],
    /// x, y, z of the bottom-face center (meters).
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabelRow {
    pub fn parse_line(line: &str, line_number: usize) -> Result<Self, FormatError> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 15 && fields.len() != 16 {
            return Err(parse_err(
                line_number,
                format!("expected 15 or 16 fields, found {}", fields.len()),
            ));
        }
        let num = |idx: usize| -> Result<f64, FormatError> {
            fields[idx]
                .parse::<f64>()
                .map_err(|e| parse_err(line_number, format!("field {}: {e}", idx + 1)))
        };
        let object_type = fields[0].to_string();
        let truncation = num(1)?;
        let occlusion = fields[2]
            .parse::<f64>()
            .map_err(|e| parse_err(line_number, format!("field 3: {e}")))?
            as i32;
        let row = Self {
            object_type,
            truncation,
            occlusion,
            alpha: num(3)?,
            bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
            dimensions: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
            score: if fields.len() == 16 {
                Some(num(15)?)
            } else {
                None
            },
        };
        if !row.is_dontcare() && (row.bbox[2] <= row.bbox[0] || row.bbox[3] <= row.bbox[1]) {
            return Err(parse_err(line_number, "2D box corners are inverted"));
        }
        Ok(row)
    }

    /// Serialize in KITTI format: floats with two decimal places, occlusion
    /// as an integer.
    pub fn serialize(&self) -> String {
        let mut fields = vec![
            self.object_type.clone(),
            format!("{:.2}", self.truncation),
            format!("{}", self.occlusion),
            format!("{:.2}", self.alpha),
        ];
        fields.extend(self.bbox.iter().map(|v| format!("{v:.2}")));
        fields.extend(self.dimensions.iter().map(|v| format!("{v:.2}")));
        fields.extend(self.location.iter().map(|v| format!("{v:.2}")));
        fields.push(format!("{:.2}", self.rotation_y));
        if let Some(score) = self.score {
            fields.push(format!("{score:.2}"));
        }
        fields.join(" ")
    }

    pub fn is_dontcare(&self) -> bool {
        self.object_type.eq_ignore_ascii_case("dontcare")
    }

    pub fn box2d(&self) -> Box2D {
        Box2D::new(self.bbox[0], self.bbox[1], self.bbox[2], self.bbox[3])
    }

    /// Camera-space cuboid in canonical corner order. KITTI dimensions are
    /// (h, w, l) with the length along the object x-axis and the width
    /// along z; the location marks the bottom-face center, so the
    /// geometric center sits half a height above it (y points down).
    pub fn box3d(&self) -> Option<Box3D> {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        if h <= 0.0 || w <= 0.0 || l <= 0.0 || z <= 0.0 {
            return None;
        }
        Some(Box3D::from_center_size_yaw(
            [x, y - h / 2.0, z],
            [l, h, w],
            self.rotation_y,
        ))
    }

    pub fn to_ground_truth(&self) -> GroundTruthRecord {
        GroundTruthRecord {
            label: self.object_type.clone(),
            box2d: self.box2d(),
            box3d: self.box3d(),
            truncation: self.truncation,
            occlusion: self.occlusion,
            dontcare: self.is_dontcare(),
        }
    }

    pub fn to_detection(&self) -> Result<DetectionRecord, FormatError> {
        Ok(DetectionRecord {
            label: self.object_type.clone(),
            box2d: self.box2d(),
            box3d: self.box3d(),
            score: self.score.ok_or(FormatError::MissingScore)?,
        })
    }
}

/// Parse a KITTI label or detection file (one object per line).
pub fn parse_labels(text: &str) -> Result<Vec<KittiLabelRow>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| KittiLabelRow::parse_line(line, idx + 1))
        .collect()
}

/// Serialize rows to file content, one per line with a trailing newline.
pub fn serialize_labels(rows: &[KittiLabelRow]) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&row.serialize());
        out.push('\n');
    }
    out
}

/// KITTI calibration file: `key: 12 floats` per projection matrix line.
#[derive(Debug, Clone, PartialEq)]
pub struct KittiCalib {
    /// Row-major 3x4 left color camera projection matrix.
    pub p2: [f64; 12],
}

impl KittiCalib {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        for (idx, line) in text.lines().enumerate() {
            let Some((key, rest)) = line.split_once(':') else {
                continue;
            };
            if key.trim() != "P2" {
                continue;
            }
            let values: Result<Vec<f64>, _> =
                rest.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let values = values.map_err(|e| parse_err(idx + 1, format!("bad float in P2: {e}")))?;
            if values.len() != 12 {
                return Err(parse_err(
                    idx + 1,
                    format!("P2 expects 12 values, found {}", values.len()),
                ));
            }
            let mut p2 = [0.0; 12];
            p2.copy_from_slice(&values);
            let calib = Self { p2 };
            if calib.intrinsics().fx <= 0.0 || calib.intrinsics().fy <= 0.0 {
                return Err(parse_err(idx + 1, "P2 focal lengths must be positive"));
            }
            return Ok(calib);
        }
        Err(parse_err(0, "no P2 line found"))
    }

    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics::new(self.p2[0], self.p2[5], self.p2[2], self.p2[6])
    }
}

/// Counts reported by [`preprocess_labels`].
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct PreprocessReport {
    /// Non-dontcare objects in the input.
    pub positives: usize,
    /// Positives converted to dontcare (overlap with a dontcare region).
    pub converted: usize,
    /// Positives deleted (fully occluded by nearer objects).
    pub deleted: usize,
}

impl PreprocessReport {
    pub fn merged(self, other: Self) -> Self {
        Self {
            positives: self.positives + other.positives,
            converted: self.converted + other.converted,
            deleted: self.deleted + other.deleted,
        }
    }

    pub fn converted_percent(&self) -> f64 {
        if self.positives == 0 {
            0.0
        } else {
            100.0 * self.converted as f64 / self.positives as f64
        }
    }

    pub fn deleted_percent(&self) -> f64 {
        if self.positives == 0 {
            0.0
        } else {
            100.0 * self.deleted as f64 / self.positives as f64
        }
    }
}

/// Fraction of `target` covered by the union of `covers` (exact, via
/// coordinate compression).
fn union_coverage(target: &Box2D, covers: &[Box2D]) -> f64 {
    let area = target.area();
    if area <= 0.0 || covers.is_empty() {
        return 0.0;
    }
    let mut xs = vec![target.u1, target.u2];
    let mut ys = vec![target.v1, target.v2];
    for b in covers {
        for x in [b.u1, b.u2] {
            if x > target.u1 && x < target.u2 {
                xs.push(x);
            }
        }
        for y in [b.v1, b.v2] {
            if y > target.v1 && y < target.v2 {
                ys.push(y);
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut covered = 0.0;
    for xi in xs.windows(2) {
        for yi in ys.windows(2) {
            let (cx, cy) = ((xi[0] + xi[1]) / 2.0, (yi[0] + yi[1]) / 2.0);
            if covers
                .iter()
                .any(|b| cx > b.u1 && cx < b.u2 && cy > b.v1 && cy < b.v2)
            {
                covered += (xi[1] - xi[0]) * (yi[1] - yi[0]);
            }
        }
    }
    covered / area
}

/// Preprocess the labels of one image:
///
/// 1. positives whose IoU with any dontcare region exceeds 0.5 become
///    dontcare themselves (iterated to a fixpoint so the pass is
///    idempotent); converted rows keep their numeric fields;
/// 2. positives whose 2D box is covered at least `coverage_threshold` by
///    the union of boxes of strictly nearer objects are deleted.
pub fn preprocess_labels(
    rows: &[KittiLabelRow],
    coverage_threshold: f64,
) -> (Vec<KittiLabelRow>, PreprocessReport) {
    let mut rows = rows.to_vec();
    let mut report = PreprocessReport {
        positives: rows.iter().filter(|r| !r.is_dontcare()).count(),
        ..PreprocessReport::default()
    };

    loop {
        let dontcare: Vec<Box2D> = rows
            .iter()
            .filter(|r| r.is_dontcare())
            .map(|r| r.box2d())
            .filter(|b| b.is_valid())
            .collect();
        let mut changed = false;
        for row in rows.iter_mut() {
            if row.is_dontcare() || !row.box2d().is_valid() {
                continue;
            }
            let overlaps = dontcare
                .iter()
                .any(|dc| crate::geometry::iou_2d(&row.box2d(), dc).is_ok_and(|iou| iou > 0.5));
            if overlaps {
                row.object_type = "DontCare".to_string();
                report.converted += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Occluders: anything with a valid 3D placement, including rows just
    // converted to dontcare (the physical object still occludes).
    let occluders: Vec<(f64, Box2D)> = rows
        .iter()
        .filter(|r| r.box3d().is_some())
        .map(|r| (r.location[2], r.box2d()))
        .collect();
    let keep: Vec<bool> = rows
        .iter()
        .map(|row| {
            if row.is_dontcare() || row.box3d().is_none() {
                return true;
            }
            let nearer: Vec<Box2D> = occluders
                .iter()
                .filter(|(z, b)| *z < row.location[2] && *b != row.box2d())
                .map(|(_, b)| *b)
                .collect();
            union_coverage(&row.box2d(), &nearer) < coverage_threshold
        })
        .collect();
    report.deleted = keep.iter().filter(|&&k| !k).count();
    let rows = rows
        .into_iter()
        .zip(keep)
        .filter_map(|(row, k)| k.then_some(row))
        .collect();
    (rows, report)
}

/// Parse the flat single-class 3D box format used for nuScenes-style
/// evaluation: each line is
/// `frame h w l x y z rotation_y [score]`
/// with KITTI conventions (location is the bottom-face center). The 2D box
/// is not part of the format; records carry a placeholder since
/// center-distance matching never consults it. Boxes are returned grouped
/// by frame.
pub fn parse_flat_boxes(
    text: &str,
    with_score: bool,
) -> Result<BTreeMap<String, Scene>, FormatError> {
    let expected = if with_score { 9 } else { 8 };
    let mut by_frame: BTreeMap<String, Scene> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != expected {
            return Err(parse_err(
                idx + 1,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, FormatError> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| parse_err(idx + 1, format!("field {}: {e}", i + 1)))
        };
        let row = KittiLabelRow {
            object_type: "car".into(),
            truncation: 0.0,
            occlusion: 0,
            alpha: 0.0,
            bbox: [0.0, 0.0, 1.0, 1.0],
            dimensions: [num(1)?, num(2)?, num(3)?],
            location: [num(4)?, num(5)?, num(6)?],
            rotation_y: num(7)?,
            score: if with_score { Some(num(8)?) } else { None },
        };
        let scene = by_frame.entry(fields[0].to_string()).or_default();
        if with_score {
            scene.detections.push(row.to_detection()?);
        } else {
            scene.ground_truths.push(row.to_ground_truth());
        }
    }
    Ok(by_frame)
}

/// Merge per-frame ground truth and detections by frame key. Frames
/// present on only one side still produce a scene (missed objects or
/// unmatched detections count against the metrics as they should).
pub fn merge_flat_scenes(
    gts: BTreeMap<String, Scene>,
    dets: BTreeMap<String, Scene>,
) -> Vec<Scene> {
    let mut merged = gts;
    for (frame, det_scene) in dets {
        merged.entry(frame).or_default().detections = det_scene.detections;
    }
    merged.into_values().collect()
}
