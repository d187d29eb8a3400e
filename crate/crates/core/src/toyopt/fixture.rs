//! `key = value` fixture files describing a ground-truth box, an
//! initialization and the decoding context for the toy optimization.

use std::collections::HashMap;
use std::path::Path;

use crate::geometry::{
    inverse_lift, Box2D, Box3D, BoxContext, DepthStats, GeometryError, Intrinsics, RefSize, Theta10,
};

/// Fixture parsing and construction failures.
#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("key `{key}` expects {expected} values, found {found}")]
    WrongArity {
        key: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("fixture geometry is invalid: {0}")]
    Geometry(#[from] GeometryError),
}

/// A parsed toy fixture: decoding context plus ground-truth and
/// initialization boxes given as center / size / yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyFixture {
    pub context: BoxContext,
    pub gt_center: [f64; 3],
    pub gt_size: [f64; 3],
    pub gt_yaw: f64,
    pub init_center: [f64; 3],
    pub init_size: [f64; 3],
    pub init_yaw: f64,
}

const BUILTIN: &str = include_str!("../../fixtures/toy_car.txt");

impl ToyFixture {
    /// The fixture shipped with the crate: a car-sized target with an
    /// offset, inflated initialization sharing the rotation axis.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin fixture parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, FixtureError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut values: HashMap<String, Vec<f64>> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line.split_once('=').ok_or(FixtureError::Parse {
                line: idx + 1,
                message: "expected `key = values`".into(),
            })?;
            let parsed: Result<Vec<f64>, _> = rest
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect();
            let parsed = parsed.map_err(|e| FixtureError::Parse {
                line: idx + 1,
                message: format!("bad number: {e}"),
            })?;
            values.insert(key.trim().to_string(), parsed);
        }

        let scalar = |key: &'static str| -> Result<f64, FixtureError> {
            let v = values.get(key).ok_or(FixtureError::MissingKey(key))?;
            if v.len() != 1 {
                return Err(FixtureError::WrongArity {
                    key,
                    expected: 1,
                    found: v.len(),
                });
            }
            Ok(v[0])
        };
        let triple = |key: &'static str| -> Result<[f64; 3], FixtureError> {
            let v = values.get(key).ok_or(FixtureError::MissingKey(key))?;
            if v.len() != 3 {
                return Err(FixtureError::WrongArity {
                    key,
                    expected: 3,
                    found: v.len(),
                });
            }
            Ok([v[0], v[1], v[2]])
        };
        let quad = |key: &'static str| -> Result<[f64; 4], FixtureError> {
            let v = values.get(key).ok_or(FixtureError::MissingKey(key))?;
            if v.len() != 4 {
                return Err(FixtureError::WrongArity {
                    key,
                    expected: 4,
                    found: v.len(),
                });
            }
            Ok([v[0], v[1], v[2], v[3]])
        };

        let anchor = quad("anchor")?;
        Ok(Self {
            context: BoxContext {
                anchor: Box2D::new(anchor[0], anchor[1], anchor[2], anchor[3]),
                depth: DepthStats {
                    mu_z: scalar("mu_z")?,
                    sigma_z: scalar("sigma_z")?,
                },
                ref_size: RefSize {
                    w: scalar("ref_w")?,
                    h: scalar("ref_h")?,
                    d: scalar("ref_d")?,
                },
                intrinsics: Intrinsics::new(
                    scalar("fx")?,
                    scalar("fy")?,
                    scalar("cx")?,
                    scalar("cy")?,
                ),
            },
            gt_center: triple("gt_center")?,
            gt_size: triple("gt_size")?,
            gt_yaw: scalar("gt_yaw_deg")?.to_radians(),
            init_center: triple("init_center")?,
            init_size: triple("init_size")?,
            init_yaw: scalar("init_yaw_deg")?.to_radians(),
        })
    }

    pub fn gt_box(&self) -> Box3D {
        Box3D::from_center_size_yaw(self.gt_center, self.gt_size, self.gt_yaw)
    }

    /// The initialization encoded through the inverse lifting, so it is a
    /// valid parametrization by construction.
    pub fn init_theta(&self) -> Result<Theta10, FixtureError> {
        let init = Box3D::from_center_size_yaw(self.init_center, self.init_size, self.init_yaw);
        Ok(inverse_lift(
            &init,
            self.context.anchor,
            self.context.depth,
            self.context.ref_size,
            self.context.intrinsics,
        )?)
    }
}
