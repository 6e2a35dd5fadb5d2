//! Dataset records, the sub-sampling and labelling protocol, and the file
//! formats chips and models travel in.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::image::ComplexImage;

pub mod container;
pub mod labels;
pub mod manifest;
pub mod mstar;
pub mod split;

pub use container::{read_container, write_container, Container};
pub use labels::{derive_labels, multitask_loss, LabelSet, LossTerms, Prediction};
pub use manifest::{read_manifest, write_manifest, ManifestRow};
pub use mstar::{read_mstar, write_mstar, MstarChip};
pub use split::{flip_cross_range, pixel_translate, split_train_val, subsample, ShiftMode, SplitSpec};

/// The ten SOC vehicle classes, in label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetClass {
    #[serde(rename = "2S1")]
    S1,
    #[serde(rename = "BMP2")]
    Bmp2,
    #[serde(rename = "BRDM2")]
    Brdm2,
    #[serde(rename = "BTR60")]
    Btr60,
    #[serde(rename = "BTR70")]
    Btr70,
    #[serde(rename = "D7")]
    D7,
    #[serde(rename = "T62")]
    T62,
    #[serde(rename = "T72")]
    T72,
    #[serde(rename = "ZIL131")]
    Zil131,
    #[serde(rename = "ZSU234")]
    Zsu234,
}

impl TargetClass {
    pub const ALL: [TargetClass; 10] = [
        TargetClass::S1,
        TargetClass::Bmp2,
        TargetClass::Brdm2,
        TargetClass::Btr60,
        TargetClass::Btr70,
        TargetClass::D7,
        TargetClass::T62,
        TargetClass::T72,
        TargetClass::Zil131,
        TargetClass::Zsu234,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Self> {
        Self::ALL
            .get(id)
            .copied()
            .ok_or_else(|| invalid_param(format!("class id {id} outside 0..9")))
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetClass::S1 => "2S1",
            TargetClass::Bmp2 => "BMP2",
            TargetClass::Brdm2 => "BRDM2",
            TargetClass::Btr60 => "BTR60",
            TargetClass::Btr70 => "BTR70",
            TargetClass::D7 => "D7",
            TargetClass::T62 => "T62",
            TargetClass::T72 => "T72",
            TargetClass::Zil131 => "ZIL131",
            TargetClass::Zsu234 => "ZSU234",
        }
    }
}

impl fmt::Display for TargetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetClass {
    type Err = crate::Error;

    /// Accepts the class name, optionally followed by a serial (`T72_SN132`).
    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        let head = up.split(['_', ' ', '-']).next().unwrap_or("");
        Self::ALL
            .into_iter()
            .find(|c| c.name() == head)
            .ok_or_else(|| invalid_param(format!("unknown target class `{s}`")))
    }
}

/// How a record came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Original,
    Flip,
    Pose,
    Subpixel,
    PoseSubpixel,
    Rotation,
    LinearInterp,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Flip => "flip",
            Provenance::Pose => "pose",
            Provenance::Subpixel => "subpixel",
            Provenance::PoseSubpixel => "pose-subpixel",
            Provenance::Rotation => "rotation",
            Provenance::LinearInterp => "linear-interp",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "original" => Provenance::Original,
            "flip" => Provenance::Flip,
            "pose" => Provenance::Pose,
            "subpixel" => Provenance::Subpixel,
            "pose-subpixel" => Provenance::PoseSubpixel,
            "rotation" => Provenance::Rotation,
            "linear-interp" => Provenance::LinearInterp,
            _ => return Err(invalid_param(format!("unknown provenance `{s}`"))),
        })
    }
}

/// One labelled chip.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub image: ComplexImage,
    pub class: TargetClass,
    /// Radians in `[0, 2π)`.
    pub azimuth: f64,
    /// Depression angle, radians.
    pub depression: f64,
    pub provenance: Provenance,
    pub source_id: String,
}

impl DatasetRecord {
    pub fn new(
        image: ComplexImage,
        class: TargetClass,
        azimuth: f64,
        depression: f64,
        provenance: Provenance,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if !azimuth.is_finite() || !depression.is_finite() {
            return Err(invalid_param("record angles must be finite"));
        }
        Ok(Self {
            image,
            class,
            azimuth: wrap_azimuth(azimuth),
            depression,
            provenance,
            source_id: source_id.into(),
        })
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_azimuth(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Maps an angle into `(−π, π]`.
pub fn wrap_signed(theta: f64) -> f64 {
    let w = wrap_azimuth(theta);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Shortest angular distance on the circle.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_signed(a - b).abs()
}
