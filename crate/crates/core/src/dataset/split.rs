//! Azimuth-uniform sub-sampling, train/validation split, flips and
//! integer translations.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{circular_distance, wrap_azimuth, DatasetRecord, Provenance, TargetClass};
use crate::error::{invalid_input, invalid_param, Result};
use crate::image::{roll, ComplexImage};

/// Translations drawn during training, in pixels.
pub const TRANSLATION_SET: [i32; 7] = [-6, -4, -2, 0, 2, 4, 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of each class kept, one of `2⁻⁵ … 2⁰` in the protocol.
    pub ratio: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            val_fraction: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(invalid_param("ratio must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(invalid_param("validation fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

fn canonical_order(a: &DatasetRecord, b: &DatasetRecord) -> std::cmp::Ordering {
    a.class
        .cmp(&b.class)
        .then(a.azimuth.total_cmp(&b.azimuth))
        .then_with(|| a.source_id.cmp(&b.source_id))
}

fn by_class(records: &[DatasetRecord]) -> BTreeMap<TargetClass, Vec<usize>> {
    let mut map: BTreeMap<TargetClass, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        map.entry(r.class).or_default().push(i);
    }
    map
}

/// Picks `count` of `azimuths` nearest to `count` equally spaced targets
/// starting at `offset`. Each index is used once; ties go to the lower index.
pub(crate) fn pick_uniform(azimuths: &[f64], count: usize, offset: f64) -> Vec<usize> {
    let mut used = vec![false; azimuths.len()];
    let mut picked = Vec::with_capacity(count);
    for j in 0..count.min(azimuths.len()) {
        let target = wrap_azimuth(offset + TAU * j as f64 / count as f64);
        let best = azimuths
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, &a)| (i, circular_distance(a, target)))
            .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = best {
            used[i] = true;
            picked.push(i);
        }
    }
    picked.sort_unstable();
    picked
}

fn class_offset(seed: u64, class: TargetClass, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((class.id() as u64 + 1) << 32));
    rng.random::<f64>() * TAU / count.max(1) as f64
}

/// Keeps `round(R·n)` azimuth-uniform records per class (at least one).
///
/// Output is sorted by class, azimuth and source id.
pub fn subsample(records: &[DatasetRecord], spec: &SplitSpec) -> Result<Vec<DatasetRecord>> {
    spec.validate()?;
    if records.is_empty() {
        return Err(invalid_input("no records to sub-sample"));
    }
    let mut out = Vec::new();
    for (class, idx) in by_class(records) {
        let mut members: Vec<&DatasetRecord> = idx.iter().map(|&i| &records[i]).collect();
        members.sort_by(|a, b| canonical_order(a, b));
        let n = members.len();
        let count = ((spec.ratio * n as f64).round() as usize).clamp(1, n);
        if count == n {
            out.extend(members.into_iter().cloned());
            continue;
        }
        let az: Vec<f64> = members.iter().map(|r| r.azimuth).collect();
        let offset = class_offset(spec.seed, class, count);
        out.extend(pick_uniform(&az, count, offset).into_iter().map(|i| members[i].clone()));
    }
    Ok(out)
}

/// Per class, `round(f·n)` azimuth-uniform records go to validation and the
/// rest to training. Classes with fewer than two records contribute no
/// validation records.
pub fn split_train_val(
    records: &[DatasetRecord],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>)> {
    if records.is_empty() {
        return Err(invalid_input("no records to split"));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(invalid_param("validation fraction must lie in [0, 1)"));
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (class, idx) in by_class(records) {
        let mut members: Vec<&DatasetRecord> = idx.iter().map(|&i| &records[i]).collect();
        members.sort_by(|a, b| canonical_order(a, b));
        let n = members.len();
        if n < 2 {
            log::warn!("class {class} has {n} record(s); none held out for validation");
            train.extend(members.into_iter().cloned());
            continue;
        }
        let count = ((val_fraction * n as f64).round() as usize).min(n - 1);
        let az: Vec<f64> = members.iter().map(|r| r.azimuth).collect();
        let chosen = pick_uniform(&az, count, class_offset(seed.wrapping_add(1), class, count));
        for (i, r) in members.into_iter().enumerate() {
            if chosen.binary_search(&i).is_ok() {
                val.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
    }
    Ok((train, val))
}

/// Mirrors the chip in cross-range and negates the azimuth.
///
/// Original and flipped records toggle into each other; synthetic kinds keep
/// their provenance.
pub fn flip_cross_range(record: &DatasetRecord) -> DatasetRecord {
    let mut data = record.image.data().clone();
    data.invert_axis(ndarray::Axis(1));
    let data = data.as_standard_layout().into_owned();
    DatasetRecord {
        image: ComplexImage::new(data, record.image.pixel_spacing()).expect("finite input"),
        azimuth: wrap_azimuth(TAU - record.azimuth),
        provenance: match record.provenance {
            Provenance::Original => Provenance::Flip,
            Provenance::Flip => Provenance::Original,
            p => p,
        },
        ..record.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMode {
    /// Offsets outside the training set are rejected.
    Strict,
    /// Any offset is applied; unusual ones are logged.
    Lenient,
}

/// Circular integer shift by `(dx, dy)` pixels.
pub fn pixel_translate(img: &ComplexImage, dx: i32, dy: i32, mode: ShiftMode) -> Result<ComplexImage> {
    let allowed = TRANSLATION_SET.contains(&dx) && TRANSLATION_SET.contains(&dy);
    if !allowed {
        match mode {
            ShiftMode::Strict => {
                return Err(invalid_param(format!(
                    "translation ({dx}, {dy}) outside {TRANSLATION_SET:?}"
                )))
            }
            ShiftMode::Lenient => log::warn!("translation ({dx}, {dy}) outside the usual set"),
        }
    }
    Ok(roll(img, dx as isize, dy as isize))
}
