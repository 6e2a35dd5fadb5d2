//! Loading chips from disk and writing records with their manifest rows.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use sarpose::dataset::container::RecordMeta;
use sarpose::dataset::{read_container, read_mstar, write_container, Container, DatasetRecord, ManifestRow};

const PHOENIX_PREFIX: &[u8] = b"[PhoenixHeaderVer";

/// One input chip.
#[derive(Debug, Clone)]
pub struct Chip {
    pub path: PathBuf,
    /// File name without extension; used to name derived outputs.
    pub stem: String,
    pub record: DatasetRecord,
    pub meta: RecordMeta,
}

fn stem_of(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// `Ok(None)` for files that are neither containers nor Phoenix chips.
pub fn load_chip(path: &Path) -> Result<Option<Chip>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let stem = stem_of(path);
    if bytes.starts_with(sarpose::dataset::container::MAGIC) {
        return match read_container(&bytes)? {
            Container::Record { record, meta } => Ok(Some(Chip {
                path: path.to_path_buf(),
                stem,
                record,
                meta,
            })),
            Container::Model(_) => Ok(None),
        };
    }
    if bytes.starts_with(PHOENIX_PREFIX) {
        let chip = read_mstar(&bytes)?;
        let record = chip.to_record(stem.clone())?;
        return Ok(Some(Chip {
            path: path.to_path_buf(),
            stem,
            record,
            meta: RecordMeta {
                source_file: Some(path.display().to_string()),
                ..Default::default()
            },
        }));
    }
    Ok(None)
}

/// Files under `input` (a file or a directory, not recursive), sorted by name.
pub fn list_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if !input.exists() {
        bail!("input {} does not exist", input.display());
    }
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .with_context(|| format!("listing {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

/// Every readable chip plus per-file failures. Errors if nothing loads.
pub fn load_corpus(input: &Path) -> Result<(Vec<Chip>, Vec<(PathBuf, anyhow::Error)>)> {
    let mut chips = Vec::new();
    let mut failed = Vec::new();
    for p in list_inputs(input)? {
        match load_chip(&p) {
            Ok(Some(c)) => chips.push(c),
            Ok(None) => log::debug!("skipping {}", p.display()),
            Err(e) => failed.push((p, e)),
        }
    }
    for (p, e) in &failed {
        eprintln!("error: {}: {e:#}", p.display());
    }
    if chips.is_empty() {
        return Err(anyhow!("no chips found in {}", input.display()));
    }
    Ok((chips, failed))
}

/// Writes a record container into `dir/name` and returns its manifest row
/// (path relative to `root`).
pub fn write_record(
    root: &Path,
    rel: &Path,
    record: &DatasetRecord,
    meta: &RecordMeta,
    split: &str,
) -> Result<ManifestRow> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let bytes = write_container(&Container::Record {
        record: record.clone(),
        meta: meta.clone(),
    })?;
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(manifest_row(&rel.to_string_lossy(), record, meta, split))
}

pub fn manifest_row(path: &str, record: &DatasetRecord, meta: &RecordMeta, split: &str) -> ManifestRow {
    ManifestRow {
        path: path.to_string(),
        class: record.class.name().to_string(),
        class_id: record.class.id(),
        azimuth_deg: record.azimuth.to_degrees(),
        depression_deg: record.depression.to_degrees(),
        split: split.to_string(),
        provenance: record.provenance.as_str().to_string(),
        source_id: record.source_id.clone(),
        source_azimuth_deg: meta.source_azimuth_rad.map(f64::to_degrees),
        shift_dx_m: meta.shift_m.map(|s| s.0),
        shift_dy_m: meta.shift_m.map(|s| s.1),
    }
}

pub fn write_manifest_file(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    sarpose::dataset::write_manifest(std::io::BufWriter::new(f), rows)?;
    Ok(())
}

/// `<stem>_<kind>_<azimuth>[_dx.._dy..].sarc`
pub fn derived_name(stem: &str, kind: &str, azimuth: f64, shift: Option<(f64, f64)>) -> String {
    let mut s = format!("{stem}_{kind}_{:06.2}", azimuth.to_degrees());
    if let Some((dx, dy)) = shift {
        s.push_str(&format!("_dx{dx:+.3}_dy{dy:+.3}"));
    }
    s.push_str(".sarc");
    s
}
