//! Subcommand implementations.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use sarpose::baseline::{linear_interp_pose, magnitude_only, nearest_poses, rotate_pose, PoseNeighborhood};
use sarpose::dataset::container::RecordMeta;
use sarpose::dataset::mstar::fixture_chip;
use sarpose::dataset::{
    flip_cross_range, read_container, split_train_val, subsample, write_container, write_mstar, Container,
    DatasetRecord, ManifestRow, Provenance, TargetClass,
};
use sarpose::image::{normalize_unit_norm, subpixel_shift};
use sarpose::synthesis::{augment_record, enumerate_poses, fit_record, synthesize_pose, SyntheticRecord};
use sarpose::transform::ImageGeometry;
use sarpose::PipelineConfig;

use crate::config::{ensure_dir, RunConfig};
use crate::corpus::{derived_name, load_chip, load_corpus, manifest_row, write_manifest_file, write_record, Chip};
use crate::quicklook::write_quicklook;
use crate::scene::{random_chip, render, SceneFile};

/// Per-file outcome counts of a batch command.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Summary {
    pub ok: usize,
    pub failed: usize,
}

impl Summary {
    /// Batch commands fail only when every item failed.
    pub fn check(self, what: &str) -> Result<Self> {
        if self.ok == 0 && self.failed > 0 {
            bail!("every {what} failed");
        }
        Ok(self)
    }
}

fn write_run_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::write(out.join("run.toml"), cfg.to_toml()?)?;
    Ok(())
}

pub fn ingest(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Summary> {
    let (chips, failed) = load_corpus(input)?;
    let out = ensure_dir(out)?;
    let mut rows = Vec::new();
    for c in &chips {
        let rel = PathBuf::from(format!("{}.sarc", c.stem));
        rows.push(write_record(&out, &rel, &c.record, &c.meta, "corpus")?);
    }
    write_manifest_file(&out.join("manifest.csv"), &rows)?;
    write_run_config(&out, cfg)?;
    println!("ingested {} chip(s), {} failure(s)", chips.len(), failed.len());
    Summary {
        ok: chips.len(),
        failed: failed.len(),
    }
    .check("chip")
}

pub fn phantom(cfg: &RunConfig, out: &Path, scene: Option<&Path>, phoenix: bool) -> Result<Summary> {
    let pipeline = cfg.pipeline()?;
    let out = ensure_dir(out)?;
    let items: Vec<(String, DatasetRecord)> = match scene {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file = SceneFile::parse(&text)?;
            let scene = file.to_scene()?;
            let az = file.azimuth_deg.to_radians();
            let img = render(&scene, az, cfg.phantom.size, cfg.phantom.snr_db, cfg.seed, &pipeline)?;
            let class: TargetClass = file.class.as_deref().unwrap_or("T72").parse()?;
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scene".into());
            let rec = DatasetRecord::new(img, class, az, scene.elevation, Provenance::Original, id.clone())?;
            vec![(id, rec)]
        }
        None => (0..cfg.phantom.count)
            .into_par_iter()
            .map(|i| random_chip(i, cfg.seed, &cfg.phantom, &pipeline))
            .collect::<Result<Vec<_>>>()?,
    };
    let mut rows = Vec::new();
    for (id, rec) in &items {
        if phoenix {
            let chip = fixture_chip(
                rec.image.clone(),
                rec.class,
                rec.azimuth.to_degrees(),
                rec.depression.to_degrees(),
            );
            let rel = format!("{id}.phoenix");
            std::fs::write(out.join(&rel), write_mstar(&chip))?;
            rows.push(manifest_row(&rel, rec, &RecordMeta::default(), "corpus"));
        } else {
            let rel = PathBuf::from(format!("{id}.sarc"));
            rows.push(write_record(&out, &rel, rec, &RecordMeta::default(), "corpus")?);
        }
    }
    write_manifest_file(&out.join("manifest.csv"), &rows)?;
    write_run_config(&out, cfg)?;
    println!("wrote {} phantom chip(s)", items.len());
    Ok(Summary {
        ok: items.len(),
        failed: 0,
    })
}

pub fn dataset(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Summary> {
    let spec = cfg.split_spec()?;
    let (chips, failed) = load_corpus(input)?;
    let missing: Vec<&str> = TargetClass::ALL
        .iter()
        .filter(|c| !chips.iter().any(|ch| ch.record.class == **c))
        .map(|c| c.name())
        .collect();
    if !missing.is_empty() {
        bail!("corpus has no chips of class(es) {}", missing.join(", "));
    }
    let key = |r: &DatasetRecord| (r.class.id(), r.azimuth.to_bits(), r.source_id.clone(), r.provenance);
    let stems: HashMap<_, String> = chips.iter().map(|c| (key(&c.record), c.stem.clone())).collect();
    if stems.len() != chips.len() {
        bail!("corpus contains duplicate records");
    }
    let records: Vec<DatasetRecord> = chips.iter().map(|c| c.record.clone()).collect();
    let kept = subsample(&records, &spec)?;
    let (train, val) = split_train_val(&kept, spec.val_fraction, spec.seed)?;
    let out = ensure_dir(out)?;
    let mut counts = BTreeMap::new();
    for (split, set) in [("train", &train), ("val", &val)] {
        let mut rows = Vec::new();
        for r in set {
            let stem = &stems[&key(r)];
            let flipped = flip_cross_range(r);
            for (rec, suffix) in [(r, ""), (&flipped, "_flip")] {
                let rel = PathBuf::from(split).join(format!("{stem}{suffix}.sarc"));
                rows.push(write_record(&out, &rel, rec, &RecordMeta::default(), split)?);
            }
        }
        counts.insert(split, rows.len());
        write_manifest_file(&out.join(format!("{split}.csv")), &rows)?;
    }
    write_run_config(&out, cfg)?;
    println!(
        "ratio {}: {} selected, train {} / val {} records (flips included)",
        spec.ratio,
        kept.len(),
        counts["train"],
        counts["val"]
    );
    Ok(Summary {
        ok: chips.len(),
        failed: failed.len(),
    })
}

pub fn fit(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Summary> {
    let pipeline = cfg.pipeline()?;
    let (chips, load_failed) = load_corpus(input)?;
    let out = ensure_dir(out)?;
    let results: Vec<Result<_>> = chips
        .par_iter()
        .map(|c| fit_record(&c.record, &pipeline).map_err(anyhow::Error::from))
        .collect();
    let mut report =
        String::from("file,source_id,sigma_g_deg,lambda,objective,residual_fro,iterations,converged,delta_theta_deg\n");
    let mut summary = Summary {
        ok: 0,
        failed: load_failed.len(),
    };
    for (c, r) in chips.iter().zip(results) {
        match r {
            Ok((model, delta)) => {
                let rel = format!("{}.model.sarc", c.stem);
                std::fs::write(out.join(&rel), write_container(&Container::Model(model.clone()))?)?;
                report.push_str(&format!(
                    "{rel},{},{},{},{},{},{},{},{}\n",
                    c.record.source_id,
                    model.sigma_g().to_degrees(),
                    model.fit.lambda,
                    model.fit.objective_trace.last().copied().unwrap_or(f64::NAN),
                    model.fit.residual_fro,
                    model.fit.iterations,
                    model.fit.converged,
                    delta.to_degrees()
                ));
                summary.ok += 1;
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", c.path.display());
                summary.failed += 1;
            }
        }
    }
    std::fs::write(out.join("fit_report.csv"), report)?;
    write_run_config(&out, cfg)?;
    println!("fitted {} chip(s), {} failure(s)", summary.ok, summary.failed);
    summary.check("fit")
}

fn read_model(path: &Path) -> Result<sarpose::ScatteringModel> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match read_container(&bytes)? {
        Container::Model(m) => Ok(m),
        Container::Record { .. } => bail!("{} holds a record, not a model", path.display()),
    }
}

fn require_chip(path: &Path) -> Result<Chip> {
    load_chip(path)?.ok_or_else(|| anyhow!("{} is not a chip", path.display()))
}

fn write_single(path: &Path, record: &DatasetRecord, meta: &RecordMeta) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let bytes = write_container(&Container::Record {
        record: record.clone(),
        meta: meta.clone(),
    })?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn synthesize(cfg: &RunConfig, model: &Path, chip: &Path, azimuth_deg: f64, out: &Path) -> Result<()> {
    let pipeline = cfg.pipeline()?;
    let model = read_model(model)?;
    let chip = require_chip(chip)?;
    let grid = pipeline.source_grid(model.center(), model.elevation)?;
    let theta = model.center() + sarpose::dataset::wrap_signed(azimuth_deg.to_radians() - model.center());
    let img = synthesize_pose(
        &model,
        theta,
        &pipeline.synthesis,
        grid.freqs(),
        &pipeline.window,
        &ImageGeometry::of(&chip.record.image),
        &pipeline.transform,
    )?;
    let sr = SyntheticRecord {
        image: normalize_unit_norm(&img)?,
        azimuth: sarpose::dataset::wrap_azimuth(theta),
        source_azimuth: sarpose::dataset::wrap_azimuth(model.center()),
        kind: Provenance::Pose,
        shift: (0.0, 0.0),
        sigma_g: Some(model.sigma_g()),
        lambda: Some(model.fit.lambda),
        delta_theta: Some(model.max_extrapolation),
    };
    write_single(
        out,
        &sr.to_record(&chip.record)?,
        &sr.meta(Some(chip.path.display().to_string())),
    )?;
    println!("synthesized {:.2} deg -> {}", azimuth_deg, out.display());
    Ok(())
}

pub fn shift(input: &Path, dx: f64, dy: f64, out: &Path) -> Result<()> {
    let chip = require_chip(input)?;
    let img = subpixel_shift(&chip.record.image, dx, dy)?;
    let kind = match chip.record.provenance {
        Provenance::Pose | Provenance::PoseSubpixel => Provenance::PoseSubpixel,
        _ => Provenance::Subpixel,
    };
    let mut rec = chip.record.clone();
    rec.image = img;
    rec.provenance = kind;
    let prior = chip.meta.shift_m.unwrap_or((0.0, 0.0));
    let meta = RecordMeta {
        source_file: Some(chip.path.display().to_string()),
        source_azimuth_rad: chip.meta.source_azimuth_rad.or(Some(chip.record.azimuth)),
        shift_m: Some((prior.0 + dx, prior.1 + dy)),
        ..chip.meta.clone()
    };
    write_single(out, &rec, &meta)?;
    println!("shifted by ({dx}, {dy}) m -> {}", out.display());
    Ok(())
}

pub fn quicklook(inputs: &[PathBuf], out: &Path, dynamic_range_db: f64) -> Result<Summary> {
    let out = ensure_dir(out)?;
    let mut files = Vec::new();
    for i in inputs {
        files.extend(crate::corpus::list_inputs(i)?);
    }
    let mut summary = Summary::default();
    for f in files {
        let res = (|| -> Result<bool> {
            let Some(chip) = load_chip(&f)? else { return Ok(false) };
            write_quicklook(
                &chip.record.image,
                dynamic_range_db,
                &out.join(format!("{}.pgm", chip.stem)),
            )?;
            Ok(true)
        })();
        match res {
            Ok(true) => summary.ok += 1,
            Ok(false) => {}
            Err(e) => {
                eprintln!("error: {}: {e:#}", f.display());
                summary.failed += 1;
            }
        }
    }
    println!("wrote {} quick-look image(s)", summary.ok);
    if summary.ok == 0 && summary.failed == 0 {
        bail!("no chips to render");
    }
    summary.check("quick-look")
}

struct Emitted {
    name: String,
    record: DatasetRecord,
    meta: RecordMeta,
}

fn emit(chip: &Chip, sr: &SyntheticRecord) -> Result<Emitted> {
    let shift = matches!(sr.kind, Provenance::Subpixel | Provenance::PoseSubpixel).then_some(sr.shift);
    Ok(Emitted {
        name: derived_name(&chip.stem, sr.kind.as_str(), sr.azimuth, shift),
        record: sr.to_record(&chip.record)?,
        meta: sr.meta(Some(chip.path.display().to_string())),
    })
}

fn baseline_record(
    image: sarpose::ComplexImage,
    theta: f64,
    source: f64,
    kind: Provenance,
    delta: f64,
) -> Result<SyntheticRecord> {
    Ok(SyntheticRecord {
        image: normalize_unit_norm(&image)?,
        azimuth: sarpose::dataset::wrap_azimuth(theta),
        source_azimuth: source,
        kind,
        shift: (0.0, 0.0),
        sigma_g: None,
        lambda: None,
        delta_theta: Some(delta),
    })
}

fn augment_chip(chip: &Chip, corpus: &[Chip], cfg: &RunConfig, pipeline: &PipelineConfig) -> Result<Vec<Emitted>> {
    let same_class: Vec<&Chip> = corpus.iter().filter(|c| c.record.class == chip.record.class).collect();
    let existing: Vec<f64> = same_class.iter().map(|c| c.record.azimuth).collect();
    let src = chip.record.azimuth;
    let syn = &pipeline.synthesis;
    let delta = cfg.baseline.delta_deg.to_radians();
    let prep = |img: &sarpose::ComplexImage| {
        if cfg.baseline.magnitude_only {
            magnitude_only(img)
        } else {
            img.clone()
        }
    };
    let mut out = Vec::new();
    for method in &cfg.methods {
        match method.as_str() {
            "model" => {
                let aug = augment_record(&chip.record, &existing, pipeline)?;
                for sr in &aug.records {
                    out.push(emit(chip, sr)?);
                }
            }
            "rotation" => {
                for theta in enumerate_poses(src, delta, syn.step, &existing, syn.dedup_tolerance, syn.symmetric) {
                    let img = rotate_pose(&prep(&chip.record.image), src, theta)?;
                    out.push(emit(
                        chip,
                        &baseline_record(img, theta, src, Provenance::Rotation, delta)?,
                    )?);
                }
            }
            "linear-interp" => {
                for theta in enumerate_poses(src, delta, syn.step, &existing, syn.dedup_tolerance, syn.symmetric) {
                    let (a, b) = nearest_poses(&existing, theta)?;
                    let find = |t: f64| {
                        same_class
                            .iter()
                            .find(|c| c.record.azimuth == t)
                            .map(|c| prep(&c.record.image))
                            .ok_or_else(|| anyhow!("no chip at azimuth {t}"))
                    };
                    let nbr = PoseNeighborhood {
                        theta_a: a,
                        image_a: find(a)?,
                        theta_b: b,
                        image_b: find(b)?,
                    };
                    let img = linear_interp_pose(&nbr, theta)?;
                    out.push(emit(
                        chip,
                        &baseline_record(img, theta, src, Provenance::LinearInterp, delta)?,
                    )?);
                }
            }
            other => bail!("unknown method '{other}'"),
        }
    }
    Ok(out)
}

/// Runs the configured augmentation methods over every chip. Outputs are
/// written in input order regardless of which worker finished first.
pub fn augment(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Summary> {
    cfg.validate_methods()?;
    let pipeline = cfg.pipeline()?;
    let (chips, load_failed) = load_corpus(input)?;
    let out = ensure_dir(out)?;
    let results: Vec<Result<Vec<Emitted>>> = chips
        .par_iter()
        .map(|c| augment_chip(c, &chips, cfg, &pipeline))
        .collect();
    let mut rows: Vec<ManifestRow> = Vec::new();
    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut summary = Summary {
        ok: 0,
        failed: load_failed.len(),
    };
    for (c, r) in chips.iter().zip(results) {
        match r {
            Ok(items) => {
                summary.ok += 1;
                if items.is_empty() {
                    log::warn!("{}: every candidate pose already exists", c.path.display());
                }
                for e in items {
                    let rel = PathBuf::from("records").join(&e.name);
                    rows.push(write_record(&out, &rel, &e.record, &e.meta, "augment")?);
                    *counts.entry(e.record.provenance.as_str()).or_default() += 1;
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e:#}", c.path.display());
                summary.failed += 1;
            }
        }
    }
    write_manifest_file(&out.join("manifest.csv"), &rows)?;
    write_run_config(&out, cfg)?;
    if rows.is_empty() {
        eprintln!("warning: no records emitted");
    }
    for (k, n) in &counts {
        println!("{k}: {n}");
    }
    println!("total: {} record(s) from {} chip(s)", rows.len(), summary.ok);
    summary.check("chip")
}
