use std::path::Path;

use sarpose::dataset::{read_container, read_manifest, Container, ManifestRow};

fn run(args: &[&str]) -> anyhow::Result<()> {
    let mut full = vec!["sarpose"];
    full.extend_from_slice(args);
    sarpose_cli::run(full)
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn manifest(p: &Path) -> Vec<ManifestRow> {
    read_manifest(std::fs::File::open(p).unwrap()).unwrap()
}

fn files_with(dir: &Path, ext: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(ext))
        .collect();
    v.sort();
    v
}

#[test]
fn phoenix_phantoms_ingest_into_containers() {
    let dir = tempfile::tempdir().unwrap();
    let (raw, ingested) = (dir.path().join("raw"), dir.path().join("ing"));
    run(&["phantom", "--out", &s(&raw), "--count", "3", "--phoenix"]).unwrap();
    assert_eq!(files_with(&raw, ".phoenix").len(), 3);
    run(&["ingest", "--input", &s(&raw), "--out", &s(&ingested)]).unwrap();
    let rows = manifest(&ingested.join("manifest.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!(r.provenance, "original");
        let bytes = std::fs::read(ingested.join(&r.path)).unwrap();
        assert!(matches!(read_container(&bytes).unwrap(), Container::Record { .. }));
    }
    assert!(ingested.join("run.toml").exists());
}

#[test]
fn fit_writes_models_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    run(&["phantom", "--out", &s(&corpus), "--count", "2"]).unwrap();
    for out in ["m1", "m2"] {
        run(&["fit", "--input", &s(&corpus), "--out", &s(&dir.path().join(out))]).unwrap();
    }
    let models = files_with(&dir.path().join("m1"), ".model.sarc");
    assert_eq!(models.len(), 2);
    for m in &models {
        let a = std::fs::read(dir.path().join("m1").join(m)).unwrap();
        let b = std::fs::read(dir.path().join("m2").join(m)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(read_container(&a).unwrap(), Container::Model(_)));
    }
    let report = std::fs::read_to_string(dir.path().join("m1/fit_report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
}

#[test]
fn synthesize_and_shift_single_chips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let models = dir.path().join("m");
    run(&["phantom", "--out", &s(&corpus), "--count", "1"]).unwrap();
    run(&["fit", "--input", &s(&corpus), "--out", &s(&models)]).unwrap();
    let chip = corpus.join(&files_with(&corpus, ".sarc")[0]);
    let model = models.join(&files_with(&models, ".model.sarc")[0]);
    let Container::Record { record: src, .. } = read_container(&std::fs::read(&chip).unwrap()).unwrap() else {
        panic!("not a record")
    };
    let target = src.azimuth.to_degrees() + 1.0;
    let pose = dir.path().join("pose.sarc");
    run(&[
        "synthesize",
        "--model",
        &s(&model),
        "--chip",
        &s(&chip),
        "--azimuth-deg",
        &target.to_string(),
        "--out",
        &s(&pose),
    ])
    .unwrap();
    let Container::Record { record, meta } = read_container(&std::fs::read(&pose).unwrap()).unwrap() else {
        panic!("not a record")
    };
    assert_eq!(record.provenance.as_str(), "pose");
    assert!((record.azimuth.to_degrees() - target.rem_euclid(360.0)).abs() < 1e-6);
    assert_eq!(
        (record.image.rows(), record.image.cols()),
        (src.image.rows(), src.image.cols())
    );
    assert!(meta.source_azimuth_rad.is_some());

    let shifted = dir.path().join("shift.sarc");
    run(&[
        "shift",
        "--input",
        &s(&pose),
        "--dx",
        "0.15",
        "--dy",
        "-0.15",
        "--out",
        &s(&shifted),
    ])
    .unwrap();
    let Container::Record { record, meta } = read_container(&std::fs::read(&shifted).unwrap()).unwrap() else {
        panic!("not a record")
    };
    assert_eq!(record.provenance.as_str(), "pose-subpixel");
    assert_eq!(meta.shift_m, Some((0.15, -0.15)));

    // far outside the extrapolation span
    let far = (src.azimuth.to_degrees() + 40.0).to_string();
    let bad = dir.path().join("bad.sarc");
    assert!(run(&[
        "synthesize",
        "--model",
        &s(&model),
        "--chip",
        &s(&chip),
        "--azimuth-deg",
        &far,
        "--out",
        &s(&bad)
    ])
    .is_err());
}

#[test]
fn dataset_splits_and_flips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let out = dir.path().join("d");
    run(&["phantom", "--out", &s(&corpus), "--count", "40", "--size", "16"]).unwrap();
    run(&["dataset", "--input", &s(&corpus), "--out", &s(&out)]).unwrap();
    let train = manifest(&out.join("train.csv"));
    let val = manifest(&out.join("val.csv"));
    // 4 per class: round(0.15 * 4) = 1 held out, each record plus its flip
    assert_eq!(val.len(), 20);
    assert_eq!(train.len(), 60);
    let flips = train.iter().chain(&val).filter(|r| r.provenance == "flip").count();
    assert_eq!(flips, 40);
    let mut ids: Vec<&str> = train.iter().chain(&val).map(|r| r.source_id.as_str()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 40);

    // missing classes are rejected
    let small = dir.path().join("small");
    run(&["phantom", "--out", &s(&small), "--count", "3", "--size", "16"]).unwrap();
    assert!(run(&["dataset", "--input", &s(&small), "--out", &s(&dir.path().join("x"))]).is_err());
}

#[test]
fn baselines_emit_their_own_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    run(&["phantom", "--out", &s(&corpus), "--count", "20"]).unwrap();
    for (kind, prov) in [("rotation", "rotation"), ("linear-interp", "linear-interp")] {
        let out = dir.path().join(kind);
        run(&["baseline", "--input", &s(&corpus), "--out", &s(&out), "--kind", kind]).unwrap();
        let rows = manifest(&out.join("manifest.csv"));
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.provenance == prov));
        for r in &rows {
            assert!(out.join(&r.path).exists());
        }
    }
}

#[test]
fn nothing_to_emit_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let out = dir.path().join("o");
    run(&["phantom", "--out", &s(&corpus), "--count", "2", "--size", "16"]).unwrap();
    // a step larger than the pose budget leaves no candidate azimuths
    run(&[
        "augment",
        "--input",
        &s(&corpus),
        "--out",
        &s(&out),
        "--method",
        "rotation",
        "--step-deg",
        "10",
    ])
    .unwrap();
    assert!(manifest(&out.join("manifest.csv")).is_empty());
}

#[test]
fn quicklook_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let out = dir.path().join("q");
    run(&["phantom", "--out", &s(&corpus), "--count", "2", "--size", "16"]).unwrap();
    run(&["quicklook", "--input", &s(&corpus), "--out", &s(&out)]).unwrap();
    let pgms = files_with(&out, ".pgm");
    assert_eq!(pgms.len(), 2);
    let bytes = std::fs::read(out.join(&pgms[0])).unwrap();
    let header = b"P5\n16 16\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 256);
    assert!(bytes[header.len()..].contains(&255));
}

#[test]
fn bad_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert!(run(&["augment", "--input", &s(&empty), "--out", &s(&dir.path().join("o"))]).is_err());
    assert!(run(&[
        "fit",
        "--input",
        &s(&dir.path().join("missing")),
        "--out",
        &s(&dir.path().join("o"))
    ])
    .is_err());
    assert!(run(&["augment", "--input", &s(&empty), "--out", "x", "--method", "bogus"]).is_err());
    assert!(run(&["frobnicate"]).is_err());
}
