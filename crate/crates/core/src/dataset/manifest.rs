//! CSV manifests listing emitted files and their labels.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub class: String,
    pub class_id: usize,
    pub azimuth_deg: f64,
    pub depression_deg: f64,
    /// `train`, `val`, `augment`, `model`, ...
    pub split: String,
    pub provenance: String,
    pub source_id: String,
    pub source_azimuth_deg: Option<f64>,
    pub shift_dx_m: Option<f64>,
    pub shift_dy_m: Option<f64>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("manifest: {e}"))
}

pub fn write_manifest<W: Write>(out: W, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            ManifestRow {
                path: "a/b.sarc".into(),
                class: "T62".into(),
                class_id: 6,
                azimuth_deg: 56.0,
                depression_deg: 17.0,
                split: "train".into(),
                provenance: "original".into(),
                source_id: "T62_056".into(),
                source_azimuth_deg: None,
                shift_dx_m: None,
                shift_dy_m: None,
            },
            ManifestRow {
                path: "a/c, with comma.sarc".into(),
                class: "T62".into(),
                class_id: 6,
                azimuth_deg: 57.0,
                depression_deg: 17.0,
                split: "augment".into(),
                provenance: "pose-subpixel".into(),
                source_id: "T62_056".into(),
                source_azimuth_deg: Some(56.0),
                shift_dx_m: Some(0.15),
                shift_dy_m: Some(0.0),
            },
        ];
        let mut buf = Vec::new();
        write_manifest(&mut buf, &rows).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), rows);
    }
}
