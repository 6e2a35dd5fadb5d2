//! `SARC1` container: magic line, one JSON header line, then little-endian
//! `f32` pairs (real, imaginary) in row-major order.
//!
//! Headers carry full-precision angles, so `write(read(bytes)) == bytes`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetRecord, Provenance, TargetClass};
use crate::error::{Error, Result};
use crate::geometry::SpatialGrid;
use crate::image::ComplexImage;
use crate::model::{CoefficientMatrix, FitMetadata, GaussianBasisSet, ScatteringModel};

pub const MAGIC: &[u8] = b"SARC1\n";
pub const SCHEMA_VERSION: u32 = 1;

/// Provenance details attached to synthetic records.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_azimuth_rad: Option<f64>,
    /// `(dx, dy)` metres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_m: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Record { record: DatasetRecord, meta: RecordMeta },
    Model(ScatteringModel),
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
    dims: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    record: Option<RecordHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ModelHeader>,
}

#[derive(Serialize, Deserialize)]
struct RecordHeader {
    pixel_spacing: f64,
    azimuth_rad: f64,
    /// Informational; `azimuth_rad` is authoritative.
    azimuth_deg: f64,
    depression_rad: f64,
    class: TargetClass,
    class_id: usize,
    provenance: Provenance,
    source_id: String,
    meta: RecordMeta,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    spatial: SpatialGrid,
    basis: GaussianBasisSet,
    elevation: f64,
    training_span: (f64, f64),
    max_extrapolation: f64,
    fit: FitMetadata,
}

fn push_payload(out: &mut Vec<u8>, data: &Array2<Complex64>) {
    out.reserve(data.len() * 8);
    for z in data.iter() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
}

pub fn write_container(c: &Container) -> Result<Vec<u8>> {
    let (header, data) = match c {
        Container::Record { record, meta } => (
            Header {
                schema_version: SCHEMA_VERSION,
                kind: "record".into(),
                dims: record.image.data().dim(),
                record: Some(RecordHeader {
                    pixel_spacing: record.image.pixel_spacing(),
                    azimuth_rad: record.azimuth,
                    azimuth_deg: record.azimuth.to_degrees(),
                    depression_rad: record.depression,
                    class: record.class,
                    class_id: record.class.id(),
                    provenance: record.provenance,
                    source_id: record.source_id.clone(),
                    meta: meta.clone(),
                }),
                model: None,
            },
            record.image.data(),
        ),
        Container::Model(m) => (
            Header {
                schema_version: SCHEMA_VERSION,
                kind: "model".into(),
                dims: m.coeffs.0.dim(),
                record: None,
                model: Some(ModelHeader {
                    spatial: m.spatial,
                    basis: m.basis.clone(),
                    elevation: m.elevation,
                    training_span: m.training_span,
                    max_extrapolation: m.max_extrapolation,
                    fit: m.fit.clone(),
                }),
            },
            &m.coeffs.0,
        ),
    };
    let json = serde_json::to_string(&header)?;
    let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 1 + data.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    push_payload(&mut out, data);
    Ok(out)
}

pub fn read_container(bytes: &[u8]) -> Result<Container> {
    let rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Format("missing SARC1 magic".into()))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("unterminated header line".into()))?;
    let header: Header = serde_json::from_slice(&rest[..nl])?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    let payload = &rest[nl + 1..];
    let (rows, cols) = header.dims;
    let expected = rows * cols * 8;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected: MAGIC.len() + nl + 1 + expected,
            found: bytes.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after a {rows}x{cols} payload",
            payload.len() - expected
        )));
    }
    let vals: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let i = 2 * (r * cols + c);
        Complex64::new(f64::from(vals[i]), f64::from(vals[i + 1]))
    });
    match (header.kind.as_str(), header.record, header.model) {
        ("record", Some(h), None) => {
            if h.class.id() != h.class_id {
                return Err(Error::Format("class and class_id disagree".into()));
            }
            let image = ComplexImage::new(data, h.pixel_spacing)?;
            let record = DatasetRecord::new(
                image,
                h.class,
                h.azimuth_rad,
                h.depression_rad,
                h.provenance,
                h.source_id,
            )?;
            Ok(Container::Record { record, meta: h.meta })
        }
        ("model", None, Some(h)) => {
            let basis = GaussianBasisSet::new(h.basis.centers().to_vec(), h.basis.width())?;
            let spatial = SpatialGrid::new(h.spatial.extent(), h.spatial.n_range())?;
            if (rows, cols) != (basis.len(), spatial.len()) {
                return Err(Error::Format(format!(
                    "model payload {rows}x{cols} does not match basis {} x grid {}",
                    basis.len(),
                    spatial.len()
                )));
            }
            if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Format("non-finite coefficients".into()));
            }
            Ok(Container::Model(ScatteringModel {
                spatial,
                basis,
                coeffs: CoefficientMatrix(data),
                elevation: h.elevation,
                training_span: h.training_span,
                max_extrapolation: h.max_extrapolation,
                fit: h.fit,
            }))
        }
        (kind, _, _) => Err(Error::Format(format!("inconsistent header for kind `{kind}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_record(seed: u64) -> Container {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((6, 5), |_| {
            Complex64::new(f64::from(rng.random::<f32>()), f64::from(-rng.random::<f32>()))
        });
        let record = DatasetRecord::new(
            ComplexImage::new(data, 0.3).unwrap(),
            TargetClass::Btr70,
            rng.random::<f64>() * 6.0,
            0.29,
            Provenance::Pose,
            "chip-1",
        )
        .unwrap();
        Container::Record {
            record,
            meta: RecordMeta {
                source_azimuth_rad: Some(0.977),
                shift_m: Some((0.15, 0.0)),
                sigma_g: Some(0.0175),
                ..Default::default()
            },
        }
    }

    fn model() -> Container {
        let c = Array2::from_shape_fn((12, 16), |(v, k)| Complex64::new(v as f64 * 0.5, -(k as f64) * 0.25));
        Container::Model(ScatteringModel {
            spatial: SpatialGrid::new(1.2, 4).unwrap(),
            basis: GaussianBasisSet::new((0..12).map(|v| 0.9 + 0.004 * v as f64).collect(), 0.01).unwrap(),
            coeffs: CoefficientMatrix(c),
            elevation: 0.3,
            training_span: (0.88, 0.95),
            max_extrapolation: 0.05,
            fit: FitMetadata {
                lambda: 0.1,
                data_term: "half squared Frobenius".into(),
                objective_trace: vec![3.0, 2.0, 1.5],
                residual_fro: 0.01,
                iterations: 2,
                converged: true,
            },
        })
    }

    #[test]
    fn record_round_trip_is_exact() {
        let c = random_record(1);
        let bytes = write_container(&c).unwrap();
        let back = read_container(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(write_container(&back).unwrap(), bytes);
    }

    #[test]
    fn model_payload_size() {
        let bytes = write_container(&model()).unwrap();
        let nl = bytes[MAGIC.len()..].iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - MAGIC.len() - nl - 1, 2 * 4 * 12 * 16);
        let back = read_container(&bytes).unwrap();
        assert_eq!(back, model());
        assert_eq!(write_container(&back).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = write_container(&random_record(2)).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_container(&bad), Err(Error::Format(_))));
        assert!(matches!(
            read_container(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_container(&extra).is_err());
        let text = String::from_utf8_lossy(&bytes).replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        assert!(read_container(text.as_bytes()).is_err());
    }
}
