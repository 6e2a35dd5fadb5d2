//! Phoenix-header chip files: an ASCII `key= value` header between sentinel
//! lines, then big-endian `f32` magnitude and phase planes.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dataset::{DatasetRecord, Provenance, TargetClass};
use crate::error::{invalid_param, Error, Result};
use crate::image::ComplexImage;

const START: &str = "[PhoenixHeaderVer";
const END: &str = "[EndofPhoenixHeader]";
/// Header version written by [`write_mstar`].
const VERSION_LINE: &str = "[PhoenixHeaderVer01.04]";
/// Pixel spacing assumed when the header carries none.
pub const DEFAULT_PIXEL_SPACING: f64 = 0.202_148_4;

/// Parsed chip with its header kept in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct MstarChip {
    pub version_line: String,
    /// `(key, value)`; raw lines without `=` carry `None`.
    pub header: Vec<(String, Option<String>)>,
    pub image: ComplexImage,
}

impl MstarChip {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, v)| k == key && v.is_some())
            .and_then(|(_, v)| v.as_deref())
    }

    fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| Error::Parse {
            key: key.into(),
            reason: "missing".into(),
        })?;
        raw.trim().parse().map_err(|_| Error::Parse {
            key: key.into(),
            reason: format!("cannot parse `{raw}`"),
        })
    }

    /// `TargetAz`, radians.
    pub fn azimuth(&self) -> Result<f64> {
        Ok(self.parse_key::<f64>("TargetAz")?.to_radians())
    }

    pub fn target_type(&self) -> Result<&str> {
        self.get("TargetType").ok_or_else(|| Error::Parse {
            key: "TargetType".into(),
            reason: "missing".into(),
        })
    }

    /// Depression angle in radians, from the measured or desired value.
    pub fn depression(&self) -> Option<f64> {
        ["MeasuredDepression", "DesiredDepression"]
            .iter()
            .find_map(|k| self.parse_key::<f64>(k).ok())
            .map(f64::to_radians)
    }

    pub fn to_record(&self, source_id: impl Into<String>) -> Result<DatasetRecord> {
        let class: TargetClass = self.target_type()?.parse().map_err(|_| Error::Parse {
            key: "TargetType".into(),
            reason: format!("unknown class `{}`", self.target_type().unwrap_or("")),
        })?;
        let depression = self.depression().unwrap_or_else(|| {
            log::warn!("no depression angle in header; assuming 17 degrees");
            17f64.to_radians()
        });
        DatasetRecord::new(
            self.image.clone(),
            class,
            self.azimuth()?,
            depression,
            Provenance::Original,
            source_id,
        )
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn be_f32(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]))
}

/// Parses a Phoenix chip.
pub fn read_mstar(bytes: &[u8]) -> Result<MstarChip> {
    let start = find(bytes, START.as_bytes()).ok_or_else(|| Error::Parse {
        key: START.into(),
        reason: "header start sentinel not found".into(),
    })?;
    let end = find(bytes, END.as_bytes()).ok_or_else(|| Error::Parse {
        key: END.into(),
        reason: "header end sentinel not found".into(),
    })?;
    if end < start {
        return Err(Error::Parse {
            key: END.into(),
            reason: "end sentinel precedes start".into(),
        });
    }
    let text = std::str::from_utf8(&bytes[start..end]).map_err(|_| Error::Parse {
        key: "header".into(),
        reason: "header is not ASCII".into(),
    })?;
    let mut lines = text.lines();
    let version_line = lines.next().unwrap_or_default().trim_end().to_string();
    let header: Vec<(String, Option<String>)> = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), Some(v.trim().to_string())),
            None => (l.trim_end().to_string(), None),
        })
        .collect();

    let mut data_start = end + END.len();
    // the sentinel line ends with a newline (CRLF tolerated)
    if bytes.get(data_start) == Some(&b'\r') {
        data_start += 1;
    }
    if bytes.get(data_start) == Some(&b'\n') {
        data_start += 1;
    }
    let mut chip = MstarChip {
        version_line,
        header,
        image: ComplexImage::zeros(0, 0, 1.0)?,
    };
    if let Ok(len) = chip.parse_key::<usize>("PhoenixHeaderLength") {
        let native = chip.parse_key::<usize>("native_header_length").unwrap_or(0);
        data_start = data_start.max(len + native);
    }
    let rows: usize = chip.parse_key("NumberOfRows")?;
    let cols: usize = chip.parse_key("NumberOfColumns")?;
    chip.azimuth()?;
    chip.target_type()?;

    let plane = rows * cols * 4;
    let expected = data_start + 2 * plane;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    let mag: Vec<f32> = be_f32(&bytes[data_start..data_start + plane]).collect();
    let phase: Vec<f32> = be_f32(&bytes[data_start + plane..expected]).collect();
    let data = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let i = r * cols + c;
        Complex64::from_polar(f64::from(mag[i]), f64::from(phase[i]))
    });
    let spacing = ["RangePixelSpacing", "ColPixelSpacing", "CrossRangePixelSpacing"]
        .iter()
        .find_map(|k| chip.parse_key::<f64>(k).ok())
        .filter(|v| *v > 0.0)
        .unwrap_or(DEFAULT_PIXEL_SPACING);
    chip.image = ComplexImage::new(data, spacing).map_err(|e| Error::Format(format!("chip samples: {e}")))?;
    Ok(chip)
}

/// Serialises a chip. Header lines are written in stored order with the
/// size and azimuth keys refreshed; offset keys are dropped since the planes
/// follow the end sentinel directly.
pub fn write_mstar(chip: &MstarChip) -> Vec<u8> {
    let mut out = String::new();
    out.push_str(if chip.version_line.starts_with(START) {
        &chip.version_line
    } else {
        VERSION_LINE
    });
    out.push('\n');
    let rows = chip.image.rows().to_string();
    let cols = chip.image.cols().to_string();
    let mut seen = (false, false);
    for (k, v) in &chip.header {
        match (k.as_str(), v) {
            ("PhoenixHeaderLength" | "native_header_length", Some(_)) => continue,
            ("NumberOfRows", Some(_)) => {
                seen.0 = true;
                out.push_str(&format!("NumberOfRows= {rows}\n"));
            }
            ("NumberOfColumns", Some(_)) => {
                seen.1 = true;
                out.push_str(&format!("NumberOfColumns= {cols}\n"));
            }
            (_, Some(v)) => out.push_str(&format!("{k}= {v}\n")),
            (_, None) => {
                out.push_str(k);
                out.push('\n');
            }
        }
    }
    if !seen.0 {
        out.push_str(&format!("NumberOfRows= {rows}\n"));
    }
    if !seen.1 {
        out.push_str(&format!("NumberOfColumns= {cols}\n"));
    }
    out.push_str(END);
    out.push('\n');
    let mut bytes = out.into_bytes();
    let data = chip.image.data();
    for z in data.iter() {
        bytes.extend_from_slice(&(z.norm() as f32).to_be_bytes());
    }
    for z in data.iter() {
        bytes.extend_from_slice(&(z.arg() as f32).to_be_bytes());
    }
    bytes
}

/// Builds a minimal chip around `image`, as used for test fixtures.
pub fn fixture_chip(image: ComplexImage, class: TargetClass, azimuth_deg: f64, depression_deg: f64) -> MstarChip {
    let header = vec![
        (
            "Filename".to_string(),
            Some(format!("{}_{azimuth_deg:.2}.fixture", class.name())),
        ),
        ("NumberOfColumns".to_string(), Some(image.cols().to_string())),
        ("NumberOfRows".to_string(), Some(image.rows().to_string())),
        ("TargetType".to_string(), Some(class.name().to_string())),
        ("TargetAz".to_string(), Some(format!("{azimuth_deg}"))),
        ("DesiredDepression".to_string(), Some(format!("{depression_deg}"))),
        (
            "RangePixelSpacing".to_string(),
            Some(format!("{}", image.pixel_spacing())),
        ),
        (
            "CrossRangePixelSpacing".to_string(),
            Some(format!("{}", image.pixel_spacing())),
        ),
    ];
    MstarChip {
        version_line: VERSION_LINE.to_string(),
        header,
        image,
    }
}

/// Replaces a header value, appending the key when absent.
pub fn set_header(chip: &mut MstarChip, key: &str, value: impl Into<String>) -> Result<()> {
    if key.contains('=') || key.contains('\n') {
        return Err(invalid_param("header keys cannot contain `=` or newlines"));
    }
    let value = value.into();
    match chip.header.iter_mut().find(|(k, v)| k == key && v.is_some()) {
        Some(entry) => entry.1 = Some(value),
        None => chip.header.push((key.to_string(), Some(value))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexImage::new(
            Array2::from_shape_fn((rows, cols), |_| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            }),
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_to_f32_precision() {
        let img = random_image(5, 7, 1);
        let mut chip = fixture_chip(img.clone(), TargetClass::T62, 56.0, 17.0);
        chip.header.push(("SomeVendorKey".into(), Some("x y z".into())));
        let bytes = write_mstar(&chip);
        let back = read_mstar(&bytes).unwrap();
        assert_eq!(back.header, chip.header);
        assert!((back.azimuth().unwrap() - 56f64.to_radians()).abs() < 1e-12);
        let err = crate::image::relative_error(back.image.data(), img.data());
        assert!(err < 1e-6, "{err}");
        // a second pass is byte-identical
        assert_eq!(write_mstar(&back), bytes);
        let rec = back.to_record("x").unwrap();
        assert_eq!(rec.class, TargetClass::T62);
        assert!((rec.depression - 17f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn zero_fixture() {
        let img = ComplexImage::zeros(2, 2, 0.3).unwrap();
        let back = read_mstar(&write_mstar(&fixture_chip(img, TargetClass::D7, 1.0, 15.0))).unwrap();
        assert!(back.image.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn missing_azimuth_names_key() {
        let mut chip = fixture_chip(random_image(2, 2, 2), TargetClass::D7, 1.0, 15.0);
        chip.header.retain(|(k, _)| k != "TargetAz");
        match read_mstar(&write_mstar(&chip)) {
            Err(Error::Parse { key, .. }) => assert_eq!(key, "TargetAz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_and_sentinels() {
        let bytes = write_mstar(&fixture_chip(random_image(3, 3, 3), TargetClass::D7, 1.0, 15.0));
        assert!(matches!(
            read_mstar(&bytes[..bytes.len() - 5]),
            Err(Error::Truncated { .. })
        ));
        let text = String::from_utf8_lossy(&bytes[..40]).replace("Phoenix", "Ph0enix");
        let mut broken = text.into_bytes();
        broken.extend_from_slice(&bytes[40..]);
        assert!(matches!(read_mstar(&broken), Err(Error::Parse { .. })));
    }

    #[test]
    fn honours_header_length() {
        let chip = fixture_chip(random_image(2, 3, 4), TargetClass::T72, 10.0, 17.0);
        let plain = write_mstar(&chip);
        let end = find(&plain, END.as_bytes()).unwrap() + END.len() + 1;
        // header padded to a declared length, as in field files
        let mut head = String::from_utf8(plain[..end].to_vec()).unwrap();
        let declared = 512;
        head = head.replace(END, &format!("PhoenixHeaderLength= {declared}\n{END}"));
        let mut bytes = head.into_bytes();
        bytes.resize(declared, b' ');
        bytes.extend_from_slice(&plain[end..]);
        let back = read_mstar(&bytes).unwrap();
        assert_eq!(back.image.rows(), 2);
        let err = crate::image::relative_error(back.image.data(), chip.image.data());
        assert!(err < 1e-6);
    }
}
