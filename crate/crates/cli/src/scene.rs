//! Phantom scene files (TOML, angles in degrees) and phantom chip generation.

use anyhow::{Context, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sarpose::dataset::{DatasetRecord, Provenance, TargetClass};
use sarpose::phantom::{
    add_noise, random_scene, simulate_measurements, Persistence, RandomSceneSpec, Scatterer, SceneDescription,
};
use sarpose::transform::phase_history_to_image;
use sarpose::PipelineConfig;

use crate::config::PhantomSection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PersistenceDeg {
    Isotropic,
    Gaussian { center_deg: f64, width_deg: f64 },
    RaisedCosine { center_deg: f64, width_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererDeg {
    pub x_m: f64,
    pub y_m: f64,
    /// `[re, im]`.
    pub amplitude: [f64; 2],
    #[serde(default = "isotropic")]
    pub persistence: PersistenceDeg,
}

fn isotropic() -> PersistenceDeg {
    PersistenceDeg::Isotropic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub extent_m: f64,
    pub elevation_deg: f64,
    /// Chip azimuth.
    pub azimuth_deg: f64,
    #[serde(default)]
    pub class: Option<String>,
    #[serde(rename = "scatterer", default)]
    pub scatterers: Vec<ScattererDeg>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing scene file")
    }

    pub fn to_scene(&self) -> Result<SceneDescription> {
        let scatterers = self
            .scatterers
            .iter()
            .map(|s| Scatterer {
                x: s.x_m,
                y: s.y_m,
                amplitude: Complex64::new(s.amplitude[0], s.amplitude[1]),
                persistence: match s.persistence {
                    PersistenceDeg::Isotropic => Persistence::Isotropic,
                    PersistenceDeg::Gaussian { center_deg, width_deg } => Persistence::Gaussian {
                        center: center_deg.to_radians(),
                        width: width_deg.to_radians(),
                    },
                    PersistenceDeg::RaisedCosine { center_deg, width_deg } => Persistence::RaisedCosine {
                        center: center_deg.to_radians(),
                        width: width_deg.to_radians(),
                    },
                },
            })
            .collect();
        Ok(SceneDescription::new(
            scatterers,
            self.extent_m,
            self.elevation_deg.to_radians(),
        )?)
    }
}

/// Forms a `size × size` chip of `scene` seen from `azimuth`.
pub fn render(
    scene: &SceneDescription,
    azimuth: f64,
    size: usize,
    snr_db: Option<f64>,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<sarpose::ComplexImage> {
    let grid = cfg.source_grid(azimuth, scene.elevation)?;
    let mut ph = simulate_measurements(scene, &grid);
    if let Some(snr) = snr_db {
        ph = add_noise(&ph, snr, seed)?;
    }
    Ok(phase_history_to_image(&ph, size, size, &cfg.window, &cfg.transform)?)
}

/// The `i`-th chip of a seeded random corpus: classes cycle, azimuths are
/// drawn uniformly, scatterers sit on the model grid.
pub fn random_chip(
    i: usize,
    seed: u64,
    spec: &PhantomSection,
    cfg: &PipelineConfig,
) -> Result<(String, DatasetRecord)> {
    let chip_seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(chip_seed);
    let azimuth = (rng.random_range(0.0..360.0f64)).to_radians();
    let half = 0.5 * cfg.radar.aperture_width;
    let scene = random_scene(
        &RandomSceneSpec {
            n_scatterers: spec.scatterers,
            extent: cfg.extent,
            elevation: cfg.radar.elevation,
            center_range: (azimuth - half, azimuth + half),
            width_range: (spec.width_min_deg.to_radians(), spec.width_max_deg.to_radians()),
            isotropic_fraction: spec.isotropic_fraction,
            snap_to: Some(cfg.spatial_grid()?),
            fill: 0.8,
        },
        chip_seed,
    )?;
    let image = render(&scene, azimuth, spec.size, spec.snr_db, chip_seed, cfg)?;
    let class = TargetClass::ALL[i % TargetClass::ALL.len()];
    let id = format!("{}_{:03}", class.name(), i);
    let record = DatasetRecord::new(
        image,
        class,
        azimuth,
        cfg.radar.elevation,
        Provenance::Original,
        id.clone(),
    )?;
    Ok((id, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCENE: &str = r#"
extent_m = 4.8
elevation_deg = 17.0
azimuth_deg = 56.0
class = "T62"

[[scatterer]]
x_m = 0.6
y_m = -0.9
amplitude = [1.0, 0.0]

[[scatterer]]
x_m = -1.2
y_m = 0.3
amplitude = [0.0, 0.8]
persistence = { kind = "gaussian", center_deg = 56.0, width_deg = 1.5 }
"#;

    #[test]
    fn scene_file_in_degrees() {
        let f = SceneFile::parse(SCENE).unwrap();
        let s = f.to_scene().unwrap();
        assert_eq!(s.scatterers.len(), 2);
        assert_eq!(s.scatterers[0].persistence, Persistence::Isotropic);
        match s.scatterers[1].persistence {
            Persistence::Gaussian { center, width } => {
                assert!((center - 56f64.to_radians()).abs() < 1e-15);
                assert!((width - 1.5f64.to_radians()).abs() < 1e-15);
            }
            _ => panic!("wrong persistence"),
        }
    }

    #[test]
    fn random_chips_are_seeded() {
        let cfg = PipelineConfig::desk();
        let spec = PhantomSection::default();
        let (a, ra) = random_chip(3, 7, &spec, &cfg).unwrap();
        let (b, rb) = random_chip(3, 7, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let (_, rc) = random_chip(3, 8, &spec, &cfg).unwrap();
        assert_ne!(ra.azimuth, rc.azimuth);
        assert_eq!(ra.image.rows(), 32);
    }
}
