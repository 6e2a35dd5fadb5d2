//! Point-scatterer scenes with known azimuth persistence and their exact
//! phase history. Used as ground truth by the fitting and synthesis tests.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::geometry::{PolarGrid, SpatialGrid, SPEED_OF_LIGHT};
use crate::transform::PhaseHistory;

/// Azimuth profile of a scatterer's reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Persistence {
    Isotropic,
    /// `exp(-((θ-θ₀)/(2w))²)`, the same family as the fitting basis.
    Gaussian {
        center: f64,
        width: f64,
    },
    /// `½(1 + cos(π(θ-θ₀)/w))` for `|θ-θ₀| ≤ w`, zero outside.
    RaisedCosine {
        center: f64,
        width: f64,
    },
}

impl Persistence {
    pub fn gain(&self, theta: f64) -> f64 {
        match *self {
            Persistence::Isotropic => 1.0,
            Persistence::Gaussian { center, width } => {
                let z = (theta - center) / (2.0 * width);
                (-z * z).exp()
            }
            Persistence::RaisedCosine { center, width } => {
                let d = (theta - center).abs();
                if d > width {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * d / width).cos())
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Persistence::Isotropic => Ok(()),
            Persistence::Gaussian { center, width } | Persistence::RaisedCosine { center, width } => {
                if !center.is_finite() || !width.is_finite() || width <= 0.0 {
                    Err(invalid_param("persistence width must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub amplitude: Complex64,
    pub persistence: Persistence,
}

impl Scatterer {
    pub fn isotropic(x: f64, y: f64, amplitude: Complex64) -> Self {
        Self {
            x,
            y,
            amplitude,
            persistence: Persistence::Isotropic,
        }
    }

    pub fn gaussian(x: f64, y: f64, amplitude: Complex64, center: f64, width: f64) -> Self {
        Self {
            x,
            y,
            amplitude,
            persistence: Persistence::Gaussian { center, width },
        }
    }

    /// `h(θ)`
    pub fn response(&self, theta: f64) -> Complex64 {
        self.amplitude * self.persistence.gain(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub scatterers: Vec<Scatterer>,
    pub extent: f64,
    pub elevation: f64,
}

impl SceneDescription {
    pub fn new(scatterers: Vec<Scatterer>, extent: f64, elevation: f64) -> Result<Self> {
        let scene = Self {
            scatterers,
            extent,
            elevation,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.extent.is_finite() || self.extent <= 0.0 {
            return Err(invalid_param("scene extent must be positive"));
        }
        if !self.elevation.is_finite() {
            return Err(invalid_param("elevation must be finite"));
        }
        let half = self.extent / 2.0;
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.x.abs() <= half && s.y.abs() <= half) {
                return Err(invalid_param(format!("scatterer {i} lies outside the scene extent")));
            }
            if !s.amplitude.re.is_finite() || !s.amplitude.im.is_finite() {
                return Err(invalid_param(format!("scatterer {i} has a non-finite amplitude")));
            }
            s.persistence.validate()?;
        }
        Ok(())
    }
}

/// Direct evaluation of the point-scatterer signal on `grid`.
///
/// The grid's own elevation is used for the `cos φ` factor.
pub fn simulate_measurements(scene: &SceneDescription, grid: &PolarGrid) -> PhaseHistory {
    let (nt, nf) = (grid.n_theta(), grid.n_freq());
    let scale = -4.0 * PI * grid.elevation().cos() / SPEED_OF_LIGHT;
    let rows: Vec<Vec<Complex64>> = grid
        .thetas()
        .par_iter()
        .map(|&th| {
            let (s, c) = th.sin_cos();
            let mut row = vec![Complex64::new(0.0, 0.0); nf];
            for sc in &scene.scatterers {
                let h = sc.response(th);
                if h == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let proj = sc.x * c + sc.y * s;
                for (out, &f) in row.iter_mut().zip(grid.freqs()) {
                    *out += h * Complex64::from_polar(1.0, scale * f * proj);
                }
            }
            row
        })
        .collect();
    let data = Array2::from_shape_fn((nt, nf), |(i, m)| rows[i][m]);
    PhaseHistory::new(data, grid.clone()).expect("finite by construction")
}

/// Exact signal at arbitrary azimuths and frequencies, at the scene elevation.
pub fn ground_truth_at(scene: &SceneDescription, thetas: &[f64], freqs: &[f64]) -> Result<PhaseHistory> {
    let grid = PolarGrid::new(thetas.to_vec(), freqs.to_vec(), scene.elevation)?;
    Ok(simulate_measurements(scene, &grid))
}

/// Adds circular white Gaussian noise at exactly `snr_db`.
///
/// `f64::INFINITY` returns the input unchanged.
pub fn add_noise(s: &PhaseHistory, snr_db: f64, seed: u64) -> Result<PhaseHistory> {
    if snr_db == f64::INFINITY {
        return Ok(s.clone());
    }
    if !snr_db.is_finite() {
        return Err(invalid_param("snr must be finite or +inf"));
    }
    let signal = s.norm();
    if signal == 0.0 {
        return Err(invalid_input("cannot set an SNR on a zero signal"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Array2::from_shape_fn(s.data().dim(), |_| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let nn = noise.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let target = signal / 10f64.powf(snr_db / 20.0);
    let data = s.data() + &noise.mapv(|z| z * (target / nn));
    PhaseHistory::new(data, s.grid().clone())
}

/// Recipe for a seeded random scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSceneSpec {
    pub n_scatterers: usize,
    pub extent: f64,
    pub elevation: f64,
    /// Azimuth interval the persistence centres are drawn from.
    pub center_range: (f64, f64),
    /// Persistence widths are drawn log-uniformly from this interval.
    pub width_range: (f64, f64),
    /// Fraction of scatterers that are isotropic.
    pub isotropic_fraction: f64,
    /// Snap positions to this grid's cell centres, keeping them distinct.
    pub snap_to: Option<SpatialGrid>,
    /// Keep scatterers within this fraction of the half extent.
    pub fill: f64,
}

pub fn random_scene(spec: &RandomSceneSpec, seed: u64) -> Result<SceneDescription> {
    if !(spec.width_range.0 > 0.0 && spec.width_range.1 >= spec.width_range.0) {
        return Err(invalid_param("width range must be positive and ordered"));
    }
    if !(spec.fill > 0.0 && spec.fill <= 1.0) {
        return Err(invalid_param("fill must lie in (0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = 0.5 * spec.extent * spec.fill;
    let mut used = Vec::new();
    let mut scatterers = Vec::with_capacity(spec.n_scatterers);
    let mut attempts = 0;
    while scatterers.len() < spec.n_scatterers {
        attempts += 1;
        if attempts > 1000 * (spec.n_scatterers + 1) {
            return Err(invalid_param("could not place distinct scatterers"));
        }
        let mut x = rng.random_range(-half..=half);
        let mut y = rng.random_range(-half..=half);
        if let Some(g) = spec.snap_to {
            let Some(k) = g.nearest(x, y) else { continue };
            if used.contains(&k) {
                continue;
            }
            used.push(k);
            (x, y) = g.coords(k);
        }
        let amp = Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(-PI..PI));
        let persistence = if rng.random::<f64>() < spec.isotropic_fraction {
            Persistence::Isotropic
        } else {
            let (lo, hi) = spec.width_range;
            Persistence::Gaussian {
                center: rng.random_range(spec.center_range.0..=spec.center_range.1),
                width: (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp(),
            }
        };
        scatterers.push(Scatterer {
            x,
            y,
            amplitude: amp,
            persistence,
        });
    }
    SceneDescription::new(scatterers, spec.extent, spec.elevation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> PolarGrid {
        let thetas = (0..9).map(|i| 1.0 + 0.005 * i as f64).collect();
        let freqs = (0..7).map(|m| 9.5e9 + 3e7 * m as f64).collect();
        PolarGrid::new(thetas, freqs, 0.25).unwrap()
    }

    #[test]
    fn origin_isotropic_is_one() {
        let scene = SceneDescription::new(
            vec![Scatterer::isotropic(0.0, 0.0, Complex64::new(1.0, 0.0))],
            5.0,
            0.25,
        )
        .unwrap();
        let s = simulate_measurements(&scene, &grid());
        assert!(s.data().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn phase_slope_along_frequency() {
        let x = 1.3;
        let g = PolarGrid::new(vec![0.0], (0..5).map(|m| 9.6e9 + 1e8 * m as f64).collect(), 0.25).unwrap();
        let scene =
            SceneDescription::new(vec![Scatterer::isotropic(x, 0.0, Complex64::new(1.0, 0.0))], 5.0, 0.25).unwrap();
        let s = simulate_measurements(&scene, &g);
        let slope = -4.0 * PI * x * 0.25f64.cos() / SPEED_OF_LIGHT;
        for m in 0..5 {
            let expect = Complex64::from_polar(1.0, slope * g.freqs()[m]);
            assert!((s.data()[[0, m]] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn superposition() {
        let a = Scatterer::gaussian(0.7, -0.3, Complex64::new(0.4, 0.9), 1.01, 0.01);
        let b = Scatterer::isotropic(-1.1, 0.6, Complex64::new(-0.2, 0.1));
        let both = SceneDescription::new(vec![a, b], 5.0, 0.25).unwrap();
        let sa = simulate_measurements(&SceneDescription::new(vec![a], 5.0, 0.25).unwrap(), &grid());
        let sb = simulate_measurements(&SceneDescription::new(vec![b], 5.0, 0.25).unwrap(), &grid());
        let sum = sa.data() + sb.data();
        let s = simulate_measurements(&both, &grid());
        assert!(crate::image::relative_error(s.data(), &sum) < 1e-12);
    }

    #[test]
    fn envelope_and_peak() {
        let sc = Scatterer::gaussian(0.9, 0.4, Complex64::new(0.0, 2.0), 1.02, 0.004);
        let scene = SceneDescription::new(vec![sc], 5.0, 0.25).unwrap();
        let thetas: Vec<f64> = (0..81).map(|i| 1.0 + 0.0005 * i as f64).collect();
        let s = ground_truth_at(&scene, &thetas, &[9.6e9]).unwrap();
        let mags: Vec<f64> = s.data().column(0).iter().map(|z| z.norm()).collect();
        for (th, m) in thetas.iter().zip(&mags) {
            let env = 2.0 * (-((th - 1.02) / 0.008).powi(2)).exp();
            assert!((m - env).abs() < 1e-12);
        }
        let peak = mags
            .iter()
            .cloned()
            .enumerate()
            .fold((0, 0.0), |a, (i, v)| if v > a.1 { (i, v) } else { a });
        assert_relative_eq!(thetas[peak.0], 1.02, epsilon = 1e-12);
    }

    #[test]
    fn ground_truth_matches_simulation_and_empty() {
        let scene = SceneDescription::new(
            vec![Scatterer::isotropic(0.3, 0.2, Complex64::new(1.0, 1.0))],
            5.0,
            0.25,
        )
        .unwrap();
        let g = grid();
        let a = simulate_measurements(&scene, &g);
        let b = ground_truth_at(&scene, g.thetas(), g.freqs()).unwrap();
        assert_eq!(a, b);
        let e = ground_truth_at(&scene, &[], &[]).unwrap();
        assert_eq!(e.data().dim(), (0, 0));
    }

    #[test]
    fn no_conjugate_symmetry() {
        let scene = SceneDescription::new(
            vec![Scatterer::isotropic(0.8, -0.5, Complex64::new(0.3, 0.7))],
            5.0,
            0.25,
        )
        .unwrap();
        let s = simulate_measurements(&scene, &grid());
        let d = s.data();
        let (r, c) = d.dim();
        let sym = (0..r).all(|i| (0..c).all(|m| (d[[i, m]] - d[[r - 1 - i, c - 1 - m]].conj()).norm() < 1e-9));
        assert!(!sym);
    }

    #[test]
    fn noise_level_and_determinism() {
        let scene = SceneDescription::new(
            vec![Scatterer::isotropic(0.8, -0.5, Complex64::new(0.3, 0.7))],
            5.0,
            0.25,
        )
        .unwrap();
        let s = simulate_measurements(&scene, &grid());
        assert_eq!(add_noise(&s, f64::INFINITY, 1).unwrap(), s);
        let n1 = add_noise(&s, 20.0, 7).unwrap();
        let n2 = add_noise(&s, 20.0, 7).unwrap();
        assert_eq!(n1, n2);
        let noise = n1.data() - s.data();
        let nn = noise.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let snr = 10.0 * (s.norm().powi(2) / nn).log10();
        assert!((snr - 20.0).abs() < 0.1);
        assert!(add_noise(&PhaseHistory::zeros(grid()), 10.0, 1).is_err());
    }

    #[test]
    fn scene_validation() {
        assert!(
            SceneDescription::new(vec![Scatterer::isotropic(3.0, 0.0, Complex64::new(1.0, 0.0))], 5.0, 0.2).is_err()
        );
        assert!(SceneDescription::new(
            vec![Scatterer::gaussian(0.0, 0.0, Complex64::new(1.0, 0.0), 0.0, 0.0)],
            5.0,
            0.2
        )
        .is_err());
        assert!(SceneDescription::new(vec![], 5.0, 0.2).is_ok());
    }

    #[test]
    fn random_scene_is_seeded_and_snapped() {
        let g = SpatialGrid::new(4.8, 16).unwrap();
        let spec = RandomSceneSpec {
            n_scatterers: 6,
            extent: 4.8,
            elevation: 0.3,
            center_range: (0.9, 1.1),
            width_range: (0.01, 0.02),
            isotropic_fraction: 0.2,
            snap_to: Some(g),
            fill: 0.8,
        };
        let a = random_scene(&spec, 3).unwrap();
        assert_eq!(a, random_scene(&spec, 3).unwrap());
        assert_eq!(a.scatterers.len(), 6);
        for s in &a.scatterers {
            let k = g.nearest(s.x, s.y).unwrap();
            assert_eq!(g.coords(k), (s.x, s.y));
        }
    }
}
