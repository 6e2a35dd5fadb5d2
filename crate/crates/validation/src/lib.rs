//! Shared fixtures for the acceptance checks: the desk sensor geometry and
//! seeded point-scatterer phantoms.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sarpose::phantom::{Scatterer, SceneDescription};
use sarpose::{ComplexImage, PolarGrid, SpatialGrid, SPEED_OF_LIGHT};

pub const FC: f64 = 9.6e9;
pub const ELEVATION_DEG: f64 = 17.0;
pub const APERTURE_DEG: f64 = 3.0;
pub const EXTENT: f64 = 4.8;
pub const N_RANGE: usize = 16;

pub fn deg(v: f64) -> f64 {
    v.to_radians()
}

/// `c / 2·0.3 m`: 0.3 m range resolution.
pub fn bandwidth() -> f64 {
    SPEED_OF_LIGHT / (2.0 * 0.3)
}

/// 16 bin-centre frequencies and `n_theta` azimuths over a 3° aperture.
pub fn desk_grid(center: f64, n_theta: usize) -> PolarGrid {
    let b = bandwidth();
    let freqs = (0..N_RANGE)
        .map(|m| FC + (m as f64 - 7.5) * b / N_RANGE as f64)
        .collect();
    let w = deg(APERTURE_DEG);
    let thetas = (0..n_theta)
        .map(|i| center - w / 2.0 + w * i as f64 / (n_theta - 1) as f64)
        .collect();
    PolarGrid::new(thetas, freqs, deg(ELEVATION_DEG)).unwrap()
}

pub fn desk_spatial() -> SpatialGrid {
    SpatialGrid::new(EXTENT, N_RANGE).unwrap()
}

/// `n` scatterers on distinct interior cells of the desk grid with Gaussian
/// persistence of width `width`, centres uniform in `center ± half_spread`.
/// Returns the scene and the true grid indices.
pub fn on_grid_phantom(
    seed: u64,
    n: usize,
    center: f64,
    half_spread: f64,
    width: f64,
) -> (SceneDescription, Vec<usize>) {
    let sg = desk_spatial();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = Vec::new();
    let mut scat = Vec::new();
    while scat.len() < n {
        let k = sg.index(rng.random_range(3..13), rng.random_range(3..13));
        if used.contains(&k) {
            continue;
        }
        used.push(k);
        let (x, y) = sg.coords(k);
        let c = center + rng.random_range(-half_spread..=half_spread);
        let amp = Complex64::from_polar(rng.random_range(0.5..1.0), rng.random_range(-3.0..3.0));
        scat.push(Scatterer::gaussian(x, y, amp, c, width));
    }
    (SceneDescription::new(scat, EXTENT, deg(ELEVATION_DEG)).unwrap(), used)
}

/// Smooth off-centre blob; bilinear resampling is accurate on it.
pub fn smooth_blob(n: usize, spacing: f64) -> ComplexImage {
    let c = (n as f64 - 1.0) / 2.0;
    let d = Array2::from_shape_fn((n, n), |(r, k)| {
        let y = r as f64 - c - 2.0;
        let x = k as f64 - c + 1.5;
        let g = (-(x * x + 2.0 * y * y) / 40.0).exp();
        Complex64::new(g, 0.4 * g)
    });
    ComplexImage::new(d, spacing).unwrap()
}

pub fn random_complex(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}
