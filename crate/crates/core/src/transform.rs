//! Image formation from polar phase history and its inverse.
//!
//! Forming an image applies the separable aperture taper, then the adjoint of
//! the polar sampling operator on the output pixel lattice, normalised by the
//! taper sum so an isolated unit scatterer images with unit peak. The image
//! frame is aligned with the sub-aperture: rows run along the look direction
//! at the grid's centre azimuth and the carrier at the centre frequency is
//! removed.
//!
//! Un-forming an image solves the normal equations of that map with conjugate
//! gradients and divides out the taper, so `image → phase history → image` is a
//! projection and `phase history → image → phase history` is exact whenever the
//! pixel lattice resolves every polar sample.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::geometry::{spatial_frequency, PolarGrid, SPEED_OF_LIGHT};
use crate::image::{frobenius, ComplexImage};
use crate::nudft::{conjugate_gradient, Axis1, LatticeNudft, NudftMode};
use crate::window::WindowSpec;

/// Complex de-chirped returns: rows are azimuth samples, columns frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistory {
    data: Array2<Complex64>,
    grid: PolarGrid,
}

impl PhaseHistory {
    pub fn new(data: Array2<Complex64>, grid: PolarGrid) -> Result<Self> {
        if data.dim() != (grid.n_theta(), grid.n_freq()) {
            return Err(Error::DimensionMismatch(format!(
                "phase history {:?} vs grid {}x{}",
                data.dim(),
                grid.n_theta(),
                grid.n_freq()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid_input("phase history contains non-finite values"));
        }
        Ok(Self { data, grid })
    }

    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            data: Array2::zeros((grid.n_theta(), grid.n_freq())),
            grid,
        }
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn into_parts(self) -> (Array2<Complex64>, PolarGrid) {
        (self.data, self.grid)
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformMode {
    /// Direct non-uniform sums.
    Exact,
    /// Oversampled FFT with bilinear polar resampling.
    Fast { oversample: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    pub mode: TransformMode,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self {
            mode: TransformMode::Exact,
            cg_tol: 1e-12,
            cg_max_iters: 500,
        }
    }
}

impl TransformOptions {
    pub fn fast() -> Self {
        Self {
            mode: TransformMode::Fast { oversample: 8 },
            ..Self::default()
        }
    }
}

/// Pixel lattice of a formed image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGeometry {
    pub rows: usize,
    pub cols: usize,
    pub pixel_spacing: f64,
}

impl ImageGeometry {
    /// Pixel spacing `c / (2 B · zero_pad_factor)` for the grid's bandwidth.
    pub fn for_window(grid: &PolarGrid, window: &WindowSpec, rows: usize, cols: usize) -> Result<Self> {
        window.validate()?;
        let bw = grid
            .bandwidth()
            .ok_or_else(|| invalid_param("image formation needs at least two frequencies"))?;
        Ok(Self {
            rows,
            cols,
            pixel_spacing: SPEED_OF_LIGHT / (2.0 * bw * window.zero_pad_factor),
        })
    }

    pub fn of(img: &ComplexImage) -> Self {
        Self {
            rows: img.rows(),
            cols: img.cols(),
            pixel_spacing: img.pixel_spacing(),
        }
    }
}

/// Diagnostics from un-forming an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionReport {
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub clamped_weights: usize,
}

/// Sampling operator from the image-frame pixel lattice to the polar grid.
pub(crate) fn image_operator(grid: &PolarGrid, geom: &ImageGeometry, mode: TransformMode) -> Result<LatticeNudft> {
    let theta_c = grid.center_theta();
    let k_c = spatial_frequency(grid.center_freq(), grid.elevation());
    let dims = (grid.n_theta(), grid.n_freq());
    let ks: Vec<f64> = grid
        .freqs()
        .iter()
        .map(|&f| spatial_frequency(f, grid.elevation()))
        .collect();
    let angles: Vec<(f64, f64)> = grid.thetas().iter().map(|t| (t - theta_c).sin_cos()).collect();
    let kx = Array2::from_shape_fn(dims, |(i, m)| -ks[m] * angles[i].0);
    let ky = Array2::from_shape_fn(dims, |(i, m)| ks[m] * angles[i].1 - k_c);
    let mode = match mode {
        TransformMode::Exact => NudftMode::Exact,
        TransformMode::Fast { oversample } => NudftMode::Gridded { oversample },
    };
    LatticeNudft::new(
        Axis1 {
            n: geom.cols,
            spacing: geom.pixel_spacing,
        },
        Axis1 {
            n: geom.rows,
            spacing: geom.pixel_spacing,
        },
        kx,
        ky,
        mode,
    )
}

/// Separable taper `w_θ[i] · w_f[m]`.
pub fn window_weights(grid: &PolarGrid, window: &WindowSpec) -> Result<Array2<f64>> {
    let wt = if grid.n_theta() > 0 {
        window.weights(grid.n_theta())?
    } else {
        Vec::new()
    };
    let wf = if grid.n_freq() > 0 {
        window.weights(grid.n_freq())?
    } else {
        Vec::new()
    };
    Ok(Array2::from_shape_fn((wt.len(), wf.len()), |(i, m)| wt[i] * wf[m]))
}

/// Forms an image on an explicit pixel lattice.
pub fn form_image(
    ph: &PhaseHistory,
    geom: &ImageGeometry,
    window: &WindowSpec,
    opts: &TransformOptions,
) -> Result<ComplexImage> {
    let w = window_weights(ph.grid(), window)?;
    let norm: f64 = w.sum();
    if norm <= 0.0 {
        return Err(invalid_param("window weights sum to zero"));
    }
    let op = image_operator(ph.grid(), geom, opts.mode)?;
    let weighted = Array2::from_shape_fn(ph.data.dim(), |ix| ph.data[ix] * w[ix]);
    let img = op.adjoint(&weighted).mapv(|z| z / norm);
    ComplexImage::new(img, geom.pixel_spacing)
}

/// Windows, zero-pads (through the pixel spacing) and forms a `rows × cols` image.
pub fn phase_history_to_image(
    ph: &PhaseHistory,
    rows: usize,
    cols: usize,
    window: &WindowSpec,
    opts: &TransformOptions,
) -> Result<ComplexImage> {
    if rows < ph.grid().n_freq() || cols < ph.grid().n_theta() {
        return Err(invalid_param(format!(
            "output {rows}x{cols} smaller than phase history {}x{} (freq x azimuth)",
            ph.grid().n_freq(),
            ph.grid().n_theta()
        )));
    }
    let geom = ImageGeometry::for_window(ph.grid(), window, rows, cols)?;
    form_image(ph, &geom, window, opts)
}

/// Recovers the polar samples an image was formed from. See the module docs.
pub fn image_to_phase_history(
    img: &ComplexImage,
    grid: &PolarGrid,
    window: &WindowSpec,
    opts: &TransformOptions,
) -> Result<PhaseHistory> {
    image_to_phase_history_with_report(img, grid, window, opts).map(|(ph, _)| ph)
}

pub fn image_to_phase_history_with_report(
    img: &ComplexImage,
    grid: &PolarGrid,
    window: &WindowSpec,
    opts: &TransformOptions,
) -> Result<(PhaseHistory, InversionReport)> {
    let samples = grid.n_theta() * grid.n_freq();
    if img.rows() * img.cols() < samples {
        return Err(invalid_param(format!(
            "{}x{} image cannot determine {samples} polar samples",
            img.rows(),
            img.cols()
        )));
    }
    let w = window_weights(grid, window)?;
    let norm: f64 = w.sum();
    let geom = ImageGeometry::of(img);
    let op = image_operator(grid, &geom, opts.mode)?;
    let rhs = op.forward(img.data());
    let (z, iters, residual) = conjugate_gradient(|v| op.forward(&op.adjoint(v)), &rhs, opts.cg_tol, opts.cg_max_iters);
    let w_max = w.iter().cloned().fold(0.0, f64::max);
    let floor = 1e-6 * w_max;
    let mut clamped = 0;
    let data = Array2::from_shape_fn(z.dim(), |ix| {
        let mut wi = w[ix];
        if wi < floor {
            wi = floor;
            clamped += 1;
        }
        z[ix] * (norm / wi)
    });
    if clamped > 0 {
        log::warn!("de-windowing clamped {clamped} taper weights below 1e-6 of peak");
    }
    log::debug!("image inversion: {iters} CG iterations, relative residual {residual:.3e}");
    Ok((
        PhaseHistory::new(data, grid.clone())?,
        InversionReport {
            cg_iterations: iters,
            cg_residual: residual,
            clamped_weights: clamped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_polar_grid, RadarParams};
    use crate::image::relative_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk_grid(center: f64) -> PolarGrid {
        let bw = SPEED_OF_LIGHT / (2.0 * 0.3);
        let p = RadarParams::new(9.6e9, bw, 17f64.to_radians(), 3f64.to_radians(), 16).unwrap();
        make_polar_grid(&p, 4.8, center).unwrap()
    }

    fn random_ph(grid: &PolarGrid, seed: u64) -> PhaseHistory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((grid.n_theta(), grid.n_freq()), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        PhaseHistory::new(data, grid.clone()).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let grid = desk_grid(0.5);
        let ph = PhaseHistory::zeros(grid.clone());
        let img = phase_history_to_image(&ph, 32, 32, &WindowSpec::default(), &TransformOptions::default()).unwrap();
        assert!(img.data().iter().all(|z| z.norm() == 0.0));
        let back = image_to_phase_history(&img, &grid, &WindowSpec::default(), &TransformOptions::default()).unwrap();
        assert!(back.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn centre_pixel_gives_flat_magnitude() {
        let grid = desk_grid(0.2);
        let mut data = Array2::zeros((33, 33));
        data[[16, 16]] = Complex64::new(1.0, 0.0);
        let img = ComplexImage::new(data, 0.3).unwrap();
        let op = image_operator(&grid, &ImageGeometry::of(&img), TransformMode::Exact).unwrap();
        let s = op.forward(img.data());
        assert!(s.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn unit_scatterer_images_with_unit_peak() {
        let grid = desk_grid(0.0);
        let ph = PhaseHistory::new(Array2::from_elem((16, 16), Complex64::new(1.0, 0.0)), grid).unwrap();
        let img = phase_history_to_image(&ph, 33, 33, &WindowSpec::default(), &TransformOptions::default()).unwrap();
        assert!((img.data()[[16, 16]] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ph_round_trip_exact() {
        let grid = desk_grid(1.0);
        let ph = random_ph(&grid, 11);
        for window in [WindowSpec::rect(), WindowSpec::default()] {
            let img = phase_history_to_image(&ph, 32, 32, &window, &TransformOptions::default()).unwrap();
            let back = image_to_phase_history(&img, &grid, &window, &TransformOptions::default()).unwrap();
            let err = relative_error(back.data(), ph.data());
            assert!(err <= 1e-6, "round trip {err}");
        }
    }

    #[test]
    fn output_too_small() {
        let grid = desk_grid(0.0);
        let ph = PhaseHistory::zeros(grid);
        assert!(phase_history_to_image(&ph, 8, 32, &WindowSpec::rect(), &TransformOptions::default()).is_err());
    }

    #[test]
    fn parseval_on_lattice_aligned_grid() {
        // single azimuth at broadside elevation zero: samples fall on the image DFT lattice
        let n = 16;
        let dp = 0.3;
        let df = SPEED_OF_LIGHT / (2.0 * n as f64 * dp);
        let freqs: Vec<f64> = (0..n).map(|m| 9.6e9 + df * m as f64).collect();
        let grid = PolarGrid::new(vec![0.4], freqs, 0.0).unwrap();
        let ph = random_ph(&grid, 12);
        let img = phase_history_to_image(&ph, n, n, &WindowSpec::rect(), &TransformOptions::default()).unwrap();
        assert!((img.pixel_spacing() - dp).abs() < 1e-12);
        let expected = ph.norm() * n as f64 / (n as f64);
        assert!((img.norm() - expected).abs() / expected < 1e-10);
    }

    #[test]
    fn linearity() {
        let grid = desk_grid(0.3);
        let a = random_ph(&grid, 1);
        let b = random_ph(&grid, 2);
        let (alpha, beta) = (Complex64::new(0.7, -0.2), Complex64::new(-1.1, 0.4));
        let mix = PhaseHistory::new(a.data().mapv(|z| z * alpha) + b.data().mapv(|z| z * beta), grid.clone()).unwrap();
        let opts = TransformOptions::default();
        let w = WindowSpec::default();
        let ia = phase_history_to_image(&a, 32, 32, &w, &opts).unwrap();
        let ib = phase_history_to_image(&b, 32, 32, &w, &opts).unwrap();
        let im = phase_history_to_image(&mix, 32, 32, &w, &opts).unwrap();
        let expect = ia.data().mapv(|z| z * alpha) + ib.data().mapv(|z| z * beta);
        assert!(relative_error(im.data(), &expect) < 1e-10);
    }
}
