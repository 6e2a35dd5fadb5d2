//! Radar constants, polar (azimuth × frequency) sampling grids and the square
//! spatial grid the scattering model is discretised on.
//!
//! Angles are radians everywhere in this crate; degrees only appear at the
//! file and command-line boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Spatial frequency (cycles per metre) probed by a de-chirped sample at
/// frequency `freq` and elevation `elevation`.
#[inline]
pub fn spatial_frequency(freq: f64, elevation: f64) -> f64 {
    2.0 * freq * elevation.cos() / SPEED_OF_LIGHT
}

/// Sensor parameters describing one spotlight sub-aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParams {
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub elevation: f64,
    /// Azimuth span of one chip, radians.
    pub aperture_width: f64,
    pub pulses: usize,
}

impl RadarParams {
    pub fn new(
        center_frequency: f64,
        bandwidth: f64,
        elevation: f64,
        aperture_width: f64,
        pulses: usize,
    ) -> Result<Self> {
        let params = Self {
            center_frequency,
            bandwidth,
            elevation,
            aperture_width,
            pulses,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.center_frequency,
            self.bandwidth,
            self.elevation,
            self.aperture_width,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid_param("radar parameters must be finite"));
        }
        if self.bandwidth <= 0.0 {
            return Err(invalid_param("bandwidth must be positive"));
        }
        if self.center_frequency - self.bandwidth / 2.0 <= 0.0 {
            return Err(invalid_param("lowest frequency must be positive"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.elevation) {
            return Err(invalid_param("elevation must lie in [0, pi/2)"));
        }
        if self.aperture_width <= 0.0 {
            return Err(invalid_param("aperture width must be positive"));
        }
        if self.pulses < 2 {
            return Err(invalid_param("at least two pulses per aperture are required"));
        }
        Ok(())
    }

    /// Number of range bins `round(2 B L / c)` for a patch of side `extent`.
    pub fn range_bins(&self, extent: f64) -> Result<usize> {
        if !extent.is_finite() || extent <= 0.0 {
            return Err(invalid_param(format!("scene extent must be positive, got {extent}")));
        }
        let n = (2.0 * self.bandwidth * extent / SPEED_OF_LIGHT).round();
        if n < 1.0 {
            return Err(invalid_param(format!(
                "extent {extent} m resolves to zero range bins at bandwidth {} Hz",
                self.bandwidth
            )));
        }
        Ok(n as usize)
    }

    /// Range resolution `c / 2B`, metres.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }
}

/// Azimuth × frequency sample positions of a phase history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    thetas: Vec<f64>,
    freqs: Vec<f64>,
    elevation: f64,
}

fn strictly_ascending(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

impl PolarGrid {
    pub fn new(thetas: Vec<f64>, freqs: Vec<f64>, elevation: f64) -> Result<Self> {
        if !strictly_ascending(&thetas) {
            return Err(invalid_param("azimuth samples must be finite and strictly ascending"));
        }
        if !strictly_ascending(&freqs) || freqs.iter().any(|&f| f <= 0.0) {
            return Err(invalid_param(
                "frequency samples must be positive and strictly ascending",
            ));
        }
        if !elevation.is_finite() || !(0.0..std::f64::consts::FRAC_PI_2).contains(&elevation) {
            return Err(invalid_param("elevation must lie in [0, pi/2)"));
        }
        Ok(Self {
            thetas,
            freqs,
            elevation,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn n_theta(&self) -> usize {
        self.thetas.len()
    }

    pub fn n_freq(&self) -> usize {
        self.freqs.len()
    }

    /// Midpoint of the azimuth span.
    pub fn center_theta(&self) -> f64 {
        match (self.thetas.first(), self.thetas.last()) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            _ => 0.0,
        }
    }

    /// Midpoint of the frequency span.
    pub fn center_freq(&self) -> f64 {
        match (self.freqs.first(), self.freqs.last()) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            _ => 0.0,
        }
    }

    /// Occupied bandwidth `M·Δf` (frequency samples are bin centres).
    pub fn bandwidth(&self) -> Option<f64> {
        let m = self.freqs.len();
        if m < 2 {
            return None;
        }
        let span = self.freqs[m - 1] - self.freqs[0];
        Some(span * m as f64 / (m - 1) as f64)
    }

    /// Same frequencies and elevation, new azimuth samples.
    pub fn with_thetas(&self, thetas: Vec<f64>) -> Result<Self> {
        Self::new(thetas, self.freqs.clone(), self.elevation)
    }

    /// Same frequencies, `n` azimuths spanning `width` centred on `center`.
    pub fn recentered(&self, center: f64, width: f64, n: usize) -> Result<Self> {
        self.with_thetas(uniform_span(center, width, n)?)
    }
}

/// `n` samples spanning `[center - width/2, center + width/2]`, endpoints included.
pub fn uniform_span(center: f64, width: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || !width.is_finite() || width <= 0.0 || !center.is_finite() {
        return Err(invalid_param("span needs n >= 1 and a positive finite width"));
    }
    if n == 1 {
        return Ok(vec![center]);
    }
    let step = width / (n - 1) as f64;
    let start = center - width / 2.0;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

/// Builds the polar sampling grid for one sub-aperture centred on `center_azimuth`.
///
/// Azimuths cover the aperture with both endpoints sampled. Frequencies are the
/// `M = round(2BL/c)` bin centres of `[f_c - B/2, f_c + B/2]`, so the range
/// ambiguity of the grid is exactly `extent`.
pub fn make_polar_grid(params: &RadarParams, extent: f64, center_azimuth: f64) -> Result<PolarGrid> {
    params.validate()?;
    let m = params.range_bins(extent)?;
    let thetas = uniform_span(center_azimuth, params.aperture_width, params.pulses)?;
    let df = params.bandwidth / m as f64;
    let f0 = params.center_frequency - params.bandwidth / 2.0 + 0.5 * df;
    let freqs = (0..m).map(|i| f0 + df * i as f64).collect();
    PolarGrid::new(thetas, freqs, params.elevation)
}

/// Square patch of side `extent` centred on the target, sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    extent: f64,
    n_range: usize,
}

impl SpatialGrid {
    pub fn new(extent: f64, n_range: usize) -> Result<Self> {
        if !extent.is_finite() || extent <= 0.0 {
            return Err(invalid_param("spatial extent must be positive"));
        }
        if n_range == 0 {
            return Err(invalid_param("spatial grid needs at least one cell per axis"));
        }
        Ok(Self { extent, n_range })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n_range(&self) -> usize {
        self.n_range
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n_range as f64
    }

    /// Total number of grid points `K = N_R²`.
    pub fn len(&self) -> usize {
        self.n_range * self.n_range
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell-centre coordinate along either axis.
    pub fn axis(&self) -> Vec<f64> {
        let d = self.spacing();
        let c = (self.n_range as f64 - 1.0) / 2.0;
        (0..self.n_range).map(|i| (i as f64 - c) * d).collect()
    }

    /// Flattened index for column `ix` (x) and row `iy` (y).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n_range + ix
    }

    /// Inverse of [`index`](Self::index): `(ix, iy)`.
    pub fn cell(&self, k: usize) -> (usize, usize) {
        (k % self.n_range, k / self.n_range)
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (ix, iy) = self.cell(k);
        let d = self.spacing();
        let c = (self.n_range as f64 - 1.0) / 2.0;
        ((ix as f64 - c) * d, (iy as f64 - c) * d)
    }

    /// Nearest grid index to `(x, y)`, or `None` outside the patch.
    pub fn nearest(&self, x: f64, y: f64) -> Option<usize> {
        let d = self.spacing();
        let c = (self.n_range as f64 - 1.0) / 2.0;
        let ix = (x / d + c).round();
        let iy = (y / d + c).round();
        let n = self.n_range as f64;
        if ix < 0.0 || iy < 0.0 || ix >= n || iy >= n {
            return None;
        }
        Some(self.index(ix as usize, iy as usize))
    }
}

/// Spatial grid with `N_R = round(2BL/c)` cells per axis.
pub fn make_spatial_grid(params: &RadarParams, extent: f64) -> Result<SpatialGrid> {
    let n = params.range_bins(extent)?;
    SpatialGrid::new(extent, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_for_bins(bins: f64, extent: f64) -> RadarParams {
        let bandwidth = bins * SPEED_OF_LIGHT / (2.0 * extent);
        RadarParams::new(9.6e9, bandwidth, 17f64.to_radians(), 3f64.to_radians(), 100).unwrap()
    }

    #[test]
    fn polar_grid_counts() {
        let p = params_for_bins(64.0, 30.0);
        let g = make_polar_grid(&p, 30.0, 0.0).unwrap();
        assert_eq!(g.n_freq(), 64);
        assert_eq!(g.n_theta(), 100);
        let span = g.thetas()[99] - g.thetas()[0];
        assert!((span - 3f64.to_radians()).abs() < 1e-15);
        let bw = g.bandwidth().unwrap();
        assert!((bw - p.bandwidth).abs() / p.bandwidth < 1e-12);
    }

    #[test]
    fn polar_grid_uniform_spacing() {
        let p = params_for_bins(64.0, 30.0);
        let g = make_polar_grid(&p, 30.0, 56f64.to_radians()).unwrap();
        let dt = p.aperture_width / 99.0;
        let worst = g
            .thetas()
            .windows(2)
            .map(|w| (w[1] - w[0] - dt).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12);
        assert!((g.center_theta() - 56f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn zero_extent_rejected() {
        let p = params_for_bins(64.0, 30.0);
        assert!(make_polar_grid(&p, 0.0, 0.0).is_err());
        assert!(make_spatial_grid(&p, -1.0).is_err());
        assert!(make_polar_grid(&p, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn spatial_grid_thirty_metres() {
        let p = params_for_bins(100.0, 30.0);
        let s = make_spatial_grid(&p, 30.0).unwrap();
        assert_eq!(s.n_range(), 100);
        assert!((s.spacing() - 0.3).abs() < 1e-12);
        let axis = s.axis();
        assert!(axis.iter().all(|v| v.abs() <= 15.0));
        assert!((axis[0] + axis[99]).abs() < 1e-12);
    }

    #[test]
    fn spatial_grid_small() {
        let p = params_for_bins(4.0, 2.0);
        let s = make_spatial_grid(&p, 2.0).unwrap();
        assert_eq!(s.len(), 16);
    }

    #[test]
    fn index_round_trip() {
        let s = SpatialGrid::new(4.8, 16).unwrap();
        for k in 0..s.len() {
            let (x, y) = s.coords(k);
            assert_eq!(s.nearest(x, y), Some(k));
            let (ix, iy) = s.cell(k);
            assert_eq!(s.index(ix, iy), k);
        }
        assert_eq!(s.nearest(10.0, 0.0), None);
    }

    #[test]
    fn invalid_radar_params() {
        assert!(RadarParams::new(9.6e9, 0.0, 0.1, 0.05, 100).is_err());
        assert!(RadarParams::new(9.6e9, 5e8, 1.6, 0.05, 100).is_err());
        assert!(RadarParams::new(9.6e9, 5e8, 0.1, 0.0, 100).is_err());
        assert!(RadarParams::new(9.6e9, 5e8, 0.1, 0.05, 1).is_err());
    }

    #[test]
    fn polar_grid_rejects_unsorted() {
        assert!(PolarGrid::new(vec![0.1, 0.0], vec![1e9], 0.0).is_err());
        assert!(PolarGrid::new(vec![0.0], vec![2e9, 1e9], 0.0).is_err());
        assert!(PolarGrid::new(vec![], vec![], 0.0).is_ok());
    }
}
