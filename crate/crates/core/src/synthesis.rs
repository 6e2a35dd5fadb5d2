//! Pose synthesis from a fitted scattering model.
//!
//! A chip is inverted to polar samples, the basis width is chosen by a line
//! search, coefficients are fitted and the model is evaluated on overlapping
//! sub-apertures centred at nearby azimuths. Each synthetic phase history is
//! formed with the source chip's window, frequency grid and pixel lattice.

use serde::{Deserialize, Serialize};

use crate::dataset::container::RecordMeta;
use crate::dataset::{circular_distance, wrap_azimuth, DatasetRecord, Provenance};
use crate::error::{invalid_param, Error, Result};
use crate::geometry::{make_polar_grid, make_spatial_grid, uniform_span, PolarGrid, RadarParams, SpatialGrid};
use crate::image::{normalize_unit_norm, subpixel_shift, ComplexImage};
use crate::model::{evaluate_model, make_basis_centers, FitMetadata, GaussianBasisSet, ScatteringModel};
use crate::solver::{default_sigma_candidates, select_sigma, FitResult, SolverOptions};
use crate::transform::{form_image, image_to_phase_history, ImageGeometry, TransformOptions};
use crate::window::WindowSpec;

const DATA_TERM: &str = "least_squares";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    /// Multiple of the selected basis width allowed as pose offset.
    pub eta: f64,
    /// Hard cap on the pose offset, radians.
    pub r_cap: f64,
    /// Azimuth span of one synthesized sub-aperture, radians.
    pub subaperture_width: f64,
    pub pulses: usize,
    /// Pose increment, radians.
    pub step: f64,
    pub dedup_tolerance: f64,
    /// Emit poses on both sides of the source; otherwise only above it.
    pub symmetric: bool,
    /// `(dx, dy)` metres.
    pub subpixel_shifts: Vec<(f64, f64)>,
    /// Number of Gaussian kernels across the training aperture.
    pub n_basis: usize,
    /// Basis-width candidates, radians. `None` uses [`default_sigma_candidates`].
    pub sigma_candidates: Option<Vec<f64>>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            eta: 3.0,
            r_cap: 6f64.to_radians(),
            subaperture_width: 3f64.to_radians(),
            pulses: 100,
            step: 1f64.to_radians(),
            dedup_tolerance: 0.5f64.to_radians(),
            symmetric: true,
            subpixel_shifts: Vec::new(),
            n_basis: 12,
            sigma_candidates: None,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eta) || !positive(self.r_cap) || !positive(self.subaperture_width) {
            return Err(invalid_param("eta, r_cap and subaperture_width must be positive"));
        }
        if !positive(self.step) {
            return Err(invalid_param("pose step must be positive"));
        }
        if !self.dedup_tolerance.is_finite() || self.dedup_tolerance < 0.0 {
            return Err(invalid_param("dedup tolerance must be non-negative"));
        }
        if self.pulses < 2 || self.n_basis == 0 {
            return Err(invalid_param("need at least two pulses and one basis function"));
        }
        if self
            .subpixel_shifts
            .iter()
            .any(|&(dx, dy)| !dx.is_finite() || !dy.is_finite())
        {
            return Err(invalid_param("sub-pixel shifts must be finite"));
        }
        if let Some(c) = &self.sigma_candidates {
            if c.is_empty() || c.iter().any(|&s| !positive(s)) {
                return Err(invalid_param("sigma candidates must be positive"));
            }
        }
        Ok(())
    }
}

/// One augmented chip and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub image: ComplexImage,
    /// Radians in `[0, 2π)`.
    pub azimuth: f64,
    pub source_azimuth: f64,
    pub kind: Provenance,
    /// `(dx, dy)` metres.
    pub shift: (f64, f64),
    pub sigma_g: Option<f64>,
    pub lambda: Option<f64>,
    pub delta_theta: Option<f64>,
}

impl SyntheticRecord {
    pub fn meta(&self, source_file: Option<String>) -> RecordMeta {
        RecordMeta {
            source_file,
            source_azimuth_rad: Some(self.source_azimuth),
            shift_m: Some(self.shift),
            sigma_g: self.sigma_g,
            lambda: self.lambda,
            delta_theta: self.delta_theta,
        }
    }

    /// Attaches class, depression and source id from the record it was built from.
    pub fn to_record(&self, source: &DatasetRecord) -> Result<DatasetRecord> {
        DatasetRecord::new(
            self.image.clone(),
            source.class,
            self.azimuth,
            source.depression,
            self.kind,
            source.source_id.clone(),
        )
    }
}

/// `min(r_cap, η·σ)`.
pub fn extrapolation_span(r_cap: f64, sigma_g: f64, eta: f64) -> f64 {
    r_cap.min(eta * sigma_g)
}

/// Wraps a solver result as an evaluable model trained on `grid`.
pub fn model_from_fit(
    fit: &FitResult,
    spatial: &SpatialGrid,
    basis: &GaussianBasisSet,
    grid: &PolarGrid,
    max_extrapolation: f64,
) -> Result<ScatteringModel> {
    let th = grid.thetas();
    if th.is_empty() {
        return Err(invalid_param("empty training grid"));
    }
    Ok(ScatteringModel {
        spatial: *spatial,
        basis: basis.with_width(fit.sigma_g)?,
        coeffs: fit.coeffs.clone(),
        elevation: grid.elevation(),
        training_span: (th[0], th[th.len() - 1]),
        max_extrapolation,
        fit: FitMetadata {
            lambda: fit.lambda,
            data_term: DATA_TERM.into(),
            objective_trace: fit.objective_trace.clone(),
            residual_fro: fit.residual_fro,
            iterations: fit.iterations,
            converged: fit.converged,
        },
    })
}

/// Evaluates the model on a `cfg.pulses × |freqs|` sub-aperture centred at
/// `theta_c` and forms it on `geom`.
pub fn synthesize_pose(
    model: &ScatteringModel,
    theta_c: f64,
    cfg: &SynthesisConfig,
    freqs: &[f64],
    window: &WindowSpec,
    geom: &ImageGeometry,
    opts: &TransformOptions,
) -> Result<ComplexImage> {
    let offset = (theta_c - model.center()).abs();
    let half_train = 0.5 * (model.training_span.1 - model.training_span.0);
    // sub-aperture edges stay inside the admissible span whenever the centre
    // offset is within the extrapolation budget
    if offset > model.max_extrapolation + 1e-9 || !theta_c.is_finite() {
        let (lo, hi) = (
            model.center() - model.max_extrapolation,
            model.center() + model.max_extrapolation,
        );
        return Err(Error::OutOfSpan { query: theta_c, lo, hi });
    }
    if cfg.subaperture_width > 2.0 * half_train + 1e-12 {
        log::debug!("sub-aperture wider than the training aperture");
    }
    if geom.rows < freqs.len() || geom.cols < cfg.pulses {
        return Err(invalid_param(format!(
            "output {}x{} smaller than synthetic phase history {}x{} (freq x azimuth)",
            geom.rows,
            geom.cols,
            freqs.len(),
            cfg.pulses
        )));
    }
    let thetas = uniform_span(theta_c, cfg.subaperture_width, cfg.pulses)?;
    let ph = evaluate_model(model, &thetas, freqs)?;
    form_image(&ph, geom, window, opts)
}

/// New pose azimuths at multiples of `step` within `±delta` of `source`, skipping
/// the source itself and anything within `tol` of `existing`. Returned unwrapped
/// (near `source`), in ascending order.
pub fn enumerate_poses(source: f64, delta: f64, step: f64, existing: &[f64], tol: f64, symmetric: bool) -> Vec<f64> {
    if !(step > 0.0) || !(delta >= 0.0) {
        return Vec::new();
    }
    let kmax = ((delta + 1e-9) / step).floor() as i64;
    let kmin = if symmetric { -kmax } else { 1 };
    (kmin..=kmax)
        .filter(|&k| k != 0)
        .map(|k| source + k as f64 * step)
        .filter(|&t| existing.iter().all(|&e| circular_distance(t, e) > tol))
        .collect()
}

/// Everything needed to turn a chip into synthetic chips.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Sensor parameters; the elevation is taken from each record instead.
    pub radar: RadarParams,
    /// Side of the square patch the model is discretised on, metres.
    pub extent: f64,
    pub window: WindowSpec,
    pub transform: TransformOptions,
    pub solver: SolverOptions,
    pub synthesis: SynthesisConfig,
}

impl PipelineConfig {
    /// X-band, 0.3 m resolution, 3° apertures of 16 pulses, 4.8 m patch.
    pub fn desk() -> Self {
        let radar = RadarParams {
            center_frequency: 9.6e9,
            bandwidth: crate::geometry::SPEED_OF_LIGHT / (2.0 * 0.3),
            elevation: 17f64.to_radians(),
            aperture_width: 3f64.to_radians(),
            pulses: 16,
        };
        Self {
            radar,
            extent: 4.8,
            window: WindowSpec::default(),
            transform: TransformOptions::default(),
            solver: SolverOptions::default(),
            synthesis: SynthesisConfig {
                pulses: 16,
                ..SynthesisConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.window.validate()?;
        self.solver.validate()?;
        self.synthesis.validate()
    }

    /// Polar grid a chip at `azimuth`/`depression` was formed from.
    pub fn source_grid(&self, azimuth: f64, depression: f64) -> Result<PolarGrid> {
        let radar = RadarParams {
            elevation: depression,
            ..self.radar
        };
        make_polar_grid(&radar, self.extent, azimuth)
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        make_spatial_grid(&self.radar, self.extent)
    }
}

/// Fitted model plus everything emitted for one chip.
#[derive(Debug, Clone)]
pub struct Augmentation {
    pub model: ScatteringModel,
    pub delta_theta: f64,
    pub records: Vec<SyntheticRecord>,
}

/// Fits a chip and returns its model without synthesizing anything.
pub fn fit_record(record: &DatasetRecord, cfg: &PipelineConfig) -> Result<(ScatteringModel, f64)> {
    cfg.validate()?;
    let grid = cfg.source_grid(record.azimuth, record.depression)?;
    let ph = image_to_phase_history(&record.image, &grid, &cfg.window, &cfg.transform)?;
    let spatial = cfg.spatial_grid()?;
    let syn = &cfg.synthesis;
    let centers = make_basis_centers(record.azimuth, 0.5 * cfg.radar.aperture_width, syn.n_basis)?;
    let candidates = match &syn.sigma_candidates {
        Some(c) => c.clone(),
        None => default_sigma_candidates(&grid, 8)?,
    };
    let (sigma, fit) = select_sigma(&ph, &spatial, &centers, &candidates, &cfg.solver)?;
    let delta = extrapolation_span(syn.r_cap, sigma, syn.eta);
    let basis = GaussianBasisSet::new(centers, sigma)?;
    let model = model_from_fit(&fit, &spatial, &basis, &grid, delta)?;
    Ok((model, delta))
}

/// Full chip pipeline: invert, select the basis width, fit, then emit poses
/// within the extrapolation span (each also combined with every configured
/// shift) and shift-only copies of the original. Outputs have unit norm.
pub fn augment_record(record: &DatasetRecord, existing: &[f64], cfg: &PipelineConfig) -> Result<Augmentation> {
    let (model, delta) = fit_record(record, cfg)?;
    let records = synthesize_from_model(record, &model, existing, cfg)?;
    Ok(Augmentation {
        model,
        delta_theta: delta,
        records,
    })
}

/// Emission step of [`augment_record`] for an already fitted model.
pub fn synthesize_from_model(
    record: &DatasetRecord,
    model: &ScatteringModel,
    existing: &[f64],
    cfg: &PipelineConfig,
) -> Result<Vec<SyntheticRecord>> {
    let syn = &cfg.synthesis;
    syn.validate()?;
    let delta = model.max_extrapolation;
    let source = model.center();
    let grid = cfg.source_grid(source, model.elevation)?;
    let geom = ImageGeometry::of(&record.image);
    let tag = |image: ComplexImage, azimuth: f64, kind: Provenance, shift: (f64, f64)| SyntheticRecord {
        image,
        azimuth: wrap_azimuth(azimuth),
        source_azimuth: wrap_azimuth(source),
        kind,
        shift,
        sigma_g: Some(model.sigma_g()),
        lambda: Some(model.fit.lambda),
        delta_theta: Some(delta),
    };
    let mut out = Vec::new();
    for theta in enumerate_poses(source, delta, syn.step, existing, syn.dedup_tolerance, syn.symmetric) {
        let img = synthesize_pose(model, theta, syn, grid.freqs(), &cfg.window, &geom, &cfg.transform)?;
        out.push(tag(normalize_unit_norm(&img)?, theta, Provenance::Pose, (0.0, 0.0)));
        for &(dx, dy) in &syn.subpixel_shifts {
            let shifted = normalize_unit_norm(&subpixel_shift(&img, dx, dy)?)?;
            out.push(tag(shifted, theta, Provenance::PoseSubpixel, (dx, dy)));
        }
    }
    for &(dx, dy) in &syn.subpixel_shifts {
        let shifted = normalize_unit_norm(&subpixel_shift(&record.image, dx, dy)?)?;
        out.push(tag(shifted, source, Provenance::Subpixel, (dx, dy)));
    }
    Ok(out)
}
