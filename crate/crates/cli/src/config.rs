//! Run configuration: one TOML file (angles in degrees) plus flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sarpose::dataset::SplitSpec;
use sarpose::solver::{Lambda, SolverOptions, StepRule};
use sarpose::{PipelineConfig, RadarParams, SynthesisConfig, TransformOptions, WindowSpec, SPEED_OF_LIGHT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarSection {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub elevation_deg: f64,
    pub aperture_deg: f64,
    pub pulses: usize,
    pub extent_m: f64,
}

impl Default for RadarSection {
    fn default() -> Self {
        Self {
            center_frequency_hz: 9.6e9,
            bandwidth_hz: SPEED_OF_LIGHT / (2.0 * 0.3),
            elevation_deg: 17.0,
            aperture_deg: 3.0,
            pulses: 16,
            extent_m: 4.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// `taylor` or `rect`.
    pub family: String,
    pub nbar: usize,
    pub sll_db: f64,
    pub zero_pad: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            family: "taylor".into(),
            nbar: 4,
            sll_db: -35.0,
            zero_pad: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub lambda_rel: Option<f64>,
    pub lambda_abs: Option<f64>,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// `power` or `backtracking`.
    pub step_rule: String,
    pub restart: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            lambda_rel: Some(0.05),
            lambda_abs: None,
            max_iters: 2000,
            rel_tol: 1e-6,
            step_rule: "power".into(),
            restart: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub eta: f64,
    pub r_cap_deg: f64,
    pub subaperture_deg: f64,
    pub pulses: usize,
    pub step_deg: f64,
    pub dedup_deg: f64,
    pub symmetric: bool,
    /// `[dx, dy]` metres.
    pub subpixel: Vec<[f64; 2]>,
    pub n_basis: usize,
    pub sigma_candidates_deg: Option<Vec<f64>>,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        Self {
            eta: 3.0,
            r_cap_deg: 6.0,
            subaperture_deg: 3.0,
            pulses: 16,
            step_deg: 1.0,
            dedup_deg: 0.5,
            symmetric: true,
            subpixel: vec![[0.15, 0.0]],
            n_basis: 12,
            sigma_candidates_deg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratio: f64,
    pub val_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            ratio: 1.0,
            val_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Pose offset budget for the baselines, which have no fitted width.
    pub delta_deg: f64,
    /// Rotate magnitudes instead of complex chips.
    pub magnitude_only: bool,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            delta_deg: 3.0,
            magnitude_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub count: usize,
    pub size: usize,
    pub scatterers: usize,
    pub width_min_deg: f64,
    pub width_max_deg: f64,
    pub isotropic_fraction: f64,
    pub snr_db: Option<f64>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        Self {
            count: 10,
            size: 32,
            scatterers: 8,
            width_min_deg: 1.5,
            width_max_deg: 3.0,
            isotropic_fraction: 0.5,
            snr_db: None,
        }
    }
}

/// Everything a run depends on. Written next to the outputs as `run.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub exact_transform: bool,
    /// Augmentation methods: `model`, `rotation`, `linear-interp`.
    pub methods: Vec<String>,
    pub radar: RadarSection,
    pub window: WindowSection,
    pub solver: SolverSection,
    pub synthesis: SynthesisSection,
    pub split: SplitSection,
    pub baseline: BaselineSection,
    pub phantom: PhantomSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            exact_transform: false,
            methods: vec!["model".into()],
            radar: RadarSection::default(),
            window: WindowSection::default(),
            solver: SolverSection::default(),
            synthesis: SynthesisSection::default(),
            split: SplitSection::default(),
            baseline: BaselineSection::default(),
            phantom: PhantomSection::default(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda_rel: Option<f64>,
    pub eta: Option<f64>,
    pub r_cap_deg: Option<f64>,
    pub step_deg: Option<f64>,
    pub subpixel: Option<Vec<[f64; 2]>>,
    pub window_nbar: Option<usize>,
    pub window_sll_db: Option<f64>,
    pub ratio: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub exact_transform: bool,
    pub methods: Option<Vec<String>>,
}

/// Parses `dx,dy` in metres.
pub fn parse_shift(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected dx,dy in metres, got '{s}'"));
    }
    let dx = parts[0].parse::<f64>().map_err(|e| format!("dx: {e}"))?;
    let dy = parts[1].parse::<f64>().map_err(|e| format!("dy: {e}"))?;
    Ok([dx, dy])
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.lambda_rel {
            self.solver.lambda_rel = Some(v);
            self.solver.lambda_abs = None;
        }
        if let Some(v) = o.eta {
            self.synthesis.eta = v;
        }
        if let Some(v) = o.r_cap_deg {
            self.synthesis.r_cap_deg = v;
        }
        if let Some(v) = o.step_deg {
            self.synthesis.step_deg = v;
        }
        if let Some(v) = &o.subpixel {
            self.synthesis.subpixel = v.clone();
        }
        if let Some(v) = o.window_nbar {
            self.window.nbar = v;
        }
        if let Some(v) = o.window_sll_db {
            self.window.sll_db = v;
        }
        if let Some(v) = o.ratio {
            self.split.ratio = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if o.exact_transform {
            self.exact_transform = true;
        }
        if let Some(v) = &o.methods {
            self.methods = v.clone();
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        let w = match self.window.family.as_str() {
            "taylor" => WindowSpec::taylor(self.window.nbar, self.window.sll_db),
            "rect" => WindowSpec::rect(),
            other => bail!("unknown window family '{other}'"),
        };
        let w = w.with_zero_pad(self.window.zero_pad);
        w.validate()?;
        Ok(w)
    }

    pub fn solver_options(&self) -> Result<SolverOptions> {
        let s = &self.solver;
        let lambda = match (s.lambda_rel, s.lambda_abs) {
            (_, Some(a)) => Lambda::Absolute(a),
            (Some(r), None) => Lambda::Relative(r),
            (None, None) => bail!("solver needs lambda_rel or lambda_abs"),
        };
        let step_rule = match s.step_rule.as_str() {
            "power" => StepRule::PowerIteration,
            "backtracking" => StepRule::Backtracking,
            other => bail!("unknown step rule '{other}'"),
        };
        let opts = SolverOptions {
            lambda,
            max_iters: s.max_iters,
            rel_tol: s.rel_tol,
            step_rule,
            restart: s.restart,
        };
        opts.validate()?;
        Ok(opts)
    }

    pub fn radar_params(&self) -> Result<RadarParams> {
        let r = &self.radar;
        Ok(RadarParams::new(
            r.center_frequency_hz,
            r.bandwidth_hz,
            r.elevation_deg.to_radians(),
            r.aperture_deg.to_radians(),
            r.pulses,
        )?)
    }

    pub fn transform_options(&self) -> TransformOptions {
        if self.exact_transform {
            TransformOptions::default()
        } else {
            TransformOptions::fast()
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let s = &self.synthesis;
        let synthesis = SynthesisConfig {
            eta: s.eta,
            r_cap: s.r_cap_deg.to_radians(),
            subaperture_width: s.subaperture_deg.to_radians(),
            pulses: s.pulses,
            step: s.step_deg.to_radians(),
            dedup_tolerance: s.dedup_deg.to_radians(),
            symmetric: s.symmetric,
            subpixel_shifts: s.subpixel.iter().map(|&[dx, dy]| (dx, dy)).collect(),
            n_basis: s.n_basis,
            sigma_candidates: s
                .sigma_candidates_deg
                .as_ref()
                .map(|v| v.iter().map(|d| d.to_radians()).collect()),
        };
        let cfg = PipelineConfig {
            radar: self.radar_params()?,
            extent: self.radar.extent_m,
            window: self.window_spec()?,
            transform: self.transform_options(),
            solver: self.solver_options()?,
            synthesis,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let spec = SplitSpec {
            ratio: self.split.ratio,
            val_fraction: self.split.val_fraction,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate_methods(&self) -> Result<()> {
        if self.methods.is_empty() {
            bail!("no augmentation methods selected");
        }
        for m in &self.methods {
            if !matches!(m.as_str(), "model" | "rotation" | "linear-interp") {
                bail!("unknown method '{m}' (expected model, rotation or linear-interp)");
            }
        }
        Ok(())
    }
}

/// Output directory, created if needed.
pub fn ensure_dir(p: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    Ok(p.to_path_buf())
}
