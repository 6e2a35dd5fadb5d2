//! Discretised anisotropic scattering dictionary.
//!
//! Each spatial grid point `k` carries a coefficient group `c_k ∈ C^D` whose
//! azimuth response is `h_k(θ) = Σ_v c_{v,k} ψ_v(θ)` with Gaussian kernels
//! `ψ_v(θ) = exp(-((θ - θ̂_v) / (2σ))²)`. The forward operator maps the
//! `D × K` coefficient matrix to polar phase history; it is applied matrix-free
//! (scene weights per azimuth, then a separable non-uniform Fourier sum).

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::geometry::{spatial_frequency, PolarGrid, SpatialGrid};
use crate::nudft::{Axis1, LatticeNudft, NudftMode};
use crate::transform::PhaseHistory;

/// Gaussian azimuth kernels sharing one width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBasisSet {
    centers: Vec<f64>,
    width: f64,
}

impl GaussianBasisSet {
    pub fn new(centers: Vec<f64>, width: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(invalid_param("basis needs at least one centre"));
        }
        if !width.is_finite() || width <= 0.0 {
            return Err(invalid_param("basis width must be positive"));
        }
        if centers.iter().any(|c| !c.is_finite()) || centers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_param("basis centres must be strictly ascending"));
        }
        Ok(Self { centers, width })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn with_width(&self, width: f64) -> Result<Self> {
        Self::new(self.centers.clone(), width)
    }
}

/// Midpoints of `d` equal intervals partitioning `[θc − Δθ, θc + Δθ]`.
pub fn make_basis_centers(theta_center: f64, half_span: f64, d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(invalid_param("number of basis functions must be at least 1"));
    }
    if !half_span.is_finite() || half_span <= 0.0 {
        return Err(invalid_param("basis half-span must be positive"));
    }
    let step = 2.0 * half_span / d as f64;
    let start = theta_center - half_span;
    Ok((0..d).map(|v| start + step * (v as f64 + 0.5)).collect())
}

/// `ψ_v(θ)` for every kernel.
pub fn gaussian_basis(theta: f64, basis: &GaussianBasisSet) -> Vec<f64> {
    basis
        .centers
        .iter()
        .map(|c| {
            let z = (theta - c) / (2.0 * basis.width);
            (-z * z).exp()
        })
        .collect()
}

/// Complex `D × K` coefficients; column `k` is the group of grid point `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(pub Array2<Complex64>);

impl CoefficientMatrix {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self(Array2::zeros((d, k)))
    }

    pub fn groups(&self) -> usize {
        self.0.ncols()
    }

    pub fn group(&self, k: usize) -> ArrayView1<'_, Complex64> {
        self.0.column(k)
    }

    /// `‖c_k‖₂` for every group.
    pub fn group_norms(&self) -> Vec<f64> {
        group_norms(&self.0)
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.0
    }
}

pub(crate) fn group_norms(c: &Array2<Complex64>) -> Vec<f64> {
    c.columns()
        .into_iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// Matrix-free forward/adjoint pair for one (spatial grid, basis, polar grid).
#[derive(Debug, Clone)]
pub struct ScatteringOperator {
    spatial: SpatialGrid,
    basis: GaussianBasisSet,
    grid: PolarGrid,
    /// `Ψ[i, v] = ψ_v(θ_i)`
    psi: Array2<f64>,
    kernel: LatticeNudft,
}

impl ScatteringOperator {
    pub fn new(spatial: &SpatialGrid, basis: &GaussianBasisSet, grid: &PolarGrid) -> Result<Self> {
        let n_theta = grid.n_theta();
        let n_freq = grid.n_freq();
        let psi = Array2::from_shape_fn((n_theta, basis.len()), |(i, v)| {
            let z = (grid.thetas()[i] - basis.centers[v]) / (2.0 * basis.width);
            (-z * z).exp()
        });
        let ks: Vec<f64> = grid
            .freqs()
            .iter()
            .map(|&f| spatial_frequency(f, grid.elevation()))
            .collect();
        let trig: Vec<(f64, f64)> = grid.thetas().iter().map(|t| t.sin_cos()).collect();
        let kx = Array2::from_shape_fn((n_theta, n_freq), |(i, m)| ks[m] * trig[i].1);
        let ky = Array2::from_shape_fn((n_theta, n_freq), |(i, m)| ks[m] * trig[i].0);
        let axis = Axis1 {
            n: spatial.n_range(),
            spacing: spatial.spacing(),
        };
        let kernel = LatticeNudft::new(axis, axis, kx, ky, NudftMode::Exact)?.with_cached_tables();
        Ok(Self {
            spatial: *spatial,
            basis: basis.clone(),
            grid: grid.clone(),
            psi,
            kernel,
        })
    }

    pub fn grid(&self) -> &PolarGrid {
        &self.grid
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn basis(&self) -> &GaussianBasisSet {
        &self.basis
    }

    /// `(D, K)`
    pub fn coeff_dim(&self) -> (usize, usize) {
        (self.basis.len(), self.spatial.len())
    }

    /// `(N_θ, M)`
    pub fn data_dim(&self) -> (usize, usize) {
        (self.grid.n_theta(), self.grid.n_freq())
    }

    /// `Ŝ(C)`.
    pub fn apply(&self, c: &Array2<Complex64>) -> Array2<Complex64> {
        assert_eq!(c.dim(), self.coeff_dim(), "coefficient shape mismatch");
        let n = self.spatial.n_range();
        self.kernel.forward_rows(|i| {
            // scene weights g_k(θ_i) = Σ_v c_{v,k} ψ_v(θ_i)
            let mut g = Array2::<Complex64>::zeros((n, n));
            let flat = g.as_slice_mut().expect("standard layout");
            for (v, row) in c.rows().into_iter().enumerate() {
                let p = self.psi[[i, v]];
                for (dst, src) in flat.iter_mut().zip(row.iter()) {
                    *dst += src * p;
                }
            }
            g
        })
    }

    /// `Ŝ^H(R)`.
    pub fn apply_adjoint(&self, r: &Array2<Complex64>) -> Array2<Complex64> {
        assert_eq!(r.dim(), self.data_dim(), "residual shape mismatch");
        let rows = self.kernel.adjoint_rows(r);
        let (d, k) = self.coeff_dim();
        let per_v: Vec<Vec<Complex64>> = (0..d)
            .into_par_iter()
            .map(|v| {
                let mut acc = vec![Complex64::new(0.0, 0.0); k];
                for (i, z) in rows.iter().enumerate() {
                    let p = self.psi[[i, v]];
                    let flat = z.as_slice().expect("standard layout");
                    for (a, b) in acc.iter_mut().zip(flat) {
                        *a += b * p;
                    }
                }
                acc
            })
            .collect();
        let mut out = Array2::zeros((d, k));
        for (v, row) in per_v.into_iter().enumerate() {
            for (kk, val) in row.into_iter().enumerate() {
                out[[v, kk]] = val;
            }
        }
        out
    }
}

fn check_dims(c: &CoefficientMatrix, spatial: &SpatialGrid, basis: &GaussianBasisSet) -> Result<()> {
    if c.0.dim() != (basis.len(), spatial.len()) {
        return Err(Error::DimensionMismatch(format!(
            "coefficients {:?}, expected {}x{}",
            c.0.dim(),
            basis.len(),
            spatial.len()
        )));
    }
    Ok(())
}

/// Evaluates the discretised model on `grid`.
pub fn forward(
    c: &CoefficientMatrix,
    spatial: &SpatialGrid,
    basis: &GaussianBasisSet,
    grid: &PolarGrid,
) -> Result<PhaseHistory> {
    check_dims(c, spatial, basis)?;
    let op = ScatteringOperator::new(spatial, basis, grid)?;
    PhaseHistory::new(op.apply(&c.0), grid.clone())
}

/// Exact adjoint of [`forward`] under `⟨A, B⟩ = Σ A·conj(B)`.
pub fn adjoint(r: &PhaseHistory, spatial: &SpatialGrid, basis: &GaussianBasisSet) -> Result<CoefficientMatrix> {
    let op = ScatteringOperator::new(spatial, basis, r.grid())?;
    Ok(CoefficientMatrix(op.apply_adjoint(r.data())))
}

/// Provenance of a fitted coefficient matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub lambda: f64,
    /// Data term the solver minimised.
    pub data_term: String,
    pub objective_trace: Vec<f64>,
    pub residual_fro: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fitted model, evaluable at any azimuth near its training aperture.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringModel {
    pub spatial: SpatialGrid,
    pub basis: GaussianBasisSet,
    pub coeffs: CoefficientMatrix,
    pub elevation: f64,
    /// Azimuth interval the coefficients were fitted on.
    pub training_span: (f64, f64),
    /// How far beyond `training_span` queries are accepted.
    pub max_extrapolation: f64,
    pub fit: FitMetadata,
}

impl ScatteringModel {
    pub fn sigma_g(&self) -> f64 {
        self.basis.width()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.training_span.0 + self.training_span.1)
    }

    pub fn admissible_span(&self) -> (f64, f64) {
        (
            self.training_span.0 - self.max_extrapolation,
            self.training_span.1 + self.max_extrapolation,
        )
    }
}

/// Evaluates the recovered model `S*(θ; f)` on arbitrary azimuths and frequencies.
pub fn evaluate_model(model: &ScatteringModel, thetas: &[f64], freqs: &[f64]) -> Result<PhaseHistory> {
    let (lo, hi) = model.admissible_span();
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if let Some(&q) = thetas.iter().find(|&&t| t < lo - slack || t > hi + slack) {
        return Err(Error::OutOfSpan { query: q, lo, hi });
    }
    let grid = PolarGrid::new(thetas.to_vec(), freqs.to_vec(), model.elevation)?;
    forward(&model.coeffs, &model.spatial, &model.basis, &grid)
}
