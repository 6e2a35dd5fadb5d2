//! Non-uniform Fourier sums between a regular 2-D lattice of points and an
//! arbitrary set of spatial-frequency samples arranged in rows.
//!
//! `forward` evaluates `Σ_p X_p exp(-j2π(kx·x_p + ky·y_p))` for every sample;
//! `adjoint` is its exact conjugate transpose. Two evaluation modes exist:
//!
//! * `Exact` sums directly. The exponential factorises over the lattice axes,
//!   so each sample row costs one `ny × nx × M` contraction.
//! * `Gridded` samples an oversampled FFT of the (deapodised) lattice data with
//!   bilinear interpolation. Its adjoint spreads with the same weights, so the
//!   pair stays exactly adjoint.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::fft2;

/// Evaluation strategy for [`LatticeNudft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NudftMode {
    Exact,
    Gridded { oversample: usize },
}

/// Cell-centred 1-D lattice `x_j = (j - (n-1)/2)·spacing`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis1 {
    pub n: usize,
    pub spacing: f64,
}

impl Axis1 {
    pub fn coords(&self) -> Vec<f64> {
        let c = (self.n as f64 - 1.0) / 2.0;
        (0..self.n).map(|j| (j as f64 - c) * self.spacing).collect()
    }
}

/// Lattice ↔ sample operator. Samples are stored as `rows × cols` arrays of
/// spatial frequencies (cycles/metre) along the lattice x (columns) and
/// y (rows) axes.
#[derive(Debug, Clone)]
pub struct LatticeNudft {
    x: Axis1,
    y: Axis1,
    kx: Array2<f64>,
    ky: Array2<f64>,
    mode: NudftMode,
    tables: Option<Arc<Vec<RowTables>>>,
}

type RowTables = (Array2<Complex64>, Array2<Complex64>);

#[inline]
fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

impl LatticeNudft {
    pub fn new(x: Axis1, y: Axis1, kx: Array2<f64>, ky: Array2<f64>, mode: NudftMode) -> Result<Self> {
        if kx.dim() != ky.dim() {
            return Err(Error::DimensionMismatch("kx and ky sample arrays differ".into()));
        }
        if let NudftMode::Gridded { oversample } = mode {
            if oversample < 2 {
                return Err(Error::InvalidParameter("gridding oversample must be >= 2".into()));
            }
        }
        Ok(Self {
            x,
            y,
            kx,
            ky,
            mode,
            tables: None,
        })
    }

    /// Precomputes the exact-mode exponential tables for every sample row.
    pub fn with_cached_tables(mut self) -> Self {
        let xs = self.x.coords();
        let ys = self.y.coords();
        let t: Vec<RowTables> = (0..self.sample_dim().0)
            .into_par_iter()
            .map(|i| self.build_tables(i, &xs, &ys))
            .collect();
        self.tables = Some(Arc::new(t));
        self
    }

    /// Shape of the sample array.
    pub fn sample_dim(&self) -> (usize, usize) {
        self.kx.dim()
    }

    /// Shape of the lattice array (`ny × nx`).
    pub fn lattice_dim(&self) -> (usize, usize) {
        (self.y.n, self.x.n)
    }

    pub fn forward(&self, data: &Array2<Complex64>) -> Array2<Complex64> {
        assert_eq!(data.dim(), self.lattice_dim(), "lattice shape mismatch");
        match self.mode {
            NudftMode::Exact => self.forward_exact(data),
            NudftMode::Gridded { oversample } => self.forward_gridded(data, oversample),
        }
    }

    pub fn adjoint(&self, samples: &Array2<Complex64>) -> Array2<Complex64> {
        assert_eq!(samples.dim(), self.sample_dim(), "sample shape mismatch");
        match self.mode {
            NudftMode::Exact => self.adjoint_exact(samples),
            NudftMode::Gridded { oversample } => self.adjoint_gridded(samples, oversample),
        }
    }

    fn row_tables(&self, i: usize, xs: &[f64], ys: &[f64]) -> std::borrow::Cow<'_, RowTables> {
        match &self.tables {
            Some(t) => std::borrow::Cow::Borrowed(&t[i]),
            None => std::borrow::Cow::Owned(self.build_tables(i, xs, ys)),
        }
    }

    /// Per-row exponential tables `Ex[m, j]`, `Ey[m, l]`.
    fn build_tables(&self, i: usize, xs: &[f64], ys: &[f64]) -> RowTables {
        let m = self.kx.ncols();
        let ex = Array2::from_shape_fn((m, xs.len()), |(s, j)| cis(-2.0 * PI * self.kx[[i, s]] * xs[j]));
        let ey = Array2::from_shape_fn((m, ys.len()), |(s, l)| cis(-2.0 * PI * self.ky[[i, s]] * ys[l]));
        (ex, ey)
    }

    fn forward_exact(&self, data: &Array2<Complex64>) -> Array2<Complex64> {
        self.forward_rows(|_| data.clone())
    }

    /// Exact forward sum where sample row `i` sees its own lattice data
    /// `data_for(i)`.
    pub fn forward_rows<F>(&self, data_for: F) -> Array2<Complex64>
    where
        F: Fn(usize) -> Array2<Complex64> + Sync,
    {
        let (rows, cols) = self.sample_dim();
        let xs = self.x.coords();
        let ys = self.y.coords();
        let out_rows: Vec<Vec<Complex64>> = (0..rows)
            .into_par_iter()
            .map(|i| {
                let data = data_for(i);
                debug_assert_eq!(data.dim(), self.lattice_dim());
                let tabs = self.row_tables(i, &xs, &ys);
                let (ex, ey) = (&tabs.0, &tabs.1);
                // t[l, s] = Σ_j X[l, j] Ex[s, j]
                let t = data.dot(&ex.t());
                (0..cols)
                    .map(|s| {
                        ey.row(s)
                            .iter()
                            .zip(t.column(s).iter())
                            .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                    })
                    .collect()
            })
            .collect();
        let mut out = Array2::zeros((rows, cols));
        for (i, row) in out_rows.into_iter().enumerate() {
            for (s, v) in row.into_iter().enumerate() {
                out[[i, s]] = v;
            }
        }
        out
    }

    /// Lattice-shaped adjoint contribution of each sample row, in row order.
    pub fn adjoint_rows(&self, samples: &Array2<Complex64>) -> Vec<Array2<Complex64>> {
        let rows = self.sample_dim().0;
        let xs = self.x.coords();
        let ys = self.y.coords();
        (0..rows)
            .into_par_iter()
            .map(|i| {
                let tabs = self.row_tables(i, &xs, &ys);
                let (ex, ey) = (&tabs.0, &tabs.1);
                // Z = Ey^H diag(R_i) conj(Ex)
                let mut u = ex.mapv(|z| z.conj());
                for (mut r, v) in u.axis_iter_mut(Axis(0)).zip(samples.row(i).iter()) {
                    r.mapv_inplace(|z| z * v);
                }
                let eyh = ey.t().mapv(|z| z.conj());
                eyh.dot(&u)
            })
            .collect()
    }

    fn adjoint_exact(&self, samples: &Array2<Complex64>) -> Array2<Complex64> {
        let mut acc = Array2::zeros(self.lattice_dim());
        for z in self.adjoint_rows(samples) {
            acc += &z;
        }
        acc
    }

    fn gridding_geometry(&self, q: usize) -> Gridding {
        Gridding::new(self.x, self.y, q)
    }

    fn forward_gridded(&self, data: &Array2<Complex64>, q: usize) -> Array2<Complex64> {
        let g = self.gridding_geometry(q);
        let mut grid = Array2::<Complex64>::zeros((g.qy, g.qx));
        for ((l, j), v) in data.indexed_iter() {
            grid[[g.pos_y[l], g.pos_x[j]]] = v / (g.apod_y[l] * g.apod_x[j]);
        }
        fft2(&mut grid, false);
        let mut out = Array2::zeros(self.sample_dim());
        Zip::from(&mut out)
            .and(&self.kx)
            .and(&self.ky)
            .par_for_each(|o, &kx, &ky| {
                let (ix, fx, px) = g.locate_x(kx);
                let (iy, fy, py) = g.locate_y(ky);
                let mut acc = Complex64::new(0.0, 0.0);
                for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                    let yy = (iy + dy) % g.qy;
                    for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                        let xx = (ix + dx) % g.qx;
                        acc += grid[[yy, xx]] * (wy * wx);
                    }
                }
                *o = acc * px * py;
            });
        out
    }

    fn adjoint_gridded(&self, samples: &Array2<Complex64>, q: usize) -> Array2<Complex64> {
        let g = self.gridding_geometry(q);
        let mut grid = Array2::<Complex64>::zeros((g.qy, g.qx));
        for ((kx, ky), v) in self.kx.iter().zip(self.ky.iter()).zip(samples.iter()) {
            let (ix, fx, px) = g.locate_x(*kx);
            let (iy, fy, py) = g.locate_y(*ky);
            let val = v * (px * py).conj();
            for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
                let yy = (iy + dy) % g.qy;
                for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                    let xx = (ix + dx) % g.qx;
                    grid[[yy, xx]] += val * (wy * wx);
                }
            }
        }
        fft2(&mut grid, true);
        Array2::from_shape_fn(self.lattice_dim(), |(l, j)| {
            grid[[g.pos_y[l], g.pos_x[j]]] / (g.apod_y[l] * g.apod_x[j])
        })
    }
}

/// Placement of a lattice inside an oversampled FFT grid.
struct Gridding {
    qx: usize,
    qy: usize,
    pos_x: Vec<usize>,
    pos_y: Vec<usize>,
    apod_x: Vec<f64>,
    apod_y: Vec<f64>,
    x: Axis1,
    y: Axis1,
    shift_x: f64,
    shift_y: f64,
}

fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0
    } else {
        (PI * z).sin() / (PI * z)
    }
}

impl Gridding {
    fn new(x: Axis1, y: Axis1, q: usize) -> Self {
        let qx = q * x.n.max(1);
        let qy = q * y.n.max(1);
        let place = |axis: Axis1, qn: usize| {
            let o = axis.n / 2;
            let pos = (0..axis.n)
                .map(|j| (j as isize - o as isize).rem_euclid(qn as isize) as usize)
                .collect::<Vec<_>>();
            let apod = (0..axis.n)
                .map(|j| sinc((j as f64 - o as f64) / qn as f64).powi(2))
                .collect::<Vec<_>>();
            // lattice coordinate of FFT index 0 relative to the centred origin
            let shift = (o as f64 - (axis.n as f64 - 1.0) / 2.0) * axis.spacing;
            (pos, apod, shift)
        };
        let (pos_x, apod_x, shift_x) = place(x, qx);
        let (pos_y, apod_y, shift_y) = place(y, qy);
        Self {
            qx,
            qy,
            pos_x,
            pos_y,
            apod_x,
            apod_y,
            x,
            y,
            shift_x,
            shift_y,
        }
    }

    fn locate(k: f64, axis: Axis1, qn: usize, shift: f64) -> (usize, f64, Complex64) {
        let xi = k * axis.spacing * qn as f64;
        let base = xi.floor();
        let frac = xi - base;
        let idx = (base as i64).rem_euclid(qn as i64) as usize;
        (idx, frac, cis(-2.0 * PI * k * shift))
    }

    fn locate_x(&self, k: f64) -> (usize, f64, Complex64) {
        Self::locate(k, self.x, self.qx, self.shift_x)
    }

    fn locate_y(&self, k: f64) -> (usize, f64, Complex64) {
        Self::locate(k, self.y, self.qy, self.shift_y)
    }
}

/// Conjugate gradients for a Hermitian positive (semi-)definite operator.
///
/// Returns the solution, iterations used and final relative residual.
pub fn conjugate_gradient(
    apply: impl Fn(&Array2<Complex64>) -> Array2<Complex64>,
    rhs: &Array2<Complex64>,
    tol: f64,
    max_iters: usize,
) -> (Array2<Complex64>, usize, f64) {
    let dot = |a: &Array2<Complex64>, b: &Array2<Complex64>| -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
    };
    let b_norm = dot(rhs, rhs).re.sqrt();
    let mut x = Array2::zeros(rhs.dim());
    if b_norm == 0.0 {
        return (x, 0, 0.0);
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs = dot(&r, &r).re;
    let mut iters = 0;
    while iters < max_iters {
        if rs.sqrt() <= tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap).re;
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        x.scaled_add(Complex64::new(alpha, 0.0), &p);
        r.scaled_add(Complex64::new(-alpha, 0.0), &ap);
        let rs_new = dot(&r, &r).re;
        let beta = rs_new / rs;
        p.mapv_inplace(|z| z * beta);
        p += &r;
        rs = rs_new;
        iters += 1;
    }
    (x, iters, rs.sqrt() / b_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_c(rng: &mut ChaCha8Rng, dim: (usize, usize)) -> Array2<Complex64> {
        Array2::from_shape_fn(dim, |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn operator(mode: NudftMode, seed: u64) -> LatticeNudft {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Axis1 { n: 7, spacing: 0.3 };
        let y = Axis1 { n: 6, spacing: 0.3 };
        let kx = Array2::from_shape_fn((5, 4), |_| (rng.random::<f64>() - 0.5) * 3.0);
        let ky = Array2::from_shape_fn((5, 4), |_| (rng.random::<f64>() - 0.5) * 3.0);
        LatticeNudft::new(x, y, kx, ky, mode).unwrap()
    }

    fn brute_forward(op: &LatticeNudft, data: &Array2<Complex64>) -> Array2<Complex64> {
        let xs = op.x.coords();
        let ys = op.y.coords();
        Array2::from_shape_fn(op.sample_dim(), |(i, s)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, y) in ys.iter().enumerate() {
                for (j, x) in xs.iter().enumerate() {
                    acc += data[[l, j]] * cis(-2.0 * PI * (op.kx[[i, s]] * x + op.ky[[i, s]] * y));
                }
            }
            acc
        })
    }

    fn inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
        a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn exact_matches_brute_force() {
        let op = operator(NudftMode::Exact, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = random_c(&mut rng, op.lattice_dim());
        let fast = op.forward(&data);
        let slow = brute_forward(&op, &data);
        assert!(crate::image::relative_error(&fast, &slow) < 1e-12);
    }

    #[test]
    fn adjoint_dot_both_modes() {
        for mode in [NudftMode::Exact, NudftMode::Gridded { oversample: 4 }] {
            let op = operator(mode, 3);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let x = random_c(&mut rng, op.lattice_dim());
            let y = random_c(&mut rng, op.sample_dim());
            let lhs = inner(&op.forward(&x), &y);
            let rhs = inner(&x, &op.adjoint(&y));
            assert!((lhs - rhs).norm() / lhs.norm() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn gridded_close_to_exact() {
        let exact = operator(NudftMode::Exact, 5);
        let grid = LatticeNudft {
            mode: NudftMode::Gridded { oversample: 8 },
            ..exact.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_c(&mut rng, exact.lattice_dim());
        let err = crate::image::relative_error(&grid.forward(&data), &exact.forward(&data));
        assert!(err < 1e-2, "gridding error {err}");
    }

    #[test]
    fn cg_solves_spd() {
        let a = ndarray::arr2(&[[4.0, 1.0], [1.0, 3.0]]).mapv(|v| Complex64::new(v, 0.0));
        let b = ndarray::arr2(&[[1.0], [2.0]]).mapv(|v| Complex64::new(v, 0.0));
        let (x, _, res) = conjugate_gradient(|v| a.dot(v), &b, 1e-14, 10);
        assert!(res < 1e-12);
        assert!((x[[0, 0]].re - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[[1, 0]].re - 7.0 / 11.0).abs() < 1e-12);
    }
}
