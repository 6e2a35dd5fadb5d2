//! Complex image chips and the spatial-domain operations applied to them:
//! cropping, rotation, circular shifts and Fourier-domain sub-pixel shifts.

use ndarray::{s, Array2};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};

/// Complex scene chip. Rows run along range (Y), columns along cross-range (X);
/// the physical origin is the image centre.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    data: Array2<Complex64>,
    pixel_spacing: f64,
}

impl ComplexImage {
    pub fn new(data: Array2<Complex64>, pixel_spacing: f64) -> Result<Self> {
        if !pixel_spacing.is_finite() || pixel_spacing <= 0.0 {
            return Err(invalid_param("pixel spacing must be positive"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid_input("image contains non-finite values"));
        }
        Ok(Self { data, pixel_spacing })
    }

    pub fn zeros(rows: usize, cols: usize, pixel_spacing: f64) -> Result<Self> {
        Self::new(Array2::zeros((rows, cols)), pixel_spacing)
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.data)
    }

    pub(crate) fn with_data(&self, data: Array2<Complex64>) -> Self {
        Self {
            data,
            pixel_spacing: self.pixel_spacing,
        }
    }

    /// Cross-range coordinate of column `c` (metres from centre).
    pub fn col_coord(&self, c: usize) -> f64 {
        (c as f64 - (self.cols() as f64 - 1.0) / 2.0) * self.pixel_spacing
    }

    /// Range coordinate of row `r` (metres from centre).
    pub fn row_coord(&self, r: usize) -> f64 {
        (r as f64 - (self.rows() as f64 - 1.0) / 2.0) * self.pixel_spacing
    }
}

pub(crate) fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`; returns the absolute error when `b` is zero.
pub fn relative_error(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim(), "relative_error: shape mismatch");
    let diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let denom = frobenius(b);
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

/// Direction of an in-plane rotation as displayed (row 0 at the top).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rotation {
    Cw,
    Ccw,
}

/// Central `h × w` window; odd remainders put the extra row/column at the end.
pub fn crop_center(img: &ComplexImage, h: usize, w: usize) -> Result<ComplexImage> {
    if h > img.rows() || w > img.cols() {
        return Err(invalid_param(format!(
            "crop {h}x{w} larger than image {}x{}",
            img.rows(),
            img.cols()
        )));
    }
    let r0 = (img.rows() - h) / 2;
    let c0 = (img.cols() - w) / 2;
    Ok(img.with_data(img.data.slice(s![r0..r0 + h, c0..c0 + w]).to_owned()))
}

fn bilinear(data: &Array2<Complex64>, r: f64, c: f64) -> Complex64 {
    let (rows, cols) = data.dim();
    let r0 = r.floor();
    let c0 = c.floor();
    let fr = r - r0;
    let fc = c - c0;
    let mut acc = Complex64::new(0.0, 0.0);
    for (dr, wr) in [(0isize, 1.0 - fr), (1, fr)] {
        for (dc, wc) in [(0isize, 1.0 - fc), (1, fc)] {
            let w = wr * wc;
            if w == 0.0 {
                continue;
            }
            let rr = r0 as isize + dr;
            let cc = c0 as isize + dc;
            if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                return Complex64::new(0.0, 0.0);
            }
            acc += data[[rr as usize, cc as usize]] * w;
        }
    }
    acc
}

/// Rotates about the image centre with bilinear resampling. Output pixels whose
/// source falls outside the chip are zero; dimensions are preserved.
pub fn rotate_image(img: &ComplexImage, angle: f64, direction: Rotation) -> Result<ComplexImage> {
    if !angle.is_finite() || angle.abs() > std::f64::consts::PI + 1e-12 {
        return Err(invalid_param("rotation angle must lie in [-pi, pi]"));
    }
    if angle == 0.0 {
        return Ok(img.clone());
    }
    // counter-clockwise on screen is positive in (x right, y up)
    let a = match direction {
        Rotation::Ccw => angle,
        Rotation::Cw => -angle,
    };
    let (sin, cos) = a.sin_cos();
    let (rows, cols) = img.data.dim();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let out = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let x = c as f64 - cx;
        let y = cy - r as f64;
        // inverse map: rotate output position back by -a
        let xs = x * cos + y * sin;
        let ys = -x * sin + y * cos;
        bilinear(&img.data, cy - ys, cx + xs)
    });
    Ok(img.with_data(out))
}

/// Integer circular shift: content moves `dx` columns right and `dy` rows down.
pub fn roll(img: &ComplexImage, dx: isize, dy: isize) -> ComplexImage {
    let (rows, cols) = img.data.dim();
    if rows == 0 || cols == 0 {
        return img.clone();
    }
    let out = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let sr = (r as isize - dy).rem_euclid(rows as isize) as usize;
        let sc = (c as isize - dx).rem_euclid(cols as isize) as usize;
        img.data[[sr, sc]]
    });
    img.with_data(out)
}

/// Signed DFT bin index in `[-n/2, n/2)`.
fn signed_bin(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Fourier-domain translation by `(dx, dy)` metres (cross-range, range).
///
/// The spectrum is multiplied by `exp(-j2π(u·dx + v·dy))`, so the shift is
/// circular and exactly unitary.
pub fn subpixel_shift(img: &ComplexImage, dx: f64, dy: f64) -> Result<ComplexImage> {
    if !dx.is_finite() || !dy.is_finite() {
        return Err(invalid_param("shift must be finite"));
    }
    let (rows, cols) = img.data.dim();
    if rows == 0 || cols == 0 || (dx == 0.0 && dy == 0.0) {
        return Ok(img.clone());
    }
    let mut spec = img.data.clone();
    fft2(&mut spec, false);
    let du = dx / (cols as f64 * img.pixel_spacing);
    let dv = dy / (rows as f64 * img.pixel_spacing);
    let ramp_u: Vec<Complex64> = (0..cols)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * signed_bin(k, cols) * du))
        .collect();
    let ramp_v: Vec<Complex64> = (0..rows)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * signed_bin(k, rows) * dv))
        .collect();
    for ((r, c), z) in spec.indexed_iter_mut() {
        *z *= ramp_v[r] * ramp_u[c];
    }
    fft2(&mut spec, true);
    let scale = 1.0 / (rows * cols) as f64;
    spec.mapv_inplace(|z| z * scale);
    Ok(img.with_data(spec))
}

/// Scales to unit Frobenius norm.
pub fn normalize_unit_norm(img: &ComplexImage) -> Result<ComplexImage> {
    let n = img.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(invalid_input("cannot normalise a zero image"));
    }
    Ok(img.with_data(img.data.mapv(|z| z / n)))
}

/// Unnormalised in-place 2-D FFT (`inverse` selects the `+j` kernel).
pub(crate) fn fft2(data: &mut Array2<Complex64>, inverse: bool) {
    let (rows, cols) = data.dim();
    if rows == 0 || cols == 0 {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(cols)
    } else {
        planner.plan_fft_forward(cols)
    };
    let col_fft = if inverse {
        planner.plan_fft_inverse(rows)
    } else {
        planner.plan_fft_forward(rows)
    };
    {
        let slice = data.as_slice_mut().expect("fft2 expects a standard-layout array");
        for row in slice.chunks_exact_mut(cols) {
            row_fft.process(row);
        }
    }
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[[r, c]];
        }
        col_fft.process(&mut column);
        for r in 0..rows {
            data[[r, c]] = column[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ComplexImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        ComplexImage::new(data, 0.3).unwrap()
    }

    fn smooth_image(n: usize) -> ComplexImage {
        let c = (n as f64 - 1.0) / 2.0;
        let blobs = [(0.0, 0.0, 4.0), (5.0, -3.0, 3.0), (-4.0, 6.0, 3.5)];
        let data = Array2::from_shape_fn((n, n), |(r, col)| {
            let x = col as f64 - c;
            let y = r as f64 - c;
            blobs
                .iter()
                .enumerate()
                .map(|(i, &(bx, by, w))| {
                    let g = (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * w * w)).exp();
                    Complex64::from_polar(g, 0.7 * i as f64)
                })
                .sum()
        });
        ComplexImage::new(data, 0.3).unwrap()
    }

    fn interior_error(a: &ComplexImage, b: &ComplexImage) -> f64 {
        let n = a.rows() as f64;
        let c = (n - 1.0) / 2.0;
        let radius = n / 2.0 - 2.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for ((r, col), z) in a.data().indexed_iter() {
            let d = ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)).sqrt();
            if d <= radius {
                num += (z - b.data()[[r, col]]).norm_sqr();
                den += b.data()[[r, col]].norm_sqr();
            }
        }
        (num / den).sqrt()
    }

    #[test]
    fn crop_cases() {
        let img = random_image(128, 128, 1);
        let c = crop_center(&img, 64, 64).unwrap();
        assert_eq!(c.data()[[0, 0]], img.data()[[32, 32]]);
        assert_eq!(crop_center(&img, 128, 128).unwrap(), img);
        let odd = random_image(65, 65, 2);
        let c = crop_center(&odd, 64, 64).unwrap();
        assert_eq!(c.data()[[0, 0]], odd.data()[[0, 0]]);
        assert!(crop_center(&img, 129, 64).is_err());
    }

    #[test]
    fn rotation_identity_and_quarter_turn() {
        let img = random_image(9, 9, 3);
        assert_eq!(rotate_image(&img, 0.0, Rotation::Cw).unwrap(), img);

        let mut data = Array2::zeros((9, 9));
        data[[2, 6]] = Complex64::new(1.0, 0.5);
        let imp = ComplexImage::new(data, 0.3).unwrap();
        let rot = rotate_image(&imp, std::f64::consts::FRAC_PI_2, Rotation::Ccw).unwrap();
        // (row 2, col 6) is 2 right / 2 up of centre; a quarter turn ccw moves it 2 up / 2 left
        assert!((rot.data()[[2, 2]] - Complex64::new(1.0, 0.5)).norm() < 1e-9);
        assert!((rot.norm() - 1.25f64.sqrt()).abs() < 1e-9);
        let back = rotate_image(&rot, std::f64::consts::FRAC_PI_2, Rotation::Cw).unwrap();
        assert!(relative_error(back.data(), imp.data()) < 1e-9);
    }

    #[test]
    fn rotation_round_trip_smooth() {
        let img = smooth_image(48);
        let a = 0.3;
        let there = rotate_image(&img, a, Rotation::Cw).unwrap();
        let back = rotate_image(&there, a, Rotation::Ccw).unwrap();
        assert!(interior_error(&back, &img) <= 0.05);
    }

    #[test]
    fn rotation_preserves_dimensions() {
        let img = random_image(12, 20, 5);
        let r = rotate_image(&img, 1.0, Rotation::Ccw).unwrap();
        assert_eq!(r.data().dim(), (12, 20));
        assert!(rotate_image(&img, 4.0, Rotation::Ccw).is_err());
    }

    #[test]
    fn subpixel_zero_is_identity() {
        let img = random_image(16, 16, 4);
        assert_eq!(subpixel_shift(&img, 0.0, 0.0).unwrap(), img);
    }

    #[test]
    fn one_pixel_shift_is_roll() {
        for (rows, cols) in [(16, 16), (15, 17), (32, 8)] {
            let img = random_image(rows, cols, 7);
            let shifted = subpixel_shift(&img, 0.3, 0.0).unwrap();
            let rolled = roll(&img, 1, 0);
            assert!(relative_error(shifted.data(), rolled.data()) <= 1e-9);
            let shifted = subpixel_shift(&img, 0.0, -0.6).unwrap();
            let rolled = roll(&img, 0, -2);
            assert!(relative_error(shifted.data(), rolled.data()) <= 1e-9);
        }
    }

    #[test]
    fn half_shifts_compose() {
        let img = random_image(32, 32, 8);
        let half = subpixel_shift(&img, 0.15, 0.15).unwrap();
        let twice = subpixel_shift(&half, 0.15, 0.15).unwrap();
        let once = subpixel_shift(&img, 0.3, 0.3).unwrap();
        assert!(relative_error(twice.data(), once.data()) <= 1e-9);
        assert!((half.norm() - img.norm()).abs() / img.norm() <= 1e-9);
    }

    #[test]
    fn unit_norm() {
        let img = random_image(8, 8, 9);
        let u = normalize_unit_norm(&img).unwrap();
        assert!((u.norm() - 1.0).abs() <= 1e-12);
        let again = normalize_unit_norm(&u).unwrap();
        assert!(relative_error(again.data(), u.data()) <= 1e-12);
        let zero = ComplexImage::zeros(4, 4, 0.3).unwrap();
        assert!(normalize_unit_norm(&zero).is_err());
    }

    #[test]
    fn rejects_bad_images() {
        let mut data = Array2::zeros((2, 2));
        data[[0, 0]] = Complex64::new(f64::NAN, 0.0);
        assert!(ComplexImage::new(data, 0.3).is_err());
        assert!(ComplexImage::zeros(2, 2, 0.0).is_err());
    }
}
