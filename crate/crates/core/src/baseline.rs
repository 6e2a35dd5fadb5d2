//! Comparison augmenters: rotating the nearest chip, and blending the two
//! nearest chips after rotating both to a common pose.
//!
//! Azimuth increases counter-clockwise on screen (row 0 at the top), matching
//! how formed images turn as the sensor moves; see the `rotation_tracks_pose`
//! test.

use ndarray::Array2;
use num_complex::Complex64;

use crate::dataset::{circular_distance, wrap_azimuth, wrap_signed};
use crate::error::{invalid_input, Error, Result};
use crate::image::{rotate_image, ComplexImage, Rotation};

/// Two training chips bracketing a query pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseNeighborhood {
    pub theta_a: f64,
    pub image_a: ComplexImage,
    pub theta_b: f64,
    pub image_b: ComplexImage,
}

/// The two distinct azimuths closest to `theta_c` on the circle, closer first.
/// Ties go to the smaller azimuth in `[0, 2π)`.
pub fn nearest_poses(azimuths: &[f64], theta_c: f64) -> Result<(f64, f64)> {
    let mut pool: Vec<f64> = azimuths.iter().map(|&t| wrap_azimuth(t)).collect();
    if pool.iter().any(|t| !t.is_finite()) {
        return Err(invalid_input("azimuths must be finite"));
    }
    pool.sort_by(f64::total_cmp);
    pool.dedup();
    if pool.len() < 2 {
        return Err(invalid_input("need at least two distinct poses"));
    }
    pool.sort_by(|&a, &b| {
        circular_distance(a, theta_c)
            .total_cmp(&circular_distance(b, theta_c))
            .then(a.total_cmp(&b))
    });
    Ok((pool[0], pool[1]))
}

/// Counter-clockwise (on screen) by the pose difference, cropped to the
/// original size.
pub fn rotate_pose(image: &ComplexImage, theta_src: f64, theta_c: f64) -> Result<ComplexImage> {
    rotate_image(image, wrap_signed(theta_c - theta_src), Rotation::Ccw)
}

/// Blend weights `(w_a, w_b)`: each pose is weighted by the other's distance
/// to `theta_c`, after unwrapping all three angles into one branch. They are
/// non-negative and sum to exactly one.
pub fn interp_weights(theta_a: f64, theta_b: f64, theta_c: f64) -> Result<(f64, f64)> {
    if circular_distance(theta_a, theta_b) == 0.0 {
        return Err(invalid_input("interpolation needs two distinct poses"));
    }
    // work in the branch of the smaller wrapped azimuth so that swapping the
    // labels reproduces the same numbers
    let swapped = wrap_azimuth(theta_b) < wrap_azimuth(theta_a);
    let (p, q) = if swapped {
        (theta_b, theta_a)
    } else {
        (theta_a, theta_b)
    };
    let q = p + wrap_signed(q - p);
    let c = p + wrap_signed(theta_c - p);
    let dp = (p - c).abs();
    let dq = (q - c).abs();
    // the larger weight is formed by division and the other by exact subtraction
    let (wp, wq) = if dp <= dq {
        let w = dq / (dp + dq);
        (w, 1.0 - w)
    } else {
        let w = dp / (dp + dq);
        (1.0 - w, w)
    };
    Ok(if swapped { (wq, wp) } else { (wp, wq) })
}

/// `CR_{θc}( w_a R_{θa}(I_a) + w_b R_{θb}(I_b) )` with `R` clockwise and `CR`
/// counter-clockwise rotations about the centre.
pub fn linear_interp_pose(nbr: &PoseNeighborhood, theta_c: f64) -> Result<ComplexImage> {
    let (ra, ca) = nbr.image_a.data().dim();
    if nbr.image_b.data().dim() != (ra, ca) {
        return Err(Error::DimensionMismatch(format!(
            "neighbour images {:?} and {:?}",
            (ra, ca),
            nbr.image_b.data().dim()
        )));
    }
    let (wa, wb) = interp_weights(nbr.theta_a, nbr.theta_b, theta_c)?;
    let a = rotate_image(&nbr.image_a, wrap_signed(nbr.theta_a), Rotation::Cw)?;
    let b = rotate_image(&nbr.image_b, wrap_signed(nbr.theta_b), Rotation::Cw)?;
    let blend = Array2::from_shape_fn((ra, ca), |ix| a.data()[ix] * wa + b.data()[ix] * wb);
    let mixed = nbr.image_a.with_data(blend);
    rotate_image(&mixed, wrap_signed(theta_c), Rotation::Ccw)
}

/// Replaces every pixel by its magnitude.
pub fn magnitude_only(image: &ComplexImage) -> ComplexImage {
    image.with_data(image.data().mapv(|z| Complex64::new(z.norm(), 0.0)))
}
