//! Training targets derived from class and azimuth, and the three-part loss.

use std::f64::consts::FRAC_PI_2;

use crate::dataset::{wrap_signed, TargetClass};
use crate::error::{invalid_input, Result};

/// Probabilities are clamped into `[ε, 1 − ε]` before taking logs.
pub const LOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    /// One-hot class vector.
    pub y1: [f64; 10],
    /// `sin θ`
    pub y2: f64,
    /// 1 when θ lies in the front half-plane `[−π/2, π/2]`.
    pub y3: u8,
}

pub fn derive_labels(class_id: usize, theta: f64) -> Result<LabelSet> {
    let class = TargetClass::from_id(class_id)?;
    let mut y1 = [0.0; 10];
    y1[class.id()] = 1.0;
    let t = wrap_signed(theta);
    Ok(LabelSet {
        y1,
        y2: theta.sin(),
        y3: u8::from((-FRAC_PI_2..=FRAC_PI_2).contains(&t)),
    })
}

/// Network outputs: class simplex, `sin θ` regression and front/back probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub y1: [f64; 10],
    pub y2: f64,
    pub y3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub total: f64,
    /// Some probability had to be clamped into the open interval.
    pub clamped: bool,
}

pub fn multitask_loss(pred: &Prediction, labels: &LabelSet) -> Result<LossTerms> {
    if pred.y1.iter().chain([&pred.y2, &pred.y3]).any(|v| !v.is_finite()) {
        return Err(invalid_input("prediction contains non-finite values"));
    }
    let sum: f64 = pred.y1.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(invalid_input(format!("class probabilities sum to {sum}, not 1")));
    }
    let mut clamped = false;
    let mut clamp = |p: f64| {
        let q = p.clamp(LOSS_EPS, 1.0 - LOSS_EPS);
        clamped |= q != p;
        q
    };
    let l1 = -labels
        .y1
        .iter()
        .zip(pred.y1.iter())
        .map(|(y, &p)| {
            let p = clamp(p);
            if *y == 0.0 {
                0.0
            } else {
                y * p.ln()
            }
        })
        .sum::<f64>();
    let l2 = (labels.y2 - pred.y2).powi(2);
    let p3 = clamp(pred.y3);
    let y3 = f64::from(labels.y3);
    let l3 = -y3 * p3.ln() - (1.0 - y3) * (1.0 - p3).ln();
    if clamped {
        log::debug!("multitask loss: prediction clamped into [{LOSS_EPS:e}, 1 - {LOSS_EPS:e}]");
    }
    Ok(LossTerms {
        l1,
        l2,
        l3,
        total: l1 + l2 + l3,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn label_examples() {
        let l = derive_labels(3, 0.0).unwrap();
        assert_eq!(l.y1.iter().sum::<f64>(), 1.0);
        assert_eq!(l.y1[3], 1.0);
        assert_eq!((l.y2, l.y3), (0.0, 1));
        let l = derive_labels(0, PI).unwrap();
        assert!(l.y2.abs() <= 1e-15);
        assert_eq!(l.y3, 0);
        let l = derive_labels(9, 1.5 * PI).unwrap();
        assert!((l.y2 + 1.0).abs() < 1e-15);
        assert_eq!(l.y3, 1);
        assert!(derive_labels(10, 0.0).is_err());
    }

    #[test]
    fn labels_determine_azimuth() {
        for deg in 0..360 {
            let th = (deg as f64).to_radians();
            let l = derive_labels(0, th).unwrap();
            let base = l.y2.clamp(-1.0, 1.0).asin();
            let rec = if l.y3 == 1 { base } else { PI - base };
            let err = crate::dataset::circular_distance(rec, th);
            // ±90° sit on the boundary, where both branches coincide
            assert!(err < 1e-6, "{deg}: {err}");
        }
    }

    #[test]
    fn uniform_prediction() {
        let l = derive_labels(2, 0.3).unwrap();
        let p = Prediction {
            y1: [0.1; 10],
            y2: l.y2,
            y3: 0.5,
        };
        let t = multitask_loss(&p, &l).unwrap();
        assert!((t.l1 - 10f64.ln()).abs() < 1e-12);
        assert!((t.l1 - 2.302585).abs() < 1e-6);
        assert!(!t.clamped);
    }

    #[test]
    fn perfect_prediction_clamps() {
        let l = derive_labels(5, 2.0).unwrap();
        let p = Prediction {
            y1: l.y1,
            y2: l.y2,
            y3: f64::from(l.y3),
        };
        let t = multitask_loss(&p, &l).unwrap();
        assert!(t.total <= 3e-11);
        assert!(t.clamped);
        assert!(t.l1 >= 0.0 && t.l2 >= 0.0 && t.l3 >= 0.0);
    }

    #[test]
    fn squared_sine_error() {
        let l = derive_labels(1, 0.0).unwrap();
        let p = Prediction {
            y1: [0.1; 10],
            y2: 0.5,
            y3: 0.5,
        };
        assert!((multitask_loss(&p, &l).unwrap().l2 - 0.25).abs() < 1e-15);
        let bad = Prediction { y1: [0.2; 10], ..p };
        assert!(multitask_loss(&bad, &l).is_err());
    }
}
