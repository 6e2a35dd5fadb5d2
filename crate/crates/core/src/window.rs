//! Aperture tapers applied before image formation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFamily {
    Taylor,
    Rect,
}

/// Taper and zero-padding used when forming (or un-forming) an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub family: WindowFamily,
    pub nbar: usize,
    /// Peak sidelobe level, dB (negative).
    pub sidelobe_level: f64,
    pub zero_pad_factor: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self::taylor(4, -35.0)
    }
}

impl WindowSpec {
    pub fn taylor(nbar: usize, sidelobe_level: f64) -> Self {
        Self {
            family: WindowFamily::Taylor,
            nbar,
            sidelobe_level,
            zero_pad_factor: 1.0,
        }
    }

    pub fn rect() -> Self {
        Self {
            family: WindowFamily::Rect,
            nbar: 1,
            sidelobe_level: -1.0,
            zero_pad_factor: 1.0,
        }
    }

    pub fn with_zero_pad(mut self, factor: f64) -> Self {
        self.zero_pad_factor = factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nbar < 1 {
            return Err(invalid_param("window nbar must be at least 1"));
        }
        if !(self.sidelobe_level < 0.0) {
            return Err(invalid_param("sidelobe level must be negative dB"));
        }
        if !self.zero_pad_factor.is_finite() || self.zero_pad_factor < 1.0 {
            return Err(invalid_param("zero-pad factor must be >= 1"));
        }
        Ok(())
    }

    /// Length-`n` weights for this family.
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self.family {
            WindowFamily::Rect => Ok(vec![1.0; n]),
            WindowFamily::Taylor => taylor_window(n, self.nbar, self.sidelobe_level),
        }
    }
}

/// Taylor taper with `nbar` nearly-constant sidelobes at `sll` dB.
///
/// Weights are symmetric and scaled so the largest sample is 1.
pub fn taylor_window(n: usize, nbar: usize, sll: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid_param("window length must be at least 1"));
    }
    if nbar < 1 {
        return Err(invalid_param("nbar must be at least 1"));
    }
    if !(sll < 0.0) || !sll.is_finite() {
        return Err(invalid_param("sidelobe level must be negative dB"));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let coeffs = taylor_coefficients(nbar, sll);
    let nf = n as f64;
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 - nf / 2.0 + 0.5) / nf;
            1.0 + 2.0
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, fm)| fm * (2.0 * std::f64::consts::PI * (m + 1) as f64 * x).cos())
                    .sum::<f64>()
        })
        .collect();
    // exact mirror symmetry
    for i in 0..n / 2 {
        let avg = 0.5 * (w[i] + w[n - 1 - i]);
        w[i] = avg;
        w[n - 1 - i] = avg;
    }
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    Ok(w.into_iter().map(|v| v / peak).collect())
}

/// Cosine-series coefficients `F_1 … F_{nbar-1}` of the Taylor pattern.
fn taylor_coefficients(nbar: usize, sll: f64) -> Vec<f64> {
    let r = 10f64.powf(-sll / 20.0);
    let a = r.acosh() / std::f64::consts::PI;
    let a2 = a * a;
    let nb = nbar as f64;
    let sigma2 = nb * nb / (a2 + (nb - 0.5) * (nb - 0.5));
    (1..nbar)
        .map(|m| {
            let mf = m as f64;
            let numer: f64 = (1..nbar)
                .map(|i| {
                    let fi = i as f64 - 0.5;
                    1.0 - mf * mf / sigma2 / (a2 + fi * fi)
                })
                .product();
            let denom: f64 = (1..nbar)
                .filter(|&i| i != m)
                .map(|i| 1.0 - mf * mf / (i * i) as f64)
                .product();
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            sign * numer / (2.0 * denom)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Factorial form of the Taylor coefficients, evaluated independently.
    fn oracle(n: usize, nbar: usize, sll: f64) -> Vec<f64> {
        let eta = 10f64.powf(-sll / 20.0);
        let a = (eta + (eta * eta - 1.0).sqrt()).ln() / std::f64::consts::PI;
        let nb = nbar as f64;
        let sigma = nb / (a * a + (nb - 0.5).powi(2)).sqrt();
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        let f: Vec<f64> = (1..nbar)
            .map(|m| {
                let zeros: f64 = (1..nbar)
                    .map(|j| {
                        let z2 = sigma * sigma * (a * a + (j as f64 - 0.5).powi(2));
                        1.0 - (m * m) as f64 / z2
                    })
                    .product();
                fact(nbar - 1).powi(2) / (fact(nbar - 1 + m) * fact(nbar - 1 - m)) * zeros
            })
            .collect();
        let raw: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 - (n as f64 - 1.0) / 2.0) / n as f64;
                1.0 + 2.0
                    * f.iter()
                        .enumerate()
                        .map(|(k, c)| c * (2.0 * std::f64::consts::PI * (k + 1) as f64 * x).cos())
                        .sum::<f64>()
            })
            .collect();
        let peak = raw.iter().cloned().fold(f64::MIN, f64::max);
        raw.into_iter().map(|v| v / peak).collect()
    }

    #[test]
    fn single_sample() {
        assert_eq!(taylor_window(1, 4, -35.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_and_peak_one() {
        let w = taylor_window(64, 4, -35.0).unwrap();
        for i in 0..64 {
            assert_eq!(w[i], w[63 - i]);
        }
        let peak = w.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(peak, 1.0);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn matches_factorial_oracle() {
        for (n, nbar, sll) in [(64, 4, -35.0), (33, 5, -40.0), (100, 4, -30.0), (16, 2, -25.0)] {
            let w = taylor_window(n, nbar, sll).unwrap();
            let o = oracle(n, nbar, sll);
            for (a, b) in w.iter().zip(&o) {
                assert!((a - b).abs() <= 1e-10, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn sidelobes_near_design_level() {
        // zero-padded DFT of the taper; highest sidelobe outside the main lobe
        let n = 64;
        let w = taylor_window(n, 4, -35.0).unwrap();
        let pad = 64 * n;
        let resp: Vec<f64> = (0..pad / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, wi) in w.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / pad as f64;
                    re += wi * ph.cos();
                    im += wi * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect();
        let peak = resp[0];
        let mut k = 1;
        while resp[k] < resp[k - 1] {
            k += 1;
        }
        let side = resp[k..].iter().cloned().fold(0.0, f64::max);
        let db = 20.0 * (side / peak).log10();
        assert!((db + 35.0).abs() < 1.0, "sidelobe {db} dB");
    }

    #[test]
    fn rejects_nonnegative_sll() {
        assert!(taylor_window(8, 4, 0.0).is_err());
        assert!(taylor_window(8, 4, 3.0).is_err());
        assert!(taylor_window(8, 0, -30.0).is_err());
        assert!(WindowSpec::rect().with_zero_pad(0.5).validate().is_err());
    }

    #[test]
    fn rect_is_flat() {
        assert_eq!(WindowSpec::rect().weights(5).unwrap(), vec![1.0; 5]);
    }
}
