//! Power spectral densities sampled on a uniform frequency grid.
//!
//! A [`SpectralDensity`] holds one nonnegative real value per FFT bin over
//! `[0, fs)`. Real processes have conjugate-symmetric spectra, so bin `k`
//! must equal bin `N-k`; the constructor enforces this together with
//! nonnegativity, and the inverse transform of a valid density is real.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Relative tolerance for symmetry and nonnegativity checks.
const VALIDATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    sample_rate: f64,
    values: Vec<f64>,
}

impl SpectralDensity {
    /// Validates and wraps per-bin power values.
    ///
    /// Small negative excursions and asymmetries below `1e-9` of the peak
    /// (floating-point noise from estimators) are tolerated; the stored
    /// values are symmetrized and clamped to zero so downstream transforms
    /// stay exactly real.
    pub fn from_values(values: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if values.len() < 4 {
            return Err(Error::InvalidSpectrum(format!(
                "grid size {} too small",
                values.len()
            )));
        }
        if sample_rate.is_nan() || sample_rate <= 0.0 {
            return Err(Error::InvalidSpectrum(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        let peak = values.iter().cloned().fold(0.0f64, f64::max);
        if !peak.is_finite() {
            return Err(Error::InvalidSpectrum("non-finite value".into()));
        }
        let tol = VALIDATION_TOL * peak.max(1e-300);
        let n = values.len();
        let mut out = values;
        for k in 0..n {
            let v = out[k];
            if v < -tol {
                return Err(Error::InvalidSpectrum(format!(
                    "negative power {v} at bin {k}"
                )));
            }
            let mirror = out[if k == 0 { 0 } else { n - k }];
            if (v - mirror).abs() > tol {
                return Err(Error::InvalidSpectrum(format!(
                    "conjugate symmetry violated at bin {k}: {v} vs {mirror}"
                )));
            }
        }
        // Symmetrize exactly and clamp the tolerated noise.
        for k in 1..n / 2 {
            let avg = 0.5 * (out[k] + out[n - k]);
            out[k] = avg;
            out[n - k] = avg;
        }
        for v in out.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            sample_rate,
            values: out,
        })
    }

    /// Flat (white) spectrum with the given per-bin power.
    pub fn flat(power: f64, grid_size: usize, sample_rate: f64) -> Self {
        Self::from_values(vec![power; grid_size], sample_rate)
            .expect("flat spectrum is always valid")
    }

    /// First-order autoregressive spectrum `1 / |1 - a e^{-jw}|^2`.
    pub fn ar1(a: f64, grid_size: usize, sample_rate: f64) -> Self {
        let values = (0..grid_size)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / grid_size as f64;
                1.0 / (1.0 + a * a - 2.0 * a * w.cos())
            })
            .collect();
        Self::from_values(values, sample_rate).expect("ar1 spectrum is always valid")
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, bin: usize) -> f64 {
        self.values[bin]
    }

    /// Mean over bins, i.e. the lag-zero autocorrelation (signal power).
    pub fn power(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn bin_frequency_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_bins() {
        let mut v = vec![1.0; 16];
        v[3] = -0.5;
        v[13] = -0.5;
        assert!(SpectralDensity::from_values(v, 16000.0).is_err());
    }

    #[test]
    fn rejects_asymmetric() {
        let mut v = vec![1.0; 16];
        v[3] = 2.0;
        assert!(SpectralDensity::from_values(v, 16000.0).is_err());
    }

    #[test]
    fn flat_power_is_value() {
        let psd = SpectralDensity::flat(2.5, 64, 16000.0);
        assert!((psd.power() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn ar1_power_matches_closed_form() {
        // r[0] of an AR(1) spectrum is 1/(1-a^2); the grid sum converges fast.
        let a = 0.5;
        let psd = SpectralDensity::ar1(a, 4096, 16000.0);
        let expected = 1.0 / (1.0 - a * a);
        assert!((psd.power() - expected).abs() / expected < 1e-9);
    }
}
