//! Two-sided correlation sequences with an explicit lag origin.

use crate::error::{Error, Result};
use crate::fft;
use crate::spectrum::SpectralDensity;

/// Real correlation values over lags `[-max_lag, max_lag]`.
///
/// Used for both autocorrelations (symmetric, lag-0 dominant) and
/// cross-correlations (generally asymmetric). `values[max_lag]` is lag 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSequence {
    max_lag: usize,
    values: Vec<f64>,
    sample_rate: f64,
}

impl CorrelationSequence {
    pub fn new(values: Vec<f64>, max_lag: usize, sample_rate: f64) -> Result<Self> {
        if values.len() != 2 * max_lag + 1 {
            return Err(Error::DimensionMismatch(format!(
                "correlation over [-{max_lag}, {max_lag}] needs {} values, got {}",
                2 * max_lag + 1,
                values.len()
            )));
        }
        Ok(Self {
            max_lag,
            values,
            sample_rate,
        })
    }

    pub fn zero(max_lag: usize, sample_rate: f64) -> Self {
        Self {
            max_lag,
            values: vec![0.0; 2 * max_lag + 1],
            sample_rate,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Value at a signed lag; zero outside the stored range.
    pub fn at(&self, lag: i64) -> f64 {
        if lag.unsigned_abs() as usize > self.max_lag {
            0.0
        } else {
            self.values[(lag + self.max_lag as i64) as usize]
        }
    }

    pub fn lag0(&self) -> f64 {
        self.values[self.max_lag]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest asymmetry `|r[l] - r[-l]|`, zero for exact autocorrelations.
    pub fn max_asymmetry(&self) -> f64 {
        (1..=self.max_lag as i64)
            .map(|l| (self.at(l) - self.at(-l)).abs())
            .fold(0.0, f64::max)
    }

    /// Time-reversed sequence, `r~[l] = r[-l]`.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            max_lag: self.max_lag,
            values,
            sample_rate: self.sample_rate,
        }
    }

    /// Forward transform onto a uniform grid of `grid_size` bins.
    ///
    /// Fails if the truncated sequence is not nonnegative-definite within
    /// tolerance (autocorrelation input is assumed).
    pub fn to_psd(&self, grid_size: usize) -> Result<SpectralDensity> {
        if 2 * self.max_lag + 1 > grid_size {
            return Err(Error::InsufficientLagSupport {
                needed: 2 * self.max_lag + 1,
                available: grid_size,
            });
        }
        let mut padded = vec![0.0; grid_size];
        for lag in -(self.max_lag as i64)..=(self.max_lag as i64) {
            let idx = lag.rem_euclid(grid_size as i64) as usize;
            padded[idx] = self.at(lag);
        }
        let spec = fft::real_to_spectrum(&padded, grid_size);
        let peak = spec.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let tol = 1e-9 * peak.max(1e-300);
        let values: Vec<f64> = spec
            .iter()
            .map(|c| if c.re < 0.0 && c.re > -tol { 0.0 } else { c.re })
            .collect();
        SpectralDensity::from_values(values, self.sample_rate)
    }
}

/// Inverse transform of a power spectrum, truncated to `[-max_lag, max_lag]`.
pub fn psd_to_autocorr(psd: &SpectralDensity, max_lag: usize) -> Result<CorrelationSequence> {
    let n = psd.grid_size();
    if max_lag >= n / 2 {
        return Err(Error::InsufficientLagSupport {
            needed: max_lag,
            available: n / 2 - 1,
        });
    }
    let time = fft::real_spectrum_to_real(psd.values());
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        values.push(time[lag.rem_euclid(n as i64) as usize]);
    }
    CorrelationSequence::new(values, max_lag, psd.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FS: f64 = 16000.0;

    #[test]
    fn white_psd_gives_unit_impulse() {
        let psd = SpectralDensity::flat(1.0, 256, FS);
        let r = psd_to_autocorr(&psd, 8).unwrap();
        assert!((r.lag0() - 1.0).abs() < 1e-12);
        for l in 1..=8 {
            assert!(r.at(l).abs() < 1e-12);
            assert!(r.at(-l).abs() < 1e-12);
        }
    }

    #[test]
    fn single_conjugate_bin_pair_gives_cosine() {
        // Mass `m` split over bins +-k transforms to (2m/N) cos(2 pi k l / N).
        let n = 256;
        let k = 10;
        let mass = 3.0;
        let mut v = vec![0.0; n];
        v[k] = mass;
        v[n - k] = mass;
        let psd = SpectralDensity::from_values(v, FS).unwrap();
        let r = psd_to_autocorr(&psd, 20).unwrap();
        for l in -20i64..=20 {
            let expected =
                2.0 * mass / n as f64 * (2.0 * std::f64::consts::PI * k as f64 * l as f64
                    / n as f64)
                    .cos();
            assert!(
                (r.at(l) - expected).abs() < 1e-12,
                "lag {l}: {} vs {expected}",
                r.at(l)
            );
        }
    }

    #[test]
    fn roundtrip_reproduces_smooth_psd() {
        // Smooth low-pass shape; full support captured by max_lag = N/2 - 1.
        let n = 1024;
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                1.0 / (1.0 + 0.9 * 0.9 - 2.0 * 0.9 * w.cos())
            })
            .collect();
        let psd = SpectralDensity::from_values(values, FS).unwrap();
        let r = psd_to_autocorr(&psd, n / 2 - 1).unwrap();
        let back = r.to_psd(n).unwrap();
        for k in 0..n {
            let rel = (back.value(k) - psd.value(k)).abs() / psd.value(k);
            assert!(rel < 1e-9, "bin {k}: rel err {rel}");
        }
    }

    #[test]
    fn rejects_excessive_lag() {
        let psd = SpectralDensity::flat(1.0, 64, FS);
        assert!(psd_to_autocorr(&psd, 32).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// Autocorrelations from valid spectra are symmetric with dominant lag 0.
        #[test]
        fn autocorr_symmetric_and_dominated(seed in 0u64..1000) {
            let n = 256;
            let values: Vec<f64> = (0..n)
                .map(|k| {
                    let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    let a = 0.3 + 0.6 * ((seed % 7) as f64 / 7.0);
                    1.0 / (1.0 + a * a - 2.0 * a * w.cos())
                        + 0.1 * (1.0 + (w * ((seed % 5) + 1) as f64).cos())
                })
                .collect();
            let psd = SpectralDensity::from_values(values, FS).unwrap();
            let r = psd_to_autocorr(&psd, 100).unwrap();
            prop_assert!(r.max_asymmetry() < 1e-12);
            for l in 1..=100i64 {
                prop_assert!(r.at(l).abs() <= r.lag0() * (1.0 + 1e-12));
            }
        }
    }
}
