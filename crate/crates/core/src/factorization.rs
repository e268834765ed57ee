//! Scalar spectral factorization and the causality-penalty machinery.
//!
//! `scalar_spectral_factor` splits a power spectrum into a minimum-phase
//! factor `G` with `|G|^2 = psd`, where both `G` and `1/G` are causal. The
//! whitened cross-correlation built from such a factor carries the entire
//! delay-error story: the excess MSE of a causal filter with delay `alpha`
//! is exactly the energy of that sequence at times `t < -alpha`.

use crate::curve::{CurveMethod, DelayErrorCurve};
use crate::error::{Error, Result};
use crate::fft;
use crate::spectrum::SpectralDensity;
use num_complex::Complex64;

pub const DEFAULT_FLOOR_DB: f64 = -120.0;

/// Minimum-phase factor of a power spectrum: causal, causally invertible,
/// `|spectrum|^2` reproduces the input psd above the floor.
#[derive(Debug, Clone)]
pub struct MinimumPhaseFactor {
    spectrum: Vec<Complex64>,
    impulse_response: Vec<f64>,
    sample_rate: f64,
}

impl MinimumPhaseFactor {
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Causal impulse response over the full grid length.
    pub fn impulse_response(&self) -> &[f64] {
        &self.impulse_response
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Unit impulse factor (identity system), handy for shaping tests.
    pub fn identity(grid_size: usize, sample_rate: f64) -> Self {
        let mut impulse_response = vec![0.0; grid_size];
        impulse_response[0] = 1.0;
        Self {
            spectrum: vec![Complex64::new(1.0, 0.0); grid_size],
            impulse_response,
            sample_rate,
        }
    }
}

/// Cepstral (log-FFT) minimum-phase factorization with a spectral floor
/// given in dB relative to the spectrum's peak.
pub fn scalar_spectral_factor(
    psd: &SpectralDensity,
    floor_db: f64,
) -> Result<MinimumPhaseFactor> {
    let n = psd.grid_size();
    let peak = psd.values().iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(Error::DegenerateSpectrum(
            "cannot factor an identically zero spectrum".into(),
        ));
    }
    let floor = peak * 10f64.powf(floor_db / 10.0);
    let half_log: Vec<f64> = psd
        .values()
        .iter()
        .map(|&v| 0.5 * v.max(floor).ln())
        .collect();
    // Real cepstrum of log |G|, folded onto causal quefrencies.
    let cepstrum = fft::real_spectrum_to_real(&half_log);
    let mut folded = vec![Complex64::ZERO; n];
    folded[0] = Complex64::new(cepstrum[0], 0.0);
    for k in 1..n / 2 {
        folded[k] = Complex64::new(2.0 * cepstrum[k], 0.0);
    }
    folded[n / 2] = Complex64::new(cepstrum[n / 2], 0.0);
    fft::fft_forward(&mut folded);
    let spectrum: Vec<Complex64> = folded.iter().map(|c| c.exp()).collect();
    let impulse_response = fft::spectrum_to_real(&spectrum);
    Ok(MinimumPhaseFactor {
        spectrum,
        impulse_response,
        sample_rate: psd.sample_rate(),
    })
}

/// Whitened cross-correlation (possibly one sequence per channel) over
/// two-sided lags. Its squared tail mass below `-alpha` is the causality
/// penalty at delay `alpha`.
#[derive(Debug, Clone)]
pub struct PenaltySequence {
    channels: Vec<Vec<f64>>,
    max_lag: usize,
    sample_rate: f64,
}

impl PenaltySequence {
    pub fn new(channels: Vec<Vec<f64>>, max_lag: usize, sample_rate: f64) -> Result<Self> {
        let len = 2 * max_lag + 1;
        if channels.is_empty() || channels.iter().any(|c| c.len() != len) {
            return Err(Error::DimensionMismatch(format!(
                "penalty channels must all have {len} lags"
            )));
        }
        Ok(Self {
            channels,
            max_lag,
            sample_rate,
        })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn at(&self, channel: usize, lag: i64) -> f64 {
        if lag.unsigned_abs() as usize > self.max_lag {
            0.0
        } else {
            self.channels[channel][(lag + self.max_lag as i64) as usize]
        }
    }

    pub fn total_energy(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum()
    }

    /// Energy at lags strictly below `-alpha_samples`.
    pub fn energy_below(&self, alpha_samples: f64) -> f64 {
        let mut acc = 0.0;
        for lag in -(self.max_lag as i64)..=(self.max_lag as i64) {
            if (lag as f64) < -alpha_samples {
                for ch in &self.channels {
                    let v = ch[(lag + self.max_lag as i64) as usize];
                    acc += v * v;
                }
            }
        }
        acc
    }
}

/// Whitened cross-correlation of a scalar estimation problem:
/// `r~ = IFFT[ R_xd / conj(G) ]` with `G` the minimum-phase factor of the
/// observation spectrum.
pub fn whitened_cross_sequence(
    observation_psd: &SpectralDensity,
    cross_psd: &SpectralDensity,
    floor_db: f64,
    max_lag: usize,
) -> Result<PenaltySequence> {
    let n = observation_psd.grid_size();
    if cross_psd.grid_size() != n {
        return Err(Error::DimensionMismatch(
            "observation and cross spectra must share the grid".into(),
        ));
    }
    if max_lag >= n / 2 {
        return Err(Error::InsufficientLagSupport {
            needed: max_lag,
            available: n / 2 - 1,
        });
    }
    let factor = scalar_spectral_factor(observation_psd, floor_db)?;
    let spec: Vec<Complex64> = cross_psd
        .values()
        .iter()
        .zip(factor.spectrum())
        .map(|(&rxd, g)| rxd / g.conj())
        .collect();
    let time = fft::spectrum_to_real(&spec);
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        values.push(time[lag.rem_euclid(n as i64) as usize]);
    }
    PenaltySequence::new(vec![values], max_lag, observation_psd.sample_rate())
}

/// Noncausal Wiener MSE of the scalar problem, a grid Riemann sum of
/// `R_d - |R_xd|^2 / R_x`.
pub fn scalar_noncausal_mse(
    signal_psd: &SpectralDensity,
    observation_psd: &SpectralDensity,
    cross_psd: &SpectralDensity,
) -> Result<f64> {
    let n = signal_psd.grid_size();
    if observation_psd.grid_size() != n || cross_psd.grid_size() != n {
        return Err(Error::DimensionMismatch(
            "spectra must share the grid".into(),
        ));
    }
    let mut acc = 0.0;
    for k in 0..n {
        let rx = observation_psd.value(k);
        let rd = signal_psd.value(k);
        let rxd = cross_psd.value(k);
        if rx <= 0.0 {
            if rxd.abs() > 0.0 {
                return Err(Error::Conditioning(format!(
                    "observation spectrum vanishes at bin {k} with nonzero cross power"
                )));
            }
            acc += rd;
            continue;
        }
        let err = rd - rxd * rxd / rx;
        if err < -1e-9 * rd.max(1.0) {
            return Err(Error::Domain(format!(
                "inconsistent spectra at bin {k}: error spectrum {err} < 0"
            )));
        }
        acc += err.max(0.0);
    }
    Ok(acc / n as f64)
}

/// Delay-error curve of the scalar causal Wiener filter via the
/// tail-energy bookkeeping of the whitened cross-correlation.
pub fn scalar_causal_delay_error(
    signal_psd: &SpectralDensity,
    observation_psd: &SpectralDensity,
    cross_psd: &SpectralDensity,
    alphas_s: &[f64],
) -> Result<DelayErrorCurve> {
    let n = observation_psd.grid_size();
    let fs = observation_psd.sample_rate();
    let e_nc = scalar_noncausal_mse(signal_psd, observation_psd, cross_psd)?;
    let penalty = whitened_cross_sequence(
        observation_psd,
        cross_psd,
        DEFAULT_FLOOR_DB,
        n / 2 - 1,
    )?;
    let target_power = signal_psd.power();
    let points = alphas_s
        .iter()
        .map(|&alpha| (alpha, e_nc + penalty.energy_below(alpha * fs)))
        .collect();
    DelayErrorCurve::new(CurveMethod::ScalarCausal, target_power, String::new(), points)
}

/// Convolves each penalty channel with a causal common spectral factor,
/// spreading its energy forward in time.
pub fn shape_penalty(
    base: &PenaltySequence,
    common_factor: &MinimumPhaseFactor,
) -> Result<PenaltySequence> {
    // Keep the causal taps that carry essentially all of the factor energy.
    let ir = common_factor.impulse_response();
    let total: f64 = ir.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum("zero common factor".into()));
    }
    let mut keep = ir.len();
    let mut acc = 0.0;
    for (i, v) in ir.iter().enumerate() {
        acc += v * v;
        if acc >= total * (1.0 - 1e-14) {
            keep = i + 1;
            break;
        }
    }
    let h = &ir[..keep];
    let k = base.max_lag();
    let out_max_lag = k + keep - 1;
    let channels = (0..base.num_channels())
        .map(|c| {
            let full = fft::conv_full(base.channel(c), h);
            debug_assert_eq!(full.len(), 2 * k + keep);
            // Input lags start at -k; convolution preserves the start, so the
            // output spans [-k, k + keep - 1]. Pad the front to recenter.
            let mut values = vec![0.0; keep - 1];
            values.extend(full);
            values
        })
        .collect();
    PenaltySequence::new(channels, out_max_lag, base.sample_rate())
}

/// Assembles a delay-error curve from a penalty sequence and the noncausal
/// floor: `E(alpha) = E_nc + energy(r~ below -alpha)`.
pub fn penalty_curve(
    penalty: &PenaltySequence,
    noncausal_mse: f64,
    target_power: f64,
    scene_digest: String,
    method: CurveMethod,
    alphas_s: &[f64],
) -> Result<DelayErrorCurve> {
    let fs = penalty.sample_rate();
    let points = alphas_s
        .iter()
        .map(|&alpha| (alpha, noncausal_mse + penalty.energy_below(alpha * fs)))
        .collect();
    DelayErrorCurve::new(method, target_power, scene_digest, points)
}
