//! Scene description: sources, mixing system, and noise, plus assembly of
//! observed-mixture correlations from source statistics.
//!
//! A scene canonicalizes every mixing entry to a causal FIR at build time.
//! TDOA entries become windowed-sinc fractional delays, and a single global
//! front padding (recorded in the scene) shifts all responses so that
//! negative TDOAs stay causal. Because the padding is applied to every
//! response including the reference path, it cancels out of all correlations
//! and MSE figures; it only matters when aligning rendered waveforms.

use crate::correlation::{psd_to_autocorr, CorrelationSequence};
use crate::error::{Error, Result};
use crate::fft;
use crate::spectrum::SpectralDensity;
use crate::synth;
use num_complex::Complex64;

/// One mixing path from a source to a microphone.
#[derive(Debug, Clone)]
pub enum Mixing {
    /// Plane-wave time difference of arrival, seconds (negative = early).
    Tdoa(f64),
    /// Explicit causal impulse response.
    Fir(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SceneBuilder {
    sample_rate: f64,
    grid_size: usize,
    delay_taps: usize,
    sources: Vec<(SpectralDensity, Vec<Mixing>)>,
    noise: Vec<SpectralDensity>,
    reference_mic: usize,
    target_source: usize,
}

impl SceneBuilder {
    pub fn new(sample_rate: f64, grid_size: usize) -> Self {
        Self {
            sample_rate,
            grid_size,
            delay_taps: synth::DEFAULT_DELAY_TAPS,
            sources: Vec::new(),
            noise: Vec::new(),
            reference_mic: 0,
            target_source: 0,
        }
    }

    /// Source with one mixing entry per microphone.
    pub fn source(mut self, spectrum: SpectralDensity, mixing: Vec<Mixing>) -> Self {
        self.sources.push((spectrum, mixing));
        self
    }

    /// Spatially uncorrelated noise with the same spectrum at every mic.
    pub fn white_noise(mut self, power: f64) -> Self {
        self.noise = vec![SpectralDensity::flat(
            power,
            self.grid_size,
            self.sample_rate,
        )];
        self
    }

    /// Per-mic noise spectra (diagonal noise model).
    pub fn noise_spectra(mut self, spectra: Vec<SpectralDensity>) -> Self {
        self.noise = spectra;
        self
    }

    pub fn reference_mic(mut self, mic: usize) -> Self {
        self.reference_mic = mic;
        self
    }

    pub fn target_source(mut self, source: usize) -> Self {
        self.target_source = source;
        self
    }

    pub fn delay_taps(mut self, taps: usize) -> Self {
        self.delay_taps = taps;
        self
    }

    pub fn build(self) -> Result<Scene> {
        if self.sources.is_empty() {
            return Err(Error::InvalidScene("no sources".into()));
        }
        let num_mics = self.sources[0].1.len();
        if num_mics == 0 {
            return Err(Error::InvalidScene("no microphones".into()));
        }
        for (n, (psd, mixing)) in self.sources.iter().enumerate() {
            if mixing.len() != num_mics {
                return Err(Error::DimensionMismatch(format!(
                    "source {n} has {} mixing entries, expected {num_mics}",
                    mixing.len()
                )));
            }
            if psd.grid_size() != self.grid_size || psd.sample_rate() != self.sample_rate {
                return Err(Error::DimensionMismatch(format!(
                    "source {n} spectrum grid/rate does not match scene"
                )));
            }
        }
        if self.reference_mic >= num_mics {
            return Err(Error::InvalidScene(format!(
                "reference mic {} out of range",
                self.reference_mic
            )));
        }
        if self.target_source >= self.sources.len() {
            return Err(Error::InvalidScene(format!(
                "target source {} out of range",
                self.target_source
            )));
        }

        let noise_spectra = match self.noise.len() {
            0 => vec![SpectralDensity::flat(0.0, self.grid_size, self.sample_rate); num_mics],
            1 => vec![self.noise[0].clone(); num_mics],
            n if n == num_mics => self.noise.clone(),
            n => {
                return Err(Error::DimensionMismatch(format!(
                    "{n} noise spectra for {num_mics} mics"
                )))
            }
        };
        for psd in &noise_spectra {
            if psd.grid_size() != self.grid_size || psd.sample_rate() != self.sample_rate {
                return Err(Error::DimensionMismatch(
                    "noise spectrum grid/rate does not match scene".into(),
                ));
            }
        }

        // Global front padding: sinc half-width plus enough to keep the most
        // negative TDOA causal. Pure-FIR scenes stay unpadded.
        let tdoa_delays: Vec<f64> = self
            .sources
            .iter()
            .flat_map(|(_, mixing)| mixing.iter())
            .filter_map(|m| match m {
                Mixing::Tdoa(tau) => Some(tau * self.sample_rate),
                Mixing::Fir(_) => None,
            })
            .collect();
        let padding = if tdoa_delays.is_empty() {
            0
        } else {
            let min_delay = tdoa_delays.iter().cloned().fold(0.0f64, f64::min);
            self.delay_taps / 2 + (-min_delay).max(0.0).ceil() as usize
        };

        let mut mixing = vec![Vec::with_capacity(self.sources.len()); num_mics];
        for (_, entries) in &self.sources {
            for (m, entry) in entries.iter().enumerate() {
                let fir = match entry {
                    Mixing::Tdoa(tau) => synth::fractional_delay_fir_samples(
                        tau * self.sample_rate + padding as f64,
                        self.delay_taps,
                    )?,
                    Mixing::Fir(h) => {
                        if h.is_empty() {
                            return Err(Error::InvalidScene("empty impulse response".into()));
                        }
                        let mut padded = vec![0.0; padding];
                        padded.extend_from_slice(h);
                        padded
                    }
                };
                mixing[m].push(fir);
            }
        }

        Ok(Scene {
            sample_rate: self.sample_rate,
            grid_size: self.grid_size,
            source_spectra: self.sources.into_iter().map(|(psd, _)| psd).collect(),
            mixing,
            noise_spectra,
            reference_mic: self.reference_mic,
            target_source: self.target_source,
            padding_samples: padding,
            delay_taps: self.delay_taps,
        })
    }
}

/// Immutable scene: `N` source spectra, `M x N` causal mixing FIRs, and
/// per-mic noise spectra on a shared frequency grid.
#[derive(Debug, Clone)]
pub struct Scene {
    sample_rate: f64,
    grid_size: usize,
    source_spectra: Vec<SpectralDensity>,
    mixing: Vec<Vec<Vec<f64>>>,
    noise_spectra: Vec<SpectralDensity>,
    reference_mic: usize,
    target_source: usize,
    padding_samples: usize,
    delay_taps: usize,
}

impl Scene {
    pub fn builder(sample_rate: f64, grid_size: usize) -> SceneBuilder {
        SceneBuilder::new(sample_rate, grid_size)
    }

    pub fn num_mics(&self) -> usize {
        self.mixing.len()
    }

    pub fn num_sources(&self) -> usize {
        self.source_spectra.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn reference_mic(&self) -> usize {
        self.reference_mic
    }

    pub fn target_source(&self) -> usize {
        self.target_source
    }

    /// Front padding applied to every impulse response, in samples.
    pub fn padding_samples(&self) -> usize {
        self.padding_samples
    }

    /// Windowed-sinc length used to realize TDOA entries.
    pub fn delay_taps(&self) -> usize {
        self.delay_taps
    }

    pub fn source_spectrum(&self, n: usize) -> &SpectralDensity {
        &self.source_spectra[n]
    }

    pub fn noise_spectrum(&self, m: usize) -> &SpectralDensity {
        &self.noise_spectra[m]
    }

    /// Canonicalized (padded, causal) impulse response from source `n` to mic `m`.
    pub fn mixing_fir(&self, m: usize, n: usize) -> &[f64] {
        &self.mixing[m][n]
    }

    pub fn max_fir_len(&self) -> usize {
        self.mixing
            .iter()
            .flat_map(|row| row.iter().map(Vec::len))
            .max()
            .unwrap_or(0)
    }

    /// Frequency responses `A[m][n]` of all mixing paths on the scene grid.
    pub fn mixing_responses(&self) -> Vec<Vec<Vec<Complex64>>> {
        self.mixing
            .iter()
            .map(|row| {
                row.iter()
                    .map(|fir| fft::real_to_spectrum(fir, self.grid_size))
                    .collect()
            })
            .collect()
    }

    /// Power spectrum of the desired signal (target source at the reference mic).
    pub fn desired_spectrum(&self) -> SpectralDensity {
        let a = fft::real_to_spectrum(
            self.mixing_fir(self.reference_mic, self.target_source),
            self.grid_size,
        );
        let values = a
            .iter()
            .zip(self.source_spectra[self.target_source].values())
            .map(|(h, s)| h.norm_sqr() * s)
            .collect();
        SpectralDensity::from_values(values, self.sample_rate)
            .expect("magnitude-squared spectrum is valid")
    }

    /// `r_d(0)`: power of the desired signal, the normalizer for relative MSE.
    pub fn target_power(&self) -> f64 {
        self.desired_spectrum().power()
    }

    /// Stable FNV-1a digest of the scene parameters, for curve metadata.
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&self.sample_rate.to_le_bytes());
        eat(&(self.grid_size as u64).to_le_bytes());
        eat(&(self.reference_mic as u64).to_le_bytes());
        eat(&(self.target_source as u64).to_le_bytes());
        eat(&(self.padding_samples as u64).to_le_bytes());
        for psd in self.source_spectra.iter().chain(self.noise_spectra.iter()) {
            for v in psd.values() {
                eat(&v.to_le_bytes());
            }
        }
        for row in &self.mixing {
            for fir in row {
                eat(&(fir.len() as u64).to_le_bytes());
                for v in fir {
                    eat(&v.to_le_bytes());
                }
            }
        }
        format!("{h:016x}")
    }
}

/// Auto- and cross-correlations of the observed mixture.
#[derive(Debug, Clone)]
pub struct MixtureCorrelations {
    /// `auto[i][j]` holds `r_{x_i x_j}` over `[-max_lag, max_lag]`.
    pub auto: Vec<Vec<CorrelationSequence>>,
    /// `cross[i]` holds `r_{x_i d_0}` (desired signal at zero delay).
    pub cross: Vec<CorrelationSequence>,
}

/// Assembles observation correlations `r_x` and the cross vector `r_xd` from
/// the scene statistics, on the scene's frequency grid.
///
/// Entry `(i, j)` is `sum_n (a_{i,n} * rev(a_{j,n}) * r_{s_n})[l] + r_{z,ij}[l]`,
/// evaluated in the frequency domain as `A_i A_j^* R_s + R_z`.
pub fn assemble_mixture_correlations(
    scene: &Scene,
    max_lag: usize,
) -> Result<MixtureCorrelations> {
    let n_grid = scene.grid_size();
    let needed = scene.max_fir_len() + max_lag;
    if needed > n_grid / 2 {
        return Err(Error::InsufficientLagSupport {
            needed,
            available: n_grid / 2,
        });
    }
    let m = scene.num_mics();
    let responses = scene.mixing_responses();

    let mut auto: Vec<Vec<CorrelationSequence>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            if j < i {
                // r_{x_j x_i} already computed; use r_{x_i x_j}[l] = r_{x_j x_i}[-l].
                let sym: &CorrelationSequence = &auto[j][i];
                row.push(sym.reversed());
                continue;
            }
            let mut spec = vec![0.0; n_grid];
            for n in 0..scene.num_sources() {
                let sn = scene.source_spectrum(n).values();
                let ai = &responses[i][n];
                let aj = &responses[j][n];
                for k in 0..n_grid {
                    spec[k] += (ai[k] * aj[k].conj()).re * sn[k];
                }
            }
            if i == j {
                for (k, v) in spec.iter_mut().enumerate() {
                    *v += scene.noise_spectrum(i).value(k);
                }
            }
            // Cross spectra of distinct mics are complex; inverse transform the
            // full complex spectrum and keep the (real) sequence.
            let cross_spec: Vec<Complex64> = if i == j {
                spec.iter().map(|&v| Complex64::new(v, 0.0)).collect()
            } else {
                let mut acc = vec![Complex64::ZERO; n_grid];
                for n in 0..scene.num_sources() {
                    let sn = scene.source_spectrum(n).values();
                    let ai = &responses[i][n];
                    let aj = &responses[j][n];
                    for k in 0..n_grid {
                        acc[k] += ai[k] * aj[k].conj() * sn[k];
                    }
                }
                acc
            };
            let time = fft::spectrum_to_real(&cross_spec);
            let mut values = Vec::with_capacity(2 * max_lag + 1);
            for lag in -(max_lag as i64)..=(max_lag as i64) {
                values.push(time[lag.rem_euclid(n_grid as i64) as usize]);
            }
            row.push(CorrelationSequence::new(
                values,
                max_lag,
                scene.sample_rate(),
            )?);
        }
        auto.push(row);
    }

    let aref = &responses[scene.reference_mic()][scene.target_source()];
    let st = scene.source_spectrum(scene.target_source()).values();
    let mut cross = Vec::with_capacity(m);
    for i in 0..m {
        let ai = &responses[i][scene.target_source()];
        let spec: Vec<Complex64> = (0..n_grid)
            .map(|k| ai[k] * aref[k].conj() * st[k])
            .collect();
        let time = fft::spectrum_to_real(&spec);
        let mut values = Vec::with_capacity(2 * max_lag + 1);
        for lag in -(max_lag as i64)..=(max_lag as i64) {
            values.push(time[lag.rem_euclid(n_grid as i64) as usize]);
        }
        cross.push(CorrelationSequence::new(
            values,
            max_lag,
            scene.sample_rate(),
        )?);
    }

    Ok(MixtureCorrelations { auto, cross })
}

/// Convenience: autocorrelation of the desired signal.
pub fn desired_autocorrelation(scene: &Scene, max_lag: usize) -> Result<CorrelationSequence> {
    psd_to_autocorr(&scene.desired_spectrum(), max_lag)
}
