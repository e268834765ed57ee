//! Synthetic scenes and signals: fractional-delay plane-wave responses,
//! stationary vowel-like harmonic sources, speech-shaped noise, windowed
//! autocorrelation estimation, and multichannel mixture rendering.

use crate::correlation::CorrelationSequence;
use crate::error::{Error, Result};
use crate::factorization::scalar_spectral_factor;
use crate::fft;
use crate::scene::Scene;
use crate::spectrum::SpectralDensity;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

pub const DEFAULT_DELAY_TAPS: usize = 64;
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Default analysis window for autocorrelation estimation, seconds.
pub const DEFAULT_AUTOCORR_WINDOW_S: f64 = 0.05;

/// Taps kept when realizing a stochastic source as filtered white noise.
const SHAPING_TAPS: usize = 2048;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// splitmix64; used to derive independent per-stream seeds.
fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Hann-windowed sinc centered at `delay_samples` (window half-width
/// `taps/2`). The center must sit at or beyond `taps/2` so the response is
/// causal; callers pad upstream for earlier arrivals.
pub fn fractional_delay_fir_samples(delay_samples: f64, taps: usize) -> Result<Vec<f64>> {
    if taps < 32 || taps % 2 != 0 {
        return Err(Error::Domain(format!(
            "fractional delay taps must be even and >= 32, got {taps}"
        )));
    }
    let half = taps as f64 / 2.0;
    if delay_samples < half - 1e-9 {
        return Err(Error::Domain(format!(
            "delay {delay_samples} samples outside padding budget (needs >= {half})"
        )));
    }
    let len = (delay_samples + half).ceil() as usize + 1;
    let mut h = vec![0.0; len];
    for (n, v) in h.iter_mut().enumerate() {
        let t = n as f64 - delay_samples;
        if t.abs() <= half {
            let w = 0.5 * (1.0 + (PI * t / half).cos());
            *v = w * sinc(t);
        }
    }
    Ok(h)
}

/// Fractional-delay FIR for a delay in seconds, with a fixed front padding
/// of `taps/2` samples. An integer-sample delay `k` comes out as an exact
/// unit impulse at index `k + taps/2`.
pub fn fractional_delay_fir(delay_s: f64, fs: f64, taps: usize) -> Result<Vec<f64>> {
    fractional_delay_fir_samples(delay_s * fs + taps as f64 / 2.0, taps)
}

/// One resonance of a vowel-like source, realized as a two-pole section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formant {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
}

/// Stationary harmonic "sung vowel" source: partials at multiples of `f0`
/// shaped by a formant resonator bank, with seeded random phases.
#[derive(Debug, Clone)]
pub struct HarmonicSourceSpec {
    pub f0_hz: f64,
    pub formants: Vec<Formant>,
    pub power: f64,
    pub seed: u64,
}

impl HarmonicSourceSpec {
    /// Magnitude of the source-filter model at a frequency: a product of
    /// two-pole resonator responses times the +6 dB/octave radiation tilt
    /// (`2 sin(theta/2)`), which keeps fundamentals weak relative to
    /// formant peaks the way sung vowels are.
    pub fn formant_gain(&self, f_hz: f64, fs: f64) -> f64 {
        let theta = 2.0 * PI * f_hz / fs;
        let mut gain = 2.0 * (theta / 2.0).sin().abs();
        for fm in &self.formants {
            let r = (-PI * fm.bandwidth_hz / fs).exp();
            let thc = 2.0 * PI * fm.frequency_hz / fs;
            let re = 1.0 - 2.0 * r * thc.cos() * theta.cos() + r * r * (2.0 * theta).cos();
            let im = 2.0 * r * thc.cos() * theta.sin() - r * r * (2.0 * theta).sin();
            // |1 - 2 r cos(thc) z^-1 + r^2 z^-2| at z = e^{j theta}
            let mag = (re * re + im * im).sqrt();
            gain /= mag.max(1e-6);
        }
        gain
    }
}

/// Source signal description for rendering.
#[derive(Debug, Clone)]
pub enum SourceSignalSpec {
    Harmonic(HarmonicSourceSpec),
    /// Filtered white noise matching a power spectrum.
    Stochastic {
        psd: SpectralDensity,
        power: f64,
        seed: u64,
    },
    White {
        power: f64,
        seed: u64,
    },
}

impl SourceSignalSpec {
    fn seed(&self) -> u64 {
        match self {
            SourceSignalSpec::Harmonic(h) => h.seed,
            SourceSignalSpec::Stochastic { seed, .. } => *seed,
            SourceSignalSpec::White { seed, .. } => *seed,
        }
    }
}

fn white_noise(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// Renders each source independently and deterministically from its seed.
///
/// Harmonic sources are partial sums below `0.45 fs`; stochastic sources are
/// white noise shaped by a truncated minimum-phase realization of the target
/// spectrum. Every source is normalized to its requested power.
pub fn render_sources(
    specs: &[SourceSignalSpec],
    duration_s: f64,
    fs: f64,
    master_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let len = (duration_s * fs).round() as usize;
    if len == 0 {
        return Err(Error::Domain("zero-length render".into()));
    }
    specs
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            let seed = mix_seed(master_seed ^ spec.seed(), idx as u64);
            match spec {
                SourceSignalSpec::Harmonic(h) => render_harmonic(h, len, fs, seed),
                SourceSignalSpec::Stochastic { psd, power, .. } => {
                    render_stochastic(psd, *power, len, seed)
                }
                SourceSignalSpec::White { power, .. } => {
                    Ok(normalize_power(white_noise(len, seed), *power))
                }
            }
        })
        .collect()
}

fn render_harmonic(spec: &HarmonicSourceSpec, len: usize, fs: f64, seed: u64) -> Result<Vec<f64>> {
    if spec.f0_hz.is_nan() || spec.f0_hz <= 0.0 {
        return Err(Error::Domain(format!("f0 {} must be positive", spec.f0_hz)));
    }
    let max_partial = (0.45 * fs / spec.f0_hz).floor() as usize;
    if max_partial == 0 {
        return Err(Error::Domain("f0 above the rendered band".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<f64> = (1..=max_partial)
        .map(|k| spec.formant_gain(k as f64 * spec.f0_hz, fs))
        .collect();
    let phases: Vec<f64> = (0..max_partial)
        .map(|_| rng.random::<f64>() * 2.0 * PI)
        .collect();
    // Expected power of a sum of incoherent sinusoids is sum(a^2)/2.
    let raw_power: f64 = amps.iter().map(|a| a * a).sum::<f64>() / 2.0;
    let scale = (spec.power / raw_power).sqrt();
    let mut out = vec![0.0; len];
    for (k, (&a, &phi)) in amps.iter().zip(phases.iter()).enumerate() {
        let w = 2.0 * PI * (k + 1) as f64 * spec.f0_hz / fs;
        let amp = a * scale;
        for (n, v) in out.iter_mut().enumerate() {
            *v += amp * (w * n as f64 + phi).sin();
        }
    }
    Ok(out)
}

fn normalize_power(mut signal: Vec<f64>, power: f64) -> Vec<f64> {
    let measured = signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64;
    if measured > 0.0 {
        let g = (power / measured).sqrt();
        for v in signal.iter_mut() {
            *v *= g;
        }
    }
    signal
}

fn render_stochastic(psd: &SpectralDensity, power: f64, len: usize, seed: u64) -> Result<Vec<f64>> {
    let factor = scalar_spectral_factor(psd, -120.0)?;
    let fir: Vec<f64> = factor
        .impulse_response()
        .iter()
        .take(SHAPING_TAPS)
        .cloned()
        .collect();
    let energy: f64 = fir.iter().map(|x| x * x).sum();
    if energy <= 0.0 {
        return Err(Error::DegenerateSpectrum("zero shaping energy".into()));
    }
    let noise = white_noise(len + fir.len(), seed);
    let full = fft::filter_same(&fir, &noise);
    Ok(normalize_power(full[fir.len()..].to_vec(), power))
}

/// Frame-averaged, window-tapered (biased) autocorrelation estimate.
///
/// Each frame is multiplied by a von Hann window before correlating, and the
/// per-frame estimates are averaged and normalized by the window energy so
/// lag 0 tracks the signal power.
pub fn windowed_autocorrelation(
    signal: &[f64],
    fs: f64,
    window_s: f64,
    max_lag: usize,
) -> Result<CorrelationSequence> {
    let w_len = (window_s * fs).round() as usize;
    if w_len < 8 {
        return Err(Error::Domain(format!("window {window_s} s too short")));
    }
    if signal.len() < w_len {
        return Err(Error::Domain(format!(
            "signal ({} samples) shorter than window ({w_len})",
            signal.len()
        )));
    }
    if max_lag >= w_len {
        return Err(Error::InsufficientLagSupport {
            needed: max_lag,
            available: w_len - 1,
        });
    }
    let window: Vec<f64> = (0..w_len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / (w_len - 1) as f64).cos()))
        .collect();
    let w_energy: f64 = window.iter().map(|w| w * w).sum();
    let hop = w_len / 2;
    let mut acc = vec![0.0; max_lag + 1];
    let mut frames = 0usize;
    let mut start = 0usize;
    while start + w_len <= signal.len() {
        let tapered: Vec<f64> = signal[start..start + w_len]
            .iter()
            .zip(window.iter())
            .map(|(x, w)| x * w)
            .collect();
        for (l, slot) in acc.iter_mut().enumerate() {
            let mut s = 0.0;
            for n in 0..w_len - l {
                s += tapered[n] * tapered[n + l];
            }
            *slot += s;
        }
        frames += 1;
        start += hop;
    }
    let norm = 1.0 / (frames as f64 * w_energy);
    let mut values = vec![0.0; 2 * max_lag + 1];
    for l in 0..=max_lag {
        let v = acc[l] * norm;
        values[max_lag + l] = v;
        values[max_lag - l] = v;
    }
    CorrelationSequence::new(values, max_lag, fs)
}

/// Microphone layout for plane-wave TDOA computation.
#[derive(Debug, Clone)]
pub struct PlaneWaveArraySpec {
    pub mic_positions_m: Vec<[f64; 3]>,
    pub speed_of_sound: f64,
}

impl PlaneWaveArraySpec {
    pub fn new(mic_positions_m: Vec<[f64; 3]>) -> Self {
        Self {
            mic_positions_m,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    /// TDOAs (seconds, relative to `reference`) of a plane wave arriving
    /// from the unit direction pointing toward the source. Mics closer to
    /// the source get negative TDOAs.
    pub fn tdoas_for_direction(&self, toward_source: [f64; 3], reference: usize) -> Vec<f64> {
        let norm = (toward_source.iter().map(|x| x * x).sum::<f64>()).sqrt();
        let u: Vec<f64> = toward_source.iter().map(|x| x / norm).collect();
        let proj = |p: &[f64; 3]| p[0] * u[0] + p[1] * u[1] + p[2] * u[2];
        let ref_proj = proj(&self.mic_positions_m[reference]);
        self.mic_positions_m
            .iter()
            .map(|p| (ref_proj - proj(p)) / self.speed_of_sound)
            .collect()
    }

    /// Convenience for sources in the horizontal plane.
    pub fn tdoas_for_azimuth(&self, azimuth_deg: f64, reference: usize) -> Vec<f64> {
        let az = azimuth_deg.to_radians();
        self.tdoas_for_direction([az.cos(), az.sin(), 0.0], reference)
    }
}

/// Rendered multichannel mixture plus the desired-signal timeline.
#[derive(Debug, Clone)]
pub struct MixtureRender {
    pub channels: Vec<Vec<f64>>,
    desired_base: Vec<f64>,
}

impl MixtureRender {
    /// Desired output `d_alpha[n] = (a_ref,target * s_target)[n - alpha]`,
    /// on the same (padded) timeline as the rendered channels.
    pub fn desired_at(&self, alpha_samples: i64) -> Vec<f64> {
        let len = self.desired_base.len();
        (0..len as i64)
            .map(|n| {
                let src = n - alpha_samples;
                if src >= 0 && (src as usize) < len {
                    self.desired_base[src as usize]
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn desired_base(&self) -> &[f64] {
        &self.desired_base
    }
}

/// Exact convolution rendering of `x_m = sum_n a_{m,n} * s_n + z_m`.
pub fn render_mixture(
    scene: &Scene,
    sources: &[Vec<f64>],
    noise_seed: u64,
) -> Result<MixtureRender> {
    if sources.len() != scene.num_sources() {
        return Err(Error::DimensionMismatch(format!(
            "{} source signals for {} scene sources",
            sources.len(),
            scene.num_sources()
        )));
    }
    let len = sources.first().map(Vec::len).unwrap_or(0);
    if sources.iter().any(|s| s.len() != len) || len == 0 {
        return Err(Error::DimensionMismatch(
            "source signals must share a nonzero length".into(),
        ));
    }
    let mut channels = Vec::with_capacity(scene.num_mics());
    for m in 0..scene.num_mics() {
        let mut x = vec![0.0; len];
        for (n, s) in sources.iter().enumerate() {
            let contrib = fft::filter_same(scene.mixing_fir(m, n), s);
            for (xv, c) in x.iter_mut().zip(contrib) {
                *xv += c;
            }
        }
        let noise_psd = scene.noise_spectrum(m);
        if noise_psd.power() > 0.0 {
            let seed = mix_seed(noise_seed, m as u64);
            let flat = noise_psd
                .values()
                .iter()
                .all(|&v| (v - noise_psd.value(0)).abs() <= 1e-12 * noise_psd.value(0).max(1e-300));
            let z = if flat {
                let g = noise_psd.value(0).sqrt();
                white_noise(len, seed).into_iter().map(|v| v * g).collect()
            } else {
                render_stochastic(noise_psd, noise_psd.power(), len, seed)?
            };
            for (xv, zv) in x.iter_mut().zip(z) {
                *xv += zv;
            }
        }
        channels.push(x);
    }
    let desired_base = fft::filter_same(
        scene.mixing_fir(scene.reference_mic(), scene.target_source()),
        &sources[scene.target_source()],
    );
    Ok(MixtureRender {
        channels,
        desired_base,
    })
}

/// Documented speech-like reference spectrum: flat to 500 Hz, then a
/// -6 dB/octave power rolloff (`P(f) = 1 / (1 + (f/500)^2)`), normalized to
/// unit power on the grid.
pub fn speech_shaped_psd(grid_size: usize, fs: f64) -> SpectralDensity {
    let corner = 500.0;
    let values: Vec<f64> = (0..grid_size)
        .map(|k| {
            let f = k as f64 * fs / grid_size as f64;
            let f = f.min(fs - f);
            1.0 / (1.0 + (f / corner).powi(2))
        })
        .collect();
    let psd = SpectralDensity::from_values(values, fs).expect("speech shape is valid");
    psd.scaled(1.0 / psd.power())
}

/// Four published vowel-like presets, each sung in a different key with
/// distinct formant placement.
pub fn vowel_presets() -> Vec<HarmonicSourceSpec> {
    let f = |frequency_hz, bandwidth_hz| Formant {
        frequency_hz,
        bandwidth_hz,
    };
    vec![
        HarmonicSourceSpec {
            // "ah" on A3
            f0_hz: 220.0,
            formants: vec![f(700.0, 110.0), f(1220.0, 120.0), f(2600.0, 160.0)],
            power: 1.0,
            seed: 0xA11,
        },
        HarmonicSourceSpec {
            // "ee" on C4
            f0_hz: 261.63,
            formants: vec![f(270.0, 50.0), f(2290.0, 100.0), f(3010.0, 120.0)],
            power: 1.0,
            seed: 0xEE2,
        },
        HarmonicSourceSpec {
            // "oh" on B3
            f0_hz: 246.94,
            formants: vec![f(570.0, 80.0), f(840.0, 100.0), f(2410.0, 140.0)],
            power: 1.0,
            seed: 0x043,
        },
        HarmonicSourceSpec {
            // "eh" on E4
            f0_hz: 329.63,
            formants: vec![f(530.0, 70.0), f(1840.0, 110.0), f(2480.0, 140.0)],
            power: 1.0,
            seed: 0xE44,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const FS: f64 = 16000.0;

    #[test]
    fn integer_delay_is_exact_impulse() {
        let k = 5;
        let taps = 64;
        let h = fractional_delay_fir(k as f64 / FS, FS, taps).unwrap();
        for (n, &v) in h.iter().enumerate() {
            let expected = if n == k + taps / 2 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "index {n}: {v}");
        }
    }

    /// RMS deviation of a cascade from a pure `delay`-sample shift over the
    /// design band |f| < 0.4 fs (a real FIR cannot match a fractional delay
    /// at Nyquist, so the comparison lives where the ripple spec holds).
    fn inband_cascade_rms(cascade: &[f64], delay: f64) -> f64 {
        let n = 8192;
        let spec = fft::real_to_spectrum(cascade, n);
        let band = (0.4 * n as f64) as usize;
        let mut acc = 0.0;
        for (k, v) in spec.iter().enumerate().take(band).skip(1) {
            let w = 2.0 * PI * k as f64 / n as f64;
            let target = Complex64::new(0.0, -w * delay).exp();
            acc += (v - target).norm_sqr();
        }
        (acc / (band - 1) as f64).sqrt()
    }

    #[test]
    fn half_sample_delay_squares_to_one_sample() {
        let taps = 64;
        let h = fractional_delay_fir(0.5 / FS, FS, taps).unwrap();
        let hh = fft::conv_full(&h, &h);
        // h*h is a one-sample delay at index 2*(taps/2) + 1.
        let err = inband_cascade_rms(&hh, taps as f64 + 1.0);
        assert!(err < 1e-3, "in-band rms error {err}");
        // Symmetric response around the half-sample center at taps/2 + 0.5.
        let c = taps / 2;
        for k in 0..taps / 2 - 1 {
            assert!((h[c + 1 + k] - h[c - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_delays_cancel() {
        let taps = 64;
        let d = 3.3;
        let pad = 4.0;
        let h1 = fractional_delay_fir_samples(taps as f64 / 2.0 + d, taps).unwrap();
        let h2 = fractional_delay_fir_samples(taps as f64 / 2.0 + pad - d, taps).unwrap();
        let cascade = fft::conv_full(&h1, &h2);
        let err = inband_cascade_rms(&cascade, taps as f64 + pad);
        assert!(err < 1e-3, "in-band rms error {err}");
    }

    #[test]
    fn delay_response_flat_and_linear_phase() {
        // Magnitude ripple < 0.1 dB and group delay error < 0.01 samples
        // below 0.4 fs.
        let taps = 64;
        let delay = 7.37;
        let h = fractional_delay_fir_samples(taps as f64 / 2.0 + delay, taps).unwrap();
        let n = 8192;
        let spec = fft::real_to_spectrum(&h, n);
        let band = (0.4 * n as f64) as usize;
        let mut prev_phase = 0.0f64;
        let mut unwrapped = 0.0f64;
        for k in 1..band {
            let mag_db = 20.0 * spec[k].norm().log10();
            assert!(mag_db.abs() < 0.1, "bin {k}: {mag_db} dB");
            let phase = spec[k].arg();
            let mut d = phase - prev_phase;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            unwrapped += d;
            prev_phase = phase;
            let group_delay = -unwrapped / (2.0 * PI * k as f64 / n as f64);
            let err = group_delay - (taps as f64 / 2.0 + delay);
            assert!(err.abs() < 0.01, "bin {k}: group delay err {err}");
        }
    }

    #[test]
    fn delay_outside_budget_errors() {
        assert!(fractional_delay_fir(-10.0 / FS, FS, 64).is_err());
        assert!(fractional_delay_fir(1.0 / FS, FS, 30).is_err());
        assert!(fractional_delay_fir(1.0 / FS, FS, 33).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let specs = vec![
            SourceSignalSpec::White {
                power: 1.0,
                seed: 42,
            },
            SourceSignalSpec::Harmonic(vowel_presets()[0].clone()),
        ];
        let a = render_sources(&specs, 0.5, FS, 7).unwrap();
        let b = render_sources(&specs, 0.5, FS, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rendered_sources_have_unit_power() {
        let mut specs: Vec<SourceSignalSpec> = vowel_presets()
            .into_iter()
            .map(SourceSignalSpec::Harmonic)
            .collect();
        specs.push(SourceSignalSpec::White {
            power: 1.0,
            seed: 3,
        });
        specs.push(SourceSignalSpec::Stochastic {
            psd: speech_shaped_psd(8192, FS),
            power: 1.0,
            seed: 4,
        });
        let signals = render_sources(&specs, 10.0, FS, 11).unwrap();
        for (i, s) in signals.iter().enumerate() {
            let power = s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
            assert!(
                (power - 1.0).abs() < 0.01,
                "source {i}: power {power}"
            );
        }
    }

    #[test]
    fn pure_tone_autocorrelation_is_cosine() {
        let f = 440.0;
        let len = (FS * 2.0) as usize;
        let signal: Vec<f64> = (0..len)
            .map(|n| (2.0 * PI * f * n as f64 / FS).sin() * std::f64::consts::SQRT_2)
            .collect();
        let r = windowed_autocorrelation(&signal, FS, 0.05, 100).unwrap();
        // Unit-power tone: r[0] ~ 1, |r[l]| <= r[0], near-periodic peaks.
        assert!((r.lag0() - 1.0).abs() < 0.02);
        let period = (FS / f).round() as i64;
        for l in 1..=100i64 {
            assert!(r.at(l).abs() <= r.lag0() * 1.0001);
            if l == period {
                // One period in: still strongly correlated, Hann-tapered.
                assert!(r.at(l) > 0.8 * r.lag0());
            }
        }
    }

    #[test]
    fn white_noise_autocorrelation_is_impulse() {
        let signals = render_sources(
            &[SourceSignalSpec::White {
                power: 1.0,
                seed: 5,
            }],
            10.0,
            FS,
            0,
        )
        .unwrap();
        let r = windowed_autocorrelation(&signals[0], FS, 0.05, 50).unwrap();
        for l in 1..=50i64 {
            assert!(
                (r.at(l) / r.lag0()).abs() < 0.05,
                "lag {l}: {}",
                r.at(l) / r.lag0()
            );
        }
    }

    #[test]
    fn speech_shaped_estimate_tracks_design_psd() {
        let psd = speech_shaped_psd(8192, FS);
        let signals = render_sources(
            &[SourceSignalSpec::Stochastic {
                psd: psd.clone(),
                power: 1.0,
                seed: 9,
            }],
            10.0,
            FS,
            1,
        )
        .unwrap();
        let r = windowed_autocorrelation(&signals[0], FS, 0.05, 256).unwrap();
        let est = r.to_psd(8192).unwrap();
        // Occupied band: up to 3 kHz, compare in 1/3-octave bands.
        let mut f_lo = 100.0;
        while f_lo < 3000.0 {
            let f_hi = f_lo * 2f64.powf(1.0 / 3.0);
            let band_power = |p: &SpectralDensity| {
                let mut acc = 0.0;
                let mut count = 0;
                for k in 0..p.grid_size() / 2 {
                    let f = p.bin_frequency_hz(k);
                    if f >= f_lo && f < f_hi {
                        acc += p.value(k);
                        count += 1;
                    }
                }
                acc / count.max(1) as f64
            };
            let db = 10.0 * (band_power(&est) / band_power(&psd)).log10();
            assert!(
                db.abs() < 1.5,
                "band {f_lo:.0}-{f_hi:.0} Hz: {db:.2} dB deviation"
            );
            f_lo = f_hi;
        }
    }

    #[test]
    fn vowel_pair_band_overlap_is_low() {
        // Spectrally disjoint presets: cross band energy below -20 dB.
        let vowels = vowel_presets();
        let signals = render_sources(
            &[
                SourceSignalSpec::Harmonic(vowels[0].clone()),
                SourceSignalSpec::Harmonic(vowels[1].clone()),
            ],
            10.0,
            FS,
            2,
        )
        .unwrap();
        let band_energy = |s: &[f64], f_lo: f64, f_hi: f64| {
            let n = 16384;
            let tapered: Vec<f64> = s[..n]
                .iter()
                .enumerate()
                .map(|(i, &x)| x * 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
                .collect();
            let spec = fft::real_to_spectrum(&tapered, n);
            let mut acc = 0.0;
            for (k, v) in spec.iter().enumerate().take(n / 2) {
                let f = k as f64 * FS / n as f64;
                if f >= f_lo && f < f_hi {
                    acc += v.norm_sqr();
                }
            }
            acc
        };
        // In each vowel's own first-formant band, the other vowel carries
        // < -20 dB of the energy: the bands are spectrally disjoint.
        let ah_band = (550.0, 850.0); // around "ah" F1 = 700
        let ee_band = (150.0, 400.0); // around "ee" F1 = 270
        let ratio_in_ah = band_energy(&signals[1], ah_band.0, ah_band.1)
            / band_energy(&signals[0], ah_band.0, ah_band.1);
        let ratio_in_ee = band_energy(&signals[0], ee_band.0, ee_band.1)
            / band_energy(&signals[1], ee_band.0, ee_band.1);
        assert!(
            10.0 * ratio_in_ah.log10() < -20.0,
            "{}",
            10.0 * ratio_in_ah.log10()
        );
        assert!(
            10.0 * ratio_in_ee.log10() < -20.0,
            "{}",
            10.0 * ratio_in_ee.log10()
        );
    }

    #[test]
    fn identity_mixture_passes_source_through() {
        use crate::scene::Mixing;
        let scene = Scene::builder(FS, 2048)
            .source(
                SpectralDensity::flat(1.0, 2048, FS),
                vec![Mixing::Fir(vec![1.0])],
            )
            .build()
            .unwrap();
        let sources =
            render_sources(&[SourceSignalSpec::White { power: 1.0, seed: 1 }], 0.1, FS, 0)
                .unwrap();
        let render = render_mixture(&scene, &sources, 0).unwrap();
        assert_eq!(render.channels[0], sources[0]);
        assert_eq!(render.desired_base(), sources[0].as_slice());
        assert_eq!(render.desired_at(0), sources[0]);
    }

    #[test]
    fn pure_delay_mixture_shifts_channels() {
        use crate::scene::Mixing;
        let k = 7usize;
        let mut fir = vec![0.0; k + 1];
        fir[k] = 1.0;
        let scene = Scene::builder(FS, 2048)
            .source(
                SpectralDensity::flat(1.0, 2048, FS),
                vec![Mixing::Fir(vec![1.0]), Mixing::Fir(fir)],
            )
            .build()
            .unwrap();
        let sources =
            render_sources(&[SourceSignalSpec::White { power: 1.0, seed: 2 }], 0.1, FS, 0)
                .unwrap();
        let render = render_mixture(&scene, &sources, 0).unwrap();
        for n in k..sources[0].len() {
            assert_eq!(render.channels[1][n], sources[0][n - k]);
        }
    }

    #[test]
    fn tdoa_recovered_by_cross_correlation_peak() {
        use crate::scene::Mixing;
        // Fractional TDOA: parabolic interpolation of the cross-correlation
        // peak recovers it within 0.01 samples after padding compensation.
        let tau_samples = 3.4;
        let scene = Scene::builder(FS, 4096)
            .source(
                speech_shaped_psd(4096, FS),
                vec![Mixing::Tdoa(0.0), Mixing::Tdoa(tau_samples / FS)],
            )
            .build()
            .unwrap();
        let sources = render_sources(
            &[SourceSignalSpec::Stochastic {
                psd: speech_shaped_psd(4096, FS),
                power: 1.0,
                seed: 8,
            }],
            5.0,
            FS,
            3,
        )
        .unwrap();
        let render = render_mixture(&scene, &sources, 0).unwrap();
        let x0 = &render.channels[0];
        let x1 = &render.channels[1];
        let skip = 512;
        let corr_at = |lag: i64| {
            let mut acc = 0.0;
            for n in skip..x0.len() - skip {
                let j = n as i64 - lag;
                acc += x1[n] * x0[j as usize];
            }
            acc
        };
        // Band-limited peak interpolation: maximize the sinc interpolant of
        // the sampled correlation on a fine grid around the coarse peak.
        let window = 32i64;
        let samples: Vec<f64> = (-window..=window).map(corr_at).collect();
        let interp = |t: f64| -> f64 {
            samples
                .iter()
                .enumerate()
                .map(|(i, &c)| c * sinc(t - (i as i64 - window) as f64))
                .sum()
        };
        let mut best = (0.0, f64::MIN);
        let mut t = 0.0;
        while t < 8.0 {
            let v = interp(t);
            if v > best.1 {
                best = (t, v);
            }
            t += 1e-3;
        }
        let est = best.0;
        assert!(
            (est - tau_samples).abs() < 0.01,
            "estimated {est}, wanted {tau_samples}"
        );
    }
}
