//! Experiment configuration: a TOML file with nested tables, plus scene
//! construction from it. Command-line flags override file values upstream.

use anyhow::{anyhow, bail, Context};
use cmwf::scene::{Mixing, Scene};
use cmwf::spectrum::SpectralDensity;
use cmwf::synth::{self, Formant, HarmonicSourceSpec, SourceSignalSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_fs")]
    pub fs: f64,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub scene: SceneConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_fs() -> f64 {
    cmwf::DEFAULT_SAMPLE_RATE
}

fn default_grid() -> usize {
    cmwf::DEFAULT_GRID_SIZE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Per-mic white noise power, linear. Exactly one of `noise_power`
    /// and `noise_db` may be given.
    pub noise_power: Option<f64>,
    pub noise_db: Option<f64>,
    #[serde(default)]
    pub reference_mic: usize,
    #[serde(default)]
    pub target_source: usize,
    /// Windowed-sinc length for fractional TDOA realization.
    pub delay_taps: Option<usize>,
    pub sources: Vec<SourceConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// "white" | "speech" | "ar1" | "harmonic"
    pub kind: String,
    #[serde(default = "one")]
    pub power: f64,
    /// AR(1) coefficient, for kind = "ar1".
    pub a: Option<f64>,
    /// Fundamental, Hz, for kind = "harmonic".
    pub f0: Option<f64>,
    /// Formants as [frequency_hz, bandwidth_hz] pairs, for kind = "harmonic".
    pub formants: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub seed: u64,
    /// One TDOA per mic, milliseconds. Exactly one of `tdoa_ms`/`ir_file`.
    pub tdoa_ms: Option<Vec<f64>>,
    /// Waveform file with one channel per mic.
    pub ir_file: Option<PathBuf>,
    /// Truncation applied to loaded responses, milliseconds.
    pub ir_truncate_ms: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub methods: Vec<String>,
    pub alpha_start_ms: f64,
    pub alpha_stop_ms: f64,
    pub alpha_step_ms: f64,
    /// Filter length L.
    pub taps: usize,
    pub loading: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec!["fir-cmwf".into()],
            alpha_start_ms: -1.0,
            alpha_stop_ms: 4.0,
            alpha_step_ms: 0.0625,
            taps: 512,
            loading: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; the CMWF_OUT_DIR environment variable overrides a
    /// relative default.
    pub dir: PathBuf,
    pub prefix: String,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            prefix: "curve".into(),
            svg: false,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.fs.is_nan() || self.fs <= 0.0 {
            bail!("fs: sample rate {} must be positive", self.fs);
        }
        if self.grid_size < 64 {
            bail!("grid_size: {} too small", self.grid_size);
        }
        if self.scene.sources.is_empty() {
            bail!("scene.sources: at least one source required");
        }
        match (self.scene.noise_power, self.scene.noise_db) {
            (Some(p), None) if p < 0.0 => {
                bail!("scene.noise_power: {p} must be nonnegative")
            }
            (Some(_), Some(_)) => {
                bail!("scene.noise_power / scene.noise_db: give only one")
            }
            _ => {}
        }
        let mics = self.num_mics()?;
        for (i, s) in self.scene.sources.iter().enumerate() {
            match (&s.tdoa_ms, &s.ir_file) {
                (Some(t), None) => {
                    if t.len() != mics {
                        bail!(
                            "scene.sources[{i}].tdoa_ms: {} entries, expected {mics}",
                            t.len()
                        );
                    }
                }
                (None, Some(_)) => {}
                _ => bail!("scene.sources[{i}]: give exactly one of tdoa_ms / ir_file"),
            }
            match s.kind.as_str() {
                "white" | "speech" => {}
                "ar1" => {
                    let a = s
                        .a
                        .ok_or_else(|| anyhow!("scene.sources[{i}].a: required for kind \"ar1\""))?;
                    if a.is_nan() || a.abs() >= 1.0 {
                        bail!("scene.sources[{i}].a: {a} must satisfy |a| < 1");
                    }
                }
                "harmonic" => {
                    if s.f0.is_none() {
                        bail!("scene.sources[{i}].f0: required for kind \"harmonic\"");
                    }
                }
                other => bail!(
                    "scene.sources[{i}].kind: unknown kind {other:?} (white, speech, ar1, harmonic)"
                ),
            }
            if s.power.is_nan() || s.power <= 0.0 {
                bail!("scene.sources[{i}].power: {} must be positive", s.power);
            }
        }
        if self.sweep.alpha_step_ms <= 0.0 {
            bail!(
                "sweep.alpha_step_ms: {} must be positive",
                self.sweep.alpha_step_ms
            );
        }
        if self.sweep.alpha_stop_ms < self.sweep.alpha_start_ms {
            bail!("sweep.alpha_stop_ms: empty alpha grid");
        }
        if self.sweep.taps == 0 {
            bail!("sweep.taps: must be positive");
        }
        if self.sweep.loading < 0.0 {
            bail!("sweep.loading: {} must be nonnegative", self.sweep.loading);
        }
        for m in &self.sweep.methods {
            if !matches!(
                m.as_str(),
                "fir-cmwf" | "analytic-ula" | "analytic-two-source" | "scalar"
            ) {
                bail!("sweep.methods: unknown method {m:?}");
            }
        }
        Ok(())
    }

    pub fn num_mics(&self) -> anyhow::Result<usize> {
        let s = &self.scene.sources[0];
        if let Some(t) = &s.tdoa_ms {
            return Ok(t.len());
        }
        if let Some(path) = &s.ir_file {
            let (channels, _) = cmwf::wav::read_multichannel(path)
                .with_context(|| format!("scene.sources[0].ir_file {}", path.display()))?;
            return Ok(channels.len());
        }
        bail!("scene.sources[0]: give exactly one of tdoa_ms / ir_file");
    }

    pub fn noise_power(&self) -> f64 {
        self.scene
            .noise_power
            .or(self.scene.noise_db.map(|db| 10f64.powf(db / 10.0)))
            .unwrap_or(0.0)
    }

    pub fn source_spectrum(&self, i: usize) -> anyhow::Result<SpectralDensity> {
        let s = &self.scene.sources[i];
        let psd = match s.kind.as_str() {
            "white" => SpectralDensity::flat(s.power, self.grid_size, self.fs),
            "speech" => synth::speech_shaped_psd(self.grid_size, self.fs).scaled(s.power),
            "ar1" => {
                let base = SpectralDensity::ar1(s.a.unwrap(), self.grid_size, self.fs);
                let norm = s.power / base.power();
                base.scaled(norm)
            }
            "harmonic" => {
                // Long-term spectrum estimated from a rendered excerpt via the
                // windowed autocorrelation path, matching how the filters are
                // designed for deterministic periodic sources.
                let spec = self.harmonic_spec(i)?;
                let signal = synth::render_sources(
                    &[SourceSignalSpec::Harmonic(spec)],
                    2.0,
                    self.fs,
                    self.seed,
                )?;
                let corr =
                    synth::windowed_autocorrelation(&signal[0], self.fs, synth::DEFAULT_AUTOCORR_WINDOW_S, 700)?;
                let base = corr.to_psd(self.grid_size)?;
                let norm = s.power / base.power();
                base.scaled(norm)
            }
            _ => unreachable!("validated"),
        };
        Ok(psd)
    }

    pub fn harmonic_spec(&self, i: usize) -> anyhow::Result<HarmonicSourceSpec> {
        let s = &self.scene.sources[i];
        Ok(HarmonicSourceSpec {
            f0_hz: s.f0.ok_or_else(|| anyhow!("scene.sources[{i}].f0 missing"))?,
            formants: s
                .formants
                .clone()
                .unwrap_or_default()
                .into_iter()
                .map(|[f, b]| Formant {
                    frequency_hz: f,
                    bandwidth_hz: b,
                })
                .collect(),
            power: s.power,
            seed: s.seed,
        })
    }

    pub fn signal_spec(&self, i: usize) -> anyhow::Result<SourceSignalSpec> {
        let s = &self.scene.sources[i];
        Ok(match s.kind.as_str() {
            "white" => SourceSignalSpec::White {
                power: s.power,
                seed: s.seed,
            },
            "speech" => SourceSignalSpec::Stochastic {
                psd: synth::speech_shaped_psd(self.grid_size, self.fs),
                power: s.power,
                seed: s.seed,
            },
            "ar1" => SourceSignalSpec::Stochastic {
                psd: SpectralDensity::ar1(s.a.unwrap(), self.grid_size, self.fs),
                power: s.power,
                seed: s.seed,
            },
            "harmonic" => SourceSignalSpec::Harmonic(self.harmonic_spec(i)?),
            _ => unreachable!("validated"),
        })
    }

    /// Builds the scene, loading and truncating any referenced IR files.
    pub fn build_scene(&self, base_dir: &Path) -> anyhow::Result<Scene> {
        let mics = self.num_mics()?;
        let mut builder = cmwf::Scene::builder(self.fs, self.grid_size)
            .reference_mic(self.scene.reference_mic)
            .target_source(self.scene.target_source)
            .white_noise(self.noise_power());
        if let Some(taps) = self.scene.delay_taps {
            builder = builder.delay_taps(taps);
        }
        for (i, s) in self.scene.sources.iter().enumerate() {
            let psd = self.source_spectrum(i)?;
            let mixing = if let Some(tdoas) = &s.tdoa_ms {
                tdoas.iter().map(|&ms| Mixing::Tdoa(ms * 1e-3)).collect()
            } else {
                let path = resolve(base_dir, s.ir_file.as_ref().unwrap());
                let irs = ingest_impulse_responses(&path, self.fs, s.ir_truncate_ms)?;
                if irs.len() != mics {
                    bail!(
                        "scene.sources[{i}].ir_file: {} channels, expected {mics}",
                        irs.len()
                    );
                }
                irs.into_iter().map(Mixing::Fir).collect()
            };
            builder = builder.source(psd, mixing);
        }
        Ok(builder.build()?)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads a multichannel IR file, checks the sample rate, and truncates.
pub fn ingest_impulse_responses(
    path: &Path,
    fs: f64,
    truncate_ms: Option<f64>,
) -> anyhow::Result<Vec<Vec<f64>>> {
    let (mut channels, file_fs) = cmwf::wav::read_multichannel(path)
        .with_context(|| format!("reading {}", path.display()))?;
    if (file_fs - fs).abs() > 1e-6 {
        bail!(
            "{}: sample rate {file_fs} Hz does not match configured {fs} Hz",
            path.display()
        );
    }
    if let Some(ms) = truncate_ms {
        if ms.is_nan() || ms <= 0.0 {
            bail!("ir_truncate_ms: {ms} must be positive");
        }
        let keep = (ms * 1e-3 * fs).round() as usize;
        for c in channels.iter_mut() {
            c.truncate(keep);
        }
    }
    Ok(channels)
}

/// Alpha grid in integer samples with the ms-to-sample rounding recorded.
pub struct AlphaGrid {
    pub samples: Vec<i64>,
    pub requested_ms: Vec<f64>,
}

pub fn alpha_grid(start_ms: f64, stop_ms: f64, step_ms: f64, fs: f64) -> AlphaGrid {
    let mut requested_ms = Vec::new();
    let mut samples = Vec::new();
    let n = ((stop_ms - start_ms) / step_ms).round() as usize;
    for k in 0..=n {
        let ms = start_ms + k as f64 * step_ms;
        if ms > stop_ms + 1e-9 {
            break;
        }
        let s = (ms * 1e-3 * fs).round() as i64;
        if samples.last() == Some(&s) {
            continue;
        }
        requested_ms.push(ms);
        samples.push(s);
    }
    AlphaGrid {
        samples,
        requested_ms,
    }
}
