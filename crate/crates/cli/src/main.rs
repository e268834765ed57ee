//! Batch experiment harness: configure a scene, sweep delay-error curves
//! with one or more methods, and emit CSV/JSON artifacts.

mod config;
mod output;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cmwf::analytic::{self, TwoSourceScenario, UlaScenario};
use cmwf::factorization;
use cmwf::fir;
use cmwf::spectrum::SpectralDensity;
use cmwf::synth;
use cmwf::DelayErrorCurve;
use config::{alpha_grid, AlphaGrid, ExperimentConfig};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "cmwf", version, about = "Delay-error curves for causal multichannel Wiener filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct AlphaArgs {
    /// First delay, milliseconds.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    alpha_start_ms: f64,
    /// Last delay, milliseconds.
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    alpha_stop_ms: f64,
    /// Grid step, milliseconds.
    #[arg(long, default_value_t = 0.0625)]
    alpha_step_ms: f64,
}

impl AlphaArgs {
    fn grid_ms(&self) -> anyhow::Result<Vec<f64>> {
        if self.alpha_step_ms <= 0.0 {
            bail!("--alpha-step-ms must be positive");
        }
        if self.alpha_stop_ms < self.alpha_start_ms {
            bail!("--alpha-stop-ms is before --alpha-start-ms");
        }
        let n = ((self.alpha_stop_ms - self.alpha_start_ms) / self.alpha_step_ms).round() as usize;
        Ok((0..=n)
            .map(|k| self.alpha_start_ms + k as f64 * self.alpha_step_ms)
            .filter(|ms| *ms <= self.alpha_stop_ms + 1e-9)
            .collect())
    }
}

#[derive(Args, Clone)]
struct OutArgs {
    /// Output directory (CMWF_OUT_DIR overrides the default).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// File name prefix for curves and manifest.
    #[arg(long, default_value = "curve")]
    prefix: String,
    /// Also emit an SVG line chart.
    #[arg(long)]
    svg: bool,
}

impl OutArgs {
    fn dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            std::env::var_os("CMWF_OUT_DIR")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"))
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form curve for a plane wave on a uniform linear array.
    AnalyticUla {
        /// Number of microphones.
        #[arg(long)]
        mics: usize,
        /// Inter-mic TDOA, milliseconds (signed).
        #[arg(long, allow_hyphen_values = true)]
        tau_ms: f64,
        /// Noise power in dB (relative to the unit source power).
        #[arg(long, allow_hyphen_values = true)]
        noise_db: f64,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Closed-form curve for two plane-wave sources on two mics.
    AnalyticTwoSource {
        /// Target TDOA, milliseconds (signed).
        #[arg(long, allow_hyphen_values = true)]
        tau1_ms: f64,
        /// Interferer TDOA, milliseconds (signed).
        #[arg(long, allow_hyphen_values = true)]
        tau2_ms: f64,
        #[arg(long, allow_hyphen_values = true)]
        noise_db: f64,
        /// Sample rate used for the grid-matched curve.
        #[arg(long, default_value_t = cmwf::DEFAULT_SAMPLE_RATE)]
        fs: f64,
        /// Windowed-sinc length matching the scene realization.
        #[arg(long, default_value_t = synth::DEFAULT_DELAY_TAPS)]
        delay_taps: usize,
        /// Emit the continuous-time curve instead of the sampled one.
        #[arg(long)]
        continuous: bool,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Single-channel causal Wiener curve via spectral factorization.
    Scalar {
        /// Source spectrum: "white", "speech", or "ar1:<a>".
        #[arg(long, default_value = "speech")]
        source: String,
        #[arg(long, allow_hyphen_values = true)]
        noise_db: f64,
        #[arg(long, default_value_t = cmwf::DEFAULT_SAMPLE_RATE)]
        fs: f64,
        #[arg(long, default_value_t = cmwf::DEFAULT_GRID_SIZE)]
        grid_size: usize,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the methods of an experiment config and write one CSV per method.
    Sweep {
        /// TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        prefix: Option<String>,
        /// Override sweep.methods (comma separated).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Override filter length L.
        #[arg(long)]
        taps: Option<usize>,
        /// Override diagonal loading.
        #[arg(long)]
        loading: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_start_ms: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_stop_ms: Option<f64>,
        #[arg(long)]
        alpha_step_ms: Option<f64>,
        #[arg(long)]
        svg: bool,
    },
    /// Render scene signals and impulse responses to WAV files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Rendered duration, seconds.
        #[arg(long, default_value_t = 10.0)]
        duration_s: f64,
        /// Noise seed for the mixture rendering.
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Load measured impulse responses, truncate, and report.
    IngestCheck {
        /// Waveform files, one per source (one channel per mic).
        #[arg(long = "ir", required = true)]
        irs: Vec<PathBuf>,
        #[arg(long, default_value_t = cmwf::DEFAULT_SAMPLE_RATE)]
        fs: f64,
        /// Truncation length, milliseconds.
        #[arg(long)]
        truncate_ms: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::AnalyticUla {
            mics,
            tau_ms,
            noise_db,
            alpha,
            out,
        } => {
            let scenario = UlaScenario::new(mics, tau_ms * 1e-3, db_to_linear(noise_db))?;
            let alphas_s: Vec<f64> = alpha.grid_ms()?.iter().map(|ms| ms * 1e-3).collect();
            let t0 = Instant::now();
            let curve = analytic::ula_curve(&scenario, &alphas_s)?;
            finish_single(
                &out,
                curve,
                json!({
                    "command": "analytic-ula",
                    "mics": mics,
                    "tau_ms": tau_ms,
                    "noise_db": noise_db,
                }),
                t0,
            )
        }
        Command::AnalyticTwoSource {
            tau1_ms,
            tau2_ms,
            noise_db,
            fs,
            delay_taps,
            continuous,
            alpha,
            out,
        } => {
            let scenario =
                TwoSourceScenario::new(tau1_ms * 1e-3, tau2_ms * 1e-3, db_to_linear(noise_db))?;
            let alphas_s: Vec<f64> = alpha.grid_ms()?.iter().map(|ms| ms * 1e-3).collect();
            let t0 = Instant::now();
            let curve = if continuous {
                analytic::two_source_curve(&scenario, &alphas_s)?
            } else {
                analytic::two_source_curve_sampled(&scenario, fs, delay_taps, &alphas_s)?
            };
            finish_single(
                &out,
                curve,
                json!({
                    "command": "analytic-two-source",
                    "tau1_ms": tau1_ms,
                    "tau2_ms": tau2_ms,
                    "noise_db": noise_db,
                    "fs": fs,
                    "delay_taps": delay_taps,
                    "continuous": continuous,
                }),
                t0,
            )
        }
        Command::Scalar {
            source,
            noise_db,
            fs,
            grid_size,
            alpha,
            out,
        } => {
            let signal = parse_scalar_source(&source, grid_size, fs)?;
            let noise = db_to_linear(noise_db);
            let observation = SpectralDensity::from_values(
                signal.values().iter().map(|v| v + noise).collect(),
                fs,
            )?;
            let alphas_s: Vec<f64> = alpha.grid_ms()?.iter().map(|ms| ms * 1e-3).collect();
            let t0 = Instant::now();
            let curve =
                factorization::scalar_causal_delay_error(&signal, &observation, &signal, &alphas_s)?;
            finish_single(
                &out,
                curve,
                json!({
                    "command": "scalar",
                    "source": source,
                    "noise_db": noise_db,
                    "fs": fs,
                    "grid_size": grid_size,
                }),
                t0,
            )
        }
        Command::Sweep {
            config,
            out_dir,
            prefix,
            methods,
            taps,
            loading,
            alpha_start_ms,
            alpha_stop_ms,
            alpha_step_ms,
            svg,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(m) = methods {
                cfg.sweep.methods = m;
            }
            if let Some(t) = taps {
                cfg.sweep.taps = t;
            }
            if let Some(l) = loading {
                cfg.sweep.loading = l;
            }
            if let Some(a) = alpha_start_ms {
                cfg.sweep.alpha_start_ms = a;
            }
            if let Some(a) = alpha_stop_ms {
                cfg.sweep.alpha_stop_ms = a;
            }
            if let Some(a) = alpha_step_ms {
                cfg.sweep.alpha_step_ms = a;
            }
            if let Some(d) = out_dir {
                cfg.output.dir = d;
            } else if let Some(env_dir) = std::env::var_os("CMWF_OUT_DIR") {
                cfg.output.dir = PathBuf::from(env_dir);
            }
            if let Some(p) = prefix {
                cfg.output.prefix = p;
            }
            cfg.output.svg |= svg;
            cfg.validate()?;
            run_sweep(&cfg, config.parent().unwrap_or(std::path::Path::new(".")))
        }
        Command::Synth {
            config,
            duration_s,
            noise_seed,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(d) = out_dir {
                cfg.output.dir = d;
            } else if let Some(env_dir) = std::env::var_os("CMWF_OUT_DIR") {
                cfg.output.dir = PathBuf::from(env_dir);
            }
            run_synth(&cfg, config.parent().unwrap_or(std::path::Path::new(".")), duration_s, noise_seed)
        }
        Command::IngestCheck {
            irs,
            fs,
            truncate_ms,
            out_dir,
        } => run_ingest_check(&irs, fs, truncate_ms, out_dir),
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn parse_scalar_source(spec: &str, grid_size: usize, fs: f64) -> anyhow::Result<SpectralDensity> {
    if spec == "white" {
        return Ok(SpectralDensity::flat(1.0, grid_size, fs));
    }
    if spec == "speech" {
        return Ok(synth::speech_shaped_psd(grid_size, fs));
    }
    if let Some(a) = spec.strip_prefix("ar1:") {
        let a: f64 = a.parse().context("--source ar1:<a> needs a number")?;
        if a.is_nan() || a.abs() >= 1.0 {
            bail!("--source ar1: coefficient {a} must satisfy |a| < 1");
        }
        let base = SpectralDensity::ar1(a, grid_size, fs);
        let norm = 1.0 / base.power();
        return Ok(base.scaled(norm));
    }
    bail!("--source: unknown spectrum {spec:?} (white, speech, ar1:<a>)");
}

fn finish_single(
    out: &OutArgs,
    curve: DelayErrorCurve,
    config_echo: serde_json::Value,
    t0: Instant,
) -> anyhow::Result<()> {
    let timings = json!({ "total": t0.elapsed().as_secs_f64() * 1e3 });
    let artifacts = output::write_curves(
        &out.dir(),
        &out.prefix,
        std::slice::from_ref(&curve),
        config_echo,
        &[],
        0,
        timings,
        out.svg,
    )?;
    for f in &artifacts.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, base_dir: &std::path::Path) -> anyhow::Result<()> {
    let scene = cfg.build_scene(base_dir)?;
    let AlphaGrid {
        samples,
        requested_ms,
    } = alpha_grid(
        cfg.sweep.alpha_start_ms,
        cfg.sweep.alpha_stop_ms,
        cfg.sweep.alpha_step_ms,
        cfg.fs,
    );
    if samples.is_empty() {
        bail!("sweep: empty alpha grid");
    }
    let alphas_s: Vec<f64> = samples.iter().map(|&k| k as f64 / cfg.fs).collect();
    let mut curves = Vec::new();
    let mut timings = serde_json::Map::new();
    for method in &cfg.sweep.methods {
        let t0 = Instant::now();
        let curve = match method.as_str() {
            "fir-cmwf" => fir::delay_sweep(&scene, cfg.sweep.taps, &samples, cfg.sweep.loading)?,
            "analytic-ula" => {
                let scenario = ula_scenario_from(cfg)?;
                with_digest(analytic::ula_curve(&scenario, &alphas_s)?, &scene)
            }
            "analytic-two-source" => {
                let scenario = two_source_scenario_from(cfg)?;
                with_digest(
                    analytic::two_source_curve_sampled(
                        &scenario,
                        cfg.fs,
                        scene.delay_taps(),
                        &alphas_s,
                    )?,
                    &scene,
                )
            }
            "scalar" => with_digest(scalar_curve_from(cfg, &scene, &alphas_s)?, &scene),
            other => bail!("sweep.methods: unknown method {other:?}"),
        };
        timings.insert(
            method.clone(),
            json!(t0.elapsed().as_secs_f64() * 1e3),
        );
        curves.push(curve);
    }
    let artifacts = output::write_curves(
        &cfg.output.dir,
        &cfg.output.prefix,
        &curves,
        serde_json::to_value(cfg)?,
        &samples,
        scene.padding_samples(),
        json!({
            "methods": serde_json::Value::Object(timings),
            "requested_alpha_ms": requested_ms,
        }),
        cfg.output.svg,
    )?;
    for f in &artifacts.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn with_digest(curve: DelayErrorCurve, scene: &cmwf::Scene) -> DelayErrorCurve {
    // Analytic curves carry no scene by themselves; stamp the digest of the
    // scene they are being compared against.
    DelayErrorCurve::new(
        curve.method(),
        curve.target_power(),
        scene.digest(),
        curve
            .points()
            .iter()
            .map(|p| (p.alpha_s, p.mse_linear))
            .collect(),
    )
    .expect("re-stamping preserves validity")
}

fn ula_scenario_from(cfg: &ExperimentConfig) -> anyhow::Result<UlaScenario> {
    if cfg.scene.sources.len() != 1 {
        bail!("analytic-ula: needs exactly one source, got {}", cfg.scene.sources.len());
    }
    let s = &cfg.scene.sources[0];
    if s.kind != "white" {
        bail!("analytic-ula: source kind must be \"white\", got {:?}", s.kind);
    }
    let tdoas = s
        .tdoa_ms
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("analytic-ula: scene must use tdoa_ms mixing"))?;
    if tdoas.len() < 2 {
        return Ok(UlaScenario::new(1, 0.0, cfg.noise_power())?);
    }
    let tau = tdoas[1] - tdoas[0];
    for (m, &t) in tdoas.iter().enumerate() {
        let expected = tdoas[0] + m as f64 * tau;
        if (t - expected).abs() > 1e-9 {
            bail!("analytic-ula: tdoa_ms must be uniformly spaced (mic {m} is {t}, expected {expected})");
        }
    }
    Ok(UlaScenario::new(
        tdoas.len(),
        tau * 1e-3,
        cfg.noise_power(),
    )?)
}

fn two_source_scenario_from(cfg: &ExperimentConfig) -> anyhow::Result<TwoSourceScenario> {
    if cfg.scene.sources.len() != 2 {
        bail!(
            "analytic-two-source: needs exactly two sources, got {}",
            cfg.scene.sources.len()
        );
    }
    let mut taus = [0.0; 2];
    for (n, s) in cfg.scene.sources.iter().enumerate() {
        if s.kind != "white" {
            bail!("analytic-two-source: source {n} kind must be \"white\"");
        }
        let tdoas = s
            .tdoa_ms
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("analytic-two-source: scene must use tdoa_ms mixing"))?;
        if tdoas.len() != 2 {
            bail!("analytic-two-source: needs exactly two mics");
        }
        if tdoas[0].abs() > 1e-12 {
            bail!("analytic-two-source: the reference-mic TDOA must be 0");
        }
        taus[n] = tdoas[1] * 1e-3;
    }
    Ok(TwoSourceScenario::new(taus[0], taus[1], cfg.noise_power())?)
}

fn scalar_curve_from(
    cfg: &ExperimentConfig,
    scene: &cmwf::Scene,
    alphas_s: &[f64],
) -> anyhow::Result<DelayErrorCurve> {
    if scene.num_mics() != 1 {
        bail!("scalar: needs a single-mic scene, got {} mics", scene.num_mics());
    }
    let n = scene.grid_size();
    let responses = scene.mixing_responses();
    let mut observation = vec![0.0; n];
    for (src, resp) in responses[0].iter().enumerate() {
        let s = scene.source_spectrum(src);
        for k in 0..n {
            observation[k] += resp[k].norm_sqr() * s.value(k);
        }
    }
    for (k, v) in observation.iter_mut().enumerate() {
        *v += scene.noise_spectrum(0).value(k);
    }
    let observation = SpectralDensity::from_values(observation, cfg.fs)?;
    let signal = scene.desired_spectrum();
    Ok(factorization::scalar_causal_delay_error(
        &signal,
        &observation,
        &signal,
        alphas_s,
    )?)
}

fn run_synth(
    cfg: &ExperimentConfig,
    base_dir: &std::path::Path,
    duration_s: f64,
    noise_seed: u64,
) -> anyhow::Result<()> {
    let scene = cfg.build_scene(base_dir)?;
    let specs: Vec<_> = (0..cfg.scene.sources.len())
        .map(|i| cfg.signal_spec(i))
        .collect::<anyhow::Result<_>>()?;
    let sources = synth::render_sources(&specs, duration_s, cfg.fs, cfg.seed)?;
    let render = synth::render_mixture(&scene, &sources, noise_seed)?;
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    let p = dir.join("sources.wav");
    cmwf::wav::write_multichannel(&p, &sources, cfg.fs)?;
    outputs.push(p);
    let p = dir.join("mixture.wav");
    cmwf::wav::write_multichannel(&p, &render.channels, cfg.fs)?;
    outputs.push(p);
    let p = dir.join("desired.wav");
    cmwf::wav::write_multichannel(&p, &[render.desired_base().to_vec()], cfg.fs)?;
    outputs.push(p);
    for src in 0..scene.num_sources() {
        let irs: Vec<Vec<f64>> = (0..scene.num_mics())
            .map(|m| scene.mixing_fir(m, src).to_vec())
            .collect();
        let max_len = irs.iter().map(Vec::len).max().unwrap_or(0);
        let padded: Vec<Vec<f64>> = irs
            .into_iter()
            .map(|mut v| {
                v.resize(max_len, 0.0);
                v
            })
            .collect();
        let p = dir.join(format!("ir-source{src}.wav"));
        cmwf::wav::write_multichannel(&p, &padded, cfg.fs)?;
        outputs.push(p);
    }
    let manifest = json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg)?,
        "duration_s": duration_s,
        "noise_seed": noise_seed,
        "padding_samples": scene.padding_samples(),
        "outputs": outputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    output::write_atomic(
        &dir.join("synth-manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    for f in &outputs {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run_ingest_check(
    irs: &[PathBuf],
    fs: f64,
    truncate_ms: Option<f64>,
    out_dir: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut mics = None;
    let mut loaded = Vec::new();
    for path in irs {
        let channels = config::ingest_impulse_responses(path, fs, truncate_ms)?;
        match mics {
            None => mics = Some(channels.len()),
            Some(m) if m != channels.len() => bail!(
                "{}: {} channels, expected {m} (all sources must share the mic count)",
                path.display(),
                channels.len()
            ),
            _ => {}
        }
        println!(
            "{}: {} mics x {} samples",
            path.display(),
            channels.len(),
            channels.first().map(Vec::len).unwrap_or(0)
        );
        loaded.push(json!({
            "file": path.display().to_string(),
            "mics": channels.len(),
            "samples": channels.first().map(Vec::len).unwrap_or(0),
            "truncate_ms": truncate_ms,
        }));
    }
    if let Some(dir) = out_dir {
        let manifest = json!({
            "library_version": env!("CARGO_PKG_VERSION"),
            "fs": fs,
            "responses": loaded,
        });
        output::write_atomic(
            &dir.join("ingest-manifest.json"),
            serde_json::to_string_pretty(&manifest)?.as_bytes(),
        )?;
    }
    Ok(())
}
