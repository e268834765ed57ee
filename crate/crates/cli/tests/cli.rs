//! End-to-end checks of the command-line harness: golden-file determinism,
//! config validation diagnostics, and ingest path equivalence.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cmwf"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cmwf-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const TWO_SOURCE_CFG: &str = r#"
fs = 16000.0
grid_size = 8192
seed = 7

[scene]
noise_db = -20.0
delay_taps = 128

[[scene.sources]]
kind = "white"
tdoa_ms = [0.0, 1.0]

[[scene.sources]]
kind = "white"
tdoa_ms = [0.0, -0.6]

[sweep]
methods = ["analytic-two-source", "fir-cmwf"]
alpha_start_ms = -1.0
alpha_stop_ms = 4.0
alpha_step_ms = 0.25
taps = 512
loading = 1e-5
"#;

#[test]
fn sweep_is_byte_deterministic() {
    let dir = temp_dir("golden");
    let cfg = write_config(&dir, "two-source.toml", TWO_SOURCE_CFG);
    let mut csvs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let status = bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        let fir = std::fs::read(out.join("curve-fir-cmwf.csv")).unwrap();
        let analytic = std::fs::read(out.join("curve-analytic-two-source.csv")).unwrap();
        csvs.push((fir, analytic));
    }
    assert_eq!(csvs[0], csvs[1], "CSV output differs between identical runs");
}

#[test]
fn sweep_methods_agree_pointwise() {
    // Two-source benchmark config: the two emitted CSVs differ by < 0.5 dB away
    // from step edges (steps at 0, 16, and the 25.6-sample tail).
    let dir = temp_dir("agree");
    let cfg = write_config(&dir, "two-source.toml", TWO_SOURCE_CFG);
    let out = dir.join("out");
    assert!(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let parse = |name: &str| -> Vec<(f64, f64)> {
        std::fs::read_to_string(out.join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let mut it = l.split(',');
                let alpha: f64 = it.next().unwrap().parse().unwrap();
                let _lin = it.next().unwrap();
                let db: f64 = it.next().unwrap().parse().unwrap();
                (alpha, db)
            })
            .collect()
    };
    let fir = parse("curve-fir-cmwf.csv");
    let analytic = parse("curve-analytic-two-source.csv");
    assert_eq!(fir.len(), analytic.len());
    let steps_ms = {
        let mut v = vec![0.0, 1.0];
        for k in 0..4 {
            v.push(1.0 + (k as f64 + 1.0) * 1.6);
            v.push((k as f64 + 1.0) * 1.6);
        }
        v
    };
    for ((a, f_db), (b, an_db)) in fir.iter().zip(&analytic) {
        assert_eq!(a, b);
        let near_step = steps_ms
            .iter()
            .any(|s| (a - s).abs() * 16.0 < 2.0);
        if near_step {
            continue;
        }
        assert!(
            (f_db - an_db).abs() < 0.5,
            "alpha {a} ms: fir {f_db} vs analytic {an_db}"
        );
    }
}

#[test]
fn analytic_method_rejects_wrong_scene_shape() {
    // analytic-ula on a two-source scene: nonzero exit naming the method.
    let dir = temp_dir("shape");
    let cfg = write_config(&dir, "two-source.toml", TWO_SOURCE_CFG);
    let out = bin()
        .args(["sweep", "--methods", "analytic-ula", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("analytic-ula"), "{msg}");
}

#[test]
fn malformed_config_names_the_field() {
    let dir = temp_dir("badcfg");
    let cfg = write_config(
        &dir,
        "bad.toml",
        r#"
[scene]
noise_power = -0.5

[[scene.sources]]
kind = "white"
tdoa_ms = [0.0]
"#,
    );
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(
        msg.contains("scene.noise_power"),
        "diagnostic does not name the field: {msg}"
    );
}

#[test]
fn ula_csv_matches_closed_form_row_count() {
    let dir = temp_dir("ula");
    assert!(bin()
        .args([
            "analytic-ula",
            "--mics",
            "4",
            "--tau-ms",
            "0.5",
            "--noise-db",
            "-20",
            "--alpha-start-ms",
            "-1",
            "--alpha-stop-ms",
            "3",
            "--alpha-step-ms",
            "0.0625",
            "--prefix",
            "ula",
        ])
        .arg("--out-dir")
        .arg(&dir)
        .status()
        .unwrap()
        .success());
    let text = std::fs::read_to_string(dir.join("ula-analytic-ula.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 65);
    // Staircase values equal the closed form exactly: s2/(s2+count).
    for row in rows {
        let mut it = row.split(',');
        let alpha_ms: f64 = it.next().unwrap().parse().unwrap();
        let lin: f64 = it.next().unwrap().parse().unwrap();
        let count = (0..4)
            .filter(|&m| m as f64 * 0.5 <= alpha_ms + 1e-12)
            .count() as f64;
        let expected = 0.01 / (0.01 + count);
        assert_eq!(lin, expected, "alpha {alpha_ms} ms");
    }
}

#[test]
fn ingest_rejects_sample_rate_mismatch() {
    let dir = temp_dir("ingest-fs");
    let path = dir.join("ir.wav");
    cmwf::wav::write_multichannel(&path, &[vec![1.0, 0.0, 0.0]], 48000.0).unwrap();
    let out = bin()
        .args(["ingest-check", "--fs", "16000", "--ir"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("sample rate"), "{msg}");
}

#[test]
fn ingest_truncation_keeps_exact_sample_count() {
    // 100 ms of IR truncated to 10 ms at 16 kHz keeps exactly 160 samples.
    let dir = temp_dir("ingest-trunc");
    let path = dir.join("ir.wav");
    let long: Vec<f64> = (0..1600).map(|n| ((n * 37) % 101) as f64 / 101.0).collect();
    cmwf::wav::write_multichannel(&path, &[long.clone(), long], 16000.0).unwrap();
    let out = bin()
        .args(["ingest-check", "--fs", "16000", "--truncate-ms", "10", "--ir"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let msg = String::from_utf8_lossy(&out.stdout);
    assert!(msg.contains("2 mics x 160 samples"), "{msg}");
}

#[test]
fn ingested_and_inline_irs_design_identical_curves() {
    // Round-trip a scene's impulse responses through WAV (f32) and compare
    // sweeps from the file-based and in-memory paths.
    let dir = temp_dir("paths");
    let fs = 16000.0;
    // f32-exact IR values so the WAV round trip is lossless.
    let quantize = |v: f64| v as f32 as f64;
    let ir0: Vec<Vec<f64>> = vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![0.0, 0.0, quantize(0.83), quantize(0.21)],
    ];
    let ir1: Vec<Vec<f64>> = vec![
        vec![quantize(0.77), quantize(-0.31), 0.0, 0.0],
        vec![0.0, quantize(0.55), 0.0, quantize(0.12)],
    ];
    cmwf::wav::write_multichannel(&dir.join("ir0.wav"), &ir0, fs).unwrap();
    cmwf::wav::write_multichannel(&dir.join("ir1.wav"), &ir1, fs).unwrap();

    let inline_scene = cmwf::Scene::builder(fs, 4096)
        .source(
            cmwf::SpectralDensity::flat(1.0, 4096, fs),
            ir0.iter().map(|h| cmwf::Mixing::Fir(h.clone())).collect(),
        )
        .source(
            cmwf::SpectralDensity::flat(1.0, 4096, fs),
            ir1.iter().map(|h| cmwf::Mixing::Fir(h.clone())).collect(),
        )
        .white_noise(0.01)
        .build()
        .unwrap();

    let file_scene = {
        let read0 = config_read(&dir.join("ir0.wav"), fs);
        let read1 = config_read(&dir.join("ir1.wav"), fs);
        cmwf::Scene::builder(fs, 4096)
            .source(
                cmwf::SpectralDensity::flat(1.0, 4096, fs),
                read0.into_iter().map(cmwf::Mixing::Fir).collect(),
            )
            .source(
                cmwf::SpectralDensity::flat(1.0, 4096, fs),
                read1.into_iter().map(cmwf::Mixing::Fir).collect(),
            )
            .white_noise(0.01)
            .build()
            .unwrap()
    };

    let alphas: Vec<i64> = (0..16).collect();
    let a = cmwf::fir::delay_sweep(&inline_scene, 64, &alphas, 1e-6).unwrap();
    let b = cmwf::fir::delay_sweep(&file_scene, 64, &alphas, 1e-6).unwrap();
    for (p, q) in a.points().iter().zip(b.points()) {
        assert!(
            (p.mse_linear - q.mse_linear).abs() < 1e-12,
            "alpha {}: {} vs {}",
            p.alpha_s,
            p.mse_linear,
            q.mse_linear
        );
    }
}

fn config_read(path: &Path, fs: f64) -> Vec<Vec<f64>> {
    let (channels, file_fs) = cmwf::wav::read_multichannel(path).unwrap();
    assert_eq!(file_fs, fs);
    channels
}
