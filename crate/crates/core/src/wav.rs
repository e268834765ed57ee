//! RIFF/WAVE interchange, 32-bit float PCM, little-endian.

use crate::error::{Error, Result};
use std::path::Path;

/// Writes channels as interleaved 32-bit float samples.
pub fn write_multichannel(path: &Path, channels: &[Vec<f64>], sample_rate: f64) -> Result<()> {
    if channels.is_empty() {
        return Err(Error::DimensionMismatch("no channels to write".into()));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(Error::DimensionMismatch(
            "channels must share a length".into(),
        ));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for n in 0..len {
        for ch in channels {
            writer.write_sample(ch[n] as f32)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

/// Reads an interleaved float or integer PCM file into per-channel `f64`.
pub fn read_multichannel(path: &Path) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let mut out = vec![Vec::new(); channels];
    match spec.sample_format {
        hound::SampleFormat::Float => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                out[i % channels].push(s? as f64);
            }
        }
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f64;
            for (i, s) in reader.samples::<i32>().enumerate() {
                out[i % channels].push(s? as f64 * scale);
            }
        }
    }
    Ok((out, spec.sample_rate as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_roundtrip_is_bit_exact() {
        let dir = std::env::temp_dir().join("cmwf-wav-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.wav");
        // Values quantized to f32 so the roundtrip is exact.
        let ch0: Vec<f64> = (0..64).map(|n| (n as f32 * 0.1).sin() as f64).collect();
        let ch1: Vec<f64> = (0..64).map(|n| (n as f32 * 0.01) as f64).collect();
        write_multichannel(&path, &[ch0.clone(), ch1.clone()], 16000.0).unwrap();
        let (read, fs) = read_multichannel(&path).unwrap();
        assert_eq!(fs, 16000.0);
        assert_eq!(read[0], ch0);
        assert_eq!(read[1], ch1);
        std::fs::remove_file(&path).ok();
    }
}
