//! Mono WAV I/O: 16-bit PCM or 32-bit float in, 32-bit float out.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Reads a WAV file. Multichannel input is rejected.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidArgument(format!(
            "{}: expected mono, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes 32-bit float mono.
pub fn write_wav(path: &Path, buf: &AudioBuffer) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in &buf.samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Writes 16-bit PCM mono, clipping to full scale.
pub fn write_wav_pcm16(path: &Path, buf: &AudioBuffer) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in &buf.samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_and_pcm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let buf = AudioBuffer::sine(440.0, 0.5, 0.1, 22050);
        let p = dir.path().join("f.wav");
        write_wav(&p, &buf).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 22050);
        for (a, b) in back.samples.iter().zip(&buf.samples) {
            assert_eq!(*a, *b as f32 as f64);
        }
        let p16 = dir.path().join("i.wav");
        write_wav_pcm16(&p16, &buf).unwrap();
        let back = read_wav(&p16).unwrap();
        for (a, b) in back.samples.iter().zip(&buf.samples) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }

    #[test]
    fn missing_file() {
        assert!(matches!(read_wav(Path::new("/nonexistent/x.wav")), Err(Error::MissingFile(_))));
    }
}
