//! Log-mel spectrogram: centered reflect-padded STFT, Hann window, Slaney
//! mel scale with area-normalized triangular filters, natural log.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::vocoder::hann_periodic;
use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub fft_ms: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            n_mels: 64,
            win_ms: 25.0,
            hop_ms: 10.0,
            fft_ms: 64.0,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    fn samples(&self, ms: f64) -> usize {
        (ms * self.sample_rate as f64 / 1000.0).round() as usize
    }
    pub fn win_length(&self) -> usize {
        self.samples(self.win_ms)
    }
    pub fn hop_length(&self) -> usize {
        self.samples(self.hop_ms)
    }
    pub fn n_fft(&self) -> usize {
        self.samples(self.fft_ms)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.sample_rate > 0
            && self.n_mels > 0
            && self.win_ms > 0.0
            && self.hop_ms > 0.0
            && self.fft_ms > 0.0
            && self.log_floor > 0.0
            && self.hop_length() > 0;
        if !positive {
            return Err(Error::InvalidArgument("mel config fields must be positive".into()));
        }
        if self.fft_ms < self.win_ms {
            return Err(Error::InvalidArgument("fft_ms must be at least win_ms".into()));
        }
        Ok(())
    }
}

/// Row-major `n_frames x n_mels` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMel {
    pub n_frames: usize,
    pub n_mels: usize,
    pub data: Vec<f64>,
}

impl LogMel {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_mels..(t + 1) * self.n_mels]
    }
    pub fn get(&self, t: usize, m: usize) -> f64 {
        self.data[t * self.n_mels + m]
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= min_log_hz {
        min_log_mel + (hz / min_log_hz).ln() / logstep
    } else {
        hz / f_sp
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        min_log_hz * (logstep * (mel - min_log_mel)).exp()
    } else {
        f_sp * mel
    }
}

/// `n_mels x (n_fft/2 + 1)` filterbank from 0 Hz to Nyquist.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let bins = n_fft / 2 + 1;
    let fft_freqs: Vec<f64> = (0..bins).map(|k| k as f64 * sample_rate as f64 / n_fft as f64).collect();
    let max_mel = hz_to_mel(sample_rate as f64 / 2.0);
    let mel_f: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|i| {
            let enorm = 2.0 / (mel_f[i + 2] - mel_f[i]);
            fft_freqs
                .iter()
                .map(|&f| {
                    let lower = (f - mel_f[i]) / (mel_f[i + 1] - mel_f[i]);
                    let upper = (mel_f[i + 2] - f) / (mel_f[i + 2] - mel_f[i + 1]);
                    lower.min(upper).max(0.0) * enorm
                })
                .collect()
        })
        .collect()
}

fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    (if m < len as isize { m } else { period - m }) as usize
}

pub fn log_mel(buf: &AudioBuffer, cfg: &MelConfig) -> Result<LogMel> {
    cfg.validate()?;
    if buf.sample_rate != cfg.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: buf.sample_rate,
            right: cfg.sample_rate,
        });
    }
    let (n_fft, win, hop) = (cfg.n_fft(), cfg.win_length(), cfg.hop_length());
    if buf.len() < win {
        return Err(Error::BufferTooShort { len: buf.len(), min: win });
    }
    let bins = n_fft / 2 + 1;
    let mut window = vec![0.0; n_fft];
    let offset = (n_fft - win) / 2;
    window[offset..offset + win].copy_from_slice(&hann_periodic(win));
    let fb = mel_filterbank(cfg.sample_rate, n_fft, cfg.n_mels);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let pad = (n_fft / 2) as isize;
    let n_frames = 1 + buf.len() / hop;
    let mut data = Vec::with_capacity(n_frames * cfg.n_mels);
    let mut frame = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; bins];
    for t in 0..n_frames {
        let start = (t * hop) as isize - pad;
        for (k, slot) in frame.iter_mut().enumerate() {
            let x = buf.samples[reflect_index(start + k as isize, buf.len())];
            *slot = Complex::new(x * window[k], 0.0);
        }
        fft.process(&mut frame);
        for (p, c) in power.iter_mut().zip(&frame) {
            *p = c.norm_sqr();
        }
        for filt in &fb {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            data.push((e + cfg.log_floor).ln());
        }
    }
    Ok(LogMel {
        n_frames,
        n_mels: cfg.n_mels,
        data,
    })
}
