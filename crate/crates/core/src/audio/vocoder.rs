//! Phase-vocoder time stretching and pitch shifting.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::resample::resample_with_step;
use super::AudioBuffer;
use crate::error::{Error, Result};

/// Transform size of roughly 46 ms, rounded up to a power of two.
fn fft_size_for(sample_rate: u32) -> usize {
    ((0.046 * sample_rate as f64).ceil() as usize).next_power_of_two().max(64)
}

/// Analysis/synthesis hop used by [`time_stretch`] at `sample_rate`.
pub fn vocoder_hop(sample_rate: u32) -> usize {
    fft_size_for(sample_rate) / 4
}

pub(crate) fn hann_periodic(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// Stretches duration by `ratio` (1.2 means 20% longer) without changing pitch.
/// The output holds exactly `round(ratio * len)` samples.
pub fn time_stretch(buf: &AudioBuffer, ratio: f64) -> Result<AudioBuffer> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("stretch ratio must be positive, got {ratio}")));
    }
    let out_len = (buf.len() as f64 * ratio).round() as usize;
    if ratio == 1.0 || buf.is_empty() {
        return Ok(buf.clone());
    }
    let n_fft = fft_size_for(buf.sample_rate);
    let hop = n_fft / 4;
    let bins = n_fft / 2 + 1;
    let window = hann_periodic(n_fft);

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n_fft);
    let inv = planner.plan_fft_inverse(n_fft);

    // centered analysis with zero padding
    let pad = n_fft / 2;
    let mut padded = vec![0.0; pad];
    padded.extend_from_slice(&buf.samples);
    padded.extend(std::iter::repeat_n(0.0, pad + n_fft));
    let n_frames = 1 + buf.len() / hop;
    let mut frames: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n_frames + 1);
    let mut scratch = vec![Complex::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let start = t * hop;
        for (k, s) in scratch.iter_mut().enumerate() {
            *s = Complex::new(padded[start + k] * window[k], 0.0);
        }
        fwd.process(&mut scratch);
        frames.push(scratch[..bins].to_vec());
    }
    frames.push(vec![Complex::new(0.0, 0.0); bins]);

    let rate = 1.0 / ratio;
    let expected_advance: Vec<f64> = (0..bins).map(|b| 2.0 * PI * b as f64 * hop as f64 / n_fft as f64).collect();
    let mut phase: Vec<f64> = frames[0].iter().map(|c| c.arg()).collect();

    let n_out_frames = (out_len + hop - 1) / hop + 1;
    let total = (n_out_frames - 1) * hop + n_fft;
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut spec = vec![Complex::new(0.0, 0.0); n_fft];
    for k in 0..n_out_frames {
        let pos = (k as f64 * rate).min((n_frames - 1) as f64);
        let i = pos.floor() as usize;
        let alpha = pos - i as f64;
        let (left, right) = (&frames[i], &frames[i + 1]);
        for b in 0..bins {
            let mag = (1.0 - alpha) * left[b].norm() + alpha * right[b].norm();
            spec[b] = Complex::from_polar(mag, phase[b]);
            let delta = wrap_phase(right[b].arg() - left[b].arg() - expected_advance[b]);
            phase[b] += expected_advance[b] + delta;
        }
        for b in 1..n_fft - bins + 1 {
            spec[n_fft - b] = spec[b].conj();
        }
        inv.process(&mut spec);
        let start = k * hop;
        for n in 0..n_fft {
            out[start + n] += spec[n].re / n_fft as f64 * window[n];
            norm[start + n] += window[n] * window[n];
        }
    }
    let samples = (0..out_len)
        .map(|j| {
            let n = j + pad;
            if norm[n] > 1e-8 {
                out[n] / norm[n]
            } else {
                out[n]
            }
        })
        .collect();
    AudioBuffer::new(samples, buf.sample_rate)
}

/// Shifts pitch by `semitones` while keeping the exact input length.
pub fn pitch_shift(buf: &AudioBuffer, semitones: f64) -> Result<AudioBuffer> {
    if !semitones.is_finite() {
        return Err(Error::InvalidArgument(format!("semitones must be finite, got {semitones}")));
    }
    if semitones == 0.0 || buf.is_empty() {
        return Ok(buf.clone());
    }
    let factor = 2f64.powf(semitones / 12.0);
    let stretched = time_stretch(buf, factor)?;
    AudioBuffer::new(
        resample_with_step(&stretched.samples, factor, buf.len()),
        buf.sample_rate,
    )
}

/// Frequency of the largest magnitude bin of a Hann-windowed, zero-padded FFT.
pub fn dominant_frequency(buf: &AudioBuffer) -> f64 {
    let n = buf.len().next_power_of_two() * 4;
    let mut data: Vec<Complex<f64>> = buf
        .samples
        .iter()
        .zip(hann_periodic(buf.len()))
        .map(|(x, w)| Complex::new(x * w, 0.0))
        .collect();
    data.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut data);
    let (best, _) = data[1..n / 2]
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, c)| if c.norm() > acc.1 { (i + 1, c.norm()) } else { acc });
    best as f64 * buf.sample_rate as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;

    #[test]
    fn identity_stretch_and_shift() {
        let buf = AudioBuffer::sine(440.0, 0.5, 1.0, 16000);
        assert_eq!(time_stretch(&buf, 1.0).unwrap(), buf);
        assert_eq!(pitch_shift(&buf, 0.0).unwrap(), buf);
    }

    #[test]
    fn stretch_lengths() {
        let buf = AudioBuffer::sine(440.0, 0.5, 2.0, 16000);
        let hop = fft_size_for(16000) / 4;
        for (ratio, secs) in [(1.2, 2.4), (0.8, 1.6)] {
            let out = time_stretch(&buf, ratio).unwrap();
            let expected = (secs * 16000.0) as isize;
            assert!((out.len() as isize - expected).abs() <= hop as isize);
        }
    }

    #[test]
    fn stretch_preserves_pitch_and_level() {
        let buf = AudioBuffer::sine(440.0, 0.5, 2.0, 44100);
        for ratio in [0.8, 1.2] {
            let out = time_stretch(&buf, ratio).unwrap();
            let f = dominant_frequency(&out);
            assert!((f - 440.0).abs() / 440.0 < 0.03, "ratio {ratio}: {f}");
            let mid = out.slice(out.len() / 4, out.len() / 2);
            assert!((rms(&mid) - 0.5 / 2f64.sqrt()).abs() < 0.05);
        }
    }

    #[test]
    fn octave_shifts() {
        let buf = AudioBuffer::sine(440.0, 0.5, 1.0, 44100);
        for (st, target) in [(12.0, 880.0), (-12.0, 220.0)] {
            let out = pitch_shift(&buf, st).unwrap();
            assert_eq!(out.len(), buf.len());
            let f = dominant_frequency(&out);
            assert!((f - target).abs() / target < 0.03, "{st}: {f}");
        }
    }

    #[test]
    fn shift_round_trip() {
        let buf = AudioBuffer::sine(440.0, 0.5, 1.0, 16000);
        for st in [-2.0, -0.7, 1.3, 2.0] {
            let back = pitch_shift(&pitch_shift(&buf, st).unwrap(), -st).unwrap();
            let f = dominant_frequency(&back);
            assert!((f - 440.0).abs() / 440.0 < 0.03, "{st}: {f}");
        }
    }
}
