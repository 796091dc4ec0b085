//! Band-limited resampling with a Kaiser-windowed sinc kernel.
//!
//! The kernel is tabulated once and linearly interpolated. With 32 zero
//! crossings and beta = 9 the stopband sits below -80 dB.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::AudioBuffer;

const ZERO_CROSSINGS: usize = 32;
const TABLE_RES: usize = 512;
const KAISER_BETA: f64 = 9.0;
const ROLLOFF: f64 = 0.94;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kernel_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ZERO_CROSSINGS * TABLE_RES + 2;
        let norm = bessel_i0(KAISER_BETA);
        (0..n)
            .map(|i| {
                let x = i as f64 / TABLE_RES as f64;
                if x >= ZERO_CROSSINGS as f64 {
                    return 0.0;
                }
                let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
                let r = x / ZERO_CROSSINGS as f64;
                sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
            })
            .collect()
    })
}

#[inline]
fn kernel(x: f64) -> f64 {
    kernel_in(kernel_table(), x)
}

#[inline(always)]
fn kernel_in(table: &[f64], x: f64) -> f64 {
    let pos = x.abs() * TABLE_RES as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

/// Reads `out_len` samples of `samples` at input positions `j * step`,
/// low-passing when `step > 1` so the output is alias-free.
pub fn resample_with_step(samples: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let fc = ROLLOFF * (1.0 / step).min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / fc;
    let n = samples.len() as isize;
    let table = kernel_table();
    (0..out_len)
        .map(|j| {
            let t = j as f64 * step;
            let lo = ((t - half_width).ceil() as isize).max(0);
            let hi = ((t + half_width).floor() as isize).min(n - 1);
            let mut acc = 0.0;
            if lo <= hi {
                for (i, &x) in (lo..=hi).zip(&samples[lo as usize..=hi as usize]) {
                    acc += x * kernel_in(table, fc * (t - i as f64));
                }
            }
            acc * fc
        })
        .collect()
}

/// Largest number of distinct filter phases worth tabulating.
const MAX_PHASES: u64 = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Same kernel as [`resample_with_step`] for `step = m / l`, with the taps
/// of each of the `l` output phases computed once.
fn resample_polyphase(samples: &[f64], m: usize, l: usize, out_len: usize) -> Vec<f64> {
    let step = m as f64 / l as f64;
    let fc = ROLLOFF * (1.0 / step).min(1.0);
    let half_width = ZERO_CROSSINGS as f64 / fc;
    let phases: Vec<(isize, Vec<f64>)> = (0..l)
        .map(|p| {
            let t = (p * m) as f64 / l as f64;
            let lo = (t - half_width).ceil() as isize;
            let hi = (t + half_width).floor() as isize;
            let taps = (lo..=hi).map(|i| kernel(fc * (t - i as f64)) * fc).collect();
            (lo, taps)
        })
        .collect();
    let n = samples.len() as isize;
    (0..out_len)
        .map(|j| {
            let (lo, taps) = &phases[j % l];
            let start = ((j / l) * m) as isize + lo;
            let skip = (-start).max(0) as usize;
            let end = (n - start).clamp(0, taps.len() as isize) as usize;
            let mut acc = 0.0;
            for k in skip..end {
                acc += samples[(start + k as isize) as usize] * taps[k];
            }
            acc
        })
        .collect()
}

/// Converts `buf` to `target_rate`. Identity when rates already match.
pub fn resample(buf: &AudioBuffer, target_rate: u32) -> AudioBuffer {
    if buf.sample_rate == target_rate {
        return buf.clone();
    }
    let step = buf.sample_rate as f64 / target_rate as f64;
    let out_len = (buf.len() as f64 / step).round() as usize;
    let g = gcd(buf.sample_rate as u64, target_rate as u64);
    let (m, l) = (buf.sample_rate as u64 / g, target_rate as u64 / g);
    let samples = if l <= MAX_PHASES {
        resample_polyphase(&buf.samples, m as usize, l as usize, out_len)
    } else {
        resample_with_step(&buf.samples, step, out_len)
    };
    AudioBuffer {
        samples,
        sample_rate: target_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;

    #[test]
    fn polyphase_matches_direct_evaluation() {
        let x: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        for (m, l) in [(441usize, 160usize), (1, 2), (3, 2)] {
            let out_len = x.len() * l / m;
            let a = resample_polyphase(&x, m, l, out_len);
            let b = resample_with_step(&x, m as f64 / l as f64, out_len);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-9, "{m}/{l}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn preserves_passband_tone() {
        let buf = AudioBuffer::sine(1000.0, 0.5, 1.0, 44100);
        let out = resample(&buf, 16000);
        assert_eq!(out.len(), 16000);
        let mid = out.slice(2000, 12000);
        let expected = 0.5 / 2f64.sqrt();
        assert!((rms(&mid) - expected).abs() / expected < 1e-3, "{}", rms(&mid));
    }

    #[test]
    fn rejects_aliasing_tone() {
        // 12 kHz cannot be represented at 16 kHz and must be suppressed by >= 60 dB.
        let buf = AudioBuffer::sine(12000.0, 0.5, 1.0, 44100);
        let out = resample(&buf, 16000);
        let mid = out.slice(2000, 12000);
        let atten = 20.0 * (rms(&mid) / (0.5 / 2f64.sqrt())).log10();
        assert!(atten < -60.0, "attenuation {atten} dB");
    }

    #[test]
    fn identity_rate() {
        let buf = AudioBuffer::sine(440.0, 0.3, 0.1, 16000);
        assert_eq!(resample(&buf, 16000), buf);
    }
}
