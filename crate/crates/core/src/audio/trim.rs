use super::AudioBuffer;
use crate::error::{Error, Result};

const FIXED_POINT: f64 = (1u64 << 40) as f64;

/// Removes leading and trailing silence.
///
/// A window of `min_dur_s` is active when its RMS reaches `threshold_frac`
/// of full scale. The output is the smallest span covering every active
/// window, so trimming twice gives the same result as trimming once. Window
/// energies are summed in fixed point to keep that property exact.
pub fn trim_silence(buf: &AudioBuffer, threshold_frac: f64, min_dur_s: f64) -> Result<AudioBuffer> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold_frac must be in (0, 1), got {threshold_frac}"
        )));
    }
    if !(min_dur_s > 0.0) {
        return Err(Error::InvalidArgument(format!("min_dur_s must be positive, got {min_dur_s}")));
    }
    let len = buf.len();
    if len == 0 {
        return Ok(buf.clone());
    }
    let w = ((min_dur_s * buf.sample_rate as f64).round() as usize).max(1).min(len);

    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0u128);
    let mut acc = 0u128;
    for &x in &buf.samples {
        acc += (x * x * FIXED_POINT).round() as u128;
        prefix.push(acc);
    }
    let threshold = (threshold_frac * threshold_frac * w as f64 * FIXED_POINT).ceil() as u128;
    let active = |i: usize| prefix[i + w] - prefix[i] >= threshold;

    let Some(first) = (0..=len - w).find(|&i| active(i)) else {
        return Ok(AudioBuffer::zeros(0, buf.sample_rate));
    };
    let last = (first..=len - w).rev().find(|&i| active(i)).unwrap_or(first);
    Ok(buf.slice(first, last + w - first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trims_padded_sine_within_one_window() {
        let sr = 16000;
        let mut samples = vec![0.0; sr as usize / 2];
        samples.extend(AudioBuffer::sine(440.0, 0.5, 1.0, sr).samples);
        samples.extend(vec![0.0; sr as usize / 2]);
        let buf = AudioBuffer::new(samples, sr).unwrap();
        let out = trim_silence(&buf, 0.001, 0.01).unwrap();
        assert!((out.duration_s() - 1.0).abs() <= 0.02 + 1e-9);
        // output is a contiguous slice; align it by the first nonzero sample
        let first_nz = |s: &[f64]| s.iter().position(|&x| x != 0.0).unwrap();
        let lead = first_nz(&buf.samples) - first_nz(&out.samples);
        let start_err = (lead as f64 / sr as f64 - 0.5).abs();
        let end_err = ((lead + out.len()) as f64 / sr as f64 - 1.5).abs();
        assert!(start_err <= 0.01, "start error {start_err}");
        assert!(end_err <= 0.01, "end error {end_err}");
    }

    #[test]
    fn loud_buffer_is_unchanged() {
        let buf = AudioBuffer::new(vec![0.5; 4000], 16000).unwrap();
        assert_eq!(trim_silence(&buf, 0.001, 0.01).unwrap(), buf);
    }

    #[test]
    fn silent_buffer_becomes_empty() {
        let buf = AudioBuffer::zeros(16000, 16000);
        assert!(trim_silence(&buf, 0.001, 0.01).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let buf = AudioBuffer::zeros(10, 16000);
        assert!(trim_silence(&buf, 0.0, 0.01).is_err());
        assert!(trim_silence(&buf, 0.001, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn idempotent(lead in 0usize..3000, body in 1usize..3000, tail in 0usize..3000,
                      amp in 0.0001f64..0.9, seed in any::<u64>()) {
            let mut s = vec![0.0; lead];
            let mut state = seed;
            for _ in 0..body {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                s.push(amp * ((state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0));
            }
            s.extend(vec![0.0; tail]);
            let buf = AudioBuffer::new(s, 16000).unwrap();
            let once = trim_silence(&buf, 0.001, 0.01).unwrap();
            let twice = trim_silence(&once, 0.001, 0.01).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
