use super::AudioBuffer;
use crate::error::{Error, Result};

/// Gain that puts a foreground at `snr_db` above a background, both
/// measured as RMS.
pub fn gain_for_snr(fg_rms: f64, bg_rms: f64, snr_db: f64) -> Result<f64> {
    if !(fg_rms > 0.0) || !(bg_rms > 0.0) {
        return Err(Error::DegenerateSignal(format!(
            "non-positive rms (foreground {fg_rms}, background {bg_rms})"
        )));
    }
    Ok(bg_rms / fg_rms * 10f64.powf(snr_db / 20.0))
}

/// Sample offset of an onset in seconds.
pub fn onset_to_offset(onset_s: f64, sample_rate: u32) -> usize {
    (onset_s * sample_rate as f64).round() as usize
}

/// Adds `gain * event` into `base` starting at `onset_s`.
pub fn mix(base: &AudioBuffer, event: &AudioBuffer, onset_s: f64, gain: f64) -> Result<AudioBuffer> {
    let mut out = base.clone();
    mix_into(&mut out, event, onset_s, gain)?;
    Ok(out)
}

pub fn mix_into(base: &mut AudioBuffer, event: &AudioBuffer, onset_s: f64, gain: f64) -> Result<()> {
    if base.sample_rate != event.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: base.sample_rate,
            right: event.sample_rate,
        });
    }
    if !(onset_s >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative onset {onset_s}")));
    }
    let offset = onset_to_offset(onset_s, base.sample_rate);
    if offset + event.len() > base.len() {
        return Err(Error::PlacementOverflow {
            offset,
            event_len: event.len(),
            base_len: base.len(),
        });
    }
    for (dst, src) in base.samples[offset..].iter_mut().zip(&event.samples) {
        *dst += gain * src;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;
    use proptest::prelude::*;

    #[test]
    fn gain_examples() {
        assert!((gain_for_snr(0.1, 0.1, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((gain_for_snr(0.1, 0.1, 20.0).unwrap() - 10.0).abs() < 1e-12);
        let db = 20.0 * 2f64.log10();
        assert!((gain_for_snr(0.2, 0.1, db).unwrap() - 1.0).abs() < 1e-12);
        assert!(gain_for_snr(0.0, 0.1, 0.0).is_err());
        assert!(gain_for_snr(0.1, -1.0, 0.0).is_err());
    }

    #[test]
    fn mix_examples() {
        let base = AudioBuffer::sine(100.0, 0.2, 1.0, 8000);
        let ev = AudioBuffer::sine(300.0, 0.4, 0.25, 8000);
        assert_eq!(mix(&base, &ev, 0.3, 0.0).unwrap(), base);

        let zeros = AudioBuffer::zeros(8000, 8000);
        let out = mix(&zeros, &ev, 0.0, 1.0).unwrap();
        assert_eq!(&out.samples[..ev.len()], &ev.samples[..]);
        assert!(out.samples[ev.len()..].iter().all(|&x| x == 0.0));

        assert!(matches!(mix(&base, &ev, 0.9, 1.0), Err(Error::PlacementOverflow { .. })));
        let other = AudioBuffer::zeros(10, 16000);
        assert!(matches!(mix(&base, &other, 0.0, 1.0), Err(Error::SampleRateMismatch { .. })));
    }

    #[test]
    fn mix_then_subtract_recovers_base() {
        let base = AudioBuffer::zeros(8000, 8000);
        let ev = AudioBuffer::sine(300.0, 0.4, 0.25, 8000);
        let mixed = mix(&base, &ev, 0.5, 0.7).unwrap();
        let back = mix(&mixed, &ev, 0.5, -0.7).unwrap();
        assert_eq!(back, base);
    }

    proptest! {
        #[test]
        fn gain_is_exact(fg in 1e-4f64..1.0, bg in 1e-4f64..1.0, snr in -10.0f64..30.0, seed in any::<u64>()) {
            // scale a fixed waveform to rms `fg`, then check the achieved ratio
            let mut s = seed;
            let wave: Vec<f64> = (0..512).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            }).collect();
            let w = AudioBuffer::new(wave, 8000).unwrap();
            let x = w.scaled(fg / rms(&w));
            let g = gain_for_snr(rms(&x), bg, snr).unwrap();
            let ratio = rms(&x.scaled(g)) / bg;
            let target = 10f64.powf(snr / 20.0);
            prop_assert!((ratio - target).abs() / target < 1e-6);
        }

        #[test]
        fn mixing_order_is_irrelevant(o1 in 0.0f64..0.5, o2 in 0.0f64..0.5, g1 in -2.0f64..2.0, g2 in -2.0f64..2.0) {
            let base = AudioBuffer::zeros(8000, 8000);
            let a = AudioBuffer::sine(300.0, 0.4, 0.25, 8000);
            let b = AudioBuffer::sine(700.0, 0.3, 0.4, 8000);
            let ab = mix(&mix(&base, &a, o1, g1).unwrap(), &b, o2, g2).unwrap();
            let ba = mix(&mix(&base, &b, o2, g2).unwrap(), &a, o1, g1).unwrap();
            // exact under a zero base: each sample receives the same two addends
            prop_assert_eq!(ab, ba);
        }
    }
}
