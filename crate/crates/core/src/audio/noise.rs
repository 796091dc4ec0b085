use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{rms, AudioBuffer};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Brownian (red) noise: integrated white noise with the mean removed, scaled
/// to `target_rms`.
pub fn brownian_noise(duration_s: f64, sample_rate: u32, target_rms: f64, rng: &mut Rng) -> Result<AudioBuffer> {
    if !(duration_s > 0.0) || !(target_rms > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "brownian noise needs positive duration and rms, got {duration_s} s / {target_rms}"
        )));
    }
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut acc = 0.0;
    let mut samples: Vec<f64> = (0..n)
        .map(|_| {
            acc += rng.sample::<f64, _>(StandardNormal);
            acc
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    samples.iter_mut().for_each(|x| *x -= mean);
    let mut buf = AudioBuffer::new(samples, sample_rate)?;
    let current = rms(&buf);
    if current == 0.0 {
        return Err(Error::DegenerateSignal("brownian noise collapsed to zero".into()));
    }
    let g = target_rms / current;
    buf.samples.iter_mut().for_each(|x| *x *= g);
    Ok(buf)
}
