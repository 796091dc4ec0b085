use crate::error::{Error, Result};

/// Mono audio at a fixed sample rate. Samples are nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    /// Sine of `freq` Hz with amplitude `amp`.
    pub fn sine(freq: f64, amp: f64, duration_s: f64, sample_rate: u32) -> Self {
        let n = (duration_s * sample_rate as f64).round() as usize;
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate as f64;
        Self {
            samples: (0..n).map(|i| amp * (w * i as f64).sin()).collect(),
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| x * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Sub-range of samples, clamped to the buffer.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let start = start.min(self.len());
        let end = (start + len).min(self.len());
        Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Root mean square; zero for an empty buffer.
pub fn rms(buf: &AudioBuffer) -> f64 {
    rms_of(&buf.samples)
}

pub(crate) fn rms_of(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64).sqrt()
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn amplitude_to_db(amp: f64) -> f64 {
    20.0 * amp.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        assert_eq!(rms(&AudioBuffer::new(vec![0.5; 100], 16000).unwrap()), 0.5);
        assert_eq!(rms(&AudioBuffer::zeros(100, 16000)), 0.0);
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(rms(&AudioBuffer::new(alt, 16000).unwrap()), 1.0);
        assert_eq!(rms(&AudioBuffer::zeros(0, 16000)), 0.0);
    }

    #[test]
    fn rejects_invalid_buffers() {
        assert!(AudioBuffer::new(vec![0.0, f64::NAN], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
    }
}
