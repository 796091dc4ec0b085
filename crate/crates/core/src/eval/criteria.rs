use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embeddings::ClipMeta;
use crate::error::Error;

pub const LOW_SNR_DB: [f64; 3] = [-5.0, 0.0, 5.0];
pub const HIGH_SNR_DB: [f64; 3] = [10.0, 15.0, 20.0];
pub const SUPPORT_SIZES: [usize; 4] = [5, 10, 20, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyphonyMode {
    /// Only clips whose label set is exactly the target class.
    #[serde(alias = "monophonic")]
    Mono,
    /// Any clip containing the target class.
    #[serde(alias = "polyphonic")]
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrFilter {
    Low,
    High,
    /// No SNR constraint.
    Mixed,
}

/// Constraints a support clip must satisfy for its target class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportCriteria {
    pub n: usize,
    pub polyphony: PolyphonyMode,
    pub snr: SnrFilter,
}

impl Default for SupportCriteria {
    fn default() -> Self {
        Self {
            n: 5,
            polyphony: PolyphonyMode::Mono,
            snr: SnrFilter::Mixed,
        }
    }
}

fn in_set(v: f64, set: &[f64]) -> bool {
    set.iter().any(|s| (s - v).abs() < 1e-9)
}

impl SupportCriteria {
    pub fn new(n: usize, polyphony: PolyphonyMode, snr: SnrFilter) -> Self {
        Self { n, polyphony, snr }
    }

    pub fn conforms(&self, meta: &ClipMeta, class: &str) -> bool {
        if !meta.has_label(class) {
            return false;
        }
        if self.polyphony == PolyphonyMode::Mono && meta.labels.len() != 1 {
            return false;
        }
        let snr = meta.event_snrs.get(class).copied();
        match self.snr {
            SnrFilter::Mixed => true,
            SnrFilter::Low => snr.is_some_and(|v| in_set(v, &LOW_SNR_DB)),
            SnrFilter::High => snr.is_some_and(|v| in_set(v, &HIGH_SNR_DB)),
        }
    }
}

impl fmt::Display for PolyphonyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolyphonyMode::Mono => "mono",
            PolyphonyMode::Poly => "poly",
        })
    }
}

impl fmt::Display for SnrFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnrFilter::Low => "low",
            SnrFilter::High => "high",
            SnrFilter::Mixed => "mixed",
        })
    }
}

impl fmt::Display for SupportCriteria {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} poly={} snr={}", self.n, self.polyphony, self.snr)
    }
}

impl FromStr for PolyphonyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "mono" | "monophonic" => Ok(Self::Mono),
            "poly" | "polyphonic" => Ok(Self::Poly),
            _ => Err(Error::InvalidArgument(format!("unknown polyphony mode {s:?}"))),
        }
    }
}

impl FromStr for SnrFilter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "low" => Ok(Self::Low),
            "high" => Ok(Self::High),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::InvalidArgument(format!("unknown snr mode {s:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(labels: &[&str], snr: f64) -> ClipMeta {
        ClipMeta {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            polyphony: labels.len(),
            event_snrs: labels.iter().map(|s| (s.to_string(), snr)).collect(),
        }
    }

    #[test]
    fn filters() {
        let mono_low = SupportCriteria::new(5, PolyphonyMode::Mono, SnrFilter::Low);
        assert!(mono_low.conforms(&meta(&["a"], 0.0), "a"));
        assert!(!mono_low.conforms(&meta(&["a"], 10.0), "a"));
        assert!(!mono_low.conforms(&meta(&["a", "b"], 0.0), "a"));
        assert!(!mono_low.conforms(&meta(&["b"], 0.0), "a"));
        let poly_high = SupportCriteria::new(5, PolyphonyMode::Poly, SnrFilter::High);
        assert!(poly_high.conforms(&meta(&["a", "b"], 15.0), "a"));
        assert!(poly_high.conforms(&meta(&["a"], 20.0), "a"));
        assert!(!poly_high.conforms(&meta(&["a"], 5.0), "a"));
    }

    #[test]
    fn parsing() {
        assert_eq!("monophonic".parse::<PolyphonyMode>().unwrap(), PolyphonyMode::Mono);
        assert_eq!("mixed".parse::<SnrFilter>().unwrap(), SnrFilter::Mixed);
        assert!("loud".parse::<SnrFilter>().is_err());
    }
}
