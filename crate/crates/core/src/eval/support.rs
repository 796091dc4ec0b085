use rand::seq::index::sample;

use crate::embeddings::ClipMeta;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::criteria::SupportCriteria;

/// Indices of clips that may serve as supports for `class`.
pub fn conforming_clips(meta: &[ClipMeta], class: &str, criteria: &SupportCriteria) -> Vec<usize> {
    meta.iter()
        .enumerate()
        .filter(|(_, m)| criteria.conforms(m, class))
        .map(|(i, _)| i)
        .collect()
}

/// Uniform sample of `criteria.n` conforming clips, without replacement.
pub fn sample_support(meta: &[ClipMeta], class: &str, criteria: &SupportCriteria, rng: &mut Rng) -> Result<Vec<usize>> {
    let pool = conforming_clips(meta, class, criteria);
    if pool.len() < criteria.n || criteria.n == 0 {
        return Err(Error::InsufficientSupport {
            class: class.to_string(),
            criteria: criteria.to_string(),
            needed: criteria.n,
            available: pool.len(),
        });
    }
    Ok(sample(rng, pool.len(), criteria.n)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{PolyphonyMode, SnrFilter};
    use crate::rng::rng_from_seed;

    fn meta(labels: &[&str], snr: f64) -> ClipMeta {
        ClipMeta {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            polyphony: labels.len(),
            event_snrs: labels.iter().map(|s| (s.to_string(), snr)).collect(),
        }
    }

    fn fixture() -> Vec<ClipMeta> {
        let mut v = Vec::new();
        for (i, snr) in [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0].iter().enumerate() {
            v.push(meta(&["a"], *snr));
            v.push(meta(&["a", "b"], *snr));
            if i % 2 == 0 {
                v.push(meta(&["b"], *snr));
            }
        }
        v
    }

    #[test]
    fn monophonic_supports_are_single_label() {
        let m = fixture();
        let c = SupportCriteria::new(4, PolyphonyMode::Mono, SnrFilter::Mixed);
        let idx = sample_support(&m, "a", &c, &mut rng_from_seed(1)).unwrap();
        assert_eq!(idx.len(), 4);
        assert!(idx.iter().all(|&i| m[i].labels == vec!["a"]));
    }

    #[test]
    fn low_snr_supports() {
        let m = fixture();
        let c = SupportCriteria::new(3, PolyphonyMode::Poly, SnrFilter::Low);
        let idx = sample_support(&m, "a", &c, &mut rng_from_seed(2)).unwrap();
        assert!(idx.iter().all(|&i| m[i].event_snrs["a"] <= 5.0));
    }

    #[test]
    fn exact_pool_is_returned_whole() {
        let m = fixture();
        let c = SupportCriteria::new(6, PolyphonyMode::Mono, SnrFilter::Mixed);
        let mut idx = sample_support(&m, "a", &c, &mut rng_from_seed(3)).unwrap();
        idx.sort();
        assert_eq!(idx, conforming_clips(&m, "a", &c));
    }

    #[test]
    fn insufficient_names_class_and_criteria() {
        let m = fixture();
        let c = SupportCriteria::new(7, PolyphonyMode::Mono, SnrFilter::Mixed);
        let err = sample_support(&m, "a", &c, &mut rng_from_seed(4)).unwrap_err().to_string();
        assert!(err.contains("\"a\"") && err.contains("poly=mono"), "{err}");
    }
}
