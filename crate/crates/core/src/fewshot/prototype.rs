use crate::error::{Error, Result};

use super::linalg::normalized;

/// Mean of the L2-normalized support embeddings.
pub fn prototype_weight(supports: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = supports
        .first()
        .ok_or_else(|| Error::InvalidArgument("prototype needs at least one support".into()))?;
    let dim = first.len();
    let mut w = vec![0.0; dim];
    for z in supports {
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
        for (o, v) in w.iter_mut().zip(normalized(z)?) {
            *o += v;
        }
    }
    let n = supports.len() as f64;
    w.iter_mut().for_each(|v| *v /= n);
    Ok(w)
}
