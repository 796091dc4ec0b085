use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

use super::linalg::{dot, sigmoid, softplus, Matrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LrConfig {
    /// Negatives sampled from base training data.
    pub n_negatives: usize,
    pub l2: f64,
    pub max_iter: usize,
    /// Stop once the largest gradient component falls below this.
    pub tol: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            n_negatives: 1000,
            l2: 1.0,
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LrModel {
    Linear { w: Vec<f64>, b: f64 },
    /// Constant probability, used when the features carry no signal.
    Prior { p: f64 },
}

impl LrModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            LrModel::Linear { w, b } => sigmoid(dot(w, x) + b),
            LrModel::Prior { p } => *p,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LrFit {
    pub model: LrModel,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

/// Per-sample weights `(positive, negative)` that make both classes carry
/// equal total weight: `n_total / (2 * n_class)`.
pub fn balanced_weights(n_pos: usize, n_neg: usize) -> (f64, f64) {
    let total = (n_pos + n_neg) as f64;
    (total / (2.0 * n_pos as f64), total / (2.0 * n_neg as f64))
}

/// `0.5 * l2 * |w|^2 + sum_i s_i * logloss_i`; the intercept is not penalized.
pub fn lr_objective(w: &[f64], b: f64, x: &[&[f64]], y: &[bool], sw: &[f64], l2: f64) -> f64 {
    let reg = 0.5 * l2 * dot(w, w);
    let data: f64 = x
        .iter()
        .zip(y)
        .zip(sw)
        .map(|((xi, &yi), s)| {
            let m = dot(w, xi) + b;
            s * if yi { softplus(-m) } else { softplus(m) }
        })
        .sum();
    reg + data
}

/// Class-balanced L2 logistic regression solved by damped Newton steps.
pub fn fit_logistic(x: &[&[f64]], y: &[bool], cfg: &LrConfig) -> Result<LrFit> {
    let n = x.len();
    let n_pos = y.iter().filter(|&&v| v).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::InvalidArgument("logistic regression needs both classes".into()));
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: r.len(),
        });
    }
    if x.iter().all(|r| r == &x[0]) {
        log::warn!("all logistic-regression features are identical; using prior scorer");
        return Ok(LrFit {
            model: LrModel::Prior {
                p: n_pos as f64 / n as f64,
            },
            iterations: 0,
            converged: true,
            objective: f64::NAN,
        });
    }
    let (wp, wn) = balanced_weights(n_pos, n - n_pos);
    let sw: Vec<f64> = y.iter().map(|&v| if v { wp } else { wn }).collect();
    let design = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i][j] } else { 1.0 });
    let mut theta = DVector::<f64>::zeros(d + 1);
    let objective = |t: &DVector<f64>| lr_objective(&t.as_slice()[..d], t[d], x, y, &sw, cfg.l2);
    let mut obj = objective(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let margins = &design * &theta;
        let p: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
        let resid = DVector::from_fn(n, |i, _| sw[i] * (p[i] - if y[i] { 1.0 } else { 0.0 }));
        let mut grad = design.tr_mul(&resid);
        for j in 0..d {
            grad[j] += cfg.l2 * theta[j];
        }
        if grad.amax() <= cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let scaled = DMatrix::from_fn(n, d + 1, |i, j| design[(i, j)] * (sw[i] * p[i] * (1.0 - p[i])).sqrt());
        let mut hess = scaled.tr_mul(&scaled);
        for j in 0..d {
            hess[(j, j)] += cfg.l2;
        }
        // The intercept has no penalty; a tiny ridge keeps the solve stable
        // when every sample is saturated.
        hess[(d, d)] += 1e-10;
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone() / (hess.diagonal().amax().max(1.0)),
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            let c_obj = objective(&cand);
            if c_obj <= obj - 1e-4 * t * slope || t < 1e-10 {
                theta = cand;
                obj = c_obj;
                break;
            }
            t *= 0.5;
        }
    }
    if !converged {
        log::warn!("logistic regression stopped at max_iter={}", cfg.max_iter);
    }
    Ok(LrFit {
        model: LrModel::Linear {
            w: theta.as_slice()[..d].to_vec(),
            b: theta[d],
        },
        iterations,
        converged,
        objective: obj,
    })
}

/// Fits one novel-class scorer: supports are positives, negatives are drawn
/// uniformly without replacement from `negative_pool`.
pub fn lr_fit(positives: &[Vec<f64>], negative_pool: &Matrix, cfg: &LrConfig, rng: &mut Rng) -> Result<LrModel> {
    if positives.is_empty() {
        return Err(Error::InvalidArgument("logistic regression needs a positive".into()));
    }
    if cfg.n_negatives == 0 || negative_pool.rows == 0 {
        return Err(Error::InvalidArgument("logistic regression needs negatives".into()));
    }
    let x_n = cfg.n_negatives.min(negative_pool.rows);
    let mut x: Vec<&[f64]> = positives.iter().map(Vec::as_slice).collect();
    let mut neg: Vec<usize> = sample(rng, negative_pool.rows, x_n).into_vec();
    neg.sort_unstable();
    x.extend(neg.iter().map(|&i| negative_pool.row(i)));
    let y: Vec<bool> = (0..x.len()).map(|i| i < positives.len()).collect();
    Ok(fit_logistic(&x, &y, cfg)?.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn symmetric_one_dim_boundary_at_zero() {
        let a = [1.0];
        let b = [-1.0];
        let x: Vec<&[f64]> = vec![&a, &b];
        let fit = fit_logistic(&x, &[true, false], &LrConfig::default()).unwrap();
        assert!(fit.converged);
        let LrModel::Linear { w, b } = &fit.model else {
            panic!("expected linear model")
        };
        assert!(b.abs() < 1e-8 && w[0] > 0.0);
        assert!(fit.model.predict(&a) > 0.5 && fit.model.predict(&[-1.0]) < 0.5);
    }

    #[test]
    fn balanced_formula() {
        let (p, n) = balanced_weights(5, 5000);
        assert_eq!(p, 5005.0 / 10.0);
        assert_eq!(n, 5005.0 / 10000.0);
        assert!((p / n - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn identical_features_give_prior() {
        let a = [0.5, 0.5];
        let x: Vec<&[f64]> = vec![&a, &a, &a, &a];
        let fit = fit_logistic(&x, &[true, false, false, false], &LrConfig::default()).unwrap();
        assert_eq!(fit.model, LrModel::Prior { p: 0.25 });
    }

    #[test]
    fn training_positive_scores_high() {
        let mut rng = rng_from_seed(3);
        let pool = Matrix::from_rows(
            &(0..200)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    vec![t.cos(), t.sin(), -1.0]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let pos = vec![vec![0.2, 0.1, 1.0], vec![0.0, -0.1, 0.9]];
        let m = lr_fit(&pos, &pool, &LrConfig { n_negatives: 50, ..Default::default() }, &mut rng).unwrap();
        assert!(pos.iter().all(|p| m.predict(p) > 0.5));
    }
}
