//! Per-stixel occurrence learners.

use serde::{Deserialize, Serialize};

use super::ModelError;

/// One training row: covariates and the presence label.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub env: &'a [f64],
    pub present: bool,
}

/// A base learner trained independently inside each stixel.
///
/// `train` must be a pure function of its arguments; the pipeline relies on
/// that to make retries and reordering invisible in the output.
pub trait Learner: Send + Sync {
    fn train(&self, samples: &[TrainingSample<'_>], seed: u64) -> Result<Vec<f64>, ModelError>;

    fn predict_probability(&self, weights: &[f64], env: &[f64]) -> f64;
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-regularised logistic regression fit by full-batch gradient descent
/// from a zero start. Weights are `[bias, w_0, .., w_{D-1}]`; the bias is not
/// penalised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticGd {
    pub iterations: usize,
    pub step: f64,
    pub l2: f64,
}

impl Default for LogisticGd {
    fn default() -> Self {
        Self { iterations: 200, step: 0.1, l2: 0.001 }
    }
}

impl LogisticGd {
    fn linear(weights: &[f64], env: &[f64]) -> f64 {
        weights[0] + weights[1..].iter().zip(env).map(|(w, x)| w * x).sum::<f64>()
    }
}

impl Learner for LogisticGd {
    /// Deterministic: the seed is ignored because full-batch descent from
    /// zero has no random component.
    fn train(&self, samples: &[TrainingSample<'_>], _seed: u64) -> Result<Vec<f64>, ModelError> {
        let Some(first) = samples.first() else {
            return Err(ModelError::EmptyTrainingSet);
        };
        let dim = first.env.len();
        for s in samples {
            if s.env.len() != dim {
                return Err(ModelError::DimensionMismatch { expected: dim, actual: s.env.len() });
            }
            if s.env.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteCovariate);
            }
        }
        let n = samples.len() as f64;
        let mut weights = vec![0.0; dim + 1];
        let mut grad = vec![0.0; dim + 1];
        for _ in 0..self.iterations {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for s in samples {
                let residual = logistic(Self::linear(&weights, s.env)) - if s.present { 1.0 } else { 0.0 };
                grad[0] += residual;
                for (g, x) in grad[1..].iter_mut().zip(s.env) {
                    *g += residual * x;
                }
            }
            weights[0] -= self.step * grad[0] / n;
            for (w, g) in weights[1..].iter_mut().zip(&grad[1..]) {
                *w -= self.step * (g / n + self.l2 * *w);
            }
        }
        Ok(weights)
    }

    fn predict_probability(&self, weights: &[f64], env: &[f64]) -> f64 {
        logistic(Self::linear(weights, env))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples<'a>(xs: &'a [Vec<f64>], ys: &[bool]) -> Vec<TrainingSample<'a>> {
        xs.iter().zip(ys).map(|(x, &y)| TrainingSample { env: x, present: y }).collect()
    }

    #[test]
    fn logistic_is_stable_at_extremes() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(-800.0) < 1e-300);
        assert_eq!(logistic(800.0), 1.0);
    }

    #[test]
    fn rejects_non_finite_covariates() {
        let xs = vec![vec![1.0, f64::INFINITY]];
        let err = LogisticGd::default().train(&samples(&xs, &[true]), 0).unwrap_err();
        assert!(matches!(err, ModelError::NonFiniteCovariate));
    }

    #[test]
    fn rejects_ragged_rows() {
        let xs = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(LogisticGd::default().train(&samples(&xs, &[true, false]), 0).is_err());
    }

    #[test]
    fn balanced_labels_keep_zero_bias() {
        let xs = vec![vec![0.0], vec![0.0]];
        let w = LogisticGd::default().train(&samples(&xs, &[true, false]), 0).unwrap();
        assert_eq!(w, vec![0.0, 0.0]);
    }

    #[test]
    fn seed_has_no_effect() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 10.0 - 1.0]).collect();
        let ys: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
        let l = LogisticGd::default();
        assert_eq!(l.train(&samples(&xs, &ys), 1).unwrap(), l.train(&samples(&xs, &ys), 2).unwrap());
    }
}
