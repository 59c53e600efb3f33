//! Gaussian and Gaussian-mixture measures on the discretized function space.

use rand::Rng;

use crate::covariance::CovOperator;
use crate::error::{Error, Result};
use crate::function_space::GridFunction;

/// Gaussian measure N(mean, cov).
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    mean: GridFunction,
    cov: CovOperator,
}

impl GaussianMeasure {
    pub fn new(mean: GridFunction, cov: CovOperator) -> Result<Self> {
        cov.check_grid(&mean)?;
        Ok(Self { mean, cov })
    }

    pub fn centered(cov: CovOperator) -> Self {
        let mean = GridFunction::zero(cov.grid().clone());
        Self { mean, cov }
    }

    pub fn mean(&self) -> &GridFunction {
        &self.mean
    }

    pub fn cov(&self) -> &CovOperator {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> GridFunction {
        self.cov.sample(Some(&self.mean), rng)
    }

    /// Fit mean and covariance to samples (empirical covariance plus
    /// `eps * Id`).
    pub fn fit(samples: &[GridFunction], eps: f64) -> Result<Self> {
        let cov = CovOperator::empirical(samples, eps)?;
        let d = cov.dim();
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.values()) {
                *m += v / samples.len() as f64;
            }
        }
        let mean = GridFunction::new(cov.grid().clone(), mean)?;
        Ok(Self { mean, cov })
    }

    /// Log density at `x` with respect to Lebesgue measure on the grid
    /// coordinates, evaluated over the retained spectrum. Returns -inf when
    /// `x` has significant mass outside the retained span.
    pub fn log_density(&self, x: &GridFunction) -> Result<f64> {
        self.cov.check_grid(x)?;
        let rank = self.cov.retained_rank();
        if rank == 0 {
            return Err(Error::SingularOperator(
                "log density of a zero-covariance measure".into(),
            ));
        }
        let r = x.sub(&self.mean);
        let coeffs = self.cov.coefficients(&r);
        let eigs = self.cov.eigenvalues();
        let d = self.cov.dim() as f64;
        let scale = r.l2_norm() + 1.0;
        let mut acc = 0.0;
        for i in 0..self.cov.dim() {
            if i < rank {
                // Euclidean-coordinate covariance eigenvalue is D * c_i.
                acc += -0.5 * (coeffs[i] * coeffs[i] / eigs[i]
                    + (2.0 * std::f64::consts::PI * d * eigs[i]).ln());
            } else if coeffs[i].abs() > 1e-8 * scale {
                return Ok(f64::NEG_INFINITY);
            }
        }
        Ok(acc)
    }
}

/// Finite mixture of Gaussian measures with normalized weights.
#[derive(Debug, Clone)]
pub struct MixtureMeasure {
    weights: Vec<f64>,
    components: Vec<GaussianMeasure>,
}

impl MixtureMeasure {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianMeasure>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidArgument(
                "mixture needs one positive weight per component".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::GridMismatch(d, 0));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianMeasure] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> GridFunction {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, comp) in self.weights.iter().zip(&self.components) {
            acc += w;
            if u <= acc {
                return comp.sample(rng);
            }
        }
        self.components.last().expect("nonempty mixture").sample(rng)
    }

    pub fn log_density(&self, x: &GridFunction) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.weights.len());
        for (w, comp) in self.weights.iter().zip(&self.components) {
            terms.push(w.ln() + comp.log_density(x)?);
        }
        Ok(log_sum_exp(&terms))
    }
}

/// log(sum exp(x_i)) with the usual max shift; -inf inputs are handled.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
