//! Ornstein-Uhlenbeck noising process dX = -1/2 X dt + sqrt(C) dW.
//!
//! The transition kernel is Gaussian: X_t | X_0 = x0 ~ N(e^{-t/2} x0,
//! (1 - e^{-t}) C), so exact samples come straight from the
//! Karhunen-Loeve sampler.

use rand::Rng;

use crate::covariance::CovOperator;
use crate::error::{Error, Result};
use crate::function_space::GridFunction;
use crate::measure::GaussianMeasure;

/// Default horizon; e^{-T} < 5e-5 leaves the forward process effectively
/// stationary at T.
pub const DEFAULT_HORIZON: f64 = 10.0;
/// Default clamp keeping 1/sqrt(1 - e^{-t}) bounded near t = 0.
pub const DEFAULT_T_MIN: f64 = 1e-3;

/// One noising draw: x_t = e^{-t/2} x0 + sqrt(1 - e^{-t}) xi with
/// xi ~ N(0, C). The noise realization is kept so both training losses can
/// reuse identical randomness.
#[derive(Debug, Clone)]
pub struct NoisingPair {
    pub t: f64,
    pub x0: GridFunction,
    pub xt: GridFunction,
    pub xi: GridFunction,
}

impl NoisingPair {
    pub fn new(t: f64, x0: GridFunction, xt: GridFunction, xi: GridFunction) -> Result<Self> {
        let decay = (-t / 2.0).exp();
        let spread = (1.0 - (-t).exp()).sqrt();
        let recon = x0.scale(decay).axpy(spread, &xi);
        let err = recon.sub(&xt).l2_norm();
        if err > 1e-10 * (1.0 + xt.l2_norm()) {
            return Err(Error::InvalidArgument(format!(
                "noising pair violates its defining identity by {err}"
            )));
        }
        Ok(Self { t, x0, xt, xi })
    }
}

/// Exact draw from the OU transition kernel started at `x0`.
pub fn transition_sample(
    x0: &GridFunction,
    t: f64,
    c: &CovOperator,
    rng: &mut impl Rng,
) -> Result<NoisingPair> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    c.check_grid(x0)?;
    let xi = c.sample(None, rng);
    let decay = (-t / 2.0).exp();
    let spread = (1.0 - (-t).exp()).sqrt();
    let xt = x0.scale(decay).axpy(spread, &xi);
    Ok(NoisingPair {
        t,
        x0: x0.clone(),
        xt,
        xi,
    })
}

/// Exact marginal law of X_t when X_0 ~ N(m0, S0): mean e^{-t/2} m0 and
/// covariance e^{-t} S0 + (1 - e^{-t}) C.
pub fn marginal_gaussian(
    m0: &GridFunction,
    s0: &CovOperator,
    t: f64,
    c: &CovOperator,
) -> Result<GaussianMeasure> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    if s0.dim() != c.dim() {
        return Err(Error::GridMismatch(s0.dim(), c.dim()));
    }
    s0.check_grid(m0)?;
    let decay = (-t).exp();
    let mean = m0.scale((-t / 2.0).exp());
    let cov = if s0.shares_basis(c) {
        let eigenvalues: Vec<f64> = s0
            .eigenvalues()
            .iter()
            .zip(c.eigenvalues())
            .map(|(a, b)| decay * a + (1.0 - decay) * b)
            .collect();
        CovOperator::with_spectrum_like(s0, eigenvalues)?
    } else {
        let m = s0.operator_matrix() * decay + c.operator_matrix() * (1.0 - decay);
        CovOperator::from_operator_matrix(c.grid().clone(), m, crate::covariance::CovKind::Custom)?
    };
    GaussianMeasure::new(mean, cov)
}
