//! Closed-form reverse drifts for tractable targets.
//!
//! Sign convention, fixed once for the whole crate: the absolute drift is
//!
//!   s(t, x) = (1 - e^{-t})^{-1} (e^{-t/2} E[X_0 | X_t = x] - x),
//!
//! the unique sign under which (a) the stationary target N(0, C) gives
//! s = -x, (b) the reverse SDE dY = 1/2 Y dt + s dt + sqrt(C) dW preserves
//! N(0, C), and (c) s equals C grad_H log p_t in finite dimensions. The
//! relative drift is s_nu = s + x, which vanishes at stationarity.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovOperator;
use crate::error::{Error, Result};
use crate::forward_process::{marginal_gaussian, transition_sample};
use crate::function_space::{l2_inner, GridFunction};
use crate::measure::{log_sum_exp, GaussianMeasure, MixtureMeasure};
use crate::rng::stream_rng;
use crate::score_fn::{Parameterization, Provenance, ScoreFn};

/// Largest dimension for which the dense (non-commuting) score route is
/// allowed; beyond this each evaluation would pay an O(D^3) solve.
const DENSE_SCORE_MAX_DIM: usize = 256;

/// Exact drift for the stationary target N(0, C): s(t, x) = -x.
pub fn stationary_score_fn() -> ScoreFn {
    ScoreFn::new(Parameterization::Absolute, Provenance::Oracle, |_t, x| {
        Ok(x.scale(-1.0))
    })
}

/// s(t, x) = -C S_t^{-1} (x - m_t) for the Gaussian target N(m0, S0) noised
/// by C, where m_t = e^{-t/2} m0 and S_t = e^{-t} S0 + (1 - e^{-t}) C.
/// Commuting (shared-basis) pairs use the spectral formula; everything else
/// falls back to a dense solve.
pub fn gaussian_score(
    target: &GaussianMeasure,
    c: &CovOperator,
    t: f64,
    x: &GridFunction,
) -> Result<GridFunction> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "score requires t > 0, got {t}"
        )));
    }
    c.check_grid(x)?;
    if target.dim() != c.dim() {
        return Err(Error::GridMismatch(target.dim(), c.dim()));
    }
    let decay = (-t).exp();
    let residual = x.sub(&target.mean().scale((-t / 2.0).exp()));

    if target.cov().shares_basis(c) {
        let coeffs = c.coefficients(&residual);
        let s0 = target.cov().eigenvalues();
        let cc = c.eigenvalues();
        let s_max = (0..c.dim())
            .map(|i| decay * s0[i] + (1.0 - decay) * cc[i])
            .fold(0.0f64, f64::max);
        let cutoff = s_max * c.rank_tol();
        let scale = residual.l2_norm();
        let mut out = Vec::with_capacity(c.dim());
        for i in 0..c.dim() {
            let st = decay * s0[i] + (1.0 - decay) * cc[i];
            if st > cutoff {
                out.push(-cc[i] / st * coeffs[i]);
            } else if coeffs[i].abs() > 1e-6 * (scale + 1.0) {
                return Err(Error::SingularOperator(format!(
                    "marginal covariance singular along mode {i} but x has mass there"
                )));
            } else {
                out.push(0.0);
            }
        }
        Ok(c.from_coefficients(&out))
    } else {
        if c.dim() > DENSE_SCORE_MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dense score route limited to D <= {DENSE_SCORE_MAX_DIM}; \
                 use commuting operators at D = {}",
                c.dim()
            )));
        }
        let s_mat =
            target.cov().operator_matrix() * decay + c.operator_matrix() * (1.0 - decay);
        let r = DVector::from_column_slice(residual.values());
        let z = s_mat
            .lu()
            .solve(&r)
            .ok_or_else(|| Error::SingularOperator("marginal covariance not invertible".into()))?;
        let out = -(c.operator_matrix() * z);
        GridFunction::new(x.grid().clone(), out.data.into())
    }
}

/// Posterior-weighted mixture score via log-space responsibilities.
pub fn mixture_score(
    target: &MixtureMeasure,
    c: &CovOperator,
    t: f64,
    x: &GridFunction,
) -> Result<GridFunction> {
    let mut log_resp = Vec::with_capacity(target.components().len());
    for (w, comp) in target.weights().iter().zip(target.components()) {
        let marg = marginal_gaussian(comp.mean(), comp.cov(), t, c)?;
        log_resp.push(w.ln() + marg.log_density(x)?);
    }
    let norm = log_sum_exp(&log_resp);
    if !norm.is_finite() {
        return Err(Error::Numerical(
            "all mixture responsibilities underflowed".into(),
        ));
    }
    let mut out = GridFunction::zero(x.grid().clone());
    for (lr, comp) in log_resp.iter().zip(target.components()) {
        let w = (lr - norm).exp();
        if w > 0.0 {
            let s_k = gaussian_score(comp, c, t, x)?;
            out = out.axpy(w, &s_k);
        }
    }
    if !out.is_finite() {
        return Err(Error::Numerical("mixture score produced non-finite values".into()));
    }
    Ok(out)
}

/// Oracle target: Gaussian or Gaussian mixture.
#[derive(Debug, Clone)]
pub enum OracleTarget {
    Gaussian(GaussianMeasure),
    Mixture(MixtureMeasure),
}

impl OracleTarget {
    pub fn sample(&self, rng: &mut impl Rng) -> GridFunction {
        match self {
            OracleTarget::Gaussian(g) => g.sample(rng),
            OracleTarget::Mixture(m) => m.sample(rng),
        }
    }

    pub fn score(&self, c: &CovOperator, t: f64, x: &GridFunction) -> Result<GridFunction> {
        match self {
            OracleTarget::Gaussian(g) => gaussian_score(g, c, t, x),
            OracleTarget::Mixture(m) => mixture_score(m, c, t, x),
        }
    }

    /// Absolute-parameterization drift backed by the closed forms.
    pub fn score_fn(&self, c: &CovOperator) -> ScoreFn {
        let target = self.clone();
        let c = c.clone();
        ScoreFn::new(Parameterization::Absolute, Provenance::Oracle, move |t, x| {
            target.score(&c, t, x)
        })
    }
}

/// Conditional-mean estimate E[X_0 | X_t = x] implied by a drift:
/// e^{t/2} (x + (1 - e^{-t}) s(t, x)).
pub fn denoise_mean(s_fn: &ScoreFn, t: f64, x: &GridFunction) -> Result<GridFunction> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "denoise_mean requires t > 0, got {t}"
        )));
    }
    let s = s_fn.to_absolute().evaluate(t, x)?;
    Ok(x.axpy(1.0 - (-t).exp(), &s).scale((t / 2.0).exp()))
}

/// Monte-Carlo check of the reverse-martingale identity
/// s(t, X_t) = e^{(t-s)/2} E[s(s, X_s) | X_t].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviationReport {
    pub s: f64,
    pub t: f64,
    pub n_mc: usize,
    pub deviation: f64,
    pub stderr: f64,
}

const MARTINGALE_EVAL_POINTS: usize = 256;
const MIN_EFFECTIVE_SAMPLES: f64 = 50.0;

/// Estimates E || e^{(t-s)/2} E[s(s, X_s) | X_t] - s(t, X_t) ||^2 with paired
/// forward draws and self-normalized conditional averaging through the exact
/// transition density. The pool is split in two independent halves and the
/// squared norm is taken as a cross product, so the inner Monte-Carlo
/// variance does not bias the deviation upward.
pub fn martingale_check(
    target: &OracleTarget,
    c: &CovOperator,
    s: f64,
    t: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DeviationReport> {
    if s <= 0.0 || t < s {
        return Err(Error::InvalidArgument(format!(
            "need 0 < s <= t, got s = {s}, t = {t}"
        )));
    }
    if s == t {
        return Ok(DeviationReport {
            s,
            t,
            n_mc,
            deviation: 0.0,
            stderr: 0.0,
        });
    }
    let delta = t - s;
    let gap_var = 1.0 - (-delta).exp();
    let half_decay = (-delta / 2.0).exp();
    let rank = c.retained_rank();
    if rank == 0 {
        return Err(Error::SingularOperator("noising operator has empty spectrum".into()));
    }

    // Pool of (X_s, score at s) pairs plus independent evaluation points X_t.
    let draw_xs = |rng: &mut rand_chacha::ChaCha12Rng| -> Result<GridFunction> {
        let x0 = target.sample(rng);
        Ok(transition_sample(&x0, s, c, rng)?.xt)
    };
    let mut pool_xs = Vec::with_capacity(n_mc);
    let mut rng = stream_rng(seed, 0);
    for _ in 0..n_mc {
        pool_xs.push(draw_xs(&mut rng)?);
    }
    let mut rng_eval = stream_rng(seed, 1);
    let mut eval_xt = Vec::with_capacity(MARTINGALE_EVAL_POINTS);
    for _ in 0..MARTINGALE_EVAL_POINTS {
        let xs = draw_xs(&mut rng_eval)?;
        eval_xt.push(transition_sample(&xs, delta, c, &mut rng_eval)?.xt);
    }

    let pool_scores: Vec<GridFunction> = pool_xs
        .par_iter()
        .map(|xs| target.score(c, s, xs))
        .collect::<Result<_>>()?;
    // Retained-span coefficients once per pool/eval point; the transition
    // density only involves these modes.
    let coeff = |f: &GridFunction| -> Vec<f64> {
        c.coefficients(f)[..rank].to_vec()
    };
    let pool_coeffs: Vec<Vec<f64>> = pool_xs.par_iter().map(coeff).collect();
    let eval_coeffs: Vec<Vec<f64>> = eval_xt.par_iter().map(coeff).collect();
    let eigs = &c.eigenvalues()[..rank];

    let terms: Vec<(f64, f64)> = eval_xt
        .par_iter()
        .enumerate()
        .map(|(k, xt)| -> Result<(f64, f64)> {
            let vt = &eval_coeffs[k];
            let mut log_w = vec![0.0f64; pool_xs.len()];
            for (j, xs_c) in pool_coeffs.iter().enumerate() {
                let mut q = 0.0;
                for i in 0..rank {
                    let r = vt[i] - half_decay * xs_c[i];
                    q += r * r / (gap_var * eigs[i]);
                }
                log_w[j] = -0.5 * q;
            }
            let half = pool_xs.len() / 2;
            let mut ess_min = f64::INFINITY;
            let mut estimates = Vec::with_capacity(2);
            for range in [0..half, half..pool_xs.len()] {
                let lw = &log_w[range.clone()];
                let norm = log_sum_exp(lw);
                if !norm.is_finite() {
                    return Err(Error::Numerical(
                        "all transition weights underflowed".into(),
                    ));
                }
                let mut est = GridFunction::zero(xt.grid().clone());
                let mut w_sq = 0.0;
                for (j, &l) in range.clone().zip(lw.iter()) {
                    let w = (l - norm).exp();
                    w_sq += w * w;
                    if w > 0.0 {
                        est = est.axpy(w, &pool_scores[j]);
                    }
                }
                ess_min = ess_min.min(1.0 / w_sq);
                estimates.push(est);
            }
            let scale = (delta / 2.0).exp();
            let s_t = target.score(c, t, xt)?;
            let r1 = estimates[0].scale(scale).sub(&s_t);
            let r2 = estimates[1].scale(scale).sub(&s_t);
            Ok((l2_inner(&r1, &r2)?, ess_min))
        })
        .collect::<Result<_>>()?;

    let ess_min = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    if ess_min < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::UnreliableEstimate(format!(
            "effective sample size {ess_min:.1} below {MIN_EFFECTIVE_SAMPLES}"
        )));
    }
    let n = terms.len() as f64;
    let mean = terms.iter().map(|t| t.0).sum::<f64>() / n;
    let var = terms.iter().map(|t| (t.0 - mean) * (t.0 - mean)).sum::<f64>() / (n - 1.0);
    Ok(DeviationReport {
        s,
        t,
        n_mc,
        deviation: mean,
        stderr: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_space::Grid;

    fn brownian_setup(d: usize) -> (Grid, CovOperator) {
        let grid = Grid::uniform(d).unwrap();
        let c = CovOperator::brownian(grid.clone()).unwrap();
        (grid, c)
    }

    fn random_fn(grid: &Grid, seed: u64) -> GridFunction {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream_rng(seed, 0);
        GridFunction::new(
            grid.clone(),
            (0..grid.n_points())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stationary_gaussian_score_is_negative_x() {
        let (grid, c) = brownian_setup(16);
        let target = GaussianMeasure::centered(c.clone());
        for t in [0.05, 0.7, 3.0] {
            let x = random_fn(&grid, 1);
            let s = gaussian_score(&target, &c, t, &x).unwrap();
            let err = s.add(&x).l2_norm();
            assert!(err < 1e-8, "stationary score deviates by {err} at t = {t}");
        }
    }

    #[test]
    fn scaled_target_has_componentwise_closed_form() {
        let (grid, c) = brownian_setup(16);
        let s0 = CovOperator::with_spectrum_like(
            &c,
            c.eigenvalues().iter().map(|v| 4.0 * v).collect(),
        )
        .unwrap();
        let target = GaussianMeasure::centered(s0);
        let x = random_fn(&grid, 2);
        for t in [0.1, 1.0, 5.0] {
            let s = gaussian_score(&target, &c, t, &x).unwrap();
            let factor = -1.0 / (1.0 + 3.0 * (-t).exp());
            let err = s.sub(&x.scale(factor)).l2_norm() / x.l2_norm();
            assert!(err < 1e-10, "closed form off by {err} at t = {t}");
        }
    }

    #[test]
    fn spectral_and_dense_routes_agree() {
        let (grid, c) = brownian_setup(24);
        let spectrum: Vec<f64> = c.eigenvalues().iter().map(|v| 2.5 * v).collect();
        let shared = CovOperator::with_spectrum_like(&c, spectrum).unwrap();
        // Same operator rebuilt from its matrix loses the shared basis and
        // forces the dense route.
        let detached = CovOperator::from_operator_matrix(
            grid.clone(),
            shared.operator_matrix(),
            crate::covariance::CovKind::Custom,
        )
        .unwrap();
        let mean = GridFunction::from_fn(grid.clone(), |u| u - 0.5);
        let spec_target = GaussianMeasure::new(mean.clone(), shared).unwrap();
        let dense_target = GaussianMeasure::new(mean, detached).unwrap();
        let x = random_fn(&grid, 3);
        let a = gaussian_score(&spec_target, &c, 0.6, &x).unwrap();
        let b = gaussian_score(&dense_target, &c, 0.6, &x).unwrap();
        assert!(a.sub(&b).l2_norm() < 1e-8);
    }

    #[test]
    fn gaussian_score_matches_finite_differences() {
        let d = 8;
        let grid = Grid::uniform(d).unwrap();
        let c = CovOperator::brownian(grid.clone()).unwrap();
        let s0 = CovOperator::rbf(grid.clone(), 0.3, 1.0).unwrap();
        let m0 = GridFunction::from_fn(grid.clone(), |u| u);
        let target = GaussianMeasure::new(m0.clone(), s0.clone()).unwrap();
        let t = 0.4;
        let marg = marginal_gaussian(&m0, &s0, t, &c).unwrap();
        let x = random_fn(&grid, 4);
        let s = gaussian_score(&target, &c, t, &x).unwrap();

        // grad_H log p = D * euclidean gradient; s = C grad_H log p.
        let h = 1e-5;
        let mut grad = Vec::with_capacity(d);
        for i in 0..d {
            let mut up = x.clone();
            up.values_mut()[i] += h;
            let mut dn = x.clone();
            dn.values_mut()[i] -= h;
            let g = (marg.log_density(&up).unwrap() - marg.log_density(&dn).unwrap()) / (2.0 * h);
            grad.push(g * d as f64);
        }
        let grad_h = GridFunction::new(grid, grad).unwrap();
        let fd = c.apply(&grad_h);
        let rel = s.sub(&fd).l2_norm() / s.l2_norm();
        assert!(rel < 1e-4, "finite-difference mismatch {rel}");
    }

    fn two_well_mixture(grid: &Grid, c: &CovOperator, sep: f64) -> MixtureMeasure {
        let comp_cov = CovOperator::with_spectrum_like(
            c,
            c.eigenvalues().iter().map(|v| 0.25 * v).collect(),
        )
        .unwrap();
        let plus = GaussianMeasure::new(
            GridFunction::constant(grid.clone(), sep),
            comp_cov.clone(),
        )
        .unwrap();
        let minus =
            GaussianMeasure::new(GridFunction::constant(grid.clone(), -sep), comp_cov).unwrap();
        MixtureMeasure::new(vec![0.5, 0.5], vec![minus, plus]).unwrap()
    }

    #[test]
    fn single_component_mixture_equals_gaussian_score() {
        let (grid, c) = brownian_setup(12);
        let comp = GaussianMeasure::new(
            GridFunction::from_fn(grid.clone(), |u| u * u),
            CovOperator::with_spectrum_like(&c, c.eigenvalues().to_vec()).unwrap(),
        )
        .unwrap();
        let mix = MixtureMeasure::new(vec![1.0], vec![comp.clone()]).unwrap();
        let x = random_fn(&grid, 5);
        let a = mixture_score(&mix, &c, 0.8, &x).unwrap();
        let b = gaussian_score(&comp, &c, 0.8, &x).unwrap();
        assert!(a.sub(&b).l2_norm() < 1e-12);
    }

    #[test]
    fn symmetric_mixture_score_at_origin_averages_components() {
        let grid = Grid::uniform(1).unwrap();
        let c = CovOperator::isotropic(grid.clone(), 1.0).unwrap();
        let mix = two_well_mixture(&grid, &c, 1.0);
        let x = GridFunction::zero(grid);
        let s = mixture_score(&mix, &c, 0.5, &x).unwrap();
        let s_minus = gaussian_score(&mix.components()[0], &c, 0.5, &x).unwrap();
        let s_plus = gaussian_score(&mix.components()[1], &c, 0.5, &x).unwrap();
        let avg = s_minus.add(&s_plus).scale(0.5);
        assert!(s.sub(&avg).l2_norm() < 1e-12);
    }

    #[test]
    fn mixture_score_matches_finite_differences_1d() {
        let grid = Grid::uniform(1).unwrap();
        let c = CovOperator::isotropic(grid.clone(), 1.0).unwrap();
        let mix = two_well_mixture(&grid, &c, 1.2);
        let t = 0.6;
        let marginals: Vec<GaussianMeasure> = mix
            .components()
            .iter()
            .map(|comp| marginal_gaussian(comp.mean(), comp.cov(), t, &c).unwrap())
            .collect();
        let mix_t = MixtureMeasure::new(mix.weights().to_vec(), marginals).unwrap();
        let h = 1e-5;
        for v in [-1.4, -0.3, 0.9] {
            let x = GridFunction::new(grid.clone(), vec![v]).unwrap();
            let s = mixture_score(&mix, &c, t, &x).unwrap();
            let up = GridFunction::new(grid.clone(), vec![v + h]).unwrap();
            let dn = GridFunction::new(grid.clone(), vec![v - h]).unwrap();
            let g = (mix_t.log_density(&up).unwrap() - mix_t.log_density(&dn).unwrap())
                / (2.0 * h);
            // D = 1: grad_H = euclidean gradient, C = identity.
            let rel = (s.values()[0] - g).abs() / g.abs().max(1e-8);
            assert!(rel < 1e-4, "mixture fd mismatch {rel} at x = {v}");
        }
    }

    #[test]
    fn relative_view_vanishes_at_stationarity_and_in_time_limit() {
        let (grid, c) = brownian_setup(8);
        let stationary = GaussianMeasure::centered(c.clone());
        let s_nu = OracleTarget::Gaussian(stationary).score_fn(&c).to_relative();
        let x = random_fn(&grid, 6);
        assert!(s_nu.evaluate(0.9, &x).unwrap().l2_norm() < 1e-8);

        let wide = CovOperator::with_spectrum_like(
            &c,
            c.eigenvalues().iter().map(|v| 4.0 * v).collect(),
        )
        .unwrap();
        let target = OracleTarget::Gaussian(GaussianMeasure::centered(wide));
        let s_nu_wide = target.score_fn(&c).to_relative();
        let late = s_nu_wide.evaluate(30.0, &x).unwrap();
        assert!(late.l2_norm() < 1e-10 * (1.0 + x.l2_norm()));
    }

    #[test]
    fn denoise_mean_of_stationary_target() {
        let (grid, _c) = brownian_setup(8);
        let x = random_fn(&grid, 7);
        let s = stationary_score_fn();
        for t in [0.2, 1.0, 4.0] {
            let d = denoise_mean(&s, t, &x).unwrap();
            let expected = x.scale((-t / 2.0).exp());
            assert!(d.sub(&expected).l2_norm() < 1e-12);
        }
        let near = denoise_mean(&s, 1e-6, &x).unwrap();
        assert!(near.sub(&x).l2_norm() < 1e-5);
    }

    #[test]
    fn denoise_mean_matches_joint_gaussian_conditioning() {
        let d = 16;
        let grid = Grid::uniform(d).unwrap();
        let c = CovOperator::brownian(grid.clone()).unwrap();
        let s0 = CovOperator::rbf(grid.clone(), 0.25, 0.8).unwrap();
        let m0 = GridFunction::from_fn(grid.clone(), |u| (2.0 * u).sin());
        let target = GaussianMeasure::new(m0.clone(), s0.clone()).unwrap();
        let t = 0.7;
        let x = random_fn(&grid, 8);

        let drift = OracleTarget::Gaussian(target).score_fn(&c);
        let dm = denoise_mean(&drift, t, &x).unwrap();

        // Textbook conditioning of the joint Gaussian (X_0, X_t).
        let decay_half = (-t / 2.0f64).exp();
        let s_t = s0.operator_matrix() * (-t).exp()
            + c.operator_matrix() * (1.0 - (-t).exp());
        let rhs = DVector::from_column_slice(x.sub(&m0.scale(decay_half)).values());
        let z = s_t.lu().solve(&rhs).unwrap();
        let cond = DVector::from_column_slice(m0.values())
            + s0.operator_matrix() * z * decay_half;
        let expected = GridFunction::new(grid, cond.data.into()).unwrap();
        assert!(dm.sub(&expected).l2_norm() < 1e-8);
    }

    #[test]
    fn score_second_moment_bounded_and_martingale_monotone() {
        // e^{-t} E||s(t, X_t)||^2 must be nonincreasing in t; at
        // stationarity E||s||^2 is exactly tr(C).
        let (_grid, c) = brownian_setup(32);
        let expected_sq = |spectrum_scale: f64, t: f64| -> f64 {
            let decay = (-t).exp();
            c.eigenvalues()
                .iter()
                .map(|&ci| {
                    let st = decay * spectrum_scale * ci + (1.0 - decay) * ci;
                    ci * ci / st
                })
                .sum::<f64>()
        };
        assert!((expected_sq(1.0, 0.3) - c.trace()).abs() < 1e-12);
        for scale in [1.0, 4.0, 0.25] {
            let grid_t = [0.1f64, 0.5, 1.0, 2.0, 5.0];
            let mut prev = f64::INFINITY;
            for &t in &grid_t {
                let v = (-t).exp() * expected_sq(scale, t);
                assert!(v.is_finite());
                assert!(v <= prev + 1e-12, "martingale second moment rose at t = {t}");
                prev = v;
            }
        }
    }

    #[test]
    fn martingale_check_stationary_gaussian() {
        let (_grid, c) = brownian_setup(2);
        let target = OracleTarget::Gaussian(GaussianMeasure::centered(c.clone()));
        let report = martingale_check(&target, &c, 0.3, 0.8, 20_000, 11).unwrap();
        assert!(
            report.deviation.abs() <= 3.0 * report.stderr.max(1e-12),
            "deviation {} stderr {}",
            report.deviation,
            report.stderr
        );
    }

    #[test]
    fn martingale_check_reports_weight_collapse() {
        // Self-normalized importance weights degenerate exponentially in the
        // dimension; the effective-sample-size guard must catch it instead
        // of returning a silently wrong estimate.
        let (_grid, c) = brownian_setup(16);
        let target = OracleTarget::Gaussian(GaussianMeasure::centered(c.clone()));
        let res = martingale_check(&target, &c, 0.3, 0.8, 2_000, 11);
        assert!(matches!(res, Err(Error::UnreliableEstimate(_))));
    }

    #[test]
    fn martingale_check_equal_times_is_zero() {
        let (_grid, c) = brownian_setup(4);
        let target = OracleTarget::Gaussian(GaussianMeasure::centered(c.clone()));
        let report = martingale_check(&target, &c, 0.5, 0.5, 100, 0).unwrap();
        assert_eq!(report.deviation, 0.0);
        assert_eq!(report.stderr, 0.0);
    }

    #[test]
    fn martingale_check_rejects_bad_times() {
        let (_grid, c) = brownian_setup(4);
        let target = OracleTarget::Gaussian(GaussianMeasure::centered(c.clone()));
        assert!(martingale_check(&target, &c, 0.8, 0.3, 100, 0).is_err());
        assert!(martingale_check(&target, &c, 0.0, 0.3, 100, 0).is_err());
    }

    #[test]
    fn deviation_report_serializes() {
        let r = DeviationReport {
            s: 0.3,
            t: 0.8,
            n_mc: 1000,
            deviation: 0.001,
            stderr: 0.0005,
        };
        let json = serde_json::to_string(&r).unwrap();
        for key in ["\"s\"", "\"t\"", "\"n_mc\"", "\"deviation\"", "\"stderr\""] {
            assert!(json.contains(key));
        }
    }
}
