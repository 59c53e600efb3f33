//! Quantitative evaluation: Bures-Wasserstein distance between Gaussians,
//! sliced Wasserstein-2 between sample sets, quadratic variation as the
//! roughness diagnostic, and covariance-spectrum comparison.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::covariance::CovOperator;
use crate::error::{Error, Result};
use crate::function_space::{l2_inner, GridFunction};
use crate::measure::GaussianMeasure;
use crate::rng::stream_rng;

fn matrix_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut scaled = eig.eigenvectors.clone();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(i).scale_mut(l.max(0.0).sqrt());
    }
    scaled * eig.eigenvectors.transpose()
}

/// Wasserstein-2 distance between Gaussian measures (Bures metric):
/// ||m_a - m_b||_{L2}^2 + tr(A) + tr(B) - 2 tr((A^{1/2} B A^{1/2})^{1/2}),
/// all in the 1/D-weighted convention.
pub fn w2_gaussian(a: &GaussianMeasure, b: &GaussianMeasure) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch(a.dim(), b.dim()));
    }
    let mean_term = {
        let d = a.mean().sub(b.mean());
        l2_inner(&d, &d)?
    };
    let ma = a.cov().operator_matrix();
    let mb = b.cov().operator_matrix();
    let sqrt_a = matrix_sqrt(&ma);
    let inner = &sqrt_a * mb * &sqrt_a;
    let eig = nalgebra::SymmetricEigen::new((&inner + inner.transpose()) * 0.5);
    let cross: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d2 = mean_term + ma.trace() + mb.trace() - 2.0 * cross;
    Ok(d2.max(0.0).sqrt())
}

/// Exact squared Wasserstein-2 between two 1-d empirical measures via the
/// quantile coupling; sample sizes may differ.
pub fn w2_sq_empirical_1d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    b.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next = ((i + 1) as f64 / n).min((j + 1) as f64 / m);
        let diff = a[i] - b[j];
        acc += (next - u) * diff * diff;
        u = next;
        if ((i + 1) as f64 / n) <= next + 1e-15 {
            i += 1;
        }
        if ((j + 1) as f64 / m) <= next + 1e-15 {
            j += 1;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlicedW2Report {
    pub value: f64,
    pub stderr: f64,
    pub n_proj: usize,
}

/// Sliced Wasserstein-2 estimate: average of exact 1-d squared distances
/// over random L2-unit directions, square-rooted, with the
/// projection-resampling standard error.
pub fn sliced_w2(
    xs: &[GridFunction],
    ys: &[GridFunction],
    n_proj: usize,
    seed: u64,
) -> Result<SlicedW2Report> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    if n_proj == 0 {
        return Err(Error::InvalidArgument("need at least one projection".into()));
    }
    let grid = xs[0].grid().clone();
    let d = grid.n_points();
    for f in xs.iter().chain(ys) {
        if f.len() != d {
            return Err(Error::GridMismatch(d, f.len()));
        }
    }
    let mut rng = stream_rng(seed, 0);
    let mut sq_dists = Vec::with_capacity(n_proj);
    for _ in 0..n_proj {
        let mut theta =
            GridFunction::new(grid.clone(), (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())?;
        let norm = theta.l2_norm();
        if norm == 0.0 {
            continue;
        }
        theta = theta.scale(1.0 / norm);
        let px: Vec<f64> = xs
            .iter()
            .map(|f| l2_inner(f, &theta))
            .collect::<Result<_>>()?;
        let py: Vec<f64> = ys
            .iter()
            .map(|f| l2_inner(f, &theta))
            .collect::<Result<_>>()?;
        sq_dists.push(w2_sq_empirical_1d(&px, &py)?);
    }
    let n = sq_dists.len() as f64;
    let mean_sq = sq_dists.iter().sum::<f64>() / n;
    let var_sq = sq_dists
        .iter()
        .map(|v| (v - mean_sq) * (v - mean_sq))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let value = mean_sq.sqrt();
    let stderr_sq = (var_sq / n).sqrt();
    let stderr = if value > 0.0 {
        stderr_sq / (2.0 * value)
    } else {
        stderr_sq.sqrt()
    };
    Ok(SlicedW2Report {
        value,
        stderr,
        n_proj,
    })
}

/// Discrete quadratic variation sum_i (f_{i+1} - f_i)^2; zero for a single
/// grid point.
pub fn quadratic_variation(f: &GridFunction) -> f64 {
    f.values()
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub empirical: f64,
    pub target: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
}

/// Top-k eigenvalues of the empirical covariance of `samples` against the
/// target operator's, with relative errors.
pub fn spectrum_compare(
    samples: &[GridFunction],
    c_target: &CovOperator,
    k: usize,
) -> Result<SpectrumReport> {
    if k > c_target.dim() {
        return Err(Error::OutOfRange(format!(
            "k = {k} exceeds dimension {}",
            c_target.dim()
        )));
    }
    if k == 0 {
        return Ok(SpectrumReport { rows: Vec::new() });
    }
    let emp = CovOperator::empirical(samples, 0.0)?;
    if emp.dim() != c_target.dim() {
        return Err(Error::GridMismatch(c_target.dim(), emp.dim()));
    }
    let rows = (0..k)
        .map(|i| {
            let e = emp.eigenvalues()[i];
            let t = c_target.eigenvalues()[i];
            let rel_err = if t > 0.0 {
                (e - t).abs() / t
            } else {
                f64::INFINITY
            };
            SpectrumRow {
                index: i,
                empirical: e,
                target: t,
                rel_err,
            }
        })
        .collect();
    Ok(SpectrumReport { rows })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WelchReport {
    pub t_stat: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Welch's two-sample location test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchReport> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "location test needs >= 2 observations per sample".into(),
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se_sq = va / na + vb / nb;
    if se_sq <= 0.0 {
        return Err(Error::Numerical("degenerate variance in location test".into()));
    }
    let t_stat = (ma - mb) / se_sq.sqrt();
    let dof = se_sq * se_sq
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(format!("t distribution: {e}")))?;
    let p_value = 2.0 * (1.0 - dist.cdf(t_stat.abs()));
    Ok(WelchReport {
        t_stat,
        dof,
        p_value,
    })
}

/// Overlap coefficient of two sample sets histogrammed on shared bins over
/// [lo, hi]; out-of-range values are clipped into the edge bins.
pub fn overlap_coefficient(a: &[f64], b: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    if n_bins == 0 || hi <= lo {
        return Err(Error::InvalidArgument("bad histogram geometry".into()));
    }
    let hist = |vals: &[f64]| -> Vec<f64> {
        let mut h = vec![0.0; n_bins];
        for &v in vals {
            let pos = ((v - lo) / (hi - lo) * n_bins as f64).floor();
            let idx = (pos.max(0.0) as usize).min(n_bins - 1);
            h[idx] += 1.0 / vals.len() as f64;
        }
        h
    };
    let ha = hist(a);
    let hb = hist(b);
    Ok(ha.iter().zip(&hb).map(|(x, y)| x.min(*y)).sum())
}
