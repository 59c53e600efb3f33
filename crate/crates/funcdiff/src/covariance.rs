//! Trace-class covariance operators in spectral form.
//!
//! An operator is stored as its eigenvalues (sorted descending) together
//! with eigenfunctions that are orthonormal in the discrete L2 inner
//! product. Functional calculus (apply, sqrt, regularized inverse) and
//! Karhunen-Loeve sampling all go through this representation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{Grid, GridFunction};

const DEFAULT_RANK_TOL: f64 = 1e-12;

/// How an operator was built; enough to re-derive kernel-based operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CovKind {
    Rbf { lengthscale: f64, variance: f64 },
    Brownian,
    Empirical { eps: f64, n_samples: usize },
    Isotropic { eigenvalue: f64 },
    Posterior,
    Custom,
}

/// Shared eigenbasis: column i holds the values of e_i.
#[derive(Debug)]
pub struct SpectralBasis {
    grid: Grid,
    mat: DMatrix<f64>,
}

impl SpectralBasis {
    fn delta(grid: Grid) -> Self {
        let d = grid.n_points();
        let scale = (d as f64).sqrt();
        let mat = DMatrix::from_fn(d, d, |r, c| if r == c { scale } else { 0.0 });
        Self { grid, mat }
    }
}

/// Spectral representation of a trace-class covariance operator.
#[derive(Debug, Clone)]
pub struct CovOperator {
    basis: Arc<SpectralBasis>,
    eigenvalues: Vec<f64>,
    kind: CovKind,
    rank_tol: f64,
}

impl CovOperator {
    /// RBF kernel k(s,t) = variance * exp(-(s-t)^2 / (2 lengthscale^2)).
    pub fn rbf(grid: Grid, lengthscale: f64, variance: f64) -> Result<Self> {
        if lengthscale <= 0.0 || variance <= 0.0 {
            return Err(Error::InvalidArgument(
                "rbf kernel needs positive lengthscale and variance".into(),
            ));
        }
        let pts = grid.points().to_vec();
        let kernel = DMatrix::from_fn(pts.len(), pts.len(), |i, j| {
            let d = pts[i] - pts[j];
            variance * (-d * d / (2.0 * lengthscale * lengthscale)).exp()
        });
        Self::from_kernel_matrix(
            grid,
            kernel,
            CovKind::Rbf {
                lengthscale,
                variance,
            },
        )
    }

    /// Brownian-motion kernel k(s,t) = min(s,t).
    pub fn brownian(grid: Grid) -> Result<Self> {
        let pts = grid.points().to_vec();
        let kernel =
            DMatrix::from_fn(pts.len(), pts.len(), |i, j| pts[i].min(pts[j]));
        Self::from_kernel_matrix(grid, kernel, CovKind::Brownian)
    }

    /// Operator with constant spectrum in the delta basis. `eigenvalue = 1`
    /// is the discrete identity operator (matrix I, trace D); `eigenvalue =
    /// 1/D` gives samples with unit pointwise variance, the classical
    /// white-noise normalization.
    pub fn isotropic(grid: Grid, eigenvalue: f64) -> Result<Self> {
        if eigenvalue < 0.0 {
            return Err(Error::InvalidArgument("eigenvalue must be >= 0".into()));
        }
        let d = grid.n_points();
        Ok(Self {
            basis: Arc::new(SpectralBasis::delta(grid)),
            eigenvalues: vec![eigenvalue; d],
            kind: CovKind::Isotropic { eigenvalue },
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    /// Constant spectrum sharing `other`'s eigenbasis, so the two operators
    /// commute by construction.
    pub fn isotropic_like(other: &CovOperator, eigenvalue: f64) -> Result<Self> {
        if eigenvalue < 0.0 {
            return Err(Error::InvalidArgument("eigenvalue must be >= 0".into()));
        }
        Ok(Self {
            basis: Arc::clone(&other.basis),
            eigenvalues: vec![eigenvalue; other.dim()],
            kind: CovKind::Isotropic { eigenvalue },
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    /// Operator sharing `other`'s eigenbasis with the given spectrum, so the
    /// result commutes with `other`. The spectrum stays aligned with the
    /// basis columns and must therefore already be sorted descending.
    pub fn with_spectrum_like(other: &CovOperator, eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.len() != other.dim() {
            return Err(Error::GridMismatch(other.dim(), eigenvalues.len()));
        }
        if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("spectrum must be finite and >= 0".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1] - 1e-12 * w[1].abs().max(1.0)) {
            return Err(Error::InvalidArgument(
                "spectrum must be sorted descending to stay aligned with the basis".into(),
            ));
        }
        Ok(Self {
            basis: Arc::clone(&other.basis),
            eigenvalues,
            kind: CovKind::Custom,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    /// Centered empirical covariance of the samples plus `eps * Id`.
    /// Uses the snapshot (Gram-matrix) eigendecomposition when there are
    /// fewer samples than grid points.
    pub fn empirical(samples: &[GridFunction], eps: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "empirical covariance needs >= 2 samples, got {}",
                samples.len()
            )));
        }
        if eps < 0.0 {
            return Err(Error::InvalidArgument("eps must be >= 0".into()));
        }
        let grid = samples[0].grid().clone();
        let d = grid.n_points();
        for s in samples {
            if s.len() != d {
                return Err(Error::GridMismatch(d, s.len()));
            }
        }
        let n = samples.len();
        let mut mean = vec![0.0; d];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.values()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        // Centered sample matrix, one column per sample.
        let xc = DMatrix::from_fn(d, n, |i, j| samples[j].values()[i] - mean[i]);
        let scale = 1.0 / (n as f64 * d as f64);
        let kind = CovKind::Empirical { eps, n_samples: n };

        if n >= d {
            let m = &xc * xc.transpose() * scale + DMatrix::identity(d, d) * eps;
            Self::from_operator_matrix(grid, m, kind)
        } else {
            Self::empirical_snapshot(grid, xc, scale, eps, kind)
        }
    }

    fn empirical_snapshot(
        grid: Grid,
        xc: DMatrix<f64>,
        scale: f64,
        eps: f64,
        kind: CovKind,
    ) -> Result<Self> {
        let d = grid.n_points();
        let gram = xc.transpose() * &xc * scale;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
        });
        let lam_max = eig.eigenvalues[order[0]].max(0.0);
        let cutoff = lam_max * 1e-12;

        let mut vectors: Vec<DVector<f64>> = Vec::new();
        let mut lifted: Vec<f64> = Vec::new();
        for &k in &order {
            let lam = eig.eigenvalues[k];
            if lam <= cutoff || vectors.len() == d {
                break;
            }
            let u = &xc * eig.eigenvectors.column(k);
            let norm = u.norm();
            if norm > 0.0 {
                vectors.push(u / norm);
                lifted.push(lam);
            }
        }
        let rank = vectors.len();
        complete_orthonormal(&mut vectors, d);
        let mut eigenvalues: Vec<f64> = lifted.iter().map(|l| l + eps).collect();
        eigenvalues.extend(std::iter::repeat(eps).take(d - rank));

        let sqrt_d = (d as f64).sqrt();
        let mut mat = DMatrix::zeros(d, d);
        for (i, v) in vectors.iter().enumerate() {
            mat.set_column(i, &(v * sqrt_d));
        }
        fix_signs(&mut mat);
        Ok(Self {
            basis: Arc::new(SpectralBasis { grid, mat }),
            eigenvalues,
            kind,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    /// Build from a kernel matrix K; the operator matrix is K/D under the
    /// flat quadrature weight.
    pub fn from_kernel_matrix(grid: Grid, kernel: DMatrix<f64>, kind: CovKind) -> Result<Self> {
        let d = grid.n_points() as f64;
        Self::from_operator_matrix(grid, kernel / d, kind)
    }

    /// Build from the operator's matrix in grid coordinates (the matrix M
    /// with (C f)_i = sum_j M_ij f_j). M is symmetrized and negative
    /// round-off eigenvalues are clamped to zero.
    pub fn from_operator_matrix(grid: Grid, m: DMatrix<f64>, kind: CovKind) -> Result<Self> {
        let d = grid.n_points();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::GridMismatch(d, m.nrows()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("finite eigenvalues")
        });
        let sqrt_d = (d as f64).sqrt();
        let mut mat = DMatrix::zeros(d, d);
        let mut eigenvalues = Vec::with_capacity(d);
        for (i, &k) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[k].max(0.0));
            mat.set_column(i, &(eig.eigenvectors.column(k) * sqrt_d));
        }
        fix_signs(&mut mat);
        Ok(Self {
            basis: Arc::new(SpectralBasis { grid, mat }),
            eigenvalues,
            kind,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.basis.grid
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn kind(&self) -> &CovKind {
        &self.kind
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunction(&self, i: usize) -> GridFunction {
        let col: Vec<f64> = self.basis.mat.column(i).iter().copied().collect();
        GridFunction::new(self.basis.grid.clone(), col).expect("basis column is valid")
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn set_rank_tol(&mut self, tol: f64) {
        self.rank_tol = tol;
    }

    /// Number of eigenvalues kept for inversion: c_i >= rank_tol * c_max.
    pub fn retained_rank(&self) -> usize {
        let c_max = self.eigenvalues.first().copied().unwrap_or(0.0);
        if c_max <= 0.0 {
            return 0;
        }
        let cutoff = self.rank_tol * c_max;
        self.eigenvalues.iter().take_while(|&&c| c >= cutoff).count()
    }

    /// True when the two operators share one eigenbasis object, so spectral
    /// formulas can treat them as simultaneously diagonal.
    pub fn shares_basis(&self, other: &CovOperator) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
    }

    pub fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if f.len() != self.dim() {
            return Err(Error::GridMismatch(self.dim(), f.len()));
        }
        Ok(())
    }

    /// L2 coefficients <f, e_i> for every basis function.
    pub fn coefficients(&self, f: &GridFunction) -> Vec<f64> {
        let v = DVector::from_column_slice(f.values());
        let c = self.basis.mat.transpose() * v / self.dim() as f64;
        c.data.into()
    }

    pub fn from_coefficients(&self, coeffs: &[f64]) -> GridFunction {
        self.from_coefficients_truncated(coeffs, coeffs.len())
    }

    /// Assemble sum_{i < rank} coeffs_i e_i.
    pub fn from_coefficients_truncated(&self, coeffs: &[f64], rank: usize) -> GridFunction {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        for i in 0..rank.min(coeffs.len()) {
            if coeffs[i] != 0.0 {
                out.axpy(coeffs[i], &self.basis.mat.column(i), 1.0);
            }
        }
        GridFunction::new(self.basis.grid.clone(), out.data.into()).expect("finite output")
    }

    fn apply_spectral(&self, f: &GridFunction, phi: impl Fn(f64) -> f64, rank: usize) -> GridFunction {
        let mut coeffs = self.coefficients(f);
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c = if i < rank { *c * phi(self.eigenvalues[i]) } else { 0.0 };
        }
        self.from_coefficients(&coeffs)
    }

    /// C f.
    pub fn apply(&self, f: &GridFunction) -> GridFunction {
        self.apply_spectral(f, |c| c, self.dim())
    }

    /// C^{1/2} f.
    pub fn apply_sqrt(&self, f: &GridFunction) -> GridFunction {
        self.apply_spectral(f, |c| c.sqrt(), self.dim())
    }

    /// Regularized C^{-1} f over the retained span; components outside the
    /// retained span are discarded.
    pub fn apply_inv(&self, f: &GridFunction) -> Result<GridFunction> {
        let rank = self.retained_rank();
        if rank == 0 {
            return Err(Error::SingularOperator(
                "operator has no retained eigenvalues".into(),
            ));
        }
        Ok(self.apply_spectral(f, |c| 1.0 / c, rank))
    }

    /// Karhunen-Loeve sample: mean + sum_i sqrt(c_i) xi_i e_i.
    pub fn sample(&self, mean: Option<&GridFunction>, rng: &mut impl Rng) -> GridFunction {
        let d = self.dim();
        let mut coeffs = Vec::with_capacity(d);
        for &c in &self.eigenvalues {
            let xi: f64 = StandardNormal.sample(rng);
            coeffs.push(c.sqrt() * xi);
        }
        let noise = self.from_coefficients(&coeffs);
        match mean {
            Some(m) => m.add(&noise),
            None => noise,
        }
    }

    /// Matrix of the operator in grid coordinates: (1/D) E diag(c) E^T.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut scaled = self.basis.mat.clone();
        for (i, &c) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(i).scale_mut(c);
        }
        scaled * self.basis.mat.transpose() / d as f64
    }

    /// Kernel matrix K = D * M; for kernel-built operators this reproduces
    /// the assembled kernel.
    pub fn kernel_matrix(&self) -> DMatrix<f64> {
        self.operator_matrix() * self.dim() as f64
    }

    pub fn to_checkpoint(&self) -> String {
        let wire = CovCheckpoint {
            kind: self.kind.clone(),
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions: (0..self.dim())
                .map(|i| self.basis.mat.column(i).iter().copied().collect())
                .collect(),
        };
        serde_json::to_string(&wire).expect("checkpoint serializes")
    }

    pub fn from_checkpoint(s: &str) -> Result<Self> {
        let wire: CovCheckpoint =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let d = wire.eigenvalues.len();
        if wire.eigenfunctions.len() != d || wire.eigenfunctions.iter().any(|f| f.len() != d) {
            return Err(Error::Serialization(
                "checkpoint eigenfunctions are not a D x D system".into(),
            ));
        }
        let grid = Grid::uniform(d)?;
        let mut mat = DMatrix::zeros(d, d);
        for (i, f) in wire.eigenfunctions.iter().enumerate() {
            mat.set_column(i, &DVector::from_column_slice(f));
        }
        Ok(Self {
            basis: Arc::new(SpectralBasis { grid, mat }),
            eigenvalues: wire.eigenvalues,
            kind: wire.kind,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CovCheckpoint {
    #[serde(flatten)]
    kind: CovKind,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Vec<f64>>,
}

/// Deterministic sign convention: the largest-magnitude entry of each
/// eigenfunction is positive.
fn fix_signs(mat: &mut DMatrix<f64>) {
    for mut col in mat.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Extend a partial Euclidean-orthonormal system to a full basis using
/// coordinate vectors and two-pass Gram-Schmidt.
fn complete_orthonormal(vectors: &mut Vec<DVector<f64>>, d: usize) {
    let mut candidate = 0usize;
    while vectors.len() < d && candidate < d {
        let mut v = DVector::zeros(d);
        v[candidate] = 1.0;
        for _ in 0..2 {
            for b in vectors.iter() {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            vectors.push(v / norm);
        }
        candidate += 1;
    }
    assert_eq!(vectors.len(), d, "failed to complete orthonormal basis");
}
