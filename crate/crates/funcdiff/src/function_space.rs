//! Discretized Hilbert-space primitives.
//!
//! Functions on [0,1] are represented by their values on the uniform grid
//! t_i = (i+1)/D. Inner products use the flat quadrature weight 1/D, so the
//! discrete L2 norm of a grid function equals its Euclidean norm times
//! sqrt(1/D). Every norm-dependent quantity in this crate follows that
//! convention.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covariance::CovOperator;
use crate::error::{Error, Result};

/// Uniform grid t_i = (i+1)/D on (0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_points: usize,
    points: Arc<Vec<f64>>,
}

impl Grid {
    /// Uniform grid with `n_points >= 1` points. Non-uniform grids are not
    /// constructible.
    pub fn uniform(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::InvalidArgument("grid needs at least 1 point".into()));
        }
        let d = n_points as f64;
        let points = (0..n_points).map(|i| (i as f64 + 1.0) / d).collect();
        Ok(Self {
            n_points,
            points: Arc::new(points),
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Quadrature weight of the flat left-endpoint Riemann rule.
    pub fn weight(&self) -> f64 {
        1.0 / self.n_points as f64
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let d = self.n_points as f64;
        let i = (t * d - 1.0).round();
        (i.max(0.0) as usize).min(self.n_points - 1)
    }
}

/// A real-valued function on [0,1] sampled at the grid points; the discrete
/// stand-in for an element of L2([0,1]).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(grid.n_points(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("grid function has non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Grid) -> Self {
        let values = vec![0.0; grid.n_points()];
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let values = vec![c; grid.n_points()];
        Self { grid, values }
    }

    /// Sample a closure at the grid points.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        l2_inner(self, self).expect("same grid").sqrt()
    }

    /// self + a * other, entrywise. Panics on grid mismatch; callers go
    /// through checked constructors so mismatch is an internal bug.
    pub fn axpy(&self, a: f64, other: &GridFunction) -> GridFunction {
        assert_eq!(self.len(), other.len(), "grid mismatch in axpy");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.axpy(-1.0, other)
    }

    /// CSV row with full round-trip precision.
    pub fn to_csv_row(&self) -> String {
        self.values
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn from_csv_row(grid: Grid, row: &str) -> Result<Self> {
        let values: std::result::Result<Vec<f64>, _> =
            row.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let values = values.map_err(|e| Error::Serialization(format!("bad csv value: {e}")))?;
        Self::new(grid, values)
    }

    pub fn to_json(&self) -> String {
        let wire = GridFunctionWire {
            n_points: self.grid.n_points(),
            values: self.values.clone(),
        };
        serde_json::to_string(&wire).expect("grid function serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: GridFunctionWire =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let grid = Grid::uniform(wire.n_points)?;
        Self::new(grid, wire.values)
    }
}

#[derive(Serialize, Deserialize)]
struct GridFunctionWire {
    n_points: usize,
    values: Vec<f64>,
}

/// Choice of inner product for losses and projections.
#[derive(Debug, Clone)]
pub enum InnerProductKind {
    L2,
    CameronMartin(CovOperator),
}

impl InnerProductKind {
    pub fn inner(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        match self {
            InnerProductKind::L2 => l2_inner(f, g),
            InnerProductKind::CameronMartin(c) => cm_inner(f, g, c),
        }
    }

    pub fn sq_norm(&self, f: &GridFunction) -> Result<f64> {
        self.inner(f, f)
    }
}

fn check_same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if f.len() != g.len() {
        return Err(Error::GridMismatch(f.len(), g.len()));
    }
    Ok(())
}

/// Discrete L2 inner product (1/D) sum_i f_i g_i.
pub fn l2_inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    check_same_grid(f, g)?;
    let d = f.len() as f64;
    let dot: f64 = f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
    Ok(dot / d)
}

/// Cameron-Martin inner product <f, C^{-1} g> over the retained spectrum of C.
pub fn cm_inner(f: &GridFunction, g: &GridFunction, c: &CovOperator) -> Result<f64> {
    check_same_grid(f, g)?;
    c.check_grid(f)?;
    let retained = c.retained_rank();
    if retained == 0 {
        return Err(Error::SingularOperator(
            "no retained eigenvalues for Cameron-Martin inner product".into(),
        ));
    }
    let cf = c.coefficients(f);
    let cg = c.coefficients(g);
    let eigs = c.eigenvalues();
    let mut acc = 0.0;
    for i in 0..retained {
        acc += cf[i] * cg[i] / eigs[i];
    }
    Ok(acc)
}

/// Orthogonal projection onto the span of the first `d` eigenfunctions of C.
pub fn project(f: &GridFunction, c: &CovOperator, d: usize) -> Result<GridFunction> {
    c.check_grid(f)?;
    let n = f.len();
    if d == 0 || d > n {
        return Err(Error::OutOfRange(format!(
            "projection rank {d} outside 1..={n}"
        )));
    }
    let coeffs = c.coefficients(f);
    Ok(c.from_coefficients_truncated(&coeffs, d))
}
