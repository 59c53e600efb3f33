//! The uniform drift contract shared by oracles and trained networks.
//!
//! A score function evaluates (t, x) -> drift in one of two
//! parameterizations: absolute (the reverse drift s, which is -x at
//! stationarity) or relative (s_nu = s + x, which vanishes at
//! stationarity). Conversions between the two are views over one base
//! callable, so a round trip restores the original evaluation exactly.

use std::sync::Arc;

use crate::error::Result;
use crate::function_space::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Oracle,
    Learned,
}

type EvalFn = dyn Fn(f64, &GridFunction) -> Result<GridFunction> + Send + Sync;

#[derive(Clone)]
pub struct ScoreFn {
    base: Arc<EvalFn>,
    base_param: Parameterization,
    view: Parameterization,
    provenance: Provenance,
}

impl ScoreFn {
    pub fn new(
        parameterization: Parameterization,
        provenance: Provenance,
        eval: impl Fn(f64, &GridFunction) -> Result<GridFunction> + Send + Sync + 'static,
    ) -> Self {
        Self {
            base: Arc::new(eval),
            base_param: parameterization,
            view: parameterization,
            provenance,
        }
    }

    pub fn parameterization(&self) -> Parameterization {
        self.view
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn evaluate(&self, t: f64, x: &GridFunction) -> Result<GridFunction> {
        let base = (self.base)(t, x)?;
        match (self.base_param, self.view) {
            (a, b) if a == b => Ok(base),
            // s_nu = s + x
            (Parameterization::Absolute, Parameterization::Relative) => Ok(base.add(x)),
            // s = s_nu - x
            _ => Ok(base.sub(x)),
        }
    }

    /// View this drift in the relative parameterization.
    pub fn to_relative(&self) -> ScoreFn {
        let mut out = self.clone();
        out.view = Parameterization::Relative;
        out
    }

    /// View this drift in the absolute parameterization.
    pub fn to_absolute(&self) -> ScoreFn {
        let mut out = self.clone();
        out.view = Parameterization::Absolute;
        out
    }
}

impl std::fmt::Debug for ScoreFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScoreFn")
            .field("parameterization", &self.view)
            .field("provenance", &self.provenance)
            .finish()
    }
}
