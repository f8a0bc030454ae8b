use std::fmt;
use std::str::FromStr;

use super::{lift_geometry, GeometryData, ParametricGeometry};
use crate::error::{Error, Result};

/// Source of the Gaussian curvature K♯_h used by the a₂ form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureMode {
    /// K_h of the computational surface.
    Intrinsic,
    /// K_h of an order-k′ lift of the same flat mesh.
    Lifted(usize),
    /// K∘π from the surface oracle.
    Exact,
}

impl fmt::Display for CurvatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurvatureMode::Intrinsic => write!(f, "intrinsic"),
            CurvatureMode::Lifted(k) => write!(f, "lifted:{k}"),
            CurvatureMode::Exact => write!(f, "exact"),
        }
    }
}

impl FromStr for CurvatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intrinsic" => Ok(CurvatureMode::Intrinsic),
            "exact" => Ok(CurvatureMode::Exact),
            _ => {
                let k = s
                    .strip_prefix("lifted:")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Error::Config(format!("unknown curvature mode '{s}'")))?;
                Ok(CurvatureMode::Lifted(k))
            }
        }
    }
}

/// Evaluator of K♯_h at points of the computational surface.
#[derive(Debug, Clone)]
pub struct CurvatureApproximation {
    mode: CurvatureMode,
    lifted: Option<ParametricGeometry>,
}

/// Set up K♯_h for `geom`. Lifted modes need an order above the geometry order.
pub fn curvature_field(geom: &ParametricGeometry, mode: CurvatureMode) -> Result<CurvatureApproximation> {
    let lifted = match mode {
        CurvatureMode::Lifted(k) if k <= geom.order() => {
            return Err(Error::Config(format!(
                "lifted curvature order {k} must exceed the geometry order {}",
                geom.order()
            )))
        }
        CurvatureMode::Lifted(k) => Some(lift_geometry(geom.mesh().clone(), geom.oracle().clone(), k)?),
        _ => None,
    };
    Ok(CurvatureApproximation { mode, lifted })
}

impl CurvatureApproximation {
    pub fn mode(&self) -> CurvatureMode {
        self.mode
    }

    /// K♯_h at reference point `xi` of element `t`, where `gd` is the geometry data there.
    pub fn eval(&self, t: usize, xi: [f64; 2], gd: &GeometryData) -> Result<f64> {
        match self.mode {
            CurvatureMode::Intrinsic => Ok(gd.gauss),
            CurvatureMode::Exact => Ok(gd.exact.gauss),
            CurvatureMode::Lifted(_) => {
                let g = self.lifted.as_ref().expect("lifted geometry present");
                Ok(g.geometry_data(t, xi)?.gauss)
            }
        }
    }
}
