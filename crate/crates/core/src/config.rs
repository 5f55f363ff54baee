//! JSON run configuration, validated into library objects before any computation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closed_form::{sampson_profile, ExpPolySolution, ExpTerm};
use crate::error::{BiharmError, Result};
use crate::euler_lagrange::{
    BoundaryConditions, ClampedEnds, ConstantCurve, FourierCurve, Grid, SmoothCurve,
};
use crate::lagrangian::{GeometrySpec, TableWarp, WarpFn};
use crate::solver::{InitialGuess, SolveConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpConfig {
    Identity,
    Sine,
    Sinh,
    Constant(f64),
    Table { knots: Vec<f64>, values: Vec<f64> },
}

impl WarpConfig {
    fn build(&self) -> Result<WarpFn> {
        Ok(match self {
            WarpConfig::Identity => WarpFn::Identity,
            WarpConfig::Sine => WarpFn::Sine,
            WarpConfig::Sinh => WarpFn::Sinh,
            WarpConfig::Constant(c) => WarpFn::Constant(*c),
            WarpConfig::Table { knots, values } => {
                WarpFn::Table(TableWarp::new(knots.clone(), values.clone())?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    TorusToSphere {
        k: i64,
    },
    WarpedProduct {
        m: u32,
        lambda: f64,
        f: WarpConfig,
        h: WarpConfig,
        a: f64,
        b: f64,
    },
    EuclideanLog {
        m: u32,
        lambda: f64,
        a: f64,
        b: f64,
    },
    Cylinder {
        lambda: f64,
        a: f64,
        b: f64,
    },
}

impl GeometryConfig {
    pub fn build(&self) -> Result<GeometrySpec> {
        match self {
            GeometryConfig::TorusToSphere { k } => GeometrySpec::torus_to_sphere(*k),
            GeometryConfig::WarpedProduct {
                m,
                lambda,
                f,
                h,
                a,
                b,
            } => GeometrySpec::warped_product(*m, *lambda, f.build()?, h.build()?, *a, *b),
            GeometryConfig::EuclideanLog { m, lambda, a, b } => {
                GeometrySpec::euclidean_log(*m, *lambda, *a, *b)
            }
            GeometryConfig::Cylinder { lambda, a, b } => GeometrySpec::cylinder(*lambda, *a, *b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndsConfig {
    pub value_a: f64,
    pub slope_a: f64,
    pub value_b: f64,
    pub slope_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcConfig {
    Periodic,
    Clamped { ends: Vec<EndsConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub bc: BcConfig,
}

/// Smooth reference curves for residual evaluation and error measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    Constant {
        value: f64,
    },
    Fourier {
        base: f64,
        #[serde(default)]
        a_cos: f64,
        #[serde(default)]
        a_sin: f64,
        mode: f64,
    },
    /// `s sinh s + e^s` with `s = sqrt(lambda) t`.
    Sampson {
        lambda: f64,
    },
    ExpPoly {
        terms: Vec<TermConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub coef: f64,
    #[serde(default)]
    pub power: u32,
    pub rate: f64,
}

impl CurveConfig {
    pub fn build(&self) -> Result<Box<dyn SmoothCurve>> {
        Ok(match self {
            CurveConfig::Constant { value } => Box::new(ConstantCurve(*value)),
            CurveConfig::Fourier {
                base,
                a_cos,
                a_sin,
                mode,
            } => Box::new(FourierCurve {
                base: *base,
                a_cos: *a_cos,
                a_sin: *a_sin,
                mode: *mode,
            }),
            CurveConfig::Sampson { lambda } => Box::new(sampson_profile(*lambda)?),
            CurveConfig::ExpPoly { terms } => Box::new(ExpPolySolution::new(
                terms
                    .iter()
                    .map(|t| ExpTerm {
                        coef: t.coef,
                        power: t.power,
                        rate: t.rate,
                    })
                    .collect(),
            )?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub pos_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub emit_csv: bool,
    pub emit_report: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            emit_csv: true,
            emit_report: true,
        }
    }
}

fn default_initial() -> InitialGuess {
    InitialGuess::Constant { value: 0.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "default_initial")]
    pub initial: InitialGuess,
    /// Curve for the `residual` command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveConfig>,
    /// Known solution to measure the `solve` error against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<CurveConfig>,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A config validated into library objects.
pub struct Resolved {
    pub geometry: GeometrySpec,
    pub grid: Grid,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| BiharmError::InvalidParameter(format!("config is not valid JSON: {e}")))?;
        // reports embed the config that produced them
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("report") => {
                map.remove("config").ok_or_else(|| {
                    BiharmError::InvalidParameter("report has no embedded config".into())
                })?
            }
            other => other,
        };
        serde_json::from_value(value)
            .map_err(|e| BiharmError::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            BiharmError::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let geometry = self.geometry.build()?;
        self.solver.validate()?;
        let bc = match &self.grid.bc {
            BcConfig::Periodic => BoundaryConditions::Periodic,
            BcConfig::Clamped { ends } => BoundaryConditions::Clamped(
                ends.iter()
                    .map(|e| ClampedEnds {
                        value_a: e.value_a,
                        slope_a: e.slope_a,
                        value_b: e.value_b,
                        slope_b: e.slope_b,
                    })
                    .collect(),
            ),
        };
        let grid = Grid::for_domain(&geometry, self.grid.n, bc)?;
        grid.check_compatible(&geometry)?;
        if let Some(c) = &self.curve {
            c.build()?;
        }
        if let Some(c) = &self.exact {
            c.build()?;
        }
        if let Some(p) = self.stability.pos_tol {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(BiharmError::InvalidParameter(format!(
                    "stability.pos_tol must be non-negative, got {p}"
                )));
            }
        }
        Ok(Resolved { geometry, grid })
    }
}
