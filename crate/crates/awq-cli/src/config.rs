use crate::error::{CliError, CliResult};
use awq::multivariate::MultiBetaParams;
use awq::qseries::{QContext, C64};
use awq::univariate::BetaParams;
use awq::verify::SuiteParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Parameter document read by `--config`. Angles are in radians, so `s` and
/// `u` lie on the unit circle by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub q: f64,
    pub k: f64,
    pub kvec: Vec<f64>,
    pub t: f64,
    pub s_angle: f64,
    pub u_angle: f64,
    /// Largest degree `n`, index `m` or total degree `|m|` tabulated.
    pub degree: usize,
    /// Evaluation points as angles; each entry has one angle per variable.
    pub points: Vec<Vec<f64>>,
    /// Parameters of the verification suites.
    pub suite: SuiteParams,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            k: 1.3,
            kvec: vec![1.3, 0.8],
            t: 2.5,
            s_angle: 0.63,
            u_angle: 1.2,
            degree: 3,
            points: Vec::new(),
            suite: SuiteParams::default(),
        }
    }
}

/// `RunParams` after every domain rule has been checked.
#[derive(Debug, Clone)]
pub struct Validated {
    pub params: RunParams,
    pub beta: BetaParams,
    pub mbeta: MultiBetaParams,
    pub ctx: QContext,
}

impl RunParams {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn validate(self) -> CliResult<Validated> {
        let invalid = |what: &str, e: awq::Error| CliError::Validation(format!("{what}: {e}"));
        let beta = BetaParams::from_angles(self.s_angle, self.t, self.u_angle, self.k, self.q).map_err(|e| invalid("beta", e))?;
        let mbeta = MultiBetaParams::from_angles(self.s_angle, self.t, self.u_angle, self.kvec.clone(), self.q)
            .map_err(|e| invalid("multivariate beta", e))?;
        self.suite.validate().map_err(|e| invalid("suite", e))?;
        let ctx = QContext::with_q(self.q).map_err(|e| invalid("q", e))?;
        if self.points.iter().any(|p| p.is_empty() || p.iter().any(|a| !a.is_finite())) {
            return Err(CliError::Validation("points must be non-empty lists of finite angles".into()));
        }
        Ok(Validated { params: self, beta, mbeta, ctx })
    }
}

impl Validated {
    /// Torus points for a function of `dim` variables: the configured ones, or
    /// a fixed default set.
    pub fn points(&self, dim: usize) -> CliResult<Vec<Vec<C64>>> {
        let angles: Vec<Vec<f64>> = if self.params.points.is_empty() {
            (0..5).map(|i| (0..dim).map(|j| 0.1 + 0.31 * i as f64 + 0.77 * j as f64).collect()).collect()
        } else {
            self.params.points.clone()
        };
        angles
            .into_iter()
            .map(|p| {
                if p.len() != dim {
                    return Err(CliError::Validation(format!("point {p:?} has {} angles, expected {dim}", p.len())));
                }
                Ok(p.into_iter().map(|a| C64::from_polar(1.0, a)).collect())
            })
            .collect()
    }
}
