use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear_model::ManifoldSpec;
use crate::numerics::logspace;
use crate::rem::TcMethod;
use crate::spectral::{default_probe_count, ProbeDesign, ProbeMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Mean-field spectrum of the random-matrix model.
    Analytic,
    /// SVD of one sampled random-matrix Jacobian.
    RandomMatrix,
    /// Probe spectrum of the empirical score of a sampled dataset.
    Empirical,
    /// Probe spectrum of the exact score.
    Exact,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Analytic => "analytic",
            EstimatorKind::RandomMatrix => "random_matrix",
            EstimatorKind::Empirical => "empirical",
            EstimatorKind::Exact => "exact",
        }
    }

    /// Seed-derivation coordinate.
    pub fn code(self) -> u64 {
        match self {
            EstimatorKind::Analytic => 0,
            EstimatorKind::RandomMatrix => 1,
            EstimatorKind::Empirical => 2,
            EstimatorKind::Exact => 3,
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, EstimatorKind::Analytic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    Explicit(Vec<f64>),
    LogSpaced(LogGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid::LogSpaced(LogGrid {
            min: 1e-3,
            max: 10.0,
            points: 30,
        })
    }
}

impl TGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TGrid::Explicit(v) => v.clone(),
            TGrid::LogSpaced(g) => logspace(g.min, g.max, g.points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XStar {
    #[default]
    Origin,
    /// The first point of the dataset drawn for the cell.
    DatasetPoint,
}

/// Settings of the condensation-time comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcComparisonConfig {
    pub ambient_dim: usize,
    pub manifold_dim: usize,
    /// Standard deviation of the entries of the `d×m` projection.
    pub projection_scale: f64,
    /// Standard deviation of the coordinates of the probed states.
    pub x_scale: f64,
    pub alpha_grid: TGrid,
    pub alpha: f64,
    pub samples: usize,
}

impl Default for TcComparisonConfig {
    fn default() -> Self {
        TcComparisonConfig {
            ambient_dim: 100,
            manifold_dim: 50,
            projection_scale: 1.0,
            x_scale: 1.0,
            alpha_grid: TGrid::LogSpaced(LogGrid {
                min: 0.01,
                max: 0.5,
                points: 25,
            }),
            alpha: 0.15,
            samples: 2000,
        }
    }
}

fn default_repetitions() -> usize {
    1
}
fn default_c() -> f64 {
    10.0
}
fn default_discard() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_tc_method() -> TcMethod {
    TcMethod::Approx
}
fn default_probe_mode() -> ProbeMode {
    ProbeMode::Central
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: ManifoldSpec,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub t_grid: TGrid,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub estimators: Vec<EstimatorKind>,
    /// Score probes per spectrum; `None` uses [`default_probe_count`].
    #[serde(rename = "K", default)]
    pub k: Option<usize>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_discard")]
    pub discard: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_tc_method")]
    pub tc_method: TcMethod,
    #[serde(default = "default_true")]
    pub fresh_dataset_per_rep: bool,
    #[serde(default = "default_probe_mode")]
    pub probe_mode: ProbeMode,
    #[serde(default)]
    pub probe_design: ProbeDesign,
    #[serde(default)]
    pub x_star: XStar,
    #[serde(default)]
    pub tc_comparison: TcComparisonConfig,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(spec: ManifoldSpec, n_list: Vec<usize>, estimators: Vec<EstimatorKind>) -> Self {
        ExperimentConfig {
            spec,
            n_list,
            t_grid: TGrid::default(),
            repetitions: 1,
            estimators,
            k: None,
            c: default_c(),
            discard: default_discard(),
            master_seed: 0,
            tc_method: default_tc_method(),
            fresh_dataset_per_rep: true,
            probe_mode: default_probe_mode(),
            probe_design: ProbeDesign::default(),
            x_star: XStar::default(),
            tc_comparison: TcComparisonConfig::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn probes(&self) -> usize {
        self.k.unwrap_or_else(|| default_probe_count(self.spec.ambient_dim()))
    }

    pub fn t_values(&self) -> Vec<f64> {
        self.t_grid.values()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::config("N_list", "must not be empty"));
        }
        if self.n_list.contains(&0) {
            return Err(Error::config("N_list", "dataset sizes must be at least 1"));
        }
        let needs_tc = self
            .estimators
            .iter()
            .any(|e| matches!(e, EstimatorKind::Analytic | EstimatorKind::RandomMatrix));
        if needs_tc && self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::config(
                "N_list",
                "analytic and random_matrix estimators need N >= 2",
            ));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("estimators", "must not be empty"));
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if let TGrid::LogSpaced(g) = &self.t_grid {
            if !(g.min > 0.0 && g.max > g.min && g.max.is_finite()) || g.points == 0 {
                return Err(Error::config(
                    "t_grid",
                    "log grid needs 0 < min < max and points >= 1",
                ));
            }
        }
        let ts = self.t_values();
        if ts.is_empty() {
            return Err(Error::config("t_grid", "must not be empty"));
        }
        if ts.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::config("t_grid", "times must be positive and finite"));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("t_grid", "must be strictly increasing"));
        }
        if self.k == Some(0) {
            return Err(Error::config("K", "must be at least 1"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config("c", "must be positive"));
        }
        let tc = &self.tc_comparison;
        if tc.manifold_dim == 0 || tc.manifold_dim > tc.ambient_dim {
            return Err(Error::config(
                "tc_comparison.manifold_dim",
                "must lie in 1..=ambient_dim",
            ));
        }
        if !(tc.projection_scale > 0.0) || !(tc.x_scale >= 0.0) {
            return Err(Error::config("tc_comparison", "scales must be positive"));
        }
        if !(tc.alpha > 0.0) {
            return Err(Error::config("tc_comparison.alpha", "must be positive"));
        }
        if tc.alpha_grid.values().iter().any(|&a| !(a > 0.0)) {
            return Err(Error::config("tc_comparison.alpha_grid", "values must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG4: &str = r#"{
        "spec": {"ambient_dim": 30, "blocks": [{"dim": 2, "variance": 1.0}, {"dim": 5, "variance": 0.3}]},
        "N_list": [1000],
        "t_grid": {"min": 0.001, "max": 10.0, "points": 30},
        "repetitions": 5,
        "estimators": ["analytic", "random_matrix", "empirical"],
        "master_seed": 7
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_json_str(FIG4).unwrap();
        assert_eq!(cfg.spec.manifold_dim(), 7);
        assert_eq!(cfg.t_values().len(), 30);
        assert_eq!(cfg.probes(), 120);
        assert_eq!(cfg.c, 10.0);
        assert_eq!(cfg.discard, 1);
        assert!(cfg.fresh_dataset_per_rep);
        assert_eq!(cfg.x_star, XStar::Origin);
        let back = ExperimentConfig::from_json_str(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn explicit_grid() {
        let text = FIG4.replace(
            r#"{"min": 0.001, "max": 10.0, "points": 30}"#,
            "[0.01, 0.1, 1.0]",
        );
        let cfg = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(cfg.t_values(), vec![0.01, 0.1, 1.0]);
    }

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_fields() {
        let bad = FIG4.replace("\"master_seed\": 7", "\"master_seed\": 7, \"colour\": 1");
        assert!(field_of(ExperimentConfig::from_json_str(&bad).unwrap_err()) == "config");
        let bad = FIG4.replace("[1000]", "[]");
        assert_eq!(field_of(ExperimentConfig::from_json_str(&bad).unwrap_err()), "N_list");
        let bad = FIG4.replace(r#"{"min": 0.001, "max": 10.0, "points": 30}"#, "[1.0, 0.5]");
        assert_eq!(field_of(ExperimentConfig::from_json_str(&bad).unwrap_err()), "t_grid");
        let bad = FIG4.replace("\"repetitions\": 5", "\"repetitions\": 0");
        assert_eq!(field_of(ExperimentConfig::from_json_str(&bad).unwrap_err()), "repetitions");
        let bad = FIG4.replace("[1000]", "[1]");
        assert_eq!(field_of(ExperimentConfig::from_json_str(&bad).unwrap_err()), "N_list");
        let bad = FIG4.replace("\"variance\": 0.3", "\"variance\": -0.3");
        assert!(ExperimentConfig::from_json_str(&bad).is_err());
    }
}
