//! Experiment spec files.
//!
//! ```json
//! {
//!   "datasets": [
//!     { "name": "haberman", "path": "../data/uci/haberman.csv", "label_column": "Class" }
//!   ],
//!   "grid": [
//!     { "scheme": "none", "strategy": "baseline", "trees": [50, 100] },
//!     { "scheme": "1-wsqrt", "strategy": "weighted-split", "eta": 0.95, "trees": [50, 100] }
//!   ],
//!   "repetitions": 50,
//!   "base_seed": 1,
//!   "output_dir": "results"
//! }
//! ```
//!
//! Dataset paths are resolved against the directory holding the spec file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use awdf::cascade::EarlyStop;
use awdf::{CascadeConfig, LabelColumn, Strategy, WeightScheme};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default = "default_true")]
    pub has_header: bool,
}

fn default_true() -> bool {
    true
}

impl DatasetEntry {
    pub fn label(&self) -> LabelColumn {
        self.label_column
            .as_deref()
            .map_or(LabelColumn::Last, LabelColumn::parse)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub eta: Option<f64>,
    pub trees: Vec<usize>,
}

fn default_scheme() -> String {
    "none".into()
}

fn default_strategy() -> String {
    "baseline".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub datasets: Vec<DatasetEntry>,
    pub grid: Vec<GridEntry>,
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub settings: Settings,
}

/// Cascade settings shared by every grid cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub forests_per_level: usize,
    /// Zero disables cross-fitting.
    pub crossfit_k: usize,
    pub max_levels: usize,
    pub early_stop: String,
    pub patience: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let d = CascadeConfig::default();
        Settings {
            forests_per_level: d.forests_per_level,
            crossfit_k: d.crossfit_k.unwrap_or(0),
            max_levels: d.max_levels,
            early_stop: "holdout".into(),
            patience: d.early_stop_patience,
        }
    }
}

/// Strategy names as written on the command line and in spec files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyName(pub Strategy);

impl FromStr for StrategyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "baseline" | "none" => Ok(StrategyName(Strategy::Baseline)),
            "resample" => Ok(StrategyName(Strategy::Resample)),
            "weighted-split" => Ok(StrategyName(Strategy::WeightedSplit)),
            other => Err(format!(
                "unknown strategy '{other}' (expected baseline, resample or weighted-split)"
            )),
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            Strategy::Baseline => "baseline",
            Strategy::Resample => "resample",
            Strategy::WeightedSplit => "weighted-split",
        })
    }
}

pub fn parse_scheme(s: &str) -> Result<Option<WeightScheme>, String> {
    if s.trim().eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    s.parse::<WeightScheme>().map(Some).map_err(|e| e.to_string())
}

pub fn parse_early_stop(s: &str) -> Result<EarlyStop, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "holdout" => Ok(EarlyStop::Holdout { fraction: 0.2 }),
        "crossfit" | "cross-fit" => Ok(EarlyStop::CrossFit),
        "off" | "none" | "disabled" => Ok(EarlyStop::Disabled),
        other => Err(format!(
            "unknown early-stop mode '{other}' (expected holdout, crossfit or off)"
        )),
    }
}

/// One configuration of the grid, without the tree count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigCell {
    pub scheme: Option<WeightScheme>,
    pub strategy: Strategy,
    pub eta: Option<f64>,
    pub trees: Vec<usize>,
}

impl ConfigCell {
    pub fn scheme_name(&self) -> String {
        self.scheme.map_or_else(|| "none".into(), |s| s.to_string())
    }

    pub fn strategy_name(&self) -> String {
        StrategyName(self.strategy).to_string()
    }

    pub fn eta_text(&self) -> String {
        self.eta.map_or_else(String::new, |e| e.to_string())
    }

    pub fn is_baseline(&self) -> bool {
        self.scheme.is_none()
    }

    /// Short column label: "gcF" for the unweighted cascade, else the scheme.
    pub fn short_label(&self) -> String {
        match self.scheme {
            None => "gcF".into(),
            Some(s) => s.to_string(),
        }
    }

    pub fn long_label(&self) -> String {
        let mut label = format!("{}/{}", self.scheme_name(), self.strategy_name());
        if let Some(eta) = self.eta {
            label.push_str(&format!("/eta={eta}"));
        }
        label
    }

    pub fn cascade_config(&self, settings: &Settings, trees: usize) -> Result<CascadeConfig, String> {
        let cfg = CascadeConfig {
            forests_per_level: settings.forests_per_level,
            trees_per_forest: trees,
            weight_scheme: self.scheme,
            strategy: self.strategy,
            eta: self.eta,
            max_levels: settings.max_levels,
            early_stop: parse_early_stop(&settings.early_stop)?,
            early_stop_patience: settings.patience,
            crossfit_k: (settings.crossfit_k != 0).then_some(settings.crossfit_k),
            ..CascadeConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

impl ExperimentSpec {
    pub fn from_path(path: &Path) -> Result<ExperimentSpec, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut spec.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        spec.check()?;
        Ok(spec)
    }

    /// Structural checks that need no file access.
    pub fn check(&self) -> Result<(), String> {
        if self.datasets.is_empty() {
            return Err("spec lists no datasets".into());
        }
        if self.grid.is_empty() {
            return Err("spec grid is empty".into());
        }
        if self.repetitions == 0 {
            return Err("repetitions must be at least 1".into());
        }
        let cells = self.cells()?;
        for c in &cells {
            for &t in &c.trees {
                c.cascade_config(&self.settings, t)?;
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Result<Vec<ConfigCell>, String> {
        self.grid
            .iter()
            .map(|g| {
                if g.trees.is_empty() || g.trees.contains(&0) {
                    return Err(format!("grid entry {} needs positive tree counts", g.scheme));
                }
                Ok(ConfigCell {
                    scheme: parse_scheme(&g.scheme)?,
                    strategy: g.strategy.parse::<StrategyName>()?.0,
                    eta: g.eta,
                    trees: g.trees.clone(),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(grid: &str) -> String {
        format!(r#"{{"datasets":[{{"name":"t","path":"t.csv"}}],"grid":[{grid}],"repetitions":1,"output_dir":"out"}}"#)
    }

    #[test]
    fn parses_minimal_spec() {
        let spec: ExperimentSpec =
            serde_json::from_str(&minimal(r#"{"scheme":"none","strategy":"baseline","trees":[5]}"#)).unwrap();
        spec.check().unwrap();
        assert_eq!(spec.settings.crossfit_k, 3);
        assert_eq!(spec.datasets[0].label(), LabelColumn::Last);
    }

    #[test]
    fn rejects_scheme_with_baseline() {
        let spec: ExperimentSpec =
            serde_json::from_str(&minimal(r#"{"scheme":"1-w","strategy":"baseline","trees":[5]}"#)).unwrap();
        assert!(spec.check().is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = minimal(r#"{"scheme":"none","trees":[5],"colour":"red"}"#);
        assert!(serde_json::from_str::<ExperimentSpec>(&text).is_err());
    }

    #[test]
    fn strategy_names() {
        for s in ["baseline", "resample", "weighted-split"] {
            assert_eq!(s.parse::<StrategyName>().unwrap().to_string(), s);
        }
        assert!("bagging".parse::<StrategyName>().is_err());
    }
}
