//! Run configuration: a flat `key = value` file with `[model]`, `[task]`
//! and `[output]` sections.
//!
//! ```text
//! [model]
//! family = lorentzian
//! lambda = 0.1
//! bandwidth = 1
//! omega_a = 10
//!
//! [task]
//! tau_min = 1e-4
//! tau_max = 50
//! tau_points = 400
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::CliError;
use crate::formfactor::{Family, FormFactor};

const SECTIONS: [&str; 3] = ["model", "task", "output"];
const LIST_KEYS: [&str; 3] = ["shape_params", "methods", "omega_ratios"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    /// Ignored for tabulated form factors, whose coupling follows from the table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// `p, q` of the threshold power law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_params: Option<Vec<f64>>,
    /// Two-column `omega, g2` CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

fn config_error(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {msg}"))
}

fn scalar(raw: &str, line: usize) -> Result<Value, CliError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(config_error(line, "empty value"));
    }
    if let Some(inner) = raw.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return Ok(Value::String(inner.to_string()));
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Ok(Value::Number(i.into()));
    }
    if let Ok(x) = raw.parse::<f64>() {
        return Number::from_f64(x)
            .filter(|_| x.is_finite())
            .map(Value::Number)
            .ok_or_else(|| config_error(line, format!("`{raw}` is not a finite number")));
    }
    Ok(Value::String(raw.to_string()))
}

/// Parses the text form into the generic section/key tree.
pub fn parse_tree(text: &str) -> Result<Value, CliError> {
    let mut root = Map::new();
    let mut current: Option<String> = None;
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(config_error(line, format!("unknown section [{name}]")));
            }
            if root.contains_key(name) {
                return Err(config_error(line, format!("section [{name}] repeated")));
            }
            root.insert(name.to_string(), Value::Object(Map::new()));
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(line, format!("expected `key = value`, got `{content}`")));
        };
        let key = key.trim();
        let Some(section) = &current else {
            return Err(config_error(line, format!("key `{key}` outside any section")));
        };
        if !seen.insert((section.clone(), key.to_string())) {
            return Err(config_error(line, format!("key `{key}` repeated in [{section}]")));
        }
        let value = if LIST_KEYS.contains(&key) {
            Value::Array(value.split(',').map(|v| scalar(v, line)).collect::<Result<_, _>>()?)
        } else {
            scalar(value, line)?
        };
        if let Some(Value::Object(map)) = root.get_mut(section) {
            map.insert(key.to_string(), value);
        }
    }
    Ok(Value::Object(root))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_value(parse_tree(text)?)
    }

    /// Validates a JSON rendering of a config, as echoed in summaries.
    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        let t = &self.task;
        let numbers = [
            m.lambda,
            Some(m.bandwidth),
            m.omega_a,
            m.threshold,
            t.t_min,
            t.t_max,
            t.tau_min,
            t.tau_max,
            t.tolerance,
        ];
        let lists = [m.shape_params.as_deref(), t.omega_ratios.as_deref()];
        let all_finite = numbers.iter().flatten().all(|x| x.is_finite())
            && lists.iter().flatten().all(|l| l.iter().all(|x| x.is_finite()));
        if !all_finite {
            return Err(CliError::Config("all numeric fields must be finite".into()));
        }
        if let Some(methods) = &t.methods {
            if let Some(bad) = methods.iter().find(|s| !matches!(s.as_str(), "closed_form" | "spectral" | "pole")) {
                return Err(CliError::Config(format!(
                    "unknown method `{bad}` (expected closed_form, spectral or pole)"
                )));
            }
        }
        if m.family != Family::Tabulated && m.lambda.is_none() {
            return Err(CliError::Config("model.lambda is required".into()));
        }
        Ok(())
    }

    /// Builds the form factor; `base` resolves a relative table path.
    pub fn form_factor(&self, base: &Path) -> Result<FormFactor, CliError> {
        let m = &self.model;
        let ff = match m.family {
            Family::Lorentzian => FormFactor::lorentzian(m.lambda.unwrap_or_default(), m.bandwidth)?,
            Family::ThresholdPowerLaw => {
                let Some([p, q]) = m.shape_params.as_deref().and_then(|s| <[f64; 2]>::try_from(s).ok()) else {
                    return Err(CliError::Config("threshold_power_law needs shape_params = p, q".into()));
                };
                FormFactor::threshold_power_law(m.lambda.unwrap_or_default(), m.bandwidth, m.threshold.unwrap_or(0.0), p, q)?
            }
            Family::Tabulated => {
                let Some(table) = &m.table else {
                    return Err(CliError::Config("tabulated family needs model.table".into()));
                };
                FormFactor::tabulated(m.bandwidth, &read_table(&self.table_path(base, table))?)?
            }
        };
        Ok(ff)
    }

    pub fn table_path(&self, base: &Path, table: &str) -> PathBuf {
        base.join(table)
    }

    pub fn omega_a(&self) -> Result<f64, CliError> {
        self.model
            .omega_a
            .ok_or_else(|| CliError::Config("model.omega_a is required for this command".into()))
    }
}

/// Reads `omega, g2` rows; a non-numeric first row is taken as a header.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [w, g] => w.parse::<f64>().ok().zip(g.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((w, g)) if w.is_finite() && g.is_finite() => rows.push((w, g)),
            None if rows.is_empty() && idx == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{}: line {}: expected two finite numbers",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# comment
[model]
family = lorentzian
lambda = 0.1
bandwidth = 1
omega_a = 10   # inline

[task]
tau_points = 64
omega_ratios = 0, 0.5, 2
methods = closed_form, pole

[output]
dir = \"out dir\"
";

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.model.family, Family::Lorentzian);
        assert_eq!(cfg.model.omega_a, Some(10.0));
        assert_eq!(cfg.task.tau_points, Some(64));
        assert_eq!(cfg.task.omega_ratios, Some(vec![0.0, 0.5, 2.0]));
        assert_eq!(cfg.output.dir.as_deref(), Some("out dir"));
    }

    #[test]
    fn json_round_trip() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let back = RunConfig::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_typos_and_non_finite() {
        let typo = SAMPLE.replace("lambda", "lamda");
        assert!(matches!(RunConfig::parse(&typo), Err(CliError::Config(_))));
        let inf = SAMPLE.replace("omega_a = 10", "omega_a = inf");
        assert!(matches!(RunConfig::parse(&inf), Err(CliError::Config(_))));
        let nan = SAMPLE.replace("0, 0.5, 2", "0, NaN");
        assert!(RunConfig::parse(&nan).is_err());
        assert!(RunConfig::parse("lambda = 1").is_err());
        assert!(RunConfig::parse("[model]\n[model]").is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("[output]", "[outputs]")).is_err());
        assert!(RunConfig::parse(&SAMPLE.replace("closed_form, pole", "closed")).is_err());
    }
}
