//! Run configuration: parsing, validation and the canonical hash.

use std::fmt;

use bslab_core::measure::{MeasureDescriptor, Rect};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    GammaSweep,
    BoundState,
    Cmu,
    Eigenfunction,
    KatoCheck,
    Perturbation,
    Convergence,
    NormLimit,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::GammaSweep => "gamma_sweep",
            CommandName::BoundState => "bound_state",
            CommandName::Cmu => "cmu",
            CommandName::Eigenfunction => "eigenfunction",
            CommandName::KatoCheck => "kato_check",
            CommandName::Perturbation => "perturbation",
            CommandName::Convergence => "convergence",
            CommandName::NormLimit => "norm_limit",
        }
    }
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: String,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KList {
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaList {
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoParameters {}

fn default_grid() -> usize {
    128
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenfunctionParameters {
    pub alpha: f64,
    #[serde(default = "default_grid")]
    pub nx: usize,
    #[serde(default = "default_grid")]
    pub ny: usize,
    /// Defaults to a box of half-width `8/k` plus the support radius.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub region: Option<Rect>,
}

fn default_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatoParameters {
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

fn default_levels() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParameters {
    pub k: f64,
    /// Number of resolutions, each twice the previous one.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Parameters {
    GammaSweep(KList),
    BoundState(AlphaList),
    Cmu(NoParameters),
    Eigenfunction(EigenfunctionParameters),
    KatoCheck(KatoParameters),
    Perturbation(KList),
    Convergence(ConvergenceParameters),
    NormLimit(AlphaList),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub measure: MeasureDescriptor,
    pub command: CommandName,
    pub parameters: Parameters,
    pub output: OutputSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    measure: MeasureDescriptor,
    command: CommandName,
    #[serde(default)]
    parameters: Option<Value>,
    output: OutputSpec,
}

#[derive(Serialize)]
struct Canonical<'a> {
    measure: &'a MeasureDescriptor,
    command: CommandName,
    parameters: &'a Parameters,
    format: Format,
}

fn typed<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("parameters: {e}")))
}

impl RunConfig {
    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let params = raw.parameters.unwrap_or_else(|| Value::Object(Default::default()));
        let parameters = match raw.command {
            CommandName::GammaSweep => Parameters::GammaSweep(typed(params)?),
            CommandName::BoundState => Parameters::BoundState(typed(params)?),
            CommandName::Cmu => Parameters::Cmu(typed(params)?),
            CommandName::Eigenfunction => Parameters::Eigenfunction(typed(params)?),
            CommandName::KatoCheck => Parameters::KatoCheck(typed(params)?),
            CommandName::Perturbation => Parameters::Perturbation(typed(params)?),
            CommandName::Convergence => Parameters::Convergence(typed(params)?),
            CommandName::NormLimit => Parameters::NormLimit(typed(params)?),
        };
        let config = RunConfig { measure: raw.measure, command: raw.command, parameters, output: raw.output };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        fn list(name: &str, v: &[f64]) -> Result<(), CliError> {
            if v.is_empty() {
                return Err(CliError::Config(format!("parameters.{name}: list must be nonempty")));
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(CliError::Config(format!("parameters.{name}: {x} is not a positive number")));
            }
            Ok(())
        }
        fn positive(name: &str, x: f64) -> Result<(), CliError> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("parameters.{name}: {x} is not a positive number")))
            }
        }
        if self.output.path.is_empty() {
            return Err(CliError::Config("output.path: must be nonempty".into()));
        }
        match &self.parameters {
            Parameters::GammaSweep(p) | Parameters::Perturbation(p) => list("k", &p.k),
            Parameters::BoundState(p) | Parameters::NormLimit(p) => list("alpha", &p.alpha),
            Parameters::Cmu(_) => Ok(()),
            Parameters::Eigenfunction(p) => {
                positive("alpha", p.alpha)?;
                if p.nx < 2 || p.ny < 2 {
                    return Err(CliError::Config("parameters.nx, ny: need at least 2".into()));
                }
                match p.region {
                    Some(r) if !(r.x_max > r.x_min && r.y_max > r.y_min) => {
                        Err(CliError::Config("parameters.box: empty rectangle".into()))
                    }
                    _ => Ok(()),
                }
            }
            Parameters::KatoCheck(p) => list("eps", &p.eps),
            Parameters::Convergence(p) => {
                positive("k", p.k)?;
                if p.levels < 2 {
                    return Err(CliError::Config("parameters.levels: need at least 2".into()));
                }
                Ok(())
            }
        }
    }

    /// SHA-256 of the typed config with the output path left out, so equal
    /// runs written to different files share a hash.
    pub fn hash(&self) -> String {
        let canonical = Canonical {
            measure: &self.measure,
            command: self.command,
            parameters: &self.parameters,
            format: self.output.format,
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "measure": {"type": "circle", "r": 1.0, "n": 64},
        "command": "bound_state",
        "parameters": {"alpha": [0.4, 0.2]},
        "output": {"path": "out.csv", "format": "csv"}
    }"#;

    #[test]
    fn parses_and_hashes() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.command, CommandName::BoundState);
        let moved = BASE.replace("out.csv", "elsewhere.csv");
        assert_eq!(c.hash(), RunConfig::from_json(&moved).unwrap().hash());
        let changed = BASE.replace("0.2]", "0.1]");
        assert_ne!(c.hash(), RunConfig::from_json(&changed).unwrap().hash());
        let finer = BASE.replace("64", "128");
        assert_ne!(c.hash(), RunConfig::from_json(&finer).unwrap().hash());
        let json = BASE.replace("\"csv\"}", "\"json\"}");
        assert_ne!(c.hash(), RunConfig::from_json(&json).unwrap().hash());
        // whitespace and key order are not semantic
        let compact = r#"{"output":{"format":"csv","path":"x"},"command":"bound_state","parameters":{"alpha":[0.4,0.2]},"measure":{"n":64,"r":1,"type":"circle"}}"#;
        assert_eq!(c.hash(), RunConfig::from_json(compact).unwrap().hash());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let unknown = BASE.replace("\"command\"", "\"colour\": 1, \"command\"");
        assert!(RunConfig::from_json(&unknown).is_err());
        let extra = BASE.replace("[0.4, 0.2]", "[0.4], \"beta\": 2");
        let err = RunConfig::from_json(&extra).unwrap_err().to_string();
        assert!(err.contains("beta"), "{err}");
        assert!(RunConfig::from_json(&BASE.replace("[0.4, 0.2]", "[]")).is_err());
        assert!(RunConfig::from_json(&BASE.replace("0.4", "-0.4")).is_err());
        assert!(RunConfig::from_json(&BASE.replace("bound_state", "warp")).is_err());
        let bad_json = RunConfig::from_json("{\n\"measure\": ,\n}").unwrap_err().to_string();
        assert!(bad_json.contains("line 2"), "{bad_json}");
    }

    #[test]
    fn defaults_fill_in() {
        let kato = BASE.replace("bound_state", "kato_check").replace("\"alpha\": [0.4, 0.2]", "");
        let c = RunConfig::from_json(&kato).unwrap();
        assert_eq!(c.parameters, Parameters::KatoCheck(KatoParameters { eps: default_eps() }));
        let cmu = r#"{"measure":{"type":"circle","r":1.0,"n":8},"command":"cmu","output":{"path":"a","format":"json"}}"#;
        assert!(RunConfig::from_json(cmu).is_ok());
    }
}
