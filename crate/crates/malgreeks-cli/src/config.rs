//! Experiment configuration: a flat JSON document with every default
//! explicit, overridable field by field from command-line flags.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use malgreeks::greeks::{EstimatorConfig, FdConfig, Greek, Method, Payoff};
use malgreeks::malliavin::{Backend, Region, WeightKernel};
use malgreeks::model::{validate_model, Convention, ModelConfig, ModelSpec, ValidationBox};
use malgreeks::WeightMode;

/// A model referred to by built-in name, file path, or inline document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(ModelConfig),
    Name(String),
}

impl Default for ModelRef {
    fn default() -> Self {
        ModelRef::Name("bs".to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelRef,
    pub payoff: String,
    pub strike: f64,
    pub greeks: Vec<String>,
    pub methods: Vec<String>,
    pub backend: Backend,
    pub mode: WeightMode,
    pub region: Region,
    pub convention: Convention,
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
    pub discount: bool,
    pub antithetic: bool,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub u: WeightKernel,
    pub fd: FdConfig,
    pub out: Option<PathBuf>,
    pub format: String,
    pub dump_paths: Option<PathBuf>,
    pub dump_malliavin: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelRef::default(),
            payoff: "call".to_string(),
            strike: 100.0,
            greeks: vec!["delta".to_string()],
            methods: vec!["malliavin".to_string()],
            backend: Backend::default(),
            mode: WeightMode::default(),
            region: Region::default(),
            convention: Convention::default(),
            n_paths: 100_000,
            n_steps: 64,
            seed: 1,
            discount: true,
            antithetic: false,
            workers: 0,
            u: WeightKernel::default(),
            fd: FdConfig::default(),
            out: None,
            format: "csv".to_string(),
            dump_paths: None,
            dump_malliavin: None,
        }
    }
}

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn engine(message: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<malgreeks::EngineError> for CliError {
    fn from(e: malgreeks::EngineError) -> Self {
        match e {
            malgreeks::EngineError::Config { .. } => CliError::config(e.to_string()),
            other => CliError::engine(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Built-in models with the reference parameter sets.
fn builtin_model(name: &str) -> Option<(ModelSpec, &'static str)> {
    match name {
        "bs" | "bs_constant" => Some((ModelSpec::bs_constant(100.0, 0.2, 0.05), "bs_constant")),
        "scott" | "scott_exp" => Some((
            ModelSpec::scott_exp(100.0, 0.0, 0.2, 0.3, -0.5, 0.05, 0.05, -0.2, 0.0),
            "scott_exp",
        )),
        _ => None,
    }
}

/// A fully validated run description.
#[derive(Debug)]
pub struct ResolvedConfig {
    pub raw: ExperimentConfig,
    pub model: ModelSpec,
    pub model_name: String,
    pub payoff: Payoff,
    pub greeks: Vec<Greek>,
    pub methods: Vec<Method>,
    pub estimator: EstimatorConfig,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::config(format!("config error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(self) -> Result<ResolvedConfig, CliError> {
        if self.n_paths == 0 {
            return Err(CliError::config("config error in `n_paths`: must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(CliError::config("config error in `n_steps`: must be >= 1"));
        }
        let format = match self.format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(CliError::config(format!(
                    "config error in `format`: `{other}` is not csv or json"
                )))
            }
        };
        let (model, model_name) = match &self.model {
            ModelRef::Name(name) => match builtin_model(name) {
                Some((m, n)) => (m, n.to_string()),
                None => {
                    // treat the string as a path to a model document, or
                    // inline JSON when it starts with '{'
                    let text = if name.trim_start().starts_with('{') {
                        name.clone()
                    } else {
                        std::fs::read_to_string(name).map_err(|e| {
                            CliError::config(format!(
                                "config error in `model`: `{name}` is not a built-in \
                                 (bs, scott) and could not be read as a file: {e}"
                            ))
                        })?
                    };
                    let cfg = ModelConfig::from_json(&text)
                        .map_err(|e| CliError::config(e.to_string()))?;
                    (cfg.build(), cfg.name().to_string())
                }
            },
            ModelRef::Inline(cfg) => (cfg.build(), cfg.name().to_string()),
        };
        if model.x0 <= 0.0 {
            return Err(CliError::config("config error in `model.x0`: must be positive"));
        }
        if model.maturity <= 0.0 {
            return Err(CliError::config(
                "config error in `model.maturity`: must be positive",
            ));
        }
        let sample_box = ValidationBox::new((0.0, model.maturity), (model.y0 - 3.0, model.y0 + 3.0));
        let report = validate_model(&model, &sample_box);
        if !report.pass {
            return Err(CliError::config(format!(
                "config error in `model`: validation failed: {}",
                serde_json::to_string(&report).unwrap_or_default()
            )));
        }

        let payoff = Payoff::parse(&self.payoff, self.strike).map_err(CliError::from)?;
        if self.greeks.is_empty() {
            return Err(CliError::config("config error in `greeks`: list is empty"));
        }
        if self.methods.is_empty() {
            return Err(CliError::config("config error in `methods`: list is empty"));
        }
        let greeks = self
            .greeks
            .iter()
            .map(|g| Greek::parse(g).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let methods = self
            .methods
            .iter()
            .map(|m| {
                let parsed = Method::parse(m).map_err(CliError::from)?;
                // the mode flag promotes plain `malliavin` rows
                Ok(match (parsed, self.mode) {
                    (Method::Malliavin, WeightMode::PaperLiteral) => {
                        Method::MalliavinPaperLiteral
                    }
                    (other, _) => other,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        let estimator = EstimatorConfig {
            n_paths: self.n_paths,
            n_steps: self.n_steps,
            seed: self.seed,
            discount: self.discount,
            antithetic: self.antithetic,
            backend: self.backend,
            region: self.region,
            convention: self.convention,
            fd: self.fd,
        };
        Ok(ResolvedConfig {
            raw: self,
            model,
            model_name,
            payoff,
            greeks,
            methods,
            estimator,
            format,
        })
    }
}
