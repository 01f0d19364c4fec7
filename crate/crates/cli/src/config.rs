//! Study configuration: one TOML file per study, parsed strictly.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use sensaudit_core::audit::{PseudoScienceThresholds, StudyMetadata};
use sensaudit_core::estimators::{KsAggregate, MIN_RESAMPLES};
use sensaudit_core::{
    BuiltinModel, Distribution, ExternalModel, FactorSet, FactorSpec, ModelRef, Sampler,
};

use crate::error::CliError;

pub const MAX_BASE_SAMPLES: usize = 1 << 24;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study_id: String,
    pub factors: Vec<FactorDecl>,
    pub model: ModelDecl,
    #[serde(default)]
    pub design: DesignDecl,
    #[serde(default)]
    pub estimators: EstimatorDecl,
    #[serde(default)]
    pub metadata: StudyMetadata,
    #[serde(default)]
    pub audit: AuditDecl,
}

/// One factor: `name`, `distribution` and that family's parameters only.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorDecl {
    pub name: String,
    pub distribution: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub mode: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDecl {
    /// `builtin` or `external`.
    pub kind: String,
    pub name: Option<String>,
    pub a: Option<Constant>,
    pub b: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub coefficients: Option<Vec<f64>>,
    pub command: Option<Vec<String>>,
    pub per_row: Option<bool>,
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKindDecl {
    Radial,
    Plain,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDecl {
    /// Pins the design a config is meant for; omitted, each command uses its own.
    pub kind: Option<DesignKindDecl>,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub oat: OatDecl,
}

fn default_n() -> usize {
    1 << 10
}

impl Default for DesignDecl {
    fn default() -> Self {
        DesignDecl {
            kind: None,
            n: default_n(),
            seed: 0,
            sampler: Sampler::Sobol,
            oat: OatDecl::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OatDecl {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_levels() -> usize {
    5
}

fn default_half_width() -> f64 {
    0.5
}

impl Default for OatDecl {
    fn default() -> Self {
        OatDecl {
            levels: default_levels(),
            half_width: default_half_width(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorDecl {
    /// Bootstrap resamples `B`; omitted means no intervals.
    pub bootstrap: Option<usize>,
    #[serde(default = "default_level")]
    pub level: f64,
    pub bins: Option<usize>,
    #[serde(default)]
    pub aggregate: KsAggregate,
    #[serde(default = "yes")]
    pub moment_independent: bool,
}

fn default_level() -> f64 {
    0.95
}

fn yes() -> bool {
    true
}

impl Default for EstimatorDecl {
    fn default() -> Self {
        EstimatorDecl {
            bootstrap: None,
            level: default_level(),
            bins: None,
            aggregate: KsAggregate::Max,
            moment_independent: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditDecl {
    #[serde(default = "default_downplayed")]
    pub downplayed: f64,
    #[serde(default = "default_inflated")]
    pub inflated: f64,
}

fn default_downplayed() -> f64 {
    PseudoScienceThresholds::default().downplayed
}

fn default_inflated() -> f64 {
    PseudoScienceThresholds::default().inflated
}

impl Default for AuditDecl {
    fn default() -> Self {
        AuditDecl {
            downplayed: default_downplayed(),
            inflated: default_inflated(),
        }
    }
}

impl AuditDecl {
    pub fn thresholds(&self) -> PseudoScienceThresholds {
        PseudoScienceThresholds {
            downplayed: self.downplayed,
            inflated: self.inflated,
        }
    }
}

/// A parsed and validated study.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: StudyConfig,
    pub text: String,
    pub factors: FactorSet,
    pub model: ModelRef,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn validate_study_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(config_err(format!(
            "study_id '{id}' must be non-empty and use only letters, digits, '-', '_' or '.'"
        )))
    }
}

impl FactorDecl {
    fn to_spec(&self, index: usize) -> Result<FactorSpec, CliError> {
        let at = format!("factors[{index}] ({})", self.name);
        let offered = [
            ("lo", self.lo.is_some()),
            ("hi", self.hi.is_some()),
            ("mean", self.mean.is_some()),
            ("sd", self.sd.is_some()),
            ("mode", self.mode.is_some()),
            ("values", self.values.is_some()),
        ];
        let keys: &[&str] = match self.distribution.as_str() {
            "uniform" | "log-uniform" => &["lo", "hi"],
            "normal" => &["mean", "sd"],
            "truncated-normal" => &["mean", "sd", "lo", "hi"],
            "triangular" => &["lo", "mode", "hi"],
            "discrete-uniform" => &["values"],
            other => {
                return Err(config_err(format!(
                    "{at}: unknown distribution '{other}' (expected uniform, normal, truncated-normal, \
                     triangular, log-uniform or discrete-uniform)"
                )))
            }
        };
        for (key, present) in offered {
            if present && !keys.contains(&key) {
                return Err(config_err(format!(
                    "{at}: key '{key}' does not apply to {}",
                    self.distribution
                )));
            }
            if !present && keys.contains(&key) {
                return Err(config_err(format!(
                    "{at}: {} needs '{key}'",
                    self.distribution
                )));
            }
        }
        let num = |v: Option<f64>| v.expect("required keys checked above");
        let dist = match self.distribution.as_str() {
            "uniform" => Distribution::Uniform {
                lo: num(self.lo),
                hi: num(self.hi),
            },
            "log-uniform" => Distribution::LogUniform {
                lo: num(self.lo),
                hi: num(self.hi),
            },
            "normal" => Distribution::Normal {
                mean: num(self.mean),
                sd: num(self.sd),
            },
            "truncated-normal" => Distribution::TruncatedNormal {
                mean: num(self.mean),
                sd: num(self.sd),
                lo: num(self.lo),
                hi: num(self.hi),
            },
            "triangular" => Distribution::Triangular {
                lo: num(self.lo),
                mode: num(self.mode),
                hi: num(self.hi),
            },
            _ => Distribution::DiscreteUniform {
                values: self.values.clone().unwrap_or_default(),
            },
        };
        FactorSpec::new(self.name.clone(), dist).map_err(|e| config_err(format!("{at}: {e}")))
    }
}

impl ModelDecl {
    fn to_model(&self, base_dir: &Path, k: usize) -> Result<ModelRef, CliError> {
        let given = [
            ("name", self.name.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("weights", self.weights.is_some()),
            ("coefficients", self.coefficients.is_some()),
            ("command", self.command.is_some()),
            ("per_row", self.per_row.is_some()),
            ("timeout_secs", self.timeout_secs.is_some()),
        ];
        let only = |allowed: &[&str], what: &str| -> Result<(), CliError> {
            match given
                .iter()
                .find(|(key, present)| *present && !allowed.contains(key))
            {
                Some((key, _)) => Err(config_err(format!("model.{key} does not apply to {what}"))),
                None => Ok(()),
            }
        };
        let model = match self.kind.as_str() {
            "builtin" => {
                let name = self
                    .name
                    .as_deref()
                    .ok_or_else(|| config_err("model.name is required for builtin models"))?;
                let scalar_a = || match &self.a {
                    None => Ok(7.0),
                    Some(Constant::Scalar(v)) => Ok(*v),
                    Some(Constant::Vector(_)) => {
                        Err(config_err("model.a must be a number for ishigami"))
                    }
                };
                let builtin = match name {
                    "ishigami" => {
                        only(&["name", "a", "b"], "ishigami")?;
                        BuiltinModel::Ishigami {
                            a: scalar_a()?,
                            b: self.b.unwrap_or(0.1),
                        }
                    }
                    "sobol_g" => {
                        only(&["name", "a"], "sobol_g")?;
                        match &self.a {
                            Some(Constant::Vector(a)) => BuiltinModel::SobolG { a: a.clone() },
                            _ => {
                                return Err(config_err(
                                    "model.a must be a list of coefficients for sobol_g",
                                ))
                            }
                        }
                    }
                    "linear_additive" => {
                        only(&["name", "weights"], "linear_additive")?;
                        BuiltinModel::LinearAdditive {
                            weights: self.weights.clone().unwrap_or_else(|| vec![1.0; k]),
                        }
                    }
                    "pure_interaction" => {
                        only(&["name"], "pure_interaction")?;
                        BuiltinModel::PureInteraction
                    }
                    "polynomial" => {
                        only(&["name", "coefficients"], "polynomial")?;
                        BuiltinModel::Polynomial {
                            coefficients: self.coefficients.clone().ok_or_else(|| {
                                config_err("model.coefficients is required for polynomial")
                            })?,
                        }
                    }
                    other => {
                        return Err(config_err(format!(
                            "model.name: unknown builtin model '{other}'"
                        )))
                    }
                };
                builtin
                    .validate(k)
                    .map_err(|e| config_err(format!("model: {e}")))?;
                ModelRef::Builtin(builtin)
            }
            "external" => {
                only(&["command", "per_row", "timeout_secs"], "external models")?;
                let mut command = self
                    .command
                    .clone()
                    .filter(|c| !c.is_empty() && !c[0].is_empty())
                    .ok_or_else(|| config_err("model.command must be a non-empty list"))?;
                // Program paths with a directory part are relative to the config file.
                let program = Path::new(&command[0]);
                if program.components().count() > 1 {
                    let resolved = if program.is_relative() {
                        base_dir.join(program)
                    } else {
                        program.to_path_buf()
                    };
                    if !resolved.exists() {
                        return Err(config_err(format!(
                            "model.command: {} does not exist",
                            resolved.display()
                        )));
                    }
                    command[0] = resolved.to_string_lossy().into_owned();
                }
                if let Some(t) = self.timeout_secs {
                    if !(t > 0.0 && t.is_finite()) {
                        return Err(config_err(format!(
                            "model.timeout_secs must be positive, got {t}"
                        )));
                    }
                }
                // The io directory is set per command inside the study directory.
                let mut ext = ExternalModel::new(command, PathBuf::new());
                ext.per_row = self.per_row.unwrap_or(false);
                ext.timeout_secs = self.timeout_secs;
                ModelRef::External(ext)
            }
            other => {
                return Err(config_err(format!(
                    "model.kind must be 'builtin' or 'external', got '{other}'"
                )))
            }
        };
        Ok(model)
    }
}

impl Study {
    pub fn load(path: &Path) -> Result<Study, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let config: StudyConfig =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        validate_study_id(&config.study_id)?;
        if config.factors.is_empty() {
            return Err(config_err("factors: at least one factor is required"));
        }
        let specs = config
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| f.to_spec(i))
            .collect::<Result<Vec<_>, _>>()?;
        let factors = FactorSet::new(specs).map_err(|e| config_err(format!("factors: {e}")))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        let model = config.model.to_model(base_dir, factors.k())?;
        validate_design(&config.design)?;
        validate_estimators(&config.estimators)?;
        validate_audit(&config.audit)?;
        Ok(Study {
            config,
            text,
            factors,
            model,
        })
    }
}

fn validate_design(d: &DesignDecl) -> Result<(), CliError> {
    if d.n < 2 || d.n > MAX_BASE_SAMPLES {
        return Err(config_err(format!(
            "design.N must be between 2 and {MAX_BASE_SAMPLES}, got {}",
            d.n
        )));
    }
    if d.oat.levels < 2 {
        return Err(config_err(format!(
            "design.oat.levels must be at least 2, got {}",
            d.oat.levels
        )));
    }
    if !(d.oat.half_width > 0.0 && d.oat.half_width <= 0.5) {
        return Err(config_err(format!(
            "design.oat.half_width must be in (0, 0.5], got {}",
            d.oat.half_width
        )));
    }
    Ok(())
}

fn validate_estimators(e: &EstimatorDecl) -> Result<(), CliError> {
    if let Some(b) = e.bootstrap {
        if !(MIN_RESAMPLES..=100_000).contains(&b) {
            return Err(config_err(format!(
                "estimators.bootstrap must be between {MIN_RESAMPLES} and 100000, got {b}"
            )));
        }
    }
    if !(e.level > 0.0 && e.level < 1.0) {
        return Err(config_err(format!(
            "estimators.level must be in (0, 1), got {}",
            e.level
        )));
    }
    if let Some(bins) = e.bins {
        if bins < 2 {
            return Err(config_err(format!(
                "estimators.bins must be at least 2, got {bins}"
            )));
        }
    }
    Ok(())
}

fn validate_audit(a: &AuditDecl) -> Result<(), CliError> {
    if !(a.downplayed > 0.0 && a.downplayed < a.inflated && a.inflated.is_finite()) {
        return Err(config_err(format!(
            "audit thresholds need 0 < downplayed < inflated, got {} and {}",
            a.downplayed, a.inflated
        )));
    }
    Ok(())
}
