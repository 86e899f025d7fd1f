//! Run configuration: flags first, then a TOML file whose keys override
//! them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use semiwave_core::evolution::EvolutionOptions;
use semiwave_core::profile::ProfileOptions;
use semiwave_core::verify::{synthetic_ub_violator, VerifyOptions};
use semiwave_core::{Model, ModelSpec, Smoothness};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEMIWAVE_OUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `kpp`, `nicholson`, `may`, `custom` or `synthetic_ub`.
    pub name: Option<String>,
    pub h: Option<f64>,
    pub p: Option<f64>,
    pub z: Option<f64>,
    pub k: Option<f64>,
    /// Custom models only.
    pub expr: Option<String>,
    pub q: Option<f64>,
    pub atoms: Option<Vec<[f64; 2]>>,
    pub kappa: Option<f64>,
    pub params: BTreeMap<String, f64>,
    pub smoothness: Option<Smoothness>,
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model, CliError> {
        let name = self.name.as_deref().ok_or_else(|| CliError::Config("missing model name (--model)".into()))?;
        let need = |v: Option<f64>, what: &str| v.ok_or_else(|| CliError::Config(format!("model {name} needs {what}")));
        let h = self.h.unwrap_or(if name == "synthetic_ub" { 0.0 } else { 1.0 });
        let spec = match name {
            "kpp" => ModelSpec::Kpp { h },
            "nicholson" => ModelSpec::Nicholson { h, p: need(self.p, "p")? },
            "may" => ModelSpec::May { h, p: need(self.p, "p")?, z: need(self.z, "z")?, k: need(self.k, "k")? },
            "custom" => ModelSpec::Custom {
                name: "custom".into(),
                h,
                expr: self.expr.clone().ok_or_else(|| CliError::Config("custom model needs expr".into()))?,
                q: self.q.unwrap_or(0.0),
                atoms: self.atoms.clone().ok_or_else(|| CliError::Config("custom model needs atoms".into()))?,
                kappa: need(self.kappa, "kappa")?,
                params: self.params.clone(),
                smoothness: None,
            },
            "synthetic_ub" => return Ok(synthetic_ub_violator()),
            other => return Err(CliError::Config(format!("unknown model {other:?}"))),
        };
        let m = spec.build().map_err(|e| CliError::Config(e.to_string()))?;
        match self.smoothness {
            Some(s) => m.with_smoothness(s).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(m),
        }
    }
}

/// A speed given as a number or as `"critical"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeedChoice {
    Value(f64),
    Named(Critical),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Critical {
    Critical,
}

/// Rectangle of the `zeros` command; unset edges default to the dominance
/// rectangle `[λ₁ - 1e-3, λ₂ + 1e-3] × [-50, 50]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZerosConfig {
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Number of initial guesses for the uniqueness harness; 0 skips it.
    pub seeds: usize,
    /// Speed above `c*` used for profile diagnostics when no speed is set.
    pub speed_margin: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let d = VerifyOptions::default();
        Self { samples: d.samples, seed: d.seed, epsilon: d.epsilon, seeds: 0, speed_margin: 0.5 }
    }
}

impl VerifyConfig {
    pub fn checks(&self) -> VerifyOptions {
        VerifyOptions { samples: self.samples, seed: self.seed, epsilon: self.epsilon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, svg: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub c: Option<SpeedChoice>,
    pub profile: ProfileOptions,
    pub zeros: ZerosConfig,
    pub verify: VerifyConfig,
    pub evolve: EvolutionOptions,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Output directory: config or flag, then the environment, then `.`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Whether an output directory was asked for explicitly.
    pub fn out_dir_requested(&self) -> bool {
        self.output.dir.is_some() || std::env::var_os(OUT_DIR_ENV).is_some()
    }

    /// Lays the keys of a TOML file over `self`.
    pub fn overlay_file(self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.overlay_str(&text)
    }

    pub fn overlay_str(self, text: &str) -> Result<Self, CliError> {
        let top: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config: {e}")))?;
        let mut base = toml::Table::try_from(&self).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, top);
        toml::Value::Table(base).try_into().map_err(|e| CliError::Config(format!("config: {e}")))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_keys_override_flags() {
        let mut cfg = RunConfig::default();
        cfg.model.name = Some("kpp".into());
        cfg.model.h = Some(0.3);
        cfg.profile.tol = 1e-6;
        let cfg = cfg
            .overlay_str(
                r#"
                c = "critical"
                [model]
                h = 1.5
                [profile]
                dt = 0.01
                "#,
            )
            .unwrap();
        assert_eq!(cfg.model.name.as_deref(), Some("kpp"));
        assert_eq!(cfg.model.h, Some(1.5));
        assert_eq!(cfg.profile.tol, 1e-6);
        assert_eq!(cfg.profile.dt, 0.01);
        assert_eq!(cfg.c, Some(SpeedChoice::Named(Critical::Critical)));
    }

    #[test]
    fn custom_model_from_toml() {
        let cfg = RunConfig::default()
            .overlay_str(
                r#"
                [model]
                name = "custom"
                h = 1.0
                expr = "u(0)*(1-u(-h))"
                atoms = [[0.0, 1.0]]
                kappa = 1.0
                [model.smoothness]
                K = 1.0
                alpha = 1.0
                delta = 0.5
                "#,
            )
            .unwrap();
        let m = cfg.model.build().unwrap();
        assert_eq!(m.smoothness().delta, 0.5);
        assert_eq!(m.f_star(0.5), 0.25);
    }

    #[test]
    fn unknown_keys_and_models_are_rejected() {
        assert!(RunConfig::default().overlay_str("[profile]\nbogus = 1").is_err());
        let cfg =
            RunConfig { model: ModelConfig { name: Some("nope".into()), ..Default::default() }, ..Default::default() };
        assert!(cfg.model.build().is_err());
        assert!(RunConfig::default().model.build().is_err());
    }

    #[test]
    fn config_round_trips() {
        let cfg = RunConfig { c: Some(SpeedChoice::Value(2.5)), ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::default().overlay_str(&text).unwrap(), cfg);
    }
}
