//! Experiment configuration: a sectioned TOML schema with defaults for every
//! block, dotted-path overrides, exhaustive validation and a content hash
//! that every output file carries for provenance.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inequalities::TestFieldSpec;
use crate::model::{Parameters, SteadyState};
use crate::solver::{ModeSpec, Scheme, StepControl};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub parameters: Parameters,
    pub grid: GridConfig,
    pub perturbation: PerturbationConfig,
    pub stepping: SteppingConfig,
    pub monitoring: MonitoringConfig,
    pub inequalities: TestFieldSpec,
    pub outputs: OutputsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            parameters: Parameters::default(),
            grid: GridConfig::default(),
            perturbation: PerturbationConfig::default(),
            stepping: SteppingConfig::default(),
            monitoring: MonitoringConfig::default(),
            inequalities: TestFieldSpec::default(),
            outputs: OutputsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub shape: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            shape: vec![256],
            lengths: vec![1.0],
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(&self.shape, &self.lengths)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub epsilon: f64,
    pub modes: Vec<ModeSpec>,
    pub seed: u64,
    pub fold_nonnegative: bool,
    pub allow_mean_shift: bool,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            epsilon: 1e-2,
            modes: vec![
                ModeSpec {
                    k: vec![1],
                    rel_amp: 1.0,
                },
                ModeSpec {
                    k: vec![2],
                    rel_amp: 0.5,
                },
            ],
            seed: 0,
            fold_nonnegative: true,
            allow_mean_shift: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteppingConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every_steps: usize,
    pub stability_guard: f64,
    pub clip_negative: bool,
}

impl Default for SteppingConfig {
    fn default() -> Self {
        SteppingConfig {
            scheme: Scheme::ImexEuler,
            dt: 0.02,
            t_end: 50.0,
            sample_every_steps: 5,
            stability_guard: 0.25,
            clip_negative: true,
        }
    }
}

impl SteppingConfig {
    pub fn control(&self) -> StepControl {
        StepControl {
            dt: self.dt,
            scheme: self.scheme,
            clip_negative: self.clip_negative,
            stability_guard: self.stability_guard,
        }
    }
}

/// Explicit composite-functional weights; omitted in config, the
/// regime-specific table is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitWeights {
    pub l2_u: f64,
    pub l2_v: f64,
    pub grad_u: f64,
    pub grad_v: f64,
    pub lap_u: f64,
    pub lap_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MonitoringConfig {
    /// Tube radius; omitted, defaults to 0.1·min(u⋆ + v⋆, 1).
    pub eta: Option<f64>,
    /// Explicit weight override; omitted, the regime table applies.
    pub weights: Option<ExplicitWeights>,
}

impl MonitoringConfig {
    pub fn eta_for(&self, s: &SteadyState) -> f64 {
        self.eta
            .unwrap_or_else(|| 0.1 * (s.u_star + s.v_star).min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    pub directory: String,
    pub snapshot_times: Vec<f64>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            directory: "out".into(),
            snapshot_times: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.parameters.validate()?;
        let grid = self.grid.build()?;
        if !(self.perturbation.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        for m in &self.perturbation.modes {
            if m.k.len() != grid.dim() {
                return Err(Error::InvalidConfig(format!(
                    "mode {:?} does not match grid dimension {}",
                    m.k,
                    grid.dim()
                )));
            }
        }
        self.stepping.control().validate()?;
        if !(self.stepping.t_end > 0.0) {
            return Err(Error::InvalidConfig("t_end must be positive".into()));
        }
        if self.stepping.sample_every_steps == 0 {
            return Err(Error::InvalidConfig(
                "sample_every_steps must be at least 1".into(),
            ));
        }
        if let Some(eta) = self.monitoring.eta {
            if !(eta > 0.0) {
                return Err(Error::InvalidConfig("eta must be positive".into()));
            }
        }
        if let Some(w) = &self.monitoring.weights {
            let all = [w.l2_u, w.l2_v, w.grad_u, w.grad_v, w.lap_u, w.lap_v];
            if all.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidConfig(
                    "explicit weights must be finite and nonnegative".into(),
                ));
            }
        }
        self.inequalities.validate(&grid)?;
        Ok(())
    }

    /// Canonical text form: fields in schema order, independent of the input
    /// file's layout.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    /// Hex SHA-256 of the canonical form; embedded in every output file.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_toml().as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Parses config text, applies `KEY=VALUE` overrides at dotted paths, and
/// validates the result.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut value: toml::Value = toml::from_str(text)?;
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    let cfg: ExperimentConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, overrides)
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!("override '{spec}' is not KEY=VALUE"))
    })?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::InvalidConfig("override key is empty".into()));
    }
    // parse the value as a one-line TOML document; fall back to a string
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .map(|mut t| t.remove("v").unwrap())
        .unwrap_or_else(|_| toml::Value::String(raw.trim().to_string()));

    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for seg in &segments[..segments.len() - 1] {
        if !node.is_table() {
            return Err(Error::InvalidConfig(format!(
                "override path '{path}' crosses a non-table value"
            )));
        }
        node = node
            .as_table_mut()
            .unwrap()
            .entry(seg.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    let table = node.as_table_mut().ok_or_else(|| {
        Error::InvalidConfig(format!("override path '{path}' crosses a non-table value"))
    })?;
    table.insert(segments.last().unwrap().to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classify_regime, RegimeTag};

    #[test]
    fn default_config_is_valid_and_hash_stable() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.hash());
        // round trip through the canonical form is lossless
        let again = parse_config(&cfg.canonical_toml(), &[]).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = parse_config(
            "",
            &[
                "parameters.lambda2=0.5".into(),
                "grid.shape=[64]".into(),
                "stepping.scheme=\"strang_imex\"".into(),
                "monitoring.eta=0.05".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.parameters.lambda2, 0.5);
        assert_eq!(cfg.grid.shape, vec![64]);
        assert_eq!(cfg.stepping.scheme, crate::solver::Scheme::StrangImex);
        assert_eq!(cfg.monitoring.eta, Some(0.05));
        assert_eq!(
            classify_regime(&cfg.parameters).unwrap().tag,
            RegimeTag::DegenerateExclusionH2
        );
        // the hash tracks the override
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        // taxis coefficients must be strictly positive
        assert!(parse_config("", &["parameters.chi1=0.0".into()]).is_err());
        // growth without decay violates admissibility
        assert!(parse_config("", &["parameters.mu1=0.0".into()]).is_err());
        // unknown keys are caught
        assert!(parse_config("[parameters]\nbogus = 1.0\n", &[]).is_err());
        // malformed override
        assert!(parse_config("", &["no_equals_sign".into()]).is_err());
        // mode dimension mismatch
        assert!(parse_config("", &["grid.shape=[32, 32]".into()]).is_err());
    }

    #[test]
    fn eta_default_tracks_steady_state() {
        let m = MonitoringConfig::default();
        let s = SteadyState {
            u_star: 4.0 / 3.0,
            v_star: 1.0 / 3.0,
        };
        assert_eq!(m.eta_for(&s), 0.1);
        let small = SteadyState {
            u_star: 0.3,
            v_star: 0.0,
        };
        assert!((m.eta_for(&small) - 0.03).abs() < 1e-15);
    }
}
