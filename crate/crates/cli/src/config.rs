//! Experiment configuration: a four-section TOML document mapped onto the
//! core builder types, with unknown keys rejected and every numeric field
//! validated before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use slagflow_core::atlas::{build_sphere, build_torus, MetricAtlas};
use slagflow_core::flow::FlowParams;
use slagflow_core::initial::InitialData;
use slagflow_core::linalg::MAX_DIM;

/// A configuration problem, rendered for stderr. Carries enough context to
/// name the offending key or invariant.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<slagflow_core::Error> for ConfigError {
    fn from(e: slagflow_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: BaseSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSection {
    /// "torus" or "sphere".
    pub kind: String,
    /// Base dimension; defaults to 2. The sphere base is two-dimensional.
    #[serde(default)]
    pub n: Option<usize>,
    pub resolution: usize,
    /// Sectional curvature of the sphere base; not accepted for the torus.
    #[serde(default)]
    pub kappa: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// "zero", "mode", or "bump".
    pub kind: String,
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Torus eigenmode wave numbers, one per base dimension.
    #[serde(default)]
    pub mode: Option<Vec<i64>>,
    /// Sphere eigenmode degree (1 or 2).
    #[serde(default)]
    pub degree: Option<u32>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bandlimit: Option<u32>,
    #[serde(default)]
    pub target_max_chi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub t_end: f64,
    pub cfl: f64,
    pub dt_max: Option<f64>,
    pub epsilon: f64,
    pub p_exponent: f64,
    pub monitor_every: usize,
    pub residual_check_every: usize,
    pub stability_gate: bool,
    pub convergence_threshold: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let p = FlowParams::default();
        FlowSection {
            t_end: p.t_end,
            cfl: p.cfl,
            dt_max: None,
            epsilon: p.epsilon,
            p_exponent: p.p_exponent,
            monitor_every: p.monitor_every,
            residual_check_every: p.residual_check_every,
            stability_gate: p.stability_gate,
            convergence_threshold: p.convergence_threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Run directory, relative to the top-level --out directory.
    pub directory: String,
    /// Steps between state snapshots; 0 writes only the final snapshot.
    pub snapshot_every: usize,
    /// Monitor series file name inside the run directory.
    pub series: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: ".".into(),
            snapshot_every: 0,
            series: "series.csv".into(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    config.check()?;
    Ok(config)
}

impl ExperimentConfig {
    /// Structural validation beyond what deserialization enforces; numeric
    /// range checks live with the types they configure.
    pub fn check(&self) -> Result<(), ConfigError> {
        match self.base.kind.as_str() {
            "torus" => {
                if self.base.kappa.is_some() {
                    return Err(ConfigError(
                        "base.kappa applies only to the sphere base".into(),
                    ));
                }
                let n = self.base.n.unwrap_or(2);
                if n == 0 || n > MAX_DIM {
                    return Err(ConfigError(format!(
                        "base.n = {n} outside the supported range 1..=3"
                    )));
                }
            }
            "sphere" => {
                if let Some(n) = self.base.n {
                    if n != 2 {
                        return Err(ConfigError(format!(
                            "base.n = {n}: the sphere base is two-dimensional"
                        )));
                    }
                }
            }
            other => {
                return Err(ConfigError(format!(
                    "base.kind = {other:?}; expected \"torus\" or \"sphere\""
                )))
            }
        }
        self.initial_data()?;
        self.flow_params().validate()?;
        if self.output.series.is_empty() || self.output.series.contains('/') {
            return Err(ConfigError(
                "output.series must be a bare file name".into(),
            ));
        }
        Ok(())
    }

    pub fn build_atlas(&self) -> Result<MetricAtlas, ConfigError> {
        let atlas = match self.base.kind.as_str() {
            "torus" => build_torus(self.base.n.unwrap_or(2), self.base.resolution)?,
            _ => build_sphere(self.base.resolution, self.base.kappa.unwrap_or(1.0))?,
        };
        Ok(atlas)
    }

    pub fn initial_data(&self) -> Result<InitialData, ConfigError> {
        let need_amplitude = || {
            self.initial
                .amplitude
                .ok_or_else(|| ConfigError("initial.amplitude is required".into()))
        };
        let reject = |key: &str, set: bool| {
            if set {
                Err(ConfigError(format!(
                    "initial.{key} does not apply to initial.kind = {:?}",
                    self.initial.kind
                )))
            } else {
                Ok(())
            }
        };
        match self.initial.kind.as_str() {
            "zero" => {
                reject("amplitude", self.initial.amplitude.is_some())?;
                reject("mode", self.initial.mode.is_some())?;
                reject("degree", self.initial.degree.is_some())?;
                reject("seed", self.initial.seed.is_some())?;
                reject("bandlimit", self.initial.bandlimit.is_some())?;
                reject("target_max_chi", self.initial.target_max_chi.is_some())?;
                Ok(InitialData::Zero)
            }
            "mode" => {
                reject("seed", self.initial.seed.is_some())?;
                reject("bandlimit", self.initial.bandlimit.is_some())?;
                reject("target_max_chi", self.initial.target_max_chi.is_some())?;
                let amplitude = need_amplitude()?;
                if self.base.kind == "torus" {
                    reject("degree", self.initial.degree.is_some())?;
                    let idx = self.initial.mode.clone().ok_or_else(|| {
                        ConfigError("initial.mode is required for a torus eigenmode".into())
                    })?;
                    let n = self.base.n.unwrap_or(2);
                    if idx.len() != n {
                        return Err(ConfigError(format!(
                            "initial.mode has {} entries for a {n}-dimensional base",
                            idx.len()
                        )));
                    }
                    let mut wave = [0i64; MAX_DIM];
                    wave[..n].copy_from_slice(&idx);
                    Ok(InitialData::TorusMode { amplitude, wave })
                } else {
                    reject("mode", self.initial.mode.is_some())?;
                    let degree = self.initial.degree.ok_or_else(|| {
                        ConfigError("initial.degree is required for a sphere eigenmode".into())
                    })?;
                    Ok(InitialData::SphereZonal { amplitude, degree })
                }
            }
            "bump" => {
                reject("mode", self.initial.mode.is_some())?;
                reject("degree", self.initial.degree.is_some())?;
                let amplitude = need_amplitude()?;
                Ok(InitialData::Bump {
                    amplitude,
                    seed: self.initial.seed.unwrap_or(0),
                    bandlimit: self.initial.bandlimit.unwrap_or(2),
                    target_max_chi: self.initial.target_max_chi,
                })
            }
            other => Err(ConfigError(format!(
                "initial.kind = {other:?}; expected \"zero\", \"mode\", or \"bump\""
            ))),
        }
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            t_end: self.flow.t_end,
            cfl: self.flow.cfl,
            dt_max: self.flow.dt_max.unwrap_or(f64::INFINITY),
            epsilon: self.flow.epsilon,
            p_exponent: self.flow.p_exponent,
            monitor_every: self.flow.monitor_every,
            residual_check_every: self.flow.residual_check_every,
            stability_gate: self.flow.stability_gate,
            convergence_threshold: self.flow.convergence_threshold,
        }
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    const GOOD: &str = r#"
        [base]
        kind = "sphere"
        resolution = 48

        [initial]
        kind = "mode"
        amplitude = 1e-3
        degree = 1

        [flow]
        t_end = 0.5
    "#;

    #[test]
    fn round_trips_a_complete_document() {
        let config = parse(GOOD).unwrap();
        assert_eq!(config.base.resolution, 48);
        assert!(matches!(
            config.initial_data().unwrap(),
            InitialData::SphereZonal { degree: 1, .. }
        ));
        assert_eq!(config.flow_params().t_end, 0.5);
        assert_eq!(config.output.series, "series.csv");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = parse(&GOOD.replace("t_end = 0.5", "t_end = 0.5\nwarp = 9"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("warp"), "message was: {err}");
    }

    #[test]
    fn numeric_invariants_are_enforced_before_running() {
        let err = parse(&GOOD.replace("t_end = 0.5", "cfl = 0.9"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("cfl"), "message was: {err}");
    }

    #[test]
    fn section_cross_checks_name_the_offending_key() {
        let torus_kappa = GOOD
            .replace("kind = \"sphere\"", "kind = \"torus\"\nkappa = 1.0")
            .replace("degree = 1", "mode = [1, 0]");
        assert!(parse(&torus_kappa).unwrap_err().to_string().contains("kappa"));

        let stray_seed = GOOD.replace("degree = 1", "degree = 1\nseed = 7");
        assert!(parse(&stray_seed).unwrap_err().to_string().contains("seed"));

        let missing_degree = GOOD.replace("degree = 1", "");
        assert!(parse(&missing_degree)
            .unwrap_err()
            .to_string()
            .contains("degree"));

        let wrong_arity = GOOD
            .replace("kind = \"sphere\"", "kind = \"torus\"")
            .replace("degree = 1", "mode = [1]");
        assert!(parse(&wrong_arity).unwrap_err().to_string().contains("mode"));
    }

    #[test]
    fn zero_initial_state_needs_no_tuning_keys() {
        let zero = GOOD
            .replace("kind = \"mode\"", "kind = \"zero\"")
            .replace("amplitude = 1e-3", "")
            .replace("degree = 1", "");
        let config = parse(&zero).unwrap();
        assert!(matches!(config.initial_data().unwrap(), InitialData::Zero));
    }
}
