//! Scenario configuration file (TOML) with dotted-key overrides.

use serde::{Deserialize, Serialize};

use crate::autotuner::TunerConfig;
use crate::cost::WeightVector;
use crate::error::{Error, Result};
use crate::machine::{MachineParams, PlantOptions};
use crate::metrics::MetricsConfig;
use crate::outer_loop::OuterLoopConfig;
use crate::predictor::PredictorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WfMode {
    #[default]
    Fixed,
    Adaptive,
}

/// Piecewise-constant schedule point: `value` holds from `t` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetPoint {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfStep {
    pub t: f64,
    pub lambda_xy: f64,
    pub lambda_sc: f64,
}

impl WfStep {
    pub fn weights(&self) -> WeightVector {
        WeightVector::new(self.lambda_xy, self.lambda_sc)
    }
}

/// Index-reference change, applied at the first block boundary at or after
/// `t`. A missing channel keeps its current reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefStep {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Simulated time (s).
    pub duration: f64,
    pub mode: WfMode,
    /// Mechanical speed set-point schedule (rad/s).
    pub speed: Vec<SetPoint>,
    /// Slew limit on the speed set-point (rad/s²); 0 applies steps directly.
    pub speed_ramp: f64,
    /// Load torque schedule (N·m).
    pub load: Vec<SetPoint>,
    /// Weight changes, fixed mode only.
    pub wf_steps: Vec<WfStep>,
    /// Index-reference changes, adaptive mode only.
    pub ref_steps: Vec<RefStep>,
    /// Initial rotor speed; defaults to the first speed set-point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_speed: Option<f64>,
    /// Leading blocks ignored by steady-state averages.
    pub discard_blocks: usize,
    /// Keep per-sample records in memory and on disk.
    pub log_samples: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            duration: 2.0,
            mode: WfMode::Fixed,
            speed: vec![SetPoint { t: 0.0, value: 50.0 }],
            speed_ramp: 0.0,
            load: vec![SetPoint { t: 0.0, value: 0.0 }],
            wf_steps: Vec::new(),
            ref_steps: Vec::new(),
            initial_speed: None,
            discard_blocks: 10,
            log_samples: true,
        }
    }
}

fn check_schedule(key: &str, times: impl Iterator<Item = f64>) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::config(key, format!("time {t} must be finite and >= 0")));
        }
        if t < last {
            return Err(Error::config(key, "schedule must be time-ordered"));
        }
        last = t;
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(Error::config("scenario.duration", "must be finite and >= 0"));
        }
        if self.speed.is_empty() {
            return Err(Error::config("scenario.speed", "needs at least one set-point"));
        }
        check_schedule("scenario.speed", self.speed.iter().map(|p| p.t))?;
        check_schedule("scenario.load", self.load.iter().map(|p| p.t))?;
        check_schedule("scenario.wf_steps", self.wf_steps.iter().map(|p| p.t))?;
        check_schedule("scenario.ref_steps", self.ref_steps.iter().map(|p| p.t))?;
        if self.speed.iter().chain(&self.load).any(|p| !p.value.is_finite()) {
            return Err(Error::config("scenario.speed", "set-point values must be finite"));
        }
        if !(self.speed_ramp.is_finite() && self.speed_ramp >= 0.0) {
            return Err(Error::config("scenario.speed_ramp", "must be finite and >= 0"));
        }
        match self.mode {
            WfMode::Fixed if !self.ref_steps.is_empty() => {
                return Err(Error::config("scenario.ref_steps", "only meaningful in adaptive mode"));
            }
            WfMode::Adaptive if !self.wf_steps.is_empty() => {
                return Err(Error::config("scenario.wf_steps", "only meaningful in fixed mode"));
            }
            _ => {}
        }
        if let Some(w) = self.initial_speed {
            if !w.is_finite() {
                return Err(Error::config("scenario.initial_speed", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Parameters of the `step-wf` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepWfConfig {
    pub pre: WeightVector,
    pub post: WeightVector,
    pub t_step: f64,
}

impl Default for StepWfConfig {
    fn default() -> Self {
        Self {
            pre: WeightVector::new(0.15, 0.0020),
            post: WeightVector::new(0.75, 0.0020),
            t_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReversalConfig {
    /// Speed before the reversal (rad/s); the set-point flips to its negative.
    pub omega_target: f64,
    pub t_reverse: f64,
}

impl Default for ReversalConfig {
    fn default() -> Self {
        Self {
            omega_target: 50.0,
            t_reverse: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda_xy: Vec<f64>,
    pub lambda_sc: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_xy: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            lambda_sc: vec![0.0005, 0.001, 0.002, 0.004, 0.008],
        }
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub machine: MachineParams,
    pub plant: PlantOptions,
    pub outer_loop: OuterLoopConfig,
    pub predictor: PredictorConfig,
    pub metrics: MetricsConfig,
    pub tuner: TunerConfig,
    pub scenario: Scenario,
    pub step_wf: StepWfConfig,
    pub reversal: ReversalConfig,
    pub sweep: SweepConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.machine.validate()?;
        self.plant.validate()?;
        self.outer_loop.validate()?;
        self.predictor.validate()?;
        self.metrics.validate()?;
        self.tuner.validate()?;
        self.scenario.validate()?;
        for s in &self.scenario.wf_steps {
            if !self.tuner.contains(&s.weights()) {
                return Err(Error::config("scenario.wf_steps", "weights outside tuner bounds"));
            }
        }
        Ok(())
    }

    /// Block period `N·Ts`.
    pub fn block_period(&self) -> f64 {
        self.metrics.window as f64 * self.machine.ts
    }

    /// Parses a TOML document, applies `key=value` overrides on top of it and
    /// validates the result.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config("<file>", e.message().to_string()))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

/// Sets `a.b.c = value` inside `table`. The value is read as a TOML literal
/// and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::config(ov, "override must have the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty path segment"));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
