//! End-to-end closed-loop case studies.
//!
//! Every scenario is described by a [`ScenarioConfig`]. User JSON is merged
//! onto [`ScenarioConfig::defaults`] before validation, so the resolved
//! config stored in a [`ScenarioResult`] lists every constant that was used.

mod manipulator;
mod pert;
mod rigidbody;
mod twotank;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use manipulator::{run_manipulator, ManipulatorScenario};
pub use pert::{run_pert, PertScenario};
pub use rigidbody::{run_rigidbody, RigidBodyScenario};
pub use twotank::{run_twotank, TwoTankScenario};

use crate::error::{Error, Result};
use crate::io::PlotSpec;
use crate::kernel::EstimatorConfig;
use crate::sim::{GaussianNoise, NoiseSpec};
use crate::streaming::{MatchedInputFilter, Mode, StreamingDifferentiator};
use crate::trace::SimTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    Manipulator,
    Rigidbody,
    Twotank,
    Pertlin,
    Pertnl,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::Manipulator,
        ScenarioId::Rigidbody,
        ScenarioId::Twotank,
        ScenarioId::Pertlin,
        ScenarioId::Pertnl,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Manipulator => "manipulator",
            ScenarioId::Rigidbody => "rigidbody",
            ScenarioId::Twotank => "twotank",
            ScenarioId::Pertlin => "pertlin",
            ScenarioId::Pertnl => "pertnl",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scenario `{s}` (expected one of manipulator, rigidbody, twotank, pertlin, pertnl)"
                ))
            })
    }
}

/// Differentiator settings; the sampling step is the scenario step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    pub taylor_order: usize,
    pub integral_order: usize,
    pub window_length: f64,
    pub mode: Mode,
}

impl EstimatorSettings {
    pub fn new(taylor_order: usize, window_length: f64) -> Self {
        Self {
            taylor_order,
            integral_order: taylor_order + 2,
            window_length,
            mode: Mode::TimeReversed,
        }
    }

    pub fn kernel_config(&self, step: f64) -> EstimatorConfig {
        EstimatorConfig::new(self.taylor_order, self.window_length, step)
            .with_integral_order(self.integral_order)
    }
}

/// Feature switches. A switched-on feature runs both with and without it so
/// the trace carries the comparison; switched off, only the run without it
/// is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    /// Two-tank fault accommodation.
    pub accommodation: bool,
    /// Perturbation compensation by `z_e` in the perturbed plants.
    pub compensation: bool,
    /// Online inertia identification in the rigid-body study.
    pub identification: bool,
    /// Feed the controllers exact derivatives instead of estimates.
    pub truth_fed: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            accommodation: true,
            compensation: true,
            identification: true,
            truth_fed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioParams {
    Manipulator(ManipulatorScenario),
    Rigidbody(RigidBodyScenario),
    Twotank(TwoTankScenario),
    Pert(PertScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Simulated time span in seconds.
    pub horizon: f64,
    /// Integration and sampling step in seconds.
    pub step: f64,
    pub noise: NoiseSpec,
    pub estimator: EstimatorSettings,
    pub toggles: Toggles,
    pub params: ScenarioParams,
}

impl ScenarioConfig {
    pub fn defaults(id: ScenarioId) -> Self {
        let (horizon, sigma, estimator, params) = match id {
            ScenarioId::Manipulator => (
                6.0,
                0.01,
                EstimatorSettings::new(3, 0.2),
                ScenarioParams::Manipulator(ManipulatorScenario::default()),
            ),
            ScenarioId::Rigidbody => (
                20.0,
                0.005,
                EstimatorSettings::new(1, 0.2),
                ScenarioParams::Rigidbody(RigidBodyScenario::default()),
            ),
            ScenarioId::Twotank => (
                8.0,
                0.01,
                EstimatorSettings::new(2, 0.2),
                ScenarioParams::Twotank(TwoTankScenario::default()),
            ),
            ScenarioId::Pertlin | ScenarioId::Pertnl => (
                20.0,
                0.025,
                EstimatorSettings::new(2, 0.03),
                ScenarioParams::Pert(PertScenario::default()),
            ),
        };
        Self {
            scenario: id,
            horizon,
            step: 1e-3,
            noise: NoiseSpec { sigma, seed: 1 },
            estimator,
            toggles: Toggles::default(),
            params,
        }
    }

    /// Merges a partial JSON document onto the defaults of `id`.
    pub fn from_json_overrides(id: ScenarioId, overrides: &Value) -> Result<Self> {
        if !overrides.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        if let Some(s) = overrides.get("scenario") {
            if s.as_str() != Some(id.as_str()) {
                return Err(Error::Config(format!(
                    "config is for scenario {s}, but `{id}` was requested"
                )));
            }
        }
        let mut merged = serde_json::to_value(Self::defaults(id))?;
        merge(&mut merged, overrides);
        let config: Self =
            serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(id: ScenarioId, text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_json_overrides(id, &value)
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn kernel_config(&self) -> EstimatorConfig {
        self.estimator.kernel_config(self.step)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.horizon > self.step && self.horizon.is_finite()) {
            return bad(format!("horizon {} must exceed the step", self.horizon));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return bad(format!("noise sigma must be ≥ 0, got {}", self.noise.sigma));
        }
        self.kernel_config()
            .validate()
            .map_err(|e| Error::Config(format!("estimator: {e}")))?;
        let events: Vec<(&str, f64)> = match (&self.params, self.scenario) {
            (ScenarioParams::Manipulator(p), ScenarioId::Manipulator) => p.event_times(),
            (ScenarioParams::Rigidbody(p), ScenarioId::Rigidbody) => p.event_times(),
            (ScenarioParams::Twotank(p), ScenarioId::Twotank) => p.event_times(),
            (ScenarioParams::Pert(p), ScenarioId::Pertlin | ScenarioId::Pertnl) => p.event_times(),
            _ => {
                return bad(format!(
                    "params block does not belong to scenario `{}`",
                    self.scenario
                ))
            }
        };
        for (name, t) in events {
            if !(t >= 0.0 && t <= self.horizon) {
                return bad(format!(
                    "{name} = {t} lies outside [0, {}]",
                    self.horizon
                ));
            }
        }
        Ok(())
    }
}

fn merge(base: &mut Value, overrides: &Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

/// Trace, metrics and plot layout of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub config: ScenarioConfig,
    pub trace: SimTrace,
    pub metrics: BTreeMap<String, f64>,
    pub plots: Vec<PlotSpec>,
}

impl ScenarioResult {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    /// Resolved config, seed and metrics. Non-finite metrics are written as
    /// the strings `"inf"`, `"-inf"` or `"NaN"`.
    pub fn metrics_json(&self) -> Result<Value> {
        let metrics: serde_json::Map<String, Value> = self
            .metrics
            .iter()
            .map(|(k, v)| {
                let value = if v.is_finite() {
                    Value::from(*v)
                } else {
                    Value::from(crate::io::csv::format_value(*v))
                };
                (k.clone(), value)
            })
            .collect();
        Ok(serde_json::json!({
            "scenario": self.config.scenario,
            "seed": self.config.noise.seed,
            "config": serde_json::to_value(&self.config)?,
            "metrics": metrics,
        }))
    }
}

pub fn run(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    match config.scenario {
        ScenarioId::Manipulator => run_manipulator(config),
        ScenarioId::Rigidbody => run_rigidbody(config),
        ScenarioId::Twotank => run_twotank(config),
        ScenarioId::Pertlin | ScenarioId::Pertnl => run_pert(config),
    }
}

/// Noisy measurement of one output channel plus its streaming estimates.
///
/// Until the differentiator is warm the caller's exact derivatives are
/// passed through, so controllers never see an empty estimate.
pub(crate) struct OutputChannel {
    diff: StreamingDifferentiator,
    truth_fed: bool,
}

impl OutputChannel {
    pub(crate) fn new(config: &ScenarioConfig) -> Result<Self> {
        Self::with_settings(config, &config.estimator)
    }

    /// A channel with its own estimator settings at the scenario step.
    pub(crate) fn with_settings(config: &ScenarioConfig, settings: &EstimatorSettings) -> Result<Self> {
        Ok(Self {
            diff: StreamingDifferentiator::from_config(
                settings.kernel_config(config.step),
                settings.mode,
            )?,
            truth_fed: config.toggles.truth_fed,
        })
    }

    /// Input filter matched to the `order`-th derivative estimate.
    pub(crate) fn matched_filter(&self, order: usize) -> Result<MatchedInputFilter> {
        MatchedInputFilter::new(self.diff.kernel(), self.diff.mode(), order)
    }

    /// Returns the estimates `[ŷ, ŷ', …]` (length `N + 1`) and whether they
    /// came from the differentiator.
    pub(crate) fn update(&mut self, t: f64, measured: f64, truth: &[f64]) -> Result<(Vec<f64>, bool)> {
        let order = self.diff.kernel().taylor_order();
        let estimate = self.diff.push_sample(t, measured)?;
        match estimate {
            Some(e) if !self.truth_fed => Ok((e.values, true)),
            _ => {
                let mut v: Vec<f64> = truth.iter().copied().take(order + 1).collect();
                v.resize(order + 1, 0.0);
                Ok((v, false))
            }
        }
    }
}

pub(crate) fn noise_source(config: &ScenarioConfig) -> GaussianNoise {
    GaussianNoise::new(config.noise)
}

/// Time integral of `Σ|channels|` over the whole trace (trapezoid).
pub(crate) fn abs_integral(time: &[f64], channels: &[&[f64]]) -> f64 {
    let total: Vec<f64> = (0..time.len())
        .map(|i| channels.iter().map(|c| c[i].abs()).sum())
        .collect();
    time.windows(2)
        .zip(total.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}
