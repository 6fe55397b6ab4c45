use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{noise_source, OutputChannel, ScenarioConfig, ScenarioId, ScenarioParams, ScenarioResult};
use crate::control::{double_second_order, GpiFilter, ReferenceTrajectory};
use crate::error::{Error, Result};
use crate::estimators::estimate_z;
use crate::io::PlotSpec;
use crate::plants::{PertKind, PerturbedPlant};
use crate::sim::rk4_step;
use crate::trace::{rms_where, SimTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PertScenario {
    /// Amplitude factor of `z(t) = g t³ sin 2t / (1 + t² + t³)`.
    pub perturbation_gain: f64,
    /// Constant input bias `C` switched on at `bias_time`.
    pub bias: f64,
    pub bias_time: f64,
    pub reference: ReferenceTrajectory,
    pub damping: f64,
    pub natural_freq: f64,
    pub initial_state: [f64; 2],
    /// Start of the tracking-error window (ends at the horizon).
    pub metric_start: f64,
    /// A run whose `|y|` exceeds this is stopped and scored as diverged.
    pub divergence_limit: f64,
}

impl Default for PertScenario {
    fn default() -> Self {
        Self {
            perturbation_gain: 10.0,
            bias: 1.25,
            bias_time: 4.0,
            reference: ReferenceTrajectory::Sinusoid {
                amplitude: 1.0,
                frequency: 2.5,
            },
            damping: 0.81,
            natural_freq: 4.0,
            initial_state: [0.0, 0.0],
            metric_start: 5.0,
            divergence_limit: 100.0,
        }
    }
}

impl PertScenario {
    pub(crate) fn event_times(&self) -> Vec<(&'static str, f64)> {
        vec![("bias_time", self.bias_time), ("metric_start", self.metric_start)]
    }
}

const RUN_CHANNELS: [&str; 7] = ["y", "y_e", "yd_e", "ydd_e", "u", "z_e", "v"];

/// One closed-loop run. After divergence every remaining row is NaN.
fn simulate(
    config: &ScenarioConfig,
    sc: &PertScenario,
    plant: &PerturbedPlant,
    compensate: bool,
) -> Result<(SimTrace, Option<f64>)> {
    let mut gpi = GpiFilter::new(double_second_order(sc.damping, sc.natural_freq));
    let mut channel = OutputChannel::new(config)?;
    let mut input_filter = channel.matched_filter(2)?;
    let mut noise = noise_source(config);
    let h = config.step;
    let n = config.steps();

    let mut trace = SimTrace::new(&RUN_CHANNELS);
    let mut x = sc.initial_state.to_vec();
    let mut u_prev = 0.0;
    let mut diverged = None;
    for k in 0..=n {
        let t = k as f64 * h;
        if diverged.is_some() {
            trace.push_row(t, &[f64::NAN; RUN_CHANNELS.len()]);
            continue;
        }
        let truth = plant.output_derivatives(t, &x, u_prev);
        let measured = truth[0] + noise.sample();
        let (est, warm) = channel.update(t, measured, &truth)?;
        let (y_e, yd_e, ydd_e) = (est[0], est[1], est[2]);

        // ÿ_e averages ÿ over the window, so the input it is compared with
        // gets the same averaging. Exact derivatives pair with the input
        // held over the previous step.
        let u_matched = match input_filter.value() {
            Some(fu) if warm => fu,
            _ => u_prev,
        };
        let z_e = if compensate {
            estimate_z(y_e, yd_e, ydd_e, u_matched, plant.kind)
        } else {
            0.0
        };
        let r = sc.reference.eval(t);
        let v = r[2] - gpi.apply(y_e - r[0], h);
        let u = plant.drift(y_e, yd_e) + z_e + v;
        trace.push_row(t, &[x[0], y_e, yd_e, ydd_e, u, z_e, v]);
        input_filter.push(u);

        if k < n {
            let next = rk4_step(plant, t, &x, &[u], h);
            match next {
                Ok(nx) if nx[0].abs() <= sc.divergence_limit => x = nx,
                _ => diverged = Some(t + h),
            }
        }
        u_prev = u;
    }
    Ok((trace, diverged))
}

pub fn run_pert(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let ScenarioParams::Pert(sc) = &config.params else {
        return Err(Error::Config("pert run needs pert params".into()));
    };
    let kind = match config.scenario {
        ScenarioId::Pertlin => PertKind::Linear,
        ScenarioId::Pertnl => PertKind::Nonlinear,
        other => return Err(Error::Config(format!("`{other}` is not a perturbed-plant scenario"))),
    };
    if config.estimator.taylor_order < 2 {
        return Err(Error::Config("z_e needs ÿ (taylor_order ≥ 2)".into()));
    }
    let plant = PerturbedPlant {
        kind,
        perturbation_gain: sc.perturbation_gain,
        bias: sc.bias,
        bias_time: sc.bias_time,
    };
    let mut runs = Vec::new();
    if config.toggles.compensation {
        runs.push(("comp", true));
    }
    runs.push(("nocomp", false));

    let mut trace = SimTrace::new::<&str>(&[]);
    let mut metrics = BTreeMap::new();
    for (prefix, compensate) in &runs {
        let (run, diverged) = simulate(config, sc, &plant, *compensate)?;
        if trace.time.is_empty() {
            trace.time = run.time.clone();
            let r: Vec<f64> = trace.time.iter().map(|t| sc.reference.value(*t)).collect();
            trace.add_channel("y_ref", r)?;
            let z: Vec<f64> = trace
                .time
                .iter()
                .map(|t| plant.z(*t) - plant.bias_at(*t))
                .collect();
            trace.add_channel("z_minus_bias", z)?;
        }
        for c in run.channels {
            trace.add_channel(format!("{prefix}_{}", c.name), c.values)?;
        }
        let label = if *compensate { "compensated" } else { "uncompensated" };
        let rms = match diverged {
            Some(at) => {
                metrics.insert(format!("divergence_time_{label}"), at);
                f64::INFINITY
            }
            None => rms_where(
                &trace.time,
                trace.channel(&format!("{prefix}_y"))?,
                trace.channel("y_ref")?,
                |s| s >= sc.metric_start,
            ),
        };
        metrics.insert(format!("tracking_rms_{label}"), rms);
    }
    if config.toggles.compensation {
        metrics.insert(
            "tracking_rms_ratio".into(),
            metrics["tracking_rms_compensated"] / metrics["tracking_rms_uncompensated"],
        );
    }

    let primary = runs[0].0;
    let mut tracking = PlotSpec::new("tracking", "Output y and reference y*")
        .dashed("y_ref")
        .solid(&format!("{primary}_y"));
    if config.toggles.compensation {
        tracking = tracking.solid("nocomp_y");
    }
    let mut plots = vec![tracking];
    if config.toggles.compensation {
        plots.push(
            PlotSpec::new("perturbation_estimate", "Perturbation estimate z_e vs z − C·1(t − t_I)")
                .solid("comp_z_e")
                .dashed("z_minus_bias"),
        );
    }
    plots.push(PlotSpec::new("input", "Control input u").solid(&format!("{primary}_u")));
    Ok(ScenarioResult {
        config: config.clone(),
        trace,
        metrics,
        plots,
    })
}
