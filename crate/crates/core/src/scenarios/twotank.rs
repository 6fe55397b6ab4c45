use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    noise_source, EstimatorSettings, OutputChannel, ScenarioConfig, ScenarioParams, ScenarioResult,
};
use crate::control::{double_second_order, GpiFilter, ReferenceTrajectory};
use crate::error::{Error, Result};
use crate::estimators::{tank_flat_inverse, FaultEstimator, PerturbationEstimator, TankParams};
use crate::io::PlotSpec;
use crate::plants::TwoTankPlant;
use crate::sim::rk4_step;
use crate::trace::{rms_where, SimTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoTankScenario {
    pub tank: TankParams,
    pub initial_levels: [f64; 2],
    /// Constant inflow perturbation `ϖ` (m/s).
    pub perturbation: f64,
    /// Actuator loss `w` once the fault is active.
    pub fault: f64,
    pub fault_time: f64,
    pub accommodation_time: f64,
    pub reference: ReferenceTrajectory,
    pub gpi_damping: f64,
    pub gpi_natural_freq: f64,
    /// `ϖ̂` is undefined before this time.
    pub varpi_epsilon: f64,
    /// Moving-average length of the fault estimate, in samples.
    pub fault_smoothing: usize,
    /// The fault estimate is held while `|u|` is below this.
    pub min_input: f64,
    /// Upper bound on `ŵ` inside the accommodation gain `1/(1 − ŵ)`.
    pub fault_ceiling: f64,
    /// Clear the GPI filter state when accommodation starts, discarding the
    /// integral correction accumulated against the unaccommodated fault.
    pub reset_on_accommodation: bool,
    /// Optional pump range `[min, max]` applied to the commanded inflow.
    #[serde(default)]
    pub input_limits: Option<[f64; 2]>,
    /// Differentiator behind `x̂₁` and `ϖ̂`. Its output only needs to be
    /// ready at the fault, so it trades latency for low lag bias.
    pub perturbation_estimator: EstimatorSettings,
    /// Differentiator behind `ŵ`, long enough to tame the noise in `ÿ`.
    pub fault_estimator: EstimatorSettings,
}

impl Default for TwoTankScenario {
    fn default() -> Self {
        Self {
            tank: TankParams {
                area: 1.0,
                outflow: 0.5,
            },
            initial_levels: [0.5, 0.5],
            perturbation: 0.2,
            fault: 0.7,
            fault_time: 1.5,
            accommodation_time: 2.5,
            reference: ReferenceTrajectory::RestToRestPoly {
                start_value: 0.5,
                end_value: 1.0,
                start_time: 0.5,
                end_time: 4.0,
            },
            gpi_damping: 0.81,
            gpi_natural_freq: 2.0,
            varpi_epsilon: 0.1,
            fault_smoothing: 50,
            min_input: 0.05,
            fault_ceiling: 0.9,
            reset_on_accommodation: true,
            input_limits: None,
            perturbation_estimator: EstimatorSettings::new(3, 0.4),
            fault_estimator: EstimatorSettings::new(2, 0.8),
        }
    }
}

impl TwoTankScenario {
    pub(crate) fn event_times(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("fault_time", self.fault_time),
            ("accommodation_time", self.accommodation_time),
            ("varpi_epsilon", self.varpi_epsilon),
        ]
    }
}

const RUN_CHANNELS: [&str; 9] = ["y", "y_e", "yd_e", "ydd_e", "x1", "x1_e", "u", "varpi_e", "w_e"];

fn simulate(config: &ScenarioConfig, sc: &TwoTankScenario, accommodate: bool) -> Result<SimTrace> {
    let plant = TwoTankPlant {
        area: sc.tank.area,
        outflow: sc.tank.outflow,
        perturbation: sc.perturbation,
        fault: sc.fault,
        fault_time: sc.fault_time,
    };
    let mut gpi = GpiFilter::new(double_second_order(sc.gpi_damping, sc.gpi_natural_freq));
    let mut channel = OutputChannel::new(config)?;
    let mut varpi_channel = OutputChannel::with_settings(config, &sc.perturbation_estimator)?;
    let mut slow = OutputChannel::with_settings(config, &sc.fault_estimator)?;
    let mut input_filter = slow.matched_filter(2)?;
    let mut noise = noise_source(config);
    let mut varpi_est = PerturbationEstimator::new(sc.tank, sc.varpi_epsilon);
    let mut fault_est = FaultEstimator::new(sc.tank, sc.fault_smoothing, sc.min_input);
    let h = config.step;
    let n = config.steps();

    let mut trace = SimTrace::new(&RUN_CHANNELS);
    let mut x = sc.initial_levels.to_vec();
    let mut u_prev = 0.0;
    let mut x1_hat = x[0];
    let mut u_nom_prev = 0.0;
    let mut varpi_hat = 0.0;
    let mut switched = false;
    for k in 0..=n {
        let t = k as f64 * h;
        let truth = plant.output_derivatives(t, &x, u_prev);
        let measured = truth[0] + noise.sample();
        let (est, _) = channel.update(t, measured, &truth)?;
        let (y_e, yd_e, ydd_e) = (est[0], est[1], est[2]);
        let (slow_est, warm) = slow.update(t, measured, &truth)?;
        let (ys, yds, ydds) = (slow_est[0], slow_est[1], slow_est[2]);

        // Only ŷ and ŷ' enter x̂₁. Regime violations from noisy estimates
        // keep the previous value.
        let (pe, _) = varpi_channel.update(t, measured, &truth)?;
        if let Ok(head) = sc.tank.head(pe[0], pe[1]) {
            x1_hat = head * head;
        }

        // ÿ_e is a window average, so the input is averaged the same way.
        let u_matched = match input_filter.value() {
            Some(fu) if warm => fu,
            _ => u_prev,
        };
        let w_hat = if t > sc.varpi_epsilon {
            fault_est
                .push(ys, yds, ydds, u_matched, varpi_hat)
                .unwrap_or_else(|_| fault_est.value())
        } else {
            0.0
        };

        let accommodating = accommodate && t >= sc.accommodation_time;
        if accommodating && !switched {
            switched = true;
            if sc.reset_on_accommodation {
                gpi.reset();
            }
        }
        let r = sc.reference.eval(t);
        let v = r[2] - gpi.apply(y_e - r[0], h);
        let u_nom = match tank_flat_inverse(y_e, yd_e, v, &sc.tank) {
            Ok((_, u)) => u - sc.tank.area * varpi_hat,
            Err(_) => u_nom_prev,
        };
        u_nom_prev = u_nom;
        let mut u = if accommodating {
            u_nom / (1.0 - w_hat.min(sc.fault_ceiling))
        } else {
            u_nom
        };
        if let Some([lo, hi]) = sc.input_limits {
            u = u.clamp(lo, hi);
        }

        // ϖ̂ runs on the pre-fault record only and is then frozen.
        if t < sc.fault_time {
            varpi_est.push(t, x1_hat, u)?;
            if let Some(vh) = varpi_est.smoothed() {
                varpi_hat = vh;
            }
        }

        trace.push_row(
            t,
            &[truth[0], y_e, yd_e, ydd_e, x[0], x1_hat, u, varpi_hat, w_hat],
        );
        input_filter.push(u);
        if k < n {
            x = rk4_step(&plant, t, &x, &[u], h)?;
        }
        u_prev = u;
    }
    Ok(trace)
}

pub fn run_twotank(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let ScenarioParams::Twotank(sc) = &config.params else {
        return Err(Error::Config("twotank run needs twotank params".into()));
    };
    for (name, est, min_order) in [
        ("estimator", &config.estimator, 2),
        ("perturbation_estimator", &sc.perturbation_estimator, 1),
        ("fault_estimator", &sc.fault_estimator, 2),
    ] {
        if est.taylor_order < min_order {
            return Err(Error::Config(format!(
                "{name}: taylor_order must be at least {min_order}"
            )));
        }
        est.kernel_config(config.step)
            .validate()
            .map_err(|e| Error::Config(format!("{name}: {e}")))?;
    }
    if !(0.0..1.0).contains(&sc.fault_ceiling) {
        return Err(Error::Config("fault_ceiling must lie in [0, 1)".into()));
    }
    if let Some([lo, hi]) = sc.input_limits {
        if !(lo < hi) {
            return Err(Error::Config("input_limits must satisfy min < max".into()));
        }
    }
    let mut runs = Vec::new();
    if config.toggles.accommodation {
        runs.push(("acc", true));
    }
    runs.push(("noacc", false));

    let mut trace = SimTrace::new::<&str>(&[]);
    for (prefix, accommodate) in &runs {
        let run = simulate(config, sc, *accommodate)?;
        if trace.time.is_empty() {
            trace.time = run.time.clone();
            let r: Vec<f64> = trace.time.iter().map(|t| sc.reference.value(*t)).collect();
            trace.add_channel("y_ref", r)?;
            let w: Vec<f64> = trace
                .time
                .iter()
                .map(|t| if *t >= sc.fault_time { sc.fault } else { 0.0 })
                .collect();
            trace.add_channel("w", w)?;
            trace.add_channel("varpi", vec![sc.perturbation; trace.len()])?;
        }
        for c in run.channels {
            trace.add_channel(format!("{prefix}_{}", c.name), c.values)?;
        }
    }

    let metrics = tank_metrics(&trace, sc, config)?;
    let primary = runs[0].0;
    let mut plots = vec![PlotSpec::new("tracking", "Lower tank level y and reference [m]")
        .dashed("y_ref")
        .solid(&format!("{primary}_y"))];
    if config.toggles.accommodation {
        plots[0] = plots[0].clone().solid("noacc_y");
    }
    plots.push(
        PlotSpec::new("perturbation_estimate", "Perturbation estimate vs true value")
            .solid(&format!("{primary}_varpi_e"))
            .dashed("varpi"),
    );
    plots.push(
        PlotSpec::new("fault_estimate", "Fault estimate vs true value")
            .solid(&format!("{primary}_w_e"))
            .dashed("w"),
    );
    plots.push(
        PlotSpec::new("upper_level", "Upper tank level, true and reconstructed [m]")
            .dashed(&format!("{primary}_x1"))
            .solid(&format!("{primary}_x1_e")),
    );
    plots.push(PlotSpec::new("input", "Inflow u").solid(&format!("{primary}_u")));
    Ok(ScenarioResult {
        config: config.clone(),
        trace,
        metrics,
        plots,
    })
}

fn tank_metrics(
    trace: &SimTrace,
    sc: &TwoTankScenario,
    config: &ScenarioConfig,
) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    let t = &trace.time;
    let r = trace.channel("y_ref")?;
    let from = sc.fault_time;
    let post = |name: &str| -> Result<f64> {
        Ok(rms_where(t, trace.channel(name)?, r, |s| s >= from))
    };
    let before_fault = t.iter().rposition(|s| *s < sc.fault_time).unwrap_or(0);
    let check = trace
        .index_at(sc.accommodation_time + 1.0)
        .unwrap_or(trace.len() - 1);
    let primary = if config.toggles.accommodation { "acc" } else { "noacc" };
    m.insert("post_fault_rms_unaccommodated".into(), post("noacc_y")?);
    if config.toggles.accommodation {
        let acc = post("acc_y")?;
        m.insert("post_fault_rms_accommodated".into(), acc);
        m.insert(
            "post_fault_rms_ratio".into(),
            acc / m["post_fault_rms_unaccommodated"],
        );
        // Both runs are identical until accommodation starts.
        let after = |name: &str| -> Result<f64> {
            Ok(rms_where(t, trace.channel(name)?, r, |s| s >= sc.accommodation_time))
        };
        m.insert(
            "post_accommodation_rms_ratio".into(),
            after("acc_y")? / after("noacc_y")?,
        );
    }
    m.insert(
        "post_fault_rms".into(),
        post(&format!("{primary}_y"))?,
    );
    m.insert(
        "varpi_at_fault".into(),
        trace.channel(&format!("{primary}_varpi_e"))?[before_fault],
    );
    let w_e = trace.channel(&format!("{primary}_w_e"))?;
    m.insert("fault_estimate_at_check".into(), w_e[check]);
    let tail = &w_e[check..];
    m.insert(
        "fault_estimate_rms_error_after_check".into(),
        (tail.iter().map(|v| (v - sc.fault).powi(2)).sum::<f64>() / tail.len() as f64).sqrt(),
    );
    Ok(m)
}
