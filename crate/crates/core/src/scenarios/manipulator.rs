use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{noise_source, OutputChannel, ScenarioConfig, ScenarioParams, ScenarioResult};
use crate::control::{hurwitz_gains, manipulator_control, ManipulatorParams, ReferenceTrajectory};
use crate::error::{Error, Result};
use crate::estimators::reconstruct_theta_m;
use crate::io::PlotSpec;
use crate::kernel::EstimatorKernel;
use crate::plants::ManipulatorPlant;
use crate::sim::rk4_step;
use crate::streaming::{differentiate_series, Mode};
use crate::trace::{rms_where, SimTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulatorScenario {
    pub physical: ManipulatorParams,
    pub reference: ReferenceTrajectory,
    /// Closed-loop poles all placed at `−pole`.
    pub pole: f64,
    pub initial_state: [f64; 4],
    /// Abort once `|y|` exceeds this many radians.
    pub divergence_limit: f64,
    /// Start of the tracking-error window (ends at the horizon).
    pub metric_start: f64,
    /// Settling allowance after `metric_start`. The held input leaves an
    /// `O(h)` tracking error while the reference moves; it has decayed by
    /// `metric_start + settle_time`.
    pub settle_time: f64,
    /// Window of the offline, forward-mode re-estimation pass.
    pub offline_window_length: f64,
}

impl Default for ManipulatorScenario {
    fn default() -> Self {
        Self {
            physical: ManipulatorParams::default(),
            reference: ReferenceTrajectory::RestToRestPoly {
                start_value: 0.0,
                end_value: FRAC_PI_4,
                start_time: 1.0,
                end_time: 3.0,
            },
            pole: 6.0,
            initial_state: [0.0; 4],
            divergence_limit: 10.0,
            metric_start: 3.0,
            settle_time: 1.0,
            offline_window_length: 0.3,
        }
    }
}

impl ManipulatorScenario {
    pub(crate) fn event_times(&self) -> Vec<(&'static str, f64)> {
        let mut ev = vec![
            ("metric_start", self.metric_start),
            ("metric_start + settle_time", self.metric_start + self.settle_time),
        ];
        if let ReferenceTrajectory::RestToRestPoly {
            start_time,
            end_time,
            ..
        } = self.reference
        {
            ev.push(("reference start_time", start_time));
            ev.push(("reference end_time", end_time));
        }
        ev
    }
}

const CHANNELS: [&str; 13] = [
    "y_ref", "y", "y_meas", "y_e", "yd_e", "ydd_e", "y3_e", "u", "v", "theta_m", "theta_m_e",
    "estimated", "yd",
];

pub fn run_manipulator(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let ScenarioParams::Manipulator(sc) = &config.params else {
        return Err(Error::Config("manipulator run needs manipulator params".into()));
    };
    if config.estimator.taylor_order < 3 {
        return Err(Error::Config(
            "the manipulator law needs y up to its third derivative (taylor_order ≥ 3)".into(),
        ));
    }
    let params = sc.physical;
    let plant = ManipulatorPlant { params };
    let gains = hurwitz_gains(sc.pole);
    let mut channel = OutputChannel::new(config)?;
    let mut noise = noise_source(config);
    let h = config.step;

    let mut trace = SimTrace::new(&CHANNELS);
    let mut x = sc.initial_state.to_vec();
    for k in 0..=config.steps() {
        let t = k as f64 * h;
        let truth = plant.output_derivatives(&x);
        let y = truth[0];
        if !(y.abs() <= sc.divergence_limit) {
            return Err(Error::Divergence {
                scenario: "manipulator".into(),
                time: t,
                detail: format!("|y| = {} rad exceeds {}", y.abs(), sc.divergence_limit),
            });
        }
        let measured = y + noise.sample();
        let (est, warm) = channel.update(t, measured, &truth)?;
        let y_est = [est[0], est[1], est[2], est[3]];
        let reference = sc.reference.eval(t);
        let c = manipulator_control(y_est, &reference, &params, gains);
        trace.push_row(
            t,
            &[
                reference[0],
                y,
                measured,
                y_est[0],
                y_est[1],
                y_est[2],
                y_est[3],
                c.input,
                c.aux,
                x[0],
                reconstruct_theta_m(y_est[0], y_est[2], &params),
                if warm { 1.0 } else { 0.0 },
                truth[1],
            ],
        );
        if k < config.steps() {
            x = rk4_step(&plant, t, &x, &[c.input], h)?;
        }
    }

    // Offline pass: forward mode over the stored measurement, anchored at
    // the start of each window.
    let offline_cfg = config
        .estimator
        .kernel_config(h)
        .with_window(sc.offline_window_length);
    let kernel = Arc::new(EstimatorKernel::new(offline_cfg)?);
    let estimates = differentiate_series(kernel, Mode::Forward, 0.0, trace.channel("y_meas")?)?;
    let mut theta_off = vec![f64::NAN; trace.len()];
    let mut ydd_off = vec![f64::NAN; trace.len()];
    for e in &estimates {
        let i = (e.anchor_time / h).round() as usize;
        theta_off[i] = reconstruct_theta_m(e.values[0], e.values[2], &params);
        ydd_off[i] = e.values[2];
    }
    trace.add_channel("theta_m_off", theta_off)?;
    trace.add_channel("ydd_off", ydd_off)?;

    let metrics = manipulator_metrics(&trace, sc, config)?;
    Ok(ScenarioResult {
        config: config.clone(),
        trace,
        metrics,
        plots: vec![
            PlotSpec::new("tracking", "Link angle y and reference y* [rad]")
                .solid("y")
                .dashed("y_ref"),
            PlotSpec::new("motor_angle", "Motor angle: true, on-line and off-line estimates [rad]")
                .dashed("theta_m")
                .solid("theta_m_e")
                .solid("theta_m_off"),
            PlotSpec::new("derivative", "Estimated link velocity vs true [rad/s]")
                .solid("yd_e")
                .dashed("yd"),
            PlotSpec::new("input", "Control input u").solid("u"),
        ],
    })
}

fn manipulator_metrics(
    trace: &SimTrace,
    sc: &ManipulatorScenario,
    config: &ScenarioConfig,
) -> Result<BTreeMap<String, f64>> {
    let t = &trace.time;
    let y = trace.channel("y")?;
    let y_ref = trace.channel("y_ref")?;
    let theta = trace.channel("theta_m")?;
    let online = trace.channel("theta_m_e")?;
    let offline = trace.channel("theta_m_off")?;
    let estimated = trace.channel("estimated")?;

    let from = sc.metric_start;
    let mut m = BTreeMap::new();
    m.insert(
        "tracking_rms".into(),
        rms_where(t, y, y_ref, |s| s >= from),
    );
    let max_err = |start: f64| {
        t.iter()
            .zip(y.iter().zip(y_ref))
            .filter(|(s, _)| **s >= start)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    };
    m.insert("tracking_max_error".into(), max_err(from));
    m.insert(
        "tracking_max_error_settled".into(),
        max_err(from + sc.settle_time),
    );

    // Both estimates compared on the samples where each one exists. A
    // truth-fed run carries the exact values as its on-line estimate.
    let online_ready = |i: usize| estimated[i] > 0.5 || config.toggles.truth_fed;
    let both: Vec<usize> = (0..t.len())
        .filter(|&i| online_ready(i) && offline[i].is_finite())
        .collect();
    let rms_on = |est: &[f64]| {
        (both.iter().map(|&i| (est[i] - theta[i]).powi(2)).sum::<f64>() / both.len() as f64).sqrt()
    };
    m.insert("theta_m_rms_online".into(), rms_on(online));
    m.insert("theta_m_rms_offline".into(), rms_on(offline));
    Ok(m)
}
