use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{abs_integral, noise_source, OutputChannel, ScenarioConfig, ScenarioParams, ScenarioResult};
use crate::control::{rigid_pi_control, PiGains};
use crate::error::{Error, Result};
use crate::estimators::{inertia_regressor, product_regressor, InertiaRegression};
use crate::io::PlotSpec;
use crate::plants::RigidBodyPlant;
use crate::sim::rk4_step;
use crate::streaming::MatchedInputFilter;
use crate::trace::SimTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodyScenario {
    pub true_inertia: [f64; 3],
    /// Inertias used by the controller until identification succeeds, and
    /// throughout the false-inertia variant.
    pub false_inertia: [f64; 3],
    pub initial_rate: [f64; 3],
    pub damping: f64,
    pub natural_freq: f64,
    /// Largest regressor condition number accepted by the identification.
    pub max_condition: f64,
    /// Time at which the inertia estimates are scored.
    pub check_time: f64,
}

impl Default for RigidBodyScenario {
    fn default() -> Self {
        Self {
            true_inertia: [0.4, 0.3, 0.2],
            false_inertia: [0.2, 0.1, 0.1],
            initial_rate: [0.5, -0.3, 0.4],
            damping: 0.707,
            natural_freq: 0.5,
            max_condition: 1e3,
            check_time: 5.0,
        }
    }
}

impl RigidBodyScenario {
    pub(crate) fn event_times(&self) -> Vec<(&'static str, f64)> {
        vec![("check_time", self.check_time)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Identified,
    True,
    False,
}

impl Variant {
    fn prefix(self) -> &'static str {
        match self {
            Variant::Identified => "id",
            Variant::True => "true",
            Variant::False => "false",
        }
    }
}

struct Run {
    w: [Vec<f64>; 3],
    u: [Vec<f64>; 3],
    w_e: [Vec<f64>; 3],
    wd_e: [Vec<f64>; 3],
    inertia: [Vec<f64>; 3],
}

fn simulate(config: &ScenarioConfig, sc: &RigidBodyScenario, variant: Variant) -> Result<Run> {
    let plant = RigidBodyPlant {
        inertia: sc.true_inertia,
    };
    let gains = [PiGains::from_damping(sc.damping, sc.natural_freq); 3];
    let mut channels = [
        OutputChannel::new(config)?,
        OutputChannel::new(config)?,
        OutputChannel::new(config)?,
    ];
    let mut input_filters = [
        channels[0].matched_filter(1)?,
        channels[1].matched_filter(1)?,
        channels[2].matched_filter(1)?,
    ];
    // Cross products of the measured rates, averaged like ẇ_e. The axis
    // noises are independent, so the products carry no noise bias.
    let mut product_filters = [
        channels[0].matched_filter(1)?,
        channels[1].matched_filter(1)?,
        channels[2].matched_filter(1)?,
    ];
    let mut noise = noise_source(config);
    let mut regression = InertiaRegression::new(sc.max_condition);
    let mut inertia = match variant {
        Variant::True => sc.true_inertia,
        _ => sc.false_inertia,
    };
    let h = config.step;
    let n = config.steps();
    let mut run = Run {
        w: Default::default(),
        u: Default::default(),
        w_e: Default::default(),
        wd_e: Default::default(),
        inertia: Default::default(),
    };

    let mut x = sc.initial_rate.to_vec();
    let mut integral = [0.0; 3];
    let mut u_prev = [0.0; 3];
    for k in 0..=n {
        let t = k as f64 * h;
        let accel = plant.angular_accel(&x, &u_prev);
        let mut w_e = [0.0; 3];
        let mut wd_e = [0.0; 3];
        let mut all_warm = true;
        let mut measured = [0.0; 3];
        for i in 0..3 {
            measured[i] = x[i] + noise.sample();
            let (est, warm) = channels[i].update(t, measured[i], &[x[i], accel[i]])?;
            w_e[i] = est[0];
            wd_e[i] = est[1];
            all_warm &= warm;
        }

        // ẇ_e averages ẇ over the window, so it is paired with the input
        // averaged the same way. Exact ẇ at t⁻ pairs with the input held
        // over the previous step.
        let block = if all_warm {
            let averaged = |filters: &[MatchedInputFilter; 3]| {
                let mut out = [0.0; 3];
                for (o, f) in out.iter_mut().zip(filters) {
                    *o = f.value().unwrap_or(f64::NAN);
                }
                out
            };
            let (u_avg, p_avg) = (averaged(&input_filters), averaged(&product_filters));
            p_avg
                .iter()
                .chain(&u_avg)
                .all(|v| v.is_finite())
                .then(|| (product_regressor(p_avg, wd_e), u_avg))
        } else if config.toggles.truth_fed && k > 0 {
            Some((inertia_regressor(w_e, wd_e), u_prev))
        } else {
            None
        };
        if let (Variant::Identified, Some((a, u_avg))) = (variant, block) {
            regression.push_block(a, u_avg);
            if let Ok(sol) = regression.solve() {
                if sol.iter().all(|v| *v > 0.0) {
                    inertia = sol;
                }
            }
        }

        let u = rigid_pi_control(w_e, integral, inertia, gains)?;
        for i in 0..3 {
            run.w[i].push(x[i]);
            run.u[i].push(u[i]);
            run.w_e[i].push(w_e[i]);
            run.wd_e[i].push(wd_e[i]);
            run.inertia[i].push(inertia[i]);
            integral[i] += h * w_e[i];
            input_filters[i].push(u[i]);
        }
        let [m1, m2, m3] = measured;
        for (f, p) in product_filters.iter_mut().zip([m2 * m3, m1 * m3, m1 * m2]) {
            f.push(p);
        }
        if k < n {
            x = rk4_step(&plant, t, &x, &u, h)?;
        }
        u_prev = u;
    }
    Ok(run)
}

pub fn run_rigidbody(config: &ScenarioConfig) -> Result<ScenarioResult> {
    let ScenarioParams::Rigidbody(sc) = &config.params else {
        return Err(Error::Config("rigidbody run needs rigidbody params".into()));
    };
    if let Some(i) = sc.true_inertia.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Config(format!("true inertia I{} must be positive", i + 1)));
    }
    let mut variants = Vec::new();
    if config.toggles.identification {
        variants.push(Variant::Identified);
    }
    variants.extend([Variant::True, Variant::False]);

    let h = config.step;
    let mut trace = SimTrace::new::<&str>(&[]);
    trace.time = (0..=config.steps()).map(|k| k as f64 * h).collect();
    for i in 0..3 {
        trace.add_channel(format!("I{}", i + 1), vec![sc.true_inertia[i]; trace.len()])?;
    }
    for v in &variants {
        let run = simulate(config, sc, *v)?;
        let p = v.prefix();
        for (i, ((w, u), (w_e, wd_e))) in run
            .w
            .into_iter()
            .zip(run.u)
            .zip(run.w_e.into_iter().zip(run.wd_e))
            .enumerate()
        {
            trace.add_channel(format!("{p}_w{}", i + 1), w)?;
            trace.add_channel(format!("{p}_u{}", i + 1), u)?;
            if *v == Variant::Identified {
                trace.add_channel(format!("{p}_w{}_e", i + 1), w_e)?;
                trace.add_channel(format!("{p}_wd{}_e", i + 1), wd_e)?;
            }
        }
        if *v == Variant::Identified {
            for (i, est) in run.inertia.into_iter().enumerate() {
                trace.add_channel(format!("I{}_e", i + 1), est)?;
            }
        }
    }

    let metrics = rigid_metrics(&trace, &variants, sc)?;
    let mut plots = Vec::new();
    for v in &variants {
        let p = v.prefix();
        let mut plot = PlotSpec::new(
            &format!("rates_{p}"),
            &format!("Angular rates, {} inertias [rad/s]", match v {
                Variant::Identified => "identified",
                Variant::True => "true",
                Variant::False => "false",
            }),
        );
        for i in 1..=3 {
            plot = plot.solid(&format!("{p}_w{i}"));
        }
        plots.push(plot);
    }
    if config.toggles.identification {
        plots.push(
            PlotSpec::new("inertia_estimates", "On-line inertia estimates vs true values [kg m²]")
                .solid("I1_e")
                .solid("I2_e")
                .solid("I3_e")
                .dashed("I1")
                .dashed("I2")
                .dashed("I3"),
        );
    }
    Ok(ScenarioResult {
        config: config.clone(),
        trace,
        metrics,
        plots,
    })
}

fn rigid_metrics(
    trace: &SimTrace,
    variants: &[Variant],
    sc: &RigidBodyScenario,
) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    for v in variants {
        let p = v.prefix();
        let w: Vec<&[f64]> = (1..=3)
            .map(|i| trace.channel(&format!("{p}_w{i}")))
            .collect::<Result<_>>()?;
        let name = match v {
            Variant::Identified => "stabilization_identified",
            Variant::True => "stabilization_true",
            Variant::False => "stabilization_false",
        };
        m.insert(name.into(), abs_integral(&trace.time, &w));
    }
    if variants.contains(&Variant::Identified) {
        let rel_error = |idx: usize| -> Result<f64> {
            let mut worst: f64 = 0.0;
            for i in 0..3 {
                let est = trace.channel(&format!("I{}_e", i + 1))?[idx];
                worst = worst.max((est / sc.true_inertia[i] - 1.0).abs());
            }
            Ok(worst)
        };
        let check = trace
            .index_at(sc.check_time)
            .ok_or_else(|| Error::Config("check_time beyond the trace".into()))?;
        m.insert("inertia_rel_error_at_check".into(), rel_error(check)?);
        m.insert("inertia_rel_error_final".into(), rel_error(trace.len() - 1)?);
        for i in 0..3 {
            m.insert(
                format!("I{}_at_check", i + 1),
                trace.channel(&format!("I{}_e", i + 1))?[check],
            );
        }
    }
    Ok(m)
}
