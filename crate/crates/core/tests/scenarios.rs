use algdiff::io::csv::write_trace_to;
use algdiff::scenarios::{run, ScenarioConfig, ScenarioId, ScenarioResult};
use serde_json::json;

fn run_with(id: ScenarioId, overrides: serde_json::Value) -> ScenarioResult {
    let config = ScenarioConfig::from_json_overrides(id, &overrides).unwrap();
    run(&config).unwrap()
}

fn max_abs_diff(result: &ScenarioResult, a: &str, b: &str, from: f64) -> f64 {
    let t = &result.trace;
    let (x, y) = (t.channel(a).unwrap(), t.channel(b).unwrap());
    t.time
        .iter()
        .zip(x.iter().zip(y))
        .filter(|(s, _)| **s >= from)
        .map(|(_, (p, q))| (p - q).abs())
        .fold(0.0, f64::max)
}

#[test]
fn rigid_true_inertias_follow_second_order_template() {
    let r = run_with(
        ScenarioId::Rigidbody,
        json!({"noise": {"sigma": 0.0}, "toggles": {"truth_fed": true, "identification": false}}),
    );
    let (xi, wn) = (0.707_f64, 0.5_f64);
    let wd = wn * (1.0 - xi * xi).sqrt();
    let w0 = [0.5, -0.3, 0.4];
    for (i, w0) in w0.iter().enumerate() {
        let w = r.trace.channel(&format!("true_w{}", i + 1)).unwrap();
        let mut worst: f64 = 0.0;
        for (t, got) in r.trace.time.iter().zip(w) {
            // ∫w obeys z̈ + 2ξϖż + ϖ²z = 0 with z(0) = 0, ż(0) = w₀.
            let want = w0 * (-xi * wn * t).exp() * ((wd * t).cos() - xi * wn / wd * (wd * t).sin());
            worst = worst.max((got - want).abs());
        }
        assert!(worst < 1e-3, "axis {} worst {worst}", i + 1);
    }
}

#[test]
fn rigid_identification_converges_noise_free() {
    let r = run_with(ScenarioId::Rigidbody, json!({"noise": {"sigma": 0.0}}));
    assert!(r.metric("inertia_rel_error_at_check").unwrap() < 1e-3);
    assert!(r.metric("stabilization_identified").unwrap() < r.metric("stabilization_false").unwrap());
}

#[test]
fn pert_runs_coincide_without_perturbation() {
    for id in [ScenarioId::Pertlin, ScenarioId::Pertnl] {
        let r = run_with(
            id,
            json!({"params": {"pert": {"perturbation_gain": 0.0, "bias": 0.0}}}),
        );
        // Past the opening transient, over the scoring window. The
        // measurement noise has σ = 0.025.
        let rms = r.trace.rms_between("comp_y", "nocomp_y", 5.0, 20.0).unwrap();
        let peak = max_abs_diff(&r, "comp_y", "nocomp_y", 5.0);
        assert!(rms < 0.025 && peak < 0.05, "{id}: rms gap {rms}, peak {peak}");
    }
}

#[test]
fn pertlin_truth_fed_error_shrinks_with_step() {
    let err = |step: f64| {
        let r = run_with(
            ScenarioId::Pertlin,
            json!({"step": step, "noise": {"sigma": 0.0}, "toggles": {"truth_fed": true, "compensation": true}}),
        );
        max_abs_diff(&r, "comp_y", "y_ref", 5.0)
    };
    let (coarse, fine) = (err(1e-3), err(5e-4));
    assert!(coarse < 3e-3, "{coarse}");
    let ratio = coarse / fine;
    assert!((1.6..2.4).contains(&ratio), "hold error ratio {ratio}");
}

#[test]
fn compensation_off_degrades_tracking() {
    for id in [ScenarioId::Pertlin, ScenarioId::Pertnl] {
        let r = run_with(id, json!({}));
        assert!(
            r.metric("tracking_rms_compensated").unwrap() < r.metric("tracking_rms_uncompensated").unwrap()
        );
        let off = run_with(id, json!({"toggles": {"compensation": false}}));
        assert!(off.trace.channel("comp_y").is_err());
        assert!(off.metric("tracking_rms_ratio").is_none());
    }
}

#[test]
fn accommodation_off_degrades_tracking() {
    let r = run_with(ScenarioId::Twotank, json!({}));
    assert!(
        r.metric("post_fault_rms_accommodated").unwrap()
            < r.metric("post_fault_rms_unaccommodated").unwrap()
    );
    let off = run_with(ScenarioId::Twotank, json!({"toggles": {"accommodation": false}}));
    assert_eq!(
        off.metric("post_fault_rms").unwrap(),
        r.metric("post_fault_rms_unaccommodated").unwrap()
    );
}

#[test]
fn tank_estimates_truth_fed() {
    let r = run_with(
        ScenarioId::Twotank,
        json!({"noise": {"sigma": 0.0}, "toggles": {"truth_fed": true}}),
    );
    assert!((r.metric("varpi_at_fault").unwrap() - 0.2).abs() < 1e-3);
    assert!((r.metric("fault_estimate_at_check").unwrap() - 0.7).abs() < 1e-3);
}

#[test]
fn manipulator_truth_fed_settles() {
    let r = run_with(
        ScenarioId::Manipulator,
        json!({"noise": {"sigma": 0.0}, "toggles": {"truth_fed": true}}),
    );
    assert!(r.metric("tracking_max_error_settled").unwrap() < 1e-4);
    assert!(r.metric("theta_m_rms_online").unwrap() < 1e-12);
}

#[test]
fn reruns_are_byte_identical() {
    for id in ScenarioId::ALL {
        let config = ScenarioConfig::defaults(id);
        let mut first = Vec::new();
        write_trace_to(&run(&config).unwrap().trace, &mut first).unwrap();
        let mut second = Vec::new();
        write_trace_to(&run(&config).unwrap().trace, &mut second).unwrap();
        assert!(first == second, "{id} trace differs between runs");
    }
}

#[test]
fn seed_changes_the_trace() {
    let a = run_with(ScenarioId::Pertlin, json!({"noise": {"seed": 1}}));
    let b = run_with(ScenarioId::Pertlin, json!({"noise": {"seed": 2}}));
    assert_ne!(a.trace.channel("comp_y").unwrap(), b.trace.channel("comp_y").unwrap());
}

#[test]
fn metrics_json_carries_config_and_seed() {
    let r = run_with(ScenarioId::Twotank, json!({"noise": {"seed": 7}}));
    let m = r.metrics_json().unwrap();
    assert_eq!(m["scenario"], "twotank");
    assert_eq!(m["seed"], 7);
    assert!(m["metrics"]["post_fault_rms_ratio"].is_number());
    let back: ScenarioConfig = serde_json::from_value(m["config"].clone()).unwrap();
    assert_eq!(back, r.config);
}

#[test]
fn every_plot_names_existing_channels() {
    for id in ScenarioId::ALL {
        let r = run(&ScenarioConfig::defaults(id)).unwrap();
        assert!(!r.plots.is_empty());
        for p in &r.plots {
            algdiff::io::svg::emit_svg(&r.trace, p).unwrap();
        }
    }
}
