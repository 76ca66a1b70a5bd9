//! End-to-end acceptance gate. Each test is one numbered criterion with its
//! tolerances pinned; together they cover the angle identities, the
//! derivative identities, evolution residual refinement, the fixed point,
//! linearized decay, the stability certificate on both bases, and
//! bit-exact reproducibility of the run artifacts.
//!
//! The tests share one mutex so each one's wall-clock budget is measured
//! without interference from the others.

use std::process::Command;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use slagflow::suites::{run_suite, SuiteKind};
use slagflow_core::atlas::{build_sphere, build_torus, MetricAtlas};
use slagflow_core::flow::{
    max_diffusion_scale, rk4_step, run, stability_certificate, CertificateStatus, FlowParams,
};
use slagflow_core::initial::{build_initial, InitialData};
use slagflow_core::oracles::linearized_mode_decay;

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn assert_suite_clean(kind: SuiteKind) {
    let report = run_suite(kind).expect("suite runs");
    report.print();
    if let Some(check) = report.first_failure() {
        panic!("check {} failed: {}", check.name, check.detail);
    }
}

fn assert_budget(what: &str, start: Instant, budgeted_seconds: f64) {
    let elapsed = start.elapsed().as_secs_f64();
    println!("{what}: {elapsed:.1} s (budget {budgeted_seconds:.0} s)");
    assert!(
        elapsed < budgeted_seconds,
        "{what} took {elapsed:.1} s, over the {budgeted_seconds:.0} s budget"
    );
}

fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    (n * sty - st * sy) / (n * stt - st * st)
}

// ---------------------------------------------------------------------------

#[test]
fn a1_angle_identity_suite() {
    let _serial = serial();
    let start = Instant::now();
    assert_suite_clean(SuiteKind::Angle);
    assert_budget("angle identities (10^4 pairs)", start, 10.0);
}

#[test]
fn a2_angle_gradient_identity() {
    let _serial = serial();
    let start = Instant::now();
    assert_suite_clean(SuiteKind::Gradient);
    assert_budget("angle-gradient identity", start, 30.0);
}

#[test]
fn a3_commutation_identity() {
    let _serial = serial();
    let start = Instant::now();
    assert_suite_clean(SuiteKind::Commutation);
    assert_budget("derivative commutation", start, 30.0);
}

#[test]
fn a4_evolution_residual_refinement() {
    let _serial = serial();
    let start = Instant::now();
    assert_suite_clean(SuiteKind::Residuals);
    assert_budget("evolution residual refinement", start, 300.0);
}

#[test]
fn a5_zero_section_fixed_point() {
    let _serial = serial();
    let start = Instant::now();
    let bases: [MetricAtlas; 2] = [
        build_torus(2, 32).unwrap(),
        build_sphere(32, 1.0).unwrap(),
    ];
    for atlas in &bases {
        let h = atlas.charts[0].h;
        let dt = 0.2 * h * h / max_diffusion_scale(atlas);
        let mut u = atlas.new_field();
        for _ in 0..1_000 {
            u = rk4_step(atlas, &u, dt).unwrap();
        }
        let sup = u
            .charts
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        println!("zero section after 1000 steps: sup |u| = {sup:.3e}");
        assert!(sup <= 1e-12, "zero section drifted to {sup:.3e}");
    }
    assert_budget("zero-section fixed point", start, 60.0);
}

#[test]
fn a6_linearized_decay_rates() {
    let _serial = serial();
    let start = Instant::now();

    struct DecayCase {
        atlas: MetricAtlas,
        data: InitialData,
        monitor_every: usize,
        expected_rate: f64,
    }
    let cases = [
        DecayCase {
            atlas: build_torus(2, 64).unwrap(),
            data: InitialData::TorusMode {
                amplitude: 1e-3,
                wave: [1, 0, 0],
            },
            monitor_every: 20,
            expected_rate: -1.0,
        },
        DecayCase {
            atlas: build_sphere(64, 1.0).unwrap(),
            data: InitialData::SphereZonal {
                amplitude: 1e-3,
                degree: 1,
            },
            monitor_every: 100,
            expected_rate: -2.0,
        },
    ];
    for case in &cases {
        let u0 = build_initial(&case.atlas, &case.data).unwrap();
        let params = FlowParams {
            t_end: 2.0,
            monitor_every: case.monitor_every,
            convergence_threshold: 0.0,
            ..FlowParams::default()
        };
        let outcome = run(&case.atlas, &u0, &params, |_| {}).unwrap();
        assert!(outcome.abort.is_none(), "decay run aborted");

        let points: Vec<(f64, f64)> = outcome
            .series
            .iter()
            .map(|r| (r.t, r.sup_u.ln()))
            .collect();
        let rate = ols_slope(&points);
        let tolerance = 0.02 * case.expected_rate.abs();
        println!(
            "amplitude decay rate {rate:.5} (expected {} +- {tolerance})",
            case.expected_rate
        );
        assert!(
            (rate - case.expected_rate).abs() <= tolerance,
            "fitted rate {rate:.5} misses {} by more than 2%",
            case.expected_rate
        );

        // Independent endpoint check: the measured decay factor over the
        // whole window must match the closed-form prediction.
        let measured = outcome.series.last().unwrap().sup_u / outcome.series[0].sup_u;
        let predicted = linearized_mode_decay(&case.atlas, &case.data, outcome.final_t).unwrap()
            / linearized_mode_decay(&case.atlas, &case.data, 0.0).unwrap();
        assert!(
            (measured - predicted).abs() <= 1e-3 * predicted,
            "decay factor {measured:.6e} vs predicted {predicted:.6e}"
        );
    }
    assert_budget("linearized decay rates", start, 300.0);
}

#[test]
fn a7_sphere_stability_certificate() {
    let _serial = serial();
    let start = Instant::now();
    let epsilon = 0.1;
    let atlas = build_sphere(64, 1.0).unwrap();
    let data = InitialData::Bump {
        amplitude: 0.1,
        seed: 2025,
        bandlimit: 2,
        target_max_chi: Some(1.0 + 0.5 * epsilon),
    };
    let u0 = build_initial(&atlas, &data).unwrap();
    let params = FlowParams {
        t_end: 14.0,
        epsilon,
        p_exponent: 1.0,
        monitor_every: 40,
        stability_gate: true,
        ..FlowParams::default()
    };
    let outcome = run(&atlas, &u0, &params, |_| {}).unwrap();
    assert!(outcome.abort.is_none(), "stability run aborted");
    assert_eq!(outcome.gate_ok, Some(true), "smallness gate rejected the start");

    // (a) the volume-ratio maximum never increases beyond the per-step slack.
    assert!(
        outcome.chi_violation_steps.is_empty(),
        "max chi rose at steps {:?}",
        outcome.chi_violation_steps
    );

    let certificate = stability_certificate(&atlas, &params, &outcome);
    println!(
        "certificate {:?}: rate {:?} band {:?}, steps {}, final t {:.3}",
        certificate.status,
        certificate.fitted_vartheta_rate,
        certificate.rate_band,
        outcome.steps,
        outcome.final_t
    );

    // (b) gradient energy decays at least 95% as fast as 2/(1+eps^2).
    let fitted = certificate
        .fitted_vartheta_rate
        .expect("enough monitor rows for a fit");
    let bound = -2.0 / (1.0 + epsilon * epsilon) * 0.95;
    assert!(
        fitted <= bound,
        "fitted gradient-energy rate {fitted:.4} above {bound:.4}"
    );

    // (c) the weighted third-derivative monitor stays within 5% of its
    // early-window maximum.
    assert!(certificate.chi_p_theta2_bounded, "chi^p Theta^2 drifted");

    // (d) the run reached the zero section.
    assert!(outcome.converged, "sup |u| never dropped below 1e-10");

    assert_eq!(certificate.status, CertificateStatus::Pass);
    assert_budget("sphere stability certificate", start, 900.0);
}

#[test]
fn a8_torus_gradient_energy_monotone() {
    let _serial = serial();
    let start = Instant::now();
    let atlas = build_torus(2, 32).unwrap();
    let data = InitialData::Bump {
        amplitude: 0.1,
        seed: 77,
        bandlimit: 2,
        target_max_chi: Some(1.05),
    };
    let u0 = build_initial(&atlas, &data).unwrap();
    let params = FlowParams {
        t_end: 3.0,
        monitor_every: 20,
        ..FlowParams::default()
    };
    let outcome = run(&atlas, &u0, &params, |_| {}).unwrap();
    assert!(outcome.abort.is_none(), "flat run aborted");
    assert!(
        outcome.initial_max_chi <= 1.05 + 1e-6,
        "start not scaled to the smallness bound"
    );
    assert!(
        outcome.vartheta_violation_steps.is_empty(),
        "max vartheta rose at steps {:?}",
        outcome.vartheta_violation_steps
    );
    assert_budget("flat gradient-energy monotonicity", start, 300.0);
}

#[test]
fn a9_deterministic_series_output() {
    let _serial = serial();
    let config_text = r#"
        [base]
        kind = "torus"
        n = 2
        resolution = 24

        [initial]
        kind = "bump"
        amplitude = 0.05
        seed = 40
        bandlimit = 2

        [flow]
        t_end = 0.3
        monitor_every = 1
        residual_check_every = 5
    "#;
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.toml");
    std::fs::write(&config_path, config_text).unwrap();

    let run_once = |label: &str| -> (Vec<u8>, Vec<u8>) {
        let out = dir.path().join(label);
        let status = Command::new(env!("CARGO_BIN_EXE_slagflow"))
            .arg("--out")
            .arg(&out)
            .arg("run")
            .arg(&config_path)
            .status()
            .expect("binary launches");
        assert!(status.success(), "run exited with {status}");
        (
            std::fs::read(out.join("series.csv")).unwrap(),
            std::fs::read(out.join("residuals.csv")).unwrap(),
        )
    };
    let (series_a, residuals_a) = run_once("first");
    let (series_b, residuals_b) = run_once("second");
    assert!(!series_a.is_empty());
    assert_eq!(series_a, series_b, "series CSV differs between reruns");
    assert_eq!(residuals_a, residuals_b, "residual CSV differs between reruns");
}
