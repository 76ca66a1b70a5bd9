//! Time integration of the potential flow du/dt = theta(Hess u) with
//! classical RK4, parabolic step-size control, per-step monitoring, and a
//! machine-checkable stability certificate summarizing each run.

use serde::Serialize;
use std::collections::VecDeque;

use crate::atlas::{MetricAtlas, ScalarField};
use crate::error::{Error, Result};
use crate::jet::covariant_jet;
use crate::lagrangian::{
    geometry_summary, pointwise_angle, quick_summary, rho_flow_defect, vartheta_flow_defect,
};
use crate::linalg::{sym_eigen, Mat};

// ---------------------------------------------------------------------------
// Parameters and reporting types
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct FlowParams {
    /// Final time; the run also stops early once the potential has decayed
    /// below `convergence_threshold`.
    pub t_end: f64,
    /// Parabolic step fraction: dt = cfl * h^2 / s_max with s_max the
    /// largest eigenvalue of the inverse base metric over active nodes.
    pub cfl: f64,
    /// Hard cap on the step size.
    pub dt_max: f64,
    /// Smallness parameter entering the entry gate (max chi <= 1 + epsilon)
    /// and the certified decay-rate bound.
    pub epsilon: f64,
    /// Exponent p in the chi^p Theta^2 monitor.
    pub p_exponent: f64,
    /// Record a full derivative-based monitor row every this many steps.
    pub monitor_every: usize,
    /// Evaluate the evolution-identity residuals every this many steps;
    /// 0 disables the (expensive) check.
    pub residual_check_every: usize,
    /// When set, a violated entry gate marks the run precondition-failed;
    /// when unset the violation only produces a warning flag.
    pub stability_gate: bool,
    /// Gauge-fixed sup threshold that counts as convergence to the zero
    /// section.
    pub convergence_threshold: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            t_end: 1.0,
            cfl: 0.2,
            dt_max: f64::INFINITY,
            epsilon: 0.1,
            p_exponent: 1.0,
            monitor_every: 10,
            residual_check_every: 0,
            stability_gate: false,
            convergence_threshold: 1e-10,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::FlowParameter(msg.into()));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive and finite");
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad("cfl must lie in (0, 0.5]");
        }
        if !(self.dt_max > 0.0) {
            return bad("dt_max must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive and finite");
        }
        if !self.p_exponent.is_finite() {
            return bad("p_exponent must be finite");
        }
        if self.monitor_every == 0 {
            return bad("monitor_every must be at least 1");
        }
        if !(self.convergence_threshold >= 0.0 && self.convergence_threshold.is_finite()) {
            return bad("convergence_threshold must be nonnegative and finite");
        }
        Ok(())
    }
}

/// One full monitor record; every entry is finite by construction (a
/// non-finite candidate row aborts the run instead of being recorded).
#[derive(Clone, Debug, Serialize)]
pub struct MonitorRow {
    pub t: f64,
    pub dt: f64,
    pub sup_u: f64,
    pub max_chi: f64,
    pub max_vartheta: f64,
    pub max_theta2: f64,
    pub max_upsilon2: f64,
    pub max_chi_p_theta2: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    /// Log-slope of max_vartheta over the trailing monitor window; 0.0
    /// until enough positive samples exist.
    pub vartheta_slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    /// Midpoint of the step interval the defects were measured on.
    pub t: f64,
    pub vartheta_defect: f64,
    pub rho_defect: f64,
    pub rho_skipped_fraction: f64,
}

/// Streaming view of a run for loggers and writers. Step events expose the
/// state just advanced to, so observers can snapshot on their own schedule.
pub enum RunEvent<'a> {
    Step {
        step: usize,
        t: f64,
        dt: f64,
        field: &'a ScalarField,
    },
    Monitor(&'a MonitorRow),
    Residual(&'a ResidualRow),
}

#[derive(Debug)]
pub struct AbortInfo {
    pub error: Error,
    pub t: f64,
    pub step: usize,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub series: Vec<MonitorRow>,
    pub residuals: Vec<ResidualRow>,
    pub final_field: ScalarField,
    pub final_t: f64,
    pub steps: usize,
    pub converged: bool,
    pub initial_max_chi: f64,
    /// With the gate enabled: whether the initial volume ratio passed
    /// max chi <= 1 + epsilon. None when the gate was not requested.
    pub gate_ok: Option<bool>,
    /// Set when the gate was off but the initial data would have failed it.
    pub gate_warning: bool,
    /// Steps at which the nodal max of chi rose by more than the
    /// max-principle tolerance.
    pub chi_violation_steps: Vec<usize>,
    pub vartheta_violation_steps: Vec<usize>,
    /// Integration failure, if any; the series up to the failure is kept.
    pub abort: Option<AbortInfo>,
}

/// Per-step increase beyond which a monotone quantity counts as violating
/// its maximum principle.
pub const MAX_PRINCIPLE_TOLERANCE: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

/// Largest eigenvalue of the inverse base metric over all active nodes;
/// the parabolic step size divides by it so conformally stretched charts
/// stay inside the diffusion stability region.
pub fn max_diffusion_scale(atlas: &MetricAtlas) -> f64 {
    let n = atlas.dim;
    let mut s_max = 0.0f64;
    for chart in 0..atlas.charts.len() {
        for &(flat, _) in atlas.active_nodes(chart) {
            let inv = atlas.sigma_inv(chart, flat);
            let mut m: Mat = [0.0; 9];
            m[..n * n].copy_from_slice(inv);
            let (vals, _) = sym_eigen(&m, n);
            s_max = s_max.max(vals[n - 1]);
        }
    }
    s_max
}

/// The angle field over active nodes; rim entries stay zero and are never
/// read back (stages re-transfer instead).
fn eval_angle(atlas: &MetricAtlas, field: &ScalarField, out: &mut [Vec<f64>]) -> Result<()> {
    debug_assert!(field.halo_clean);
    for chart in 0..atlas.charts.len() {
        let values = &field.charts[chart];
        for &(flat, iv) in atlas.active_nodes(chart) {
            let theta = pointwise_angle(atlas, chart, values, &iv, flat)?;
            if !theta.is_finite() {
                return Err(Error::NonFinite("angle value"));
            }
            out[chart][flat] = theta;
        }
    }
    Ok(())
}

fn angle_buffer(atlas: &MetricAtlas) -> Vec<Vec<f64>> {
    atlas
        .charts
        .iter()
        .map(|g| vec![0.0; g.node_count()])
        .collect()
}

/// `base + scale * k` on active nodes, rim refreshed by transfer.
fn stage_field(
    atlas: &MetricAtlas,
    base: &ScalarField,
    k: &[Vec<f64>],
    scale: f64,
) -> ScalarField {
    let mut next = base.clone();
    for chart in 0..atlas.charts.len() {
        for &(flat, _) in atlas.active_nodes(chart) {
            next.charts[chart][flat] = base.charts[chart][flat] + scale * k[chart][flat];
        }
    }
    next.halo_clean = false;
    atlas.transfer_scalar(&mut next);
    next
}

/// One classical RK4 step of du/dt = theta(Hess u). Every stage refreshes
/// the halo rim before differentiating.
pub fn rk4_step(atlas: &MetricAtlas, u: &ScalarField, dt: f64) -> Result<ScalarField> {
    let mut k1 = angle_buffer(atlas);
    let mut k2 = angle_buffer(atlas);
    let mut k3 = angle_buffer(atlas);
    let mut k4 = angle_buffer(atlas);
    eval_angle(atlas, u, &mut k1)?;
    let s1 = stage_field(atlas, u, &k1, 0.5 * dt);
    eval_angle(atlas, &s1, &mut k2)?;
    let s2 = stage_field(atlas, u, &k2, 0.5 * dt);
    eval_angle(atlas, &s2, &mut k3)?;
    let s3 = stage_field(atlas, u, &k3, dt);
    eval_angle(atlas, &s3, &mut k4)?;

    let mut next = u.clone();
    for chart in 0..atlas.charts.len() {
        for &(flat, _) in atlas.active_nodes(chart) {
            let incr = k1[chart][flat]
                + 2.0 * k2[chart][flat]
                + 2.0 * k3[chart][flat]
                + k4[chart][flat];
            next.charts[chart][flat] = u.charts[chart][flat] + dt / 6.0 * incr;
        }
    }
    next.halo_clean = false;
    atlas.transfer_scalar(&mut next);
    Ok(next)
}

// ---------------------------------------------------------------------------
// The run loop
// ---------------------------------------------------------------------------

const MAX_STEP_RETRIES: u32 = 10;
/// Trailing monitor rows entering the running vartheta log-slope.
const SLOPE_WINDOW: usize = 20;
const SLOPE_MIN_SAMPLES: usize = 5;

/// Full derivative-based monitor record for one state. Errs on any failure
/// inside the monitors, including non-finite maxima.
fn monitor_row(
    atlas: &MetricAtlas,
    u: &ScalarField,
    params: &FlowParams,
    t: f64,
    dt: f64,
    slope_window: &mut VecDeque<(f64, f64)>,
) -> Result<MonitorRow> {
    let jet = covariant_jet(atlas, u, 4)?;
    let g = geometry_summary(atlas, u, &jet, params.p_exponent)?;
    let finite = [
        g.sup_u,
        g.max_chi,
        g.max_vartheta,
        g.max_theta2,
        g.max_upsilon2,
        g.max_chi_p_theta2,
        g.min_theta,
        g.max_theta,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("monitor value"));
    }
    if g.max_vartheta > 0.0 {
        if slope_window.len() == SLOPE_WINDOW {
            slope_window.pop_front();
        }
        slope_window.push_back((t, g.max_vartheta.ln()));
    }
    Ok(MonitorRow {
        t,
        dt,
        sup_u: g.sup_u,
        max_chi: g.max_chi,
        max_vartheta: g.max_vartheta,
        max_theta2: g.max_theta2,
        max_upsilon2: g.max_upsilon2,
        max_chi_p_theta2: g.max_chi_p_theta2,
        min_theta: g.min_theta,
        max_theta: g.max_theta,
        vartheta_slope: trailing_slope(slope_window),
    })
}

fn trailing_slope(window: &VecDeque<(f64, f64)>) -> f64 {
    if window.len() < SLOPE_MIN_SAMPLES {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = window.iter().copied().collect();
    match ols_fit(&pts) {
        Some((slope, _, _)) => slope,
        None => 0.0,
    }
}

/// Evolve `initial` under the flow. Setup problems return `Err`;
/// mid-integration failures return `Ok` with `abort` set and the series up
/// to the failure preserved.
pub fn run(
    atlas: &MetricAtlas,
    initial: &ScalarField,
    params: &FlowParams,
    mut observer: impl FnMut(RunEvent),
) -> Result<RunOutcome> {
    params.validate()?;
    let mut u = initial.clone();
    // Start from a consistent rim regardless of how the field was produced.
    atlas.transfer_scalar(&mut u);

    let quick0 = quick_summary(atlas, &u);
    let chi_bound = 1.0 + params.epsilon;
    let gate_ok = if params.stability_gate {
        Some(quick0.max_chi <= chi_bound)
    } else {
        None
    };
    let gate_warning = !params.stability_gate && quick0.max_chi > chi_bound;

    let dt_parabolic = params.cfl * atlas.charts[0].h * atlas.charts[0].h
        / max_diffusion_scale(atlas);
    let mut dt_base = dt_parabolic.min(params.dt_max);

    let mut outcome = RunOutcome {
        series: Vec::new(),
        residuals: Vec::new(),
        final_field: atlas.new_field(),
        final_t: 0.0,
        steps: 0,
        converged: false,
        initial_max_chi: quick0.max_chi,
        gate_ok,
        gate_warning,
        chi_violation_steps: Vec::new(),
        vartheta_violation_steps: Vec::new(),
        abort: None,
    };

    let mut slope_window: VecDeque<(f64, f64)> = VecDeque::new();
    let mut t = 0.0f64;
    let mut step = 0usize;
    let mut prev_quick = quick0;
    let t_eps = 1e-12 * params.t_end.max(1.0);

    // Build a full row for the current state; any failure inside the
    // derivative monitors (branch guard, non-finite entries) is reported as
    // an abort rather than a hard error, keeping the recorded series.
    macro_rules! emit_row {
        ($dt:expr) => {{
            match monitor_row(atlas, &u, params, t, $dt, &mut slope_window) {
                Ok(row) => {
                    observer(RunEvent::Monitor(&row));
                    outcome.series.push(row);
                    true
                }
                Err(error) => {
                    outcome.abort = Some(AbortInfo { error, t, step });
                    false
                }
            }
        }};
    }

    if !emit_row!(dt_base) {
        outcome.final_field = u;
        outcome.final_t = t;
        return Ok(outcome);
    }
    outcome.converged = quick0.sup_u < params.convergence_threshold;

    while !outcome.converged && t_end_remaining(params.t_end, t) > t_eps && outcome.abort.is_none()
    {
        let mut dt = dt_base.min(params.t_end - t);
        let mut retries = 0u32;
        let next = loop {
            match rk4_step(atlas, &u, dt) {
                Ok(next) => break Some(next),
                Err(_) if retries < MAX_STEP_RETRIES => {
                    retries += 1;
                    // Keep the reduction for later steps too: a failure
                    // signals the parabolic estimate was optimistic.
                    dt_base *= 0.5;
                    dt = dt_base.min(params.t_end - t);
                }
                Err(_) => break None,
            }
        };
        let Some(next) = next else {
            outcome.abort = Some(AbortInfo {
                error: Error::NonFiniteEvolution { t, retries },
                t,
                step,
            });
            break;
        };

        let quick = quick_summary(atlas, &next);
        if !(quick.sup_u.is_finite() && quick.max_chi.is_finite() && quick.max_vartheta.is_finite())
        {
            outcome.abort = Some(AbortInfo {
                error: Error::NonFinite("monitor value"),
                t,
                step,
            });
            break;
        }

        let u_prev = std::mem::replace(&mut u, next);
        step += 1;
        t += dt;
        observer(RunEvent::Step {
            step,
            t,
            dt,
            field: &u,
        });

        if quick.max_chi > prev_quick.max_chi + MAX_PRINCIPLE_TOLERANCE {
            outcome.chi_violation_steps.push(step);
        }
        if quick.max_vartheta > prev_quick.max_vartheta + MAX_PRINCIPLE_TOLERANCE {
            outcome.vartheta_violation_steps.push(step);
        }
        prev_quick = quick;
        if quick.sup_u < params.convergence_threshold {
            outcome.converged = true;
        }

        if params.residual_check_every > 0 && step % params.residual_check_every == 0 {
            let vartheta_defect = vartheta_flow_defect(atlas, &u_prev, &u, dt)?;
            let rho = rho_flow_defect(atlas, &u_prev, &u, dt)?;
            let row = ResidualRow {
                t: t - 0.5 * dt,
                vartheta_defect,
                rho_defect: rho.max_abs,
                rho_skipped_fraction: rho.skipped_fraction,
            };
            observer(RunEvent::Residual(&row));
            outcome.residuals.push(row);
        }

        let due = step % params.monitor_every == 0
            || outcome.converged
            || t_end_remaining(params.t_end, t) <= t_eps;
        if due && !emit_row!(dt) {
            break;
        }
    }

    outcome.final_field = u;
    outcome.final_t = t;
    outcome.steps = step;
    Ok(outcome)
}

fn t_end_remaining(t_end: f64, t: f64) -> f64 {
    t_end - t
}

// ---------------------------------------------------------------------------
// Stability certificate
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CertificateStatus {
    Pass,
    Fail,
    /// Too little certified data to decide either way.
    Inconclusive,
    /// The entry gate was requested and the initial data failed it.
    PreconditionFailed,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityCertificate {
    pub status: CertificateStatus,
    /// Whether the smallness parameter satisfies 3 epsilon <= 1.
    pub epsilon_admissible: bool,
    /// Entry-gate verdict (None when the gate was off).
    pub chi_gate: Option<bool>,
    pub initial_max_chi: f64,
    /// The bound 1 + epsilon that chi must stay under.
    pub chi_bound: f64,
    /// Whether every recorded max chi stayed at or under the bound.
    pub chi_bounded: bool,
    /// Whether no step raised the nodal chi max beyond the max-principle
    /// tolerance.
    pub chi_monotone: bool,
    /// Whether max chi^p Theta^2 never exceeded its early-window maximum by
    /// more than 5 percent.
    pub chi_p_theta2_bounded: bool,
    /// OLS log-slope of max_vartheta over the whole recorded series.
    pub fitted_vartheta_rate: Option<f64>,
    /// 95 percent confidence band for the fitted rate.
    pub rate_band: Option<(f64, f64)>,
    /// Certified decay-rate bound -2(n-1)/(1+epsilon^2).
    pub rate_bound: f64,
    /// Whether the whole confidence band sits at or below the bound.
    pub rate_ok: Option<bool>,
    pub converged: bool,
    pub notes: Vec<String>,
}

/// Minimum monitor rows for a decay-rate fit (and for a non-converged run
/// to be judged at all).
const MIN_FIT_SAMPLES: usize = 10;
/// Allowed relative excursion of chi^p Theta^2 above its early-window max.
const THETA2_EXCURSION: f64 = 0.05;

/// Two-sided 95 percent Student-t quantile, nearest-lower-df lookup.
fn t_quantile_95(df: usize) -> f64 {
    const TABLE: [(usize, f64); 13] = [
        (1, 12.706),
        (2, 4.303),
        (3, 3.182),
        (4, 2.776),
        (5, 2.571),
        (6, 2.447),
        (8, 2.306),
        (10, 2.228),
        (15, 2.131),
        (20, 2.086),
        (30, 2.042),
        (60, 2.000),
        (120, 1.980),
    ];
    let mut q = 1.960;
    for &(d, v) in TABLE.iter().rev() {
        if df < d {
            q = v;
        }
    }
    if df < 1 {
        return f64::INFINITY;
    }
    q
}

/// Least-squares line fit returning (slope, stderr of slope, df).
fn ols_fit(pts: &[(f64, f64)]) -> Option<(f64, f64, usize)> {
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in pts {
        sxx += (x - tm) * (x - tm);
        sxy += (x - tm) * (y - ym);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let mut ss_res = 0.0;
    for &(x, y) in pts {
        let r = y - intercept - slope * x;
        ss_res += r * r;
    }
    let df = n - 2;
    let se = (ss_res / df as f64 / sxx).sqrt();
    Some((slope, se, df))
}

/// Judge a completed run against the certified stability statement: volume
/// ratio pinned near 1, the curvature-weighted third-derivative monitor
/// bounded, and the gradient energy decaying at least at the certified
/// exponential rate.
pub fn stability_certificate(
    atlas: &MetricAtlas,
    params: &FlowParams,
    outcome: &RunOutcome,
) -> StabilityCertificate {
    let mut notes = Vec::new();
    let epsilon_admissible = 3.0 * params.epsilon <= 1.0;
    if !epsilon_admissible {
        notes.push(format!(
            "epsilon {} violates the admissibility bound 3*epsilon <= 1",
            params.epsilon
        ));
    }
    let chi_bound = 1.0 + params.epsilon;
    let bound_slack = chi_bound * (1.0 + 1e-12);
    let chi_bounded = outcome.series.iter().all(|r| r.max_chi <= bound_slack);
    if !chi_bounded {
        let worst = outcome
            .series
            .iter()
            .map(|r| r.max_chi)
            .fold(f64::NEG_INFINITY, f64::max);
        notes.push(format!("max chi reached {worst}, above bound {chi_bound}"));
    }
    let chi_monotone = outcome.chi_violation_steps.is_empty();
    if !chi_monotone {
        notes.push(format!(
            "max chi rose beyond tolerance at {} steps",
            outcome.chi_violation_steps.len()
        ));
    }
    if !outcome.vartheta_violation_steps.is_empty() {
        notes.push(format!(
            "max vartheta rose beyond tolerance at {} steps (not gating)",
            outcome.vartheta_violation_steps.len()
        ));
    }

    // chi^p Theta^2 must stay within an excursion factor of its maximum over
    // the early window (first tenth of the rows, at least 5).
    let rows = outcome.series.len();
    let early = rows.div_ceil(10).max(5).min(rows);
    let early_max = outcome.series[..early]
        .iter()
        .map(|r| r.max_chi_p_theta2)
        .fold(0.0f64, f64::max);
    let chi_p_theta2_bounded = outcome
        .series
        .iter()
        .all(|r| r.max_chi_p_theta2 <= early_max * (1.0 + THETA2_EXCURSION) + 1e-300);
    if !chi_p_theta2_bounded {
        notes.push("chi^p Theta^2 exceeded its early-window bound".into());
    }

    let n = atlas.dim as f64;
    let rate_bound = -2.0 * (n - 1.0) / (1.0 + params.epsilon * params.epsilon);
    let fit_pts: Vec<(f64, f64)> = outcome
        .series
        .iter()
        .filter(|r| r.max_vartheta > 0.0)
        .map(|r| (r.t, r.max_vartheta.ln()))
        .collect();
    let (fitted_vartheta_rate, rate_band, rate_ok) = if fit_pts.len() >= MIN_FIT_SAMPLES {
        match ols_fit(&fit_pts) {
            Some((slope, se, df)) => {
                let half = t_quantile_95(df) * se;
                let band = (slope - half, slope + half);
                // The whole band must sit at or below the certified bound;
                // faster decay than certified also passes.
                let ok = band.1 <= rate_bound + 1e-9;
                (Some(slope), Some(band), Some(ok))
            }
            None => (None, None, None),
        }
    } else {
        if outcome.converged {
            notes.push(
                "decay rate not fitted: run converged with too few positive samples".into(),
            );
        }
        (None, None, None)
    };
    if let (Some(rate), Some(false)) = (fitted_vartheta_rate, rate_ok) {
        notes.push(format!(
            "fitted vartheta rate {rate} not certified below bound {rate_bound}"
        ));
    }

    let mut status = if outcome.gate_ok == Some(false) {
        notes.push(format!(
            "entry gate failed: initial max chi {} above {}",
            outcome.initial_max_chi, chi_bound
        ));
        CertificateStatus::PreconditionFailed
    } else if outcome.abort.is_some() {
        notes.push("run aborted before completing".into());
        CertificateStatus::Fail
    } else if !outcome.converged && fit_pts.len() < MIN_FIT_SAMPLES {
        notes.push("insufficient monitor data for a verdict".into());
        CertificateStatus::Inconclusive
    } else if epsilon_admissible
        && chi_bounded
        && chi_monotone
        && chi_p_theta2_bounded
        && rate_ok != Some(false)
    {
        CertificateStatus::Pass
    } else {
        CertificateStatus::Fail
    };
    if status == CertificateStatus::Pass && !outcome.converged {
        // A full-length run that never reached the zero section can still
        // pass when its certified quantities all behaved; note it.
        notes.push("run ended at t_end without reaching the convergence threshold".into());
    }
    if outcome.gate_warning {
        notes.push("initial data exceeds the entry gate (gate not enforced)".into());
        if status == CertificateStatus::Pass {
            status = CertificateStatus::Inconclusive;
        }
    }

    StabilityCertificate {
        status,
        epsilon_admissible,
        chi_gate: outcome.gate_ok,
        initial_max_chi: outcome.initial_max_chi,
        chi_bound,
        chi_bounded,
        chi_monotone,
        chi_p_theta2_bounded,
        fitted_vartheta_rate,
        rate_band,
        rate_bound,
        rate_ok,
        converged: outcome.converged,
        notes,
    }
}

// ---------------------------------------------------------------------------
