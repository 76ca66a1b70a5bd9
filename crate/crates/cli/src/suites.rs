//! Verification suites behind `verify <suite>`: randomized identity checks
//! for the angle, convergence-order measurements for the derivative
//! identities, step-residual refinement for the evolution equations, and
//! the frozen reference cases.

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use slagflow_core::atlas::{build_sphere, build_torus, MetricAtlas};
use slagflow_core::flow::{run, FlowParams};
use slagflow_core::initial::{build_initial, InitialData};
use slagflow_core::jet::{commutation_residuals, covariant_jet};
use slagflow_core::lagrangian::{
    induced_metric, lagrangian_angle, theta_gradient_defect, AngleMethod,
};
use slagflow_core::linalg::{complex_det, det, generalized_eigenvalues, invert_spd};
use slagflow_core::oracles::{angle_bruteforce, builtin_cases, cases_to_jsonl, parse_cases, random_pair};
use slagflow_core::stencil::d1;
use slagflow_core::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteKind {
    Angle,
    Commutation,
    Gradient,
    Residuals,
    #[value(name = "oracle_cases")]
    OracleCases,
}

pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn push(&mut self, name: impl Into<String>, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            detail,
            pass,
        });
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn print(&self) {
        for check in &self.checks {
            let tag = if check.pass { "ok  " } else { "FAIL" };
            println!("{tag}  {:<38} {}", check.name, check.detail);
        }
    }
}

pub fn run_suite(kind: SuiteKind) -> Result<SuiteReport, Error> {
    match kind {
        SuiteKind::Angle => angle_suite(),
        SuiteKind::Commutation => commutation_suite(),
        SuiteKind::Gradient => gradient_suite(),
        SuiteKind::Residuals => residuals_suite(),
        SuiteKind::OracleCases => oracle_cases_suite(),
    }
}

// ---------------------------------------------------------------------------
// angle
// ---------------------------------------------------------------------------

const PAIRS_PER_DIM: usize = 5_000;

fn angle_suite() -> Result<SuiteReport, Error> {
    let mut report = SuiteReport {
        suite: "angle",
        checks: Vec::new(),
    };
    let tau = 2.0 * std::f64::consts::PI;
    for n in [2usize, 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + n as u64);
        let mut unitarity = 0.0f64;
        let mut route_gap = 0.0f64;
        let mut oracle_gap = 0.0f64;
        let mut guarded = 0usize;
        let mut capped = 0usize;
        for _ in 0..PAIRS_PER_DIM {
            let (sigma, hess) = random_pair(&mut rng, n);
            let s = &sigma[..n * n];
            let h = &hess[..n * n];

            let sigma_inv = invert_spd(s, n)?;
            let g = induced_metric(s, &sigma_inv[..n * n], h, n);
            let product = det(s, n) * det(&g[..n * n], n);
            let z = complex_det(s, h, n).norm_sqr();
            unitarity = unitarity.max((z - product).abs() / product);

            match lagrangian_angle(s, h, n, AngleMethod::Eigen) {
                Err(Error::BranchGuard(_)) => {
                    guarded += 1;
                    continue;
                }
                Err(e) => return Err(e),
                Ok(eigen) => {
                    let cdet = lagrangian_angle(s, h, n, AngleMethod::ComplexDet)?;
                    let d = (eigen - cdet).abs() % tau;
                    route_gap = route_gap.max(d.min(tau - d));

                    let evs = generalized_eigenvalues(&hess, &sigma, n)?;
                    if evs[..n].iter().any(|l| l.abs() > 10.0) {
                        capped += 1;
                        continue;
                    }
                    let brute = angle_bruteforce(s, h, n)?;
                    let d = (eigen - brute).abs() % tau;
                    oracle_gap = oracle_gap.max(d.min(tau - d));
                }
            }
        }
        report.push(
            format!("unitarity-n{n}"),
            unitarity <= 1e-10,
            format!("max relative defect {unitarity:.3e} over {PAIRS_PER_DIM} pairs (<= 1e-10)"),
        );
        report.push(
            format!("route-agreement-n{n}"),
            route_gap <= 1e-10,
            format!("max angle gap {route_gap:.3e} ({guarded} branch-guarded skipped) (<= 1e-10)"),
        );
        report.push(
            format!("oracle-agreement-n{n}"),
            oracle_gap <= 1e-10,
            format!("max angle gap {oracle_gap:.3e} ({capped} beyond eigenvalue cap skipped) (<= 1e-10)"),
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// commutation
// ---------------------------------------------------------------------------

fn sphere_bump() -> InitialData {
    InitialData::Bump {
        amplitude: 0.1,
        seed: 7,
        bandlimit: 3,
        target_max_chi: None,
    }
}

fn commutation_at(atlas: &MetricAtlas, data: &InitialData) -> Result<(f64, f64), Error> {
    let field = build_initial(atlas, data)?;
    let jet = covariant_jet(atlas, &field, 4)?;
    let rep = commutation_residuals(atlas, &jet, false)?;
    Ok((rep.order3, rep.order4))
}

fn commutation_suite() -> Result<SuiteReport, Error> {
    let mut report = SuiteReport {
        suite: "commutation",
        checks: Vec::new(),
    };
    let coarse = commutation_at(&build_sphere(48, 1.0)?, &sphere_bump())?;
    let fine = commutation_at(&build_sphere(96, 1.0)?, &sphere_bump())?;
    let order3_rate = (coarse.0 / fine.0).log2();
    let order4_rate = (coarse.1 / fine.1).log2();
    report.push(
        "sphere-commutation-order",
        order3_rate >= 3.5,
        format!(
            "third-derivative residual {:.3e} -> {:.3e}, order {order3_rate:.2} (>= 3.5); fourth {:.3e} -> {:.3e}, order {order4_rate:.2}",
            coarse.0, fine.0, coarse.1, fine.1
        ),
    );

    let torus = commutation_at(
        &build_torus(2, 64)?,
        &InitialData::Bump {
            amplitude: 0.3,
            seed: 7,
            bandlimit: 3,
            target_max_chi: None,
        },
    )?;
    report.push(
        "torus-commutation-floor",
        torus.0 < 1e-10,
        format!(
            "third-derivative residual {:.3e} (< 1e-10); fourth {:.3e}",
            torus.0, torus.1
        ),
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// gradient
// ---------------------------------------------------------------------------

fn gradient_suite() -> Result<SuiteReport, Error> {
    let mut report = SuiteReport {
        suite: "gradient",
        checks: Vec::new(),
    };
    let defect_at = |res: usize| -> Result<f64, Error> {
        let atlas = build_sphere(res, 1.0)?;
        let field = build_initial(&atlas, &sphere_bump())?;
        theta_gradient_defect(&atlas, &field)
    };
    let coarse = defect_at(48)?;
    let fine = defect_at(96)?;
    let order = (coarse / fine).log2();
    report.push(
        "sphere-gradient-order",
        order >= 3.5,
        format!("angle-gradient defect {coarse:.3e} -> {fine:.3e}, order {order:.2} (>= 3.5)"),
    );

    // One-dimensional closed form: for u = A cos x the angle gradient is
    // A sin x / (1 + A^2 cos^2 x), reproduced both by differentiating the
    // angle field and by the inverse-metric contraction of the third
    // derivative.
    let amp = 0.5;
    let atlas = build_torus(1, 256)?;
    let field = build_initial(
        &atlas,
        &InitialData::TorusMode {
            amplitude: amp,
            wave: [1, 0, 0],
        },
    )?;
    let jet = covariant_jet(&atlas, &field, 3)?;
    let grid = &atlas.charts[0];
    let mut theta = vec![0.0; grid.node_count()];
    grid.for_each_interior(0, |flat, _| {
        theta[flat] =
            lagrangian_angle(atlas.sigma(0, flat), jet.hess(0, flat), 1, AngleMethod::Eigen)
                .expect("small graph stays on the principal branch");
    });
    let mut fd_gap = 0.0f64;
    let mut traced_gap = 0.0f64;
    grid.for_each_interior(0, |flat, iv| {
        let x = grid.coord(0, iv[0]);
        let analytic = amp * x.sin() / (1.0 + amp * amp * x.cos() * x.cos());
        let fd = d1(grid, iv, 0, |f| theta[f]);
        let upp = jet.hess(0, flat)[0];
        let traced = jet.third(0, flat)[0] / (1.0 + upp * upp);
        fd_gap = fd_gap.max((fd - analytic).abs());
        traced_gap = traced_gap.max((traced - analytic).abs());
    });
    report.push(
        "torus-closed-form-gradient",
        fd_gap <= 1e-6 && traced_gap <= 1e-6,
        format!(
            "closed-form gap: angle-difference route {fd_gap:.3e}, contraction route {traced_gap:.3e} (<= 1e-6)"
        ),
    );
    Ok(report)
}

// ---------------------------------------------------------------------------
// residuals
// ---------------------------------------------------------------------------

struct ResidualLevel {
    vartheta: f64,
    rho: f64,
    skipped: f64,
}

fn residual_level(
    sphere: bool,
    res: usize,
    dt: f64,
    t_end: f64,
    data: &InitialData,
) -> Result<ResidualLevel, Error> {
    let atlas = if sphere {
        build_sphere(res, 1.0)?
    } else {
        build_torus(2, res)?
    };
    let u0 = build_initial(&atlas, data)?;
    let params = FlowParams {
        t_end,
        cfl: 0.45,
        dt_max: dt,
        monitor_every: 1_000_000,
        residual_check_every: 4,
        convergence_threshold: 0.0,
        ..FlowParams::default()
    };
    let outcome = run(&atlas, &u0, &params, |_| {})?;
    if let Some(abort) = &outcome.abort {
        return Err(Error::NonFiniteEvolution {
            t: abort.t,
            retries: 0,
        });
    }
    let mut level = ResidualLevel {
        vartheta: 0.0,
        rho: 0.0,
        skipped: 0.0,
    };
    for row in &outcome.residuals {
        level.vartheta = level.vartheta.max(row.vartheta_defect);
        level.rho = level.rho.max(row.rho_defect);
        level.skipped = level.skipped.max(row.rho_skipped_fraction);
    }
    Ok(level)
}

fn residuals_suite() -> Result<SuiteReport, Error> {
    let mut report = SuiteReport {
        suite: "residuals",
        checks: Vec::new(),
    };
    for sphere in [false, true] {
        let (base_name, data, diffusion) = if sphere {
            (
                "sphere",
                InitialData::Bump {
                    amplitude: 0.15,
                    seed: 13,
                    bandlimit: 2,
                    target_max_chi: None,
                },
                // Largest inverse-metric eigenvalue over the active region
                // for kappa = 1; pins dt to the coarse stability budget.
                1.4884,
            )
        } else {
            (
                "torus",
                InitialData::Bump {
                    amplitude: 0.2,
                    seed: 11,
                    bandlimit: 2,
                    target_max_chi: None,
                },
                1.0,
            )
        };
        let h = if sphere {
            3.2 / 31.0
        } else {
            2.0 * std::f64::consts::PI / 32.0
        };
        let dt = 0.08 * h * h / diffusion;
        let t_end = 16.0 * dt;
        let coarse = residual_level(sphere, 32, dt, t_end, &data)?;
        let fine = residual_level(sphere, 64, dt / 2.0, t_end, &data)?;
        let vr = coarse.vartheta / fine.vartheta;
        let rr = coarse.rho / fine.rho;
        report.push(
            format!("{base_name}-gradient-energy-residual"),
            vr >= 8.0,
            format!(
                "defect {:.3e} -> {:.3e}, refinement factor {vr:.1} (>= 8)",
                coarse.vartheta, fine.vartheta
            ),
        );
        report.push(
            format!("{base_name}-log-volume-residual"),
            rr >= 8.0,
            format!(
                "defect {:.3e} -> {:.3e}, refinement factor {rr:.1} (>= 8), eigenframe skips <= {:.1e}",
                coarse.rho, fine.rho, coarse.skipped.max(fine.skipped)
            ),
        );
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// oracle cases
// ---------------------------------------------------------------------------

fn oracle_cases_suite() -> Result<SuiteReport, Error> {
    let mut report = SuiteReport {
        suite: "oracle_cases",
        checks: Vec::new(),
    };
    let cases = builtin_cases();
    let text = cases_to_jsonl(&cases);
    let reparsed = parse_cases(&text)?;
    report.push(
        "case-file-round-trip",
        reparsed == cases,
        format!("{} cases serialize and reparse bit-exactly", cases.len()),
    );
    for case in &cases {
        let n = case.dim();
        let sigma = case.sigma_flat();
        let hess = case.hess_flat();
        let brute = angle_bruteforce(&sigma, &hess, n)?;
        let eigen = lagrangian_angle(&sigma, &hess, n, AngleMethod::Eigen)?;
        let gap = (brute - case.expected).abs().max((eigen - case.expected).abs());
        report.push(
            format!("case-{}", case.name),
            gap <= case.tolerance,
            format!(
                "expected {:.12}, reference route {brute:.12}, evolution route {eigen:.12} (tolerance {:.1e}, {})",
                case.expected, case.tolerance, case.provenance
            ),
        );
    }
    Ok(report)
}
