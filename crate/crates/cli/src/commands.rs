//! Subcommand drivers. Exit codes: 0 on completion, 2 when configuration
//! or preconditions reject the request, 3 when the solver aborts mid-run,
//! 1 when a verification check fails.

use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use slagflow_core::flow::{
    run, stability_certificate, CertificateStatus, RunEvent, RunOutcome, StabilityCertificate,
};
use slagflow_core::initial::build_initial;

use crate::config::{load_config, ConfigError, ExperimentConfig};
use crate::output::{
    write_certificate, write_snapshot, ResidualWriter, SeriesWriter, SERIES_HEADER,
};
use crate::suites::{run_suite, SuiteKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// Everything one run produces, with errors already folded into the exit
/// code so sweep entries never bring the whole process down.
pub struct RunProducts {
    pub exit: i32,
    pub outcome: Option<RunOutcome>,
    pub certificate: Option<StabilityCertificate>,
    /// Diagnostic for stderr; present whenever exit != 0.
    pub message: Option<String>,
}

impl RunProducts {
    fn rejected(message: String) -> Self {
        RunProducts {
            exit: EXIT_REJECTED,
            outcome: None,
            certificate: None,
            message: Some(message),
        }
    }
}

/// Execute one configured run, writing artifacts under `out_root`.
pub fn execute_run(config: &ExperimentConfig, out_root: &Path) -> RunProducts {
    match try_run(config, out_root) {
        Ok(products) => products,
        Err(e) => RunProducts::rejected(e.to_string()),
    }
}

fn try_run(config: &ExperimentConfig, out_root: &Path) -> Result<RunProducts, ConfigError> {
    config.check()?;
    let atlas = config.build_atlas()?;
    let data = config.initial_data()?;
    let u0 = build_initial(&atlas, &data)?;
    let params = config.flow_params();

    // Component normalization folds "." segments away so the default
    // directory does not leave a trailing dot that mkdir rejects.
    let out_dir: PathBuf = out_root
        .join(&config.output.directory)
        .components()
        .collect();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", out_dir.display())))?;
    let series_path = out_dir.join(&config.output.series);
    let mut series = SeriesWriter::create(&series_path)
        .map_err(|e| ConfigError(format!("cannot write {}: {e}", series_path.display())))?;
    let mut residuals = if params.residual_check_every > 0 {
        let path = out_dir.join("residuals.csv");
        Some(
            ResidualWriter::create(&path)
                .map_err(|e| ConfigError(format!("cannot write {}: {e}", path.display())))?,
        )
    } else {
        None
    };

    let snapshot_every = config.output.snapshot_every;
    let mut write_failure: Option<io::Error> = None;
    let outcome = run(&atlas, &u0, &params, |event| {
        if write_failure.is_some() {
            return;
        }
        let wrote = match event {
            RunEvent::Monitor(row) => series.row(row),
            RunEvent::Residual(row) => match residuals.as_mut() {
                Some(w) => w.row(row),
                None => Ok(()),
            },
            RunEvent::Step { step, t, field, .. } => {
                if snapshot_every > 0 && step % snapshot_every == 0 {
                    let path = out_dir.join(format!("snapshot_{step:06}.json"));
                    write_snapshot(&path, config, &atlas, step, t, field)
                } else {
                    Ok(())
                }
            }
        };
        if let Err(e) = wrote {
            write_failure = Some(e);
        }
    })?;
    series
        .finish()
        .map_err(|e| ConfigError(format!("series write failed: {e}")))?;
    if let Some(w) = residuals {
        w.finish()
            .map_err(|e| ConfigError(format!("residual write failed: {e}")))?;
    }
    if let Some(e) = write_failure {
        return Err(ConfigError(format!("artifact write failed: {e}")));
    }

    let certificate = stability_certificate(&atlas, &params, &outcome);
    write_certificate(&out_dir.join("certificate.json"), &certificate, &outcome)
        .map_err(|e| ConfigError(format!("certificate write failed: {e}")))?;

    let label = if outcome.abort.is_some() {
        "snapshot_abort.json"
    } else {
        "snapshot_final.json"
    };
    write_snapshot(
        &out_dir.join(label),
        config,
        &atlas,
        outcome.steps,
        outcome.final_t,
        &outcome.final_field,
    )
    .map_err(|e| ConfigError(format!("snapshot write failed: {e}")))?;

    let (exit, message) = if let Some(abort) = &outcome.abort {
        (
            EXIT_ABORTED,
            Some(format!(
                "solver aborted at t = {:.6e} (step {}): {}; diagnostic state in {label}",
                abort.t, abort.step, abort.error
            )),
        )
    } else if outcome.gate_ok == Some(false) {
        (
            EXIT_REJECTED,
            Some(format!(
                "stability precondition failed: initial max chi = {:.6} exceeds 1 + epsilon = {:.6}; run completed for diagnosis",
                outcome.initial_max_chi,
                1.0 + params.epsilon
            )),
        )
    } else {
        (EXIT_OK, None)
    };
    Ok(RunProducts {
        exit,
        outcome: Some(outcome),
        certificate: Some(certificate),
        message,
    })
}

fn status_name(status: &CertificateStatus) -> &'static str {
    match status {
        CertificateStatus::Pass => "Pass",
        CertificateStatus::Fail => "Fail",
        CertificateStatus::Inconclusive => "Inconclusive",
        CertificateStatus::PreconditionFailed => "PreconditionFailed",
    }
}

pub fn cmd_run(config_path: &Path, out_root: &Path) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration rejected: {e}");
            return EXIT_REJECTED;
        }
    };
    let products = execute_run(&config, out_root);
    if let Some(message) = &products.message {
        eprintln!("{message}");
    }
    if let (Some(outcome), Some(cert)) = (&products.outcome, &products.certificate) {
        println!(
            "steps {}  t {:.6}  converged {}  certificate {}",
            outcome.steps,
            outcome.final_t,
            outcome.converged,
            status_name(&cert.status)
        );
    }
    products.exit
}

pub fn cmd_verify(suite: SuiteKind) -> i32 {
    match run_suite(suite) {
        Err(e) => {
            eprintln!("suite could not run: {e}");
            EXIT_REJECTED
        }
        Ok(report) => {
            report.print();
            match report.first_failure() {
                Some(check) => {
                    eprintln!("FAIL: {}", check.name);
                    EXIT_CHECK_FAILED
                }
                None => {
                    println!("PASS: {} suite", report.suite);
                    EXIT_OK
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

const SWEEP_PARAMETERS: [&str; 4] = ["epsilon", "amplitude", "resolution", "kappa"];

fn apply_parameter(
    config: &ExperimentConfig,
    param: &str,
    token: &str,
) -> Result<ExperimentConfig, ConfigError> {
    let mut entry = config.clone();
    match param {
        "epsilon" => {
            entry.flow.epsilon = parse_value(param, token)?;
        }
        "amplitude" => {
            entry.initial.amplitude = Some(parse_value(param, token)?);
        }
        "kappa" => {
            entry.base.kappa = Some(parse_value(param, token)?);
        }
        "resolution" => {
            entry.base.resolution = token.parse().map_err(|_| {
                ConfigError(format!("resolution value {token:?} is not a whole number"))
            })?;
        }
        _ => unreachable!("parameter vetted by caller"),
    }
    entry.output.directory = format!("{}/{param}_{token}", entry.output.directory);
    Ok(entry)
}

fn parse_value(param: &str, token: &str) -> Result<f64, ConfigError> {
    token
        .parse::<f64>()
        .map_err(|_| ConfigError(format!("{param} value {token:?} is not a number")))
}

pub fn cmd_sweep(config_path: &Path, param: &str, values: &str, out_root: &Path) -> i32 {
    let config = match load_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration rejected: {e}");
            return EXIT_REJECTED;
        }
    };
    if !SWEEP_PARAMETERS.contains(&param) {
        eprintln!(
            "unknown sweep parameter {param:?}; expected one of {}",
            SWEEP_PARAMETERS.join(", ")
        );
        return EXIT_REJECTED;
    }
    let tokens: Vec<&str> = values
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        eprintln!("--values lists no parameter values");
        return EXIT_REJECTED;
    }

    let pool = match worker_pool(tokens.len()) {
        Ok(pool) => pool,
        Err(message) => {
            eprintln!("{message}");
            return EXIT_REJECTED;
        }
    };
    let out_root: PathBuf = out_root.to_path_buf();
    let entries: Vec<(String, RunProducts)> = pool.install(|| {
        tokens
            .par_iter()
            .map(|token| {
                let products = match apply_parameter(&config, param, token) {
                    Ok(entry) => execute_run(&entry, &out_root),
                    Err(e) => RunProducts::rejected(e.to_string()),
                };
                (token.to_string(), products)
            })
            .collect()
    });

    let sweep_dir: PathBuf = out_root
        .join(&config.output.directory)
        .components()
        .collect();
    if let Err(e) = std::fs::create_dir_all(&sweep_dir) {
        eprintln!("cannot create {}: {e}", sweep_dir.display());
        return EXIT_REJECTED;
    }
    let combined = sweep_dir.join("sweep.csv");
    if let Err(e) = write_combined(&combined, param, &entries) {
        eprintln!("cannot write {}: {e}", combined.display());
        return EXIT_REJECTED;
    }

    let mut all_ok = true;
    for (token, products) in &entries {
        let verdict = match (&products.certificate, products.exit) {
            (Some(cert), _) => status_name(&cert.status).to_string(),
            (None, _) => "not run".to_string(),
        };
        println!(
            "{param} = {token}: exit {}  certificate {verdict}",
            products.exit
        );
        if let Some(message) = &products.message {
            eprintln!("  {message}");
        }
        all_ok &= products.exit == EXIT_OK;
    }
    if all_ok {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn worker_pool(entries: usize) -> Result<rayon::ThreadPool, String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(cap) = std::env::var("SLAGFLOW_THREADS") {
        let cap: usize = cap
            .parse()
            .ok()
            .filter(|c| *c >= 1)
            .ok_or_else(|| format!("SLAGFLOW_THREADS = {cap:?} is not a positive count"))?;
        builder = builder.num_threads(cap.min(entries.max(1)));
    }
    builder
        .build()
        .map_err(|e| format!("cannot start worker pool: {e}"))
}

fn write_combined(
    path: &Path,
    param: &str,
    entries: &[(String, RunProducts)],
) -> io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{param},{SERIES_HEADER}")?;
    for (token, products) in entries {
        let Some(outcome) = &products.outcome else {
            continue;
        };
        for r in &outcome.series {
            writeln!(
                out,
                "{token},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.dt,
                r.sup_u,
                r.max_chi,
                r.max_vartheta,
                r.max_theta2,
                r.max_upsilon2,
                r.max_chi_p_theta2,
                r.min_theta,
                r.max_theta,
                r.vartheta_slope
            )?;
        }
    }
    out.flush()
}
