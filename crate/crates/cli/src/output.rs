//! Artifact writers: the monitor series CSV, the residual CSV, state
//! snapshots, and the certificate document. Floats in CSV use shortest
//! round-trip decimals; snapshot state arrays carry 17 significant digits
//! so they reparse bit-exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use slagflow_core::atlas::{MetricAtlas, ScalarField};
use slagflow_core::flow::{MonitorRow, ResidualRow, RunOutcome, StabilityCertificate};
use slagflow_core::grid::ChartGrid;

use crate::config::ExperimentConfig;

pub const SERIES_HEADER: &str = "t,dt,sup_u,max_chi,max_vartheta,max_Theta2,max_Upsilon2,max_chi_p_Theta2,min_theta,max_theta,vartheta_slope";
pub const RESIDUALS_HEADER: &str = "t,vartheta_defect,rho_defect,rho_skipped_fraction";

pub struct SeriesWriter {
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{SERIES_HEADER}")?;
        Ok(SeriesWriter { out })
    }

    pub fn row(&mut self, r: &MonitorRow) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{}",
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
        )
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub struct ResidualWriter {
    out: BufWriter<File>,
}

impl ResidualWriter {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{RESIDUALS_HEADER}")?;
        Ok(ResidualWriter { out })
    }

    pub fn row(&mut self, r: &ResidualRow) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{}",
            r.t, r.vartheta_defect, r.rho_defect, r.rho_skipped_fraction
        )
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Nested JSON array of one chart's values, one bracket level per axis.
fn nested_values(grid: &ChartGrid, values: &[f64]) -> String {
    let strides = grid.strides();
    let mut out = String::new();
    fn rec(
        grid: &ChartGrid,
        strides: &[usize; 3],
        values: &[f64],
        axis: usize,
        offset: usize,
        out: &mut String,
    ) {
        out.push('[');
        for i in 0..grid.len[axis] {
            if i > 0 {
                out.push(',');
            }
            let offset = offset + i * strides[axis];
            if axis + 1 == grid.dim {
                out.push_str(&fmt17(values[offset]));
            } else {
                rec(grid, strides, values, axis + 1, offset, out);
            }
        }
        out.push(']');
    }
    rec(grid, &strides, values, 0, 0, &mut out);
    out
}

/// One self-describing JSON document: configuration echo, time stamp, chart
/// layout, and the full state per chart.
pub fn write_snapshot(
    path: &Path,
    config: &ExperimentConfig,
    atlas: &MetricAtlas,
    step: usize,
    t: f64,
    field: &ScalarField,
) -> io::Result<()> {
    let config_echo = serde_json::to_string(config).expect("config serializes");
    let mut doc = String::new();
    doc.push_str("{\n");
    doc.push_str(&format!("  \"t\": {},\n", fmt17(t)));
    doc.push_str(&format!("  \"step\": {step},\n"));
    doc.push_str(&format!("  \"config\": {config_echo},\n"));
    doc.push_str("  \"charts\": [\n");
    for (c, grid) in atlas.charts.iter().enumerate() {
        let len: Vec<String> = grid.len[..grid.dim].iter().map(|l| l.to_string()).collect();
        let origin: Vec<String> = grid.origin[..grid.dim].iter().map(|v| fmt17(*v)).collect();
        doc.push_str(&format!(
            "    {{\"chart\": {c}, \"dim\": {}, \"len\": [{}], \"origin\": [{}], \"h\": {}, \"periodic\": {}, \"active_radius\": {}, \"u\": {}}}{}\n",
            grid.dim,
            len.join(","),
            origin.join(","),
            fmt17(grid.h),
            grid.periodic,
            if grid.periodic { "null".into() } else { fmt17(grid.active_radius) },
            nested_values(grid, &field.charts[c]),
            if c + 1 == atlas.charts.len() { "" } else { "," },
        ));
    }
    doc.push_str("  ]\n}\n");
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(doc.as_bytes())?;
    out.flush()
}

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

#[derive(serde::Serialize)]
struct CertificateDoc<'a> {
    certificate: &'a StabilityCertificate,
    steps: usize,
    final_t: f64,
    converged: bool,
    chi_violation_steps: &'a [usize],
    vartheta_violation_steps: &'a [usize],
    aborted: Option<String>,
}

pub fn write_certificate(
    path: &Path,
    certificate: &StabilityCertificate,
    outcome: &RunOutcome,
) -> io::Result<()> {
    let doc = CertificateDoc {
        certificate,
        steps: outcome.steps,
        final_t: outcome.final_t,
        converged: outcome.converged,
        chi_violation_steps: &outcome.chi_violation_steps,
        vartheta_violation_steps: &outcome.vartheta_violation_steps,
        aborted: outcome.abort.as_ref().map(|a| a.error.to_string()),
    };
    let text = serde_json::to_string_pretty(&doc).expect("certificate serializes");
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()
}

// ---------------------------------------------------------------------------
