//! Independent brute-force references for the main code paths: a complex-LU
//! determinant route to the angle, analytic sphere-harmonic restrictions
//! with closed-form covariant jets, linearized decay predictions, and a
//! line-oriented JSON case format for frozen reference values.

use num_complex::Complex64;
use rand::Rng;
use serde_json::Value;

use crate::atlas::{BaseKind, MetricAtlas};
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::linalg::{Mat, MAX_DIM};

// ---------------------------------------------------------------------------
// Brute-force angle
// ---------------------------------------------------------------------------

/// Determinant by dense LU with partial pivoting; deliberately shares no
/// code with the production determinant routines.
fn lu_det(m: &[Complex64], n: usize) -> Complex64 {
    let mut a = m.to_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].norm_sqr() > a[pivot * n + col].norm_sqr() {
                pivot = row;
            }
        }
        if pivot != col {
            for c in 0..n {
                a.swap(pivot * n + c, col * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        if p.norm_sqr() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        det *= p;
        for row in col + 1..n {
            let f = a[row * n + col] / p;
            for c in col..n {
                let sub = f * a[col * n + c];
                a[row * n + c] -= sub;
            }
        }
    }
    det
}

fn real_det(m: &[f64], n: usize) -> f64 {
    let cm: Vec<Complex64> = m.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    lu_det(&cm, n).re
}

/// Solve `sigma x = rhs` by Gaussian elimination with partial pivoting.
fn real_solve(sigma: &[f64], rhs: &[f64], n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * (n + 1)];
    let mut x = vec![0.0; n];
    for r in 0..n {
        for c in 0..n {
            a[r * (n + 1) + c] = sigma[r * n + c];
        }
        a[r * (n + 1) + n] = rhs[r];
    }
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * (n + 1) + col].abs() > a[pivot * (n + 1) + col].abs() {
                pivot = row;
            }
        }
        if pivot != col {
            for c in 0..=n {
                a.swap(pivot * (n + 1) + c, col * (n + 1) + c);
            }
        }
        let p = a[col * (n + 1) + col];
        for row in col + 1..n {
            let f = a[row * (n + 1) + col] / p;
            for c in col..=n {
                let sub = f * a[col * (n + 1) + c];
                a[row * (n + 1) + c] -= sub;
            }
        }
    }
    for row in (0..n).rev() {
        let mut v = a[row * (n + 1) + n];
        for c in row + 1..n {
            v -= a[row * (n + 1) + c] * x[c];
        }
        x[row] = v / a[row * (n + 1) + row];
    }
    x
}

/// The angle through the determinant identity: arg of
/// det(sigma + i Hess) / sqrt(det sigma * det G), whose modulus must be 1
/// for consistent inputs (G = sigma + Hess sigma^{-1} Hess).
pub fn angle_bruteforce(sigma: &[f64], hess: &[f64], n: usize) -> Result<f64> {
    // sigma^{-1} hess column by column, then G, all with local routines.
    let mut sigma_inv_hess = vec![0.0; n * n];
    for col in 0..n {
        let rhs: Vec<f64> = (0..n).map(|r| hess[r * n + col]).collect();
        let x = real_solve(sigma, &rhs, n);
        for row in 0..n {
            sigma_inv_hess[row * n + col] = x[row];
        }
    }
    let mut induced = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let mut v = sigma[r * n + c];
            for k in 0..n {
                v += hess[r * n + k] * sigma_inv_hess[k * n + c];
            }
            induced[r * n + c] = v;
        }
    }
    let norm = (real_det(sigma, n) * real_det(&induced, n)).sqrt();

    let cm: Vec<Complex64> = (0..n * n)
        .map(|i| Complex64::new(sigma[i], hess[i]))
        .collect();
    let z = lu_det(&cm, n) / norm;
    let deviation = (z.norm() - 1.0).abs();
    if !(deviation <= 1e-8) {
        return Err(Error::Unitarity(deviation));
    }
    Ok(z.arg())
}

/// Matched random test distribution: a base metric A^T A + 0.1 I (covering
/// ill-conditioned directions) and a symmetric Hessian with entries in
/// [-3, 3] (large angles without saturating the branch guard).
pub fn random_pair(rng: &mut impl Rng, n: usize) -> (Mat, Mat) {
    let mut a = [0.0; 9];
    for v in a[..n * n].iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut sigma: Mat = [0.0; 9];
    for r in 0..n {
        for c in 0..n {
            let mut v = if r == c { 0.1 } else { 0.0 };
            for k in 0..n {
                v += a[k * n + r] * a[k * n + c];
            }
            sigma[r * n + c] = v;
        }
    }
    let mut hess: Mat = [0.0; 9];
    for r in 0..n {
        for c in r..n {
            let v = rng.gen_range(-3.0..3.0);
            hess[r * n + c] = v;
            hess[c * n + r] = v;
        }
    }
    (sigma, hess)
}

// ---------------------------------------------------------------------------
// Linearized decay
// ---------------------------------------------------------------------------

/// Maximum amplitude for which the linearized prediction's cubic error term
/// stays below the comparison tolerances used downstream.
pub const LINEAR_REGIME_LIMIT: f64 = 1e-2;

/// Predicted sup of the potential at time `t` for a single-eigenmode start:
/// amplitude times exp(-mu t) with mu the Laplace eigenvalue of the mode.
/// The neglected terms are cubic in the amplitude.
pub fn linearized_mode_decay(atlas: &MetricAtlas, data: &InitialData, t: f64) -> Result<f64> {
    let amplitude = match data {
        InitialData::TorusMode { amplitude, .. } => {
            if atlas.kind != BaseKind::Torus {
                return Err(Error::NotAnEigenmode(
                    "torus wave vector given for a sphere base".into(),
                ));
            }
            *amplitude
        }
        InitialData::SphereZonal { amplitude, .. } => {
            if atlas.kind != BaseKind::Sphere {
                return Err(Error::NotAnEigenmode(
                    "sphere harmonic given for a torus base".into(),
                ));
            }
            *amplitude
        }
        _ => {
            return Err(Error::NotAnEigenmode(
                "decay prediction needs a single eigenmode".into(),
            ))
        }
    };
    if amplitude.abs() > LINEAR_REGIME_LIMIT {
        return Err(Error::AmplitudeTooLarge(amplitude));
    }
    let mu = data
        .linear_decay_rate(atlas)
        .expect("single modes always carry a rate");
    Ok(amplitude.abs() * (-mu * t).exp())
}

// ---------------------------------------------------------------------------
// Analytic sphere harmonics
// ---------------------------------------------------------------------------

/// Value and analytic covariant derivatives of a zonal harmonic at one
/// chart point.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicRestriction {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [f64; 9],
}

/// Zonal harmonic of degree `ell` (built on the ambient height function
/// m = ±(1 - r^2)/(1 + r^2)) restricted to a stereographic chart, with
/// closed-form covariant gradient and Hessian. The formulas are
/// curvature-free: the conformal factor cancels identically.
pub fn sphere_harmonic_restriction(
    ell: u32,
    chart: usize,
    x: &[f64; MAX_DIM],
) -> Result<HarmonicRestriction> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let q = 1.0 + r2;
    let sign = if chart == 0 { 1.0 } else { -1.0 };
    let m = sign * (1.0 - r2) / q;
    // dm_i = -4 s x_i / q^2; covariant m_{;ij} = -4 s (1 - r^2)/q^3 delta_ij.
    let dm = [
        -4.0 * sign * x[0] / (q * q),
        -4.0 * sign * x[1] / (q * q),
        0.0,
    ];
    let ddm_scale = -4.0 * sign * (1.0 - r2) / (q * q * q);

    let mut out = HarmonicRestriction {
        value: 0.0,
        grad: [0.0; MAX_DIM],
        hess: [0.0; 9],
    };
    match ell {
        0 => {
            out.value = 1.0;
        }
        1 => {
            out.value = m;
            out.grad = dm;
            for i in 0..2 {
                out.hess[i * 2 + i] = ddm_scale;
            }
        }
        2 => {
            // (3 m^2 - 1)/2: chain rule on top of the degree-1 jets. The
            // product rule holds covariantly, so the Hessian is
            // 3 dm_i dm_j + 3 m m_{;ij}.
            out.value = (3.0 * m * m - 1.0) / 2.0;
            for i in 0..2 {
                out.grad[i] = 3.0 * m * dm[i];
            }
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 3.0 * dm[i] * dm[j];
                    if i == j {
                        v += 3.0 * m * ddm_scale;
                    }
                    out.hess[i * 2 + j] = v;
                }
            }
        }
        _ => return Err(Error::HarmonicDegree(ell)),
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Frozen case files
// ---------------------------------------------------------------------------

/// One frozen reference case: an input pair, the expected angle, and where
/// the expected value comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCase {
    pub name: String,
    pub sigma: Vec<Vec<f64>>,
    pub hess: Vec<Vec<f64>>,
    pub expected: f64,
    pub tolerance: f64,
    /// Origin of the expected value: TRIVIAL (immediate), DERIVED (worked
    /// out independently), or PAPER (quoted from the literature).
    pub provenance: String,
}

const PROVENANCE_TAGS: [&str; 3] = ["TRIVIAL", "DERIVED", "PAPER"];

impl OracleCase {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Row-major flattening for the angle routines.
    pub fn sigma_flat(&self) -> Vec<f64> {
        self.sigma.iter().flatten().copied().collect()
    }

    pub fn hess_flat(&self) -> Vec<f64> {
        self.hess.iter().flatten().copied().collect()
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn matrix_json(m: &[Vec<f64>]) -> String {
    let rows: Vec<String> = m
        .iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
            format!("[{}]", cells.join(","))
        })
        .collect();
    format!("[{}]", rows.join(","))
}

/// One JSON object per case, one case per line; decimals carry 17
/// significant digits so values round-trip exactly.
pub fn cases_to_jsonl(cases: &[OracleCase]) -> String {
    let mut out = String::new();
    for case in cases {
        out.push_str(&format!(
            "{{\"name\":{},\"inputs\":{{\"sigma\":{},\"hess\":{}}},\"expected\":{},\"tolerance\":{},\"provenance\":{}}}\n",
            Value::String(case.name.clone()),
            matrix_json(&case.sigma),
            matrix_json(&case.hess),
            fmt17(case.expected),
            fmt17(case.tolerance),
            Value::String(case.provenance.clone()),
        ));
    }
    out
}

fn parse_matrix(v: &Value, what: &str, line: usize) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: String| Error::CaseParse { line, msg };
    let rows = v
        .as_array()
        .ok_or_else(|| bad(format!("{what} must be an array of rows")))?;
    let mut out = Vec::new();
    for row in rows {
        let cells = row
            .as_array()
            .ok_or_else(|| bad(format!("{what} rows must be arrays")))?;
        let mut r = Vec::new();
        for c in cells {
            r.push(
                c.as_f64()
                    .ok_or_else(|| bad(format!("{what} entries must be decimals")))?,
            );
        }
        out.push(r);
    }
    let n = out.len();
    if n == 0 || n > MAX_DIM || out.iter().any(|r| r.len() != n) {
        return Err(bad(format!("{what} must be square with 1..=3 rows")));
    }
    Ok(out)
}

/// Parse a case file produced by [`cases_to_jsonl`] (or by hand). Line
/// numbers in errors are 1-based; blank lines are allowed.
pub fn parse_cases(text: &str) -> Result<Vec<OracleCase>> {
    let mut cases = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |msg: String| Error::CaseParse { line, msg };
        if raw.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(raw).map_err(|e| bad(format!("not JSON: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| bad("case must be a JSON object".into()))?;
        let name = obj
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field name".into()))?
            .to_string();
        let inputs = obj
            .get("inputs")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing object field inputs".into()))?;
        let sigma = parse_matrix(
            inputs
                .get("sigma")
                .ok_or_else(|| bad("inputs.sigma missing".into()))?,
            "inputs.sigma",
            line,
        )?;
        let hess = parse_matrix(
            inputs
                .get("hess")
                .ok_or_else(|| bad("inputs.hess missing".into()))?,
            "inputs.hess",
            line,
        )?;
        if hess.len() != sigma.len() {
            return Err(bad("sigma and hess dimensions differ".into()));
        }
        let expected = obj
            .get("expected")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing decimal field expected".into()))?;
        if !expected.is_finite() {
            return Err(bad("expected must be finite".into()));
        }
        let tolerance = obj
            .get("tolerance")
            .and_then(Value::as_f64)
            .ok_or_else(|| bad("missing decimal field tolerance".into()))?;
        if !(tolerance > 0.0) {
            return Err(bad("tolerance must be positive".into()));
        }
        let provenance = obj
            .get("provenance")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field provenance".into()))?
            .to_string();
        if !PROVENANCE_TAGS.contains(&provenance.as_str()) {
            return Err(bad(format!(
                "provenance {provenance:?} not one of {PROVENANCE_TAGS:?}"
            )));
        }
        cases.push(OracleCase {
            name,
            sigma,
            hess,
            expected,
            tolerance,
            provenance,
        });
    }
    Ok(cases)
}

/// The frozen built-in reference set.
pub fn builtin_cases() -> Vec<OracleCase> {
    let id = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|r| (0..n).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect()
    };
    let diag = |d: &[f64]| -> Vec<Vec<f64>> {
        let n = d.len();
        (0..n)
            .map(|r| (0..n).map(|c| if r == c { d[r] } else { 0.0 }).collect())
            .collect()
    };
    vec![
        OracleCase {
            name: "flat-identity".into(),
            sigma: id(3),
            hess: diag(&[0.0, 0.0, 0.0]),
            expected: 0.0,
            tolerance: 1e-12,
            provenance: "TRIVIAL".into(),
        },
        OracleCase {
            name: "unit-hessian-right-angle".into(),
            sigma: id(2),
            hess: diag(&[1.0, 1.0]),
            expected: std::f64::consts::FRAC_PI_2,
            tolerance: 1e-12,
            provenance: "DERIVED".into(),
        },
        OracleCase {
            name: "metric-matching-hessian-right-angle".into(),
            sigma: diag(&[2.0, 1.0]),
            hess: diag(&[2.0, 1.0]),
            expected: std::f64::consts::FRAC_PI_2,
            tolerance: 1e-12,
            provenance: "DERIVED".into(),
        },
        OracleCase {
            name: "arctan-ladder-straight-angle".into(),
            sigma: id(3),
            hess: diag(&[1.0, 2.0, 3.0]),
            expected: std::f64::consts::PI,
            tolerance: 1e-12,
            provenance: "DERIVED".into(),
        },
    ]
}

// ---------------------------------------------------------------------------
